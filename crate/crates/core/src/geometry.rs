//! Half-open boxes and recursive dyadic partition trees on the unit cube.
//!
//! A box is `(a_1, b_1] × ⋯ × (a_d, b_d]`. Splitting a box in dimension `j`
//! at fraction `t` produces `(a_j, c]` and `(c, b_j]` with
//! `c = a_j + t·(b_j − a_j)`. The cut is computed once and stored, so every
//! later query sees the same boundary bit for bit.

use crate::error::{Error, Result};

/// Children narrower than this in the split dimension are rejected.
pub const MIN_CHILD_WIDTH: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Rect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Rect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "box bounds must be non-empty and equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if !(0.0..1.0).contains(&a) || !(b > a && b <= 1.0) {
                return Err(Error::invalid(format!(
                    "dimension {j}: bounds ({a}, {b}] are not a non-empty interval inside the unit cube"
                )));
            }
        }
        Ok(Rect { lower, upper })
    }

    pub fn unit_cube(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(Rect {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).product()
    }

    /// `log2` of the volume, accumulated per dimension so deep nodes do not
    /// underflow.
    pub fn log2_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j).log2()).sum()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, box has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&a, &b))| a < v && v <= b)
    }

    /// Absolute coordinate of the cut at `fraction` of the extent in `dim`.
    pub fn cut_at(&self, dim: usize, fraction: f64) -> f64 {
        let a = self.lower[dim];
        a + fraction * (self.upper[dim] - a)
    }

    /// Splits into left `(a, c]` and right `(c, b]` children along `dim`.
    pub fn split(&self, dim: usize, fraction: f64) -> Result<(Rect, Rect)> {
        let cut = self.checked_cut(dim, fraction)?;
        Ok(self.split_at_cut(dim, cut))
    }

    pub(crate) fn checked_cut(&self, dim: usize, fraction: f64) -> Result<f64> {
        if dim >= self.dim() {
            return Err(Error::invalid(format!(
                "split dimension {dim} out of range for a {}-dimensional box",
                self.dim()
            )));
        }
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid(format!(
                "split fraction {fraction} must lie strictly inside (0, 1)"
            )));
        }
        let cut = self.cut_at(dim, fraction);
        if !is_usable_cut(self.lower[dim], cut, self.upper[dim]) {
            return Err(Error::invalid(format!(
                "split at {cut} in dimension {dim} leaves a child narrower than {MIN_CHILD_WIDTH}"
            )));
        }
        Ok(cut)
    }

    fn split_at_cut(&self, dim: usize, cut: f64) -> (Rect, Rect) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = cut;
        right.lower[dim] = cut;
        (left, right)
    }
}

/// True when both children of a cut at `cut` inside `(a, b]` have usable width.
pub(crate) fn is_usable_cut(a: f64, cut: f64, b: f64) -> bool {
    cut > a && cut < b && cut - a >= MIN_CHILD_WIDTH && b - cut >= MIN_CHILD_WIDTH
}

pub type NodeId = usize;

/// The split carried by an interior node.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub dim: usize,
    /// Position of the cut as a fraction of the node's extent in `dim`.
    pub fraction: f64,
    /// Absolute cut coordinate; left child is `(a, cut]`.
    pub cut: f64,
    pub left: NodeId,
    pub right: NodeId,
    /// Conditional mass of the left child, `G(A_l | A)`.
    pub theta: f64,
    /// Empirical conditional `F̃(A_l | A)` seen while fitting.
    pub empirical_left: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitNode {
    pub region: Rect,
    /// Root has depth 1.
    pub depth: usize,
    /// Number of fitting residuals that fell in this node.
    pub count: usize,
    pub split: Option<Split>,
}

impl SplitNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// Uniform conditional mass of the left child, `μ(A_l | A)`.
    pub fn uniform_left(&self) -> Option<f64> {
        self.split.as_ref().map(|s| {
            let a = self.region.lower()[s.dim];
            let b = self.region.upper()[s.dim];
            (s.cut - a) / (b - a)
        })
    }

    /// Uniform conditional mass of the right child, `μ(A_r | A)`.
    pub fn uniform_right(&self) -> Option<f64> {
        self.split.as_ref().map(|s| {
            let a = self.region.lower()[s.dim];
            let b = self.region.upper()[s.dim];
            (b - s.cut) / (b - a)
        })
    }
}

/// A recursive dyadic partition of `(0,1]^d` stored as an arena; node 0 is
/// the root.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionTree {
    nodes: Vec<SplitNode>,
    depth: usize,
}

impl PartitionTree {
    pub const ROOT: NodeId = 0;

    /// Root-only tree over the unit cube.
    pub fn new(d: usize) -> Result<Self> {
        Ok(PartitionTree {
            nodes: vec![SplitNode {
                region: Rect::unit_cube(d)?,
                depth: 1,
                count: 0,
                split: None,
            }],
            depth: 1,
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].region.dim()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, id: NodeId) -> &SplitNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[SplitNode] {
        &self.nodes
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut SplitNode {
        &mut self.nodes[id]
    }

    pub fn set_count(&mut self, id: NodeId, count: usize) {
        self.nodes[id].count = count;
    }

    /// Sets the left child's conditional mass of an interior node.
    pub fn set_theta(&mut self, id: NodeId, theta: f64) -> Result<()> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::invalid(format!("conditional mass {theta} is not in (0, 1)")));
        }
        match self.nodes.get_mut(id).and_then(|n| n.split.as_mut()) {
            Some(split) => {
                split.theta = theta;
                Ok(())
            }
            None => Err(Error::invalid(format!("node {id} is not an interior node"))),
        }
    }

    /// Splits leaf `id`. The new split starts with the uniform conditional
    /// (`theta = μ(A_l|A)`) and that same value as its empirical conditional.
    pub fn split_leaf(&mut self, id: NodeId, dim: usize, fraction: f64) -> Result<(NodeId, NodeId)> {
        let node = &self.nodes[id];
        if !node.is_leaf() {
            return Err(Error::invalid(format!("node {id} is already split")));
        }
        let cut = node.region.checked_cut(dim, fraction)?;
        let (left_rect, right_rect) = node.region.split_at_cut(dim, cut);
        let a = node.region.lower()[dim];
        let b = node.region.upper()[dim];
        let uniform = (cut - a) / (b - a);
        let child_depth = node.depth + 1;
        let left = self.nodes.len();
        let right = left + 1;
        self.nodes[id].split = Some(Split {
            dim,
            fraction,
            cut,
            left,
            right,
            theta: uniform,
            empirical_left: uniform,
        });
        for region in [left_rect, right_rect] {
            self.nodes.push(SplitNode {
                region,
                depth: child_depth,
                count: 0,
                split: None,
            });
        }
        self.depth = self.depth.max(child_depth);
        Ok((left, right))
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_leaf())
            .map(|(i, _)| i)
    }

    pub fn interior(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.is_leaf())
            .map(|(i, _)| i)
    }

    /// Child of an interior node that holds `x` under the half-open rule:
    /// a coordinate equal to the cut belongs to the left child.
    #[inline]
    pub fn child_for(split: &Split, x: &[f64]) -> NodeId {
        if x[split.dim] <= split.cut {
            split.left
        } else {
            split.right
        }
    }

    /// Root-to-leaf chain of nodes containing `x`.
    pub fn leaf_path(&self, x: &[f64]) -> Result<Vec<NodeId>> {
        let root = &self.nodes[Self::ROOT].region;
        if !root.contains(x)? {
            return Err(Error::invalid(format!("point {x:?} lies outside (0,1]^d")));
        }
        let mut path = vec![Self::ROOT];
        let mut id = Self::ROOT;
        while let Some(split) = &self.nodes[id].split {
            id = Self::child_for(split, x);
            path.push(id);
        }
        Ok(path)
    }

    /// Leaf containing `x`; `x` is assumed to be in the cube.
    #[inline]
    pub fn locate(&self, x: &[f64]) -> NodeId {
        let mut id = Self::ROOT;
        while let Some(split) = &self.nodes[id].split {
            id = Self::child_for(split, x);
        }
        id
    }

    /// Parent links, computed on demand.
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parents = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(s) = &node.split {
                parents[s.left] = Some(id);
                parents[s.right] = Some(id);
            }
        }
        parents
    }

    /// Root-to-node chain ending at `target`.
    pub fn path_to(&self, target: NodeId) -> Vec<NodeId> {
        let parents = self.parents();
        let mut path = vec![target];
        let mut id = target;
        while let Some(p) = parents[id] {
            path.push(p);
            id = p;
        }
        path.reverse();
        path
    }
}
