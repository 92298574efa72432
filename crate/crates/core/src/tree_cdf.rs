//! Tree-CDFs of conditionally uniform measures.
//!
//! A [`TreeMeasure`] is a partition tree whose interior nodes carry the
//! conditional mass `θ = G(A_l | A)` of their left child and whose leaves are
//! uniform. Its tree-CDF is the composition of per-node local moves along the
//! branch holding a point, applied from the deepest interior node up to the
//! root. Each local move only rescales the split coordinate, piecewise
//! linearly, so both directions are closed form.

use crate::error::{Error, Result};
use crate::geometry::{NodeId, PartitionTree, Rect, Split, SplitNode};

/// Bounds applied to every `θ` so the measure keeps full support.
pub const THETA_FLOOR: f64 = 1e-12;
pub const THETA_CEIL: f64 = 1.0 - 1e-12;

/// Precomputed parameters of the local move at one interior node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalMove {
    pub dim: usize,
    pub lo: f64,
    pub cut: f64,
    pub hi: f64,
    pub theta: f64,
    pub left: NodeId,
    pub right: NodeId,
    /// `θ / μ(A_l|A)`: slope of the move on the left child.
    scale_left: f64,
    /// `(1 − θ) / μ(A_r|A)`: slope of the move on the right child.
    scale_right: f64,
    /// Image of the cut, `lo + θ·(hi − lo)`.
    bound: f64,
    log_left: f64,
    log_right: f64,
}

impl LocalMove {
    pub fn new(region: &Rect, split: &Split) -> Self {
        let dim = split.dim;
        let lo = region.lower()[dim];
        let hi = region.upper()[dim];
        let cut = split.cut;
        let theta = split.theta;
        let width = hi - lo;
        let mu_left = (cut - lo) / width;
        let mu_right = (hi - cut) / width;
        LocalMove {
            dim,
            lo,
            cut,
            hi,
            theta,
            left: split.left,
            right: split.right,
            scale_left: theta * width / (cut - lo),
            scale_right: (1.0 - theta) * width / (hi - cut),
            bound: lo + theta * width,
            log_left: theta.ln() - mu_left.ln(),
            log_right: (1.0 - theta).ln() - mu_right.ln(),
        }
    }

    fn from_node(node: &SplitNode) -> Option<Self> {
        node.split.as_ref().map(|s| LocalMove::new(&node.region, s))
    }

    /// Moves coordinate `x` of a point lying in the left (`left == true`) or
    /// right child.
    #[inline]
    pub fn forward_coord(&self, x: f64, left: bool) -> f64 {
        let out = if left {
            self.lo + (x - self.lo) * self.scale_left
        } else {
            self.hi - (self.hi - x) * self.scale_right
        };
        out.max(self.lo.next_up()).min(self.hi)
    }

    /// Inverse move of coordinate `y`; also reports which child the
    /// pre-image lies in.
    #[inline]
    pub fn inverse_coord(&self, y: f64) -> (f64, bool) {
        if y <= self.bound {
            let x = self.lo + (y - self.lo) / self.scale_left;
            (x.max(self.lo.next_up()).min(self.cut), true)
        } else {
            let x = self.hi - (self.hi - y) / self.scale_right;
            (x.max(self.cut.next_up()).min(self.hi), false)
        }
    }

    /// `log(G(child|A) / μ(child|A))` for the left or right child.
    #[inline]
    pub fn log_ratio(&self, left: bool) -> f64 {
        if left {
            self.log_left
        } else {
            self.log_right
        }
    }

    /// Slope of the move on the chosen child.
    pub fn scale(&self, left: bool) -> f64 {
        if left {
            self.scale_left
        } else {
            self.scale_right
        }
    }
}

fn interior_move(node: &SplitNode) -> Result<LocalMove> {
    LocalMove::from_node(node).ok_or_else(|| Error::invalid("local move requires an interior node"))
}

fn check_in_region(node: &SplitNode, x: &[f64]) -> Result<()> {
    if node.region.contains(x)? {
        Ok(())
    } else {
        Err(Error::invalid(format!("point {x:?} lies outside the node region")))
    }
}

/// Applies the local move of an interior node to a point of its region.
pub fn local_move(node: &SplitNode, x: &[f64]) -> Result<Vec<f64>> {
    let mv = interior_move(node)?;
    check_in_region(node, x)?;
    let mut out = x.to_vec();
    out[mv.dim] = mv.forward_coord(x[mv.dim], x[mv.dim] <= mv.cut);
    Ok(out)
}

/// Inverse of [`local_move`] on the same node.
pub fn local_move_inverse(node: &SplitNode, y: &[f64]) -> Result<Vec<f64>> {
    let mv = interior_move(node)?;
    check_in_region(node, y)?;
    let mut out = y.to_vec();
    out[mv.dim] = mv.inverse_coord(y[mv.dim]).0;
    Ok(out)
}

/// A conditionally uniform probability measure on a partition tree.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeMeasure {
    tree: PartitionTree,
    restriction: Option<usize>,
    moves: Vec<Option<LocalMove>>,
}

impl TreeMeasure {
    /// Wraps a tree whose interior nodes carry `θ`. Values are clamped into
    /// `[THETA_FLOOR, THETA_CEIL]`.
    pub fn new(mut tree: PartitionTree, restriction: Option<usize>) -> Result<Self> {
        if let Some(j) = restriction {
            if j >= tree.dim() {
                return Err(Error::invalid(format!(
                    "restriction dimension {j} out of range for d = {}",
                    tree.dim()
                )));
            }
        }
        for id in 0..tree.len() {
            let node = tree.node_mut(id);
            if let Some(split) = node.split.as_mut() {
                if !split.theta.is_finite() {
                    return Err(Error::invalid(format!("node {id} has non-finite theta")));
                }
                if restriction.is_some_and(|j| j != split.dim) {
                    return Err(Error::invalid(format!(
                        "node {id} splits dimension {} but the measure is restricted",
                        split.dim
                    )));
                }
                split.theta = split.theta.clamp(THETA_FLOOR, THETA_CEIL);
            }
        }
        let moves = tree.nodes().iter().map(LocalMove::from_node).collect();
        Ok(TreeMeasure {
            tree,
            restriction,
            moves,
        })
    }

    /// The uniform measure (identity tree-CDF).
    pub fn uniform(d: usize) -> Result<Self> {
        TreeMeasure::new(PartitionTree::new(d)?, None)
    }

    pub fn tree(&self) -> &PartitionTree {
        &self.tree
    }

    pub fn dim(&self) -> usize {
        self.tree.dim()
    }

    pub fn restriction(&self) -> Option<usize> {
        self.restriction
    }

    pub fn local_move_at(&self, id: NodeId) -> Option<&LocalMove> {
        self.moves[id].as_ref()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, measure has {}",
                x.len(),
                self.dim()
            )));
        }
        if !x.iter().all(|&v| v > 0.0 && v <= 1.0) {
            return Err(Error::invalid(format!("point {x:?} lies outside (0,1]^d")));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = x.to_vec();
        self.push(&mut out);
        Ok(out)
    }

    pub fn inverse(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_point(u)?;
        let mut out = u.to_vec();
        self.pull(&mut out);
        Ok(out)
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.log_density_unchecked(x))
    }

    /// Applies the tree-CDF in place and returns the log-density at the
    /// original point. The leaf path is located once from the input and every
    /// move is applied against it, finest first; each move keeps the point
    /// inside its node so the branch choices stay valid.
    pub fn push(&self, x: &mut [f64]) -> f64 {
        self.push_from(PartitionTree::ROOT, x)
    }

    fn push_from(&self, id: NodeId, x: &mut [f64]) -> f64 {
        match &self.moves[id] {
            None => 0.0,
            Some(mv) => {
                let left = x[mv.dim] <= mv.cut;
                let below = self.push_from(if left { mv.left } else { mv.right }, x);
                x[mv.dim] = mv.forward_coord(x[mv.dim], left);
                below + mv.log_ratio(left)
            }
        }
    }

    /// Applies the inverse tree-CDF in place, coarse to fine.
    pub fn pull(&self, u: &mut [f64]) {
        let mut id = PartitionTree::ROOT;
        while let Some(mv) = &self.moves[id] {
            let (x, left) = mv.inverse_coord(u[mv.dim]);
            u[mv.dim] = x;
            id = if left { mv.left } else { mv.right };
        }
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let mut id = PartitionTree::ROOT;
        let mut total = 0.0;
        while let Some(mv) = &self.moves[id] {
            let left = x[mv.dim] <= mv.cut;
            total += mv.log_ratio(left);
            id = if left { mv.left } else { mv.right };
        }
        total
    }

    /// `G(leaf)`: product of conditional masses along the leaf's branch.
    pub fn leaf_mass(&self, leaf: NodeId) -> f64 {
        let path = self.tree.path_to(leaf);
        path.windows(2)
            .map(|w| {
                let mv = self.moves[w[0]].as_ref().expect("interior node on path");
                if w[1] == mv.left {
                    mv.theta
                } else {
                    1.0 - mv.theta
                }
            })
            .product()
    }

    /// Forward image of a leaf. The moves are affine on each child, so the
    /// image is a box.
    pub fn leaf_image(&self, leaf: NodeId) -> Rect {
        let (lower, width) = self.image_bounds(leaf);
        let upper = lower.iter().zip(&width).map(|(a, w)| a + w).collect();
        Rect::new(lower, upper).expect("leaf image stays inside the cube")
    }

    /// Volume of [`leaf_image`](Self::leaf_image) from its tracked side
    /// lengths, which keep full relative precision for narrow images.
    pub fn leaf_image_volume(&self, leaf: NodeId) -> f64 {
        self.image_bounds(leaf).1.iter().product()
    }

    /// Image bounds as (lower, width) pairs, avoiding cancellation.
    fn image_bounds(&self, leaf: NodeId) -> (Vec<f64>, Vec<f64>) {
        let region = &self.tree.node(leaf).region;
        let mut lower = region.lower().to_vec();
        let mut width: Vec<f64> = (0..region.dim()).map(|j| region.width(j)).collect();
        let path = self.tree.path_to(leaf);
        for w in path.windows(2).rev() {
            let mv = self.moves[w[0]].as_ref().expect("interior node on path");
            let left = w[1] == mv.left;
            let j = mv.dim;
            let s = mv.scale(left);
            if left {
                lower[j] = mv.lo + (lower[j] - mv.lo) * s;
                width[j] *= s;
            } else {
                let upper = mv.hi - (mv.hi - (lower[j] + width[j])) * s;
                width[j] *= s;
                lower[j] = upper - width[j];
            }
        }
        (lower, width)
    }
}
