//! Versioned JSON model files.
//!
//! Trees are stored as one string each, listing nodes in pre-order:
//! `L<count>` for a leaf and `S<dim>:<fraction>:<theta>:<count>:<empirical_left>`
//! for a split, whose left subtree follows and then its right subtree.
//! Floats use the shortest representation that round-trips exactly, so a
//! loaded model evaluates bit-identically to the one written.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boosting::{Ensemble, FitConfig};
use crate::error::{Error, Result};
use crate::geometry::{NodeId, PartitionTree};
use crate::pipeline::preprocess::PreprocessRecord;
use crate::tree_cdf::TreeMeasure;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    dimension: usize,
    config: FitConfig,
    preprocess: PreprocessRecord,
    improvements: Vec<f64>,
    importance: Vec<f64>,
    trees: Vec<TreeRecord>,
}

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    restriction: Option<usize>,
    nodes: String,
}

pub fn to_json(ensemble: &Ensemble) -> Result<String> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        dimension: ensemble.dim(),
        config: ensemble.config().clone(),
        preprocess: ensemble.preprocess().clone(),
        improvements: ensemble.improvements().to_vec(),
        importance: ensemble.importance().to_vec(),
        trees: ensemble
            .trees()
            .iter()
            .map(|t| TreeRecord {
                restriction: t.restriction(),
                nodes: encode_tree(t.tree()),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::model(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn from_json(text: &str) -> Result<Ensemble> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::model(format!("not a model file: {e}")))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(Error::model(format!(
                "unsupported model format version {v}; this build reads version {FORMAT_VERSION}"
            )))
        }
        None => return Err(Error::model("model file has no format_version")),
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::model(format!("malformed model file: {e}")))?;
    if file.preprocess.dim() != file.dimension {
        return Err(Error::model("preprocessing record does not match the model dimension"));
    }
    let trees = file
        .trees
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let tree = decode_tree(&rec.nodes, file.dimension)
                .map_err(|e| Error::model(format!("tree {k}: {e}")))?;
            TreeMeasure::new(tree, rec.restriction).map_err(|e| Error::model(format!("tree {k}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::from_parts(trees, file.improvements, file.importance, file.preprocess, file.config)
        .map_err(|e| Error::model(e.to_string()))
}

pub fn save(ensemble: &Ensemble, path: &Path) -> Result<()> {
    fs::write(path, to_json(ensemble)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Ensemble> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::model(format!("cannot read {}: {e}", path.display())))?;
    from_json(&text)
}

fn encode_tree(tree: &PartitionTree) -> String {
    let mut tokens = Vec::with_capacity(tree.len());
    let mut stack = vec![PartitionTree::ROOT];
    while let Some(id) = stack.pop() {
        let node = tree.node(id);
        match &node.split {
            None => tokens.push(format!("L{}", node.count)),
            Some(s) => {
                tokens.push(format!(
                    "S{}:{}:{}:{}:{}",
                    s.dim, s.fraction, s.theta, node.count, s.empirical_left
                ));
                stack.push(s.right);
                stack.push(s.left);
            }
        }
    }
    tokens.join(" ")
}

fn decode_tree(text: &str, dim: usize) -> std::result::Result<PartitionTree, String> {
    let mut tree = PartitionTree::new(dim).map_err(|e| e.to_string())?;
    let mut pending: Vec<NodeId> = vec![PartitionTree::ROOT];
    for token in text.split_whitespace() {
        let id = pending.pop().ok_or("trailing nodes after a complete tree")?;
        if let Some(count) = token.strip_prefix('L') {
            let count = count.parse().map_err(|_| format!("bad leaf token {token:?}"))?;
            tree.set_count(id, count);
        } else if let Some(body) = token.strip_prefix('S') {
            let fields: Vec<&str> = body.split(':').collect();
            if fields.len() != 5 {
                return Err(format!("bad split token {token:?}"));
            }
            let bad = || format!("bad split token {token:?}");
            let split_dim: usize = fields[0].parse().map_err(|_| bad())?;
            let fraction: f64 = fields[1].parse().map_err(|_| bad())?;
            let theta: f64 = fields[2].parse().map_err(|_| bad())?;
            let count: usize = fields[3].parse().map_err(|_| bad())?;
            let empirical_left: f64 = fields[4].parse().map_err(|_| bad())?;
            let (left, right) = tree
                .split_leaf(id, split_dim, fraction)
                .map_err(|e| format!("{token:?}: {e}"))?;
            tree.set_count(id, count);
            let split = tree.node_mut(id).split.as_mut().expect("just split");
            split.theta = theta;
            split.empirical_left = empirical_left;
            pending.push(right);
            pending.push(left);
        } else {
            return Err(format!("unknown node token {token:?}"));
        }
    }
    if !pending.is_empty() {
        return Err("tree description ends early".into());
    }
    Ok(tree)
}
