//! Minimal-depth variable importance.
//!
//! For a schedule node, each feature column's first-use depth is averaged
//! over the node's backward trees that split on it, then mapped linearly so
//! that depth 0 gives 1 and an unused feature gives 0:
//! `(D + 1 − d̄) / (D + 1)` with `D` the configured maximum depth.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::boosting::StrongModel;
use crate::tree::feature_min_depths;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("unknown schedule node {0:?}")]
    UnknownNode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeImportance {
    pub node: String,
    pub column: String,
    pub importance: f64,
}

/// Importance of every feature column seen by `node`'s backward trees.
/// Empty when the model has no iterations.
pub fn variable_importance(
    model: &StrongModel,
    node: &str,
) -> Result<BTreeMap<String, f64>, AnalysisError> {
    let index = model
        .schedule
        .node_index(node)
        .ok_or_else(|| AnalysisError::UnknownNode(String::from(node)))?;
    Ok(node_importance(model, index))
}

fn node_importance(model: &StrongModel, node: usize) -> BTreeMap<String, f64> {
    let scale = (model.config.tree.max_depth + 1) as f64;
    // column -> (sum of first-use depths, trees using it)
    let mut depths: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for tree in model.backward_trees(node) {
        for name in tree.features() {
            depths.entry(name.clone()).or_insert((0, 0));
        }
        for (name, d) in feature_min_depths(tree) {
            let e = depths.entry(name).or_insert((0, 0));
            e.0 += d;
            e.1 += 1;
        }
    }
    depths
        .into_iter()
        .map(|(name, (sum, count))| {
            let importance = if count == 0 {
                0.0
            } else {
                let mean = sum as f64 / count as f64;
                ((scale - mean) / scale).clamp(0.0, 1.0)
            };
            (name, importance)
        })
        .collect()
}

/// Per-node listing in schedule order; within a node, importance
/// descending, ties by column name.
pub fn importance_report(model: &StrongModel) -> Vec<NodeImportance> {
    let mut out = Vec::new();
    for (n, node) in model.schedule.nodes().iter().enumerate() {
        let mut rows: Vec<(String, f64)> = node_importance(model, n).into_iter().collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out.extend(rows.into_iter().map(|(column, importance)| NodeImportance {
            node: node.id.clone(),
            column,
            importance,
        }));
    }
    out
}
