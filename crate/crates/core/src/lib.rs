//! Gradient boosted decision trees over multi-table relational data.
//!
//! A dataset is a set of tables linked by set-valued relations, with one
//! labeled root table. Training walks a [`Schedule`] (an acyclic unrolling of
//! the schema graph) twice per boosting iteration: a forward pass fits one
//! tree per node on the node's own attributes and pushes residuals down to
//! related rows, then a backward pass refits every node bottom-up on its own
//! attributes plus score, hard-attention and soft-attention features computed
//! from its children's trees. Only the root's backward trees enter the
//! boosted sum.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the command
//! line live in the `relgbdt` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod attention;
pub mod boosting;
pub mod data;
pub mod flatten;
pub mod loss;
pub mod schedule;
pub mod seed;
pub mod synthetic;
pub mod tree;

pub use analysis::{importance_report, variable_importance, NodeImportance};
pub use attention::{AttentionConfig, FeatureBlock};
pub use boosting::{train, BoostConfig, EvalMetric, IterationLog, ModelError, StrongModel};
pub use data::{
    load_instance, validate_instance, AttrKind, DatasetInstance, InstanceBuilder, LabelValue,
    PropValue, RowRecord, Schema, TableDef, TableRecords, TaskKind, ValidationReport,
};
pub use flatten::{flatten, Flattener};
pub use loss::Loss;
pub use schedule::{build_schedule, Schedule};
pub use synthetic::{generate, SynthConfig};
pub use tree::{train_tree, ColumnData, FeatureColumn, RegressionTree, TreeConfig};
