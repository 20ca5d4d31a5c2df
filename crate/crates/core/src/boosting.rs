//! The relational boosting loop.
//!
//! Each iteration computes the loss gradient at the root, then runs two
//! passes over the schedule per output class:
//!
//! 1. forward, in topological order: every node fits a tree on its own
//!    attributes; the residual (pseudo-response minus prediction) becomes the
//!    pseudo-response of the related child rows, averaged when a child row is
//!    reached from several parent rows;
//! 2. backward, in reverse topological order: every node is refit on its full
//!    feature block, whose relational columns come from the children's
//!    freshly refit trees.
//!
//! The root's backward tree is the boosting step: `F ← F − γ h`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attention::{assemble_all, assemble_b, AttentionConfig, FeatureBlock, Plan};
use crate::data::{DatasetInstance, LabelValue, Schema, TaskKind};
use crate::loss::Loss;
use crate::schedule::{build_schedule, Schedule, DEFAULT_COVER_COUNT};
use crate::seed::{tree_rng, Pass};
use crate::tree::{train_tree_with_rng, RegressionTree, TreeConfig, TreeError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("no labeled training rows")]
    NoTrainingRows,
    #[error("row {row:?}: {message}")]
    Label { row: String, message: &'static str },
    #[error("loss {loss:?} does not fit a {task:?} label")]
    LossMismatch { loss: Loss, task: TaskKind },
    #[error("instance schema does not match the model schema")]
    SchemaMismatch,
    #[error("root row index {0} out of range")]
    RowOutOfRange(usize),
    #[error(
        "stored tree at iteration {iteration}, node {node:?} does not match its feature block"
    )]
    ColumnMismatch { iteration: usize, node: String },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    /// `None` picks the loss matching the label task.
    pub loss: Option<Loss>,
    pub shrinkage: f64,
    pub iterations: usize,
    pub tree: TreeConfig,
    pub cover_count: usize,
    pub attention: AttentionConfig,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            loss: None,
            shrinkage: 0.1,
            iterations: 500,
            tree: TreeConfig::default(),
            cover_count: DEFAULT_COVER_COUNT,
            attention: AttentionConfig::default(),
            seed: 0,
        }
    }
}

impl BoostConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(ModelError::Config("shrinkage must lie in (0, 1]"));
        }
        if self.cover_count == 0 {
            return Err(ModelError::Config("cover count must be positive"));
        }
        self.tree.validate()?;
        Ok(())
    }
}

/// Forward and backward trees of every schedule node for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTrees {
    pub forward: Vec<RegressionTree>,
    pub backward: Vec<RegressionTree>,
}

/// Trees of one boosting iteration, one entry per class.
pub type IterationTrees = Vec<NodeTrees>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMetric {
    Accuracy,
    Rmse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// Mean training loss after the iteration's update.
    pub train_loss: f64,
    pub valid_metric: Option<f64>,
}

/// Trained relational boosted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongModel {
    pub schema_fingerprint: String,
    pub schedule: Schedule,
    pub loss: Loss,
    /// Class names for multiclass models, indexed like the raw scores.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    pub initial: Vec<f64>,
    pub shrinkage: f64,
    pub config: BoostConfig,
    pub iterations: Vec<IterationTrees>,
}

pub struct Trained {
    pub model: StrongModel,
    pub log: Vec<IterationLog>,
}

/// Which root rows to train or score on. `None` means every root row.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions<'a> {
    pub rows: Option<&'a [usize]>,
    pub validation: Option<(&'a DatasetInstance, Option<&'a [usize]>)>,
}

pub fn default_loss(task: TaskKind, classes: usize) -> Loss {
    match task {
        TaskKind::Binary => Loss::BinaryLogloss,
        TaskKind::Regression => Loss::Mse,
        TaskKind::Multiclass => Loss::MulticlassSoftmax { classes },
    }
}

fn sorted_rows(
    instance: &DatasetInstance,
    rows: Option<&[usize]>,
) -> Result<Vec<usize>, ModelError> {
    let n = instance.root_len();
    let mut out = match rows {
        Some(r) => r.to_vec(),
        None => (0..n).collect(),
    };
    out.sort_unstable();
    out.dedup();
    if let Some(&bad) = out.iter().find(|&&r| r >= n) {
        return Err(ModelError::RowOutOfRange(bad));
    }
    Ok(out)
}

/// Numeric targets for `rows`: reals for mse/binary, class indices for
/// multiclass. Unknown classes map to `None`.
fn encode_labels(
    instance: &DatasetInstance,
    rows: &[usize],
    loss: &Loss,
    classes: &[String],
) -> Result<Vec<Option<f64>>, ModelError> {
    let root = instance.schema().root_index();
    let labels = instance.labels();
    rows.iter()
        .map(|&x| {
            let row = || String::from(instance.row_id(root, x));
            match (&labels[x], loss) {
                (None, _) => Err(ModelError::Label {
                    row: row(),
                    message: "missing label",
                }),
                (Some(LabelValue::Real(v)), Loss::Mse) => Ok(Some(*v)),
                (Some(LabelValue::Real(v)), Loss::BinaryLogloss) if *v == 0.0 || *v == 1.0 => {
                    Ok(Some(*v))
                }
                (Some(LabelValue::Class(c)), Loss::MulticlassSoftmax { .. }) => {
                    Ok(classes.iter().position(|k| k == c).map(|k| k as f64))
                }
                _ => Err(ModelError::Label {
                    row: row(),
                    message: "label does not fit the loss",
                }),
            }
        })
        .collect()
}

struct Cascade<'a> {
    schedule: &'a Schedule,
    plan: &'a Plan,
    attention: &'a AttentionConfig,
}

impl Cascade<'_> {
    /// Reverse-topological pass. `fit(node, block)` returns the node's
    /// backward predictions over the block's rows. Returns the root's
    /// predictions.
    fn backward(
        &self,
        mut fit: impl FnMut(usize, &FeatureBlock) -> Result<Vec<f64>, ModelError>,
    ) -> Result<Vec<f64>, ModelError> {
        let n = self.schedule.nodes().len();
        let mut blocks: Vec<Option<FeatureBlock>> = vec![None; n];
        let mut preds: Vec<Vec<f64>> = vec![Vec::new(); n];
        for &node in self.schedule.topological_order().iter().rev() {
            let block = assemble_b(self.plan, self.schedule, node, self.attention, |arc| {
                let child = self.schedule.arc(arc).child;
                (
                    blocks[child].as_ref().expect("children assembled first"),
                    preds[child].as_slice(),
                )
            });
            preds[node] = fit(node, &block)?;
            blocks[node] = Some(block);
        }
        Ok(core::mem::take(&mut preds[self.schedule.root()]))
    }
}

fn fit_or_zero(
    columns: &[crate::tree::FeatureColumn],
    targets: &[f64],
    config: &TreeConfig,
    rng: &mut crate::seed::Rng,
) -> Result<(RegressionTree, Vec<f64>), ModelError> {
    if targets.is_empty() {
        let names = columns.iter().map(|c| c.name.clone()).collect();
        return Ok((RegressionTree::constant(names, 0.0, 0), Vec::new()));
    }
    let tree = train_tree_with_rng(columns, targets, None, config, rng)?;
    let preds = tree.predict_all(columns);
    Ok((tree, preds))
}

/// Forward pass for one class: trains one tree per node on its own
/// attributes and returns `(trees, pseudo-responses)` per node.
pub fn forward_pass(
    schedule: &Schedule,
    plan: &Plan,
    root_pseudo: Vec<f64>,
    config: &TreeConfig,
    seed: u64,
    iteration: usize,
    class: usize,
) -> Result<(Vec<RegressionTree>, Vec<Vec<f64>>), ModelError> {
    let n = schedule.nodes().len();
    let mut pseudo: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut residual: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut trees: Vec<Option<RegressionTree>> = vec![None; n];
    pseudo[schedule.root()] = root_pseudo;
    for &node in schedule.topological_order() {
        if node != schedule.root() {
            pseudo[node] = residual_pseudo_labels(schedule, plan, &residual, node);
        }
        let mut rng = tree_rng(seed, iteration, node, class, Pass::Forward);
        let (tree, preds) = fit_or_zero(plan.prop_block(node), &pseudo[node], config, &mut rng)?;
        residual[node] = pseudo[node]
            .iter()
            .zip(&preds)
            .map(|(y, h)| y - h)
            .collect();
        trees[node] = Some(tree);
    }
    Ok((
        trees
            .into_iter()
            .map(|t| t.expect("every node visited"))
            .collect(),
        pseudo,
    ))
}

/// Pseudo-response of `node`'s rows: the mean, over every (parent node,
/// parent row) that references the row, of the parent's forward residual.
pub fn residual_pseudo_labels(
    schedule: &Schedule,
    plan: &Plan,
    parent_residuals: &[Vec<f64>],
    node: usize,
) -> Vec<f64> {
    let len = plan.rows(node).len();
    let mut sum = vec![0.0; len];
    let mut count = vec![0usize; len];
    for &a in &schedule.node(node).parents {
        let parent = schedule.arc(a).parent;
        for (x, &res) in parent_residuals[parent].iter().enumerate() {
            for &j in plan.links(a, x) {
                sum[j as usize] += res;
                count[j as usize] += 1;
            }
        }
    }
    sum.into_iter()
        .zip(count)
        .map(|(s, c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect()
}

/// Backward pass for one class given forward pseudo-responses. Returns the
/// backward trees and the root's predictions.
#[allow(clippy::too_many_arguments)]
pub fn backward_pass(
    schedule: &Schedule,
    plan: &Plan,
    attention: &AttentionConfig,
    pseudo: &[Vec<f64>],
    config: &TreeConfig,
    seed: u64,
    iteration: usize,
    class: usize,
) -> Result<(Vec<RegressionTree>, Vec<f64>), ModelError> {
    let mut trees: Vec<Option<RegressionTree>> = vec![None; schedule.nodes().len()];
    let cascade = Cascade {
        schedule,
        plan,
        attention,
    };
    let root_preds = cascade.backward(|node, block| {
        let mut rng = tree_rng(seed, iteration, node, class, Pass::Backward);
        let (tree, preds) = fit_or_zero(&block.columns, &pseudo[node], config, &mut rng)?;
        trees[node] = Some(tree);
        Ok(preds)
    })?;
    Ok((
        trees
            .into_iter()
            .map(|t| t.expect("every node visited"))
            .collect(),
        root_preds,
    ))
}

fn metric_for(loss: &Loss) -> EvalMetric {
    match loss {
        Loss::Mse => EvalMetric::Rmse,
        _ => EvalMetric::Accuracy,
    }
}

/// Accuracy (classification) or RMSE (regression) of raw scores against
/// encoded labels; `None` labels count as misclassified.
pub fn evaluate_scores(loss: &Loss, scores: &[Vec<f64>], labels: &[Option<f64>]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    match metric_for(loss) {
        EvalMetric::Rmse => {
            let sq: f64 = scores
                .iter()
                .zip(labels)
                .map(|(s, y)| {
                    let d = s[0] - y.unwrap_or(f64::NAN);
                    d * d
                })
                .sum();
            libm::sqrt(sq / scores.len() as f64)
        }
        EvalMetric::Accuracy => {
            let correct = scores
                .iter()
                .zip(labels)
                .filter(|(s, y)| y.is_some_and(|y| predicted_class(loss, s) == y as usize))
                .count();
            correct as f64 / scores.len() as f64
        }
    }
}

/// Class with the highest score; for binary, 1 when the logit is positive
/// (probability ≥ 0.5).
pub fn predicted_class(loss: &Loss, scores: &[f64]) -> usize {
    match loss {
        Loss::BinaryLogloss => usize::from(scores[0] >= 0.0),
        _ => {
            let mut best = 0;
            for (k, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = k;
                }
            }
            best
        }
    }
}

/// Trains a model on `instance` following the forward/backward boosting
/// procedure.
pub fn train(
    instance: &DatasetInstance,
    config: &BoostConfig,
    options: TrainOptions<'_>,
) -> Result<Trained, ModelError> {
    config.validate()?;
    let schema = instance.schema();
    let task = schema.label().task;
    let rows = sorted_rows(instance, options.rows)?;
    if rows.is_empty() {
        return Err(ModelError::NoTrainingRows);
    }
    let classes: Vec<String> = if task == TaskKind::Multiclass {
        let mut c: Vec<String> = rows
            .iter()
            .filter_map(|&x| match &instance.labels()[x] {
                Some(LabelValue::Class(c)) => Some(c.clone()),
                _ => None,
            })
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    } else {
        Vec::new()
    };
    let loss = config.loss.unwrap_or(default_loss(task, classes.len()));
    match (loss, task) {
        (Loss::MulticlassSoftmax { classes: k }, TaskKind::Multiclass) => {
            if k != classes.len() || k < 2 {
                return Err(ModelError::LossMismatch { loss, task });
            }
        }
        (Loss::Mse | Loss::BinaryLogloss, TaskKind::Binary | TaskKind::Regression) => {}
        _ => return Err(ModelError::LossMismatch { loss, task }),
    }
    let labels: Vec<f64> = encode_labels(instance, &rows, &loss, &classes)?
        .into_iter()
        .map(|y| y.expect("training classes cover training labels"))
        .collect();

    let schedule = build_schedule(schema, config.cover_count);
    let plan = Plan::build(&schedule, instance, &rows);
    let outputs = loss.outputs();
    let initial = loss.initial_prediction(&labels);
    let mut scores: Vec<Vec<f64>> = vec![initial.clone(); rows.len()];

    let mut validation = match options.validation {
        Some((valid, valid_rows)) => {
            let vrows = sorted_rows(valid, valid_rows)?;
            if valid.schema().fingerprint() != schema.fingerprint() {
                return Err(ModelError::SchemaMismatch);
            }
            let vlabels = encode_labels(valid, &vrows, &loss, &classes)?;
            let vplan = Plan::build(&schedule, valid, &vrows);
            let vscores = vec![initial.clone(); vrows.len()];
            Some((vplan, vlabels, vscores))
        }
        None => None,
    };

    let mut model = StrongModel {
        schema_fingerprint: schema.fingerprint(),
        schedule: schedule.clone(),
        loss,
        classes,
        initial,
        shrinkage: config.shrinkage,
        config: BoostConfig {
            loss: Some(loss),
            ..*config
        },
        iterations: Vec::with_capacity(config.iterations),
    };
    let mut log = Vec::with_capacity(config.iterations);
    let mut grad = vec![0.0; outputs];
    for i in 0..config.iterations {
        // Gradients at F_{i-1} for every class before any update.
        let mut pseudo_by_class = vec![Vec::with_capacity(rows.len()); outputs];
        for (s, &y) in scores.iter().zip(&labels) {
            loss.gradient(s, y, &mut grad);
            for (k, g) in grad.iter().enumerate() {
                pseudo_by_class[k].push(*g);
            }
        }
        let mut iteration = Vec::with_capacity(outputs);
        for (k, root_pseudo) in pseudo_by_class.into_iter().enumerate() {
            let (forward, pseudo) = forward_pass(
                &schedule,
                &plan,
                root_pseudo,
                &config.tree,
                config.seed,
                i,
                k,
            )?;
            let (backward, root_preds) = backward_pass(
                &schedule,
                &plan,
                &config.attention,
                &pseudo,
                &config.tree,
                config.seed,
                i,
                k,
            )?;
            for (s, h) in scores.iter_mut().zip(&root_preds) {
                s[k] -= config.shrinkage * h;
            }
            iteration.push(NodeTrees { forward, backward });
        }
        let train_loss = scores
            .iter()
            .zip(&labels)
            .map(|(s, &y)| loss.value(s, y))
            .sum::<f64>()
            / rows.len() as f64;
        let valid_metric = match &mut validation {
            Some((vplan, vlabels, vscores)) => {
                apply_iteration(&model, &iteration, i, vplan, vscores)?;
                Some(evaluate_scores(&loss, vscores, vlabels))
            }
            None => None,
        };
        model.iterations.push(iteration);
        log.push(IterationLog {
            iteration: i + 1,
            train_loss,
            valid_metric,
        });
    }
    Ok(Trained { model, log })
}

/// Adds one iteration's root contributions to `scores` (rows of `plan`).
fn apply_iteration(
    model: &StrongModel,
    iteration: &IterationTrees,
    index: usize,
    plan: &Plan,
    scores: &mut [Vec<f64>],
) -> Result<(), ModelError> {
    let cascade = Cascade {
        schedule: &model.schedule,
        plan,
        attention: &model.config.attention,
    };
    for (k, trees) in iteration.iter().enumerate() {
        let root_preds = cascade.backward(|node, block| {
            let tree = &trees.backward[node];
            if tree.features().len() != block.columns.len()
                || tree
                    .features()
                    .iter()
                    .zip(&block.columns)
                    .any(|(a, b)| *a != b.name)
            {
                return Err(ModelError::ColumnMismatch {
                    iteration: index,
                    node: model.schedule.node(node).id.clone(),
                });
            }
            Ok(tree.predict_all(&block.columns))
        })?;
        for (s, h) in scores.iter_mut().zip(&root_preds) {
            s[k] -= model.shrinkage * h;
        }
    }
    Ok(())
}

impl StrongModel {
    pub fn metric(&self) -> EvalMetric {
        metric_for(&self.loss)
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<(), ModelError> {
        if schema.fingerprint() != self.schema_fingerprint
            || !self.schedule.is_consistent_with(schema)
        {
            return Err(ModelError::SchemaMismatch);
        }
        Ok(())
    }

    /// Raw scores (one vector of [`Loss::outputs`] values per row) for the
    /// given root rows, in the order given. `None` scores every root row.
    pub fn predict_raw(
        &self,
        instance: &DatasetInstance,
        rows: Option<&[usize]>,
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check_schema(instance.schema())?;
        let requested: Vec<usize> = match rows {
            Some(r) => r.to_vec(),
            None => (0..instance.root_len()).collect(),
        };
        let sorted = sorted_rows(instance, Some(&requested))?;
        let plan = Plan::build(&self.schedule, instance, &sorted);
        let mut scores = vec![self.initial.clone(); sorted.len()];
        for (i, iteration) in self.iterations.iter().enumerate() {
            apply_iteration(self, iteration, i, &plan, &mut scores)?;
        }
        let position: BTreeMap<usize, usize> =
            sorted.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        Ok(requested
            .iter()
            .map(|r| scores[position[r]].clone())
            .collect())
    }

    /// Transformed predictions: the raw value for regression, the positive
    /// class probability for binary, class probabilities for multiclass.
    pub fn predict(
        &self,
        instance: &DatasetInstance,
        rows: Option<&[usize]>,
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        Ok(self
            .predict_raw(instance, rows)?
            .iter()
            .map(|s| self.loss.transform(s))
            .collect())
    }

    /// Accuracy or RMSE on the labeled root rows `rows`.
    pub fn evaluate(
        &self,
        instance: &DatasetInstance,
        rows: Option<&[usize]>,
    ) -> Result<f64, ModelError> {
        let requested: Vec<usize> = match rows {
            Some(r) => r.to_vec(),
            None => (0..instance.root_len()).collect(),
        };
        let scores = self.predict_raw(instance, Some(&requested))?;
        let labels = encode_labels(instance, &requested, &self.loss, &self.classes)?;
        Ok(evaluate_scores(&self.loss, &scores, &labels))
    }

    /// Blocks every node assembles at `iteration` (0-based) for the given
    /// root rows, with child predictions from that iteration's class-0
    /// backward trees. With no iterations the children predict zero.
    pub fn feature_blocks(
        &self,
        instance: &DatasetInstance,
        rows: Option<&[usize]>,
        iteration: usize,
    ) -> Result<(Plan, Vec<FeatureBlock>), ModelError> {
        self.check_schema(instance.schema())?;
        let rows = sorted_rows(instance, rows)?;
        let plan = Plan::build(&self.schedule, instance, &rows);
        let trees = self.iterations.get(iteration).map(|it| &it[0].backward);
        let blocks = assemble_all(
            &plan,
            &self.schedule,
            &self.config.attention,
            |node, block| match trees {
                Some(t) => t[node].predict_all(&block.columns),
                None => vec![0.0; plan.rows(node).len()],
            },
        );
        Ok((plan, blocks))
    }

    /// Backward trees of `node` across all iterations and classes.
    pub fn backward_trees(&self, node: usize) -> impl Iterator<Item = &RegressionTree> {
        self.iterations
            .iter()
            .flat_map(move |it| it.iter().map(move |c| &c.backward[node]))
    }
}
