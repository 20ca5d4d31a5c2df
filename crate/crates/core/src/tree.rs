//! Least-squares regression trees with categorical splits and missing-value
//! routing. These are the weak models fitted at every schedule node.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::data::PropValue;
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_examples_leaf: usize,
    /// Fraction of features considered at each node, in (0, 1].
    pub feature_sampling_ratio: f64,
    /// Seed used by [`train_tree`]. The boosting engine derives its own
    /// per-tree streams and ignores it.
    pub rng_seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 6,
            min_examples_leaf: 5,
            feature_sampling_ratio: 0.2,
            rng_seed: 0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.max_depth < 1 {
            return Err(TreeError::InvalidConfig("max_depth must be at least 1"));
        }
        if self.min_examples_leaf < 1 {
            return Err(TreeError::InvalidConfig(
                "min_examples_leaf must be at least 1",
            ));
        }
        if !(self.feature_sampling_ratio > 0.0 && self.feature_sampling_ratio <= 1.0) {
            return Err(TreeError::InvalidConfig(
                "feature_sampling_ratio must lie in (0, 1]",
            ));
        }
        Ok(())
    }

    /// Number of candidate features examined per node out of `total`.
    pub fn sampled_features(&self, total: usize) -> usize {
        if total == 0 {
            return 0;
        }
        let m = libm::ceil(self.feature_sampling_ratio * total as f64 - 1e-9) as usize;
        m.clamp(1, total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("cannot train a tree on zero examples")]
    NoExamples,
    #[error("column {column:?} has {found} values, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid tree configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("example does not provide feature {0:?}")]
    MissingFeature(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numerical(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numerical(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, row: usize) -> Option<PropValue> {
        match self {
            ColumnData::Numerical(v) => v[row].map(PropValue::Num),
            ColumnData::Categorical(v) => v[row].clone().map(PropValue::Cat),
        }
    }
}

/// A named feature with one value (or explicit missing) per example.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub data: ColumnData,
}

impl FeatureColumn {
    pub fn numerical(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        FeatureColumn {
            name: name.into(),
            data: ColumnData::Numerical(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        FeatureColumn {
            name: name.into(),
            data: ColumnData::Categorical(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Condition {
    /// Goes left when the value is `<=` the threshold.
    #[serde(rename = "le")]
    Threshold(f64),
    /// Goes left for categories in `left`, right for those in `right`.
    /// Categories in neither set follow the missing direction.
    #[serde(rename = "in")]
    Categories {
        left: Vec<String>,
        right: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    #[serde(rename = "leaf")]
    Leaf {
        #[serde(rename = "v")]
        value: f64,
        #[serde(rename = "n")]
        count: usize,
    },
    #[serde(rename = "split")]
    Split {
        #[serde(rename = "f")]
        feature: usize,
        #[serde(rename = "c")]
        condition: Condition,
        #[serde(rename = "ml")]
        missing_left: bool,
        #[serde(rename = "l")]
        left: usize,
        #[serde(rename = "r")]
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Names of the columns the tree was trained on, in training order.
    features: Vec<String>,
    /// Node 0 is the root.
    nodes: Vec<TreeNode>,
}

impl RegressionTree {
    /// Single-leaf tree predicting `value` everywhere.
    pub fn constant(features: Vec<String>, value: f64, count: usize) -> Self {
        RegressionTree {
            features,
            nodes: vec![TreeNode::Leaf { value, count }],
        }
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Depth of the deepest leaf; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((n, d)) = stack.pop() {
            match &self.nodes[n] {
                TreeNode::Leaf { .. } => max = max.max(d),
                TreeNode::Split { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
            }
        }
        max
    }

    /// Structural sanity: child indices in range and every node reachable
    /// exactly once from the root.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if n >= self.nodes.len() || seen[n] {
                return false;
            }
            seen[n] = true;
            if let TreeNode::Split {
                feature,
                left,
                right,
                ..
            } = &self.nodes[n]
            {
                if *feature >= self.features.len() {
                    return false;
                }
                stack.push(*left);
                stack.push(*right);
            }
        }
        !self.nodes.is_empty() && seen.iter().all(|&s| s)
    }

    fn walk(&self, mut go_left: impl FnMut(usize, &Condition, bool) -> bool) -> f64 {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    condition,
                    missing_left,
                    left,
                    right,
                } => {
                    n = if go_left(*feature, condition, *missing_left) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Prediction for row `row` of columns laid out as at training time.
    pub fn predict_columns(&self, columns: &[FeatureColumn], row: usize) -> f64 {
        self.walk(|f, cond, missing_left| match &columns[f].data {
            ColumnData::Numerical(v) => route(v[row].map(Value::Num), cond, missing_left),
            ColumnData::Categorical(v) => {
                route(v[row].as_deref().map(Value::Cat), cond, missing_left)
            }
        })
    }

    pub fn predict_all(&self, columns: &[FeatureColumn]) -> Vec<f64> {
        let rows = columns.first().map_or(0, |c| c.data.len());
        if let [TreeNode::Leaf { value, .. }] = self.nodes.as_slice() {
            return vec![*value; rows];
        }
        (0..rows)
            .map(|r| self.predict_columns(columns, r))
            .collect()
    }

    /// Prediction for an example given as a name → value map. Every feature
    /// the tree splits on must be present (possibly as missing).
    pub fn predict(&self, example: &BTreeMap<String, Option<PropValue>>) -> Result<f64, TreeError> {
        for node in &self.nodes {
            if let TreeNode::Split { feature, .. } = node {
                let name = &self.features[*feature];
                if !example.contains_key(name) {
                    return Err(TreeError::MissingFeature(name.clone()));
                }
            }
        }
        Ok(self.walk(|f, cond, missing_left| {
            let v = match &example[&self.features[f]] {
                None => None,
                Some(PropValue::Num(x)) => Some(Value::Num(*x)),
                Some(PropValue::Cat(c)) => Some(Value::Cat(c.as_str())),
            };
            route(v, cond, missing_left)
        }))
    }
}

#[derive(Clone, Copy)]
enum Value<'a> {
    Num(f64),
    Cat(&'a str),
}

fn route(value: Option<Value<'_>>, condition: &Condition, missing_left: bool) -> bool {
    match (value, condition) {
        (Some(Value::Num(x)), Condition::Threshold(t)) => x <= *t,
        (Some(Value::Cat(c)), Condition::Categories { left, right }) => {
            if left.binary_search_by(|s| s.as_str().cmp(c)).is_ok() {
                true
            } else if right.binary_search_by(|s| s.as_str().cmp(c)).is_ok() {
                false
            } else {
                missing_left
            }
        }
        _ => missing_left,
    }
}

/// Minimal depth at which each feature is first split on. The root has
/// depth 0; unused features are absent from the map.
pub fn feature_min_depths(tree: &RegressionTree) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = BTreeMap::new();
    let mut stack = vec![(0usize, 0usize)];
    while let Some((n, d)) = stack.pop() {
        if let TreeNode::Split {
            feature,
            left,
            right,
            ..
        } = &tree.nodes[n]
        {
            let e = out.entry(tree.features[*feature].clone()).or_insert(d);
            *e = (*e).min(d);
            stack.push((*left, d + 1));
            stack.push((*right, d + 1));
        }
    }
    out
}

/// Trains a tree seeding feature sampling from `config.rng_seed`.
pub fn train_tree(
    features: &[FeatureColumn],
    targets: &[f64],
    weights: Option<&[f64]>,
    config: &TreeConfig,
) -> Result<RegressionTree, TreeError> {
    let mut rng = Rng::seed_from_u64(config.rng_seed);
    train_tree_with_rng(features, targets, weights, config, &mut rng)
}

/// Greedy least-squares tree. Each node considers a uniformly sampled subset
/// of features; leaves hold the weighted mean target of their examples.
pub fn train_tree_with_rng(
    features: &[FeatureColumn],
    targets: &[f64],
    weights: Option<&[f64]>,
    config: &TreeConfig,
    rng: &mut Rng,
) -> Result<RegressionTree, TreeError> {
    config.validate()?;
    let n = targets.len();
    if n == 0 {
        return Err(TreeError::NoExamples);
    }
    for c in features {
        if c.data.len() != n {
            return Err(TreeError::LengthMismatch {
                column: c.name.clone(),
                expected: n,
                found: c.data.len(),
            });
        }
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(TreeError::LengthMismatch {
                column: String::from("<weights>"),
                expected: n,
                found: w.len(),
            });
        }
    }
    let columns: Vec<Encoded<'_>> = features.iter().map(Encoded::new).collect();
    let mut builder = Builder {
        columns: &columns,
        targets,
        weights,
        config,
        rng,
        nodes: Vec::new(),
        scratch: Vec::new(),
    };
    let rows: Vec<u32> = (0..n as u32).collect();
    builder.grow(rows, 0);
    Ok(RegressionTree {
        features: features.iter().map(|c| c.name.clone()).collect(),
        nodes: builder.nodes,
    })
}

enum Encoded<'a> {
    Num(&'a [Option<f64>]),
    Cat {
        dict: Vec<&'a str>,
        codes: Vec<Option<u32>>,
    },
}

impl<'a> Encoded<'a> {
    fn new(column: &'a FeatureColumn) -> Self {
        match &column.data {
            ColumnData::Numerical(v) => Encoded::Num(v),
            ColumnData::Categorical(v) => {
                let mut dict: Vec<&str> = v.iter().flatten().map(String::as_str).collect();
                dict.sort_unstable();
                dict.dedup();
                let codes = v
                    .iter()
                    .map(|x| {
                        x.as_deref()
                            .map(|s| dict.binary_search(&s).expect("in dictionary") as u32)
                    })
                    .collect();
                Encoded::Cat { dict, codes }
            }
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    n: usize,
    w: f64,
    s: f64,
}

impl Stats {
    fn add(&mut self, w: f64, t: f64) {
        self.n += 1;
        self.w += w;
        self.s += w * t;
    }

    fn plus(self, o: Stats) -> Stats {
        Stats {
            n: self.n + o.n,
            w: self.w + o.w,
            s: self.s + o.s,
        }
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            n: self.n - o.n,
            w: self.w - o.w,
            s: self.s - o.s,
        }
    }

    fn score(&self) -> f64 {
        if self.w > 0.0 {
            self.s * self.s / self.w
        } else {
            0.0
        }
    }
}

enum SplitRule {
    Threshold(f64),
    /// Category codes observed at the node, split into the two sides.
    Codes {
        left: Vec<u32>,
        right: Vec<u32>,
    },
}

struct Candidate {
    gain: f64,
    feature: usize,
    rule: SplitRule,
    missing_left: bool,
}

struct Builder<'a, 'b> {
    columns: &'b [Encoded<'a>],
    targets: &'b [f64],
    weights: Option<&'b [f64]>,
    config: &'b TreeConfig,
    rng: &'b mut Rng,
    nodes: Vec<TreeNode>,
    scratch: Vec<(f64, f64, f64)>,
}

impl Builder<'_, '_> {
    fn weight(&self, r: u32) -> f64 {
        self.weights.map_or(1.0, |w| w[r as usize])
    }

    fn grow(&mut self, rows: Vec<u32>, depth: usize) -> usize {
        let mut total = Stats::default();
        let mut sum_sq = 0.0;
        for &r in &rows {
            let (w, t) = (self.weight(r), self.targets[r as usize]);
            total.add(w, t);
            sum_sq += w * t * t;
        }
        let value = if total.w > 0.0 {
            total.s / total.w
        } else {
            0.0
        };
        let index = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value,
            count: rows.len(),
        });
        let sse = sum_sq - total.score();
        if depth >= self.config.max_depth
            || rows.len() < 2 * self.config.min_examples_leaf
            || sse <= 1e-12 * sum_sq
        {
            return index;
        }
        // Gains below this are rounding noise relative to the node's error.
        let min_gain = 1e-10 * sse.max(0.0);
        let Some(best) = self.best_split(&rows, total, min_gain) else {
            return index;
        };
        let (left_rows, right_rows) = self.partition(&rows, &best);
        drop(rows);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        let condition = match best.rule {
            SplitRule::Threshold(t) => Condition::Threshold(t),
            SplitRule::Codes { left, right } => {
                let Encoded::Cat { dict, .. } = &self.columns[best.feature] else {
                    unreachable!("category split on a numerical column")
                };
                let names = |codes: &[u32]| {
                    let mut v: Vec<String> = codes
                        .iter()
                        .map(|&c| String::from(dict[c as usize]))
                        .collect();
                    v.sort_unstable();
                    v
                };
                Condition::Categories {
                    left: names(&left),
                    right: names(&right),
                }
            }
        };
        self.nodes[index] = TreeNode::Split {
            feature: best.feature,
            condition,
            missing_left: best.missing_left,
            left,
            right,
        };
        index
    }

    fn best_split(&mut self, rows: &[u32], total: Stats, min_gain: f64) -> Option<Candidate> {
        let n_features = self.columns.len();
        let m = self.config.sampled_features(n_features);
        if m == 0 {
            return None;
        }
        let mut candidates: Vec<usize> = if m == n_features {
            (0..n_features).collect()
        } else {
            index::sample(self.rng, n_features, m).into_vec()
        };
        candidates.sort_unstable();
        let parent = total.score();
        let mut best: Option<Candidate> = None;
        let mut best_gain = min_gain;
        for f in candidates {
            let found = match &self.columns[f] {
                Encoded::Num(values) => {
                    let values = *values;
                    self.scan_numerical(f, values, rows, total, parent, best_gain)
                }
                Encoded::Cat { codes, dict } => {
                    self.scan_categorical(f, codes, dict.len(), rows, total, parent, best_gain)
                }
            };
            if let Some(c) = found {
                best_gain = c.gain;
                best = Some(c);
            }
        }
        best
    }

    /// Evaluates both missing directions for a left/right partition of the
    /// non-missing examples. Returns (gain, missing_left) of the better valid
    /// option; missing-left wins ties.
    fn evaluate(
        &self,
        left: Stats,
        right: Stats,
        missing: Stats,
        parent: f64,
    ) -> Option<(f64, bool)> {
        let min = self.config.min_examples_leaf;
        let mut out: Option<(f64, bool)> = None;
        for missing_left in [true, false] {
            let (l, r) = if missing_left {
                (left.plus(missing), right)
            } else {
                (left, right.plus(missing))
            };
            if l.n < min || r.n < min {
                continue;
            }
            let gain = l.score() + r.score() - parent;
            if out.is_none_or(|(g, _)| gain > g) {
                out = Some((gain, missing_left));
            }
        }
        out
    }

    fn scan_numerical(
        &mut self,
        feature: usize,
        values: &[Option<f64>],
        rows: &[u32],
        total: Stats,
        parent: f64,
        floor: f64,
    ) -> Option<Candidate> {
        let mut pairs = core::mem::take(&mut self.scratch);
        pairs.clear();
        let mut missing = Stats::default();
        for &r in rows {
            let (w, t) = (self.weight(r), self.targets[r as usize]);
            match values[r as usize] {
                Some(v) => pairs.push((v, w, t)),
                None => missing.add(w, t),
            }
        }
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let present = total.minus(missing);
        let mut best: Option<Candidate> = None;
        let mut best_gain = floor;
        let mut left = Stats::default();
        for k in 0..pairs.len() {
            let (v, w, t) = pairs[k];
            left.add(w, t);
            let boundary = if k + 1 < pairs.len() {
                let next = pairs[k + 1].0;
                if next <= v {
                    continue;
                }
                let mid = v + (next - v) / 2.0;
                Some(if mid < next { mid } else { v })
            } else {
                None
            };
            let (threshold, options) = match boundary {
                Some(t) => (t, self.evaluate(left, present.minus(left), missing, parent)),
                // Present values left, missing values right.
                None if missing.n > 0 => {
                    let min = self.config.min_examples_leaf;
                    let valid = left.n >= min && missing.n >= min;
                    let gain = left.score() + missing.score() - parent;
                    (v, valid.then_some((gain, false)))
                }
                None => continue,
            };
            if let Some((gain, missing_left)) = options {
                if gain > best_gain {
                    best_gain = gain;
                    best = Some(Candidate {
                        gain,
                        feature,
                        rule: SplitRule::Threshold(threshold),
                        missing_left,
                    });
                }
            }
        }
        self.scratch = pairs;
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn scan_categorical(
        &self,
        feature: usize,
        codes: &[Option<u32>],
        n_categories: usize,
        rows: &[u32],
        total: Stats,
        parent: f64,
        floor: f64,
    ) -> Option<Candidate> {
        let mut per = vec![Stats::default(); n_categories];
        let mut missing = Stats::default();
        for &r in rows {
            let (w, t) = (self.weight(r), self.targets[r as usize]);
            match codes[r as usize] {
                Some(c) => per[c as usize].add(w, t),
                None => missing.add(w, t),
            }
        }
        let mut order: Vec<u32> = (0..n_categories as u32)
            .filter(|&c| per[c as usize].n > 0)
            .collect();
        let mean = |c: u32| {
            let s = per[c as usize];
            if s.w > 0.0 {
                s.s / s.w
            } else {
                0.0
            }
        };
        order.sort_by(|&a, &b| mean(a).total_cmp(&mean(b)).then(a.cmp(&b)));
        let present = total.minus(missing);
        let mut best: Option<Candidate> = None;
        let mut best_gain = floor;
        let mut left = Stats::default();
        for k in 0..order.len() {
            left = left.plus(per[order[k] as usize]);
            let options = if k + 1 < order.len() {
                self.evaluate(left, present.minus(left), missing, parent)
            } else if missing.n > 0 {
                let min = self.config.min_examples_leaf;
                let valid = left.n >= min && missing.n >= min;
                valid.then_some((left.score() + missing.score() - parent, false))
            } else {
                None
            };
            if let Some((gain, missing_left)) = options {
                if gain > best_gain {
                    best_gain = gain;
                    best = Some(Candidate {
                        gain,
                        feature,
                        rule: SplitRule::Codes {
                            left: order[..=k].to_vec(),
                            right: order[k + 1..].to_vec(),
                        },
                        missing_left,
                    });
                }
            }
        }
        best
    }

    fn partition(&self, rows: &[u32], split: &Candidate) -> (Vec<u32>, Vec<u32>) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &r in rows {
            let go_left = match (&self.columns[split.feature], &split.rule) {
                (Encoded::Num(v), SplitRule::Threshold(t)) => match v[r as usize] {
                    Some(x) => x <= *t,
                    None => split.missing_left,
                },
                (Encoded::Cat { codes, .. }, SplitRule::Codes { left: set, .. }) => {
                    match codes[r as usize] {
                        Some(c) => set.contains(&c),
                        None => split.missing_left,
                    }
                }
                _ => unreachable!("rule kind matches column kind"),
            };
            if go_left {
                left.push(r);
            } else {
                right.push(r);
            }
        }
        (left, right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full(max_depth: usize, min_leaf: usize) -> TreeConfig {
        TreeConfig {
            max_depth,
            min_examples_leaf: min_leaf,
            feature_sampling_ratio: 1.0,
            rng_seed: 0,
        }
    }

    fn sse(tree: &RegressionTree, cols: &[FeatureColumn], y: &[f64]) -> f64 {
        tree.predict_all(cols)
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum()
    }

    #[test]
    fn constant_targets_give_a_single_leaf() {
        let x = FeatureColumn::numerical("x", (0..20).map(|i| Some(i as f64)).collect());
        let tree = train_tree(&[x], &[0.25; 20], None, &full(6, 1)).unwrap();
        assert_eq!(
            tree.nodes(),
            &[TreeNode::Leaf {
                value: 0.25,
                count: 20
            }]
        );
    }

    #[test]
    fn step_function_matches_brute_force_scan() {
        // Deterministic pseudo-random abscissae in [0, 1).
        let xs: Vec<f64> = (0..100)
            .map(|i| ((i * 37 + 11) % 100) as f64 / 100.0 + 0.003)
            .collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|&x| if x > 0.5 { 1.0 } else { 0.0 })
            .collect();
        let col = FeatureColumn::numerical("x", xs.iter().map(|&x| Some(x)).collect());
        let tree = train_tree(std::slice::from_ref(&col), &y, None, &full(6, 1)).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(sse(&tree, &[col], &y), 0.0);
        let TreeNode::Split {
            condition: Condition::Threshold(t),
            ..
        } = &tree.nodes()[0]
        else {
            panic!("expected a threshold split")
        };
        // Oracle: scan every cut between sorted distinct values.
        let lo = xs
            .iter()
            .copied()
            .filter(|&x| x <= 0.5)
            .fold(f64::MIN, f64::max);
        let hi = xs
            .iter()
            .copied()
            .filter(|&x| x > 0.5)
            .fold(f64::MAX, f64::min);
        assert!(lo <= *t && *t < hi, "{lo} <= {t} < {hi}");
    }

    #[test]
    fn min_leaf_limits_splits() {
        let x = FeatureColumn::numerical("x", (0..10).map(|i| Some(i as f64)).collect());
        let y: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let tree = train_tree(&[x], &y, None, &full(6, 5)).unwrap();
        let splits = tree
            .nodes()
            .iter()
            .filter(|n| matches!(n, TreeNode::Split { .. }))
            .count();
        assert!(splits <= 1);
    }

    #[test]
    fn zero_examples_is_an_error() {
        let x = FeatureColumn::numerical("x", vec![]);
        assert_eq!(
            train_tree(&[x], &[], None, &full(3, 1)),
            Err(TreeError::NoExamples)
        );
    }

    fn stump(missing_left: bool) -> RegressionTree {
        RegressionTree {
            features: vec!["x".into()],
            nodes: vec![
                TreeNode::Split {
                    feature: 0,
                    condition: Condition::Threshold(0.5),
                    missing_left,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf {
                    value: 0.0,
                    count: 5,
                },
                TreeNode::Leaf {
                    value: 1.0,
                    count: 5,
                },
            ],
        }
    }

    #[test]
    fn predict_examples() {
        let leaf = RegressionTree::constant(vec!["x".into()], 0.3, 1);
        assert_eq!(leaf.predict(&BTreeMap::new()).unwrap(), 0.3);
        let mut ex = BTreeMap::new();
        ex.insert("x".to_string(), Some(PropValue::Num(0.7)));
        assert_eq!(stump(true).predict(&ex).unwrap(), 1.0);
        ex.insert("x".to_string(), None);
        assert_eq!(stump(true).predict(&ex).unwrap(), 0.0);
        assert_eq!(stump(false).predict(&ex).unwrap(), 1.0);
        assert_eq!(
            stump(true).predict(&BTreeMap::new()),
            Err(TreeError::MissingFeature("x".into()))
        );
    }

    #[test]
    fn min_depth_examples() {
        assert!(feature_min_depths(&RegressionTree::constant(vec![], 0.0, 1)).is_empty());
        assert_eq!(
            feature_min_depths(&stump(true)),
            BTreeMap::from([("x".into(), 0)])
        );
        let g = |l, r| TreeNode::Split {
            feature: 1,
            condition: Condition::Threshold(0.0),
            missing_left: true,
            left: l,
            right: r,
        };
        let tree = RegressionTree {
            features: vec!["f".into(), "g".into()],
            nodes: vec![
                TreeNode::Split {
                    feature: 0,
                    condition: Condition::Threshold(0.0),
                    missing_left: true,
                    left: 1,
                    right: 2,
                },
                g(3, 4),
                g(5, 6),
                TreeNode::Leaf {
                    value: 0.0,
                    count: 1,
                },
                TreeNode::Leaf {
                    value: 0.0,
                    count: 1,
                },
                TreeNode::Leaf {
                    value: 0.0,
                    count: 1,
                },
                TreeNode::Leaf {
                    value: 0.0,
                    count: 1,
                },
            ],
        };
        assert_eq!(
            feature_min_depths(&tree),
            BTreeMap::from([("f".into(), 0), ("g".into(), 1)])
        );
    }

    #[test]
    fn categorical_split_separates_groups() {
        let cats = ["a", "b", "c", "d"];
        let col = FeatureColumn::categorical(
            "c",
            (0..40).map(|i| Some(cats[i % 4].to_string())).collect(),
        );
        let y: Vec<f64> = (0..40)
            .map(|i| if i % 4 == 1 || i % 4 == 3 { 2.0 } else { -1.0 })
            .collect();
        let tree = train_tree(std::slice::from_ref(&col), &y, None, &full(1, 1)).unwrap();
        assert_eq!(sse(&tree, &[col], &y), 0.0);
        let TreeNode::Split {
            condition: Condition::Categories { left, right },
            ..
        } = &tree.nodes()[0]
        else {
            panic!()
        };
        assert_eq!(left, &["a", "c"]);
        assert_eq!(right, &["b", "d"]);
        // Unseen category follows the missing direction.
        let mut ex = BTreeMap::new();
        ex.insert("c".to_string(), Some(PropValue::Cat("zzz".into())));
        let unseen = tree.predict(&ex).unwrap();
        ex.insert("c".to_string(), None);
        assert_eq!(unseen, tree.predict(&ex).unwrap());
    }

    #[test]
    fn missing_values_are_routed_to_the_better_side() {
        let mut values: Vec<Option<f64>> = (0..20).map(|i| Some(i as f64)).collect();
        let mut y: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 5.0 }).collect();
        for _ in 0..6 {
            values.push(None);
            y.push(5.0);
        }
        let col = FeatureColumn::numerical("x", values);
        let tree = train_tree(std::slice::from_ref(&col), &y, None, &full(1, 1)).unwrap();
        assert_eq!(sse(&tree, &[col], &y), 0.0);
        let TreeNode::Split { missing_left, .. } = tree.nodes()[0] else {
            panic!()
        };
        assert!(!missing_left);
    }

    #[test]
    fn feature_sampling_count() {
        let c = TreeConfig::default();
        assert_eq!(c.sampled_features(11), 3);
        assert_eq!(c.sampled_features(5), 1);
        assert_eq!(c.sampled_features(1), 1);
        assert_eq!(c.sampled_features(10), 2);
    }

    fn dataset() -> impl Strategy<Value = (Vec<FeatureColumn>, Vec<f64>)> {
        (5usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::option::weighted(0.85, -5.0f64..5.0), n),
                proptest::collection::vec(proptest::option::weighted(0.9, 0u8..4), n),
                proptest::collection::vec(-10.0f64..10.0, n),
            )
                .prop_map(|(x, c, y)| {
                    let cols = vec![
                        FeatureColumn::numerical("x", x),
                        FeatureColumn::categorical(
                            "c",
                            c.into_iter().map(|v| v.map(|v| format!("k{v}"))).collect(),
                        ),
                    ];
                    (cols, y)
                })
        })
    }

    proptest! {
        #[test]
        fn leaves_are_optimal_and_beat_the_constant(
            (cols, y) in dataset(), depth in 1usize..5, min_leaf in 1usize..6, shift in -1.0f64..1.0
        ) {
            let tree = train_tree(&cols, &y, None, &full(depth, min_leaf)).unwrap();
            prop_assert!(tree.is_well_formed());
            prop_assert!(tree.depth() <= depth);
            let preds = tree.predict_all(&cols);
            // Group rows by leaf value; perturbing a leaf's constant never helps.
            let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, p) in preds.iter().enumerate() {
                groups.entry(p.to_bits()).or_default().push(i);
            }
            for rows in groups.values() {
                let v = preds[rows[0]];
                let err = |c: f64| rows.iter().map(|&i| (y[i] - c) * (y[i] - c)).sum::<f64>();
                prop_assert!(err(v) <= err(v + shift) + 1e-9);
            }
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let constant: f64 = y.iter().map(|t| (t - mean) * (t - mean)).sum();
            prop_assert!(sse(&tree, &cols, &y) <= constant + 1e-9);
        }

        #[test]
        fn leaves_respect_min_examples((cols, y) in dataset(), min_leaf in 1usize..6) {
            let tree = train_tree(&cols, &y, None, &full(4, min_leaf)).unwrap();
            if tree.nodes().len() > 1 {
                for n in tree.nodes() {
                    if let TreeNode::Leaf { count, .. } = n {
                        prop_assert!(*count >= min_leaf);
                    }
                }
            }
        }

        #[test]
        fn training_is_deterministic((cols, y) in dataset(), seed in 0u64..1000) {
            let cfg = TreeConfig { feature_sampling_ratio: 0.5, rng_seed: seed, ..TreeConfig::default() };
            let a = train_tree(&cols, &y, None, &cfg).unwrap();
            prop_assert_eq!(a, train_tree(&cols, &y, None, &cfg).unwrap());
        }

        #[test]
        fn splits_use_observed_values((cols, y) in dataset()) {
            let tree = train_tree(&cols, &y, None, &full(4, 1)).unwrap();
            let ColumnData::Numerical(xs) = &cols[0].data else { unreachable!() };
            let present: Vec<f64> = xs.iter().flatten().copied().collect();
            let ColumnData::Categorical(cs) = &cols[1].data else { unreachable!() };
            for n in tree.nodes() {
                match n {
                    TreeNode::Split { condition: Condition::Threshold(t), .. } => {
                        let lo = present.iter().copied().filter(|v| v <= t).fold(f64::MIN, f64::max);
                        prop_assert!(lo > f64::MIN, "threshold below every value");
                        let above = present.iter().any(|v| v > t);
                        let hi = present.iter().copied().filter(|v| v > t).fold(f64::MAX, f64::min);
                        prop_assert!(!above || (lo <= *t && *t < hi));
                    }
                    TreeNode::Split { condition: Condition::Categories { left, right }, .. } => {
                        for c in left.iter().chain(right) {
                            prop_assert!(cs.iter().flatten().any(|s| s == c));
                        }
                    }
                    TreeNode::Leaf { .. } => {}
                }
            }
        }
    }
}
