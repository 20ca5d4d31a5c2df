//! Per-node model inputs.
//!
//! The input of the tree at a schedule node is the concatenation of four
//! blocks, in this order:
//!
//! * `prop:<p>`: the node table's own attributes;
//! * `score:<rel>:<min|max|mean>`: child predictions aggregated over the
//!   related rows;
//! * `hard:<rel>:<p>`: the attribute of the related row with the largest
//!   child prediction (ties go to the first row in table order);
//! * `soft:<rel>:<p>`: the mean of a numerical attribute over related rows,
//!   weighted by child predictions.
//!
//! An empty relation yields missing values in all three relational blocks.
//!
//! With [`AttentionConfig::chain_hard`] set, the attributes a parent attends
//! over also include the child's own hard-attention columns, so a value
//! selected two hops down reaches the parent as `hard:<rel>/<rel'>:<p>`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetInstance, InstanceBuilder, PropColumn, Schema};
use crate::schedule::Schedule;
use crate::tree::{ColumnData, FeatureColumn};

/// `|Σ h|` below which soft attention falls back to the unweighted mean.
pub const SOFT_DENOMINATOR_EPS: f64 = 1e-12;

/// Aggregators of the score block, in column order.
pub const AGGREGATORS: [&str; 3] = ["min", "max", "mean"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionConfig {
    /// Propagate hard-attention columns of a child to its parents.
    pub chain_hard: bool,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig { chain_hard: true }
    }
}

/// Rows touched at every schedule node and the row links along every arc,
/// for a given set of root rows.
#[derive(Debug, Clone)]
pub struct Plan {
    nodes: Vec<NodePlan>,
    arcs: Vec<ArcPlan>,
}

#[derive(Debug, Clone)]
struct NodePlan {
    rows: Vec<usize>,
    prop: Vec<FeatureColumn>,
}

#[derive(Debug, Clone)]
struct ArcPlan {
    relation: String,
    // CSR: links of parent-local row i are targets[offsets[i]..offsets[i + 1]],
    // as child-local indices in table row order.
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Plan {
    /// Node rows are the root rows (for the root) and otherwise every row
    /// referenced by a row of a parent node, sorted by table row index.
    pub fn build(schedule: &Schedule, instance: &DatasetInstance, root_rows: &[usize]) -> Plan {
        let schema = instance.schema();
        let n_nodes = schedule.nodes().len();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        rows[schedule.root()] = root_rows.to_vec();
        for &n in schedule.topological_order() {
            let mut mine = core::mem::take(&mut rows[n]);
            mine.sort_unstable();
            mine.dedup();
            let table = schedule.node(n).table;
            for &a in &schedule.node(n).children {
                let arc = schedule.arc(a);
                let child_rows = &mut rows[arc.child];
                for &x in &mine {
                    child_rows.extend_from_slice(instance.relation(table, arc.relation, x));
                }
            }
            rows[n] = mine;
        }
        let arcs = schedule
            .arcs()
            .iter()
            .enumerate()
            .map(|(a, arc)| {
                let table = schedule.node(arc.parent).table;
                let child_rows = &rows[arc.child];
                let mut offsets = Vec::with_capacity(rows[arc.parent].len() + 1);
                let mut targets = Vec::new();
                offsets.push(0);
                for &x in &rows[arc.parent] {
                    for &t in instance.relation(table, arc.relation, x) {
                        let local = child_rows.binary_search(&t).expect("child row planned");
                        targets.push(local as u32);
                    }
                    offsets.push(targets.len());
                }
                ArcPlan {
                    relation: String::from(schedule.arc_relation(schema, a)),
                    offsets,
                    targets,
                }
            })
            .collect();
        let nodes = rows
            .into_iter()
            .enumerate()
            .map(|(n, rows)| {
                let prop = compute_b_prop(instance, schedule.node(n).table, &rows);
                NodePlan { rows, prop }
            })
            .collect();
        Plan { nodes, arcs }
    }

    /// Table rows of `node`, in ascending order.
    pub fn rows(&self, node: usize) -> &[usize] {
        &self.nodes[node].rows
    }

    pub fn prop_block(&self, node: usize) -> &[FeatureColumn] {
        &self.nodes[node].prop
    }

    /// Child-local indices linked to parent-local row `row` along `arc`.
    pub fn links(&self, arc: usize, row: usize) -> &[u32] {
        let a = &self.arcs[arc];
        &a.targets[a.offsets[row]..a.offsets[row + 1]]
    }

    pub fn relation(&self, arc: usize) -> &str {
        &self.arcs[arc].relation
    }

    fn parent_len(&self, arc: usize) -> usize {
        self.arcs[arc].offsets.len() - 1
    }
}

/// The node table's attributes for `rows`, named `prop:<p>`.
pub fn compute_b_prop(
    instance: &DatasetInstance,
    table: usize,
    rows: &[usize],
) -> Vec<FeatureColumn> {
    let def = instance.schema().table(table);
    def.props
        .iter()
        .enumerate()
        .map(|(p, prop)| {
            let name = format!("prop:{}", prop.name);
            match instance.prop_column(table, p) {
                PropColumn::Numerical(v) => {
                    FeatureColumn::numerical(name, rows.iter().map(|&x| v[x]).collect())
                }
                PropColumn::Categorical(v) => {
                    FeatureColumn::categorical(name, rows.iter().map(|&x| v[x].clone()).collect())
                }
            }
        })
        .collect()
}

/// A column a parent may attend over: its index in the block, the relation
/// path it was selected through (empty for own attributes) and the attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Attended {
    column: usize,
    path: String,
    attr: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockWidths {
    pub prop: usize,
    pub score: usize,
    pub hard: usize,
    pub soft: usize,
}

impl BlockWidths {
    pub fn total(&self) -> usize {
        self.prop + self.score + self.hard + self.soft
    }
}

/// Assembled input of one schedule node over its planned rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub node: usize,
    pub columns: Vec<FeatureColumn>,
    pub widths: BlockWidths,
    attended: Vec<Attended>,
}

impl FeatureBlock {
    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&FeatureColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

fn attended_name(relation: &str, a: &Attended) -> (String, String) {
    let path = if a.path.is_empty() {
        String::from(relation)
    } else {
        format!("{relation}/{}", a.path)
    };
    (path, a.attr.clone())
}

/// `min`, `max` and `mean` of child predictions over the related rows.
pub fn compute_b_score(plan: &Plan, arc: usize, child_preds: &[f64]) -> Vec<FeatureColumn> {
    let n = plan.parent_len(arc);
    let mut cols = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for x in 0..n {
        let links = plan.links(arc, x);
        if links.is_empty() {
            cols.iter_mut().for_each(|c| c.push(None));
            continue;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &j in links {
            let h = child_preds[j as usize];
            min = min.min(h);
            max = max.max(h);
            sum += h;
        }
        cols[0].push(Some(min));
        cols[1].push(Some(max));
        cols[2].push(Some(sum / links.len() as f64));
    }
    let rel = plan.relation(arc);
    cols.into_iter()
        .zip(AGGREGATORS)
        .map(|(values, phi)| FeatureColumn::numerical(format!("score:{rel}:{phi}"), values))
        .collect()
}

/// Index of the first maximal prediction among `links`.
fn argmax(links: &[u32], preds: &[f64]) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for &j in links {
        let h = preds[j as usize];
        if best.is_none_or(|(_, b)| h > b) {
            best = Some((j, h));
        }
    }
    best.map(|(j, _)| j)
}

/// Attribute values of the related row with the largest child prediction.
pub fn compute_b_hard(
    plan: &Plan,
    arc: usize,
    child: &FeatureBlock,
    child_preds: &[f64],
) -> Vec<FeatureColumn> {
    let n = plan.parent_len(arc);
    let selected: Vec<Option<u32>> = (0..n)
        .map(|x| argmax(plan.links(arc, x), child_preds))
        .collect();
    let rel = plan.relation(arc);
    child
        .attended
        .iter()
        .map(|a| {
            let (path, attr) = attended_name(rel, a);
            let name = format!("hard:{path}:{attr}");
            match &child.columns[a.column].data {
                ColumnData::Numerical(v) => FeatureColumn::numerical(
                    name,
                    selected
                        .iter()
                        .map(|s| s.and_then(|j| v[j as usize]))
                        .collect(),
                ),
                ColumnData::Categorical(v) => FeatureColumn::categorical(
                    name,
                    selected
                        .iter()
                        .map(|s| s.and_then(|j| v[j as usize].clone()))
                        .collect(),
                ),
            }
        })
        .collect()
}

/// `Σ p·h / Σ h` over related rows with a present value, falling back to the
/// plain mean when `|Σ h|` is below [`SOFT_DENOMINATOR_EPS`]. Categorical
/// attributes are skipped.
pub fn compute_b_soft(
    plan: &Plan,
    arc: usize,
    child: &FeatureBlock,
    child_preds: &[f64],
) -> Vec<FeatureColumn> {
    let n = plan.parent_len(arc);
    let rel = plan.relation(arc);
    let mut out = Vec::new();
    for a in &child.attended {
        let ColumnData::Numerical(values) = &child.columns[a.column].data else {
            continue;
        };
        let (path, attr) = attended_name(rel, a);
        let column = (0..n)
            .map(|x| {
                let mut num = 0.0;
                let mut den = 0.0;
                let mut plain = 0.0;
                let mut count = 0usize;
                for &j in plan.links(arc, x) {
                    if let Some(p) = values[j as usize] {
                        let h = child_preds[j as usize];
                        num += p * h;
                        den += h;
                        plain += p;
                        count += 1;
                    }
                }
                if count == 0 {
                    None
                } else if libm::fabs(den) < SOFT_DENOMINATOR_EPS {
                    Some(plain / count as f64)
                } else {
                    Some(num / den)
                }
            })
            .collect();
        out.push(FeatureColumn::numerical(
            format!("soft:{path}:{attr}"),
            column,
        ));
    }
    out
}

/// Concatenates `prop ⊕ score ⊕ hard ⊕ soft` for `node`. `children(arc)`
/// returns the assembled block and predictions of the child at the end of
/// `arc`; it is only called for the node's outgoing arcs.
pub fn assemble_b<'c>(
    plan: &Plan,
    schedule: &Schedule,
    node: usize,
    config: &AttentionConfig,
    mut children: impl FnMut(usize) -> (&'c FeatureBlock, &'c [f64]),
) -> FeatureBlock {
    let prop = plan.prop_block(node).to_vec();
    let mut attended: Vec<Attended> = prop
        .iter()
        .enumerate()
        .map(|(i, c)| Attended {
            column: i,
            path: String::new(),
            attr: String::from(c.name.strip_prefix("prop:").unwrap_or(&c.name)),
        })
        .collect();
    let arcs = &schedule.node(node).children;
    let mut score = Vec::with_capacity(3 * arcs.len());
    let mut hard = Vec::new();
    let mut soft = Vec::new();
    let mut hard_attended = Vec::new();
    for &a in arcs {
        let (child, preds) = children(a);
        score.extend(compute_b_score(plan, a, preds));
        let rel = plan.relation(a);
        for att in &child.attended {
            let (path, attr) = attended_name(rel, att);
            hard_attended.push((path, attr));
        }
        hard.extend(compute_b_hard(plan, a, child, preds));
        soft.extend(compute_b_soft(plan, a, child, preds));
    }
    let widths = BlockWidths {
        prop: prop.len(),
        score: score.len(),
        hard: hard.len(),
        soft: soft.len(),
    };
    if config.chain_hard {
        let base = widths.prop + widths.score;
        attended.extend(
            hard_attended
                .into_iter()
                .enumerate()
                .map(|(i, (path, attr))| Attended {
                    column: base + i,
                    path,
                    attr,
                }),
        );
    }
    let mut columns = prop;
    columns.extend(score);
    columns.extend(hard);
    columns.extend(soft);
    FeatureBlock {
        node,
        columns,
        widths,
        attended,
    }
}

/// Assembles every node's block children first; `predict(node, block)`
/// supplies the node's predictions over its rows. Blocks are returned in
/// schedule node order.
pub fn assemble_all(
    plan: &Plan,
    schedule: &Schedule,
    config: &AttentionConfig,
    mut predict: impl FnMut(usize, &FeatureBlock) -> Vec<f64>,
) -> Vec<FeatureBlock> {
    let n = schedule.nodes().len();
    let mut blocks: Vec<Option<FeatureBlock>> = vec![None; n];
    let mut preds: Vec<Vec<f64>> = vec![Vec::new(); n];
    for &node in schedule.topological_order().iter().rev() {
        let block = assemble_b(plan, schedule, node, config, |arc| {
            let child = schedule.arc(arc).child;
            (
                blocks[child].as_ref().expect("children first"),
                preds[child].as_slice(),
            )
        });
        preds[node] = predict(node, &block);
        blocks[node] = Some(block);
    }
    blocks
        .into_iter()
        .map(|b| b.expect("every node visited"))
        .collect()
}

/// Column names of every node's block, in schedule node order. Names depend
/// only on the schema, the schedule and the configuration.
pub fn block_names(
    schema: &Schema,
    schedule: &Schedule,
    config: &AttentionConfig,
) -> Vec<Vec<String>> {
    let empty = InstanceBuilder::new(schema).finish();
    let plan = Plan::build(schedule, &empty, &[]);
    assemble_all(&plan, schedule, config, |_, _| Vec::new())
        .into_iter()
        .map(|b| b.columns.into_iter().map(|c| c.name).collect())
        .collect()
}
