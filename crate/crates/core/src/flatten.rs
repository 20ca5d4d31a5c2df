//! Propositionalization: collapses a relational instance into one table.
//!
//! Nodes of the schedule are processed children first. Every numerical column
//! of a child (its own attributes and whatever it already received from its
//! own children) becomes a mean over the related rows on the parent; every
//! categorical attribute becomes one frequency column per known category,
//! zero when no related row carries a category.
//! Propagated columns are named by their relation path, e.g. `r/r''/p'':mean`
//! or `r'/color:freq=red`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{
    AttrKind, DatasetInstance, InstanceBuilder, LabelDef, PropColumn, PropDef, PropValue,
    RowRecord, Schema, TableDef,
};
use crate::schedule::Schedule;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlattenError {
    #[error("instance schema does not match the fitted schema")]
    SchemaMismatch,
    #[error("a propagated column name collides with a root attribute")]
    NameCollision,
}

/// Frozen flattening: schedule plus category vocabularies observed at fit
/// time, so train and test produce the same columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Flattener {
    schema: Schema,
    schedule: Schedule,
    /// Sorted categories per `(table, prop)`.
    vocab: BTreeMap<(usize, usize), Vec<String>>,
}

struct Column {
    name: String,
    values: Vec<Option<f64>>,
    /// Value when no related row has a present value: missing for means,
    /// zero for frequencies.
    empty: Option<f64>,
}

impl Flattener {
    pub fn fit(instance: &DatasetInstance, schedule: &Schedule) -> Flattener {
        let schema = instance.schema();
        let mut vocab = BTreeMap::new();
        for (t, def) in schema.tables().iter().enumerate() {
            for (p, prop) in def.props.iter().enumerate() {
                if prop.kind != AttrKind::Categorical {
                    continue;
                }
                if let PropColumn::Categorical(values) = instance.prop_column(t, p) {
                    let seen: BTreeSet<&String> = values.iter().flatten().collect();
                    vocab.insert((t, p), seen.into_iter().cloned().collect());
                }
            }
        }
        Flattener {
            schema: schema.clone(),
            schedule: schedule.clone(),
            vocab,
        }
    }

    /// Names of the propagated (non-root) columns, in output order.
    pub fn propagated_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let root = self.schedule.root();
        for &a in &self.schedule.node(root).children {
            self.arc_names(a, &mut names);
        }
        names
    }

    fn arc_names(&self, arc: usize, out: &mut Vec<String>) {
        let rel = self.schedule.arc_relation(&self.schema, arc);
        let child = self.schedule.arc(arc).child;
        let mut inner = Vec::new();
        self.node_own_names(child, &mut inner);
        for &a in &self.schedule.node(child).children {
            self.arc_names(a, &mut inner);
        }
        out.extend(inner.into_iter().map(|n| format!("{rel}/{n}")));
    }

    fn node_own_names(&self, node: usize, out: &mut Vec<String>) {
        let t = self.schedule.node(node).table;
        for (p, prop) in self.schema.table(t).props.iter().enumerate() {
            match prop.kind {
                AttrKind::Numerical => out.push(format!("{}:mean", prop.name)),
                AttrKind::Categorical => {
                    for v in self.vocab.get(&(t, p)).into_iter().flatten() {
                        out.push(format!("{}:freq={v}", prop.name));
                    }
                }
            }
        }
    }

    /// Flattens `instance`, which must share the fitted schema.
    pub fn apply(&self, instance: &DatasetInstance) -> Result<DatasetInstance, FlattenError> {
        if instance.schema() != &self.schema {
            return Err(FlattenError::SchemaMismatch);
        }
        let schedule = &self.schedule;
        let n = schedule.nodes().len();
        // Columns each node hands to its parent, over all rows of its table.
        let mut lifted: Vec<Vec<Column>> = (0..n).map(|_| Vec::new()).collect();
        for &node in schedule.topological_order().iter().rev() {
            let t = schedule.node(node).table;
            let rows = instance.table_len(t);
            let mut cols = if node == schedule.root() {
                Vec::new()
            } else {
                self.own_columns(instance, node)
            };
            for &a in &schedule.node(node).children {
                let arc = schedule.arc(a);
                let rel = schedule.arc_relation(&self.schema, a);
                for c in &lifted[arc.child] {
                    let values = (0..rows)
                        .map(|x| {
                            let related = instance.relation(t, arc.relation, x);
                            mean(related.iter().map(|&y| c.values[y])).or(c.empty)
                        })
                        .collect();
                    cols.push(Column {
                        name: format!("{rel}/{}", c.name),
                        values,
                        empty: c.empty,
                    });
                }
            }
            lifted[node] = cols;
        }
        let rt = schedule.node(schedule.root()).table;
        let extra = core::mem::take(&mut lifted[schedule.root()]);

        let def = self.schema.table(rt);
        let mut props = def.props.clone();
        props.extend(extra.iter().map(|c| PropDef {
            name: c.name.clone(),
            kind: AttrKind::Numerical,
        }));
        let label: Option<LabelDef> = def.label.clone();
        let schema = Schema::new(
            vec![TableDef {
                name: def.name.clone(),
                props,
                rels: Vec::new(),
                label,
            }],
            &def.name,
        )
        .map_err(|_| FlattenError::NameCollision)?;
        let mut builder = InstanceBuilder::new(&schema);
        for x in 0..instance.table_len(rt) {
            let mut values: Vec<Option<PropValue>> = (0..def.props.len())
                .map(|p| instance.prop_column(rt, p).value(x))
                .collect();
            values.extend(extra.iter().map(|c| c.values[x].map(PropValue::Num)));
            builder
                .push_row(
                    0,
                    RowRecord {
                        id: String::from(instance.row_id(rt, x)),
                        props: values,
                        rels: Vec::new(),
                        label: instance.labels()[x].clone(),
                    },
                )
                .expect("row matches flattened schema");
        }
        Ok(builder.finish())
    }

    /// A non-root node's own attributes as liftable columns: numerical
    /// values as-is, categorical ones as 0/1 indicators per known category.
    fn own_columns(&self, instance: &DatasetInstance, node: usize) -> Vec<Column> {
        let t = self.schedule.node(node).table;
        let mut out = Vec::new();
        for (p, prop) in self.schema.table(t).props.iter().enumerate() {
            match instance.prop_column(t, p) {
                PropColumn::Numerical(v) => out.push(Column {
                    name: format!("{}:mean", prop.name),
                    values: v.clone(),
                    empty: None,
                }),
                PropColumn::Categorical(v) => {
                    for cat in self.vocab.get(&(t, p)).into_iter().flatten() {
                        out.push(Column {
                            name: format!("{}:freq={cat}", prop.name),
                            values: v
                                .iter()
                                .map(|c| c.as_ref().map(|c| if c == cat { 1.0 } else { 0.0 }))
                                .collect(),
                            empty: Some(0.0),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Mean of present values; `None` when there are none.
fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Fits and applies a [`Flattener`] on the same instance.
pub fn flatten(
    instance: &DatasetInstance,
    schedule: &Schedule,
) -> Result<DatasetInstance, FlattenError> {
    Flattener::fit(instance, schedule).apply(instance)
}
