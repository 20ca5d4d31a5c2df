//! Synthetic four-table benchmark with a cycle.
//!
//! Tables `A{p}`, `B{p'}`, `C{p''}`, `D{p'''}` with relations
//! `r: A→B`, `r': A→D`, `r'': B→C` and `r''': C→A`. An `A` row is positive
//! iff one of its grandchildren through `r` then `r''` has `p'' ≥ p`, so the
//! label cannot be read from `A`'s own attribute.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::data::{
    AttrKind, DatasetInstance, InstanceBuilder, LabelDef, LabelValue, PropDef, PropValue, RelDef,
    RowRecord, Schema, TableDef, TaskKind,
};
use crate::seed::aux_rng;

pub const DEFAULT_N_A: usize = 7168;
/// Largest relation size; sizes are uniform on `0..=MAX_FANOUT`.
pub const MAX_FANOUT: usize = 3;

const GENERATOR_TAG: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub n_a: usize,
    pub seed: u64,
    /// Emit `max p'' − p` over grandchildren as a real label instead of the
    /// binary rule.
    pub regression: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_a: DEFAULT_N_A,
            seed: 0,
            regression: false,
        }
    }
}

fn numerical_table(name: &str, prop: &str, rels: &[(&str, &str)]) -> TableDef {
    TableDef {
        name: name.to_string(),
        props: vec![PropDef {
            name: prop.to_string(),
            kind: AttrKind::Numerical,
        }],
        rels: rels
            .iter()
            .map(|(r, t)| RelDef {
                name: r.to_string(),
                target: t.to_string(),
            })
            .collect(),
        label: None,
    }
}

/// The benchmark schema, rooted at `A` with label `l`.
pub fn schema(task: TaskKind) -> Schema {
    let mut a = numerical_table("A", "p", &[("r", "B"), ("r'", "D")]);
    a.label = Some(LabelDef {
        name: "l".to_string(),
        task,
    });
    Schema::new(
        vec![
            a,
            numerical_table("B", "p'", &[("r''", "C")]),
            numerical_table("C", "p''", &[("r'''", "A")]),
            numerical_table("D", "p'''", &[]),
        ],
        "A",
    )
    .expect("benchmark schema is valid")
}

struct Rows {
    ids: Vec<String>,
    values: Vec<f64>,
    links: Vec<Vec<usize>>,
}

impl Rows {
    fn with_capacity(n: usize) -> Self {
        Rows {
            ids: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            links: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, prefix: &str, value: f64) -> usize {
        let i = self.ids.len();
        self.ids.push(format!("{prefix}_{i}"));
        self.values.push(value);
        self.links.push(Vec::new());
        i
    }
}

/// Positive iff some `c ∈ r''[b]` for some `b ∈ r[x]` has `p'' ≥ p`.
pub fn label_rule(p: f64, grandchildren: impl IntoIterator<Item = f64>) -> bool {
    grandchildren.into_iter().any(|q| p <= q)
}

/// Regression target: the largest grandchild `p''` minus `p`, with an empty
/// grandchild set counting as `p'' = 0`.
pub fn regression_target(p: f64, grandchildren: impl IntoIterator<Item = f64>) -> f64 {
    grandchildren.into_iter().fold(0.0, f64::max) - p
}

/// Draws an instance. Every parent gets fresh child rows; each `C` row
/// points back to one uniformly chosen `A` row.
pub fn generate(config: &SynthConfig) -> DatasetInstance {
    let mut rng = aux_rng(config.seed, GENERATOR_TAG);
    let n = config.n_a;
    let mut a = Rows::with_capacity(n);
    let mut b = Rows::with_capacity(n * 2);
    let mut c = Rows::with_capacity(n * 3);
    let mut d = Rows::with_capacity(n * 2);
    // A's second relation, kept apart from `links` which holds r.
    let mut a_to_d: Vec<Vec<usize>> = Vec::with_capacity(n);
    for _ in 0..n {
        let x = a.push("a", rng.gen::<f64>());
        for _ in 0..rng.gen_range(0..=MAX_FANOUT) {
            let y = b.push("b", rng.gen::<f64>());
            a.links[x].push(y);
            for _ in 0..rng.gen_range(0..=MAX_FANOUT) {
                let z = c.push("c", rng.gen::<f64>());
                b.links[y].push(z);
            }
        }
        let mut ds = Vec::new();
        for _ in 0..rng.gen_range(0..=MAX_FANOUT) {
            ds.push(d.push("d", rng.gen::<f64>()));
        }
        a_to_d.push(ds);
    }
    if n > 0 {
        for z in 0..c.ids.len() {
            c.links[z].push(rng.gen_range(0..n));
        }
    }

    let task = if config.regression {
        TaskKind::Regression
    } else {
        TaskKind::Binary
    };
    let schema = schema(task);
    let mut builder = InstanceBuilder::new(&schema);
    let names = |rows: &Rows, targets: &[usize]| -> Vec<String> {
        targets.iter().map(|&t| rows.ids[t].clone()).collect()
    };
    for x in 0..n {
        let grand = a.links[x]
            .iter()
            .flat_map(|&y| b.links[y].iter().map(|&z| c.values[z]));
        let label = if config.regression {
            LabelValue::Real(regression_target(a.values[x], grand))
        } else {
            LabelValue::Real(if label_rule(a.values[x], grand) {
                1.0
            } else {
                0.0
            })
        };
        builder
            .push_row(
                0,
                RowRecord {
                    id: a.ids[x].clone(),
                    props: vec![Some(PropValue::Num(a.values[x]))],
                    rels: vec![names(&b, &a.links[x]), names(&d, &a_to_d[x])],
                    label: Some(label),
                },
            )
            .expect("row matches schema");
    }
    let tables = [(1, &b, Some(&c)), (2, &c, Some(&a)), (3, &d, None)];
    for (t, rows, target) in tables {
        for i in 0..rows.ids.len() {
            let rels = match target {
                Some(target) => vec![names(target, &rows.links[i])],
                None => Vec::new(),
            };
            builder
                .push_row(
                    t,
                    RowRecord {
                        id: rows.ids[i].clone(),
                        props: vec![Some(PropValue::Num(rows.values[i]))],
                        rels,
                        label: None,
                    },
                )
                .expect("row matches schema");
        }
    }
    builder.finish()
}

/// Recomputes the binary label of every `A` row from the instance alone.
pub fn relabel(instance: &DatasetInstance) -> Vec<bool> {
    let schema = instance.schema();
    let (ta, tb, tc) = (
        schema.table_index("A").expect("table A"),
        schema.table_index("B").expect("table B"),
        schema.table_index("C").expect("table C"),
    );
    let num = |t: usize, x: usize| match instance.prop_column(t, 0).value(x) {
        Some(PropValue::Num(v)) => v,
        _ => f64::NAN,
    };
    (0..instance.table_len(ta))
        .map(|x| {
            let grand = instance
                .relation(ta, 0, x)
                .iter()
                .flat_map(|&y| instance.relation(tb, 0, y).iter().map(move |&z| num(tc, z)));
            label_rule(num(ta, x), grand)
        })
        .collect()
}
