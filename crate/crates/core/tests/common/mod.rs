#![allow(dead_code)]

pub mod blocks;
pub mod flat;

use std::collections::BTreeMap;

use relgbdt_core::data::{LabelDef, PropDef, RelDef};
use relgbdt_core::{
    load_instance, AttrKind, DatasetInstance, Schema, TableDef, TableRecords, TaskKind,
};

pub fn table(name: &str, props: &[&str], rels: &[(&str, &str)]) -> TableDef {
    TableDef {
        name: name.into(),
        props: props
            .iter()
            .map(|p| PropDef {
                name: (*p).into(),
                kind: AttrKind::Numerical,
            })
            .collect(),
        rels: rels
            .iter()
            .map(|(r, t)| RelDef {
                name: (*r).into(),
                target: (*t).into(),
            })
            .collect(),
        label: None,
    }
}

/// A{p; r→B, r'→D}, B{p'; r''→C}, C{p''; r'''→A}, D{p'''}, label on A.
pub fn cycle_schema(task: TaskKind) -> Schema {
    let mut a = table("A", &["p"], &[("r", "B"), ("r'", "D")]);
    a.label = Some(LabelDef {
        name: "l".into(),
        task,
    });
    Schema::new(
        vec![
            a,
            table("B", &["p'"], &[("r''", "C")]),
            table("C", &["p''"], &[("r'''", "A")]),
            table("D", &["p'''"], &[]),
        ],
        "A",
    )
    .unwrap()
}

pub fn records(header: &[&str], rows: &[&[&str]]) -> TableRecords {
    TableRecords {
        header: header.iter().map(|s| s.to_string()).collect(),
        rows: rows
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect(),
    }
}

/// The two-row example instance used throughout the docs.
pub fn example_instance() -> DatasetInstance {
    let mut m = BTreeMap::new();
    m.insert(
        "A".to_string(),
        records(
            &["id", "p", "r", "r'", "l"],
            &[
                &["a_0", "0.1", "b_0", "", "0"],
                &["a_1", "0.2", "b_0;b_1", "d_0", "1"],
            ],
        ),
    );
    m.insert(
        "B".to_string(),
        records(
            &["id", "p'", "r''"],
            &[&["b_0", "0.3", "c_0;c_1"], &["b_1", "0.4", ""]],
        ),
    );
    m.insert(
        "C".to_string(),
        records(
            &["id", "p''", "r'''"],
            &[&["c_0", "0.5", "a_1"], &["c_1", "0.6", ""]],
        ),
    );
    m.insert(
        "D".to_string(),
        records(&["id", "p'''"], &[&["d_0", "0.7"]]),
    );
    load_instance(&cycle_schema(TaskKind::Binary), &m).unwrap()
}

/// Random instance of the cycle schema: up to `max_rows` rows per table,
/// about a fifth of attribute values missing, relations of 0..=3 targets.
pub fn random_instance(seed: u64, max_rows: usize, task: TaskKind) -> DatasetInstance {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let names = ["A", "B", "C", "D"];
    let sizes: Vec<usize> = (0..4).map(|_| rng.gen_range(1..=max_rows)).collect();
    let id = |t: usize, i: usize| format!("{}{i}", names[t].to_lowercase());
    let value = |rng: &mut rand::rngs::StdRng| {
        if rng.gen_bool(0.2) {
            String::new()
        } else {
            format!("{}", rng.gen_range(0..100) as f64 / 100.0)
        }
    };
    let rel = |rng: &mut rand::rngs::StdRng, target: usize| {
        let k = rng.gen_range(0..=3);
        let ids: Vec<String> = (0..k)
            .map(|_| id(target, rng.gen_range(0..sizes[target])))
            .collect();
        ids.join(";")
    };
    let headers: [&[&str]; 4] = [
        &["id", "p", "r", "r'", "l"],
        &["id", "p'", "r''"],
        &["id", "p''", "r'''"],
        &["id", "p'''"],
    ];
    let mut m = BTreeMap::new();
    for t in 0..4 {
        let mut rows = Vec::new();
        for i in 0..sizes[t] {
            let mut row = vec![id(t, i), value(&mut rng)];
            match t {
                0 => {
                    row.push(rel(&mut rng, 1));
                    row.push(rel(&mut rng, 3));
                    row.push(match task {
                        TaskKind::Regression => format!("{}", rng.gen_range(-50..50) as f64 / 10.0),
                        _ => format!("{}", rng.gen_range(0..2)),
                    });
                }
                1 => row.push(rel(&mut rng, 2)),
                2 => row.push(rel(&mut rng, 0)),
                _ => {}
            }
            rows.push(row);
        }
        m.insert(
            names[t].to_string(),
            TableRecords {
                header: headers[t].iter().map(|s| s.to_string()).collect(),
                rows,
            },
        );
    }
    load_instance(&cycle_schema(task), &m).unwrap()
}

/// Single table `T` with numerical columns `x0..` and label `y`.
pub fn single_table(xs: &[Vec<f64>], ys: &[String], task: TaskKind) -> DatasetInstance {
    let width = xs.first().map_or(0, Vec::len);
    let names: Vec<String> = (0..width).map(|k| format!("x{k}")).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = table("T", &name_refs, &[]);
    t.label = Some(LabelDef {
        name: "y".into(),
        task,
    });
    let schema = Schema::new(vec![t], "T").unwrap();
    let mut header = vec!["id".to_string()];
    header.extend(names);
    header.push("y".into());
    let rows = xs
        .iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (x, y))| {
            let mut r = vec![format!("t{i}")];
            r.extend(x.iter().map(|v| format!("{v}")));
            r.push(y.clone());
            r
        })
        .collect();
    let mut m = BTreeMap::new();
    m.insert("T".to_string(), TableRecords { header, rows });
    load_instance(&schema, &m).unwrap()
}
