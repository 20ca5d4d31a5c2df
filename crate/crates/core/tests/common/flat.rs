//! Flattened columns recomputed path by path.

use relgbdt_core::data::PropColumn;
use relgbdt_core::{build_schedule, flatten, DatasetInstance, Schema};

/// Relation paths from the root along which no table occurs more than
/// `cover` times (root included), with the table each path ends at.
pub fn paths(schema: &Schema, cover: usize) -> Vec<(Vec<usize>, usize)> {
    fn walk(
        schema: &Schema,
        t: usize,
        path: &mut Vec<usize>,
        counts: &mut Vec<usize>,
        cover: usize,
        out: &mut Vec<(Vec<usize>, usize)>,
    ) {
        for (r, rel) in schema.table(t).rels.iter().enumerate() {
            let target = schema.table_index(&rel.target).unwrap();
            if counts[target] == cover {
                continue;
            }
            counts[target] += 1;
            path.push(r);
            out.push((path.clone(), target));
            walk(schema, target, path, counts, cover, out);
            path.pop();
            counts[target] -= 1;
        }
    }
    let root = schema.root_index();
    let mut counts = vec![0; schema.tables().len()];
    counts[root] = 1;
    let mut out = Vec::new();
    walk(schema, root, &mut Vec::new(), &mut counts, cover, &mut out);
    out
}

pub fn value(
    inst: &DatasetInstance,
    t: usize,
    row: usize,
    path: &[usize],
    prop: usize,
) -> Option<f64> {
    match path.split_first() {
        None => match inst.prop_column(t, prop) {
            PropColumn::Numerical(v) => v[row],
            PropColumn::Categorical(_) => unreachable!(),
        },
        Some((&r, rest)) => {
            let target = inst.schema().rel_target(t, r);
            let vals: Vec<f64> = inst
                .relation(t, r, row)
                .iter()
                .filter_map(|&j| value(inst, target, j, rest, prop))
                .collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        }
    }
}

/// Compares the flattened table with the path oracle; values must match
/// exactly.
pub fn check(inst: &DatasetInstance, cover: usize) -> Result<(), String> {
    let schema = inst.schema();
    let flat = flatten(inst, &build_schedule(schema, cover)).map_err(|e| e.to_string())?;
    let ft = flat.schema().table(0);
    if flat.schema().tables().len() != 1 || ft.name != schema.root().name {
        return Err("result is not a single root table".into());
    }
    if flat.labels() != inst.labels() || flat.row_ids(0) != inst.row_ids(schema.root_index()) {
        return Err("rows or labels changed".into());
    }

    let root = schema.root_index();
    let mut expected = Vec::new();
    for (p, def) in schema.root().props.iter().enumerate() {
        expected.push((def.name.clone(), Vec::new(), p));
    }
    for (path, end) in paths(schema, cover) {
        let mut t = root;
        let mut names = Vec::new();
        for &r in &path {
            names.push(schema.table(t).rels[r].name.clone());
            t = schema.rel_target(t, r);
        }
        for (p, def) in schema.table(end).props.iter().enumerate() {
            expected.push((
                format!("{}/{}:mean", names.join("/"), def.name),
                path.clone(),
                p,
            ));
        }
    }
    let mut got: Vec<&str> = ft.props.iter().map(|p| p.name.as_str()).collect();
    let mut want: Vec<&str> = expected.iter().map(|e| e.0.as_str()).collect();
    got.sort_unstable();
    want.sort_unstable();
    if got != want {
        return Err(format!("columns {got:?}, expected {want:?}"));
    }

    for (name, path, p) in &expected {
        let col = ft.prop_index(name).expect("name checked above");
        let PropColumn::Numerical(v) = flat.prop_column(0, col) else {
            return Err(format!("{name} is not numerical"));
        };
        for row in 0..inst.root_len() {
            let want = value(inst, root, row, path, *p);
            if v[row] != want {
                return Err(format!("{name} row {row}: {:?}, expected {want:?}", v[row]));
            }
        }
    }
    Ok(())
}
