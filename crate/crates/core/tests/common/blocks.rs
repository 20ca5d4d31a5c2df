//! Feature blocks recomputed straight from the instance's relations.

use relgbdt_core::attention::{assemble_b, Plan};
use relgbdt_core::data::PropColumn;
use relgbdt_core::tree::ColumnData;
use relgbdt_core::{build_schedule, AttentionConfig, DatasetInstance, FeatureBlock, Schedule};

/// Child predictions as a function of `(schedule node, table row)`.
pub type Pred<'a> = &'a dyn Fn(usize, usize) -> f64;

/// Pseudo-random prediction of `node` on table row `row`.
pub fn h(node: usize, row: usize, salt: u64) -> f64 {
    let x = (node as u64 * 7919 + row as u64 * 104729 + salt).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ((x >> 11) % 2001) as f64 / 1000.0 - 1.0
}

pub struct Oracle<'a> {
    pub inst: &'a DatasetInstance,
    pub sched: &'a Schedule,
    pub chain: bool,
    pub pred: Pred<'a>,
}

impl Oracle<'_> {
    fn prop(&self, node: usize, row: usize) -> Vec<(String, Option<f64>)> {
        let t = self.sched.node(node).table;
        let def = self.inst.schema().table(t);
        def.props
            .iter()
            .enumerate()
            .map(|(p, d)| {
                let v = match self.inst.prop_column(t, p) {
                    PropColumn::Numerical(v) => v[row],
                    PropColumn::Categorical(_) => unreachable!(),
                };
                (d.name.clone(), v)
            })
            .collect()
    }

    /// `(path, attr) -> value` a parent can attend over at this row.
    fn attended(&self, node: usize, row: usize) -> Vec<((String, String), Option<f64>)> {
        let mut out: Vec<_> = self
            .prop(node, row)
            .into_iter()
            .map(|(n, v)| ((String::new(), n), v))
            .collect();
        if self.chain {
            for (name, v) in self.columns(node, row) {
                if let Some(rest) = name.strip_prefix("hard:") {
                    let (path, attr) = rest.split_once(':').unwrap();
                    out.push(((path.to_string(), attr.to_string()), v));
                }
            }
        }
        out
    }

    pub fn columns(&self, node: usize, row: usize) -> Vec<(String, Option<f64>)> {
        let t = self.sched.node(node).table;
        let mut prop: Vec<_> = self
            .prop(node, row)
            .into_iter()
            .map(|(n, v)| (format!("prop:{n}"), v))
            .collect();
        let (mut score, mut hard, mut soft) = (Vec::new(), Vec::new(), Vec::new());
        for &a in &self.sched.node(node).children {
            let arc = self.sched.arc(a);
            let rel = &self.inst.schema().table(t).rels[arc.relation].name;
            let targets = self.inst.relation(t, arc.relation, row);
            let hs: Vec<f64> = targets.iter().map(|&j| (self.pred)(arc.child, j)).collect();
            let (min, max, mean) = if hs.is_empty() {
                (None, None, None)
            } else {
                (
                    Some(hs.iter().cloned().fold(f64::INFINITY, f64::min)),
                    Some(hs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
                    Some(hs.iter().sum::<f64>() / hs.len() as f64),
                )
            };
            score.push((format!("score:{rel}:min"), min));
            score.push((format!("score:{rel}:max"), max));
            score.push((format!("score:{rel}:mean"), mean));
            let mut best: Option<usize> = None;
            for (k, &x) in hs.iter().enumerate() {
                if best.is_none_or(|b| x > hs[b]) {
                    best = Some(k);
                }
            }
            let per_target: Vec<_> = targets
                .iter()
                .map(|&j| self.attended(arc.child, j))
                .collect();
            let keys: Vec<(String, String)> = self.attended_keys(arc.child);
            for (ki, (path, attr)) in keys.iter().enumerate() {
                let full = if path.is_empty() {
                    rel.clone()
                } else {
                    format!("{rel}/{path}")
                };
                hard.push((
                    format!("hard:{full}:{attr}"),
                    best.and_then(|b| per_target[b][ki].1),
                ));
                let (mut num, mut den, mut plain, mut n) = (0.0, 0.0, 0.0, 0);
                for (k, vals) in per_target.iter().enumerate() {
                    if let Some(p) = vals[ki].1 {
                        num += p * hs[k];
                        den += hs[k];
                        plain += p;
                        n += 1;
                    }
                }
                let v = if n == 0 {
                    None
                } else if den.abs() < 1e-12 {
                    Some(plain / n as f64)
                } else {
                    Some(num / den)
                };
                soft.push((format!("soft:{full}:{attr}"), v));
            }
        }
        prop.extend(score);
        prop.extend(hard);
        prop.extend(soft);
        prop
    }

    fn attended_keys(&self, node: usize) -> Vec<(String, String)> {
        let t = self.sched.node(node).table;
        let mut keys: Vec<_> = self
            .inst
            .schema()
            .table(t)
            .props
            .iter()
            .map(|p| (String::new(), p.name.clone()))
            .collect();
        if self.chain {
            for &a in &self.sched.node(node).children {
                let arc = self.sched.arc(a);
                let rel = &self.inst.schema().table(t).rels[arc.relation].name;
                for (path, attr) in self.attended_keys(arc.child) {
                    let full = if path.is_empty() {
                        rel.clone()
                    } else {
                        format!("{rel}/{path}")
                    };
                    keys.push((full, attr));
                }
            }
        }
        keys
    }
}

pub fn assembled(
    plan: &Plan,
    sched: &Schedule,
    config: &AttentionConfig,
    pred: Pred<'_>,
) -> Vec<FeatureBlock> {
    let n = sched.nodes().len();
    let mut blocks: Vec<Option<FeatureBlock>> = vec![None; n];
    let preds: Vec<Vec<f64>> = (0..n)
        .map(|v| plan.rows(v).iter().map(|&r| pred(v, r)).collect())
        .collect();
    for &node in sched.topological_order().iter().rev() {
        let b = assemble_b(plan, sched, node, config, |arc| {
            let c = sched.arc(arc).child;
            (blocks[c].as_ref().unwrap(), preds[c].as_slice())
        });
        blocks[node] = Some(b);
    }
    blocks.into_iter().map(Option::unwrap).collect()
}

/// Compares every assembled block cell with the oracle; values must match
/// exactly.
pub fn check(
    inst: &DatasetInstance,
    cover: usize,
    chain: bool,
    pred: Pred<'_>,
) -> Result<(), String> {
    let sched = build_schedule(inst.schema(), cover);
    let roots: Vec<usize> = (0..inst.root_len()).collect();
    let plan = Plan::build(&sched, inst, &roots);
    let config = AttentionConfig { chain_hard: chain };
    let blocks = assembled(&plan, &sched, &config, pred);
    let oracle = Oracle {
        inst,
        sched: &sched,
        chain,
        pred,
    };
    for (node, block) in blocks.iter().enumerate() {
        let id = &sched.node(node).id;
        if block.widths.total() != block.columns.len() {
            return Err(format!("{id}: block widths do not add up"));
        }
        for (local, &row) in plan.rows(node).iter().enumerate() {
            let expected = oracle.columns(node, row);
            let names: Vec<&str> = expected.iter().map(|(n, _)| n.as_str()).collect();
            if block.names() != names {
                return Err(format!(
                    "{id}: columns {:?}, expected {names:?}",
                    block.names()
                ));
            }
            for (col, (name, want)) in block.columns.iter().zip(&expected) {
                let ColumnData::Numerical(v) = &col.data else {
                    return Err(format!("{id}: {name} is not numerical"));
                };
                if v[local] != *want {
                    return Err(format!(
                        "{id} {name} row {row}: {:?}, expected {want:?}",
                        v[local]
                    ));
                }
            }
        }
    }
    Ok(())
}
