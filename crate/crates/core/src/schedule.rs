//! Schedules: rooted acyclic graphs laid over the schema topology.
//!
//! Acyclic schemata map one node per reachable table, so a table reached
//! along two relation paths becomes a node with several parents. Schemata
//! with circuits are unrolled into a tree by depth-first expansion from the
//! root: every relation of a node's table yields a child node unless the
//! child's table already occurs `cover_count` times on the root path.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetInstance, InstanceError, Schema};

pub const DEFAULT_COVER_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleNode {
    /// Root table name followed by the relation names of the first path that
    /// reaches the node, joined with `/`.
    pub id: String,
    pub table: usize,
    /// Incoming arc indices.
    pub parents: Vec<usize>,
    /// Outgoing arc indices, in relation declaration order.
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleArc {
    pub parent: usize,
    pub child: usize,
    /// Relation index within the parent node's table.
    pub relation: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    nodes: Vec<ScheduleNode>,
    arcs: Vec<ScheduleArc>,
    cover_count: usize,
    order: Vec<usize>,
    unreachable: Vec<String>,
}

impl Schedule {
    pub fn nodes(&self) -> &[ScheduleNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &ScheduleNode {
        &self.nodes[index]
    }

    pub fn arcs(&self) -> &[ScheduleArc] {
        &self.arcs
    }

    pub fn arc(&self, index: usize) -> &ScheduleArc {
        &self.arcs[index]
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn cover_count(&self) -> usize {
        self.cover_count
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Root first, parents before children, ties by node index.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Tables that cannot be reached from the root and were left out.
    pub fn unreachable_tables(&self) -> &[String] {
        &self.unreachable
    }

    /// Relation name carried by an arc.
    pub fn arc_relation<'a>(&self, schema: &'a Schema, arc: usize) -> &'a str {
        let a = &self.arcs[arc];
        &schema.table(self.nodes[a.parent].table).rels[a.relation].name
    }

    /// Text tree, one line per node visit: `node_id : table (via relation)`.
    pub fn render(&self, schema: &Schema) -> String {
        let mut out = String::new();
        self.render_node(schema, 0, None, 0, &mut out);
        out
    }

    fn render_node(
        &self,
        schema: &Schema,
        node: usize,
        via: Option<usize>,
        depth: usize,
        out: &mut String,
    ) {
        let n = &self.nodes[node];
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push_str(&format!("{} : {}", n.id, schema.table(n.table).name));
        if let Some(arc) = via {
            out.push_str(&format!(" (via {})", self.arc_relation(schema, arc)));
        }
        out.push('\n');
        for &arc in &n.children {
            self.render_node(schema, self.arcs[arc].child, Some(arc), depth + 1, out);
        }
    }

    /// Checks structural invariants against `schema`. Used when loading
    /// persisted models.
    pub fn is_consistent_with(&self, schema: &Schema) -> bool {
        *self == build_schedule(schema, self.cover_count)
    }
}

/// Builds the schedule for `schema`. `cover_count` bounds how many times a
/// table may occur along one root path when the schema has circuits; it is
/// clamped to at least 1.
pub fn build_schedule(schema: &Schema, cover_count: usize) -> Schedule {
    let cover_count = cover_count.max(1);
    let root = schema.root_index();
    let reachable = reachable_tables(schema, root);
    let unreachable = schema
        .tables()
        .iter()
        .enumerate()
        .filter(|(t, _)| !reachable[*t])
        .map(|(_, d)| d.name.clone())
        .collect();
    let (nodes, arcs) = if has_circuit(schema, root) {
        unroll(schema, root, cover_count)
    } else {
        one_node_per_table(schema, root)
    };
    let order = kahn_order(&nodes, &arcs);
    Schedule {
        nodes,
        arcs,
        cover_count,
        order,
        unreachable,
    }
}

fn reachable_tables(schema: &Schema, root: usize) -> Vec<bool> {
    let mut seen = vec![false; schema.tables().len()];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(t) = stack.pop() {
        for r in 0..schema.table(t).rels.len() {
            let target = schema.rel_target(t, r);
            if !seen[target] {
                seen[target] = true;
                stack.push(target);
            }
        }
    }
    seen
}

/// Whether a directed circuit is reachable from `root`. Self-loops count.
fn has_circuit(schema: &Schema, root: usize) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; schema.tables().len()];
    // Iterative DFS: (table, next relation to inspect).
    let mut stack = vec![(root, 0usize)];
    mark[root] = Mark::Active;
    while let Some(top) = stack.last_mut() {
        let (t, next) = *top;
        if next < schema.table(t).rels.len() {
            top.1 += 1;
            let target = schema.rel_target(t, next);
            match mark[target] {
                Mark::Active => return true,
                Mark::New => {
                    mark[target] = Mark::Active;
                    stack.push((target, 0));
                }
                Mark::Done => {}
            }
        } else {
            mark[t] = Mark::Done;
            stack.pop();
        }
    }
    false
}

fn one_node_per_table(schema: &Schema, root: usize) -> (Vec<ScheduleNode>, Vec<ScheduleArc>) {
    let mut node_of = vec![usize::MAX; schema.tables().len()];
    let mut nodes: Vec<ScheduleNode> = Vec::new();
    // Preorder discovery fixes node numbering and ids.
    let mut stack = vec![(root, String::from(&*schema.table(root).name))];
    while let Some((t, id)) = stack.pop() {
        if node_of[t] != usize::MAX {
            continue;
        }
        node_of[t] = nodes.len();
        nodes.push(ScheduleNode {
            id: id.clone(),
            table: t,
            parents: Vec::new(),
            children: Vec::new(),
        });
        for (r, rel) in schema.table(t).rels.iter().enumerate().rev() {
            let target = schema.rel_target(t, r);
            if node_of[target] == usize::MAX {
                stack.push((target, format!("{id}/{}", rel.name)));
            }
        }
    }
    let mut arcs = Vec::new();
    for n in 0..nodes.len() {
        let t = nodes[n].table;
        for r in 0..schema.table(t).rels.len() {
            let child = node_of[schema.rel_target(t, r)];
            let a = arcs.len();
            arcs.push(ScheduleArc {
                parent: n,
                child,
                relation: r,
            });
            nodes[n].children.push(a);
            nodes[child].parents.push(a);
        }
    }
    (nodes, arcs)
}

fn unroll(
    schema: &Schema,
    root: usize,
    cover_count: usize,
) -> (Vec<ScheduleNode>, Vec<ScheduleArc>) {
    let mut nodes = vec![ScheduleNode {
        id: String::from(&*schema.table(root).name),
        table: root,
        parents: Vec::new(),
        children: Vec::new(),
    }];
    let mut arcs = Vec::new();
    let mut counts = vec![0usize; schema.tables().len()];
    counts[root] = 1;
    expand(schema, 0, cover_count, &mut counts, &mut nodes, &mut arcs);
    (nodes, arcs)
}

fn expand(
    schema: &Schema,
    node: usize,
    cover_count: usize,
    counts: &mut [usize],
    nodes: &mut Vec<ScheduleNode>,
    arcs: &mut Vec<ScheduleArc>,
) {
    let t = nodes[node].table;
    for r in 0..schema.table(t).rels.len() {
        let target = schema.rel_target(t, r);
        if counts[target] >= cover_count {
            continue;
        }
        let child = nodes.len();
        let a = arcs.len();
        let id = format!("{}/{}", nodes[node].id, schema.table(t).rels[r].name);
        nodes.push(ScheduleNode {
            id,
            table: target,
            parents: vec![a],
            children: Vec::new(),
        });
        arcs.push(ScheduleArc {
            parent: node,
            child,
            relation: r,
        });
        nodes[node].children.push(a);
        counts[target] += 1;
        expand(schema, child, cover_count, counts, nodes, arcs);
        counts[target] -= 1;
    }
}

fn kahn_order(nodes: &[ScheduleNode], arcs: &[ScheduleArc]) -> Vec<usize> {
    let mut indegree: Vec<usize> = nodes.iter().map(|n| n.parents.len()).collect();
    let mut ready: BTreeSet<usize> = (0..nodes.len()).filter(|&n| indegree[n] == 0).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(n) = ready.pop_first() {
        order.push(n);
        for &a in &nodes[n].children {
            let c = arcs[a].child;
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    order
}

/// Row ids related to `row` through the relation carried by `arc`.
pub fn instance_relation_rows<'a>(
    schedule: &Schedule,
    arc: usize,
    instance: &'a DatasetInstance,
    row: &str,
) -> Result<Vec<&'a str>, InstanceError> {
    let schema = instance.schema();
    let a = schedule.arc(arc);
    let table = &schema.table(schedule.node(a.parent).table).name;
    instance.relation_rows(table, schedule.arc_relation(schema, arc), row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::{cycle_schema, example_instance};
    use crate::data::{AttrKind, LabelDef, PropDef, RelDef, TableDef, TaskKind};
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn table(name: &str, rels: &[(&str, &str)]) -> TableDef {
        TableDef {
            name: name.to_string(),
            props: vec![PropDef {
                name: "v".to_string(),
                kind: AttrKind::Numerical,
            }],
            rels: rels
                .iter()
                .map(|(n, t)| RelDef {
                    name: n.to_string(),
                    target: t.to_string(),
                })
                .collect(),
            label: None,
        }
    }

    fn labeled(mut t: TableDef) -> TableDef {
        t.label = Some(LabelDef {
            name: "y".to_string(),
            task: TaskKind::Binary,
        });
        t
    }

    fn ids(s: &Schedule) -> Vec<&str> {
        s.nodes().iter().map(|n| n.id.as_str()).collect()
    }

    #[test]
    fn cycle_schema_covered_twice() {
        let schema = cycle_schema();
        let s = build_schedule(&schema, 2);
        assert_eq!(
            ids(&s),
            vec![
                "A",
                "A/r",
                "A/r/r''",
                "A/r/r''/r'''",
                "A/r/r''/r'''/r",
                "A/r/r''/r'''/r/r''",
                "A/r/r''/r'''/r'",
                "A/r'",
            ]
        );
        // Every table is mapped by exactly two nodes.
        for t in 0..4 {
            assert_eq!(s.nodes().iter().filter(|n| n.table == t).count(), 2);
        }
        assert_eq!(s.arcs().len(), 7);
        assert_eq!(s.topological_order()[0], 0);
    }

    #[test]
    fn single_table_schedule() {
        let schema = Schema::new(vec![labeled(table("T", &[]))], "T").unwrap();
        let s = build_schedule(&schema, 3);
        assert_eq!(s.nodes().len(), 1);
        assert!(s.arcs().is_empty());
        assert_eq!(s.topological_order(), &[0]);
    }

    #[test]
    fn self_loop_unrolls_to_chain() {
        let schema = Schema::new(vec![labeled(table("t", &[("r", "t")]))], "t").unwrap();
        let s = build_schedule(&schema, 3);
        // Hand enumeration: t, t/r, t/r/r; a fourth t would exceed the cover.
        assert_eq!(ids(&s), vec!["t", "t/r", "t/r/r"]);
        assert!(s.nodes().iter().all(|n| n.table == 0));
        assert_eq!(s.arcs().len(), 2);
    }

    #[test]
    fn shared_target_acyclic_schema_has_multi_parent_node() {
        let schema = Schema::new(
            vec![
                labeled(table("A", &[("x", "B"), ("z", "C")])),
                table("B", &[("u", "D")]),
                table("C", &[("w", "D")]),
                table("D", &[]),
                table("E", &[]),
            ],
            "A",
        )
        .unwrap();
        let s = build_schedule(&schema, 3);
        assert_eq!(s.nodes().len(), 4);
        assert_eq!(s.arcs().len(), 4);
        let d = s.nodes().iter().position(|n| n.table == 3).unwrap();
        assert_eq!(s.node(d).parents.len(), 2);
        assert_eq!(s.unreachable_tables(), &["E".to_string()]);
        let order = s.topological_order();
        let pos = |n: usize| order.iter().position(|&o| o == n).unwrap();
        for a in s.arcs() {
            assert!(pos(a.parent) < pos(a.child));
        }
    }

    #[test]
    fn multiple_relations_between_same_tables() {
        let schema = Schema::new(
            vec![
                labeled(table("A", &[("x", "B"), ("z", "B")])),
                table("B", &[]),
            ],
            "A",
        )
        .unwrap();
        let s = build_schedule(&schema, 3);
        // Acyclic: one node per table, two distinct arcs.
        assert_eq!(s.nodes().len(), 2);
        assert_eq!(s.arcs().len(), 2);
        assert_ne!(s.arc(0).relation, s.arc(1).relation);
    }

    #[test]
    fn relation_rows_through_arcs() {
        let inst = example_instance();
        let s = build_schedule(inst.schema(), 2);
        assert_eq!(
            instance_relation_rows(&s, 0, &inst, "a_1").unwrap(),
            vec!["b_0", "b_1"]
        );
        let via_rp = s.node(s.node_index("A/r'").unwrap()).parents[0];
        assert!(instance_relation_rows(&s, via_rp, &inst, "a_0")
            .unwrap()
            .is_empty());
        // The unrolled second A→B arc reads the same relation.
        let deep = s.node(s.node_index("A/r/r''/r'''/r").unwrap()).parents[0];
        assert_eq!(
            instance_relation_rows(&s, deep, &inst, "a_1").unwrap(),
            instance_relation_rows(&s, 0, &inst, "a_1").unwrap()
        );
    }

    #[test]
    fn render_lists_every_node() {
        let schema = cycle_schema();
        let s = build_schedule(&schema, 2);
        let text = s.render(&schema);
        assert_eq!(text.lines().count(), 8);
        assert!(text.lines().nth(1).unwrap().contains("A/r : B (via r)"));
    }

    fn arb_schema() -> impl Strategy<Value = Schema> {
        (1usize..5)
            .prop_flat_map(|n| {
                (
                    Just(n),
                    proptest::collection::vec(proptest::collection::vec(0..n, 0..3), n),
                )
            })
            .prop_map(|(n, rels)| {
                let tables: Vec<TableDef> = (0..n)
                    .map(|t| {
                        let rel_names: Vec<(String, String)> = rels[t]
                            .iter()
                            .enumerate()
                            .map(|(i, &target)| (format!("r{t}_{i}"), format!("T{target}")))
                            .collect();
                        let refs: Vec<(&str, &str)> = rel_names
                            .iter()
                            .map(|(a, b)| (a.as_str(), b.as_str()))
                            .collect();
                        let def = table(&format!("T{t}"), &refs);
                        if t == 0 {
                            labeled(def)
                        } else {
                            def
                        }
                    })
                    .collect();
                Schema::new(tables, "T0").unwrap()
            })
    }

    fn root_paths(s: &Schedule, node: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        path.push(s.node(node).table);
        out.push(path.clone());
        for &a in &s.node(node).children {
            root_paths(s, s.arc(a).child, path, out);
        }
        path.pop();
    }

    proptest! {
        #[test]
        fn schedules_are_acyclic_rooted_and_bounded(schema in arb_schema(), cover in 1usize..4) {
            let s = build_schedule(&schema, cover);
            // Kahn's order covers every node only when there is no cycle.
            prop_assert_eq!(s.topological_order().len(), s.nodes().len());
            prop_assert_eq!(s.node(0).table, schema.root_index());
            for a in s.arcs() {
                let parent_table = s.node(a.parent).table;
                prop_assert_eq!(schema.rel_target(parent_table, a.relation), s.node(a.child).table);
            }
            for (n, node) in s.nodes().iter().enumerate() {
                prop_assert!(n == 0 || !node.parents.is_empty());
            }
            let mut paths = Vec::new();
            root_paths(&s, 0, &mut Vec::new(), &mut paths);
            for p in &paths {
                for t in 0..schema.tables().len() {
                    prop_assert!(p.iter().filter(|&&x| x == t).count() <= cover);
                }
            }
            prop_assert_eq!(&s, &build_schedule(&schema, cover));
        }

        #[test]
        fn acyclic_schemas_map_tables_one_to_one(schema in arb_schema()) {
            prop_assume!(!has_circuit(&schema, schema.root_index()));
            let s = build_schedule(&schema, 3);
            let reachable = reachable_tables(&schema, schema.root_index());
            let n_reach = reachable.iter().filter(|&&b| b).count();
            prop_assert_eq!(s.nodes().len(), n_reach);
            let n_rel: usize = (0..schema.tables().len())
                .filter(|&t| reachable[t])
                .map(|t| schema.table(t).rels.len())
                .sum();
            prop_assert_eq!(s.arcs().len(), n_rel);
        }
    }
}
