//! Relational dataset schemata and instances.
//!
//! A [`Schema`] lists tables with propositional attributes (numerical or
//! categorical scalars) and relational attributes (sets of row references
//! into a fixed target table). Exactly one table, the root, carries a label.
//! A [`DatasetInstance`] holds the rows of every table. Rows are identified
//! by an explicit string id; relation values are stored as sorted sets of row
//! indices into the target table.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Characters that cannot appear in table or attribute names. They are used as
/// separators in node ids, feature column names and relation cells.
/// Characters that may not appear in table or relation names, which are
/// joined into paths and relation cells.
const RESERVED_NAME_CHARS: &[char] = &['/', ':', ';', ',', '=', '"', '\n', '\r'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrKind {
    Numerical,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Binary,
    Multiclass,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropDef {
    pub name: String,
    pub kind: AttrKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelDef {
    pub name: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDef {
    pub name: String,
    pub task: TaskKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    #[serde(default)]
    pub props: Vec<PropDef>,
    #[serde(default)]
    pub rels: Vec<RelDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<LabelDef>,
}

impl TableDef {
    pub fn prop_index(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|p| p.name == name)
    }

    pub fn rel_index(&self, name: &str) -> Option<usize> {
        self.rels.iter().position(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("schema declares no tables")]
    NoTables,
    #[error("invalid name {0:?}: names must be non-empty and avoid / : ; , = \" and newlines")]
    InvalidName(String),
    #[error("duplicate table {0:?}")]
    DuplicateTable(String),
    #[error("duplicate attribute {name:?} in table {table:?}")]
    DuplicateAttribute { table: String, name: String },
    #[error("relation {relation:?} of table {table:?} targets unknown table {target:?}")]
    UnknownTarget {
        table: String,
        relation: String,
        target: String,
    },
    #[error("root table {0:?} is not declared")]
    UnknownRoot(String),
    #[error("root table {0:?} declares no label")]
    MissingLabel(String),
    #[error("table {0:?} declares a label but is not the root table")]
    LabelOnNonRoot(String),
}

/// Serialized layout of a schema document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDoc {
    tables: Vec<TableDef>,
    root: String,
}

/// Validated dataset schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaDoc", into = "SchemaDoc")]
pub struct Schema {
    tables: Vec<TableDef>,
    root: usize,
    // rel_targets[t][r] is the table index targeted by relation r of table t.
    rel_targets: Vec<Vec<usize>>,
}

impl TryFrom<SchemaDoc> for Schema {
    type Error = SchemaError;

    fn try_from(doc: SchemaDoc) -> Result<Self, Self::Error> {
        Schema::new(doc.tables, &doc.root)
    }
}

impl From<Schema> for SchemaDoc {
    fn from(schema: Schema) -> Self {
        let root = schema.tables[schema.root].name.clone();
        SchemaDoc {
            tables: schema.tables,
            root,
        }
    }
}

fn check_name(name: &str) -> Result<(), SchemaError> {
    if name.is_empty() || name.contains(RESERVED_NAME_CHARS) || name.trim() != name {
        return Err(SchemaError::InvalidName(name.to_string()));
    }
    Ok(())
}

/// Attribute names only need to survive a CSV header; derived feature names
/// such as `r/p:mean` are legal.
fn check_attribute_name(name: &str) -> Result<(), SchemaError> {
    if name.is_empty() || name.contains(['\n', '\r']) {
        return Err(SchemaError::InvalidName(name.to_string()));
    }
    Ok(())
}

impl Schema {
    pub fn new(tables: Vec<TableDef>, root: &str) -> Result<Self, SchemaError> {
        if tables.is_empty() {
            return Err(SchemaError::NoTables);
        }
        for (i, t) in tables.iter().enumerate() {
            check_name(&t.name)?;
            if tables[..i].iter().any(|o| o.name == t.name) {
                return Err(SchemaError::DuplicateTable(t.name.clone()));
            }
            let mut names: Vec<&str> = Vec::new();
            for r in &t.rels {
                check_name(&r.name)?;
            }
            let attr_names = t
                .props
                .iter()
                .map(|p| p.name.as_str())
                .chain(t.rels.iter().map(|r| r.name.as_str()))
                .chain(t.label.iter().map(|l| l.name.as_str()));
            for name in attr_names {
                check_attribute_name(name)?;
                if name == "id" || names.contains(&name) {
                    return Err(SchemaError::DuplicateAttribute {
                        table: t.name.clone(),
                        name: name.to_string(),
                    });
                }
                names.push(name);
            }
        }
        let root = tables
            .iter()
            .position(|t| t.name == root)
            .ok_or_else(|| SchemaError::UnknownRoot(root.to_string()))?;
        for (i, t) in tables.iter().enumerate() {
            if i != root && t.label.is_some() {
                return Err(SchemaError::LabelOnNonRoot(t.name.clone()));
            }
        }
        if tables[root].label.is_none() {
            return Err(SchemaError::MissingLabel(tables[root].name.clone()));
        }
        let mut rel_targets = Vec::with_capacity(tables.len());
        for t in &tables {
            let mut targets = Vec::with_capacity(t.rels.len());
            for r in &t.rels {
                let target = tables
                    .iter()
                    .position(|o| o.name == r.target)
                    .ok_or_else(|| SchemaError::UnknownTarget {
                        table: t.name.clone(),
                        relation: r.name.clone(),
                        target: r.target.clone(),
                    })?;
                targets.push(target);
            }
            rel_targets.push(targets);
        }
        Ok(Schema {
            tables,
            root,
            rel_targets,
        })
    }

    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    pub fn table(&self, index: usize) -> &TableDef {
        &self.tables[index]
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name == name)
    }

    pub fn root_index(&self) -> usize {
        self.root
    }

    pub fn root(&self) -> &TableDef {
        &self.tables[self.root]
    }

    pub fn label(&self) -> &LabelDef {
        self.tables[self.root]
            .label
            .as_ref()
            .expect("validated schema has a root label")
    }

    /// Table index targeted by relation `rel` of table `table`.
    pub fn rel_target(&self, table: usize, rel: usize) -> usize {
        self.rel_targets[table][rel]
    }

    pub fn relation_count(&self) -> usize {
        self.rel_targets.iter().map(Vec::len).sum()
    }

    /// Hex SHA-256 of a canonical rendering of the schema.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("root={:?}\n", self.root().name).as_bytes());
        for t in &self.tables {
            hasher.update(format!("table={:?}\n", t.name).as_bytes());
            for p in &t.props {
                hasher.update(format!("prop={:?}:{:?}\n", p.name, p.kind).as_bytes());
            }
            for r in &t.rels {
                hasher.update(format!("rel={:?}:{:?}\n", r.name, r.target).as_bytes());
            }
            if let Some(l) = &t.label {
                hasher.update(format!("label={:?}:{:?}\n", l.name, l.task).as_bytes());
            }
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest.iter() {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// One column of propositional values. `None` is an explicit missing value.
#[derive(Debug, Clone, PartialEq)]
pub enum PropColumn {
    Numerical(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl PropColumn {
    fn empty(kind: AttrKind) -> Self {
        match kind {
            AttrKind::Numerical => PropColumn::Numerical(Vec::new()),
            AttrKind::Categorical => PropColumn::Categorical(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PropColumn::Numerical(v) => v.len(),
            PropColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, row: usize) -> Option<PropValue> {
        match self {
            PropColumn::Numerical(v) => v[row].map(PropValue::Num),
            PropColumn::Categorical(v) => v[row].clone().map(PropValue::Cat),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropValue {
    Num(f64),
    Cat(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LabelValue {
    Real(f64),
    Class(String),
}

impl fmt::Display for LabelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelValue::Real(v) => write!(f, "{v}"),
            LabelValue::Class(c) => f.write_str(c),
        }
    }
}

/// One problem found while loading or validating an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub table: String,
    pub row: Option<String>,
    pub attribute: Option<String>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.table)?;
        if let Some(row) = &self.row {
            write!(f, "[{row}]")?;
        }
        if let Some(attr) = &self.attribute {
            write!(f, ".{attr}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct TableData {
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    props: Vec<PropColumn>,
    // rels[r][row] is a sorted, duplicate-free list of target row indices.
    rels: Vec<Vec<Vec<usize>>>,
    labels: Option<Vec<Option<LabelValue>>>,
}

/// Rows of every table of a schema. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetInstance {
    schema: Schema,
    tables: Vec<TableData>,
    issues: Vec<(Severity, Issue)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("unknown relation {relation:?} in table {table:?}")]
    UnknownRelation { table: String, relation: String },
    #[error("unknown row {row:?} in table {table:?}")]
    UnknownRow { table: String, row: String },
}

impl DatasetInstance {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn table_len(&self, table: usize) -> usize {
        self.tables[table].ids.len()
    }

    pub fn root_len(&self) -> usize {
        self.table_len(self.schema.root_index())
    }

    pub fn row_id(&self, table: usize, row: usize) -> &str {
        &self.tables[table].ids[row]
    }

    pub fn row_ids(&self, table: usize) -> &[String] {
        &self.tables[table].ids
    }

    pub fn row_index(&self, table: usize, id: &str) -> Option<usize> {
        self.tables[table].index.get(id).copied()
    }

    pub fn prop_column(&self, table: usize, prop: usize) -> &PropColumn {
        &self.tables[table].props[prop]
    }

    /// Sorted target row indices of relation `rel` for `row` of `table`.
    pub fn relation(&self, table: usize, rel: usize, row: usize) -> &[usize] {
        &self.tables[table].rels[rel][row]
    }

    /// Root-table labels, one per root row.
    pub fn labels(&self) -> &[Option<LabelValue>] {
        self.tables[self.schema.root_index()]
            .labels
            .as_deref()
            .expect("root table stores labels")
    }

    /// Row ids of `rel[row]` in target-table row order.
    pub fn relation_rows(
        &self,
        table: &str,
        relation: &str,
        row: &str,
    ) -> Result<Vec<&str>, InstanceError> {
        let t = self
            .schema
            .table_index(table)
            .ok_or_else(|| InstanceError::UnknownTable(table.to_string()))?;
        let r = self.schema.table(t).rel_index(relation).ok_or_else(|| {
            InstanceError::UnknownRelation {
                table: table.to_string(),
                relation: relation.to_string(),
            }
        })?;
        let x = self
            .row_index(t, row)
            .ok_or_else(|| InstanceError::UnknownRow {
                table: table.to_string(),
                row: row.to_string(),
            })?;
        let target = self.schema.rel_target(t, r);
        Ok(self
            .relation(t, r, x)
            .iter()
            .map(|&i| self.row_id(target, i))
            .collect())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|(s, _)| *s == Severity::Warning)
            .map(|(_, i)| i)
    }

    /// Renders one table as string records with the same cell conventions the
    /// loader accepts.
    pub fn to_records(&self, table: usize) -> TableRecords {
        let def = self.schema.table(table);
        let data = &self.tables[table];
        let mut header = Vec::with_capacity(1 + def.props.len() + def.rels.len() + 1);
        header.push("id".to_string());
        header.extend(def.props.iter().map(|p| p.name.clone()));
        header.extend(def.rels.iter().map(|r| r.name.clone()));
        if let Some(l) = &def.label {
            header.push(l.name.clone());
        }
        let mut rows = Vec::with_capacity(data.ids.len());
        for (x, id) in data.ids.iter().enumerate() {
            let mut row = Vec::with_capacity(header.len());
            row.push(id.clone());
            for col in &data.props {
                row.push(match col {
                    PropColumn::Numerical(v) => v[x].map(|f| format!("{f}")).unwrap_or_default(),
                    PropColumn::Categorical(v) => v[x].clone().unwrap_or_default(),
                });
            }
            for (r, rel) in data.rels.iter().enumerate() {
                let target = self.schema.rel_target(table, r);
                let ids: Vec<&str> = rel[x].iter().map(|&i| self.row_id(target, i)).collect();
                row.push(ids.join(";"));
            }
            if let Some(labels) = &data.labels {
                row.push(
                    labels[x]
                        .as_ref()
                        .map(|l| l.to_string())
                        .unwrap_or_default(),
                );
            }
            rows.push(row);
        }
        TableRecords { header, rows }
    }
}

/// A table as raw string cells: a header row and data rows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableRecords {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// One typed row for [`InstanceBuilder`]. Props and rels follow schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRecord {
    pub id: String,
    pub props: Vec<Option<PropValue>>,
    pub rels: Vec<Vec<String>>,
    pub label: Option<LabelValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error("no records for table {0:?}")]
    MissingTable(String),
    #[error("records given for unknown table {0:?}")]
    UnknownTable(String),
    #[error("table {table:?}: first column must be \"id\"")]
    MissingIdColumn { table: String },
    #[error("table {table:?}: unknown column {column:?}")]
    UnknownColumn { table: String, column: String },
    #[error("table {table:?}: duplicate column {column:?}")]
    DuplicateColumn { table: String, column: String },
    #[error("table {table:?}: missing column {column:?}")]
    MissingColumn { table: String, column: String },
    #[error("table {table:?}: label column {column:?} is absent")]
    MissingLabelColumn { table: String, column: String },
    #[error("table {table:?}, line {line}: expected {expected} cells, found {found}")]
    RowLength {
        table: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("table {table:?}, row {row:?}: malformed row id list {cell:?} in {column:?}")]
    MalformedRowIds {
        table: String,
        row: String,
        column: String,
        cell: String,
    },
    #[error("table {table:?}: row {row} has the wrong arity")]
    RowArity { table: String, row: String },
}

struct PendingTable {
    ids: Vec<String>,
    props: Vec<PropColumn>,
    rels: Vec<Vec<Vec<String>>>,
    labels: Option<Vec<Option<LabelValue>>>,
}

/// Typed construction of a [`DatasetInstance`]. Row references are resolved
/// in [`InstanceBuilder::finish`], so tables may be filled in any order.
pub struct InstanceBuilder {
    schema: Schema,
    tables: Vec<PendingTable>,
    issues: Vec<(Severity, Issue)>,
}

impl InstanceBuilder {
    pub fn new(schema: &Schema) -> Self {
        let tables = schema
            .tables()
            .iter()
            .map(|t| PendingTable {
                ids: Vec::new(),
                props: t.props.iter().map(|p| PropColumn::empty(p.kind)).collect(),
                rels: t.rels.iter().map(|_| Vec::new()).collect(),
                labels: t.label.as_ref().map(|_| Vec::new()),
            })
            .collect();
        InstanceBuilder {
            schema: schema.clone(),
            tables,
            issues: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Appends a row. Prop values whose kind does not match the schema are
    /// stored as missing with a warning.
    pub fn push_row(&mut self, table: usize, row: RowRecord) -> Result<(), LoadError> {
        let def = self.schema.table(table);
        if row.props.len() != def.props.len() || row.rels.len() != def.rels.len() {
            return Err(LoadError::RowArity {
                table: def.name.clone(),
                row: row.id,
            });
        }
        let pending = &mut self.tables[table];
        for (p, value) in row.props.into_iter().enumerate() {
            match (&mut pending.props[p], value) {
                (PropColumn::Numerical(col), Some(PropValue::Num(v))) if v.is_finite() => {
                    col.push(Some(v))
                }
                (PropColumn::Categorical(col), Some(PropValue::Cat(c))) => col.push(Some(c)),
                (col, value) => {
                    if value.is_some() {
                        self.issues.push((
                            Severity::Warning,
                            Issue {
                                table: def.name.clone(),
                                row: Some(row.id.clone()),
                                attribute: Some(def.props[p].name.clone()),
                                message: "value of the wrong kind stored as missing".to_string(),
                            },
                        ));
                    }
                    match col {
                        PropColumn::Numerical(c) => c.push(None),
                        PropColumn::Categorical(c) => c.push(None),
                    }
                }
            }
        }
        for (r, refs) in row.rels.into_iter().enumerate() {
            pending.rels[r].push(refs);
        }
        if let Some(labels) = &mut pending.labels {
            labels.push(row.label);
        }
        pending.ids.push(row.id);
        Ok(())
    }

    pub fn finish(self) -> DatasetInstance {
        let InstanceBuilder {
            schema,
            tables,
            mut issues,
        } = self;
        // Index ids first; relations are resolved against every table.
        let mut indices: Vec<BTreeMap<String, usize>> = Vec::with_capacity(tables.len());
        for (t, pending) in tables.iter().enumerate() {
            let mut index = BTreeMap::new();
            for (x, id) in pending.ids.iter().enumerate() {
                if index.contains_key(id) {
                    issues.push((
                        Severity::Error,
                        Issue {
                            table: schema.table(t).name.clone(),
                            row: Some(id.clone()),
                            attribute: None,
                            message: "duplicated row id".to_string(),
                        },
                    ));
                } else {
                    index.insert(id.clone(), x);
                }
            }
            indices.push(index);
        }
        let mut out = Vec::with_capacity(tables.len());
        for (t, pending) in tables.into_iter().enumerate() {
            let def = schema.table(t);
            let mut rels = Vec::with_capacity(pending.rels.len());
            for (r, cells) in pending.rels.into_iter().enumerate() {
                let target = schema.rel_target(t, r);
                let mut resolved = Vec::with_capacity(cells.len());
                for (x, refs) in cells.into_iter().enumerate() {
                    let mut set: Vec<usize> = Vec::with_capacity(refs.len());
                    for id in &refs {
                        match indices[target].get(id) {
                            Some(&i) => set.push(i),
                            None => issues.push((
                                Severity::Error,
                                Issue {
                                    table: def.name.clone(),
                                    row: Some(pending.ids[x].clone()),
                                    attribute: Some(def.rels[r].name.clone()),
                                    message: format!(
                                        "dangling reference {id:?} into table {:?}",
                                        schema.table(target).name
                                    ),
                                },
                            )),
                        }
                    }
                    set.sort_unstable();
                    let before = set.len();
                    set.dedup();
                    if set.len() != before {
                        issues.push((
                            Severity::Warning,
                            Issue {
                                table: def.name.clone(),
                                row: Some(pending.ids[x].clone()),
                                attribute: Some(def.rels[r].name.clone()),
                                message: "duplicate row ids collapsed into a set".to_string(),
                            },
                        ));
                    }
                    resolved.push(set);
                }
                rels.push(resolved);
            }
            out.push(TableData {
                ids: pending.ids,
                index: BTreeMap::new(),
                props: pending.props,
                rels,
                labels: pending.labels,
            });
        }
        for (table, index) in out.iter_mut().zip(indices) {
            table.index = index;
        }
        DatasetInstance {
            schema,
            tables: out,
            issues,
        }
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses per-table string records into an instance.
///
/// Numerical cells that fail to parse become missing values (with a
/// warning). Relation cells are `;`-separated row id lists; an empty cell is
/// the empty set. Reference problems do not fail the load: they are kept for
/// [`validate_instance`].
pub fn load_instance(
    schema: &Schema,
    sources: &BTreeMap<String, TableRecords>,
) -> Result<DatasetInstance, LoadError> {
    for name in sources.keys() {
        if schema.table_index(name).is_none() {
            return Err(LoadError::UnknownTable(name.clone()));
        }
    }
    let mut builder = InstanceBuilder::new(schema);
    for (t, def) in schema.tables().iter().enumerate() {
        let records = sources
            .get(&def.name)
            .ok_or_else(|| LoadError::MissingTable(def.name.clone()))?;
        if records.header.first().map(|h| h.trim()) != Some("id") {
            return Err(LoadError::MissingIdColumn {
                table: def.name.clone(),
            });
        }
        enum Slot {
            Prop(usize),
            Rel(usize),
            Label,
        }
        let mut slots = Vec::with_capacity(records.header.len() - 1);
        for (c, column) in records.header.iter().enumerate().skip(1) {
            let column = column.trim();
            if records.header[1..c].iter().any(|h| h.trim() == column) {
                return Err(LoadError::DuplicateColumn {
                    table: def.name.clone(),
                    column: column.to_string(),
                });
            }
            let slot = if let Some(p) = def.prop_index(column) {
                Slot::Prop(p)
            } else if let Some(r) = def.rel_index(column) {
                Slot::Rel(r)
            } else if def.label.as_ref().is_some_and(|l| l.name == column) {
                Slot::Label
            } else {
                return Err(LoadError::UnknownColumn {
                    table: def.name.clone(),
                    column: column.to_string(),
                });
            };
            slots.push(slot);
        }
        let has = |name: &str| records.header.iter().skip(1).any(|h| h.trim() == name);
        for name in def
            .props
            .iter()
            .map(|p| &p.name)
            .chain(def.rels.iter().map(|r| &r.name))
        {
            if !has(name) {
                return Err(LoadError::MissingColumn {
                    table: def.name.clone(),
                    column: name.clone(),
                });
            }
        }
        if let Some(label) = &def.label {
            if !has(&label.name) {
                return Err(LoadError::MissingLabelColumn {
                    table: def.name.clone(),
                    column: label.name.clone(),
                });
            }
        }

        for (line, cells) in records.rows.iter().enumerate() {
            if cells.len() != records.header.len() {
                return Err(LoadError::RowLength {
                    table: def.name.clone(),
                    line: line + 2,
                    expected: records.header.len(),
                    found: cells.len(),
                });
            }
            let id = cells[0].trim().to_string();
            let mut row = RowRecord {
                id: id.clone(),
                props: alloc::vec![None; def.props.len()],
                rels: alloc::vec![Vec::new(); def.rels.len()],
                label: None,
            };
            for (slot, cell) in slots.iter().zip(&cells[1..]) {
                match *slot {
                    Slot::Prop(p) => {
                        let trimmed = cell.trim();
                        if trimmed.is_empty() {
                            continue;
                        }
                        row.props[p] = match def.props[p].kind {
                            AttrKind::Numerical => match parse_number(trimmed) {
                                Some(v) => Some(PropValue::Num(v)),
                                None => {
                                    builder.issues.push((
                                        Severity::Warning,
                                        Issue {
                                            table: def.name.clone(),
                                            row: Some(id.clone()),
                                            attribute: Some(def.props[p].name.clone()),
                                            message: format!(
                                                "unparseable number {trimmed:?} stored as missing"
                                            ),
                                        },
                                    ));
                                    None
                                }
                            },
                            AttrKind::Categorical => Some(PropValue::Cat(trimmed.to_string())),
                        };
                    }
                    Slot::Rel(r) => {
                        let trimmed = cell.trim();
                        if trimmed.is_empty() {
                            continue;
                        }
                        for part in trimmed.split(';') {
                            let part = part.trim();
                            if part.is_empty() {
                                return Err(LoadError::MalformedRowIds {
                                    table: def.name.clone(),
                                    row: id,
                                    column: def.rels[r].name.clone(),
                                    cell: cell.clone(),
                                });
                            }
                            row.rels[r].push(part.to_string());
                        }
                    }
                    Slot::Label => {
                        let task = def.label.as_ref().map(|l| l.task);
                        row.label = parse_label(cell.trim(), task.expect("label slot"));
                        if row.label.is_none() && !cell.trim().is_empty() {
                            builder.issues.push((
                                Severity::Error,
                                Issue {
                                    table: def.name.clone(),
                                    row: Some(id.clone()),
                                    attribute: def.label.as_ref().map(|l| l.name.clone()),
                                    message: format!("invalid label {:?}", cell.trim()),
                                },
                            ));
                        }
                    }
                }
            }
            builder.push_row(t, row)?;
        }
    }
    Ok(builder.finish())
}

fn parse_label(cell: &str, task: TaskKind) -> Option<LabelValue> {
    if cell.is_empty() {
        return None;
    }
    match task {
        TaskKind::Binary => match parse_number(cell) {
            Some(v) if v == 0.0 || v == 1.0 => Some(LabelValue::Real(v)),
            _ => match cell {
                "true" => Some(LabelValue::Real(1.0)),
                "false" => Some(LabelValue::Real(0.0)),
                _ => None,
            },
        },
        TaskKind::Regression => parse_number(cell).map(LabelValue::Real),
        TaskKind::Multiclass => Some(LabelValue::Class(cell.to_string())),
    }
}

/// Reports dangling references, duplicated ids, invalid or missing root
/// labels, and instances built against a different schema.
pub fn validate_instance(schema: &Schema, instance: &DatasetInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    if instance.schema != *schema {
        report.errors.push(Issue {
            table: schema.root().name.clone(),
            row: None,
            attribute: None,
            message: "instance was built against a different schema".to_string(),
        });
        return report;
    }
    for (severity, issue) in &instance.issues {
        match severity {
            Severity::Error => report.errors.push(issue.clone()),
            Severity::Warning => report.warnings.push(issue.clone()),
        }
    }
    let root = schema.root_index();
    let label = schema.label();
    let task = label.task;
    for (x, value) in instance.labels().iter().enumerate() {
        let valid = match (task, value) {
            (_, None) => false,
            (TaskKind::Binary, Some(LabelValue::Real(v))) => *v == 0.0 || *v == 1.0,
            (TaskKind::Regression, Some(LabelValue::Real(v))) => v.is_finite(),
            (TaskKind::Multiclass, Some(LabelValue::Class(_))) => true,
            _ => false,
        };
        if value.is_none() {
            report.errors.push(Issue {
                table: schema.root().name.clone(),
                row: Some(instance.row_id(root, x).to_string()),
                attribute: Some(label.name.clone()),
                message: "missing label".to_string(),
            });
        } else if !valid {
            report.errors.push(Issue {
                table: schema.root().name.clone(),
                row: Some(instance.row_id(root, x).to_string()),
                attribute: Some(label.name.clone()),
                message: "label does not match the task kind".to_string(),
            });
        }
    }
    report
}
