//! On-disk dataset layout: a `schema.json` document plus one `<table>.csv`
//! per table. The first CSV column is `id`; relation cells hold `;`-separated
//! row ids; an empty cell is a missing value or an empty relation.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use relgbdt_core::data::{LoadError, SchemaError};
use relgbdt_core::{load_instance, validate_instance, DatasetInstance, Schema, TableRecords};

pub const SCHEMA_FILE: &str = "schema.json";

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {message}", path.display())]
    InvalidSchema { path: PathBuf, message: String },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("invalid instance:\n{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FileError + '_ {
    move |source| FileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a schema document. Syntax and shape errors carry their position;
/// a well-formed document describing an invalid schema does not.
pub fn parse_schema(text: &str, path: &Path) -> Result<Schema, FileError> {
    serde_json::from_str(text).map_err(|e| {
        if e.line() == 0 {
            FileError::InvalidSchema {
                path: path.to_path_buf(),
                message: e.to_string(),
            }
        } else {
            FileError::Json {
                path: path.to_path_buf(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            }
        }
    })
}

pub fn read_schema(path: &Path) -> Result<Schema, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_schema(&text, path)
}

pub fn schema_to_json(schema: &Schema) -> String {
    let mut s = serde_json::to_string_pretty(schema).expect("schema serializes");
    s.push('\n');
    s
}

pub fn write_schema(schema: &Schema, path: &Path) -> Result<(), FileError> {
    fs::write(path, schema_to_json(schema)).map_err(io_err(path))
}

fn read_table(path: &Path) -> Result<TableRecords, FileError> {
    let csv_err = |source| FileError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?.iter().map(String::from).collect(),
        None => Vec::new(),
    };
    let mut rows = Vec::new();
    for r in records {
        rows.push(r.map_err(csv_err)?.iter().map(String::from).collect());
    }
    Ok(TableRecords { header, rows })
}

/// Reads every `<table>.csv` of `schema` from `dir`. Load warnings are kept
/// on the instance; error-level issues fail the read.
pub fn read_instance(schema: &Schema, dir: &Path) -> Result<DatasetInstance, FileError> {
    let mut sources = BTreeMap::new();
    for t in schema.tables() {
        let path = dir.join(format!("{}.csv", t.name));
        if path.exists() {
            sources.insert(t.name.clone(), read_table(&path)?);
        }
    }
    let instance = load_instance(schema, &sources)?;
    let report = validate_instance(schema, &instance);
    if !report.ok() {
        let lines: Vec<String> = report.errors.iter().map(|i| format!("  {i}")).collect();
        return Err(FileError::Invalid(lines.join("\n")));
    }
    Ok(instance)
}

/// Reads `dir/schema.json` then the table files next to it.
pub fn read_dataset(dir: &Path) -> Result<DatasetInstance, FileError> {
    let schema = read_schema(&dir.join(SCHEMA_FILE))?;
    read_instance(&schema, dir)
}

/// Writes `schema.json` and one CSV per table into `dir`, creating it.
pub fn write_dataset(instance: &DatasetInstance, dir: &Path) -> Result<(), FileError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let schema = instance.schema();
    write_schema(schema, &dir.join(SCHEMA_FILE))?;
    for (t, def) in schema.tables().iter().enumerate() {
        let path = dir.join(format!("{}.csv", def.name));
        let records = instance.to_records(t);
        let mut writer = csv::Writer::from_path(&path).map_err(|source| FileError::Csv {
            path: path.clone(),
            source,
        })?;
        let write = |w: &mut csv::Writer<fs::File>| -> csv::Result<()> {
            w.write_record(&records.header)?;
            for row in &records.rows {
                w.write_record(row)?;
            }
            w.flush()?;
            Ok(())
        };
        write(&mut writer).map_err(|source| FileError::Csv {
            path: path.clone(),
            source,
        })?;
    }
    Ok(())
}
