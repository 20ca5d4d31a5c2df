//! Model documents and training logs.

use std::fs;
use std::io::Write;
use std::path::Path;

use relgbdt_core::{IterationLog, StrongModel};
use serde::{Deserialize, Serialize};

use crate::files::FileError;

pub const MODEL_FORMAT: &str = "relgbdt-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: StrongModel,
}

pub fn model_to_json(model: &StrongModel) -> String {
    let doc = ModelDocument {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    let mut s = serde_json::to_string(&doc).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str, path: &Path) -> Result<StrongModel, FileError> {
    let json_err = |line, column, message| FileError::Json {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| json_err(e.line(), e.column(), e.to_string()))?;
    if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
        return Err(json_err(
            0,
            0,
            format!(
                "unsupported model format {:?} version {}",
                doc.format, doc.version
            ),
        ));
    }
    Ok(doc.model)
}

pub fn save_model(model: &StrongModel, path: &Path) -> Result<(), FileError> {
    fs::write(path, model_to_json(model)).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<StrongModel, FileError> {
    let text = fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_json(&text, path)
}

/// `iter,train_loss[,valid_metric]`, one line per iteration.
pub fn write_log(log: &[IterationLog], out: &mut impl Write) -> std::io::Result<()> {
    let with_valid = log.iter().any(|l| l.valid_metric.is_some());
    if with_valid {
        writeln!(out, "iter,train_loss,valid_metric")?;
    } else {
        writeln!(out, "iter,train_loss")?;
    }
    for l in log {
        match l.valid_metric {
            Some(v) if with_valid => writeln!(out, "{},{},{}", l.iteration, l.train_loss, v)?,
            _ => writeln!(out, "{},{}", l.iteration, l.train_loss)?,
        }
    }
    Ok(())
}
