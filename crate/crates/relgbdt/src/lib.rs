//! File formats, model persistence, cross-validation and the command line
//! for [`relgbdt_core`].

pub mod cli;
pub mod cv;
pub mod files;
pub mod model_file;

pub use files::{read_dataset, read_instance, read_schema, write_dataset, FileError};
pub use model_file::{load_model, model_from_json, model_to_json, save_model, write_log};
