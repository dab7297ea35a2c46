//! Persistence and configuration: PNG image and patch round-trips,
//! COCO-format annotation ingestion, the bundled scene fixture, run
//! configuration with environment overrides, line-delimited results files
//! and run manifests.

mod coco;
mod config;
mod fixture;
mod png;
mod results;

pub use coco::{load_dataset, DatasetFormat, DatasetSource};
pub use config::{ApplyParams, CalibrateConfig, PathsConfig, RunConfig, ENV_PREFIX};
pub use fixture::{build_fixture, load_fixture, save_fixture, SceneFixture};
pub use png::{load_image, load_patch, save_image, save_patch, PatchSidecar};
pub use results::{
    config_hash, read_records, write_manifest, write_records, Manifest, MANIFEST_SCHEMA_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io failure on {path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("parse error in {path}: {message}")]
    ParseError { path: String, message: String },
    #[error("image decode error in {path}: {message}")]
    ImageError { path: String, message: String },
    #[error("unknown class names (no match in the adapter vocabulary): {0:?}")]
    UnknownClassName(Vec<String>),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Invalid(String),
}

impl IoError {
    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        IoError::File { path: path.display().to_string(), source }
    }

    pub(crate) fn parse(path: &std::path::Path, message: impl ToString) -> Self {
        IoError::ParseError { path: path.display().to_string(), message: message.to_string() }
    }
}
