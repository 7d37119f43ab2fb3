mod commands;
mod config;
mod manifest;

pub use commands::*;
pub use config::{MapSource, MediumSection, OpticsSection, RunConfig, SeparationSection, TIME_SAMPLES_WARNING};
pub use manifest::{sha256_hex, Artifact, RunManifest, MANIFEST_FILE};
