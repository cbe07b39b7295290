#![allow(dead_code)]

use std::path::PathBuf;

use cgl_backstepping::ExperimentConfig;

pub fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_dir().join(name)).unwrap()
}
