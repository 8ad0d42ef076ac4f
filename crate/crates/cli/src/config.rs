//! Flat `key = value` configuration files and their merge with command-line
//! flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

/// Every key accepted in a configuration file. Keys irrelevant to the
/// invoked command are ignored; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub horizon: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub steps: Option<usize>,
    pub nt: Option<usize>,
    pub nx: Option<usize>,
    pub x_max: Option<f64>,
    pub t_min: Option<f64>,
    pub n: Option<f64>,
    pub alpha_bar: Option<f64>,
    pub probes: Option<String>,
    pub threshold: Option<f64>,
    pub ell_min: Option<f64>,
    pub ell_max: Option<f64>,
    pub ratio: Option<f64>,
    pub s_factor: Option<f64>,
    pub tolerance_scale: Option<f64>,
    pub noise_scale: Option<f64>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    /// Parse a configuration file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Parse configuration text.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }
}

/// First of flag, file value and default.
pub fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

/// First of flag and file value, if any.
pub fn pick_opt<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}
