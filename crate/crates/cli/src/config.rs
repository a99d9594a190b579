//! Flat TOML config file. Every key mirrors a command-line flag (dashes
//! become underscores); flags given on the command line win.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;
use crate::Format;

/// A scalar, or a list of them for sweep axes.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<OneOrMany<u32>>,
    pub t: Option<OneOrMany<u32>>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub log_base: Option<f64>,
    pub adversary: Option<OneOrMany<String>>,
    pub inputs: Option<String>,
    pub trials: Option<u32>,
    pub seed: Option<u64>,
    pub las_vegas: Option<bool>,
    pub max_phases: Option<u32>,
    pub record_trace: Option<bool>,
    pub trace_out: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub strict: Option<bool>,
    pub serial: Option<bool>,
    // coin-test and verify
    pub f: Option<u32>,
    pub shift: Option<String>,
    pub max_g: Option<u32>,
    // curves
    pub x_max: Option<f64>,
    pub points: Option<u32>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The single `n` for commands that take one.
    pub fn single_n(&self) -> Result<Option<u32>, CliError> {
        single("n", self.n.clone())
    }

    pub fn single_t(&self) -> Result<Option<u32>, CliError> {
        single("t", self.t.clone())
    }

    pub fn single_adversary(&self) -> Result<Option<String>, CliError> {
        single("adversary", self.adversary.clone())
    }
}

fn single<T: Clone>(key: &str, v: Option<OneOrMany<T>>) -> Result<Option<T>, CliError> {
    match v.map(OneOrMany::into_vec) {
        None => Ok(None),
        Some(mut v) if v.len() == 1 => Ok(v.pop()),
        Some(v) => Err(CliError::Config(format!(
            "`{key}` has {} values; only `sweep` accepts lists",
            v.len()
        ))),
    }
}
