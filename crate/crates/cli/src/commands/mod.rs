pub mod critical;
pub mod finite;
pub mod fixed_point;
pub mod noise;
pub mod scan;
pub mod validate;

use std::path::PathBuf;

use crate::config::{Config, ConfigError};

pub const DEFAULT_OUT: &str = "edgephase-out";

pub struct Ctx {
    pub cfg: Config,
    pub out: Option<PathBuf>,
    pub resume: bool,
    pub strict: bool,
}

impl Ctx {
    /// The output directory, created if missing.
    pub fn out_dir(&self) -> Result<PathBuf, Failure> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Bad config file, flag or existing output (exit 2).
    Config(String),
    /// A validation check failed (exit 1).
    Validation(String),
    /// A computation or I/O step failed (exit 1).
    Runtime(String),
    /// Some solver did not converge and `--strict` was given (exit 3).
    NotConverged(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) | Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Validation(m) => write!(f, "validation failed: {m}"),
            Failure::Runtime(m) => f.write_str(m),
            Failure::NotConverged(m) => write!(f, "not converged: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<edgephase::Error> for Failure {
    fn from(e: edgephase::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("I/O error: {e}"))
    }
}

/// Turns a count of unconverged items into the `--strict` outcome.
pub fn strict_check(strict: bool, unconverged: usize, what: &str) -> Result<(), Failure> {
    if unconverged > 0 {
        log::warn!("{unconverged} {what} did not converge; their diagnostics are provisional");
        if strict {
            return Err(Failure::NotConverged(format!("{unconverged} {what}")));
        }
    }
    Ok(())
}
