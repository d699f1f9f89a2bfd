use anyhow::{Context, Result};
use std::fs::File;
use std::path::Path;

/// Environment variable that takes precedence over `--seed`.
pub const SEED_ENV: &str = "BOCOA_SEED";

/// 17 significant digits, enough for an exact round trip.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn resolve_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={s} is not an unsigned integer")),
        _ => Ok(flag),
    }
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}
