//! Atomic file output and shared number formatting.

use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Writes `contents` to a temporary file beside `path`, then renames it over.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let fail = |e: std::io::Error| CliError::Data(format!("cannot write {}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create output directory {}: {e}", dir.display())))
}

/// `2` for 2.0, `2.5` for 2.5; used in file names and tables.
pub fn zeta_label(zeta: f64) -> String {
    format!("{zeta}")
}

/// `0.41(3)`: the value rounded to the first significant digit of its error.
pub fn with_error(value: f64, err: Option<f64>) -> String {
    let Some(err) = err.filter(|e| *e > 0.0 && e.is_finite()) else {
        return format!("{value:.3}");
    };
    let mut decimals = (-err.log10().floor()).max(0.0) as usize;
    let mut digit = (err * 10f64.powi(decimals as i32)).round();
    if digit >= 10.0 && decimals > 0 {
        decimals -= 1;
        digit = (err * 10f64.powi(decimals as i32)).round();
    }
    format!("{value:.decimals$}({digit})")
}
