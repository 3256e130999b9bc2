//! The `synth` command: JSON generator spec to price CSV plus a sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use volrelax::synth::spaced_shock_times;
use volrelax::{generate, GeneratorSpec, Shock, ShockSign};

use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_atomic};

/// Shocks placed at random, as an alternative to listing them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomShocks {
    pub count: usize,
    pub magnitude: f64,
    pub min_spacing: usize,
    #[serde(default)]
    pub margin: usize,
    #[serde(default)]
    pub sign: ShockSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFile {
    #[serde(flatten)]
    pub spec: GeneratorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_shocks: Option<RandomShocks>,
}

impl SynthFile {
    /// The spec with random shocks drawn and merged into the explicit list.
    pub fn resolve(&self) -> CliResult<GeneratorSpec> {
        let mut spec = self.spec.clone();
        if let Some(r) = &self.random_shocks {
            let times = spaced_shock_times(spec.n_bars, r.count, r.min_spacing, r.margin, spec.seed)
                .map_err(|e| CliError::Data(e.to_string()))?;
            spec.shocks.extend(times.into_iter().map(|time| Shock { time, magnitude: r.magnitude, sign: r.sign }));
            spec.shocks.sort_by_key(|s| s.time);
        }
        Ok(spec)
    }
}

/// Writes `{name}.csv` and `{name}.json` (the fully resolved spec) into `out`.
pub fn run(spec_path: &Path, out: &Path, name: &str, seed: Option<u64>) -> CliResult<(PathBuf, PathBuf)> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| CliError::data(spec_path, e))?;
    let mut file: SynthFile = serde_json::from_str(&text).map_err(|e| CliError::data(spec_path, e))?;
    if let Some(seed) = seed {
        file.spec.seed = seed;
    }
    let spec = file.resolve().map_err(|e| CliError::data(spec_path, e))?;
    let prices = generate(&spec).map_err(|e| CliError::data(spec_path, e))?;
    ensure_dir(out)?;
    let csv = out.join(format!("{name}.csv"));
    let sidecar = out.join(format!("{name}.json"));
    write_atomic(&csv, &prices.to_csv())?;
    let json = serde_json::to_string_pretty(&spec).expect("spec serializes");
    write_atomic(&sidecar, &(json + "\n"))?;
    Ok((csv, sidecar))
}
