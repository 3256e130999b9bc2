//! Analysis settings: a flat `key = value` file, then command-line overrides.
//!
//! Keys match the long flag names (`bar-interval` and `bar_interval` are the
//! same key). Relative paths in a config file are taken relative to the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use volrelax::{EventFilter, FitWindow};

use crate::error::{CliError, CliResult};

pub const DEFAULT_ZETAS: [f64; 4] = [2.0, 4.0, 6.0, 8.0];
pub const DEFAULT_BOOTSTRAP: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub input: Option<PathBuf>,
    /// Minutes per bar; 0 for daily data.
    pub bar_interval: u32,
    pub detrend: bool,
    pub exclude_overnight: bool,
    pub zetas: Vec<f64>,
    /// Largest lag; defaults by data frequency when unset.
    pub t_max: Option<usize>,
    pub calendar: Option<PathBuf>,
    pub filters: Vec<EventFilter>,
    pub fit_window: Option<FitWindow>,
    pub tail_window: Option<FitWindow>,
    pub bootstrap: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    /// Threshold multiplier for exceedance counts; no counts when unset.
    pub zeta1: Option<f64>,
    pub emit_pattern: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            input: None,
            bar_interval: 0,
            detrend: false,
            exclude_overnight: false,
            zetas: DEFAULT_ZETAS.to_vec(),
            t_max: None,
            calendar: None,
            filters: vec![EventFilter::All],
            fit_window: None,
            tail_window: None,
            bootstrap: DEFAULT_BOOTSTRAP,
            seed: 0,
            out: PathBuf::from("volrelax-out"),
            workers: 0,
            zeta1: None,
            emit_pattern: false,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(usage(format!("{key}: expected true/false, got {other:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| usage(format!("{key}: {e} ({value:?})")))
}

pub fn parse_zetas(value: &str) -> CliResult<Vec<f64>> {
    let zetas = value.split(',').map(|z| parse_num::<f64>("zeta", z)).collect::<CliResult<Vec<_>>>()?;
    if zetas.is_empty() || zetas.iter().any(|z| !(*z > 0.0 && z.is_finite())) {
        return Err(usage(format!("zeta: multipliers must be positive, got {value:?}")));
    }
    if zetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage(format!("zeta: multipliers must be strictly ascending, got {value:?}")));
    }
    Ok(zetas)
}

fn parse_filters(value: &str) -> CliResult<Vec<EventFilter>> {
    let mut filters = Vec::new();
    for f in value.split(',') {
        let f: EventFilter = f.parse().map_err(usage)?;
        if !filters.contains(&f) {
            filters.push(f);
        }
    }
    if filters.is_empty() {
        return Err(usage("filter: empty list"));
    }
    Ok(filters)
}

fn parse_window(key: &str, value: &str) -> CliResult<FitWindow> {
    let w: FitWindow = value.parse().map_err(|e| usage(format!("{key}: {e}")))?;
    if w.t_min < 1 || w.t_min >= w.t_max {
        return Err(usage(format!("{key}: need 1 <= lo < hi, got {value}")));
    }
    Ok(w)
}

impl AnalysisConfig {
    /// Applies one setting. `base` resolves relative paths.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> CliResult<()> {
        let path = |v: &str| {
            let p = PathBuf::from(v.trim());
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        match key.trim().replace('-', "_").as_str() {
            "input" => self.input = Some(path(value)),
            "bar_interval" => self.bar_interval = parse_num(key, value)?,
            "detrend" => self.detrend = parse_bool(key, value)?,
            "exclude_overnight" => self.exclude_overnight = parse_bool(key, value)?,
            "zeta" | "zetas" => self.zetas = parse_zetas(value)?,
            "tmax" | "t_max" => {
                let t: usize = parse_num(key, value)?;
                if t < 2 {
                    return Err(usage(format!("{key}: must be at least 2")));
                }
                self.t_max = Some(t);
            }
            "calendar" => self.calendar = Some(path(value)),
            "filter" | "filters" => self.filters = parse_filters(value)?,
            "fit_window" => self.fit_window = Some(parse_window(key, value)?),
            "tail_window" => self.tail_window = Some(parse_window(key, value)?),
            "bootstrap" => self.bootstrap = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "out" => self.out = path(value),
            "workers" => self.workers = parse_num(key, value)?,
            "zeta1" => {
                let z: f64 = parse_num(key, value)?;
                if !(z > 0.0 && z.is_finite()) {
                    return Err(usage(format!("{key}: must be positive")));
                }
                self.zeta1 = Some(z);
            }
            "emit_pattern" => self.emit_pattern = parse_bool(key, value)?,
            other => return Err(usage(format!("unknown setting {other:?}"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn load_file(&mut self, path: &Path) -> CliResult<()> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf);
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
            self.set(key, value, base.as_deref()).map_err(|e| usage(format!("{}:{}: {e}", path.display(), n + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.input.is_none() {
            return Err(usage("no input file given (--input or input = ... in the config)"));
        }
        if self.detrend && self.bar_interval == 0 {
            return Err(usage("--detrend needs intraday data (--bar-interval > 0)"));
        }
        if self.filters.iter().any(|f| f.needs_calendar()) && self.calendar.is_none() {
            return Err(usage("endogenous/exogenous filters need --calendar"));
        }
        if let (Some(w), Some(t)) = (self.fit_window, self.t_max) {
            if w.t_max > t {
                return Err(usage(format!("fit window {w} extends beyond tmax {t}")));
            }
        }
        Ok(())
    }

    /// The resolved settings in config-file syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let join = |xs: Vec<String>| xs.join(",");
        let _ = writeln!(out, "input = {}", opt(&self.input));
        let _ = writeln!(out, "bar_interval = {}", self.bar_interval);
        let _ = writeln!(out, "detrend = {}", self.detrend);
        let _ = writeln!(out, "exclude_overnight = {}", self.exclude_overnight);
        let _ = writeln!(out, "zeta = {}", join(self.zetas.iter().map(|z| z.to_string()).collect()));
        if let Some(t) = self.t_max {
            let _ = writeln!(out, "tmax = {t}");
        }
        if self.calendar.is_some() {
            let _ = writeln!(out, "calendar = {}", opt(&self.calendar));
        }
        let _ = writeln!(out, "filter = {}", join(self.filters.iter().map(|f| f.to_string()).collect()));
        if let Some(w) = self.fit_window {
            let _ = writeln!(out, "fit_window = {w}");
        }
        if let Some(w) = self.tail_window {
            let _ = writeln!(out, "tail_window = {w}");
        }
        let _ = writeln!(out, "bootstrap = {}", self.bootstrap);
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(z) = self.zeta1 {
            let _ = writeln!(out, "zeta1 = {z}");
        }
        let _ = writeln!(out, "emit_pattern = {}", self.emit_pattern);
        out
    }
}
