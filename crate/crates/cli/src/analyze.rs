//! The `analyze` pipeline: prices to curves, fits and summary tables.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use volrelax::fitting::MIN_REPLICATES;
use volrelax::relaxation::{DEFAULT_TMAX_DAILY, DEFAULT_TMAX_MINUTE};
use volrelax::*;

use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, with_error, write_atomic, zeta_label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    AtBound,
    Failed,
    NoEvents,
}

impl FitStatus {
    fn label(self) -> &'static str {
        match self {
            FitStatus::Ok => "ok",
            FitStatus::AtBound => "at_bound",
            FitStatus::Failed => "failed",
            FitStatus::NoEvents => "no_events",
        }
    }

    pub fn is_failure(self) -> bool {
        matches!(self, FitStatus::AtBound | FitStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    #[serde(rename = "D")]
    pub d: f64,
    pub p_value: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub method: FitMethod,
    pub status: FitStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub p: Option<f64>,
    pub p_err: Option<f64>,
    pub window: FitWindow,
    pub residual_rms: Option<f64>,
}

/// One fit report per (direction, zeta, filter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub direction: String,
    pub zeta: f64,
    pub filter: String,
    pub n_events: usize,
    pub method: FitMethod,
    pub status: FitStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub p: Option<f64>,
    pub p_err: Option<f64>,
    pub tau: Option<f64>,
    #[serde(rename = "A")]
    pub amplitude: Option<f64>,
    pub window: FitWindow,
    pub residual_rms: Option<f64>,
    pub n_points: Option<usize>,
    pub ks: Option<KsReport>,
    pub tail: Option<TailReport>,
}

impl FitReport {
    /// The fitted model, when there is one to draw.
    pub fn model(&self) -> Option<PowerLawFit> {
        Some(PowerLawFit {
            method: self.method,
            p: self.p?,
            tau: self.tau?,
            amplitude: self.amplitude?,
            window: self.window,
            residual_rms: self.residual_rms.unwrap_or(f64::NAN),
            n_points: self.n_points.unwrap_or(0),
            p_err: self.p_err,
        })
    }
}

pub struct Outcome {
    pub reports: Vec<FitReport>,
    pub table: String,
}

impl Outcome {
    pub fn failures(&self) -> usize {
        self.reports.iter().filter(|r| r.status.is_failure()).count()
    }
}

pub fn curve_file(kind: CurveKind, stem: &str) -> String {
    format!("{}_{stem}.tsv", kind.label())
}

pub fn fit_file(stem: &str) -> String {
    format!("fit_{stem}.json")
}

pub fn stem(direction: Direction, zeta: f64, filter: &str) -> String {
    format!("{}_{}x_{filter}", direction.label(), zeta_label(zeta))
}

struct Context<'a> {
    vol: &'a VolatilitySeries,
    t_max: usize,
    window: FitWindow,
    tail_window: FitWindow,
    replicates: usize,
    seed: u64,
    zeta1: Option<f64>,
    out: &'a Path,
}

struct Job {
    zeta: f64,
    filter: EventFilter,
    direction: Direction,
    events: EventSet,
}

pub fn run(cfg: &AnalysisConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    if cfg.bootstrap != 0 && cfg.bootstrap < MIN_REPLICATES {
        return Err(CliError::Usage(format!(
            "bootstrap: need 0 (off) or at least {MIN_REPLICATES} replicates, got {}",
            cfg.bootstrap
        )));
    }
    let input = cfg.input.as_deref().expect("validated");
    let file = File::open(input).map_err(|e| CliError::data(input, e))?;
    let prices = ingest_prices(BufReader::new(file), cfg.bar_interval).map_err(|e| CliError::data(input, e))?;
    let raw = compute_returns(&prices).map_err(|e| CliError::data(input, e))?;
    let mut vol = apply_overnight_policy(&raw, cfg.exclude_overnight);
    ensure_dir(&cfg.out)?;

    if cfg.detrend || cfg.emit_pattern {
        let pattern = estimate_pattern(&vol).map_err(|e| CliError::data(input, e))?;
        let degenerate = pattern.degenerate_slots();
        if !degenerate.is_empty() {
            warn!("intraday slots with D = 0: {degenerate:?}");
        }
        if cfg.emit_pattern {
            write_atomic(&cfg.out.join("pattern.tsv"), &pattern.to_tsv())?;
        }
        if cfg.detrend {
            vol = normalize(&vol, &pattern).map_err(|e| CliError::data(input, e))?;
        }
    }

    let daily = prices.is_daily();
    let t_max = cfg.t_max.unwrap_or(if daily { DEFAULT_TMAX_DAILY } else { DEFAULT_TMAX_MINUTE });
    if t_max >= vol.len() {
        return Err(CliError::data(input, format!("tmax {t_max} needs more than {} returns", vol.len())));
    }
    let window = cfg.fit_window.unwrap_or_else(|| FitWindow::default_for(daily, t_max));
    let tail_window = cfg.tail_window.unwrap_or_else(|| FitWindow::tail(t_max));
    for (name, w) in [("fit window", window), ("tail window", tail_window)] {
        if w.t_max > t_max {
            return Err(CliError::Usage(format!("{name} {w} extends beyond tmax {t_max}")));
        }
    }

    let calendar = match &cfg.calendar {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::data(path, e))?;
            Some(EventCalendar::parse(BufReader::new(file)).map_err(|e| CliError::data(path, e))?)
        }
        None => None,
    };

    let mut jobs = Vec::new();
    for &zeta in &cfg.zetas {
        let events = select_events(&vol, zeta).map_err(|e| CliError::data(input, e))?;
        let events = match &calendar {
            Some(cal) => {
                let (tagged, summary) = tag_origins(&events, cal, &prices).map_err(|e| CliError::data(input, e))?;
                info!(
                    "zeta {zeta}: {} events, {} exogenous, {} endogenous",
                    tagged.len(),
                    summary.exogenous,
                    summary.endogenous
                );
                tagged
            }
            None => events,
        };
        info!("zeta {zeta}: {} events ({} crashes)", events.len(), events.count_sign(Sign::Crash));
        write_atomic(&cfg.out.join(format!("events_{}x.tsv", zeta_label(zeta))), &events.to_tsv(Some(&prices)))?;
        for &filter in &cfg.filters {
            let subset = filter_events(&events, filter);
            for direction in [Direction::Pre, Direction::Post] {
                jobs.push(Job { zeta, filter, direction, events: subset.clone() });
            }
        }
    }

    let ctx = Context {
        vol: &vol,
        t_max,
        window,
        tail_window,
        replicates: cfg.bootstrap,
        seed: cfg.seed,
        zeta1: cfg.zeta1,
        out: &cfg.out,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Usage(format!("workers: {e}")))?;
    let reports = pool.install(|| jobs.par_iter().map(|job| run_job(&ctx, job)).collect::<CliResult<Vec<_>>>())?;

    write_atomic(&cfg.out.join("summary.tsv"), &summary_tsv(&reports))?;
    let table = summary_table(&reports, &cfg.zetas, &cfg.filters);
    write_atomic(&cfg.out.join("summary.txt"), &table)?;
    write_atomic(&cfg.out.join("config.txt"), &cfg.to_text())?;
    Ok(Outcome { reports, table })
}

/// Per-job seed derived from the job's name, so adding or removing other
/// jobs leaves it unchanged.
fn job_seed(seed: u64, stem: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stem.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

fn run_job(ctx: &Context, job: &Job) -> CliResult<FitReport> {
    let filter = job.filter.to_string();
    let stem = stem(job.direction, job.zeta, &filter);
    let mut report = FitReport {
        direction: job.direction.label().to_string(),
        zeta: job.zeta,
        filter,
        n_events: job.events.len(),
        method: FitMethod::FullModel,
        status: FitStatus::Ok,
        message: None,
        p: None,
        p_err: None,
        tau: None,
        amplitude: None,
        window: ctx.window,
        residual_rms: None,
        n_points: None,
        ks: None,
        tail: None,
    };
    if job.events.is_empty() {
        warn!("{stem}: no events, skipped");
        report.status = FitStatus::NoEvents;
        return Ok(report);
    }

    let curves =
        remanent(ctx.vol, &job.events, job.direction, ctx.t_max).and_then(|v| cumulate(&v).map(|cum| (v, cum)));
    let (v, cum) = match curves {
        Ok(c) => c,
        Err(e) => {
            warn!("{stem}: {e}");
            report.status = FitStatus::Failed;
            report.message = Some(e.to_string());
            write_report(ctx.out, &stem, &report)?;
            return Ok(report);
        }
    };
    write_atomic(&ctx.out.join(curve_file(CurveKind::RemanentV, &stem)), &v.to_tsv())?;
    write_atomic(&ctx.out.join(curve_file(CurveKind::CumulativeV, &stem)), &cum.to_tsv())?;
    if let Some(zeta1) = ctx.zeta1 {
        match omori_count(ctx.vol, &job.events, zeta1, job.direction, ctx.t_max) {
            Ok(n) => write_atomic(&ctx.out.join(curve_file(CurveKind::OmoriN, &stem)), &n.to_tsv())?,
            Err(e) => warn!("{stem}: exceedance counts: {e}"),
        }
    }

    let seed = job_seed(ctx.seed, &stem);
    let fit = match fit_cumulative(&cum, ctx.window) {
        Ok(f) => Some(f),
        Err(e) => {
            warn!("{stem}: {e}");
            report.message = Some(e.to_string());
            match e {
                Error::AtBound { fit, .. } => {
                    report.status = FitStatus::AtBound;
                    Some(*fit)
                }
                _ => {
                    report.status = FitStatus::Failed;
                    None
                }
            }
        }
    };
    if let Some(fit) = &fit {
        report.p = Some(fit.p);
        report.tau = Some(fit.tau);
        report.amplitude = Some(fit.amplitude);
        report.residual_rms = Some(fit.residual_rms);
        report.n_points = Some(fit.n_points);
        if ctx.replicates > 0 {
            let config = BootstrapConfig {
                replicates: ctx.replicates,
                seed,
                t_max: ctx.t_max,
                window: ctx.window,
                method: FitMethod::FullModel,
            };
            match bootstrap_error(ctx.vol, &job.events, job.direction, &config) {
                Ok(boot) => {
                    report.p_err = Some(boot.p_err);
                    match ks_test(&cum, fit, &boot.curves) {
                        Ok(ks) => {
                            report.ks = Some(KsReport { d: ks.d, p_value: ks.p_value, replicates: ks.replicates_used })
                        }
                        Err(e) => warn!("{stem}: KS test: {e}"),
                    }
                }
                Err(e) => warn!("{stem}: bootstrap: {e}"),
            }
        }
    }
    report.tail = Some(tail_report(ctx, job, &cum, seed));
    write_report(ctx.out, &stem, &report)?;
    Ok(report)
}

fn tail_report(ctx: &Context, job: &Job, cum: &RelaxationCurve, seed: u64) -> TailReport {
    let mut tail = TailReport {
        method: FitMethod::TailSlope,
        status: FitStatus::Ok,
        message: None,
        p: None,
        p_err: None,
        window: ctx.tail_window,
        residual_rms: None,
    };
    match tail_slope(cum, ctx.tail_window) {
        Ok(fit) => {
            tail.p = Some(fit.p);
            tail.residual_rms = Some(fit.residual_rms);
            if ctx.replicates > 0 {
                let config = BootstrapConfig {
                    replicates: ctx.replicates,
                    seed,
                    t_max: ctx.t_max,
                    window: ctx.tail_window,
                    method: FitMethod::TailSlope,
                };
                match bootstrap_error(ctx.vol, &job.events, job.direction, &config) {
                    Ok(boot) => tail.p_err = Some(boot.p_err),
                    Err(e) => warn!("tail bootstrap: {e}"),
                }
            }
        }
        Err(e) => {
            tail.status = FitStatus::Failed;
            tail.message = Some(e.to_string());
        }
    }
    tail
}

fn write_report(out: &Path, stem: &str, report: &FitReport) -> CliResult<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_atomic(&out.join(fit_file(stem)), &(json + "\n"))
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Machine-readable summary; numbers are printed exactly as in the reports.
pub fn summary_tsv(reports: &[FitReport]) -> String {
    let mut out = String::from(
        "zeta\tfilter\tdirection\tn_events\tstatus\tp\tp_err\ttau\tA\tresidual_rms\tks_D\tks_p\ttail_p\ttail_p_err\n",
    );
    for r in reports {
        let tail = r.tail.as_ref();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.zeta,
            r.filter,
            r.direction,
            r.n_events,
            r.status.label(),
            cell(r.p),
            cell(r.p_err),
            cell(r.tau),
            cell(r.amplitude),
            cell(r.residual_rms),
            cell(r.ks.as_ref().map(|k| k.d)),
            cell(r.ks.as_ref().map(|k| k.p_value)),
            cell(tail.and_then(|t| t.p)),
            cell(tail.and_then(|t| t.p_err)),
        );
    }
    out
}

/// Human-readable table: one column per zeta, rows tau-/p-/tau+/p+ per
/// filter, then the tail-slope exponents. `*` marks a fit on a search bound.
pub fn summary_table(reports: &[FitReport], zetas: &[f64], filters: &[EventFilter]) -> String {
    let find = |z: f64, f: &str, d: &str| reports.iter().find(|r| r.zeta == z && r.filter == f && r.direction == d);
    let mut out = String::new();
    let _ = write!(out, "{:<12}", "zeta");
    for z in zetas {
        let _ = write!(out, "{:>12}", format!("{}σ", zeta_label(*z)));
    }
    out.push('\n');
    for filter in filters {
        let f = filter.to_string();
        let _ = writeln!(out, "[{f}]");
        let n_row: Vec<String> =
            zetas.iter().map(|&z| find(z, &f, "minus").map_or("-".to_string(), |r| r.n_events.to_string())).collect();
        row(&mut out, "events", &n_row);
        for (dir, sym) in [("minus", "-"), ("plus", "+")] {
            let taus: Vec<String> = zetas
                .iter()
                .map(|&z| match find(z, &f, dir).and_then(|r| r.tau) {
                    Some(t) => format!("{t:.2}"),
                    None => "-".into(),
                })
                .collect();
            row(&mut out, &format!("tau{sym}"), &taus);
            let ps: Vec<String> = zetas.iter().map(|&z| p_cell(find(z, &f, dir))).collect();
            row(&mut out, &format!("p{sym}"), &ps);
        }
        for (dir, sym) in [("minus", "-"), ("plus", "+")] {
            let ps: Vec<String> = zetas
                .iter()
                .map(|&z| match find(z, &f, dir).and_then(|r| r.tail.as_ref()).filter(|t| t.p.is_some()) {
                    Some(t) => with_error(t.p.unwrap(), t.p_err),
                    None => "-".into(),
                })
                .collect();
            row(&mut out, &format!("p{sym} tail"), &ps);
        }
    }
    out
}

fn p_cell(report: Option<&FitReport>) -> String {
    match report {
        None => "-".into(),
        Some(r) => match (r.status, r.p) {
            (FitStatus::NoEvents, _) => "n/a".into(),
            (_, None) => "fail".into(),
            (FitStatus::AtBound, Some(p)) => format!("{}*", with_error(p, r.p_err)),
            (_, Some(p)) => with_error(p, r.p_err),
        },
    }
}

fn row(out: &mut String, label: &str, cells: &[String]) {
    let _ = write!(out, "{label:<12}");
    for c in cells {
        let _ = write!(out, "{c:>12}");
    }
    out.push('\n');
}
