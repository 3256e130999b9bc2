//! The `validate` command: lint a price file (and calendar) without analysing.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use volrelax::{compute_returns, estimate_pattern, ingest_prices, tag_origins, EventCalendar, EventSet};

use crate::error::{CliError, CliResult};

/// A human-readable report, or the first hard problem found.
pub fn run(input: &Path, bar_interval: u32, calendar: Option<&Path>) -> CliResult<String> {
    let file = File::open(input).map_err(|e| CliError::data(input, e))?;
    let prices = ingest_prices(BufReader::new(file), bar_interval).map_err(|e| CliError::data(input, e))?;
    let vol = compute_returns(&prices).map_err(|e| CliError::data(input, e))?;

    let mut out = String::new();
    let ts = prices.timestamps();
    let _ = writeln!(out, "file\t{}", input.display());
    let _ = writeln!(out, "observations\t{}", prices.len());
    let _ = writeln!(out, "returns\t{}", vol.len());
    let _ = writeln!(out, "first\t{}", ts[0].format("%Y-%m-%dT%H:%M:%S"));
    let _ = writeln!(out, "last\t{}", ts[ts.len() - 1].format("%Y-%m-%dT%H:%M:%S"));
    let _ = writeln!(out, "trading_days\t{}", prices.n_days());
    let _ = writeln!(
        out,
        "frequency\t{}",
        if prices.is_daily() { "daily".to_string() } else { format!("{bar_interval} min") }
    );
    let zero = vol.values().iter().filter(|v| **v == 0.0).count();
    let _ = writeln!(out, "zero_returns\t{zero}");
    let _ = writeln!(out, "sigma\t{}", vol.sigma());

    if !prices.is_daily() {
        let _ = writeln!(out, "bars_per_day\t{}", vol.bars_per_day());
        let lengths = prices.day_lengths();
        let short = lengths.iter().filter(|&&n| n < vol.bars_per_day()).count();
        let _ = writeln!(out, "short_days\t{short}");
        match estimate_pattern(&vol) {
            Ok(pattern) => {
                let _ = writeln!(out, "degenerate_slots\t{:?}", pattern.degenerate_slots());
            }
            Err(e) => return Err(CliError::data(input, e)),
        }
    }

    if let Some(path) = calendar {
        let file = File::open(path).map_err(|e| CliError::data(path, e))?;
        let cal = EventCalendar::parse(BufReader::new(file)).map_err(|e| CliError::data(path, e))?;
        let _ = writeln!(out, "calendar_entries\t{}", cal.len());
        if prices.is_daily() {
            let (_, summary) =
                tag_origins(&EventSet::from_indices(&[]), &cal, &prices).map_err(|e| CliError::data(path, e))?;
            let unmatched: Vec<String> = summary.unmatched_dates.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "calendar_unmatched\t{}", unmatched.join(","));
        } else {
            let _ = writeln!(out, "calendar_unmatched\tn/a (tagging needs daily data)");
        }
    }
    Ok(out)
}
