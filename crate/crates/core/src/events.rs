//! Large-fluctuation events: threshold selection and crash/rally and
//! endogenous/exogenous tagging.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;

use crate::error::{Error, Result};
use crate::series::{PriceSeries, VolatilitySeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    /// `R(t') < 0`
    Crash,
    /// `R(t') > 0`
    Rally,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Untagged,
    Endogenous,
    Exogenous,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Crash => "crash",
            Sign::Rally => "rally",
        })
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Untagged => "untagged",
            Origin::Endogenous => "endogenous",
            Origin::Exogenous => "exogenous",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Bar index `t'` on the volatility axis.
    pub index: usize,
    pub sign: Sign,
    pub origin: Origin,
    /// Selection-series value at `t'`.
    pub volatility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventSet {
    events: Vec<Event>,
    zeta: f64,
    source_sigma: f64,
}

impl EventSet {
    /// Builds a set from arbitrary events, sorted by index with duplicates removed.
    pub fn from_events(mut events: Vec<Event>, zeta: f64, source_sigma: f64) -> Self {
        events.sort_by_key(|e| e.index);
        events.dedup_by_key(|e| e.index);
        Self { events, zeta, source_sigma }
    }

    /// Untagged rallies at the given bar indices; handy for hand-built tests.
    pub fn from_indices(indices: &[usize]) -> Self {
        let events = indices
            .iter()
            .map(|&index| Event { index, sign: Sign::Rally, origin: Origin::Untagged, volatility: 0.0 })
            .collect();
        Self::from_events(events, f64::NAN, f64::NAN)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn indices(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.index).collect()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn source_sigma(&self) -> f64 {
        self.source_sigma
    }

    pub fn count_sign(&self, sign: Sign) -> usize {
        self.events.iter().filter(|e| e.sign == sign).count()
    }

    pub fn count_origin(&self, origin: Origin) -> usize {
        self.events.iter().filter(|e| e.origin == origin).count()
    }

    /// Order-preserving subset.
    pub fn filter_by(&self, mut keep: impl FnMut(&Event) -> bool) -> Self {
        Self { events: self.events.iter().filter(|e| keep(e)).copied().collect(), ..*self }
    }

    /// Union of two subsets of the same selection.
    pub fn union(&self, other: &EventSet) -> Self {
        let mut events = self.events.clone();
        events.extend_from_slice(&other.events);
        Self::from_events(events, self.zeta, self.source_sigma)
    }

    /// Events of the time-reversed series of `n_bars` bars: `t' -> n_bars - 1 - t'`,
    /// with crash and rally swapped since returns change sign.
    pub fn reversed(&self, n_bars: usize) -> Self {
        let events = self
            .events
            .iter()
            .rev()
            .map(|e| Event {
                index: n_bars - 1 - e.index,
                sign: match e.sign {
                    Sign::Crash => Sign::Rally,
                    Sign::Rally => Sign::Crash,
                },
                ..*e
            })
            .collect();
        Self { events, ..*self }
    }

    /// `index<TAB>date<TAB>sign<TAB>origin<TAB>volatility`; the date is that of
    /// the price closing the event's return, `-` when no prices are given.
    pub fn to_tsv(&self, prices: Option<&PriceSeries>) -> String {
        let mut out = String::from("index\tdate\tsign\torigin\tvolatility\n");
        for e in &self.events {
            let date = prices
                .filter(|p| e.index + 1 < p.len())
                .map(|p| p.date(e.index + 1).format("%Y-%m-%d").to_string())
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", e.index, date, e.sign, e.origin, e.volatility));
        }
        out
    }
}

/// All non-excluded bars with `value > zeta * sigma`, tagged by return sign.
pub fn select_events(vol: &VolatilitySeries, zeta: f64) -> Result<EventSet> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidZeta(zeta));
    }
    let sigma = vol.sigma();
    if sigma <= 0.0 {
        return Err(Error::ZeroSigma);
    }
    if zeta <= 1.0 {
        warn!("threshold multiplier {zeta} is not above the average volatility");
    }
    let threshold = zeta * sigma;
    let events = vol
        .values()
        .iter()
        .zip(vol.returns())
        .enumerate()
        .filter(|&(i, (&v, _))| !vol.is_excluded(i) && v > threshold)
        .map(|(index, (&v, &r))| Event {
            index,
            sign: if r < 0.0 { Sign::Crash } else { Sign::Rally },
            origin: Origin::Untagged,
            volatility: v,
        })
        .collect();
    Ok(EventSet { events, zeta, source_sigma: sigma })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalendarEntry {
    pub date: NaiveDate,
    pub note: String,
}

/// Dated exogenous events, read from `date,origin,note` CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventCalendar {
    entries: Vec<CalendarEntry>,
}

impl EventCalendar {
    pub fn new(entries: Vec<CalendarEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.date) {
                return Err(Error::DuplicateDate(e.date.to_string()));
            }
        }
        Ok(Self { entries })
    }

    pub fn parse<R: BufRead>(source: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (k, line) in source.lines().enumerate() {
            let line_no = k + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.splitn(3, ',');
            let date_field = fields.next().unwrap_or("").trim();
            let origin = fields.next().map(str::trim);
            let note = fields.next().unwrap_or("").trim().to_string();
            let date = match NaiveDate::parse_from_str(date_field, "%Y-%m-%d") {
                Ok(d) => d,
                Err(_) if entries.is_empty() && date_field.eq_ignore_ascii_case("date") => continue,
                Err(e) => return Err(Error::Parse { line: line_no, message: format!("bad date {date_field:?}: {e}") }),
            };
            if origin != Some("exogenous") {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("origin must be `exogenous`, got {:?}", origin.unwrap_or("")),
                });
            }
            entries.push(CalendarEntry { date, note });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[CalendarEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.entries.iter().any(|e| e.date == date)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagSummary {
    pub exogenous: usize,
    pub endogenous: usize,
    /// Calendar dates that match no trading day of the series.
    pub unmatched_dates: Vec<NaiveDate>,
}

/// Tags each event exogenous when its date is in the calendar, endogenous otherwise.
pub fn tag_origins(
    events: &EventSet,
    calendar: &EventCalendar,
    prices: &PriceSeries,
) -> Result<(EventSet, TagSummary)> {
    if !prices.is_daily() {
        return Err(Error::TaggingUnsupported);
    }
    let trading_days: BTreeSet<NaiveDate> = prices.timestamps().iter().map(|t| t.date()).collect();
    let unmatched_dates: Vec<NaiveDate> =
        calendar.entries().iter().map(|e| e.date).filter(|d| !trading_days.contains(d)).collect();
    for d in &unmatched_dates {
        warn!("calendar date {d} matches no trading day");
    }

    let mut tagged = Vec::with_capacity(events.len());
    for e in events.events() {
        if e.index + 1 >= prices.len() {
            return Err(Error::EventOutOfRange { index: e.index, len: prices.len() - 1 });
        }
        let origin = if calendar.contains(prices.date(e.index + 1)) { Origin::Exogenous } else { Origin::Endogenous };
        tagged.push(Event { origin, ..*e });
    }
    let out = EventSet { events: tagged, ..*events };
    let summary = TagSummary {
        exogenous: out.count_origin(Origin::Exogenous),
        endogenous: out.count_origin(Origin::Endogenous),
        unmatched_dates,
    };
    Ok((out, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventFilter {
    All,
    Crash,
    Rally,
    Endogenous,
    Exogenous,
}

impl EventFilter {
    pub fn accepts(self, e: &Event) -> bool {
        match self {
            EventFilter::All => true,
            EventFilter::Crash => e.sign == Sign::Crash,
            EventFilter::Rally => e.sign == Sign::Rally,
            EventFilter::Endogenous => e.origin == Origin::Endogenous,
            EventFilter::Exogenous => e.origin == Origin::Exogenous,
        }
    }

    pub fn needs_calendar(self) -> bool {
        matches!(self, EventFilter::Endogenous | EventFilter::Exogenous)
    }
}

impl fmt::Display for EventFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventFilter::All => "all",
            EventFilter::Crash => "crash",
            EventFilter::Rally => "rally",
            EventFilter::Endogenous => "endogenous",
            EventFilter::Exogenous => "exogenous",
        })
    }
}

impl FromStr for EventFilter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(EventFilter::All),
            "crash" => Ok(EventFilter::Crash),
            "rally" => Ok(EventFilter::Rally),
            "endogenous" | "endo" => Ok(EventFilter::Endogenous),
            "exogenous" | "exo" => Ok(EventFilter::Exogenous),
            other => Err(format!("unknown event filter {other:?}")),
        }
    }
}

pub fn filter_events(events: &EventSet, filter: EventFilter) -> EventSet {
    events.filter_by(|e| filter.accepts(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Days;
    use std::io::Cursor;

    fn daily_prices(returns: &[f64], start: NaiveDate) -> PriceSeries {
        let mut p = vec![100.0];
        for r in returns {
            p.push(p.last().unwrap() * r.exp());
        }
        let ts = (0..p.len()).map(|i| (start + Days::new(i as u64)).and_hms_opt(0, 0, 0).unwrap()).collect();
        PriceSeries::new(ts, p, 0).unwrap()
    }

    #[test]
    fn threshold_oracle() {
        let vol = VolatilitySeries::from_values(vec![1.0, 1.0, 1.0, 9.0, 1.0, 1.0]);
        assert!((vol.sigma() - 14.0 / 6.0).abs() < 1e-15);
        let set = select_events(&vol, 2.0).unwrap();
        assert_eq!(set.indices(), vec![3]);
        // brute-force comparison against zeta * sigma
        let brute: Vec<usize> = (0..6).filter(|&i| vol.values()[i] > 2.0 * (14.0 / 6.0)).collect();
        assert_eq!(set.indices(), brute);
    }

    #[test]
    fn constant_series_is_an_error() {
        let vol = VolatilitySeries::from_values(vec![0.0; 10]);
        assert!(matches!(select_events(&vol, 2.0), Err(Error::ZeroSigma)));
    }

    #[test]
    fn strict_inequality() {
        // sigma = 1, value 2 sits exactly on the 2-sigma threshold
        let vol = VolatilitySeries::from_values(vec![0.5, 0.5, 2.0, 1.0]);
        assert_eq!(vol.sigma(), 1.0);
        assert!(select_events(&vol, 2.0).unwrap().is_empty());
    }

    #[test]
    fn signs_follow_returns() {
        let vol = VolatilitySeries::from_returns(vec![0.1, -5.0, 0.1, 4.0, -0.1]);
        let set = select_events(&vol, 1.5).unwrap();
        assert_eq!(set.indices(), vec![1, 3]);
        assert_eq!(set.events()[0].sign, Sign::Crash);
        assert_eq!(set.events()[1].sign, Sign::Rally);
        assert!(filter_events(&set, EventFilter::Crash).union(&filter_events(&set, EventFilter::Rally)).eq(&set));
    }

    #[test]
    fn crash_filter_on_rallies_is_empty() {
        let vol = VolatilitySeries::from_returns(vec![0.1, 5.0, 0.1, 4.0, 0.1]);
        let set = select_events(&vol, 1.5).unwrap();
        assert_eq!(set.len(), 2);
        assert!(filter_events(&set, EventFilter::Crash).is_empty());
    }

    #[test]
    fn tagging_against_calendar() {
        let start = NaiveDate::from_ymd_opt(1992, 5, 18).unwrap();
        let prices = daily_prices(&[0.001, 0.002, -0.001, 0.2, 0.001, -0.25, 0.001], start);
        let vol = crate::series::compute_returns(&prices).unwrap();
        let set = select_events(&vol, 2.0).unwrap();
        assert_eq!(set.indices(), vec![3, 5]);
        // bar 3 closes on 1992-05-22, bar 5 on 1992-05-24
        let cal = EventCalendar::parse(Cursor::new(
            "date,origin,note\n1992-05-22,exogenous,free bidding\n1999-01-01,exogenous,absent\n",
        ))
        .unwrap();
        let (tagged, summary) = tag_origins(&set, &cal, &prices).unwrap();
        assert_eq!(tagged.events()[0].origin, Origin::Exogenous);
        assert_eq!(tagged.events()[1].origin, Origin::Endogenous);
        assert_eq!(summary.exogenous, 1);
        assert_eq!(summary.endogenous, 1);
        assert_eq!(summary.unmatched_dates, vec![NaiveDate::from_ymd_opt(1999, 1, 1).unwrap()]);
        assert_eq!(filter_events(&tagged, EventFilter::Exogenous).indices(), vec![3]);

        let (all_endo, s) = tag_origins(&set, &EventCalendar::default(), &prices).unwrap();
        assert_eq!(s.endogenous, 2);
        assert!(all_endo.events().iter().all(|e| e.origin == Origin::Endogenous));
    }

    #[test]
    fn tagging_minute_data_unsupported() {
        let d = NaiveDate::from_ymd_opt(2001, 1, 2).unwrap();
        let ts = (0..3).map(|i| d.and_hms_opt(9, 30 + i, 0).unwrap()).collect();
        let prices = PriceSeries::new(ts, vec![1.0, 2.0, 1.0], 1).unwrap();
        let set = EventSet::from_indices(&[0]);
        assert!(matches!(tag_origins(&set, &EventCalendar::default(), &prices), Err(Error::TaggingUnsupported)));
    }

    #[test]
    fn calendar_rejects_duplicates_and_bad_origin() {
        let dup = "1987-10-19,exogenous,a\n1987-10-19,exogenous,b\n";
        assert!(matches!(EventCalendar::parse(Cursor::new(dup)), Err(Error::DuplicateDate(_))));
        let bad = "1987-10-19,endogenous,a\n";
        assert!(matches!(EventCalendar::parse(Cursor::new(bad)), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn calendar_note_keeps_commas() {
        let cal = EventCalendar::parse(Cursor::new("2008-09-19,exogenous,stamp tax, buybacks\n")).unwrap();
        assert_eq!(cal.entries()[0].note, "stamp tax, buybacks");
    }

    #[test]
    fn filter_parsing() {
        assert_eq!("Exogenous".parse::<EventFilter>().unwrap(), EventFilter::Exogenous);
        assert_eq!("endo".parse::<EventFilter>().unwrap(), EventFilter::Endogenous);
        assert!("sideways".parse::<EventFilter>().is_err());
    }

    #[test]
    fn event_tsv() {
        let vol = VolatilitySeries::from_returns(vec![0.1, -5.0, 0.1]);
        let set = select_events(&vol, 2.0).unwrap();
        assert_eq!(set.to_tsv(None), "index\tdate\tsign\torigin\tvolatility\n1\t-\tcrash\tuntagged\t5\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn higher_threshold_selects_subset(
                returns in prop::collection::vec(-3.0f64..3.0, 5..200),
                z1 in 0.5f64..4.0,
                dz in 0.0f64..4.0,
            ) {
                let vol = VolatilitySeries::from_returns(returns);
                prop_assume!(vol.sigma() > 0.0);
                let low = select_events(&vol, z1).unwrap().indices();
                let high = select_events(&vol, z1 + dz).unwrap().indices();
                prop_assert!(high.iter().all(|i| low.contains(i)));
            }

            #[test]
            fn reversal_maps_indices(returns in prop::collection::vec(-3.0f64..3.0, 5..200), zeta in 1.0f64..3.0) {
                let vol = VolatilitySeries::from_returns(returns);
                prop_assume!(vol.sigma() > 0.0);
                let fwd = select_events(&vol, zeta).unwrap();
                let bwd = select_events(&vol.reversed(), zeta).unwrap();
                prop_assert_eq!(fwd.reversed(vol.len()).indices(), bwd.indices());
            }

            #[test]
            fn crash_and_rally_partition(returns in prop::collection::vec(-3.0f64..3.0, 5..200)) {
                let vol = VolatilitySeries::from_returns(returns);
                prop_assume!(vol.sigma() > 0.0);
                let all = select_events(&vol, 1.5).unwrap();
                let crash = filter_events(&all, EventFilter::Crash);
                let rally = filter_events(&all, EventFilter::Rally);
                prop_assert_eq!(crash.len() + rally.len(), all.len());
                prop_assert_eq!(crash.union(&rally), all);
            }
        }
    }
}
