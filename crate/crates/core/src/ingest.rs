//! Loading and cleaning of raw OHLC data into a log-volatility panel.
//!
//! The stages mirror the cleaning procedure applied to the exchange data:
//! [`load_ohlc`] → [`filter_universe`] → [`apply_calendar`] →
//! [`variance_panel`] (Garman-Klass per bar) → [`impute_and_log`].
//! Every stage reports what it dropped as [`Diagnostic`] rows instead of
//! silently discarding data.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Date, Error, Result};

/// Longest run of missing or zero variances that is filled by carrying the
/// previous value forward. Longer runs drop the firm.
pub const MAX_FILL_RUN: usize = 9;

/// Replacement for a negative Garman-Klass value so the log stays finite.
pub const GK_CLAMP_FLOOR: f64 = f64::EPSILON;

/// One trading day of prices for a single firm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcBar {
    pub date: Date,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

impl OhlcBar {
    /// Checks positivity and the high/low envelope.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite()) {
            return Err("non-finite price".into());
        }
        if prices.iter().any(|&p| p <= 0.0) {
            return Err("non-positive price".into());
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} above min(open, close) {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} below max(open, close) {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    North,
    South,
    East,
    Northeast,
    Northwest,
    Southwest,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::North,
        Region::South,
        Region::East,
        Region::Northeast,
        Region::Northwest,
        Region::Southwest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::North => "north",
            Region::South => "south",
            Region::East => "east",
            Region::Northeast => "northeast",
            Region::Northwest => "northwest",
            Region::Southwest => "southwest",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Region::ALL
            .into_iter()
            .find(|r| r.as_str() == lower)
            .ok_or_else(|| Error::InvalidInput(format!("unknown region `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShareClass {
    A,
    B,
    H,
}

impl FromStr for ShareClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(ShareClass::A),
            "B" | "b" => Ok(ShareClass::B),
            "H" | "h" => Ok(ShareClass::H),
            other => Err(Error::InvalidInput(format!("unknown share class `{other}`"))),
        }
    }
}

/// Static attributes of a listed firm.
///
/// Listings that share a `name` are treated as the same enterprise when
/// de-duplicating dual A/H listings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmMeta {
    pub ticker: String,
    pub name: String,
    pub region: Region,
    pub state_owned: bool,
    pub parent_ticker: Option<String>,
    pub share_class: ShareClass,
}

/// Trading days retained for estimation, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradingCalendar {
    dates: Vec<Date>,
}

impl TradingCalendar {
    pub fn new(dates: Vec<Date>) -> Result<Self> {
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "calendar not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { dates })
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn contains(&self, date: &Date) -> bool {
        self.dates.binary_search(date).is_ok()
    }
}

/// Dates × firms matrix of log variances.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityPanel {
    dates: Vec<Date>,
    firms: Vec<String>,
    values: Array2<f64>,
}

impl VolatilityPanel {
    pub fn new(dates: Vec<Date>, firms: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (dates.len(), firms.len()) {
            return Err(Error::InvalidInput(format!(
                "panel shape {:?} does not match {} dates x {} firms",
                values.dim(),
                dates.len(),
                firms.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "panel dates not strictly increasing at {}",
                w[1]
            )));
        }
        if let Some(((t, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite panel value for {} on {}",
                firms[j], dates[t]
            )));
        }
        let unique: BTreeSet<&String> = firms.iter().collect();
        if unique.len() != firms.len() {
            return Err(Error::InvalidInput("duplicate firm in panel".into()));
        }
        Ok(Self { dates, firms, values })
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn firms(&self) -> &[String] {
        &self.firms
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    /// Writes the panel as a versioned CSV: a `# spillnet-panel v1` line,
    /// then `date,<tickers...>` and one row per date.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut writer = writer;
        writeln!(writer, "{PANEL_HEADER}").map_err(|e| Error::io("<panel>", e))?;
        let mut csv = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.firms.iter().cloned());
        csv.write_record(&header)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut row = vec![date.to_string()];
            row.extend(self.values.row(t).iter().map(|v| v.to_string()));
            csv.write_record(&row)?;
        }
        csv.flush().map_err(|e| Error::io("<panel>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader
            .read_line(&mut first)
            .map_err(|e| Error::io("<panel>", e))?;
        if first.trim_end() != PANEL_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected `{PANEL_HEADER}`, found `{}`", first.trim_end()),
            });
        }
        let mut csv = csv::Reader::from_reader(reader);
        let headers = csv.headers()?.clone();
        if headers.get(0) != Some("date") {
            return Err(Error::MissingColumn("date".into()));
        }
        let firms: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut dates = Vec::new();
        let mut flat = Vec::new();
        for (i, record) in csv.records().enumerate() {
            let record = record?;
            let line = i as u64 + 3;
            dates.push(parse_date(&record[0], line)?);
            if record.len() != firms.len() + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", firms.len() + 1, record.len()),
                });
            }
            for field in record.iter().skip(1) {
                flat.push(parse_f64(field, line)?);
            }
        }
        let values = Array2::from_shape_vec((dates.len(), firms.len()), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(dates, firms, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

const PANEL_HEADER: &str = "# spillnet-panel v1";

/// A row of the exclusion/diagnostic report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub ticker: String,
    pub rule: String,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(ticker: impl Into<String>, rule: &str, detail: impl Into<String>) -> Self {
        Self {
            ticker: ticker.into(),
            rule: rule.to_string(),
            detail: detail.into(),
        }
    }
}

pub fn write_diagnostics<W: Write>(diagnostics: &[Diagnostic], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["ticker", "rule", "detail"])?;
    for d in diagnostics {
        csv.serialize(d)?;
    }
    csv.flush().map_err(|e| Error::io("<report>", e))?;
    Ok(())
}

/// Column names of the OHLC input file.
#[derive(Debug, Clone)]
pub struct OhlcSchema {
    pub date: String,
    pub ticker: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
}

impl Default for OhlcSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            ticker: "ticker".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
        }
    }
}

pub type FirmSeries = BTreeMap<String, Vec<OhlcBar>>;

#[derive(Debug, Clone, Default)]
pub struct LoadedOhlc {
    pub series: FirmSeries,
    pub rejects: Vec<Diagnostic>,
}

pub fn load_ohlc(path: impl AsRef<Path>, schema: &OhlcSchema) -> Result<LoadedOhlc> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ohlc(file, schema)
}

/// Parses OHLC rows, sorting each firm's bars by date. Rows that break the
/// bar invariants (or repeat a date) are rejected and listed, not fatal.
pub fn read_ohlc<R: Read>(reader: R, schema: &OhlcSchema) -> Result<LoadedOhlc> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (c_date, c_ticker) = (col(&schema.date)?, col(&schema.ticker)?);
    let (c_open, c_high, c_low, c_close) = (
        col(&schema.open)?,
        col(&schema.high)?,
        col(&schema.low)?,
        col(&schema.close)?,
    );
    let c_volume = headers.iter().position(|h| h == schema.volume);

    let mut out = LoadedOhlc::default();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = i as u64 + 2;
        let ticker = record[c_ticker].to_string();
        let date = parse_date(&record[c_date], line)?;
        let bar = OhlcBar {
            date,
            open: parse_f64(&record[c_open], line)?,
            high: parse_f64(&record[c_high], line)?,
            low: parse_f64(&record[c_low], line)?,
            close: parse_f64(&record[c_close], line)?,
            volume: match c_volume.map(|c| &record[c]) {
                None | Some("") => 0,
                Some(v) => parse_volume(v, line)?,
            },
        };
        match bar.validate() {
            Ok(()) => out.series.entry(ticker).or_default().push(bar),
            Err(why) => out.rejects.push(Diagnostic::new(
                ticker,
                "invalid_bar",
                format!("line {line} ({date}): {why}"),
            )),
        }
    }
    for (ticker, bars) in out.series.iter_mut() {
        bars.sort_by_key(|b| b.date);
        let mut kept: Vec<OhlcBar> = Vec::with_capacity(bars.len());
        for bar in bars.drain(..) {
            if kept.last().is_some_and(|prev| prev.date == bar.date) {
                out.rejects.push(Diagnostic::new(
                    ticker.clone(),
                    "duplicate_date",
                    format!("second bar on {}", bar.date),
                ));
            } else {
                kept.push(bar);
            }
        }
        *bars = kept;
    }
    Ok(out)
}

fn parse_date(s: &str, line: u64) -> Result<Date> {
    Date::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        line,
        message: format!("bad date `{s}`: {e}"),
    })
}

fn parse_f64(s: &str, line: u64) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        message: format!("bad number `{s}`: {e}"),
    })
}

fn parse_volume(s: &str, line: u64) -> Result<u64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    // Some vendors export integral volumes as floats ("1200.0").
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v.is_finite() => Ok(v as u64),
        _ => Err(Error::Parse {
            line,
            message: format!("bad volume `{s}`"),
        }),
    }
}

pub fn load_meta(path: impl AsRef<Path>) -> Result<Vec<FirmMeta>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_meta(file)
}

/// Parses the metadata CSV and checks ticker uniqueness and parent links.
pub fn read_meta<R: Read>(reader: R) -> Result<Vec<FirmMeta>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let c_ticker = col("ticker")?;
    let c_name = col("name")?;
    let c_region = col("region")?;
    let c_state = col("state_owned")?;
    let c_parent = headers.iter().position(|h| h == "parent_ticker");
    let c_class = col("share_class")?;

    let mut out = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = i as u64 + 2;
        let at_line = |e: Error| Error::Parse {
            line,
            message: e.to_string(),
        };
        let state_owned = match record[c_state].to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("state_owned must be true/false, found `{other}`"),
                })
            }
        };
        out.push(FirmMeta {
            ticker: record[c_ticker].to_string(),
            name: record[c_name].to_string(),
            region: record[c_region].parse().map_err(at_line)?,
            state_owned,
            parent_ticker: c_parent.map(|c| record[c].to_string()).filter(|p| !p.is_empty()),
            share_class: record[c_class].parse().map_err(at_line)?,
        });
    }
    validate_meta(&out)?;
    Ok(out)
}

pub fn validate_meta(meta: &[FirmMeta]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for m in meta {
        if !seen.insert(m.ticker.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate ticker `{}`", m.ticker)));
        }
    }
    for m in meta {
        if let Some(parent) = &m.parent_ticker {
            if parent == &m.ticker || !seen.contains(parent.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "parent `{parent}` of `{}` is not another ticker in the universe",
                    m.ticker
                )));
            }
        }
    }
    Ok(())
}

pub fn load_calendar(path: impl AsRef<Path>) -> Result<TradingCalendar> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_calendar(file)
}

/// One ISO date per line; blank lines and `#` comments are ignored.
pub fn read_calendar<R: Read>(reader: R) -> Result<TradingCalendar> {
    let mut dates = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<calendar>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        dates.push(parse_date(trimmed, i as u64 + 1)?);
    }
    TradingCalendar::new(dates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterRules {
    pub drop_b_shares: bool,
    pub dedupe_dual_listings: bool,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self {
            drop_b_shares: true,
            dedupe_dual_listings: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FilteredUniverse {
    pub series: FirmSeries,
    pub exclusions: Vec<Diagnostic>,
    /// (parent, child) pairs that were both retained.
    pub links: Vec<(String, String)>,
}

/// Drops B-share listings and, for enterprises listed more than once, keeps
/// only the listing with the largest total traded volume.
pub fn filter_universe(
    firms: &FirmSeries,
    meta: &[FirmMeta],
    rules: &FilterRules,
) -> Result<FilteredUniverse> {
    let by_ticker: HashMap<&str, &FirmMeta> = meta.iter().map(|m| (m.ticker.as_str(), m)).collect();
    for ticker in firms.keys() {
        if !by_ticker.contains_key(ticker.as_str()) {
            return Err(Error::MissingMetadata(ticker.clone()));
        }
    }

    let mut out = FilteredUniverse::default();
    let mut kept: BTreeSet<&str> = firms.keys().map(String::as_str).collect();

    if rules.drop_b_shares {
        for ticker in firms.keys() {
            if by_ticker[ticker.as_str()].share_class == ShareClass::B {
                kept.remove(ticker.as_str());
                out.exclusions.push(Diagnostic::new(
                    ticker.clone(),
                    "b_share",
                    "B-share listing removed",
                ));
            }
        }
    }

    if rules.dedupe_dual_listings {
        let mut by_enterprise: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        for &ticker in &kept {
            let key = by_ticker[ticker].name.trim().to_lowercase();
            by_enterprise.entry(key).or_default().push(ticker);
        }
        for listings in by_enterprise.values().filter(|l| l.len() > 1) {
            let volume = |t: &str| -> u128 { firms[t].iter().map(|b| b.volume as u128).sum() };
            // Highest volume wins; ties go to the lexicographically first ticker.
            let primary = *listings
                .iter()
                .max_by(|a, b| volume(a).cmp(&volume(b)).then(b.cmp(a)))
                .expect("non-empty group");
            for &ticker in listings.iter().filter(|&&t| t != primary) {
                kept.remove(ticker);
                out.exclusions.push(Diagnostic::new(
                    ticker,
                    "dual_listing",
                    format!(
                        "kept {primary} (volume {} vs {})",
                        volume(primary),
                        volume(ticker)
                    ),
                ));
            }
        }
    }

    for &ticker in &kept {
        if let Some(parent) = &by_ticker[ticker].parent_ticker {
            if kept.contains(parent.as_str()) {
                out.links.push((parent.clone(), ticker.to_string()));
            }
        }
        out.series.insert(ticker.to_string(), firms[ticker].clone());
    }
    Ok(out)
}

/// Firm series aligned to a calendar: one slot per calendar day.
#[derive(Debug, Clone, Default)]
pub struct AlignedSeries {
    pub dates: Vec<Date>,
    pub series: BTreeMap<String, Vec<Option<OhlcBar>>>,
    /// Calendar indices with no bar, per firm.
    pub gaps: BTreeMap<String, Vec<usize>>,
    pub flagged: Vec<Diagnostic>,
}

/// Restricts every series to calendar days. Firms left with no bars at all
/// are flagged in `flagged` and excluded from `series`.
pub fn apply_calendar(series: &FirmSeries, calendar: &TradingCalendar) -> Result<AlignedSeries> {
    if calendar.is_empty() {
        return Err(Error::InvalidInput("trading calendar is empty".into()));
    }
    let dates = calendar.dates().to_vec();
    let mut out = AlignedSeries {
        dates: dates.clone(),
        ..Default::default()
    };
    for (ticker, bars) in series {
        let mut slots: Vec<Option<OhlcBar>> = vec![None; dates.len()];
        for bar in bars {
            if let Ok(idx) = dates.binary_search(&bar.date) {
                slots[idx] = Some(*bar);
            }
        }
        if slots.iter().all(Option::is_none) {
            out.flagged.push(Diagnostic::new(
                ticker.clone(),
                "empty_after_calendar",
                "no bars fall on calendar days",
            ));
            continue;
        }
        let gaps: Vec<usize> = slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.is_none().then_some(i))
            .collect();
        out.gaps.insert(ticker.clone(), gaps);
        out.series.insert(ticker.clone(), slots);
    }
    Ok(out)
}

/// Daily Garman-Klass variance `0.5·ln(H/L)² − (2·ln2 − 1)·ln(C/O)²`.
///
/// The raw expression cannot go negative for a bar that satisfies the OHLC
/// envelope, but rounding on near-degenerate bars can push it just below
/// zero; such values are returned as is and clamped by [`variance_panel`].
pub fn garman_klass(bar: &OhlcBar) -> f64 {
    let range = (bar.high / bar.low).ln();
    let drift = (bar.close / bar.open).ln();
    0.5 * range * range - (2.0 * std::f64::consts::LN_2 - 1.0) * drift * drift
}

/// Dates × firms variances before imputation; `NaN` marks a calendar gap.
#[derive(Debug, Clone)]
pub struct RawVariancePanel {
    pub dates: Vec<Date>,
    pub firms: Vec<String>,
    pub values: Array2<f64>,
    /// Number of negative estimator outputs replaced by [`GK_CLAMP_FLOOR`].
    pub clamped: usize,
}

pub fn variance_panel(aligned: &AlignedSeries) -> RawVariancePanel {
    let firms: Vec<String> = aligned.series.keys().cloned().collect();
    let mut values = Array2::from_elem((aligned.dates.len(), firms.len()), f64::NAN);
    let mut clamped = 0;
    for (j, slots) in aligned.series.values().enumerate() {
        for (t, slot) in slots.iter().enumerate() {
            if let Some(bar) = slot {
                let v = garman_klass(bar);
                values[[t, j]] = if v < 0.0 {
                    clamped += 1;
                    GK_CLAMP_FLOOR
                } else {
                    v
                };
            }
        }
    }
    RawVariancePanel {
        dates: aligned.dates.clone(),
        firms,
        values,
        clamped,
    }
}

#[derive(Debug, Clone)]
pub struct ImputeOutcome {
    pub panel: VolatilityPanel,
    pub dropped: Vec<Diagnostic>,
    /// Number of cells filled by carrying the previous value forward.
    pub filled: usize,
}

/// Fills gaps (`NaN`) and zero variances by last observation carried forward
/// and takes natural logs.
///
/// A firm is dropped when it starts with a gap or zero (nothing to carry) or
/// when any missing run is longer than `max_fill_run`.
pub fn impute_and_log(raw: &RawVariancePanel, max_fill_run: usize) -> Result<ImputeOutcome> {
    let (n_dates, _) = raw.values.dim();
    let missing = |v: f64| v.is_nan() || v <= 0.0;

    let mut kept_firms = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    let mut filled = 0;

    'firms: for (j, ticker) in raw.firms.iter().enumerate() {
        let col = raw.values.column(j);
        if n_dates == 0 || missing(col[0]) {
            dropped.push(Diagnostic::new(
                ticker.clone(),
                "leading_gap",
                "first value missing or zero; nothing to carry forward",
            ));
            continue;
        }
        let mut out = Vec::with_capacity(n_dates);
        let mut last = col[0];
        let mut run = 0usize;
        let mut firm_filled = 0;
        for (t, &v) in col.iter().enumerate() {
            if missing(v) {
                run += 1;
                if run > max_fill_run {
                    dropped.push(Diagnostic::new(
                        ticker.clone(),
                        "extended_gap",
                        format!(
                            "missing/zero run longer than {max_fill_run} days ending after {}",
                            raw.dates[t]
                        ),
                    ));
                    continue 'firms;
                }
                firm_filled += 1;
                out.push(last.ln());
            } else {
                run = 0;
                last = v;
                out.push(v.ln());
            }
        }
        filled += firm_filled;
        kept_firms.push(ticker.clone());
        columns.push(out);
    }

    if kept_firms.is_empty() {
        return Err(Error::InvalidInput("no firms left after imputation".into()));
    }
    let mut values = Array2::zeros((n_dates, kept_firms.len()));
    for (j, col) in columns.iter().enumerate() {
        for (t, &v) in col.iter().enumerate() {
            values[[t, j]] = v;
        }
    }
    Ok(ImputeOutcome {
        panel: VolatilityPanel::new(raw.dates.clone(), kept_firms, values)?,
        dropped,
        filled,
    })
}
