//! Event-study comparison of stored snapshots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use spillnet::fevd::{table_diff, Measure, MoveCounts};
use spillnet::ingest::FirmSeries;
use spillnet::layout::Point;
use spillnet::rolling::{NetworkSnapshot, SnapshotStore};
use spillnet::{Date, TableDiff};

use crate::error::{CliError, CliResult};
use crate::render::Attributes;

/// Share of nodes, by distance from the layout centroid, counted as core.
pub const CORE_QUANTILE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    Up,
    Down,
    Flat,
    Missing,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Flat => "flat",
            Direction::Missing => "missing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Placement {
    Core,
    Periphery,
}

impl Placement {
    pub fn as_str(self) -> &'static str {
        match self {
            Placement::Core => "core",
            Placement::Periphery => "periphery",
        }
    }
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Nodes farther from the centroid than the 70th-percentile distance are
/// periphery, the rest core.
pub fn placements(positions: &[Point]) -> Vec<Placement> {
    let n = positions.len().max(1) as f64;
    let cx = positions.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = positions.iter().map(|p| p[1]).sum::<f64>() / n;
    let dist: Vec<f64> = positions.iter().map(|p| (p[0] - cx).hypot(p[1] - cy)).collect();
    let cut = quantile(&dist, CORE_QUANTILE);
    dist.iter()
        .map(|&d| {
            if d > cut {
                Placement::Periphery
            } else {
                Placement::Core
            }
        })
        .collect()
}

fn close_on_or_before(prices: &FirmSeries, ticker: &str, date: Date) -> Option<f64> {
    let bars = prices.get(ticker)?;
    let idx = bars.partition_point(|b| b.date <= date);
    (idx > 0).then(|| bars[idx - 1].close)
}

pub fn price_direction(prices: &FirmSeries, ticker: &str, before: Date, after: Date) -> Direction {
    match (
        close_on_or_before(prices, ticker, before),
        close_on_or_before(prices, ticker, after),
    ) {
        (Some(a), Some(b)) if b > a => Direction::Up,
        (Some(a), Some(b)) if b < a => Direction::Down,
        (Some(_), Some(_)) => Direction::Flat,
        _ => Direction::Missing,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupSummary {
    pub firms: usize,
    pub measures: BTreeMap<Measure, MoveCounts>,
    pub price: BTreeMap<Direction, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub before: Date,
    pub after: Date,
    pub diff: TableDiff,
    pub counts: BTreeMap<Measure, MoveCounts>,
    pub placement: Vec<Placement>,
    pub price: Option<Vec<Direction>>,
    /// `(grouping, group)` → summary, for region, ownership and placement.
    pub groups: BTreeMap<(String, String), GroupSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventReport {
    pub pairs: Vec<PairReport>,
    /// Firms in the snapshots with no price data.
    pub price_missing: Vec<String>,
}

pub fn check_dates(dates: &[Date]) -> CliResult<()> {
    if dates.len() < 2 {
        return Err(CliError::validation("an event study needs at least two dates"));
    }
    if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
        return Err(CliError::validation(format!(
            "dates must be strictly increasing, got {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

pub fn event_study(
    store: &SnapshotStore,
    dates: &[Date],
    attrs: Option<&Attributes>,
    prices: Option<&FirmSeries>,
) -> CliResult<EventReport> {
    check_dates(dates)?;
    let missing: Vec<String> = dates
        .iter()
        .filter(|d| !store.exists(**d))
        .map(|d| d.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::validation(format!(
            "no snapshot for {}",
            missing.join(", ")
        )));
    }
    let snaps: Vec<NetworkSnapshot> = dates.iter().map(|d| store.load(*d)).collect::<Result<_, _>>()?;
    let pairs = snaps
        .windows(2)
        .map(|w| compare(&w[0], &w[1], attrs, prices))
        .collect::<CliResult<Vec<_>>>()?;
    let price_missing = match prices {
        Some(p) => snaps[0]
            .table
            .firms
            .iter()
            .filter(|f| !p.contains_key(*f))
            .cloned()
            .collect(),
        None => Vec::new(),
    };
    Ok(EventReport { pairs, price_missing })
}

pub fn compare(
    before: &NetworkSnapshot,
    after: &NetworkSnapshot,
    attrs: Option<&Attributes>,
    prices: Option<&FirmSeries>,
) -> CliResult<PairReport> {
    let diff = table_diff(&before.table, &after.table)?;
    let counts = Measure::ALL.iter().map(|&m| (m, diff.counts(m))).collect();
    let placement = placements(&after.positions);
    let price = prices.map(|p| {
        diff.firms
            .iter()
            .map(|f| price_direction(p, f, before.date, after.date))
            .collect::<Vec<_>>()
    });

    let mut groups: BTreeMap<(String, String), GroupSummary> = BTreeMap::new();
    for (i, firm) in diff.firms.iter().enumerate() {
        let mut keys = vec![("placement".to_string(), placement[i].as_str().to_string())];
        if let Some(a) = attrs.and_then(|a| a.get(firm)) {
            if let Some(r) = a.get("region") {
                keys.push(("region".into(), r.to_ascii_lowercase()));
            }
            if let Some(s) = a.get("state_owned") {
                let owner = match s.to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" => "state",
                    _ => "private",
                };
                keys.push(("ownership".into(), owner.into()));
            }
        }
        for key in keys {
            let g = groups.entry(key).or_default();
            g.firms += 1;
            for m in Measure::ALL {
                let d = diff.deltas(m)[i];
                let c = g.measures.entry(m).or_default();
                *c = MoveCounts {
                    up: c.up + usize::from(d > 0.0),
                    down: c.down + usize::from(d < 0.0),
                    unchanged: c.unchanged + usize::from(d == 0.0),
                };
            }
            if let Some(p) = &price {
                *g.price.entry(p[i]).or_default() += 1;
            }
        }
    }
    Ok(PairReport {
        before: before.date,
        after: after.date,
        diff,
        counts,
        placement,
        price,
        groups,
    })
}

impl EventReport {
    pub fn to_text(&self, measures: &[Measure], top: usize) -> String {
        let mut s = String::new();
        for p in &self.pairs {
            let _ = writeln!(s, "{} -> {}", p.before, p.after);
            let _ = writeln!(s, "  total connectedness change: {:+.4}", p.diff.delta_total);
            for &m in measures {
                let c = p.counts[&m];
                let _ = writeln!(
                    s,
                    "  {:<5} {} up, {} down, {} unchanged",
                    m.as_str(),
                    c.up,
                    c.down,
                    c.unchanged
                );
                let movers = p.diff.top_movers(m, top);
                if !movers.is_empty() {
                    let list: Vec<String> = movers.iter().map(|(f, d)| format!("{f} {d:+.3}")).collect();
                    let _ = writeln!(s, "        largest: {}", list.join(", "));
                }
            }
            if let Some(price) = &p.price {
                let up = price.iter().filter(|d| **d == Direction::Up).count();
                let down = price.iter().filter(|d| **d == Direction::Down).count();
                let _ = writeln!(s, "  price {up} up, {down} down");
            }
            for ((grouping, group), g) in &p.groups {
                let mut line = format!("  [{grouping}={group}] {} firms", g.firms);
                for &m in measures {
                    let c = g.measures[&m];
                    let _ = write!(line, "; {} {}/{}", m.as_str(), c.up, c.down);
                }
                if !g.price.is_empty() {
                    let _ = write!(
                        line,
                        "; price {}/{}",
                        g.price.get(&Direction::Up).unwrap_or(&0),
                        g.price.get(&Direction::Down).unwrap_or(&0)
                    );
                }
                s.push_str(&line);
                s.push('\n');
            }
        }
        if !self.price_missing.is_empty() {
            let _ = writeln!(s, "no price data for: {}", self.price_missing.join(", "));
        }
        s
    }

    /// One row per firm and date pair.
    pub fn write_csv<W: Write>(&self, attrs: Option<&Attributes>, writer: W) -> CliResult<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record([
            "before",
            "after",
            "ticker",
            "region",
            "state_owned",
            "placement",
            "delta_to",
            "delta_from",
            "delta_net",
            "price_direction",
        ])?;
        for p in &self.pairs {
            for (i, firm) in p.diff.firms.iter().enumerate() {
                let attr = |k: &str| {
                    attrs
                        .and_then(|a| a.get(firm))
                        .and_then(|a| a.get(k))
                        .cloned()
                        .unwrap_or_default()
                };
                csv.write_record([
                    p.before.to_string(),
                    p.after.to_string(),
                    firm.clone(),
                    attr("region"),
                    attr("state_owned"),
                    p.placement[i].as_str().to_string(),
                    p.diff.delta_to[i].to_string(),
                    p.diff.delta_from[i].to_string(),
                    p.diff.delta_net[i].to_string(),
                    p.price.as_ref().map_or("", |v| v[i].as_str()).to_string(),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert!((quantile(&[0.0, 10.0], 0.7) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn ring_of_ten_has_three_periphery_nodes() {
        let mut pos: Vec<Point> = (0..7).map(|k| [k as f64 * 0.1, 0.0]).collect();
        pos.extend([[100.0, 0.0], [-100.0, 0.0], [0.0, 100.0]]);
        let p = placements(&pos);
        assert_eq!(p.iter().filter(|x| **x == Placement::Periphery).count(), 3);
        assert!(p[7..].iter().all(|x| *x == Placement::Periphery));
    }

    #[test]
    fn date_order_is_checked() {
        let d = |s: &str| s.parse::<Date>().unwrap();
        assert!(check_dates(&[d("2020-01-02"), d("2020-01-01")]).is_err());
        assert!(check_dates(&[d("2020-01-02")]).is_err());
        assert!(check_dates(&[d("2020-01-01"), d("2020-01-02")]).is_ok());
    }
}
