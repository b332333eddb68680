//! Daily rolling-window estimation with a persistent snapshot store.
//!
//! Each window is fitted independently, so connectedness tables are computed
//! in parallel batches. Layouts are then produced strictly in date order,
//! each day starting from the previous day's final positions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fevd::{connectedness, ConnectednessTable};
use crate::ingest::{FirmMeta, VolatilityPanel};
use crate::layout::{
    edges_from_table, positions_fingerprint, run_layout, DegreeConvention, InitialPositions, LayoutFile,
    LayoutParams, Point,
};
use crate::varnet::{fit_var, PenaltyChoice, SolverSettings, VarModel, VarOptions};
use crate::{Date, Error, Result};

/// Version of the on-disk snapshot layout.
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window_length: usize,
    pub lags: usize,
    pub horizon: usize,
    pub alpha: f64,
    pub folds: usize,
    pub layout_iterations: usize,
    pub lambda_count: usize,
    pub lambda_min_ratio: f64,
    /// Fixed penalty for every equation instead of cross-validation.
    pub lambda: Option<f64>,
    /// Seed for the random start of the first layout.
    pub seed: u64,
    pub scaling: f64,
    pub edge_weight_influence: u8,
    pub tolerance: f64,
    pub adaptive_tolerance: bool,
    pub degrees: DegreeConvention,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window_length: 100,
            lags: 3,
            horizon: 10,
            alpha: 0.5,
            folds: 10,
            layout_iterations: 600,
            lambda_count: 100,
            lambda_min_ratio: 1e-4,
            lambda: None,
            seed: 0,
            scaling: 10.0,
            edge_weight_influence: 1,
            tolerance: 1.0,
            adaptive_tolerance: false,
            degrees: DegreeConvention::Published,
        }
    }
}

impl RollingConfig {
    /// Every problem with the configuration, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.window_length == 0 {
            p.push("window_length must be positive".to_string());
        }
        if self.lags == 0 {
            p.push("lags must be positive".to_string());
        }
        if self.window_length <= self.lags {
            p.push(format!(
                "window_length ({}) must exceed lags ({})",
                self.window_length, self.lags
            ));
        }
        if self.horizon == 0 {
            p.push("horizon must be positive".to_string());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            p.push(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.lambda.is_none() {
            let rows = self.window_length.saturating_sub(self.lags);
            if self.folds < 2 {
                p.push(format!("folds must be at least 2, got {}", self.folds));
            } else if self.folds > rows {
                p.push(format!(
                    "folds ({}) exceeds the {rows} observations per window",
                    self.folds
                ));
            }
        }
        if self.layout_iterations == 0 {
            p.push("layout_iterations must be positive".to_string());
        }
        if self.lambda_count == 0 {
            p.push("lambda_count must be positive".to_string());
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            p.push(format!(
                "lambda_min_ratio must lie in (0, 1), got {}",
                self.lambda_min_ratio
            ));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                p.push(format!("lambda must be finite and >= 0, got {l}"));
            }
        }
        p.extend(self.layout_params().validate());
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    pub fn var_options(&self) -> VarOptions {
        VarOptions {
            lags: self.lags,
            alpha: self.alpha,
            folds: self.folds,
            lambda_count: self.lambda_count,
            lambda_min_ratio: self.lambda_min_ratio,
            penalty: match self.lambda {
                Some(l) => PenaltyChoice::Fixed(l),
                None => PenaltyChoice::CrossValidated,
            },
            solver: SolverSettings::default(),
        }
    }

    pub fn layout_params(&self) -> LayoutParams {
        LayoutParams {
            scaling: self.scaling,
            edge_weight_influence: self.edge_weight_influence,
            tolerance: self.tolerance,
            adaptive_tolerance: self.adaptive_tolerance,
            iterations: self.layout_iterations,
            ..LayoutParams::default()
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Inclusive `(start, end)` row ranges of every window, one trading day apart.
pub fn enumerate_windows(n_dates: usize, window_length: usize) -> Result<Vec<(usize, usize)>> {
    if window_length == 0 {
        return Err(Error::InvalidInput("window length must be positive".into()));
    }
    if n_dates < window_length {
        return Err(Error::InvalidInput(format!(
            "panel has {n_dates} dates, fewer than the window length {window_length}"
        )));
    }
    Ok((window_length - 1..n_dates)
        .map(|end| (end + 1 - window_length, end))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    /// Selected penalty per equation.
    pub lambda: Vec<f64>,
    /// `[i][ℓ − 1]`: non-zero coefficients of equation `i` at lag `ℓ`.
    pub nonzero: Vec<Vec<usize>>,
    /// Median over equations of the non-zero count at each lag.
    pub median_nonzero_per_lag: Vec<f64>,
    pub converged: Vec<bool>,
}

impl ModelSummary {
    pub fn from_model(model: &VarModel) -> Self {
        let per_eq = model.nonzero_per_equation();
        let nonzero = per_eq.outer_iter().map(|r| r.to_vec()).collect();
        let median_nonzero_per_lag = per_eq
            .columns()
            .into_iter()
            .map(|c| median(c.iter().map(|&v| v as f64).collect()))
            .collect();
        Self {
            lambda: model.lambda_selected.clone(),
            nonzero,
            median_nonzero_per_lag,
            converged: model.converged.clone(),
        }
    }

    fn empty() -> Self {
        Self {
            lambda: Vec::new(),
            nonzero: Vec::new(),
            median_nonzero_per_lag: Vec::new(),
            converged: Vec::new(),
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub version: u32,
    pub date: Date,
    pub config_hash: String,
    pub window_start: Date,
    pub window_end: Date,
    /// Set when estimation failed and the previous table and layout were carried forward.
    pub degraded: bool,
    pub failure: Option<String>,
    /// Seed of the random start, when the layout did not continue a previous day.
    pub seed: Option<u64>,
    /// Date whose final layout was the starting point of this one.
    pub seeded_from: Option<Date>,
    pub initial_fingerprint: String,
    pub final_fingerprint: String,
    pub layout_converged_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub date: Date,
    pub table: ConnectednessTable,
    /// Positions in table firm order.
    pub positions: Vec<Point>,
    pub model_summary: ModelSummary,
    pub meta: SnapshotMeta,
}

impl NetworkSnapshot {
    pub fn layout_file(&self) -> LayoutFile {
        LayoutFile::new(self.date, self.meta.seed, &self.table.firms, &self.positions)
    }

    /// Checks the structural invariants of a snapshot.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.date != self.meta.window_end || self.date != self.meta.date {
            return Err(format!("snapshot {} does not end its window", self.date));
        }
        if self.positions.len() != self.table.n_firms() {
            return Err("layout and table firm sets differ".into());
        }
        if self.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err("non-finite layout position".into());
        }
        if positions_fingerprint(&self.positions) != self.meta.final_fingerprint {
            return Err("layout does not match its fingerprint".into());
        }
        let n = self.table.n_firms();
        for (i, row) in self.table.d.outer_iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0)) {
                return Err(format!("negative or missing share in row {i}"));
            }
            if (row.sum() - 100.0).abs() > 1e-9 {
                return Err(format!("row {i} sums to {}", row.sum()));
            }
        }
        let to: f64 = self.table.to_others.sum();
        let from: f64 = self.table.from_others.sum();
        if (to - from).abs() > 1e-8 * n.max(1) as f64 * 100.0 {
            return Err("to and from totals disagree".into());
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    #[serde(flatten)]
    meta: SnapshotMeta,
    checksums: BTreeMap<String, String>,
}

const TABLE_FILE: &str = "table.csv";
const LAYOUT_FILE: &str = "layout.json";
const MODEL_FILE: &str = "model.json";
const META_FILE: &str = "meta.json";
const FIRMS_FILE: &str = "firms.json";

/// One directory per date under `<root>/snapshots/`.
#[derive(Debug, Clone)]
pub struct SnapshotStore {
    root: PathBuf,
}

impl SnapshotStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn snapshots_dir(&self) -> PathBuf {
        self.root.join("snapshots")
    }

    pub fn snapshot_dir(&self, date: Date) -> PathBuf {
        self.snapshots_dir().join(date.to_string())
    }

    pub fn exists(&self, date: Date) -> bool {
        self.snapshot_dir(date).join(META_FILE).is_file()
    }

    /// Stored dates in increasing order.
    pub fn dates(&self) -> Result<Vec<Date>> {
        let dir = self.snapshots_dir();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut dates = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if let Some(date) = entry.file_name().to_str().and_then(|s| s.parse::<Date>().ok()) {
                if entry.path().join(META_FILE).is_file() {
                    dates.push(date);
                }
            }
        }
        dates.sort();
        Ok(dates)
    }

    /// Writes a snapshot. Files go to a scratch directory first, which is then
    /// renamed into place, so a crash never leaves a half-written date.
    pub fn store(&self, snapshot: &NetworkSnapshot) -> Result<()> {
        let dir = self.snapshot_dir(snapshot.date);
        let scratch = self.snapshots_dir().join(format!(".{}.partial", snapshot.date));
        if scratch.exists() {
            fs::remove_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
        }
        fs::create_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;

        let mut table = Vec::new();
        snapshot.table.write_csv(&mut table)?;
        let layout = to_json(&snapshot.layout_file())?;
        let model = to_json(&StoredModel {
            horizon: snapshot.table.horizon,
            summary: snapshot.model_summary.clone(),
        })?;
        let mut checksums = BTreeMap::new();
        for (name, bytes) in [(TABLE_FILE, &table), (LAYOUT_FILE, &layout), (MODEL_FILE, &model)] {
            checksums.insert(name.to_string(), sha256_hex(bytes));
            write_file(&scratch.join(name), bytes)?;
        }
        let meta = to_json(&MetaFile {
            meta: snapshot.meta.clone(),
            checksums,
        })?;
        write_file(&scratch.join(META_FILE), &meta)?;

        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::rename(&scratch, &dir).map_err(|e| Error::io(&dir, e))
    }

    pub fn load_meta(&self, date: Date) -> Result<SnapshotMeta> {
        Ok(self.read_meta_file(date)?.meta)
    }

    fn read_meta_file(&self, date: Date) -> Result<MetaFile> {
        if !self.exists(date) {
            return Err(Error::SnapshotNotFound(date));
        }
        let path = self.snapshot_dir(date).join(META_FILE);
        let bytes = read_file(&path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::json(&path, e))
    }

    /// Reads a snapshot back, verifying every checksum.
    pub fn load(&self, date: Date) -> Result<NetworkSnapshot> {
        let MetaFile { meta, checksums } = self.read_meta_file(date)?;
        let dir = self.snapshot_dir(date);
        let read_checked = |name: &str| -> Result<Vec<u8>> {
            let path = dir.join(name);
            let bytes = read_file(&path)?;
            match checksums.get(name) {
                Some(sum) if *sum == sha256_hex(&bytes) => Ok(bytes),
                _ => Err(Error::Checksum(path)),
            }
        };
        let table_bytes = read_checked(TABLE_FILE)?;
        let layout_bytes = read_checked(LAYOUT_FILE)?;
        let model_bytes = read_checked(MODEL_FILE)?;

        let table = ConnectednessTable::read_csv(table_bytes.as_slice(), horizon_of(&model_bytes, &dir)?)?;
        let layout_path = dir.join(LAYOUT_FILE);
        let layout: LayoutFile =
            serde_json::from_slice(&layout_bytes).map_err(|e| Error::json(&layout_path, e))?;
        let model_path = dir.join(MODEL_FILE);
        let stored: StoredModel =
            serde_json::from_slice(&model_bytes).map_err(|e| Error::json(&model_path, e))?;
        let positions = layout.ordered(&table.firms)?;
        Ok(NetworkSnapshot {
            date,
            table,
            positions,
            model_summary: stored.summary,
            meta,
        })
    }

    /// Records firm attributes for later rendering.
    pub fn store_firms(&self, firms: &[FirmMeta]) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        write_file(&self.root.join(FIRMS_FILE), &to_json(&firms)?)
    }

    pub fn load_firms(&self) -> Result<Option<Vec<FirmMeta>>> {
        let path = self.root.join(FIRMS_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let bytes = read_file(&path)?;
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| Error::json(&path, e))
    }
}

/// The model file carries the forecast horizon alongside the summary so the
/// table can be rebuilt without the configuration.
#[derive(Serialize, Deserialize)]
struct StoredModel {
    horizon: usize,
    #[serde(flatten)]
    summary: ModelSummary,
}

fn horizon_of(model_bytes: &[u8], dir: &Path) -> Result<usize> {
    let path = dir.join(MODEL_FILE);
    let stored: StoredModel = serde_json::from_slice(model_bytes).map_err(|e| Error::json(&path, e))?;
    Ok(stored.horizon)
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json("<memory>", e))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotStatus {
    Computed,
    Reused,
    Degraded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowFailure {
    pub date: Date,
    pub message: String,
    /// False when no earlier snapshot existed to carry forward.
    pub carried_forward: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineReport {
    pub computed: Vec<Date>,
    pub reused: Vec<Date>,
    pub failures: Vec<WindowFailure>,
}

impl PipelineReport {
    pub fn snapshots(&self) -> usize {
        self.computed.len() + self.reused.len() + self.failures.iter().filter(|f| f.carried_forward).count()
    }

    pub fn failure_summary(&self) -> String {
        if self.failures.is_empty() {
            return "no failed windows".to_string();
        }
        let mut s = format!("{} failed window(s):", self.failures.len());
        for f in &self.failures {
            s.push_str(&format!("\n  {}: {}", f.date, f.message));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Estimate tables of several windows at once.
    pub parallel: bool,
    /// Windows estimated per batch before their layouts are run.
    pub batch_size: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            parallel: true,
            batch_size: 32,
        }
    }
}

struct Estimate {
    table: ConnectednessTable,
    summary: ModelSummary,
}

fn estimate_window(
    panel: &VolatilityPanel,
    start: usize,
    end: usize,
    cfg: &RollingConfig,
) -> Result<Estimate> {
    let window = panel.values().slice(ndarray::s![start..=end, ..]);
    let model = fit_var(window, &cfg.var_options())?;
    let table = connectedness(&model, panel.firms(), cfg.horizon)?;
    Ok(Estimate {
        table,
        summary: ModelSummary::from_model(&model),
    })
}

/// Runs every window of the panel, storing one snapshot per terminal date.
///
/// Dates already in the store under the same configuration hash are reused
/// instead of recomputed. `on_snapshot` is called once per window in date
/// order.
pub fn run_pipeline(
    panel: &VolatilityPanel,
    meta: Option<&[FirmMeta]>,
    cfg: &RollingConfig,
    store: &SnapshotStore,
    options: PipelineOptions,
    mut on_snapshot: impl FnMut(&NetworkSnapshot, SnapshotStatus),
) -> Result<PipelineReport> {
    cfg.validate()?;
    if let Some(meta) = meta {
        for firm in panel.firms() {
            if !meta.iter().any(|m| &m.ticker == firm) {
                return Err(Error::MissingMetadata(firm.clone()));
            }
        }
        let used: Vec<FirmMeta> = panel
            .firms()
            .iter()
            .filter_map(|f| meta.iter().find(|m| &m.ticker == f).cloned())
            .collect();
        store.store_firms(&used)?;
    }
    let windows = enumerate_windows(panel.n_dates(), cfg.window_length)?;
    let dates = panel.dates();
    let hash = cfg.config_hash();
    let params = cfg.layout_params();

    let reusable = |date: Date| -> Option<NetworkSnapshot> {
        let m = store.load_meta(date).ok()?;
        if m.config_hash != hash || m.version != STORE_VERSION {
            return None;
        }
        store.load(date).ok()
    };

    let mut report = PipelineReport::default();
    let mut previous: Option<NetworkSnapshot> = None;
    let batch = options.batch_size.max(1);

    for chunk in windows.chunks(batch) {
        let stored: Vec<Option<NetworkSnapshot>> =
            chunk.iter().map(|&(_, end)| reusable(dates[end])).collect();
        let work = |(k, &(start, end)): (usize, &(usize, usize))| {
            stored[k]
                .is_none()
                .then(|| estimate_window(panel, start, end, cfg))
        };
        let estimates: Vec<Option<Result<Estimate>>> = if options.parallel {
            chunk.par_iter().enumerate().map(work).collect()
        } else {
            chunk.iter().enumerate().map(work).collect()
        };

        for ((&(start, end), stored), estimate) in chunk.iter().zip(stored).zip(estimates) {
            let date = dates[end];
            if let Some(snapshot) = stored {
                report.reused.push(date);
                on_snapshot(&snapshot, SnapshotStatus::Reused);
                previous = Some(snapshot);
                continue;
            }
            let base = SnapshotMeta {
                version: STORE_VERSION,
                date,
                config_hash: hash.clone(),
                window_start: dates[start],
                window_end: date,
                degraded: false,
                failure: None,
                seed: None,
                seeded_from: None,
                initial_fingerprint: String::new(),
                final_fingerprint: String::new(),
                layout_converged_at: None,
            };
            match estimate.expect("estimated when not reused") {
                Ok(est) => {
                    let (initial, seed, seeded_from) = match &previous {
                        Some(p) => (InitialPositions::Given(p.positions.clone()), None, Some(p.date)),
                        None => (InitialPositions::Random { seed: cfg.seed }, Some(cfg.seed), None),
                    };
                    let graph = edges_from_table(&est.table, cfg.degrees);
                    let layout = run_layout(&graph, &params, initial)?;
                    let snapshot = NetworkSnapshot {
                        date,
                        table: est.table,
                        meta: SnapshotMeta {
                            seed,
                            seeded_from,
                            initial_fingerprint: positions_fingerprint(&layout.initial_positions),
                            final_fingerprint: positions_fingerprint(&layout.positions),
                            layout_converged_at: layout.converged_at,
                            ..base
                        },
                        positions: layout.positions,
                        model_summary: est.summary,
                    };
                    store.store(&snapshot)?;
                    report.computed.push(date);
                    on_snapshot(&snapshot, SnapshotStatus::Computed);
                    previous = Some(snapshot);
                }
                Err(e) => {
                    let message = e.to_string();
                    let Some(p) = &previous else {
                        report.failures.push(WindowFailure {
                            date,
                            message,
                            carried_forward: false,
                        });
                        continue;
                    };
                    let fingerprint = positions_fingerprint(&p.positions);
                    let snapshot = NetworkSnapshot {
                        date,
                        table: p.table.clone(),
                        positions: p.positions.clone(),
                        model_summary: ModelSummary::empty(),
                        meta: SnapshotMeta {
                            degraded: true,
                            failure: Some(message.clone()),
                            seeded_from: Some(p.date),
                            initial_fingerprint: fingerprint.clone(),
                            final_fingerprint: fingerprint,
                            ..base
                        },
                    };
                    store.store(&snapshot)?;
                    report.failures.push(WindowFailure {
                        date,
                        message,
                        carried_forward: true,
                    });
                    on_snapshot(&snapshot, SnapshotStatus::Degraded);
                    previous = Some(snapshot);
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn day(i: usize) -> Date {
        Date::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Days::new(i as u64)
    }

    fn small_panel(t: usize, n: usize, seed: u64) -> VolatilityPanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Array2::zeros((t, n));
        for r in 0..t {
            for j in 0..n {
                let prev = if r > 0 { values[[r - 1, j]] } else { -8.0 };
                let spill = if r > 0 && j > 0 {
                    0.2 * (values[[r - 1, j - 1]] + 8.0)
                } else {
                    0.0
                };
                values[[r, j]] = -8.0 + 0.5 * (prev + 8.0) + spill + rng.random_range(-1.0..1.0);
            }
        }
        VolatilityPanel::new(
            (0..t).map(day).collect(),
            (0..n).map(|j| format!("F{j}")).collect(),
            values,
        )
        .unwrap()
    }

    fn quick_config() -> RollingConfig {
        RollingConfig {
            window_length: 30,
            lags: 1,
            folds: 5,
            lambda_count: 20,
            layout_iterations: 40,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn window_counts() {
        assert_eq!(enumerate_windows(100, 100).unwrap(), vec![(0, 99)]);
        let w = enumerate_windows(300, 100).unwrap();
        assert_eq!(w.len(), 201);
        for pair in w.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            assert_eq!((b.0, b.1), (a.0 + 1, a.1 + 1));
            assert_eq!(a.1 - b.0 + 1, 99);
        }
        assert!(enumerate_windows(99, 100).is_err());
    }

    #[test]
    fn config_problems_are_listed_together() {
        let cfg = RollingConfig {
            alpha: 1.5,
            horizon: 0,
            window_length: 3,
            lags: 3,
            ..Default::default()
        };
        let p = cfg.problems();
        assert!(p.iter().any(|m| m.contains("alpha must lie in (0, 1]")));
        assert!(p.iter().any(|m| m.contains("horizon")));
        assert!(p.iter().any(|m| m.contains("must exceed lags")));
        assert!(RollingConfig::default().validate().is_ok());
        assert!(RollingConfig {
            alpha: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = RollingConfig::default();
        let b = RollingConfig {
            seed: 1,
            ..Default::default()
        };
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash(), RollingConfig::default().config_hash());
    }

    #[test]
    fn median_of_counts() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn single_window_starts_from_seed() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::new(dir.path());
        let panel = small_panel(30, 3, 1);
        let cfg = quick_config();
        let report = run_pipeline(&panel, None, &cfg, &store, PipelineOptions::default(), |_, _| {}).unwrap();
        assert_eq!(report.computed.len(), 1);
        let snap = store.load(day(29)).unwrap();
        assert_eq!(snap.meta.seed, Some(11));
        assert_eq!(snap.meta.seeded_from, None);
        assert_eq!(snap.meta.window_start, day(0));
        snap.check_invariants().unwrap();
    }

    #[test]
    fn store_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::new(dir.path());
        let panel = small_panel(32, 3, 2);
        let mut seen = Vec::new();
        run_pipeline(
            &panel,
            None,
            &quick_config(),
            &store,
            PipelineOptions::default(),
            |s, _| seen.push(s.clone()),
        )
        .unwrap();
        assert_eq!(store.dates().unwrap(), vec![day(29), day(30), day(31)]);
        for s in &seen {
            assert_eq!(&store.load(s.date).unwrap(), s);
        }
        assert!(matches!(store.load(day(5)), Err(Error::SnapshotNotFound(_))));

        let layout = store.snapshot_dir(day(30)).join(LAYOUT_FILE);
        let mut text = fs::read_to_string(&layout).unwrap();
        text = text.replacen('1', "2", 1);
        fs::write(&layout, text).unwrap();
        assert!(matches!(store.load(day(30)), Err(Error::Checksum(_))));
    }

    #[test]
    fn layouts_continue_from_previous_day() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::new(dir.path());
        let panel = small_panel(35, 3, 3);
        run_pipeline(
            &panel,
            None,
            &quick_config(),
            &store,
            PipelineOptions::default(),
            |_, _| {},
        )
        .unwrap();
        let snaps: Vec<_> = store
            .dates()
            .unwrap()
            .into_iter()
            .map(|d| store.load(d).unwrap())
            .collect();
        for pair in snaps.windows(2) {
            assert_eq!(pair[1].meta.seeded_from, Some(pair[0].date));
            assert_eq!(pair[1].meta.initial_fingerprint, pair[0].meta.final_fingerprint);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let panel = small_panel(36, 3, 4);
        let cfg = quick_config();
        let run = |options| {
            let dir = tempfile::tempdir().unwrap();
            let store = SnapshotStore::new(dir.path());
            let mut out = Vec::new();
            run_pipeline(&panel, None, &cfg, &store, options, |s, _| out.push(s.clone())).unwrap();
            out
        };
        let seq = run(PipelineOptions {
            parallel: false,
            batch_size: 1,
        });
        let par = run(PipelineOptions {
            parallel: true,
            batch_size: 4,
        });
        assert_eq!(seq, par);
    }

    #[test]
    fn failed_window_carries_previous_forward() {
        let mut panel = small_panel(33, 3, 5);
        // A NaN-free but degenerate window: firm 0 frozen at the end makes
        // its residual variance vanish in the last window only.
        let values = panel.values().clone();
        let mut v = values.clone();
        for r in 3..33 {
            v[[r, 0]] = 1.0;
        }
        panel = VolatilityPanel::new(panel.dates().to_vec(), panel.firms().to_vec(), v).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::new(dir.path());
        let report = run_pipeline(
            &panel,
            None,
            &quick_config(),
            &store,
            PipelineOptions::default(),
            |_, _| {},
        )
        .unwrap();
        // The first windows still see variation in firm 0; later ones do not.
        assert!(!report.computed.is_empty(), "{}", report.failure_summary());
        assert!(!report.failures.is_empty());
        assert!(report.failures.iter().all(|f| f.carried_forward));
        let last = store.load(day(32)).unwrap();
        assert!(last.meta.degraded);
        let prev = store.load(last.meta.seeded_from.unwrap()).unwrap();
        assert_eq!(last.positions, prev.positions);
        assert_eq!(last.table, prev.table);
    }

    #[test]
    fn missing_metadata_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::new(dir.path());
        let panel = small_panel(30, 2, 6);
        let err = run_pipeline(
            &panel,
            Some(&[]),
            &quick_config(),
            &store,
            PipelineOptions::default(),
            |_, _| {},
        );
        assert!(matches!(err, Err(Error::MissingMetadata(_))));
    }
}
