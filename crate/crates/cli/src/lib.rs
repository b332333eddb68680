//! `spillnet` command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid arguments, configuration or
//! input data, 2 for failures while running a valid request.

pub mod config;
pub mod error;
pub mod event;
pub mod render;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use spillnet::fevd::Measure;
use spillnet::ingest::{
    apply_calendar, filter_universe, impute_and_log, load_calendar, load_meta, load_ohlc, variance_panel,
    write_diagnostics, FilterRules, OhlcSchema, MAX_FILL_RUN,
};
use spillnet::rolling::{run_pipeline, PipelineOptions, SnapshotStatus, SnapshotStore};
use spillnet::{Date, RollingConfig, VolatilityPanel};

use crate::config::{parse_degrees, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::render::{
    attributes_from_csv, attributes_from_meta, parse_palette, Attributes, ColorBy, RenderSpec, SizeBy,
};

/// Environment variable read when `--store` is not given.
pub const STORE_ENV: &str = "SPILLNET_STORE";

#[derive(Debug, Parser)]
#[command(
    name = "spillnet",
    version,
    about = "Volatility-connectedness networks from daily OHLC panels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean raw OHLC data into a log-volatility panel.
    Clean(CleanArgs),
    /// Estimate every rolling window and store the snapshots.
    Run(RunArgs),
    /// Draw one snapshot as SVG and DOT.
    Render(RenderArgs),
    /// Compare snapshots across event dates.
    Diff(DiffArgs),
    /// Print a stored connectedness table, or list stored dates.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Snapshot store directory.
    #[arg(long, env = STORE_ENV)]
    pub store: PathBuf,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Long-format OHLC file (date,ticker,open,high,low,close,volume).
    #[arg(long)]
    pub ohlc: PathBuf,
    /// Firm metadata file.
    #[arg(long)]
    pub meta: PathBuf,
    /// Trading calendar, one ISO date per line.
    #[arg(long)]
    pub calendar: PathBuf,
    /// Output panel file.
    #[arg(long)]
    pub out: PathBuf,
    /// Diagnostics file [default: <out> with `.diagnostics.csv` appended].
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub keep_b_shares: bool,
    #[arg(long)]
    pub keep_dual_listings: bool,
    /// Longest run of missing days filled by carrying the last value forward.
    #[arg(long, default_value_t = MAX_FILL_RUN)]
    pub max_fill_run: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Panel written by `clean`.
    #[arg(long)]
    pub panel: PathBuf,
    #[command(flatten)]
    pub store: StoreArg,
    /// Configuration file; flags below take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Firm metadata, copied into the store for rendering.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Layout iterations per day.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Fixed penalty instead of cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seed of the first day's random layout.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `published`, `neighbours` or an integer.
    #[arg(long)]
    pub degrees: Option<String>,
    /// Estimate windows one at a time.
    #[arg(long)]
    pub sequential: bool,
    /// Print the effective configuration file and exit.
    #[arg(long)]
    pub dump_config: bool,
    /// Only print the final summary.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long)]
    pub date: Date,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// `region`, `state_owned` or `column:<name>`.
    #[arg(long, default_value = "region")]
    pub color_by: ColorBy,
    /// `to`, `from`, `net` or `uniform`.
    #[arg(long, default_value = "to")]
    pub size_by: SizeBy,
    #[arg(long, default_value_t = 0.1)]
    pub size_scale: f64,
    #[arg(long)]
    pub labels: bool,
    #[arg(long)]
    pub edges: bool,
    /// Extra colours as `category=colour,...`.
    #[arg(long)]
    pub palette: Option<String>,
    /// Metadata file [default: the metadata stored by `run`].
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long)]
    pub before: Date,
    #[arg(long)]
    pub after: Date,
    /// Intermediate dates, in order.
    #[arg(long)]
    pub during: Vec<Date>,
    /// OHLC file for closing-price directions.
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Subset of to,from,net,price_direction.
    #[arg(long, value_delimiter = ',', default_value = "to,from,net")]
    pub measures: Vec<String>,
    /// Per-firm CSV output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Largest movers listed per measure.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub store: StoreArg,
    /// Date to print; lists stored dates when absent.
    #[arg(long)]
    pub date: Option<Date>,
    /// Print snapshot metadata and aggregates instead of the table.
    #[arg(long)]
    pub summary: bool,
}

/// Parses `args` and runs the command, returning the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Clean(a) => cmd_clean(&a, out),
        Command::Run(a) => cmd_run(&a, out, err),
        Command::Render(a) => cmd_render(&a, out),
        Command::Diff(a) => cmd_diff(&a, out),
        Command::Inspect(a) => cmd_inspect(&a, out),
    }
}

fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

pub fn cmd_clean(a: &CleanArgs, out: &mut dyn Write) -> CliResult<()> {
    let loaded = load_ohlc(&a.ohlc, &OhlcSchema::default())?;
    let meta = load_meta(&a.meta)?;
    let calendar = load_calendar(&a.calendar)?;
    let rules = FilterRules {
        drop_b_shares: !a.keep_b_shares,
        dedupe_dual_listings: !a.keep_dual_listings,
    };
    let universe = filter_universe(&loaded.series, &meta, &rules)?;
    let aligned = apply_calendar(&universe.series, &calendar)?;
    let raw = variance_panel(&aligned);
    let imputed = impute_and_log(&raw, a.max_fill_run)?;

    create_parent(&a.out)?;
    imputed.panel.save(&a.out)?;
    let mut diagnostics = loaded.rejects;
    diagnostics.extend(universe.exclusions);
    diagnostics.extend(aligned.flagged);
    diagnostics.extend(imputed.dropped);
    let report = a.report.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".diagnostics.csv");
        p.into()
    });
    create_parent(&report)?;
    let file = fs::File::create(&report)?;
    write_diagnostics(&diagnostics, file)?;

    let p = &imputed.panel;
    writeln!(
        out,
        "panel: {} dates x {} firms -> {}",
        p.n_dates(),
        p.n_firms(),
        a.out.display()
    )?;
    writeln!(
        out,
        "filled cells: {}, clamped estimates: {}",
        imputed.filled, raw.clamped
    )?;
    for d in &diagnostics {
        writeln!(out, "{}: {} ({})", d.ticker, d.rule, d.detail)?;
    }
    writeln!(out, "diagnostics: {} -> {}", diagnostics.len(), report.display())?;
    Ok(())
}

/// Defaults, then the configuration file, then flags.
pub fn effective_config(a: &RunArgs) -> CliResult<RollingConfig> {
    let mut cfg = RollingConfig::default();
    if let Some(path) = &a.config {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        ConfigFile::parse(&text)?.apply(&mut cfg)?;
    }
    if let Some(v) = a.window {
        cfg.window_length = v;
    }
    if let Some(v) = a.lags {
        cfg.lags = v;
    }
    if let Some(v) = a.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.folds {
        cfg.folds = v;
    }
    if let Some(v) = a.iterations {
        cfg.layout_iterations = v;
    }
    if a.lambda.is_some() {
        cfg.lambda = a.lambda;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(d) = &a.degrees {
        cfg.degrees = parse_degrees(d)?;
    }
    Ok(cfg)
}

fn format_medians(m: &[f64]) -> String {
    if m.is_empty() {
        return "-".into();
    }
    m.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("/")
}

pub fn cmd_run(a: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = effective_config(a)?;
    if a.dump_config {
        write!(out, "{}", ConfigFile::from_config(&cfg).to_text())?;
        return Ok(());
    }
    cfg.validate()?;
    let panel = VolatilityPanel::load(&a.panel)?;
    let meta = a.meta.as_ref().map(load_meta).transpose()?;
    let store = SnapshotStore::new(&a.store.store);
    let options = PipelineOptions {
        parallel: !a.sequential,
        ..Default::default()
    };
    let mut write_failed = None;
    let report = run_pipeline(&panel, meta.as_deref(), &cfg, &store, options, |snap, status| {
        if a.quiet || write_failed.is_some() {
            return;
        }
        let status = match status {
            SnapshotStatus::Computed => "computed",
            SnapshotStatus::Reused => "reused",
            SnapshotStatus::Degraded => "degraded",
        };
        if let Err(e) = writeln!(
            out,
            "{} total={:.4} median_nonzero={} {}",
            snap.date,
            snap.table.total,
            format_medians(&snap.model_summary.median_nonzero_per_lag),
            status
        ) {
            write_failed = Some(e);
        }
    })?;
    if let Some(e) = write_failed {
        return Err(e.into());
    }
    writeln!(
        out,
        "{} snapshots: {} computed, {} reused, {} failed",
        report.snapshots(),
        report.computed.len(),
        report.reused.len(),
        report.failures.len()
    )?;
    if !report.failures.is_empty() {
        writeln!(err, "{}", report.failure_summary())?;
    }
    Ok(())
}

fn load_attributes(meta: Option<&PathBuf>, store: &SnapshotStore) -> CliResult<Option<Attributes>> {
    if let Some(path) = meta {
        let file =
            fs::File::open(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        return attributes_from_csv(file).map(Some);
    }
    Ok(store.load_firms()?.map(|m| attributes_from_meta(&m)))
}

fn require_snapshot(store: &SnapshotStore, date: Date) -> CliResult<()> {
    if store.exists(date) {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "no snapshot for {date} in {}",
            store.root().display()
        )))
    }
}

pub fn cmd_render(a: &RenderArgs, out: &mut dyn Write) -> CliResult<()> {
    let store = SnapshotStore::new(&a.store.store);
    require_snapshot(&store, a.date)?;
    let snapshot = store.load(a.date)?;
    let attrs = load_attributes(a.meta.as_ref(), &store)?
        .ok_or_else(|| CliError::validation("no firm metadata: pass --meta or run with --meta first"))?;
    let spec = RenderSpec {
        color_by: a.color_by.clone(),
        size_by: a.size_by,
        size_scale: a.size_scale,
        label_nodes: a.labels,
        palette: a
            .palette
            .as_deref()
            .map(parse_palette)
            .transpose()?
            .unwrap_or_default(),
        draw_edges: a.edges,
    };
    let rendered = render::render(&snapshot, &attrs, &spec)?;
    fs::create_dir_all(&a.out)?;
    let svg = a.out.join(format!("{}.svg", a.date));
    let dot = a.out.join(format!("{}.dot", a.date));
    fs::write(&svg, rendered.svg)?;
    fs::write(&dot, rendered.dot)?;
    writeln!(out, "{}\n{}", svg.display(), dot.display())?;
    Ok(())
}

pub fn cmd_diff(a: &DiffArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut measures = Vec::new();
    let mut want_price = false;
    for m in &a.measures {
        match m.trim() {
            "to" => measures.push(Measure::To),
            "from" => measures.push(Measure::From),
            "net" => measures.push(Measure::Net),
            "price_direction" => want_price = true,
            other => {
                return Err(CliError::validation(format!(
                    "unknown measure `{other}` (expected to, from, net, price_direction)"
                )))
            }
        }
    }
    if want_price && a.prices.is_none() {
        return Err(CliError::validation("price_direction needs --prices"));
    }
    let store = SnapshotStore::new(&a.store.store);
    let mut dates = vec![a.before];
    dates.extend(&a.during);
    dates.push(a.after);
    let attrs = load_attributes(a.meta.as_ref(), &store)?;
    let prices = match &a.prices {
        Some(p) => Some(load_ohlc(p, &OhlcSchema::default())?.series),
        None => None,
    };
    let report = event::event_study(&store, &dates, attrs.as_ref(), prices.as_ref())?;
    write!(out, "{}", report.to_text(&measures, a.top))?;
    if let Some(path) = &a.csv {
        create_parent(path)?;
        report.write_csv(attrs.as_ref(), fs::File::create(path)?)?;
    }
    Ok(())
}

pub fn cmd_inspect(a: &InspectArgs, out: &mut dyn Write) -> CliResult<()> {
    let store = SnapshotStore::new(&a.store.store);
    let Some(date) = a.date else {
        for d in store.dates()? {
            writeln!(out, "{d}")?;
        }
        return Ok(());
    };
    require_snapshot(&store, date)?;
    let snap = store.load(date)?;
    if !a.summary {
        snap.table.write_csv(out)?;
        return Ok(());
    }
    let m = &snap.meta;
    writeln!(out, "date: {}", m.date)?;
    writeln!(out, "window: {} .. {}", m.window_start, m.window_end)?;
    writeln!(out, "config: {}", m.config_hash)?;
    writeln!(out, "degraded: {}", m.degraded)?;
    if let Some(f) = &m.failure {
        writeln!(out, "failure: {f}")?;
    }
    writeln!(out, "total connectedness: {:.4}", snap.table.total)?;
    writeln!(
        out,
        "median non-zero per lag: {}",
        format_medians(&snap.model_summary.median_nonzero_per_lag)
    )?;
    writeln!(out, "firm,to,from,net")?;
    for (i, f) in snap.table.firms.iter().enumerate() {
        writeln!(
            out,
            "{f},{:.4},{:.4},{:.4}",
            snap.table.to_others[i], snap.table.from_others[i], snap.table.net[i]
        )?;
    }
    Ok(())
}
