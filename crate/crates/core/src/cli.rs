//! Command-line pipeline: `ingest`, `synth`, `stability`, `bounds`, `report`.
//!
//! Stages exchange JSON artifacts on disk. Every artifact is a pure function
//! of its inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identification::{compute_bounds, BoundsOptions, BoundsReport, ShareDenominator};
use crate::ingest::{ingest, IngestConfig, ModelChoice};
use crate::model::{MarketDocument, MarriageMarket, SCHEMA_VERSION};
use crate::oracle::generate_stable_market;
use crate::stability::{adjust_incomes, solve_stability_indices, ModelKind, NonlaborMode, SolveSettings, SplitMode, StabilityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_MISSING_FILE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "stablehh", version, about = "Stability tests and intrahousehold bounds for marriage markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build market JSON from agent and household CSV files.
    Ingest(IngestArgs),
    /// Generate a synthetic market that is stable by construction.
    Synth(SynthArgs),
    /// Solve the stability-index programs.
    Stability(StabilityArgs),
    /// Bound private shares and sharing rules on the adjusted data.
    Bounds(BoundsArgs),
    /// Print summary tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Jc,
    Spc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Fixed,
    Endogenous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenominatorArg {
    FullIncome,
    Expenditure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NonlaborArg {
    Band,
    Half,
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    #[arg(long, value_enum, default_value = "jc")]
    pub model: ModelArg,
    /// Under sole custody, also deduct the man's own transfer.
    #[arg(long)]
    pub binding: bool,
}

impl ModelFlags {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            ModelArg::Jc => ModelKind::JointCustody,
            ModelArg::Spc => ModelKind::SoleCustody { binding: self.binding },
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub agents: PathBuf,
    #[arg(long)]
    pub households: PathBuf,
    /// JSON ingest configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub couples: usize,
    #[arg(long, default_value_t = 0)]
    pub singles: usize,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long, value_enum, default_value = "fixed")]
    pub split: SplitArg,
    #[arg(long)]
    pub market: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-option CSV mirror of the report.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub market: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Full bounds reports as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Writes `(wage_ratio, lower, upper)` rows for the sharing rule.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full-income")]
    pub denominator: DenominatorArg,
    /// Non-labour split used when recomputing the allocation set.
    #[arg(long, value_enum, default_value = "band")]
    pub nonlabor: NonlaborArg,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub stability: PathBuf,
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Stability reports for every market of a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityDocument {
    pub schema_version: u32,
    pub reports: Vec<StabilityReport>,
}

/// One line of `bounds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub couple_id: String,
    pub target: String,
    pub lower: f64,
    pub upper: f64,
    pub naive_lower: f64,
    pub naive_upper: f64,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_FILE,
        Error::Validation(_)
        | Error::InvalidInput(_)
        | Error::ModelMismatch(_)
        | Error::InconsistentRegion(..)
        | Error::EmptyMarket(_)
        | Error::Csv(_)
        | Error::Json(_) => EXIT_VALIDATION,
        Error::Solver(_) | Error::ModelError(_) | Error::AdjustmentError(_) => EXIT_SOLVER,
        _ => EXIT_OTHER,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_OTHER } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                Error::Validation(v) => {
                    eprintln!("error: market failed validation ({} violations)", v.len());
                    for x in v {
                        eprintln!("  - {x}");
                    }
                }
                _ => eprintln!("error: {e}"),
            }
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => run_ingest(&a),
        Command::Synth(a) => run_synth(&a),
        Command::Stability(a) => run_stability(&a),
        Command::Bounds(a) => run_bounds(&a),
        Command::Report(a) => run_report(&a),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

fn read_markets(path: &Path) -> Result<MarketDocument> {
    let doc: MarketDocument = read_json(path)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "{}: schema version {} (expected {SCHEMA_VERSION})",
            path.display(),
            doc.schema_version
        )));
    }
    Ok(doc)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

/// Runs `f` on every market, in parallel across markets, keeping input order.
fn per_market<R: Send>(markets: &[MarriageMarket], jobs: usize, f: impl Fn(&MarriageMarket) -> Result<R> + Sync) -> Result<Vec<R>> {
    pool(jobs)?.install(|| markets.par_iter().map(&f).collect())
}

fn run_ingest(a: &IngestArgs) -> Result<()> {
    let mut config: IngestConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => IngestConfig::default(),
    };
    if let Some(m) = a.model {
        config.model = match m {
            ModelArg::Jc => ModelChoice::Jc,
            ModelArg::Spc => ModelChoice::Spc,
        };
    }
    let doc = ingest(open(&a.agents)?, open(&a.households)?, &config)?;
    match &a.out {
        Some(p) => write_json(p, &doc),
        None => {
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            std::io::stdout()
                .write_all(s.as_bytes())
                .map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    if a.couples == 0 {
        return Err(Error::InvalidInput("--couples must be at least 1".into()));
    }
    let (market, truth) = generate_stable_market(a.seed, a.couples, a.singles, a.model.kind());
    write_json(&a.out, &MarketDocument::new(vec![market]))?;
    if let Some(p) = &a.truth {
        write_json(p, &truth)?;
    }
    Ok(())
}

fn run_stability(a: &StabilityArgs) -> Result<()> {
    let settings = SolveSettings::from_env()?;
    let doc = read_markets(&a.market)?;
    let split = match a.split {
        SplitArg::Fixed => SplitMode::Fixed5050,
        SplitArg::Endogenous => SplitMode::Endogenous,
    };
    let model = a.model.kind();
    let reports = per_market(&doc.markets, a.jobs, |m| solve_stability_indices(m, model, split, &settings))?;
    let out = StabilityDocument {
        schema_version: SCHEMA_VERSION,
        reports,
    };
    write_json(&a.out, &out)?;
    if let Some(p) = &a.csv {
        write_bytes(p, &stability_csv(&out)?)?;
    }
    Ok(())
}

pub fn stability_csv(doc: &StabilityDocument) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["region", "model", "option", "kind", "index", "income", "loss"])?;
    for r in &doc.reports {
        for o in &r.options {
            let kind = match o.kind {
                crate::stability::RowKind::IndividualRationality => "ir",
                crate::stability::RowKind::NoBlockingPair => "nbp",
            };
            w.write_record([
                r.region.clone(),
                r.model.label().to_string(),
                o.option.to_string(),
                kind.to_string(),
                o.index.to_string(),
                o.income.to_string(),
                o.loss.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

fn same_family(a: ModelKind, b: ModelKind) -> bool {
    matches!(
        (a, b),
        (ModelKind::JointCustody, ModelKind::JointCustody) | (ModelKind::SoleCustody { .. }, ModelKind::SoleCustody { .. })
    )
}

fn run_bounds(a: &BoundsArgs) -> Result<()> {
    let settings = SolveSettings::from_env()?;
    let doc = read_markets(&a.market)?;
    let stab: StabilityDocument = read_json(&a.report)?;
    let model = a.model.kind();
    let by_region: BTreeMap<&str, &StabilityReport> = stab.reports.iter().map(|r| (r.region.as_str(), r)).collect();
    let opts = BoundsOptions {
        nonlabor: match a.nonlabor {
            NonlaborArg::Band => NonlaborMode::Band,
            NonlaborArg::Half => NonlaborMode::Half,
        },
        denominator: match a.denominator {
            DenominatorArg::FullIncome => ShareDenominator::FullIncome,
            DenominatorArg::Expenditure => ShareDenominator::Expenditure,
        },
    };
    let reports = per_market(&doc.markets, a.jobs, |m| {
        let r = by_region
            .get(m.region.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("no stability report for market {}", m.region)))?;
        if !same_family(r.model, model) {
            return Err(Error::ModelMismatch(format!(
                "report for {} was solved under {}, bounds requested under {}",
                m.region,
                r.model.label(),
                model.label()
            )));
        }
        let adjusted = adjust_incomes(m, r, &settings)?;
        compute_bounds(&adjusted, r.model, opts, &settings)
    })?;
    write_bytes(&a.out, &bounds_csv(&reports)?)?;
    if let Some(p) = &a.json {
        write_json(p, &reports)?;
    }
    if let Some(p) = &a.emit_plot_data {
        write_bytes(p, &plot_csv(&reports)?)?;
    }
    Ok(())
}

pub fn bounds_rows(reports: &[BoundsReport]) -> Vec<BoundsRow> {
    let mut rows = Vec::new();
    for r in reports {
        for c in &r.couples {
            for (target, stable, naive) in [
                ("qw_share", c.qw_share, c.naive_qw),
                ("sharing_rule", c.sharing_rule, c.naive_sharing),
            ] {
                rows.push(BoundsRow {
                    couple_id: c.household_id.clone(),
                    target: target.to_string(),
                    lower: stable.lower,
                    upper: stable.upper,
                    naive_lower: naive.lower,
                    naive_upper: naive.upper,
                });
            }
        }
    }
    rows
}

pub fn bounds_csv(reports: &[BoundsReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in bounds_rows(reports) {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

fn plot_csv(reports: &[BoundsReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["couple_id", "wage_ratio", "lower", "upper"])?;
    for r in reports {
        for c in &r.couples {
            w.write_record([
                c.household_id.clone(),
                c.wage_ratio.to_string(),
                c.sharing_rule.lower.to_string(),
                c.sharing_rule.upper.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn read_bounds_csv(path: &Path) -> Result<Vec<BoundsRow>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    Ok(r.deserialize().collect::<std::result::Result<Vec<BoundsRow>, _>>()?)
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn minimum(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::NAN, f64::min)
}

/// Summary tables at four decimals.
pub fn render_report(stability: &StabilityDocument, bounds: Option<&[BoundsRow]>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Stability indices");
    let _ = writeln!(
        s,
        "{:<16} {:<12} {:<10} {:>8} {:>10} {:>10} {:>10} {:>10}",
        "market", "model", "split", "couples", "mean avg", "min avg", "mean min", "min min"
    );
    let mut all = Vec::new();
    for r in &stability.reports {
        let split = match r.split {
            SplitMode::Fixed5050 => "fixed",
            SplitMode::Endogenous => "endogenous",
        };
        let avg = r.couples.iter().map(|c| c.average_index);
        let min = r.couples.iter().map(|c| c.minimum_index);
        let _ = writeln!(
            s,
            "{:<16} {:<12} {:<10} {:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            r.region,
            r.model.label(),
            split,
            r.couples.len(),
            mean(avg.clone()),
            minimum(avg),
            mean(min.clone()),
            minimum(min)
        );
        all.extend(r.couples.iter().map(|c| (c.average_index, c.minimum_index)));
    }
    if stability.reports.len() > 1 {
        let _ = writeln!(
            s,
            "{:<16} {:<12} {:<10} {:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            "all",
            "",
            "",
            all.len(),
            mean(all.iter().map(|x| x.0)),
            minimum(all.iter().map(|x| x.0)),
            mean(all.iter().map(|x| x.1)),
            minimum(all.iter().map(|x| x.1))
        );
    }
    if let Some(rows) = bounds {
        let _ = writeln!(s);
        let _ = writeln!(s, "Bounds (means; difference in percentage points)");
        let _ = writeln!(
            s,
            "{:<14} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "target", "couples", "naive lower", "naive upper", "naive diff", "lower", "upper", "difference"
        );
        for target in ["qw_share", "sharing_rule"] {
            let t: Vec<&BoundsRow> = rows.iter().filter(|r| r.target == target).collect();
            if t.is_empty() {
                continue;
            }
            let _ = writeln!(
                s,
                "{:<14} {:>8} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
                target,
                t.len(),
                mean(t.iter().map(|r| r.naive_lower)),
                mean(t.iter().map(|r| r.naive_upper)),
                100.0 * mean(t.iter().map(|r| r.naive_upper - r.naive_lower)),
                mean(t.iter().map(|r| r.lower)),
                mean(t.iter().map(|r| r.upper)),
                100.0 * mean(t.iter().map(|r| r.upper - r.lower)),
            );
        }
    }
    s
}

fn run_report(a: &ReportArgs) -> Result<()> {
    let stability: StabilityDocument = read_json(&a.stability)?;
    let bounds = a.bounds.as_deref().map(read_bounds_csv).transpose()?;
    let text = render_report(&stability, bounds.as_deref());
    match &a.out {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            let mut out = BufWriter::new(std::io::stdout());
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}
