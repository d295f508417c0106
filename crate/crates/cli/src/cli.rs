use std::fs;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use softsnap_core::evaluation::{read_traces_csv, rmse_against_angles, write_report_csv};
use softsnap_core::io::{config_from_json, from_document_json, parse_angle_list, AngleListDocument, PatternDocument};
use softsnap_core::skeleton::DEFAULT_THETA_START;
use softsnap_core::{AngleUnits, SkeletonConfig};

use crate::api::{self, DesignRequest, SolveRequest, SweepRequest, SweepRow};

pub const DEFAULT_PORT: u16 = 8517;
pub const DEFAULT_DATA_DIR: &str = "softsnap-data";

#[derive(Debug, Parser)]
#[command(name = "softsnap", version, about = "Forward and inverse design of single-string soft modules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium shape for a pattern at one total string length.
    Solve(SolveArgs),
    /// Warm-started contraction sweep, written as CSV.
    Sweep(SweepArgs),
    /// Threading pattern that best reproduces target angles.
    Design(DesignArgs),
    /// RMSE of marker traces against a sweep.
    Evaluate(EvaluateArgs),
    /// Local HTTP service.
    Serve(ServeArgs),
    /// Print the stock module configuration.
    DefaultConfig(OutArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Skeleton configuration JSON; the stock module when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Threading pattern JSON (`{"offsets": [...]}`).
    #[arg(long)]
    pub pattern: PathBuf,
    /// Total string length, mm.
    #[arg(long)]
    pub target_length: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub pattern: PathBuf,
    /// Largest contraction, mm.
    #[arg(long)]
    pub contraction: f64,
    /// Contraction step, mm.
    #[arg(long, default_value_t = softsnap_core::forward::DEFAULT_SWEEP_STEP)]
    pub step: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Comma-separated target angles, or `@file.json` with an angle list document.
    #[arg(long, allow_hyphen_values = true)]
    pub target_angles: String,
    #[arg(long, default_value = "rad")]
    pub units: AngleUnits,
    #[arg(long, default_value_t = softsnap_core::inverse::DEFAULT_MAX_CANDIDATES)]
    pub max_candidates: usize,
    /// Runner-up patterns to include.
    #[arg(long, default_value_t = 0)]
    pub alternates: usize,
    /// Ranking worker threads; all cores when omitted.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Marker traces CSV (`step,ox,oy,ax,ay,x0,y0,...`).
    #[arg(long)]
    pub traces: PathBuf,
    /// Sweep CSV; each trace's step label names a `step_index`.
    #[arg(long)]
    pub sweep: PathBuf,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Additional `(step, rmse_mm)` CSV report.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub bind: IpAddr,
    /// Session store directory.
    #[arg(long, env = "SOFTSNAP_DATA_DIR", default_value = DEFAULT_DATA_DIR)]
    pub data_dir: PathBuf,
}

/// Exit status for a sweep that stopped before its full contraction.
pub const EXIT_PARTIAL: u8 = 3;

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve(args) => solve(args).map(|_| 0),
        Command::Sweep(args) => sweep(args),
        Command::Design(args) => design(args).map(|_| 0),
        Command::Evaluate(args) => evaluate(args).map(|_| 0),
        Command::Serve(args) => serve(args).map(|_| 0),
        Command::DefaultConfig(out) => emit(&out.out, &api::to_pretty_json(&SkeletonConfig::default())).map(|_| 0),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(arg: &ConfigArg) -> Result<SkeletonConfig> {
    match &arg.config {
        Some(path) => config_from_json(&read(path)?).with_context(|| format!("in {}", path.display())),
        None => Ok(SkeletonConfig::default()),
    }
}

fn load_pattern(path: &Path) -> Result<PatternDocument> {
    from_document_json(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
            Ok(())
        }
    }
}

fn solve(args: SolveArgs) -> Result<()> {
    let request = SolveRequest {
        config: Some(load_config(&args.config)?),
        pattern: load_pattern(&args.pattern)?,
        target_length: args.target_length,
        initial_alphas: None,
        session_id: None,
    };
    let response = api::solve(&request)?;
    emit(&args.out.out, &api::to_pretty_json(&response))
}

fn sweep(args: SweepArgs) -> Result<u8> {
    let request = SweepRequest {
        config: Some(load_config(&args.config)?),
        pattern: load_pattern(&args.pattern)?,
        contraction_max: args.contraction,
        step: args.step,
    };
    let problem = request.problem()?;
    let segments = problem.config.segment_count();
    let mut rows = Vec::new();
    let stopped = softsnap_core::sweep_contraction_each(&problem, request.contraction_max, request.step, |s| {
        rows.push(SweepRow::from(s));
        true
    })?;
    let mut buf = Vec::new();
    api::write_sweep_csv(&mut buf, segments, &rows)?;
    let text = String::from_utf8(buf).expect("csv output is utf-8");
    emit(&args.out.out, text.trim_end())?;
    match stopped {
        Some(stop) => {
            eprintln!(
                "sweep stopped at step {} ({} mm): {} [{}]",
                stop.step_index, stop.target_length, stop.message, stop.code
            );
            Ok(EXIT_PARTIAL)
        }
        None => Ok(0),
    }
}

fn design(args: DesignArgs) -> Result<()> {
    let target_alphas = match args.target_angles.strip_prefix('@') {
        Some(path) => {
            let doc: AngleListDocument = from_document_json(&read(Path::new(path))?)?;
            doc.radians()
        }
        None => parse_angle_list(&args.target_angles, args.units)?,
    };
    let request = DesignRequest {
        config: Some(load_config(&args.config)?),
        target_alphas,
        max_candidates: Some(args.max_candidates),
        rank_tolerance: None,
        alternates: args.alternates,
        workers: args.workers,
        session_id: None,
    };
    let response = api::design(&request)?;
    emit(&args.out.out, &api::to_pretty_json(&response))
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let traces = read_traces_csv(fs::File::open(&args.traces).with_context(|| format!("opening {}", args.traces.display()))?)?;
    let rows = api::read_sweep_csv(fs::File::open(&args.sweep).with_context(|| format!("opening {}", args.sweep.display()))?)?;
    let mut angle_sets = Vec::with_capacity(traces.len());
    for trace in &traces {
        let Some(row) = rows.iter().find(|r| r.step_index.to_string() == trace.step_label) else {
            bail!("trace step {:?} has no matching step_index in {}", trace.step_label, args.sweep.display());
        };
        angle_sets.push(row.alphas.as_slice());
    }
    let report = rmse_against_angles(&traces, &angle_sets, &cfg, DEFAULT_THETA_START)?;
    if let Some(path) = &args.csv {
        let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_report_csv(file, &report)?;
    }
    emit(&args.out, &api::to_pretty_json(&report))
}

fn serve(args: ServeArgs) -> Result<()> {
    let router = crate::service::app(&args.data_dir)?;
    let addr = SocketAddr::new(args.bind, args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    tracing::info!("session store in {}", args.data_dir.display());
    runtime.block_on(crate::service::serve(router, addr))?;
    Ok(())
}
