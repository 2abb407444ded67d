//! Command-line front end: `generate`, `run`, `analyze`, `bound`, `score`.
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 transport.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bias::bias_report;
use crate::config::HarnessConfig;
use crate::curve::{curve_report, gp_reference_curve, learning_curves};
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, NoiseSpec};
use crate::manifest::{manifest_path, verify_against_manifest, RunManifest};
use crate::nn_bound::{bound_for_demos, expected_1nn_mae_with, BoundQuery, Integrand, ABS_TOL, REL_TOL};
use crate::predictor::{build_predictor, run_predictions};
use crate::records::{completed_keys, read_records, read_records_for_resume, write_records, PredictionRecord, RecordWriter};
use crate::reward::{score_batch, ScoreRequest};
use crate::tasks::{generate_taskset, TaskSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gpicl", version, about = "GP-sampled in-context regression tasks, predictors and analyses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a task set from the `generation` block of a config.
    Generate(GenerateArgs),
    /// Run the configured predictor over a task set, resuming if records exist.
    Run(RunArgs),
    /// Learning curves or kernel likelihoods from records.
    Analyze(AnalyzeArgs),
    /// Table of expected 1-NN absolute error against the number of inputs.
    Bound(BoundArgs),
    /// Rewards and group advantages for completions.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub taskset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub n_min: usize,
    /// Defaults to the last prefix the episodes allow.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Overrides the predictor's own parallelism.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Discard existing records instead of resuming.
    #[arg(long)]
    pub restart: bool,
    /// Skip the task-set digest check.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeMode {
    Curves,
    Bias,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub taskset: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub records: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: AnalyzeMode,
    /// Writes `<out>.csv`, a plot-data JSON file and a manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Supplies the `analysis` block; defaults apply without it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fit and apply the pooled extra variance (bias mode).
    #[arg(long)]
    pub adjust: bool,
    /// Keep only these predictor ids.
    #[arg(long)]
    pub predictor: Vec<String>,
    /// Analyze inputs whose digests disagree with their manifests.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Kernel record, e.g. `matern,0.5,8,0.001` or `se,,8,0.001`.
    #[arg(long)]
    pub kernel: KernelSpec,
    #[arg(long, default_value_t = 0.001)]
    pub noise_variance: f64,
    #[arg(long, default_value_t = 29.0)]
    pub length: f64,
    #[arg(long, default_value_t = 2)]
    pub n_min: usize,
    #[arg(long, default_value_t = 50)]
    pub n_max: usize,
    /// Integrate V(d) instead of √V(d).
    #[arg(long)]
    pub variance_integrand: bool,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub taskset: PathBuf,
    /// Lines of `{"completion": .., "episode_id": .., "n": ..}`.
    #[arg(long)]
    pub requests: PathBuf,
    /// Result lines; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => EXIT_USAGE,
        Error::Transport { .. } => EXIT_TRANSPORT,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Score(a) => cmd_score(a),
    }
}

fn check_input(path: &Path, force: bool) -> Result<()> {
    match verify_against_manifest(path) {
        Ok(_) => Ok(()),
        Err(e @ Error::DigestMismatch { .. }) if force => {
            eprintln!("warning: {e}; continuing because of --force");
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn load_taskset(path: &Path, force: bool) -> Result<TaskSet> {
    check_input(path, force)?;
    TaskSet::read_from(path)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let config = HarnessConfig::load(&args.config)?;
    let gen = config.require_generation()?;
    let ts = generate_taskset(gen)?;
    ts.write_to(&args.out)?;
    RunManifest::new(
        "generate",
        serde_json::to_value(gen)?,
        Some(gen.seed),
        &[],
        &[&args.out],
    )?
    .store(&manifest_path(&args.out))?;
    println!("{}", ts.summary());
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let config = HarnessConfig::load(&args.config)?;
    let pconf = config.require_predictor()?;
    let ts = load_taskset(&args.taskset, args.force)?;
    let predictor = build_predictor(pconf)?;
    let n_max = args.n_max.unwrap_or(ts.config.n_points.saturating_sub(1));
    let parallelism = args.parallelism.unwrap_or_else(|| pconf.parallelism());
    if parallelism == 0 {
        return Err(Error::Usage("parallelism must be at least 1".into()));
    }

    // Keep final records, drop retryable ones so they are attempted again.
    let kept: Vec<PredictionRecord> = if args.out.exists() && !args.restart {
        read_records_for_resume(&args.out)?
            .into_iter()
            .filter(|r| !r.is_retryable())
            .collect()
    } else {
        Vec::new()
    };
    write_records(&args.out, &kept)?;
    let done = completed_keys(&kept);

    let mut writer = RecordWriter::append(&args.out)?;
    let outcome = run_predictions(
        predictor.as_ref(),
        &ts,
        args.n_min..=n_max,
        parallelism,
        &done,
        &mut |r| writer.write(&r),
    );
    drop(writer);

    // Canonical order, so resumed and parallel runs match a single pass.
    let mut all = read_records(&args.out)?;
    all.reverse();
    let mut seen = BTreeSet::new();
    all.retain(|r| seen.insert(r.key()));
    all.sort_by_key(PredictionRecord::key);
    write_records(&args.out, &all)?;
    RunManifest::new(
        "run",
        json!({ "predictor": pconf, "n_min": args.n_min, "n_max": n_max }),
        Some(ts.config.seed),
        &[&args.taskset],
        &[&args.out],
    )?
    .store(&manifest_path(&args.out))?;

    let s = outcome?;
    println!(
        "predictor {}: attempted {}, skipped {}, succeeded {}, unparseable {}, transport failures {}, other failures {}",
        predictor.id(),
        s.attempted,
        s.skipped,
        s.succeeded,
        s.unparseable,
        s.transport_failures,
        s.other_failures
    );
    if s.transport_failures > 0 {
        return Err(Error::Transport {
            status: None,
            message: format!(
                "{} requests failed; their records are kept and a rerun retries them",
                s.transport_failures
            ),
        });
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let config = match &args.config {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    let ts = load_taskset(&args.taskset, args.force)?;
    let mut records = Vec::new();
    for p in &args.records {
        check_input(p, args.force)?;
        records.extend(read_records(p)?);
    }
    if !args.predictor.is_empty() {
        records.retain(|r| args.predictor.contains(&r.predictor_id));
    }
    if records.is_empty() {
        return Err(Error::domain("no records to analyze"));
    }
    if let Some(r) = records.iter().find(|r| ts.episode(&r.episode_id).is_none()) {
        return Err(Error::Lookup(format!("records reference unknown episode {}", r.episode_id)));
    }

    let csv_path = with_suffix(&args.out, ".csv");
    let (plot_path, config_snapshot) = match args.mode {
        AnalyzeMode::Curves => {
            let boot = config.analysis.bootstrap();
            let curves: Vec<_> = learning_curves(&records, &boot)?.into_iter().collect();
            let grid: Vec<usize> = curves[0].1.iter().map(|p| p.n).collect();
            let episodes: BTreeSet<&str> = records.iter().map(|r| r.episode_id.as_str()).collect();
            let gen = &ts.config;
            let gp = gp_reference_curve(&ts, &episodes, &grid, &boot)?;
            let bound = if gen.dims == 1 {
                let b = grid
                    .iter()
                    .map(|&n| Ok((n, bound_for_demos(&gen.kernel, &gen.noise, n, gen.input_length())?)))
                    .collect::<Result<Vec<_>>>()?;
                Some(b)
            } else {
                None
            };
            let report = curve_report(&curves, bound.as_deref(), Some(&gp))?;
            std::fs::write(&csv_path, report.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
            let plot = with_suffix(&args.out, ".plot.json");
            write_json(&plot, &report.to_plot_json())?;
            println!("{} rows for {} predictor(s) -> {}", grid.len(), curves.len(), csv_path.display());
            (plot, json!({ "mode": "curves", "analysis": config.analysis }))
        }
        AnalyzeMode::Bias => {
            let adjust = args.adjust || config.analysis.adjust;
            let candidates = config.analysis.candidate_set()?;
            let report = bias_report(&records, &candidates, &ts, adjust)?;
            std::fs::write(&csv_path, report.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
            let plot = with_suffix(&args.out, ".symlog.json");
            write_json(&plot, &report.to_plot_json())?;
            println!(
                "predictor {}: most likely kernel {}{}; {} record(s) excluded",
                report.predictor_id,
                report.argmax_kernel,
                report.tau2.map(|t| format!(" with tau2 = {t:.6e}")).unwrap_or_default(),
                report.excluded
            );
            (plot, json!({ "mode": "bias", "adjust": adjust, "analysis": config.analysis }))
        }
    };

    let mut inputs: Vec<&Path> = vec![&args.taskset];
    inputs.extend(args.records.iter().map(PathBuf::as_path));
    RunManifest::new("analyze", config_snapshot, None, &inputs, &[&csv_path, &plot_path])?
        .store(&with_suffix(&args.out, ".manifest.json"))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn cmd_bound(args: &BoundArgs) -> Result<()> {
    let noise = NoiseSpec::new(args.noise_variance).map_err(|e| Error::Usage(e.to_string()))?;
    if args.n_min < 2 || args.n_min > args.n_max {
        return Err(Error::Usage(format!(
            "need 2 ≤ n_min ≤ n_max, got {}..{}",
            args.n_min, args.n_max
        )));
    }
    let integrand = if args.variance_integrand {
        Integrand::Variance
    } else {
        Integrand::SqrtVariance
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n_inputs", "n_demos", "expected_abs_error"])?;
    for n in args.n_min..=args.n_max {
        let q = BoundQuery::new(args.kernel, noise, n, args.length).map_err(|e| Error::Usage(e.to_string()))?;
        let v = expected_1nn_mae_with(&q, integrand, ABS_TOL, REL_TOL)?;
        w.write_record([n.to_string(), (n - 1).to_string(), v.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    emit(args.out.as_deref(), &bytes)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn read_score_requests(path: &Path) -> Result<Vec<ScoreRequest>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let config = HarnessConfig::load(&args.config)?;
    let reward = config.require_reward()?;
    let ts = load_taskset(&args.taskset, false)?;
    let requests = read_score_requests(&args.requests)?;
    let results = score_batch(reward, &ts, &requests)?;
    let mut out = String::new();
    for r in &results {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    emit(args.out.as_deref(), out.as_bytes())?;
    if let Some(p) = &args.out {
        RunManifest::new(
            "score",
            serde_json::to_value(reward)?,
            None,
            &[&args.taskset, &args.requests],
            &[p],
        )?
        .store(&manifest_path(p))?;
    }
    Ok(())
}
