//! `spinrelay` command-line front end.

mod output;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use spinrelay::checks::{self, CheckSettings};
use spinrelay::exec::Execution;
use spinrelay::experiments::{
    self, default_t_max, figure_datasets, sweep_gamma, sweep_length, sweep_tau, trace_experiment,
    trace_grid, DatasetData, SweepOptions, SweepRecord, MAX_CHAIN_LENGTH,
};
use spinrelay::fidelity::{find_first_peak, FidelityTrace, PeakResult};
use spinrelay::protocol::{run_protocol, MeasurementSchedule};
use spinrelay::ChainConfig;

use output::{manifest_path, RunManifest};

const TRACE_HELP: &str = "\
Trace CSV columns: t,kind,f_exc,f_coh,f_av
  kind is `evolved`, `pre` or `post`; pre and post share the timestamp of a measurement.
All quantities are in units of the channel coupling J = 1.
Numbers carry 12 significant digits. A sidecar <out>.manifest.json records the run.";

const PROTOCOL_HELP: &str = "\
Trace CSV columns: t,kind,f_exc,f_coh,f_av
Measurement CSV (<out stem>.measurements.csv) columns: k,t,p_k,p_cumulative
All quantities are in units of the channel coupling J = 1.
Numbers carry 12 significant digits. A sidecar <file>.manifest.json records each output.";

const SWEEP_HELP: &str = "\
Sweep CSV columns:
  swept_name,swept_value,n,j_boundary,gamma,tau,f_exc_m,f_coh_m,f_av_m,t_m,p_suc,n_measurements,status
  status is `ok`, `no_peak` or `zero_probability`; peak fields are empty unless ok.
  tau = 0 marks an unmeasured run (p_suc = 1, n_measurements = 0).
All quantities are in units of the channel coupling J = 1.
Numbers carry 12 significant digits. A sidecar <out>.manifest.json records the run.";

const FIGURE_HELP: &str = "\
Writes one CSV per dataset into the output directory, each with a .manifest.json sidecar.
Trace datasets use the columns t,kind,f_exc,f_coh,f_av.
Sweep datasets use the columns
  swept_name,swept_value,n,j_boundary,gamma,tau,f_exc_m,f_coh_m,f_av_m,t_m,p_suc,n_measurements,status";

const AFTER_HELP: &str = "\
Exit status: 0 on success, 1 on a physics error (vanishing success probability,
missing fidelity peak when the command needs one, failed oracle check), 2 on a usage error.
SPINRELAY_THREADS caps the number of worker threads.";

#[derive(Debug, Parser)]
#[command(name = "spinrelay", version, about = "Measurement-assisted state transfer through a dephasing spin channel", after_help = AFTER_HELP)]
struct Cli {
    /// Seed recorded in every manifest and used by Monte Carlo estimates.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transfer fidelities versus time.
    #[command(after_help = TRACE_HELP)]
    Trace(TraceArgs),
    /// One measured run: fidelity trace and per-measurement success probabilities.
    #[command(after_help = PROTOCOL_HELP)]
    Protocol(TraceArgs),
    /// Peak fidelity and success probability over measurement intervals.
    #[command(name = "sweep-tau", after_help = SWEEP_HELP)]
    SweepTau(SweepTauArgs),
    /// Peak fidelity and success probability over dephasing rates.
    #[command(name = "sweep-gamma", after_help = SWEEP_HELP)]
    SweepGamma(SweepGammaArgs),
    /// Peak fidelity and success probability over chain lengths.
    #[command(name = "sweep-n", after_help = SWEEP_HELP)]
    SweepN(SweepNArgs),
    /// Datasets of one figure preset.
    #[command(after_help = FIGURE_HELP)]
    Figure(FigureArgs),
    /// Cross-checks against the full Hilbert space and analytic results.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct ChainArgs {
    /// Total number of spins, even, 4..=20.
    #[arg(long = "n", default_value_t = 12)]
    n: usize,
    /// Sender and receiver coupling J'.
    #[arg(long, default_value_t = 0.05)]
    j_boundary: f64,
    /// Dephasing rate.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Last dephased site, N-1 (whole channel) or N-2.
    #[arg(long)]
    dephasing_upper: Option<usize>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Measurement interval; 0 disables measurement.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Time horizon; defaults to 2.5 effective transfer times.
    #[arg(long)]
    t_max: Option<f64>,
    /// Uniform sample count before measurement times are merged in.
    #[arg(long, default_value_t = 1000)]
    points: usize,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepTauArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Comma-separated measurement intervals; 0 is the unmeasured reference.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    taus: Option<Vec<f64>>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepGammaArgs {
    #[arg(long = "n", default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    j_boundary: f64,
    #[arg(long)]
    dephasing_upper: Option<usize>,
    /// Comma-separated dephasing rates.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    gammas: Option<Vec<f64>>,
    /// Measurement interval; 0 disables measurement.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepNArgs {
    /// Comma-separated even chain lengths.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    lengths: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.05)]
    j_boundary: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Measurement interval; 0 disables measurement.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FigureArgs {
    /// Figure number, 2..=8.
    #[arg(value_parser = clap::value_parser!(u8).range(2..=8))]
    figure: u8,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Monte Carlo samples per Haar-average point.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Random initial states per comparison.
    #[arg(long, default_value_t = 20)]
    states: usize,
    /// JSON report file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Physics(#[from] spinrelay::Error),
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Physics(
                spinrelay::Error::InvalidConfig(_) | spinrelay::Error::InvalidArgument(_),
            ) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_length(n: usize, flag: &str) -> CliResult<()> {
    if n < 4 || !n.is_multiple_of(2) || n > MAX_CHAIN_LENGTH {
        return Err(usage(format!(
            "{flag} {n}: chain length must be even and within 4..={MAX_CHAIN_LENGTH}"
        )));
    }
    Ok(())
}

fn check_positive(value: f64, flag: &str) -> CliResult<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(usage(format!("{flag} {value}: must be positive")));
    }
    Ok(())
}

fn check_non_negative(value: f64, flag: &str) -> CliResult<()> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(usage(format!("{flag} {value}: must be non-negative")));
    }
    Ok(())
}

fn build_config(
    n: usize,
    j_boundary: f64,
    gamma: f64,
    upper: Option<usize>,
) -> CliResult<ChainConfig> {
    check_length(n, "--n")?;
    check_positive(j_boundary, "--j-boundary")?;
    check_non_negative(gamma, "--gamma")?;
    let config = ChainConfig::new(n, j_boundary, gamma)?;
    match upper {
        None => Ok(config),
        Some(u) if u == n - 1 || u == n - 2 => Ok(config.with_dephasing_upper(u)?),
        Some(u) => Err(usage(format!(
            "--dephasing-upper {u}: must be N-1 ({}) or N-2 ({})",
            n - 1,
            n - 2
        ))),
    }
}

fn resolve_t_max(t_max: Option<f64>, config: &ChainConfig) -> CliResult<f64> {
    match t_max {
        Some(t) => {
            check_positive(t, "--t-max")?;
            Ok(t)
        }
        None => Ok(default_t_max(config)?),
    }
}

fn tau_option(tau: f64) -> CliResult<Option<f64>> {
    check_non_negative(tau, "--tau")?;
    Ok((tau > 0.0).then_some(tau))
}

fn chain_params(manifest: &mut RunManifest, config: &ChainConfig) {
    manifest
        .param("n", config.n_total)
        .param("j_boundary", config.j_boundary)
        .param("gamma", config.gamma)
        .param(
            "dephasing_upper",
            config.dephasing_sites.last().copied().unwrap_or(0),
        );
}

/// Writes through `write` to `path` (plus its manifest sidecar), or to stdout.
fn emit<F>(path: Option<&Path>, manifest: &RunManifest, write: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> csv::Result<()>,
{
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let mut file = BufWriter::new(File::create(p)?);
            write(&mut file)?;
            file.flush()?;
            manifest.write(&manifest_path(p))?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

/// Summary lines go to stdout when the data went to a file, stderr otherwise.
fn report(to_file: bool, line: &str) {
    if to_file {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn peak_line(trace: &FidelityTrace, peak: &PeakResult) -> String {
    format!(
        "peak: t_m = {} f_av = {} f_exc = {} f_coh = {}",
        output::fmt_num(peak.t_m),
        output::fmt_num(peak.f_m),
        output::fmt_num(trace.f_exc[peak.index]),
        output::fmt_num(trace.f_coh[peak.index]),
    )
}

fn run_trace(args: &TraceArgs, seed: u64) -> CliResult<()> {
    let c = &args.chain;
    let config = build_config(c.n, c.j_boundary, c.gamma, c.dephasing_upper)?;
    let tau = tau_option(args.tau)?;
    let t_max = resolve_t_max(args.t_max, &config)?;
    if args.points < 100 {
        return Err(usage(format!(
            "--points {}: at least 100 required",
            args.points
        )));
    }
    let trace = trace_experiment(&config, tau, t_max, args.points)?;

    let mut manifest = RunManifest::new("trace", seed);
    chain_params(&mut manifest, &config);
    manifest
        .param("tau", args.tau)
        .param("t_max", t_max)
        .param("points", args.points);
    emit(args.out.as_deref(), &manifest, |w| {
        output::write_trace(w, &trace)
    })?;

    let to_file = args.out.is_some();
    match find_first_peak(&trace) {
        Ok(peak) => report(to_file, &peak_line(&trace, &peak)),
        Err(spinrelay::Error::NoPeak) => report(to_file, "peak: none"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn measurements_file(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_os_string();
    let mut name = stem;
    name.push(".measurements.csv");
    out.with_file_name(name)
}

fn run_protocol_cmd(args: &TraceArgs, seed: u64) -> CliResult<()> {
    let c = &args.chain;
    let config = build_config(c.n, c.j_boundary, c.gamma, c.dephasing_upper)?;
    let tau = tau_option(args.tau)?
        .ok_or_else(|| usage("--tau 0: protocol needs a positive measurement interval"))?;
    let t_max = resolve_t_max(args.t_max, &config)?;
    if args.points < 100 {
        return Err(usage(format!(
            "--points {}: at least 100 required",
            args.points
        )));
    }
    let schedule = MeasurementSchedule::new(tau, t_max)?;
    let grid = trace_grid(t_max, args.points, Some(&schedule))?;
    let result = run_protocol(&config, &schedule, &grid)?;

    let mut manifest = RunManifest::new("protocol", seed);
    chain_params(&mut manifest, &config);
    manifest
        .param("tau", tau)
        .param("t_max", t_max)
        .param("points", args.points);
    emit(args.out.as_deref(), &manifest, |w| {
        output::write_trace(w, &result.trace)
    })?;
    let times = schedule.measurement_times();
    let times = &times[..result.p_k.len().min(times.len())];
    if let Some(out) = &args.out {
        let path = measurements_file(out);
        emit(Some(&path), &manifest, |w| {
            output::write_measurements(w, times, &result.p_k)
        })?;
    }

    let to_file = args.out.is_some();
    report(
        to_file,
        &format!("measurements performed: {}", result.p_k.len()),
    );
    let peak = result.require_peak()?;
    report(to_file, &peak_line(&result.trace, &peak));
    report(
        to_file,
        &format!(
            "success probability up to t_m: {} ({} measurements)",
            output::fmt_num(result.p_suc.unwrap_or(1.0)),
            result.n_measurements.unwrap_or(0)
        ),
    );
    Ok(())
}

fn sweep_options(t_max: Option<f64>) -> CliResult<SweepOptions> {
    if let Some(t) = t_max {
        check_positive(t, "--t-max")?;
    }
    Ok(SweepOptions {
        t_max,
        exec: Execution::Parallel,
    })
}

fn write_sweep_output(
    out: Option<&Path>,
    manifest: &RunManifest,
    records: &[SweepRecord],
) -> CliResult<()> {
    emit(out, manifest, |w| output::write_sweep(w, records))
}

fn values_param(values: &[f64]) -> serde_json::Value {
    json!(values
        .iter()
        .map(|v| output::fmt_num(*v))
        .collect::<Vec<_>>()
        .join(","))
}

fn run_sweep_tau(args: &SweepTauArgs, seed: u64) -> CliResult<()> {
    let c = &args.chain;
    let config = build_config(c.n, c.j_boundary, c.gamma, c.dephasing_upper)?;
    let taus = args
        .taus
        .clone()
        .unwrap_or_else(experiments::default_tau_grid);
    for &t in &taus {
        check_non_negative(t, "--taus")?;
    }
    let records = sweep_tau(&config, &taus, sweep_options(args.t_max)?)?;
    let mut manifest = RunManifest::new("sweep-tau", seed);
    chain_params(&mut manifest, &config);
    manifest.param("taus", values_param(&taus));
    if let Some(t) = args.t_max {
        manifest.param("t_max", t);
    }
    write_sweep_output(args.out.as_deref(), &manifest, &records)
}

fn run_sweep_gamma(args: &SweepGammaArgs, seed: u64) -> CliResult<()> {
    let config = build_config(args.n, args.j_boundary, 0.0, args.dephasing_upper)?;
    let gammas = args
        .gammas
        .clone()
        .unwrap_or_else(experiments::default_gamma_grid);
    for &g in &gammas {
        check_non_negative(g, "--gammas")?;
    }
    let tau = tau_option(args.tau)?;
    let records = sweep_gamma(&config, &gammas, tau, sweep_options(args.t_max)?)?;
    let mut manifest = RunManifest::new("sweep-gamma", seed);
    manifest
        .param("n", args.n)
        .param("j_boundary", args.j_boundary)
        .param(
            "dephasing_upper",
            config.dephasing_sites.last().copied().unwrap_or(0),
        )
        .param("gammas", values_param(&gammas))
        .param("tau", args.tau);
    if let Some(t) = args.t_max {
        manifest.param("t_max", t);
    }
    write_sweep_output(args.out.as_deref(), &manifest, &records)
}

fn run_sweep_n(args: &SweepNArgs, seed: u64) -> CliResult<()> {
    let lengths = args
        .lengths
        .clone()
        .unwrap_or_else(experiments::default_length_grid);
    for &n in &lengths {
        check_length(n, "--lengths")?;
    }
    check_positive(args.j_boundary, "--j-boundary")?;
    check_non_negative(args.gamma, "--gamma")?;
    let tau = tau_option(args.tau)?;
    let records = sweep_length(
        &lengths,
        args.j_boundary,
        args.gamma,
        tau,
        sweep_options(args.t_max)?,
    )?;
    let mut manifest = RunManifest::new("sweep-n", seed);
    manifest
        .param(
            "lengths",
            lengths
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
        )
        .param("j_boundary", args.j_boundary)
        .param("gamma", args.gamma)
        .param("tau", args.tau);
    if let Some(t) = args.t_max {
        manifest.param("t_max", t);
    }
    write_sweep_output(args.out.as_deref(), &manifest, &records)
}

fn run_figure(args: &FigureArgs, seed: u64) -> CliResult<()> {
    let datasets = figure_datasets(args.figure, Execution::Parallel)?;
    fs::create_dir_all(&args.out)?;
    for ds in &datasets {
        let path = args.out.join(format!("{}.csv", ds.name));
        let mut manifest = RunManifest::new("figure", seed);
        manifest
            .param("figure", args.figure)
            .param("dataset", ds.name.clone());
        match &ds.data {
            DatasetData::Trace(trace) => {
                emit(Some(&path), &manifest, |w| output::write_trace(w, trace))?
            }
            DatasetData::Sweep(records) => write_sweep_output(Some(&path), &manifest, records)?,
        }
        println!("{}", path.display());
    }
    Ok(())
}

fn run_oracle(args: &OracleArgs, seed: u64) -> CliResult<()> {
    if args.samples < 100 {
        return Err(usage(format!(
            "--samples {}: at least 100 required",
            args.samples
        )));
    }
    if args.states == 0 {
        return Err(usage("--states 0: at least one state required"));
    }
    let settings = CheckSettings {
        random_states: args.states,
        mc_samples: args.samples,
        seed,
        exec: Execution::Parallel,
    };
    let outcomes = checks::run_all(&settings)?;
    for o in &outcomes {
        println!(
            "{} {:<55} max_deviation = {:<20} tolerance = {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            output::fmt_num(o.max_deviation),
            output::fmt_num(o.tolerance),
        );
    }
    if let Some(path) = &args.out {
        let mut manifest = RunManifest::new("oracle", seed);
        manifest
            .param("samples", args.samples)
            .param("states", args.states);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let text = serde_json::to_string_pretty(&outcomes).map_err(io::Error::other)?;
        fs::write(path, text + "\n")?;
        manifest.write(&manifest_path(path))?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::Failed(format!(
            "{failed} of {} checks failed",
            outcomes.len()
        )));
    }
    println!("all {} checks passed", outcomes.len());
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("SPINRELAY_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        usage(format!(
            "SPINRELAY_THREADS={raw}: expected a positive integer"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Failed(e.to_string()))
}

fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Trace(a) => run_trace(a, cli.seed),
        Command::Protocol(a) => run_protocol_cmd(a, cli.seed),
        Command::SweepTau(a) => run_sweep_tau(a, cli.seed),
        Command::SweepGamma(a) => run_sweep_gamma(a, cli.seed),
        Command::SweepN(a) => run_sweep_n(a, cli.seed),
        Command::Figure(a) => run_figure(a, cli.seed),
        Command::Oracle(a) => run_oracle(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
