use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sparsepca::bench::{emit_report, parse_specs, run_suite, table1_specs, table2_specs, ExperimentReport, ReportFormat};
use sparsepca::dataio::read_data;
use sparsepca::itspca::Stopping;
use sparsepca::pipeline::{prepare, run_pipeline, MChoice, NoiseLevel, PipelineConfig, DEFAULT_ALPHA, DEFAULT_GAMMA};
use sparsepca::rank::{estimate_rank, DEFAULT_KAPPA_BAR};
use sparsepca::threshold::ThresholdKind;
use sparsepca::wavelet::{coefficient_levels, dwt, test_signal, SignalName, WaveletSpec};
use sparsepca::{Error, Result};

#[derive(Parser)]
#[command(name = "sparsepca", version, about = "Sparse principal subspace estimation by iterative thresholding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a sparse principal subspace to a data file (CSV or binary).
    Fit(FitArgs),
    /// Estimate the number of spikes and the subspace dimension.
    Rank(RankArgs),
    /// Run experiments described by a JSON spec file.
    Bench(BenchArgs),
    /// Single-spike simulation over all test curves and spike sizes.
    Table1(TableArgs),
    /// Four-spike simulation over the built-in spike configurations.
    Table2(TableArgs),
    /// Print a test curve (or its wavelet coefficients) as CSV.
    Signals(SignalArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Subspace dimension, or "auto" to select it from the data.
    #[arg(long, default_value = "auto")]
    m: MChoice,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// hard, soft or scad:<a>
    #[arg(long, default_value = "soft")]
    threshold: ThresholdKind,
    /// empirical[:tol], theoretical or max_iters:<k>
    #[arg(long, default_value = "empirical")]
    stop: Stopping,
    /// Noise variance, or "estimate" for the median-of-variances estimate.
    #[arg(long, default_value = "estimate")]
    sigma2: NoiseLevel,
    #[arg(long, default_value_t = DEFAULT_KAPPA_BAR)]
    kappa_bar: f64,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_KAPPA_BAR)]
    kappa_bar: f64,
    #[arg(long, default_value = "estimate")]
    sigma2: NoiseLevel,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON file holding one experiment spec or an array of them.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    pool: PoolArgs,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for report.csv and report.json; the CSV goes to stdout when omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    pool: PoolArgs,
}

#[derive(Args)]
struct PoolArgs {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SignalArgs {
    #[arg(long)]
    name: SignalName,
    #[arg(long, default_value_t = 2048)]
    p: usize,
    /// Emit Symmlet 8 coefficients instead of the curve.
    #[arg(long)]
    wavelet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit(args) => fit(args),
        Command::Rank(args) => rank(args),
        Command::Bench(args) => {
            let text = fs::read_to_string(&args.spec).map_err(|e| Error::io(&args.spec, e))?;
            let specs = parse_specs(&text)?;
            let reports = with_pool(&args.pool, || run_suite(&specs))??;
            write_reports(&reports, &args.out_dir)
        }
        Command::Table1(args) => table(args, table1_specs),
        Command::Table2(args) => table(args, table2_specs),
        Command::Signals(args) => signals(args),
    }
}

fn fit(args: FitArgs) -> Result<()> {
    let data = read_data(&args.input)?;
    let cfg = PipelineConfig {
        alpha: args.alpha,
        kind: args.threshold,
        gamma: args.gamma,
        stopping: args.stop,
        kappa_bar: args.kappa_bar,
        noise: args.sigma2,
        m: args.m,
    };
    let out = run_pipeline(data, &cfg)?;
    let body = match out.fit {
        Some(fit) => serde_json::to_string_pretty(&fit),
        None => serde_json::to_string_pretty(&json!({
            "no_signal": true,
            "m": 0,
            "nspike_hat": out.rank.nspike_hat,
            "sigma2": out.sigma2,
            "card_b": out.init.card_b(),
        })),
    }
    .expect("fit output serialises");
    emit(&body, args.out.as_deref())
}

fn rank(args: RankArgs) -> Result<()> {
    let data = read_data(&args.input)?;
    let (n, p) = (data.n(), data.p());
    let prepared = prepare(data, args.sigma2, args.alpha)?;
    let est = estimate_rank(&prepared.init, n, p, args.kappa_bar);
    let body = json!({
        "nspike_hat": est.nspike_hat,
        "m": est.m_selected,
        "gap_ratios": est.gap_ratios,
        "delta": est.delta,
        "ell_b": prepared.init.ell_b,
        "card_b": prepared.init.card_b(),
        "sigma2": prepared.sigma2,
    });
    emit(&serde_json::to_string_pretty(&body).expect("json"), None)
}

fn table(args: TableArgs, specs: fn(usize, u64) -> Vec<sparsepca::bench::ExperimentSpec>) -> Result<()> {
    let specs = specs(args.replicates, args.seed);
    let reports = with_pool(&args.pool, || run_suite(&specs))??;
    match args.out_dir {
        Some(dir) => write_reports(&reports, &dir),
        None => emit(&sparsepca::bench::render_csv(&reports)?, None),
    }
}

fn signals(args: SignalArgs) -> Result<()> {
    let sig = test_signal(args.name, args.p)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(e.to_string());
    if args.wavelet {
        let spec = WaveletSpec::default_for(args.p);
        let coeffs = dwt(&sig.values, spec)?;
        let levels = coefficient_levels(args.p, spec)?;
        w.write_record(["index", "level", "value"]).map_err(csv_err)?;
        for (i, (c, l)) in coeffs.iter().zip(&levels).enumerate() {
            w.write_record([i.to_string(), l.to_string(), c.to_string()]).map_err(csv_err)?;
        }
    } else {
        w.write_record(["index", "t", "value"]).map_err(csv_err)?;
        for (i, v) in sig.values.iter().enumerate() {
            let t = (i + 1) as f64 / args.p as f64;
            w.write_record([i.to_string(), t.to_string(), v.to_string()]).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    emit(&String::from_utf8(bytes).expect("utf-8"), None)
}

fn with_pool<T: Send>(pool: &PoolArgs, f: impl FnOnce() -> T + Send) -> Result<T> {
    match pool.threads {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("--threads must be at least 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map(|p| p.install(f))
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}"))),
    }
}

fn write_reports(reports: &[ExperimentReport], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    emit_report(reports, ReportFormat::Csv, &dir.join("report.csv"))?;
    emit_report(reports, ReportFormat::Json, &dir.join("report.json"))
}

fn emit(body: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => fs::write(path, body).map_err(|e| Error::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{}", body.trim_end()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io(Path::new("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}
