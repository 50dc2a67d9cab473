use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cfpa_core::campaign::{algo_labels, metric_samples, write_cdf};
use cfpa_core::{
    emit_outputs, parse_algorithms, read_records, run_campaign, CampaignConfig, DlBound, Metric,
    SystemConfig,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cfpa",
    version,
    about = "Pilot-assignment campaigns for cell-free massive MIMO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write records, summary and CDFs.
    Simulate(SimulateArgs),
    /// Write the empirical CDF of one metric from a records file.
    Cdf(CdfArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// TOML system config; keys left out keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    drops: usize,
    /// Comma-separated algorithms: rpa, shpa, mhpa, greedy, each optionally
    /// suffixed with :sr or :mr to pick the DL power rule.
    #[arg(long, default_value = "rpa,shpa,mhpa,greedy")]
    algos: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    #[arg(long, value_enum, default_value_t = Bound::TransmitPower)]
    dl_bound: Bound,
    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bound {
    TransmitPower,
    Literal,
}

#[derive(clap::Args)]
struct CdfArgs {
    /// records.csv written by `simulate`.
    #[arg(long = "in")]
    input: PathBuf,
    /// One of dl_user, ul_user, dl_sum, ul_sum, dl_min, ul_min.
    #[arg(long)]
    metric: String,
    /// Run label such as shpa-sr; may be left out when the file holds one run.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Cdf(args) => cdf(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let system = match &args.config {
        Some(path) => SystemConfig::load(path)?,
        None => SystemConfig::default(),
    };
    let mut cfg = CampaignConfig::new(
        system,
        parse_algorithms(&args.algos)?,
        args.drops,
        args.seed,
    );
    cfg.max_sweeps = args.max_sweeps;
    cfg.rel_tol = args.rel_tol;
    cfg.dl_bound = match args.dl_bound {
        Bound::TransmitPower => DlBound::TransmitPower,
        Bound::Literal => DlBound::Literal,
    };
    cfg.validate()?;

    let result = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot start worker threads")?
            .install(|| run_campaign(&cfg))?,
        None => run_campaign(&cfg)?,
    };
    let files = emit_outputs(&result, &args.out)?;
    print_summary(&result.summary()?.runs);
    println!(
        "wrote {} and {}",
        files.records.display(),
        files.summary.display()
    );
    Ok(())
}

fn print_summary(runs: &[cfpa_core::campaign::RunSummary]) {
    println!(
        "{:<10} {:>9} {:>9} {:>11} {:>11} {:>9} {:>9} {:>7}",
        "run", "DL 5%", "UL 5%", "DL sum med", "UL sum med", "DL min", "UL min", "sweeps"
    );
    for r in runs {
        println!(
            "{:<10} {:>9.2} {:>9.2} {:>11.1} {:>11.1} {:>9.2} {:>9.2} {:>7.2}",
            r.algo,
            r.dl_5pct_bps / 1e6,
            r.ul_5pct_bps / 1e6,
            r.median_dl_sum_bps / 1e6,
            r.median_ul_sum_bps / 1e6,
            r.median_dl_min_bps / 1e6,
            r.median_ul_min_bps / 1e6,
            r.mean_sweeps
        );
    }
    println!("(rates in Mbps)");
}

fn cdf(args: CdfArgs) -> Result<()> {
    let metric: Metric = args.metric.parse()?;
    let records = read_records(&args.input)?;
    let labels = algo_labels(&records);
    let algo = match (args.algo, labels.as_slice()) {
        (Some(a), _) if labels.contains(&a) => a,
        (Some(a), _) => bail!(
            "no records for `{a}` in {}; found: {}",
            args.input.display(),
            labels.join(", ")
        ),
        (None, [only]) => only.clone(),
        (None, []) => bail!("{} holds no records", args.input.display()),
        (None, _) => bail!(
            "{} holds several runs ({}); pick one with --algo",
            args.input.display(),
            labels.join(", ")
        ),
    };
    let samples = metric_samples(&records, &algo, metric);
    ensure_parent(&args.out)?;
    write_cdf(&samples, &args.out)?;
    println!("wrote {} points to {}", samples.len(), args.out.display());
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
        }
        _ => Ok(()),
    }
}
