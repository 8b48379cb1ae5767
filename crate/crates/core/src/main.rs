use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use propagg::config::{
    ConfigFile, ExperimentConfig, MetricName, ProfileSource, SweepConfig, SweepVar, SyntheticSpec,
};
use propagg::data::{
    fit_voter_logistic, group_by_voter, read_comparisons_csv, save_profile_csv, FitOptions,
};
use propagg::experiment::{run_evaluate, run_sweep, write_evaluate_outputs, write_sweep_outputs};
use propagg::verify::{run_suite, write_junit, write_reports_csv, CheckName, CHECK_NAMES};
use propagg::{Error, Mechanism, Profile};

#[derive(Parser, Debug)]
#[command(name = "propagg", version, about = "Proportional aggregation of linear ranking rules")]
struct Cli {
    /// Flat `key = value` file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (1 gives canonical, bit-identical runs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Long-IP, Batch-IP and per-voter IP for each rule and batch size.
    Evaluate(RunArgs),
    /// Long-form table over one swept parameter.
    Sweep(SweepArgs),
    /// Run the oracle checks.
    Verify(VerifyArgs),
    /// Fit one scoring vector per voter from pairwise comparisons.
    Fit(FitArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Profile CSV (`theta_0..theta_{d-1}[,weight]`).
    #[arg(long, conflicts_with = "synthetic")]
    profile: Option<PathBuf>,
    /// Built-in profile, e.g. `antipodal:alpha1=0.3` or `two-voter:phi=175,alpha1=0.7`.
    #[arg(long)]
    synthetic: Option<SyntheticSpec>,
    /// Item distribution: `uniform-sphere`, `gaussian:sigma=1`, `acg:lambda=0.1,axis=0deg`.
    #[arg(long)]
    dist: Option<String>,
    /// Batch sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Number of Monte Carlo batches.
    #[arg(long = "R")]
    batches: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Subset of arith, angular, median, borda, psb.
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<Mechanism>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Subset of long_ip, batch_ip, ip_tilde, per_voter.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<MetricName>>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// One of phi, alpha1, m, n_sub, lambda.
    #[arg(long)]
    var: Option<SweepVar>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// First voter's weight for two-voter sweeps.
    #[arg(long)]
    alpha1: Option<f64>,
    /// Angle between the two voters in degrees for two-voter sweeps.
    #[arg(long)]
    phi: Option<f64>,
    /// Subsamples per point of an `n_sub` sweep.
    #[arg(long)]
    resamples: Option<usize>,
    /// Minimum standard deviation of pairwise angles, in degrees.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_tries: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Checks to run (default: all).
    #[arg(long, value_delimiter = ',')]
    only: Vec<CheckName>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for `verify.xml` and `checks.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Comparison CSV (`voter_id,a_0..,b_0..,chose_a`).
    #[arg(long)]
    comparisons: PathBuf,
    /// Output profile CSV.
    #[arg(long)]
    out: PathBuf,
    /// Inverse L2 regularization strength.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

const RUN_KEYS: [&str; 10] = [
    "profile", "synthetic", "dist", "m", "R", "seed", "rules", "out", "metrics", "threads",
];
const SWEEP_KEYS: [&str; 7] = ["var", "values", "alpha1", "phi", "resamples", "threshold", "max_tries"];

/// Failure classes mapped to exit codes 2 (usage) and 1 (everything else).
enum Failure {
    Usage(Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

fn usage(e: Error) -> Failure {
    Failure::Usage(e)
}

fn resolve_run(args: &RunArgs, file: &ConfigFile) -> CmdResult<ExperimentConfig> {
    let d = ExperimentConfig::default();
    let profile = if let Some(p) = &args.profile {
        ProfileSource::File(p.clone())
    } else if let Some(s) = args.synthetic {
        ProfileSource::Synthetic(s)
    } else if let Some(p) = file.raw("profile") {
        ProfileSource::File(PathBuf::from(p))
    } else if let Some(s) = file.get::<SyntheticSpec>("synthetic").map_err(usage)? {
        ProfileSource::Synthetic(s)
    } else {
        d.profile
    };
    Ok(ExperimentConfig {
        rules: match &args.rules {
            Some(r) => r.clone(),
            None => file.get_list("rules").map_err(usage)?.unwrap_or(d.rules),
        },
        profile,
        distribution: match &args.dist {
            Some(s) => s.clone(),
            None => file.raw("dist").map(String::from).unwrap_or(d.distribution),
        },
        m: match &args.m {
            Some(m) => m.clone(),
            None => file.get_list("m").map_err(usage)?.unwrap_or(d.m),
        },
        batches: match args.batches {
            Some(r) => r,
            None => file.get("R").map_err(usage)?.unwrap_or(d.batches),
        },
        seed: match args.seed {
            Some(s) => s,
            None => file.get("seed").map_err(usage)?.unwrap_or(d.seed),
        },
        output_dir: match &args.out {
            Some(o) => o.clone(),
            None => file.raw("out").map(PathBuf::from).unwrap_or(d.output_dir),
        },
        metrics: match &args.metrics {
            Some(m) => m.clone(),
            None => file.get_list("metrics").map_err(usage)?.unwrap_or(d.metrics),
        },
    })
}

fn resolve_sweep(args: &SweepArgs, file: &ConfigFile) -> CmdResult<SweepConfig> {
    let d = SweepConfig::default();
    let var = match args.var {
        Some(v) => v,
        None => file
            .get("var")
            .map_err(usage)?
            .ok_or_else(|| usage(Error::InvalidInput("sweep needs --var".into())))?,
    };
    let values = match &args.values {
        Some(v) => v.clone(),
        None => file
            .get_list("values")
            .map_err(usage)?
            .ok_or_else(|| usage(Error::InvalidInput("sweep needs --values".into())))?,
    };
    Ok(SweepConfig {
        var,
        values,
        alpha1: pick(args.alpha1, file, "alpha1", d.alpha1)?,
        phi: pick(args.phi, file, "phi", d.phi)?,
        resamples: pick(args.resamples, file, "resamples", d.resamples)?,
        threshold_deg: pick(args.threshold, file, "threshold", d.threshold_deg)?,
        max_tries: pick(args.max_tries, file, "max_tries", d.max_tries)?,
    })
}

fn pick<T: std::str::FromStr>(
    flag: Option<T>,
    file: &ConfigFile,
    key: &str,
    default: T,
) -> CmdResult<T>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(v),
        None => Ok(file.get(key).map_err(usage)?.unwrap_or(default)),
    }
}

fn load_config(cli: &Cli, keys: &[&str]) -> CmdResult<ConfigFile> {
    match &cli.config {
        Some(path) => {
            let file = ConfigFile::load(path).map_err(|e| match e {
                Error::Parse { .. } => Failure::Usage(e),
                e => Failure::Run(e),
            })?;
            file.check_keys(keys).map_err(usage)?;
            Ok(file)
        }
        None => Ok(ConfigFile::default()),
    }
}

fn init_threads(cli: &Cli, file: &ConfigFile) -> CmdResult<()> {
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => file.get::<usize>("threads").map_err(usage)?,
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn cmd_evaluate(cli: &Cli, args: &RunArgs) -> CmdResult<()> {
    let file = load_config(cli, &RUN_KEYS)?;
    init_threads(cli, &file)?;
    let cfg = resolve_run(args, &file)?;
    let p = cfg.profile.load()?;
    let rows = run_evaluate(&cfg, &p)?;
    write_evaluate_outputs(&cfg, &rows)?;
    for r in &rows {
        println!(
            "{:<8} m={:<4} long_ip={:.4} (se {:.4})  batch_ip={:.4} (se {:.4})",
            r.report.rule_name,
            r.report.m,
            r.report.long_ip,
            r.report.long_ip_se(),
            r.report.batch_ip,
            r.report.batch_ip_se()
        );
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> CmdResult<()> {
    let keys: Vec<&str> = RUN_KEYS.iter().chain(&SWEEP_KEYS).copied().collect();
    let file = load_config(cli, &keys)?;
    init_threads(cli, &file)?;
    let cfg = resolve_run(&args.run, &file)?;
    let sw = resolve_sweep(args, &file)?;
    let explicit = args.run.profile.is_some()
        || args.run.synthetic.is_some()
        || file.raw("profile").is_some()
        || file.raw("synthetic").is_some();
    let base: Option<Profile> = match sw.var {
        SweepVar::M | SweepVar::NSub if explicit => Some(cfg.profile.load()?),
        SweepVar::M => Some(propagg::data::two_voter_profile(sw.phi, sw.alpha1)?),
        SweepVar::NSub => {
            return Err(usage(Error::InvalidInput(
                "n_sub sweep needs --profile or --synthetic".into(),
            )))
        }
        _ => None,
    };
    let rows = run_sweep(&cfg, &sw, base.as_ref())?;
    write_sweep_outputs(&cfg, &sw, &rows)?;
    println!("{} rows written to {}", rows.len(), cfg.output_dir.join("sweep.csv").display());
    Ok(())
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> CmdResult<bool> {
    let file = load_config(cli, &["seed", "threads", "out"])?;
    init_threads(cli, &file)?;
    let seed = pick(args.seed, &file, "seed", 0)?;
    let names: Vec<CheckName> = if args.only.is_empty() {
        CHECK_NAMES.iter().map(|n| n.parse().expect("known check")).collect()
    } else {
        args.only.clone()
    };
    let reports = run_suite(&names, seed)?;
    for r in &reports {
        println!(
            "{:<13} {:<19} measured={:.6e} bound={:.6e} slack={:.6e} trials={} {}",
            r.status.to_string(),
            r.name,
            r.measured,
            r.bound,
            r.slack,
            r.trials,
            r.note
        );
    }
    let out = args.out.clone().or_else(|| file.raw("out").map(PathBuf::from));
    if let Some(dir) = out {
        fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let xml = fs::File::create(dir.join("verify.xml")).map_err(Error::from)?;
        write_junit(&reports, std::io::BufWriter::new(xml))?;
        let csv = fs::File::create(dir.join("checks.csv")).map_err(Error::from)?;
        write_reports_csv(&reports, std::io::BufWriter::new(csv))?;
    }
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| r.is_hard_failure())
        .map(|r| r.name.as_str())
        .collect();
    if !failed.is_empty() {
        eprintln!("failed checks: {}", failed.join(", "));
    }
    Ok(failed.is_empty())
}

fn cmd_fit(args: &FitArgs) -> CmdResult<()> {
    let text = fs::File::open(&args.comparisons)
        .map_err(|e| Error::Io(format!("{}: {e}", args.comparisons.display())))?;
    let records = read_comparisons_csv(text)?;
    let opts = FitOptions::default();
    let mut thetas = Vec::new();
    let mut comments = vec![format!("fitted by propagg {} with C={}", env!("CARGO_PKG_VERSION"), args.c)];
    for (voter, recs) in group_by_voter(records) {
        match fit_voter_logistic(&recs, args.c, &opts) {
            Ok((theta, diag)) => {
                comments.push(format!(
                    "voter {voter}: records={} iterations={} grad_norm={:e} coef_norm={} converged={} standardization={}",
                    diag.records, diag.iterations, diag.grad_norm, diag.coef_norm, diag.converged, diag.standardization
                ));
                thetas.push(theta);
            }
            Err(e @ Error::DegenerateFit { .. }) => {
                eprintln!("warning: skipping voter {voter}: {e}");
                comments.push(format!("voter {voter}: skipped ({e})"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let p = Profile::uniform(thetas)
        .map_err(|_| Error::InvalidInput("no voter could be fitted".into()))?;
    save_profile_csv(&p, &comments, &args.out)?;
    println!("{} voter(s) written to {}", p.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Evaluate(a) => cmd_evaluate(&cli, a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(&cli, a).map(|_| true),
        Command::Verify(a) => cmd_verify(&cli, a),
        Command::Fit(a) => cmd_fit(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
