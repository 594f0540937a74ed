use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use wicksell::asymptotics::{sample_lx, sample_normal, sample_w, sigma_sq, LimitSettings};
use wicksell::estimators::{estimate, profile_projection, EstimatorId, EvalGrid};
use wicksell::experiments::{load_model, reproduce, ExperimentConfig};
use wicksell::model::{Interval, WicksellModel};
use wicksell::sampling::{ks_critical_1pct, ks_distance, sample_batch, SampleBatch, StreamKey};

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(name = "wicksell", version, about = "Wicksell's corpuscle problem with a known flat interval")]
struct Cli {
    /// Master seed; the WICKSELL_SEED environment variable takes precedence.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Size of the worker pool (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw squared section radii and write them to CSV.
    Sample(SampleArgs),
    /// Estimate V from a sample file.
    Estimate(EstimateArgs),
    /// Simulate the limit laws on the flat interval.
    Limits(LimitsArgs),
    /// Run the full simulation study.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Preset name or path to a cdf JSON document.
    #[arg(long, default_value = "paper-sec5")]
    model: String,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(short, long, default_value = "z.csv")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Sample CSV with a `z` column.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, default_value = "profile")]
    estimator: String,
    /// Flat interval as `lo,hi`.
    #[arg(long, default_value = "2,3")]
    flat: String,
    #[arg(long, default_value_t = 2.5)]
    x: f64,
    /// Number of uniform grid cells on [0, M].
    #[arg(long, default_value_t = 2000)]
    grid_n: usize,
    #[arg(short, long, default_value = "estimate.csv")]
    output: PathBuf,
    /// Where to write the summary JSON (also printed to stdout).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Law {
    Lx,
    W,
    Normal,
}

#[derive(Args, Debug)]
struct LimitsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "lx")]
    law: Law,
    #[arg(long, default_value = "2,3")]
    flat: String,
    #[arg(long, default_value_t = 2.5)]
    x: f64,
    #[arg(long, default_value_t = 20_000)]
    npaths: usize,
    #[arg(long, default_value_t = 400)]
    grid_m: usize,
    #[arg(long, default_value_t = 100_000)]
    n_mc: usize,
    #[arg(short, long, default_value = "draws.csv")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reduced run (R = 100, 2000 limit paths).
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    flat: Option<String>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    npaths: Option<usize>,
    #[arg(long)]
    grid_m: Option<usize>,
    /// Sample sizes as a comma-separated list.
    #[arg(long)]
    sample_sizes: Option<String>,
    #[arg(long)]
    svg: bool,
    #[arg(short, long, default_value = "out")]
    output_dir: PathBuf,
}

fn parse_flat(s: &str) -> Result<Interval> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(wicksell::Error::InvalidArgument(format!("flat interval `{s}` is not of the form lo,hi")).into());
    }
    let num = |p: &str| {
        p.parse::<f64>().map_err(|_| wicksell::Error::InvalidArgument(format!("`{p}` is not a number")))
    };
    Ok(Interval::new(num(parts[0])?, num(parts[1])?)?)
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    match std::env::var("WICKSELL_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| wicksell::Error::InvalidArgument(format!("WICKSELL_SEED `{v}` is not an unsigned integer")).into()),
        Err(_) => Ok(flag.unwrap_or(DEFAULT_SEED)),
    }
}

fn model(args: &ModelArgs) -> Result<WicksellModel> {
    Ok(load_model(&args.model)?)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn cmd_sample(args: &SampleArgs, seed: u64) -> Result<()> {
    if args.n == 0 {
        return Err(wicksell::Error::InvalidArgument("--n must be positive".into()).into());
    }
    let model = model(&args.model)?;
    let batch = sample_batch(&model, args.n, StreamKey::new(seed, 0))?;
    ensure_parent(&args.output)?;
    batch.save(&args.output)?;
    let d = ks_distance(&batch, |z| model.observable_cdf(z).unwrap_or(f64::NAN))?;
    let crit = ks_critical_1pct(args.n);
    eprintln!("KS distance {d:.5} (1% critical value {crit:.5}){}", if d < crit { "" } else { " REJECTED" });
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let id: EstimatorId = args.estimator.parse()?;
    let flat = parse_flat(&args.flat)?;
    let model = model(&args.model)?;
    let m = model.support_bound();
    let batch = SampleBatch::load(&args.input)?;
    let mut mandatory = batch.z.clone();
    mandatory.extend([flat.lo, flat.hi, args.x]);
    let grid = EvalGrid::new(m, args.grid_n, &mandatory)?;
    let est = estimate(&batch, id, flat, &grid)?;
    ensure_parent(&args.output)?;
    est.write_csv(BufWriter::new(File::create(&args.output)?), id.as_str())?;
    let mut summary = json!({
        "estimator": id.as_str(),
        "model": model.id,
        "n": batch.n(),
        "flat": [flat.lo, flat.hi],
        "x": args.x,
        "value_at_x": est.eval(args.x),
        "true_v_at_x": model.function_v(args.x),
        "grid_n": args.grid_n,
    });
    if id == EstimatorId::Profile {
        let p = profile_projection(&batch, flat, &grid)?;
        summary["level"] = json!(p.level);
        summary["objective"] = json!(p.objective);
        summary["multimodal"] = json!(p.multimodal);
    }
    let text = serde_json::to_string_pretty(&summary)?;
    if let Some(path) = &args.summary {
        ensure_parent(path)?;
        fs::write(path, &text)?;
    }
    println!("{text}");
    Ok(())
}

fn cmd_limits(args: &LimitsArgs, seed: u64) -> Result<()> {
    let flat = parse_flat(&args.flat)?;
    let model = model(&args.model)?;
    let settings = LimitSettings { npaths: args.npaths, grid_m: args.grid_m, n_mc: args.n_mc };
    let key = StreamKey::new(seed, 0);
    let sample = match args.law {
        Law::Lx => sample_lx(&model, flat, args.x, settings, key)?,
        Law::W => sample_w(&model, flat, args.x, settings, key)?,
        Law::Normal => sample_normal(sigma_sq(&model, flat)?.sqrt(), args.npaths, key),
    };
    ensure_parent(&args.output)?;
    sample.write_csv(BufWriter::new(File::create(&args.output)?))?;
    println!("{}", serde_json::to_string_pretty(&sample.summary())?);
    Ok(())
}

fn cmd_reproduce(args: &ReproduceArgs, seed: u64) -> Result<bool> {
    let mut config = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(wicksell::Error::from)?
        }
        None if args.quick => ExperimentConfig::quick(),
        None => ExperimentConfig::default(),
    };
    if args.quick && args.config.is_some() {
        let q = ExperimentConfig::quick();
        config.replications = q.replications;
        config.limit = q.limit;
        config.figure_replications = q.figure_replications;
    }
    config.master_seed = seed;
    config.output_dir = args.output_dir.clone();
    config.svg |= args.svg;
    if let Some(m) = &args.model {
        config.model = m.clone();
    }
    if let Some(f) = &args.flat {
        config.flat = parse_flat(f)?;
    }
    if let Some(x) = args.x {
        config.x = x;
    }
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if let Some(p) = args.npaths {
        config.limit.npaths = p;
    }
    if let Some(g) = args.grid_m {
        config.limit.grid_m = g;
    }
    if let Some(s) = &args.sample_sizes {
        config.sample_sizes = s
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| wicksell::Error::InvalidArgument(format!("bad sample sizes `{s}`")))?;
    }
    config.validate()?;
    let model = load_model(&config.model)?;
    let out = reproduce(&config, &model)?;
    for row in &out.table1.rows {
        let n = row.n.map_or("limit".to_string(), |n| n.to_string());
        let cell = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.4}"));
        println!("{:<8} {:>6}  sd {}  (MC SE {})", row.statistic, n, cell(row.sd), cell(row.mc_se));
    }
    println!("outputs in {} (input hash {})", config.output_dir.display(), out.manifest.input_hash);
    let degenerate = out.table1.has_na() || out.equivalence.has_na();
    if degenerate {
        eprintln!("warning[degenerate_sample]: some standard deviations are undefined (NA); use at least 2 replications");
    }
    Ok(!degenerate)
}

fn exit_code(err: &anyhow::Error) -> (u8, &'static str) {
    match err.downcast_ref::<wicksell::Error>() {
        Some(e) if e.is_config_error() => (2, e.id()),
        Some(e) => (3, e.id()),
        None if err.downcast_ref::<std::io::Error>().is_some() => (3, "io"),
        None => (3, "runtime"),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let seed = resolve_seed(cli.seed)?;
    if let Some(k) = cli.threads {
        if k == 0 {
            bail!(wicksell::Error::InvalidArgument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    match &cli.command {
        Command::Sample(a) => cmd_sample(a, seed).map(|_| true),
        Command::Estimate(a) => cmd_estimate(a).map(|_| true),
        Command::Limits(a) => cmd_limits(a, seed).map(|_| true),
        Command::Reproduce(a) => cmd_reproduce(a, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            let (code, id) = exit_code(&e);
            eprintln!("error[{id}]: {e:#}");
            ExitCode::from(code)
        }
    }
}
