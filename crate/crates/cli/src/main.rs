//! `tracelab`: generate structured binary strings, corrupt them through an
//! i.i.d. deletion channel, reconstruct them from traces, and run reproducible
//! benchmark sweeps.
//!
//! Strings travel on stdin/stdout as ASCII `0`/`1`, one string per line.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tracelab_core::bits::Bits;
use tracelab_core::channel::{sample_trace, ChannelParams};
use tracelab_core::classes::{self, ClassKind, ClassSpec};
use tracelab_core::distance::{edit_distance, edit_distance_banded, BandedDistance};
use tracelab_core::harness::{self, AlgoId, ExperimentConfig};
use tracelab_core::likelihood::{traces_to_distinguish, LikelihoodModel, TraceDemand};
use tracelab_core::recon::{self, GapParams};
use tracelab_core::seed::derive_seed;

const SEED_ENV: &str = "TRACELAB_SEED";

#[derive(Parser)]
#[command(
    name = "tracelab",
    version,
    about = "Approximate trace reconstruction over the deletion channel",
    long_about = "Generate strings from structured classes, corrupt them through an i.i.d. \
                  deletion channel, reconstruct them from traces, probe how many traces \
                  distinguish hard instance pairs, and run reproducible benchmark sweeps."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a string from one of the studied classes
    Generate(GenerateArgs),
    /// Pass strings from stdin through the deletion channel
    Corrupt(CorruptArgs),
    /// Reconstruct a string from traces on stdin
    Reconstruct(ReconstructArgs),
    /// Edit distance between the first lines of two files
    Evaluate(EvaluateArgs),
    /// Run a config-driven experiment sweep
    Sweep(SweepArgs),
    /// Estimate how many traces distinguish a candidate pair
    Distinguish(DistinguishArgs),
    /// Summarize a sweep CSV
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// all-long-runs | long-one-runs | gap | perturbed-gap | dense-intervals | random
    #[arg(long)]
    class: ClassKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Defaults to the per-class constant when omitted
    #[arg(long)]
    cprime: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the string here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON metadata sidecar path (defaults to `<out>.meta.json` when --out is set)
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Traces emitted per input line
    #[arg(long, default_value_t = 1)]
    traces: usize,
    /// Accept exact q = 0 or q = 1 (test channels)
    #[arg(long)]
    allow_exact_q: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    /// longruns | longruns-robust | oneruns | gap | gap-robust | majority
    #[arg(long)]
    algo: AlgoId,
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    #[arg(long)]
    cprime: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Length of the unknown source string
    #[arg(long)]
    n: usize,
    /// Short-run allowance for longruns-robust
    #[arg(long, default_value_t = 0)]
    s: usize,
    /// Write the JSON report here instead of stderr
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    a: PathBuf,
    b: PathBuf,
    /// Stop early once the distance provably exceeds this budget
    #[arg(long)]
    band: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct DistinguishArgs {
    /// hard:<k> | hamming:<k> | files:<a>,<b>
    #[arg(long)]
    pair: String,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Target success probability in (1/2, 1)
    #[arg(long, default_value_t = 0.625)]
    target: f64,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4096)]
    t_cap: usize,
}

#[derive(Args)]
struct SummarizeArgs {
    csv: PathBuf,
    #[arg(long)]
    json: bool,
}

fn main() -> Result<()> {
    // die quietly when a downstream pipe closes, like other line filters
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match Cli::parse().cmd {
        Cmd::Generate(args) => generate(args),
        Cmd::Corrupt(args) => corrupt(args),
        Cmd::Reconstruct(args) => reconstruct(args),
        Cmd::Evaluate(args) => evaluate(args),
        Cmd::Sweep(args) => sweep(args),
        Cmd::Distinguish(args) => distinguish(args),
        Cmd::Summarize(args) => summarize(args),
    }
}

/// `TRACELAB_SEED` overrides any seed given on the command line or in configs.
fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .with_context(|| format!("{SEED_ENV} must be an unsigned 64-bit integer, got {v:?}")),
        Err(_) => Ok(flag),
    }
}

fn class_default_c_prime(kind: ClassKind, p: f64) -> f64 {
    let algo = match kind {
        ClassKind::AllLongRuns => AlgoId::Longruns,
        ClassKind::LongOneRuns => AlgoId::Oneruns,
        ClassKind::GapClass => AlgoId::Gap,
        ClassKind::PerturbedGap => AlgoId::GapRobust,
        ClassKind::DenseIntervals => AlgoId::Majority,
        ClassKind::Random => return 1.0,
    };
    harness::default_c_prime(algo, p)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let seed = effective_seed(args.seed)?;
    let c_prime = args.cprime.unwrap_or_else(|| class_default_c_prime(args.class, 1.0 - args.q));
    let spec = ClassSpec {
        class_kind: args.class,
        n: args.n,
        epsilon: args.epsilon,
        c_prime,
        q: args.q,
        seed,
    };
    let (string, meta) = classes::generate(&spec)?;
    match &args.out {
        Some(path) => write_text(path, &format!("{string}\n"))?,
        None => println!("{string}"),
    }
    let meta_path = args.meta.or_else(|| {
        args.out.as_ref().map(|p| PathBuf::from(format!("{}.meta.json", p.display())))
    });
    if let Some(path) = meta_path {
        let doc = serde_json::json!({ "spec": spec, "meta": meta });
        write_text(&path, &format!("{doc:#}\n"))?;
    }
    Ok(())
}

fn corrupt(args: CorruptArgs) -> Result<()> {
    let seed = effective_seed(args.seed)?;
    let in_range = (ChannelParams::MIN_Q..=ChannelParams::MAX_Q).contains(&args.q);
    if !in_range && !args.allow_exact_q {
        bail!(
            "q = {} outside [{}, {}]; pass --allow-exact-q for endpoint channels",
            args.q,
            ChannelParams::MIN_Q,
            ChannelParams::MAX_Q
        );
    }
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    for (line_idx, line) in io::stdin().lock().lines().enumerate() {
        let line = line.context("reading stdin")?;
        if line.is_empty() {
            continue;
        }
        let x: Bits = line.parse().with_context(|| format!("input line {}", line_idx + 1))?;
        let line_seed = derive_seed(&[seed, line_idx as u64]);
        let ch = if in_range {
            ChannelParams::new(args.q, line_seed)?
        } else {
            ChannelParams::bypass_validation(args.q, line_seed)
        };
        for trial in 0..args.traces as u64 {
            writeln!(out, "{}", sample_trace(&x, &ch, trial))?;
        }
    }
    Ok(())
}

fn reconstruct(args: ReconstructArgs) -> Result<()> {
    let traces: Vec<Bits> = io::stdin()
        .lock()
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.is_empty() => None,
            Ok(l) => Some(l.parse().with_context(|| format!("trace line {}", i + 1))),
            Err(e) => Some(Err(e).context("reading stdin")),
        })
        .collect::<Result<_>>()?;
    let p = 1.0 - args.q;
    let c_prime = args.cprime.unwrap_or_else(|| harness::default_c_prime(args.algo, p));
    let first = || -> Result<&Bits> {
        traces.first().ok_or_else(|| anyhow::anyhow!("no traces on stdin"))
    };
    let report = match args.algo {
        AlgoId::Longruns => recon::recon_long_runs(&traces, p)?,
        AlgoId::LongrunsRobust => recon::recon_long_runs_robust(&traces, args.s, p)?,
        AlgoId::Oneruns => recon::recon_one_runs(first()?, args.epsilon, p, args.q, args.n),
        AlgoId::Gap => {
            let params = GapParams::derive(args.epsilon, c_prime, args.q, args.n)?;
            recon::recon_gap(&traces, &params)?
        }
        AlgoId::GapRobust => {
            let params = GapParams::derive(args.epsilon, c_prime, args.q, args.n)?;
            recon::recon_gap_robust(&traces, &params)?
        }
        AlgoId::Majority => recon::recon_majority(first()?, args.epsilon, p, args.q, args.n),
    };
    println!("{}", report.output);
    let doc = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => write_text(path, &format!("{doc}\n"))?,
        None => eprintln!("{doc}"),
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let a = read_first_line(&args.a)?;
    let b = read_first_line(&args.b)?;
    let (distance, exceeds) = match args.band {
        Some(band) => match edit_distance_banded(&a, &b, band) {
            BandedDistance::Exact(d) => (Some(d), false),
            BandedDistance::ExceedsBand => (None, true),
        },
        None => (Some(edit_distance(&a, &b)), false),
    };
    if args.json {
        let longest = a.len().max(b.len()).max(1);
        let doc = serde_json::json!({
            "edit_distance": distance,
            "exceeds_band": exceeds,
            "len_a": a.len(),
            "len_b": b.len(),
            "normalized": distance.map(|d| d as f64 / longest as f64),
        });
        println!("{doc}");
    } else if let Some(d) = distance {
        println!("{d}");
    } else {
        println!("exceeds-band");
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    cfg.master_seed = effective_seed(cfg.master_seed)?;
    let out = harness::run_sweep(&cfg)?;
    print!("{}", harness::render_summary(&out.summary));
    if let Some(path) = &cfg.output_csv {
        eprintln!("wrote {} records to {}", out.records.len(), path.display());
    }
    if let Some(path) = &cfg.output_summary {
        eprintln!("wrote summary to {}", path.display());
    }
    Ok(())
}

fn distinguish(args: DistinguishArgs) -> Result<()> {
    let seed = effective_seed(args.seed)?;
    let (a, b) = parse_pair(&args.pair)?;
    let model = LikelihoodModel::new(a, b, args.q)?;
    let (demand, curve) = traces_to_distinguish(&model, args.target, args.trials, seed, args.t_cap)?;
    let t_star = match demand {
        TraceDemand::Found(t) => Some(t),
        TraceDemand::ExceedsCap => None,
    };
    let doc = serde_json::json!({
        "t_star": t_star,
        "exceeds_cap": t_star.is_none(),
        "target": args.target,
        "trials": args.trials,
        "q": args.q,
        "success_curve": curve,
    });
    println!("{doc:#}");
    Ok(())
}

fn parse_pair(pair: &str) -> Result<(Bits, Bits)> {
    if let Some(k) = pair.strip_prefix("hard:") {
        let k: usize = k.parse().context("hard:<k> needs an integer k >= 1")?;
        if k == 0 {
            bail!("hard:<k> needs k >= 1");
        }
        return Ok(classes::gen_hard_pair(k));
    }
    if let Some(k) = pair.strip_prefix("hamming:") {
        let k: usize = k.parse().context("hamming:<k> needs an integer k >= 1")?;
        if k == 0 {
            bail!("hamming:<k> needs k >= 1");
        }
        return Ok(classes::gen_hamming_pair(k));
    }
    if let Some(paths) = pair.strip_prefix("files:") {
        let (pa, pb) = paths
            .split_once(',')
            .context("files:<a>,<b> needs two comma-separated paths")?;
        return Ok((read_first_line(Path::new(pa))?, read_first_line(Path::new(pb))?));
    }
    bail!("--pair must be hard:<k>, hamming:<k>, or files:<a>,<b>");
}

fn summarize(args: SummarizeArgs) -> Result<()> {
    let text = fs::read_to_string(&args.csv)
        .with_context(|| format!("reading {}", args.csv.display()))?;
    let records = harness::parse_csv(&text)?;
    let summary = harness::summarize(&records);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print!("{}", harness::render_summary(&summary));
    }
    Ok(())
}

fn read_first_line(path: &Path) -> Result<Bits> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let line = text.lines().next().unwrap_or("");
    line.parse().with_context(|| format!("parsing {}", path.display()))
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}
