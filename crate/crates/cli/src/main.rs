use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tracedist::bitstr::edit_report;
use tracedist::channel::{generate_traces, write_trace_batch, TraceBatchHeader};
use tracedist::distinguish::{
    run_experiment, sample_pair, scaling_sweep, write_sweep_csv, FamilyKind, SweepConfig, SweepRow,
};
use tracedist::verify::{
    identity_suite, lemma2_suite, lemma3_suite, lemma4_suite, lemma5_suite, lemma6_suite, IdentityOptions,
    Lemma6Options, SuiteReport,
};
use tracedist::{seed, BitString, ChannelParam, ExperimentConfig};

const EXIT_VALIDATION: u8 = 1;
const EXIT_SUITE_FAILED: u8 = 2;

/// Distinguish binary strings within bounded edit distance from
/// deletion-channel traces.
#[derive(Parser, Debug)]
#[command(name = "tracedist", version)]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Working precision for certified evaluations.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(64..))]
    precision_bits: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw x and a distinct y from the edit ball of x.
    Gen {
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Monte Carlo error rate of the test on random pairs.
    Distinguish(DistinguishArgs),
    /// Run the experiment over a grid of (n, k, q).
    Sweep(SweepArgs),
    /// Run one of the property suites.
    Verify(VerifyArgs),
    /// Write a batch of traces of one string.
    ChannelSim {
        /// Source string; random of length --n when absent.
        #[arg(long, conflicts_with = "n")]
        x: Option<BitString>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        q: ChannelParam,
        /// Number of traces.
        #[arg(long = "N", alias = "count")]
        count: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Windows,
    Exhaustive,
    Sampled,
}

impl From<Family> for FamilyKind {
    fn from(f: Family) -> Self {
        match f {
            Family::Windows => FamilyKind::Windows,
            Family::Exhaustive => FamilyKind::Exhaustive,
            Family::Sampled => FamilyKind::Sampled,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct DistinguishArgs {
    /// JSON experiment config; other flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "0.2")]
    q: ChannelParam,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Traces per test instead of the Hoeffding size.
    #[arg(long = "N")]
    samples: Option<u64>,
    #[arg(long, value_enum, default_value_t = Family::Windows)]
    family: Family,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    q: Vec<ChannelParam>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long = "N")]
    samples: Option<u64>,
    #[arg(long, value_enum, default_value_t = Family::Windows)]
    family: Family,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Lemma {
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
    #[value(name = "5")]
    Five,
    #[value(name = "6")]
    Six,
    Identity,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    lemma: Lemma,
    /// Largest half-length checked by the extension suite.
    #[arg(long, default_value_t = 5)]
    max_p: usize,
    /// Multiset pairs for the divisibility suite.
    #[arg(long, default_value_t = 500)]
    pairs: usize,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    k_max: usize,
    #[arg(long, default_value_t = 3)]
    ell_max: usize,
    /// Evaluation-point pool size for the identity suite.
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Deletion probabilities for the certificate suite.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3")]
    q: Vec<ChannelParam>,
    /// Include every certificate in the report.
    #[arg(long)]
    certificates: bool,
}

fn open_out(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(path: &Option<PathBuf>, v: &Value) -> anyhow::Result<()> {
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn emit_csv(path: &Option<PathBuf>, rows: &[SweepRow]) -> anyhow::Result<()> {
    let mut out = open_out(path)?;
    write_sweep_csv(&mut out, rows)?;
    out.flush()?;
    Ok(())
}

fn cmd_gen(cli: &Cli, n: usize, k: usize) -> anyhow::Result<()> {
    if n == 0 {
        bail!("n must be positive");
    }
    let (x, y) = sample_pair(n, k, cli.seed)?;
    let rep = edit_report(x.bits(), y.bits());
    emit_json(
        &cli.out,
        &json!({
            "seed": cli.seed,
            "n": n,
            "k": k,
            "x": x,
            "y": y,
            "deletions": rep.deletions_needed,
            "insertions": rep.insertions_needed,
            "report": format!("{} del / {} ins", rep.deletions_needed, rep.insertions_needed),
            "in_ball": rep.deletions_needed <= k && rep.insertions_needed <= k,
        }),
    )
}

fn cmd_distinguish(cli: &Cli, a: &DistinguishArgs) -> anyhow::Result<()> {
    let cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => ExperimentConfig {
            n: a.n.expect("required by clap"),
            k: a.k,
            q: a.q.clone(),
            delta: a.delta,
            trials: a.trials,
            seed: cli.seed,
            n_override: a.samples,
            family: a.family.into(),
            budget: a.budget,
        },
    };
    let r = run_experiment(&cfg)?;
    eprintln!("{} trials in {:.2}s", r.trials, r.wall_time_secs);
    match a.format {
        Format::Json => emit_json(&cli.out, &serde_json::to_value(&r)?),
        Format::Csv => emit_csv(
            &cli.out,
            &[SweepRow {
                n: cfg.n,
                k: cfg.k,
                q: cfg.q.to_string(),
                gap: r.mean_gap,
                n_samples: r.mean_samples.ceil() as u64,
                error_rate: r.error_rate,
                seed: cfg.seed,
            }],
        ),
    }
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> anyhow::Result<()> {
    let cfg = SweepConfig {
        n: a.n.clone(),
        k: a.k.clone(),
        q: a.q.clone(),
        delta: a.delta,
        trials: a.trials,
        seed: cli.seed,
        n_override: a.samples,
        family: a.family.into(),
        budget: a.budget,
    };
    let r = scaling_sweep(&cfg)?;
    match a.format {
        Format::Json => emit_json(&cli.out, &json!({ "seed": cli.seed, "rows": r.rows, "slopes": r.slopes })),
        Format::Csv => {
            for s in &r.slopes {
                match s.slope {
                    Some(v) => eprintln!("k={} q={}: slope of ln N vs ln n = {v:.3}", s.k, s.q),
                    None => eprintln!("k={} q={}: slope needs two distinct n", s.k, s.q),
                }
            }
            emit_csv(&cli.out, &r.rows)
        }
    }
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> anyhow::Result<SuiteReport> {
    let seed = cli.seed;
    let report = match a.lemma {
        Lemma::Four => lemma4_suite(a.max_p),
        Lemma::Three => lemma3_suite(a.pairs, 8, 30, seed).0,
        Lemma::Five => lemma5_suite(a.instances, a.n_max.unwrap_or(60), a.k_max, seed)?,
        Lemma::Two => {
            let lo = a.n_min.unwrap_or(13);
            lemma2_suite(a.instances, a.k, (lo, a.n_max.unwrap_or(120)), seed)?.0
        }
        Lemma::Six => {
            let opts = Lemma6Options {
                instances: a.instances,
                n_range: (a.n_min.unwrap_or(50), a.n_max.unwrap_or(200)),
                qs: a.q.clone(),
                precision_bits: cli.precision_bits,
                keep_certificates: a.certificates,
                ..Default::default()
            };
            lemma6_suite(&opts, seed)?.0
        }
        Lemma::Identity => {
            let mut opts = IdentityOptions {
                n_max: a.n_max.unwrap_or(10),
                ell_max: a.ell_max,
                points: a.points,
                ..Default::default()
            };
            if let Some(b) = cli.precision_bits {
                opts.precision_bits = b;
            }
            identity_suite(&opts, seed)?
        }
    };
    let mut v = serde_json::to_value(&report)?;
    v["seed"] = json!(seed);
    v["passed"] = json!(report.passed());
    emit_json(&cli.out, &v)?;
    Ok(report)
}

fn cmd_channel_sim(cli: &Cli, x: &Option<BitString>, n: Option<usize>, q: &ChannelParam, count: usize) -> anyhow::Result<()> {
    let x = match (x, n) {
        (Some(x), _) => x.clone(),
        (None, Some(n)) => BitString::random(n, &mut seed::derived_rng(cli.seed, &[0])),
        (None, None) => bail!("either --x or --n is required"),
    };
    let traces = generate_traces(&x, q, seed::derive(cli.seed, &[1]), count);
    let header = TraceBatchHeader {
        n: x.len(),
        q: q.clone(),
        seed: cli.seed,
        count,
    };
    let mut out = open_out(&cli.out)?;
    write_trace_batch(&mut out, &header, &traces)?;
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match &cli.command {
        Command::Gen { n, k } => cmd_gen(cli, *n, *k)?,
        Command::Distinguish(a) => cmd_distinguish(cli, a)?,
        Command::Sweep(a) => cmd_sweep(cli, a)?,
        Command::Verify(a) => {
            let r = cmd_verify(cli, a)?;
            if !r.passed() {
                eprintln!("{}: {} of {} checks failed", r.suite, r.failures, r.checked);
                return Ok(ExitCode::from(EXIT_SUITE_FAILED));
            }
        }
        Command::ChannelSim { x, n, q, count } => cmd_channel_sim(cli, x, *n, q, *count)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
