//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::approx::{approx_profile_with, execution_dprime, ApproxParams};
use crate::correlation::Backend;
use crate::error::{Error, Result};
use crate::exact::{hamming_profile_convolution_with, hamming_profile_naive, ConvolutionOptions};
use crate::io::{self, InputFormat};
use crate::karloff::{karloff_profile_with, KarloffParams};
use crate::params::default_reps;
use crate::selftest;
use crate::sparse_recovery::write_dprime_csv;
use crate::stats::{error_stats, ErrorStats};
use crate::text_model::{generate_instance, DistanceProfile, InstanceModel, IntString};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "approx-hamming", version, about = "Sliding-window Hamming distance, exact and approximate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Exact profile.
    Exact(ExactArgs),
    /// Baseline projection estimator.
    Karloff(EstimateArgs),
    /// Corrected estimator with sparse recovery.
    Approx(ApproxArgs),
    /// Time every algorithm over a parameter grid.
    Bench(BenchArgs),
    /// Run built-in oracle checks.
    Selftest,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 16)]
    sigma: u32,
    #[arg(long, default_value = "uniform")]
    model: InstanceModel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    text: PathBuf,
    #[arg(long)]
    pattern: PathBuf,
    /// Output format; bytes needs sigma <= 256.
    #[arg(long, default_value = "tokens")]
    format: InputFormat,
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    text: PathBuf,
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long, default_value = "tokens")]
    input_format: InputFormat,
    #[arg(long, default_value = "auto")]
    backend: Backend,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExactArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Use the position-by-position matcher.
    #[arg(long)]
    naive: bool,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Executions in the median; defaults to ceil(2 log2 n).
    #[arg(long)]
    reps: Option<usize>,
    /// Round estimates to the nearest integer.
    #[arg(long)]
    round: bool,
    /// Write an accuracy summary against the exact profile to `<out>.json`.
    #[arg(long)]
    stats: bool,
}

#[derive(Debug, Args)]
struct ApproxArgs {
    #[command(flatten)]
    common: EstimateArgs,
    /// Reuse one sparse noise matrix across executions.
    #[arg(long)]
    share_dprime: bool,
    /// Write the first execution's sparse noise matrices as CSV.
    #[arg(long)]
    dump_dprime: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "16384")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "512")]
    m: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "16")]
    sigma: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    epsilon: Vec<f64>,
    #[arg(long, default_value = "uniform")]
    model: InstanceModel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value = "auto")]
    backend: Backend,
    /// Algorithms to run, from naive, convolution, karloff, approx.
    #[arg(long, value_delimiter = ',', default_value = "convolution,karloff,approx")]
    algos: Vec<Algo>,
    /// CSV report; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON copy of the report.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Naive,
    Convolution,
    Karloff,
    Approx,
}

impl std::str::FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "naive" => Ok(Self::Naive),
            "convolution" => Ok(Self::Convolution),
            "karloff" => Ok(Self::Karloff),
            "approx" => Ok(Self::Approx),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Convolution => "convolution",
            Self::Karloff => "karloff",
            Self::Approx => "approx",
        }
    }
}

/// One timed run of the benchmark grid.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub algo: Algo,
    pub n: usize,
    pub m: usize,
    pub sigma: u32,
    pub epsilon: f64,
    pub seconds: f64,
    pub frac_within_eps: f64,
    pub max_rel_err: f64,
}

pub const BENCH_HEADER: &str = "algo,n,m,sigma,epsilon,seconds,frac_within_eps,max_rel_err";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6},{},{}",
            r.algo.name(),
            r.n,
            r.m,
            r.sigma,
            r.epsilon,
            r.seconds,
            r.frac_within_eps,
            r.max_rel_err
        );
    }
    s
}

/// Wall time of each algorithm by epsilon, with the growth ratio between
/// consecutive epsilon values.
pub fn scaling_table(rows: &[BenchRow]) -> String {
    let mut s = String::from("algo,n,m,sigma,epsilon,seconds,ratio_to_previous\n");
    for algo in [Algo::Karloff, Algo::Approx] {
        let mut sel: Vec<&BenchRow> = rows.iter().filter(|r| r.algo == algo).collect();
        sel.sort_by(|a, b| {
            (a.n, a.m, a.sigma)
                .cmp(&(b.n, b.m, b.sigma))
                .then(b.epsilon.total_cmp(&a.epsilon))
        });
        let mut prev: Option<&BenchRow> = None;
        for r in sel {
            let ratio = match prev {
                Some(p) if (p.n, p.m, p.sigma) == (r.n, r.m, r.sigma) && p.seconds > 0.0 => {
                    format!("{:.3}", r.seconds / p.seconds)
                }
                _ => String::new(),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.6},{}",
                algo.name(),
                r.n,
                r.m,
                r.sigma,
                r.epsilon,
                r.seconds,
                ratio
            );
            prev = Some(r);
        }
    }
    s
}

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub model: InstanceModel,
    pub seed: u64,
    pub reps: Option<usize>,
    pub backend: Backend,
}

/// Times `algos` on one generated instance per `(n, m, sigma)` and each
/// epsilon. Accuracy is measured against the convolution profile.
pub fn run_bench(
    grid_n: &[usize],
    grid_m: &[usize],
    grid_sigma: &[u32],
    grid_eps: &[f64],
    algos: &[Algo],
    cfg: BenchConfig,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in grid_n {
        for &m in grid_m {
            for &sigma in grid_sigma {
                let (t, p) = generate_instance(n, m, sigma, cfg.model, cfg.seed)?;
                let opts = ConvolutionOptions {
                    backend: cfg.backend,
                    sigma_cap: sigma.max(crate::exact::DEFAULT_SIGMA_CAP),
                };
                let exact = hamming_profile_convolution_with(&t, &p, opts)?;
                let reps = cfg.reps.unwrap_or_else(|| default_reps(n));
                let mut row = |algo: Algo, epsilon: f64, f: &dyn Fn() -> Result<DistanceProfile>| {
                    let start = Instant::now();
                    let est = f()?;
                    let seconds = start.elapsed().as_secs_f64();
                    let s = error_stats(&est, &exact, epsilon)?;
                    rows.push(BenchRow {
                        algo,
                        n,
                        m,
                        sigma,
                        epsilon,
                        seconds,
                        frac_within_eps: s.fraction_within_epsilon,
                        max_rel_err: s.max_relative_error,
                    });
                    Ok::<_, Error>(())
                };
                for &algo in algos {
                    match algo {
                        Algo::Naive => row(algo, 0.0, &|| hamming_profile_naive(&t, &p))?,
                        Algo::Convolution => {
                            row(algo, 0.0, &|| hamming_profile_convolution_with(&t, &p, opts))?
                        }
                        Algo::Karloff | Algo::Approx => {}
                    }
                }
                for &epsilon in grid_eps {
                    for &algo in algos {
                        match algo {
                            Algo::Karloff => row(algo, epsilon, &|| {
                                let kp = KarloffParams::new(epsilon, cfg.seed)?
                                    .with_backend(cfg.backend);
                                karloff_profile_with(&t, &p, &kp, reps)
                            })?,
                            Algo::Approx => row(algo, epsilon, &|| {
                                let ap = ApproxParams {
                                    reps,
                                    backend: cfg.backend,
                                    ..ApproxParams::new(epsilon, n, cfg.seed)?
                                };
                                approx_profile_with(&t, &p, &ap)
                            })?,
                            Algo::Naive | Algo::Convolution => {}
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Parses `argv` (program name first), runs the subcommand, and returns
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Exact(a) => exact(a),
        Command::Karloff(a) => karloff(a),
        Command::Approx(a) => approx(a),
        Command::Bench(a) => bench(a),
        Command::Selftest => {
            let report = selftest::run();
            print!("{}", report.summary());
            Ok(if report.passed() { EXIT_OK } else { EXIT_SELFTEST })
        }
    }
}

fn gen(a: GenArgs) -> Result<i32> {
    if a.format == InputFormat::Bytes && a.sigma > 256 {
        return Err(Error::Parameter(format!(
            "byte output needs sigma <= 256, got {}",
            a.sigma
        )));
    }
    let (t, p) = generate_instance(a.n, a.m, a.sigma, a.model, a.seed)?;
    for (path, s) in [(&a.text, &t), (&a.pattern, &p)] {
        match a.format {
            InputFormat::Tokens => io::write_tokens(path, s)?,
            InputFormat::Bytes => {
                let bytes: Vec<u8> = s.symbols().iter().map(|&x| x as u8).collect();
                io::write_file(path, &bytes)?
            }
        }
    }
    Ok(EXIT_OK)
}

fn load(input: &InputArgs) -> Result<(IntString, IntString)> {
    Ok((
        io::read_string(&input.text, input.input_format)?,
        io::read_string(&input.pattern, input.input_format)?,
    ))
}

fn exact(a: ExactArgs) -> Result<i32> {
    let (t, p) = load(&a.input)?;
    let profile = if a.naive {
        hamming_profile_naive(&t, &p)?
    } else {
        let opts = ConvolutionOptions {
            backend: a.input.backend,
            ..Default::default()
        };
        hamming_profile_convolution_with(&t, &p, opts)?
    };
    io::write_profile_file(&a.input.out, &profile)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct StatsReport<'a> {
    algo: &'a str,
    n: usize,
    m: usize,
    sigma: u32,
    epsilon: f64,
    seed: u64,
    reps: usize,
    stats: ErrorStats,
    seconds: f64,
}

fn stats_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    algo: &str,
    a: &EstimateArgs,
    t: &IntString,
    p: &IntString,
    reps: usize,
    profile: DistanceProfile,
    seconds: f64,
) -> Result<i32> {
    let profile = if a.round { profile.rounded() } else { profile };
    io::write_profile_file(&a.input.out, &profile)?;
    if a.stats {
        let exact = hamming_profile_convolution_with(
            t,
            p,
            ConvolutionOptions {
                backend: a.input.backend,
                sigma_cap: crate::text_model::MAX_SIGMA,
            },
        )?;
        let report = StatsReport {
            algo,
            n: t.len(),
            m: p.len(),
            sigma: t.sigma().max(p.sigma()),
            epsilon: a.epsilon,
            seed: a.seed,
            reps,
            stats: error_stats(&profile, &exact, a.epsilon)?,
            seconds,
        };
        let json = serde_json::to_string_pretty(&report).expect("plain data serializes");
        io::write_file(&stats_path(&a.input.out), json.as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn karloff(a: EstimateArgs) -> Result<i32> {
    let (t, p) = load(&a.input)?;
    let reps = a.reps.unwrap_or_else(|| default_reps(t.len()));
    let params = KarloffParams::new(a.epsilon, a.seed)?.with_backend(a.input.backend);
    let start = Instant::now();
    let profile = karloff_profile_with(&t, &p, &params, reps)?;
    finish("karloff", &a, &t, &p, reps, profile, start.elapsed().as_secs_f64())
}

fn approx(a: ApproxArgs) -> Result<i32> {
    let c = &a.common;
    let (t, p) = load(&c.input)?;
    let reps = c.reps.unwrap_or_else(|| default_reps(t.len()));
    let params = ApproxParams {
        reps,
        backend: c.input.backend,
        share_dprime: a.share_dprime,
        ..ApproxParams::new(c.epsilon, t.len(), c.seed)?
    };
    let start = Instant::now();
    let profile = approx_profile_with(&t, &p, &params)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(path) = &a.dump_dprime {
        let d = execution_dprime(&t, &p, &params, 0)?;
        let mut buf = Vec::new();
        write_dprime_csv(&mut buf, &d, 0).expect("writing to memory");
        io::write_file(path, &buf)?;
    }
    finish("approx", c, &t, &p, reps, profile, seconds)
}

fn bench(a: BenchArgs) -> Result<i32> {
    let cfg = BenchConfig {
        model: a.model,
        seed: a.seed,
        reps: a.reps,
        backend: a.backend,
    };
    let rows = run_bench(&a.n, &a.m, &a.sigma, &a.epsilon, &a.algos, cfg)?;
    let csv = bench_csv(&rows);
    match &a.out {
        Some(path) => io::write_file(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    if let Some(path) = &a.json {
        let json = serde_json::to_string_pretty(&rows).expect("plain data serializes");
        io::write_file(path, json.as_bytes())?;
    }
    if a.epsilon.len() > 1 {
        eprint!("{}", scaling_table(&rows));
    }
    Ok(EXIT_OK)
}
