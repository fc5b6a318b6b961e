//! Command-line surface. Exit codes: 0 success, 1 runtime failure,
//! 2 usage or configuration error, 3 parameters outside the supported
//! regime.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cbc::{cbc_construct_with, CbcOptions, Criterion, Search};
use crate::error::{Error, Result};
use crate::harness::{fit_slope, read_records, sweep, write_records, Regime, SweepConfig, VectorCache};
use crate::infdim::{plan_fixed, plan_multilevel, FixedRule, MultilevelRule, PlanTuning};
use crate::io::{
    parse_beta, parse_real_list, read_plan, read_vector, write_merit, write_plan, write_points, write_vector,
    PlanFile, WeightConfig,
};
use crate::polylattice::generate_points;
use crate::scramble::{scramble, ScrambleKind, ScrambleSpec};
use crate::wspace::{ProductIntegrand, Shape, WeightSequence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_REGIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "polylat", about = "Scrambled polynomial lattice rules for infinite-dimensional integration")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Weight decay: gamma_j = cscale * j^-alpha.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, global = true, default_value_t = 0.5)]
    anchor: f64,
    /// linear or quadratic.
    #[arg(long, global = true, default_value = "linear")]
    shape: String,
    #[arg(long, global = true, default_value_t = crate::harness::DEFAULT_REPLICATES)]
    reps: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Comma-separated budgets; entries may be written 2^k.
    #[arg(long = "budget-list", global = true)]
    budget_list: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    cscale: Option<f64>,
    /// Explicit comma-separated weights.
    #[arg(long, global = true)]
    gamma: Option<String>,
    /// Real or comma-separated list.
    #[arg(long, global = true)]
    beta: Option<String>,
    /// full or random:C; default full up to m = 10.
    #[arg(long, global = true)]
    search: Option<String>,
    /// worst-case or scrambled-mean.
    #[arg(long, global = true)]
    criterion: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a generating vector by CBC; writes the vector file and a
    /// `.merit.csv` sidecar.
    Construct {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        s: usize,
    },
    /// Dump the points of a vector file, optionally scrambled.
    Points {
        #[arg(long = "vector", alias = "in")]
        vector: PathBuf,
        #[arg(long)]
        s: Option<usize>,
        /// none, owen or linear_shift.
        #[arg(long, default_value = "none")]
        scramble: String,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Write a fixed or multilevel plan for one budget.
    Plan {
        #[arg(long)]
        regime: String,
        #[arg(long = "budget")]
        budget: u64,
    },
    /// One estimate from a plan file.
    Integrate {
        #[arg(long)]
        plan: PathBuf,
        /// Vector file for a fixed plan; built by CBC when absent.
        #[arg(long)]
        vector: Option<PathBuf>,
        #[arg(long, default_value = "owen")]
        scramble: String,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Error-versus-cost sweep as CSV.
    Sweep {
        #[arg(long)]
        regime: String,
        #[arg(long, default_value = "owen")]
        scramble: String,
    },
    /// Fit log2 rmse against log2 N from a sweep CSV.
    Slope {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OutOfRegime(_) => EXIT_REGIME,
        Error::Io(_) | Error::BoundViolated(_) => EXIT_FAILURE,
        _ => EXIT_CONFIG,
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

impl Global {
    fn weights(&self) -> Result<WeightSequence<f64>> {
        let cfg = WeightConfig {
            alpha: self.alpha,
            cscale: self.cscale,
            gamma: self.gamma.as_deref().map(parse_real_list).transpose()?,
        };
        cfg.weights()
    }

    fn integrand(&self, weights: WeightSequence<f64>) -> Result<ProductIntegrand<f64>> {
        let beta = self.beta.as_deref().map(parse_beta).transpose()?.unwrap_or_default();
        ProductIntegrand::new(weights, Shape::parse(&self.shape)?, beta).normalized()
    }

    fn criterion(&self, default: Criterion) -> Result<Criterion> {
        self.criterion.as_deref().map_or(Ok(default), Criterion::parse)
    }

    fn search(&self) -> Result<Option<Search>> {
        self.search.as_deref().map(Search::parse).transpose()
    }

    fn budgets(&self) -> Result<Vec<u64>> {
        let list = self.budget_list.as_deref().ok_or_else(|| Error::Config("--budget-list is required".into()))?;
        list.split(',').map(parse_budget).collect()
    }
}

fn parse_budget(t: &str) -> Result<u64> {
    let t = t.trim();
    let bad = || Error::Config(format!("bad budget {t:?}"));
    if let Some(k) = t.strip_prefix("2^") {
        let k: u32 = k.parse().map_err(|_| bad())?;
        return 1u64.checked_shl(k).filter(|_| k < 64).ok_or_else(bad);
    }
    t.parse().map_err(|_| bad())
}

fn scramble_kind(s: &str) -> Result<Option<ScrambleKind>> {
    match s {
        "none" => Ok(None),
        other => ScrambleKind::parse(other).map(Some),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Construct { m, s } => {
            let ws = g.weights()?;
            let criterion = g.criterion(Criterion::WorstCase)?;
            let search = g.search()?.unwrap_or(Search::auto(*m));
            let (vector, report) = cbc_construct_with(*m, *s, &ws, &CbcOptions::new(search, criterion))?;
            let mut out = output(&g.out)?;
            write_vector(&mut out, &vector)?;
            out.flush()?;
            if let Some(p) = &g.out {
                let mut merit = p.clone().into_os_string();
                merit.push(".merit.csv");
                write_merit(BufWriter::new(File::create(PathBuf::from(merit))?), &report)?;
            }
        }
        Command::Points { vector, s, scramble: kind, replicate } => {
            let v = read_vector(open(vector)?)?;
            let ps = generate_points(&v, s.unwrap_or(v.dims()))?;
            let mut out = output(&g.out)?;
            match scramble_kind(kind)? {
                None => write_points(&mut out, &ps.values::<f64>(), ps.s(), None)?,
                Some(k) => {
                    let spec = ScrambleSpec { kind: k, ..ScrambleSpec::owen(g.seed, *replicate) };
                    let sps = scramble::<f64>(&ps, &spec)?;
                    write_points(&mut out, sps.values(), ps.s(), Some(&spec))?;
                }
            }
            out.flush()?;
        }
        Command::Plan { regime, budget } => {
            let alpha = g.alpha.ok_or_else(|| Error::Config("--alpha is required".into()))?;
            let t = PlanTuning::default();
            let plan = match Regime::parse(regime)? {
                Regime::Fixed => PlanFile::Fixed(plan_fixed(*budget, alpha, g.eps, g.anchor, &t)?),
                Regime::Multilevel => PlanFile::Multilevel(plan_multilevel(*budget, alpha, g.eps, g.anchor, &t)?),
            };
            let mut out = output(&g.out)?;
            write_plan(&mut out, &plan)?;
            out.flush()?;
        }
        Command::Integrate { plan, vector, scramble: kind, replicate } => {
            let plan = read_plan(open(plan)?)?;
            let ws = match (g.alpha, &g.gamma, &plan) {
                (None, None, PlanFile::Fixed(p)) if p.alpha.is_finite() => {
                    WeightSequence::power_law(g.cscale.unwrap_or(1.0), p.alpha)?
                }
                (None, None, PlanFile::Multilevel(p)) if p.alpha.is_finite() => {
                    WeightSequence::power_law(g.cscale.unwrap_or(1.0), p.alpha)?
                }
                _ => g.weights()?,
            };
            let f = g.integrand(ws.clone())?;
            let kind = scramble_kind(kind)?;
            let spec = ScrambleSpec { kind: kind.unwrap_or(ScrambleKind::Owen), ..ScrambleSpec::owen(g.seed, *replicate) };
            let mut cache = VectorCache::new(ws, g.criterion(Criterion::ScrambledMean)?, g.search()?);
            let (estimate, truncated) = match &plan {
                PlanFile::Fixed(p) => {
                    let v = match vector {
                        Some(path) => read_vector(open(path)?)?,
                        None => cache.get(p.m(), p.s)?,
                    };
                    let rule = FixedRule::new(&f, p, &v)?;
                    let q = if kind.is_some() { rule.estimate(&spec)? } else { rule.deterministic_estimate() };
                    (q, f.truncated_integral(p.s, p.anchor)?)
                }
                PlanFile::Multilevel(p) => {
                    if vector.is_some() {
                        return Err(Error::Config("multilevel plans build one vector per level; drop --vector".into()));
                    }
                    if kind.is_none() {
                        return Err(Error::Config("multilevel estimates need a scramble".into()));
                    }
                    let vs = p.levels.iter().map(|l| cache.get(l.m(), l.s)).collect::<Result<Vec<_>>>()?;
                    let rule = MultilevelRule::new(&f, p, &vs)?;
                    (rule.estimate(&spec)?, f.truncated_integral(p.top_dim(), p.anchor)?)
                }
            };
            let mut out = output(&g.out)?;
            writeln!(out, "estimate={estimate}")?;
            writeln!(out, "truncated_integral={truncated}")?;
            writeln!(out, "integral={}", f.exact_integral()?)?;
            out.flush()?;
        }
        Command::Sweep { regime, scramble: kind } => {
            let alpha = g.alpha.ok_or_else(|| Error::Config("--alpha is required".into()))?;
            let mut cfg = SweepConfig::new(Regime::parse(regime)?, alpha, g.eps);
            cfg.anchor = g.anchor;
            cfg.shape = Shape::parse(&g.shape)?;
            if let Some(b) = &g.beta {
                cfg.beta = parse_beta(b)?;
            }
            cfg.cscale = g.cscale.unwrap_or(1.0);
            cfg.reps = g.reps;
            cfg.seed = g.seed;
            cfg.scramble = scramble_kind(kind)?.ok_or_else(|| Error::Config("sweeps need a scramble".into()))?;
            cfg.criterion = g.criterion(Criterion::ScrambledMean)?;
            cfg.search = g.search()?;
            let records = sweep(&cfg, &g.budgets()?)?;
            let mut out = output(&g.out)?;
            write_records(&mut out, &records)?;
            out.flush()?;
        }
        Command::Slope { input } => {
            let records = read_records(open(input)?)?;
            let fit = fit_slope(&records)?;
            let mut out = output(&g.out)?;
            writeln!(out, "slope={:.4}", fit.slope)?;
            writeln!(out, "intercept={:.4}", fit.intercept)?;
            writeln!(out, "r2={:.6}", fit.r_squared)?;
            writeln!(out, "points={}", fit.used)?;
            out.flush()?;
        }
    }
    Ok(())
}
