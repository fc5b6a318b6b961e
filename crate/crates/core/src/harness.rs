//! Experiment runner: RMSE over independent scrambles, error-versus-cost
//! sweeps, and log-log slope fits.
//!
//! A single integrand's RMSE is a lower bound on the worst-case error over
//! the unit ball; fitted slopes are read as rates, not constants.

use std::collections::HashMap;
use std::io::{Read, Write};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::cbc::{cbc_construct_with, wce_squared, CbcOptions, Criterion, MeritReport, Search};
use crate::error::{Error, Result};
use crate::infdim::{plan_fixed, plan_multilevel, FixedPlan, FixedRule, MultilevelPlan, MultilevelRule, PlanTuning};
use crate::polylattice::{GeneratingVector, PointSet};
use crate::real::{CompensatedSum, Real};
use crate::scramble::{deterministic_quadrature, ScrambleKind, ScrambleSpec, DEFAULT_DEPTH};
use crate::wspace::{Beta, ProductIntegrand, Shape, WeightSequence};

pub const MIN_REPLICATES: usize = 8;
pub const DEFAULT_REPLICATES: usize = 32;
/// Largest `n^2 s` for which sweeps verify the deterministic error bound.
pub const BOUND_CHECK_LIMIT: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "ml")]
    Multilevel,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Fixed => "fixed",
            Regime::Multilevel => "ml",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "fixed" => Ok(Regime::Fixed),
            "ml" | "multilevel" => Ok(Regime::Multilevel),
            other => Err(Error::Parse(format!("unknown regime {other:?}"))),
        }
    }
}

/// One sweep point. Multilevel level tables are `;`-joined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub regime: Regime,
    #[serde(rename = "N")]
    pub budget: u64,
    pub cost: u64,
    pub n_or_levels: String,
    pub s_or_dims: String,
    pub rmse: f64,
    pub stderr: f64,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub eps: f64,
    pub anchor: f64,
    pub shape: String,
}

impl ConvergenceRecord {
    /// Point counts per level (one entry for a fixed record).
    pub fn point_counts(&self) -> Result<Vec<usize>> {
        parse_list(&self.n_or_levels)
    }

    pub fn dims(&self) -> Result<Vec<usize>> {
        parse_list(&self.s_or_dims)
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(';').map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad entry {t:?}")))).collect()
}

fn join<I: IntoIterator<Item = usize>>(it: I) -> String {
    it.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_records<W: Write>(w: W, records: &[ConvergenceRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<ConvergenceRecord>> {
    csv::Reader::from_reader(r).deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

/// Root-mean-square error and its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseEstimate {
    pub rmse: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// A randomized algorithm driven by a scramble specification.
pub trait Estimator<T> {
    fn estimate(&self, spec: &ScrambleSpec) -> Result<T>;
}

impl<T: Real> Estimator<T> for FixedRule<T> {
    fn estimate(&self, spec: &ScrambleSpec) -> Result<T> {
        FixedRule::estimate(self, spec)
    }
}

impl<T: Real> Estimator<T> for MultilevelRule<T> {
    fn estimate(&self, spec: &ScrambleSpec) -> Result<T> {
        MultilevelRule::estimate(self, spec)
    }
}

impl<T, F: Fn(&ScrambleSpec) -> Result<T>> Estimator<T> for F {
    fn estimate(&self, spec: &ScrambleSpec) -> Result<T> {
        self(spec)
    }
}

/// RMSE from squared errors: `sqrt(mean)`, with standard error
/// `sd(e^2) / (2 sqrt(R) rmse)`.
pub fn rmse_from_squared_errors(sq: &[f64]) -> Result<RmseEstimate> {
    let reps = sq.len();
    if reps < MIN_REPLICATES {
        return Err(Error::InsufficientReplicates { got: reps, min: MIN_REPLICATES });
    }
    let r = reps as f64;
    let mse = sq.iter().copied().collect::<CompensatedSum<f64>>().value() / r;
    let var = sq.iter().map(|&e| (e - mse) * (e - mse)).collect::<CompensatedSum<f64>>().value() / (r - 1.0);
    let rmse = mse.sqrt();
    let stderr = if rmse > 0.0 { (var / r).sqrt() / (2.0 * rmse) } else { 0.0 };
    Ok(RmseEstimate { rmse, stderr, reps })
}

/// RMSE of `alg` for `f` over replicates `0..reps` of `(kind, seed)`.
/// `f` must lie on the unit sphere of `H(K)` (or be constant).
pub fn rmse<T: Real, E: Estimator<T> + ?Sized>(
    alg: &E,
    f: &ProductIntegrand<T>,
    reps: usize,
    seed: u64,
    kind: ScrambleKind,
) -> Result<RmseEstimate> {
    if reps < MIN_REPLICATES {
        return Err(Error::InsufficientReplicates { got: reps, min: MIN_REPLICATES });
    }
    let norm = f.norm_in_k()?.as_f64();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("integrand norm {norm} is not 1; normalize it first")));
    }
    let exact = f.exact_integral()?.as_f64();
    let base = ScrambleSpec { kind, depth: DEFAULT_DEPTH, seed, replicate_id: 0 };
    let sq = (0..reps as u64)
        .map(|r| {
            let q = alg.estimate(&base.with_replicate(r))?.as_f64();
            Ok((exact - q) * (exact - q))
        })
        .collect::<Result<Vec<f64>>>()?;
    rmse_from_squared_errors(&sq)
}

/// Least-squares fit of `log2 y` against `log2 x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub used: usize,
}

pub fn fit_loglog(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| {
            let ok = x > 0.0 && y > 0.0;
            if !ok {
                warn!("dropping nonpositive point ({x}, {y}) from slope fit");
            }
            ok
        })
        .map(|&(x, y)| (x.log2(), y.log2()))
        .collect();
    if kept.len() < 3 {
        return Err(Error::InvalidArgument(format!("slope fit needs 3 positive points, have {}", kept.len())));
    }
    let k = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / k;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = kept.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit { slope, intercept: my - slope * mx, r_squared, used: kept.len() })
}

/// Slope of `log2 rmse` against `log2 N`.
pub fn fit_slope(records: &[ConvergenceRecord]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.budget as f64, r.rmse)).collect();
    fit_loglog(&pts)
}

/// CBC vectors for one weight sequence, keyed by `m`. A longer vector
/// serves every shorter request: CBC is greedy and its candidates depend
/// only on `(m, dimension)`, so prefixes coincide with shorter runs.
#[derive(Debug)]
pub struct VectorCache<T> {
    weights: WeightSequence<T>,
    criterion: Criterion,
    search: Option<Search>,
    seed: u64,
    map: HashMap<u32, (GeneratingVector, MeritReport)>,
}

impl<T: Real> VectorCache<T> {
    /// `search = None` picks [`Search::auto`] per `m`.
    pub fn new(weights: WeightSequence<T>, criterion: Criterion, search: Option<Search>) -> Self {
        Self { weights, criterion, search, seed: 0, map: HashMap::new() }
    }

    pub fn options(&self, m: u32) -> CbcOptions {
        CbcOptions { search: self.search.unwrap_or(Search::auto(m)), criterion: self.criterion, seed: self.seed }
    }

    pub fn get(&mut self, m: u32, s: usize) -> Result<GeneratingVector> {
        let have = self.map.get(&m).map_or(0, |(g, _)| g.dims());
        if have < s {
            info!("cbc: m = {m}, s = {s}, {:?}", self.options(m));
            let built = cbc_construct_with(m, s, &self.weights, &self.options(m))?;
            self.map.insert(m, built);
        }
        self.map[&m].0.prefix(s)
    }

    pub fn report(&self, m: u32) -> Option<&MeritReport> {
        self.map.get(&m).map(|(_, r)| r)
    }
}

/// Settings shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub regime: Regime,
    pub alpha: f64,
    pub eps: f64,
    pub anchor: f64,
    pub shape: Shape,
    pub beta: Beta<f64>,
    /// `gamma_j = cscale * j^-alpha`.
    pub cscale: f64,
    pub reps: usize,
    pub seed: u64,
    pub scramble: ScrambleKind,
    pub criterion: Criterion,
    pub search: Option<Search>,
    pub tuning: PlanTuning,
    /// Verify `|I - Q| <= e(P) ||f||` for the unscrambled rules when cheap.
    pub check_bound: bool,
}

impl SweepConfig {
    pub fn new(regime: Regime, alpha: f64, eps: f64) -> Self {
        Self {
            regime,
            alpha,
            eps,
            anchor: 0.5,
            shape: Shape::Linear,
            beta: Beta::default(),
            cscale: 1.0,
            reps: DEFAULT_REPLICATES,
            seed: 0,
            scramble: ScrambleKind::Owen,
            criterion: Criterion::ScrambledMean,
            search: None,
            tuning: PlanTuning::default(),
            check_bound: true,
        }
    }

    pub fn weights(&self) -> Result<WeightSequence<f64>> {
        WeightSequence::power_law(self.cscale, self.alpha)
    }

    /// The configured integrand scaled to unit norm.
    pub fn integrand(&self) -> Result<ProductIntegrand<f64>> {
        ProductIntegrand::new(self.weights()?, self.shape, self.beta.clone()).normalized()
    }
}

/// Deterministic-rule check: `|I(Psi f) - Q(Psi f)| <= e(P) ||Psi f||`.
pub fn check_deterministic_bound<T: Real>(
    f: &ProductIntegrand<T>,
    points: &PointSet,
    anchor: T,
) -> Result<(f64, f64)> {
    let s = points.s();
    let trunc = f.truncate(s, anchor)?;
    let q = deterministic_quadrature::<T>(points, |x| trunc.eval(x)).as_f64();
    let err = (f.truncated_integral(s, anchor)?.as_f64() - q).abs();
    let bound = wce_squared(points, &f.weights, s)?.as_f64().sqrt() * f.truncated_norm(s, anchor)?.as_f64();
    if err > bound * (1.0 + 1e-9) + 1e-15 {
        return Err(Error::BoundViolated(format!("n = {}, s = {s}: error {err} exceeds {bound}", points.n())));
    }
    Ok((err, bound))
}

fn bound_check_cheap(n: usize, s: usize) -> bool {
    (n as u64).saturating_mul(n as u64).saturating_mul(s as u64) <= BOUND_CHECK_LIMIT
}

/// One record per budget. Budgets must be strictly increasing, at least 3.
pub fn sweep(cfg: &SweepConfig, budgets: &[u64]) -> Result<Vec<ConvergenceRecord>> {
    let mut cache = VectorCache::new(cfg.weights()?, cfg.criterion, cfg.search);
    sweep_with_cache(cfg, budgets, &mut cache)
}

pub fn sweep_with_cache(
    cfg: &SweepConfig,
    budgets: &[u64],
    cache: &mut VectorCache<f64>,
) -> Result<Vec<ConvergenceRecord>> {
    if budgets.len() < 3 {
        return Err(Error::Config(format!("a sweep needs at least 3 budgets, got {}", budgets.len())));
    }
    if budgets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("budgets must be strictly increasing".into()));
    }
    let f = cfg.integrand()?;
    budgets
        .iter()
        .map(|&budget| match cfg.regime {
            Regime::Fixed => {
                let plan = plan_fixed(budget, cfg.alpha, cfg.eps, cfg.anchor, &cfg.tuning)?;
                run_fixed(cfg, &f, &plan, cache)
            }
            Regime::Multilevel => {
                let plan = plan_multilevel(budget, cfg.alpha, cfg.eps, cfg.anchor, &cfg.tuning)?;
                run_multilevel(cfg, &f, &plan, cache)
            }
        })
        .collect()
}

/// RMSE record of one fixed-subspace plan.
pub fn run_fixed(
    cfg: &SweepConfig,
    f: &ProductIntegrand<f64>,
    plan: &FixedPlan,
    cache: &mut VectorCache<f64>,
) -> Result<ConvergenceRecord> {
    let g = cache.get(plan.m(), plan.s)?;
    let rule = FixedRule::new(f, plan, &g)?;
    if cfg.check_bound && bound_check_cheap(plan.n, plan.s) {
        check_deterministic_bound(f, rule.points(), plan.anchor)?;
    }
    let est = rmse(&rule, f, cfg.reps, cfg.seed, cfg.scramble)?;
    info!("fixed N = {}: n = {}, s = {}, rmse = {:.3e}", plan.budget, plan.n, plan.s, est.rmse);
    Ok(record(cfg, Regime::Fixed, plan.budget, plan.cost(), plan.n.to_string(), plan.s.to_string(), est))
}

/// RMSE record of one multilevel plan.
pub fn run_multilevel(
    cfg: &SweepConfig,
    f: &ProductIntegrand<f64>,
    plan: &MultilevelPlan,
    cache: &mut VectorCache<f64>,
) -> Result<ConvergenceRecord> {
    let vectors = plan.levels.iter().map(|l| cache.get(l.m(), l.s)).collect::<Result<Vec<_>>>()?;
    if cfg.check_bound {
        for (lv, g) in plan.levels.iter().zip(&vectors) {
            if bound_check_cheap(lv.n, lv.s) {
                check_deterministic_bound(f, &crate::polylattice::generate_points(g, lv.s)?, plan.anchor)?;
            }
        }
    }
    let rule = MultilevelRule::new(f, plan, &vectors)?;
    let est = rmse(&rule, f, cfg.reps, cfg.seed, cfg.scramble)?;
    info!("ml N = {}: {} levels, rmse = {:.3e}", plan.budget, plan.num_levels(), est.rmse);
    Ok(record(
        cfg,
        Regime::Multilevel,
        plan.budget,
        plan.cost(),
        join(plan.levels.iter().map(|l| l.n)),
        join(plan.levels.iter().map(|l| l.s)),
        est,
    ))
}

fn record(
    cfg: &SweepConfig,
    regime: Regime,
    budget: u64,
    cost: u64,
    n: String,
    s: String,
    est: RmseEstimate,
) -> ConvergenceRecord {
    ConvergenceRecord {
        regime,
        budget,
        cost,
        n_or_levels: n,
        s_or_dims: s,
        rmse: est.rmse,
        stderr: est.stderr,
        reps: est.reps,
        seed: cfg.seed,
        alpha: cfg.alpha,
        eps: cfg.eps,
        anchor: cfg.anchor,
        shape: cfg.shape.name().to_string(),
    }
}

/// Rate in `n` at fixed dimension: one record per `m`, with `N = n`.
pub fn dimension_fixed_rates(
    cfg: &SweepConfig,
    s: usize,
    ms: std::ops::RangeInclusive<u32>,
) -> Result<Vec<ConvergenceRecord>> {
    let f = cfg.integrand()?;
    let mut cache = VectorCache::new(cfg.weights()?, cfg.criterion, cfg.search);
    ms.map(|m| {
        let n = 1usize << m;
        let plan = FixedPlan::new(n as u64, n, s, cfg.anchor)?;
        let mut rec = run_fixed(cfg, &f, &plan, &mut cache)?;
        rec.budget = n as u64;
        Ok(rec)
    })
    .collect()
}
