//! Infinite-dimensional integration: truncation, the fixed-subspace
//! algorithm, the multilevel algorithm, cost accounting and planners.

use crate::error::{Error, Result};
use crate::polylattice::{generate_points, GeneratingVector, PointSet};
use crate::real::{CompensatedSum, Real};
use crate::scramble::{average_rows, scramble, ScrambleSpec};
use crate::wspace::{ProductIntegrand, TruncatedProduct};

/// Multiplicative constants of the planners; asymptotic rates fix none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanTuning {
    pub c_n: f64,
    pub c_s: f64,
    /// Multilevel allocation multiplier; `None` selects the largest one
    /// within budget.
    pub lambda: Option<f64>,
}

impl Default for PlanTuning {
    fn default() -> Self {
        Self { c_n: 1.0, c_s: 1.0, lambda: None }
    }
}

fn check_anchor(a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!("anchor {a} outside [0, 1]")));
    }
    Ok(())
}

fn check_points(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Plan(format!("point count {n} is not a power of two >= 2")));
    }
    Ok(())
}

/// `n_eff` points of a polynomial lattice rule in dimension `s`, all other
/// coordinates pinned at the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPlan {
    pub budget: u64,
    pub alpha: f64,
    pub eps: f64,
    pub anchor: f64,
    /// Effective point count, a power of two.
    pub n: usize,
    pub s: usize,
    /// Unrounded point count and dimension from the rate formulas.
    pub raw_n: f64,
    pub raw_s: f64,
}

impl FixedPlan {
    pub fn new(budget: u64, n: usize, s: usize, anchor: f64) -> Result<Self> {
        check_points(n)?;
        check_anchor(anchor)?;
        if s == 0 {
            return Err(Error::Plan("dimension must be at least 1".into()));
        }
        Ok(Self { budget, alpha: f64::NAN, eps: f64::NAN, anchor, n, s, raw_n: n as f64, raw_s: s as f64 })
    }

    pub fn m(&self) -> u32 {
        self.n.trailing_zeros()
    }

    pub fn cost(&self) -> u64 {
        cost_fixed(self)
    }

    /// `cost / budget`.
    pub fn slack(&self) -> f64 {
        self.cost() as f64 / self.budget as f64
    }
}

/// One level of a multilevel plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub s: usize,
    pub n: usize,
}

impl Level {
    pub fn m(&self) -> u32 {
        self.n.trailing_zeros()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelPlan {
    pub budget: u64,
    pub alpha: f64,
    pub eps: f64,
    pub anchor: f64,
    /// Strictly increasing in `s`.
    pub levels: Vec<Level>,
    pub rho1: f64,
    pub rho2: f64,
    /// Allocation multiplier that was selected.
    pub lambda: f64,
}

impl MultilevelPlan {
    pub fn new(budget: u64, alpha: f64, eps: f64, anchor: f64, levels: Vec<Level>) -> Result<Self> {
        check_anchor(anchor)?;
        if levels.is_empty() {
            return Err(Error::Plan("multilevel plan needs at least one level".into()));
        }
        for l in &levels {
            check_points(l.n)?;
        }
        if levels[0].s == 0 || levels.windows(2).any(|w| w[1].s <= w[0].s) {
            return Err(Error::Plan("level dimensions must be positive and strictly increasing".into()));
        }
        let (rho1, rho2) = rates(alpha, eps);
        Ok(Self { budget, alpha, eps, anchor, levels, rho1, rho2, lambda: f64::NAN })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn top_dim(&self) -> usize {
        self.levels.last().map_or(0, |l| l.s)
    }

    pub fn cost(&self) -> u64 {
        cost_variable(self)
    }
}

impl From<&FixedPlan> for MultilevelPlan {
    fn from(p: &FixedPlan) -> Self {
        let (rho1, rho2) = rates(p.alpha, p.eps);
        Self {
            budget: p.budget,
            alpha: p.alpha,
            eps: p.eps,
            anchor: p.anchor,
            levels: vec![Level { s: p.s, n: p.n }],
            rho1,
            rho2,
            lambda: f64::NAN,
        }
    }
}

/// `(rho1, rho2) = ((alpha - 1), (alpha - 4 - eps)) / (3 - eps / 2)`.
pub fn rates(alpha: f64, eps: f64) -> (f64, f64) {
    let d = 3.0 - eps / 2.0;
    ((alpha - 1.0) / d, (alpha - 4.0 - eps) / d)
}

/// `n_eff * s`.
pub fn cost_fixed(plan: &FixedPlan) -> u64 {
    plan.n as u64 * plan.s as u64
}

/// `sum_l s_l n_l`.
pub fn cost_variable(plan: &MultilevelPlan) -> u64 {
    plan.levels.iter().map(|l| l.s as u64 * l.n as u64).sum()
}

/// Fixed-subspace schedule `n ~ N^((alpha-1)/(alpha+2-eps))`,
/// `s ~ N^((3-eps)/(alpha+2-eps))`, with `n` rounded down to a power of two.
/// `s` is rounded up unless that would exceed the budget.
pub fn plan_fixed(budget: u64, alpha: f64, eps: f64, anchor: f64, tuning: &PlanTuning) -> Result<FixedPlan> {
    if alpha.is_nan() || alpha < 3.0 {
        return Err(Error::OutOfRegime(format!("fixed-subspace schedule needs alpha >= 3, got {alpha}")));
    }
    if !(eps > 0.0 && eps < 3.0) {
        return Err(Error::OutOfRegime(format!("eps must lie in (0, 3), got {eps}")));
    }
    check_anchor(anchor)?;
    let big_n = budget as f64;
    let denom = alpha + 2.0 - eps;
    let raw_n = tuning.c_n * big_n.powf((alpha - 1.0) / denom);
    let raw_s = tuning.c_s * big_n.powf((3.0 - eps) / denom);
    if raw_n < 2.0 {
        return Err(Error::Plan(format!("budget {budget} yields fewer than two points")));
    }
    let n = 1usize << raw_n.log2().floor() as u32;
    let s = (raw_s.ceil() as u64).min(budget / n as u64) as usize;
    if s == 0 {
        return Err(Error::Plan(format!("budget {budget} cannot cover one dimension at n = {n}")));
    }
    Ok(FixedPlan { budget, alpha, eps, anchor, n, s, raw_n, raw_s })
}

/// Multilevel schedule with `s_l = 2^l`,
/// `L = ceil((3 - eps) log2 N max(1/(alpha-1), 1/9))`, level variances
/// `v_1 = 1`, `v_l = s_{l-1}^-(alpha-1)`, and
/// `n_l = 2^floor(log2(lambda (v_l/s_l)^(1/(4-eps))))` for the largest
/// `lambda` with `sum s_l n_l <= N`. Top levels with `n_l < 2` are dropped.
pub fn plan_multilevel(
    budget: u64,
    alpha: f64,
    eps: f64,
    anchor: f64,
    tuning: &PlanTuning,
) -> Result<MultilevelPlan> {
    if alpha.is_nan() || alpha <= 3.0 {
        return Err(Error::OutOfRegime(format!("multilevel schedule needs alpha > 3, got {alpha}")));
    }
    if !(eps > 0.0 && eps < 6.0_f64.min(alpha - 3.0)) {
        return Err(Error::OutOfRegime(format!(
            "eps must lie in (0, min(6, alpha - 3)) = (0, {}), got {eps}",
            6.0_f64.min(alpha - 3.0)
        )));
    }
    check_anchor(anchor)?;
    if budget < 4 {
        return Err(Error::Plan(format!("budget {budget} too small")));
    }
    let log_n = (budget as f64).log2();
    let num = ((3.0 - eps) * log_n * (1.0 / (alpha - 1.0)).max(1.0 / 9.0)).ceil().max(1.0) as u32;
    let num = num.min(62);
    // log2 of (v_l / s_l)^(1/(4-eps)), with log2 s_l = l
    let log_w: Vec<f64> = (1..=num)
        .map(|l| {
            let log_v = if l == 1 { 0.0 } else { -(alpha - 1.0) * (l - 1) as f64 };
            (log_v - l as f64) / (4.0 - eps)
        })
        .collect();
    let alloc = |log_lambda: f64| -> Vec<u32> {
        log_w
            .iter()
            .map(|&w| {
                let e = (log_lambda + w + 1e-12).floor();
                if e < 0.0 { 0 } else { (e as u32).min(62) + 1 }
            })
            .collect()
    };
    // exponents stored as k + 1 with 0 meaning "no points"
    let cost_of = |ex: &[u32]| -> f64 {
        ex.iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(l, &e)| (2f64).powi(l as i32 + 1) * (2f64).powi(e as i32 - 1))
            .sum()
    };
    let n_budget = budget as f64;
    // cost is a nondecreasing step function of log lambda, jumping where
    // log lambda + log w_l crosses an integer
    let mut breakpoints: Vec<f64> = Vec::new();
    for &w in &log_w {
        for k in 0..=(log_n.ceil() as i32 + 1) {
            breakpoints.push(k as f64 - w);
        }
    }
    breakpoints.sort_by(f64::total_cmp);
    let mut best: Option<f64> = None;
    for &b in &breakpoints {
        if cost_of(&alloc(b)) <= n_budget {
            best = Some(b);
        } else {
            break;
        }
    }
    let log_lambda = match tuning.lambda {
        Some(l) if l > 0.0 => l.log2(),
        Some(l) => return Err(Error::Config(format!("lambda must be positive, got {l}"))),
        None => best.ok_or_else(|| Error::Plan(format!("budget {budget} cannot fund level 1")))?,
    };
    let ex = alloc(log_lambda);
    if cost_of(&ex) > n_budget {
        return Err(Error::Plan(format!("lambda {} exceeds budget {budget}", log_lambda.exp2())));
    }
    let mut levels: Vec<Level> = ex
        .iter()
        .enumerate()
        .map(|(l, &e)| Level { s: 1usize << (l + 1), n: if e == 0 { 0 } else { 1usize << (e - 1) } })
        .collect();
    while levels.last().is_some_and(|l| l.n < 2) {
        levels.pop();
    }
    if levels.is_empty() {
        return Err(Error::Plan(format!("budget {budget} leaves no level with two points")));
    }
    let mut plan = MultilevelPlan::new(budget, alpha, eps, anchor, levels)?;
    plan.lambda = log_lambda.exp2();
    Ok(plan)
}

/// `Psi_{1:s,a} f` as an `s`-variate evaluator.
pub fn truncate<T: Real>(f: &ProductIntegrand<T>, s: usize, anchor: T) -> Result<TruncatedProduct<T>> {
    f.truncate(s, anchor)
}

fn check_vector(g: &GeneratingVector, n: usize, s: usize) -> Result<()> {
    if g.n() != n {
        return Err(Error::Config(format!("vector has n = {}, plan needs {n}", g.n())));
    }
    if g.dims() < s {
        return Err(Error::Config(format!("vector has {} components, plan needs {s}", g.dims())));
    }
    Ok(())
}

/// A fixed-subspace rule with its point set and truncated integrand ready.
#[derive(Debug, Clone)]
pub struct FixedRule<T> {
    points: PointSet,
    integrand: TruncatedProduct<T>,
}

impl<T: Real> FixedRule<T> {
    pub fn new(f: &ProductIntegrand<T>, plan: &FixedPlan, g: &GeneratingVector) -> Result<Self> {
        check_vector(g, plan.n, plan.s)?;
        Ok(Self { points: generate_points(g, plan.s)?, integrand: truncate(f, plan.s, T::c(plan.anchor))? })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn estimate(&self, spec: &ScrambleSpec) -> Result<T> {
        let sps = scramble::<T>(&self.points, spec)?;
        Ok(average_rows(sps.values(), sps.s(), |x| self.integrand.eval(x)))
    }

    /// Estimate with the unscrambled points.
    pub fn deterministic_estimate(&self) -> T {
        crate::scramble::deterministic_quadrature(&self.points, |x| self.integrand.eval(x))
    }
}

/// `Q_{n,s,a}(f)` for one scramble.
pub fn fixed_estimate<T: Real>(
    f: &ProductIntegrand<T>,
    plan: &FixedPlan,
    g: &GeneratingVector,
    spec: &ScrambleSpec,
) -> Result<T> {
    FixedRule::new(f, plan, g)?.estimate(spec)
}

/// Scramble used by level `l` (1-based); level 1 uses `spec` itself.
pub fn level_spec(spec: &ScrambleSpec, level: usize) -> ScrambleSpec {
    if level == 1 {
        *spec
    } else {
        spec.substream(level as u64)
    }
}

/// A multilevel rule with per-level point sets and truncations ready.
#[derive(Debug, Clone)]
pub struct MultilevelRule<T> {
    levels: Vec<(PointSet, TruncatedProduct<T>)>,
}

impl<T: Real> MultilevelRule<T> {
    /// `vectors[l]` serves level `l + 1`.
    pub fn new(f: &ProductIntegrand<T>, plan: &MultilevelPlan, vectors: &[GeneratingVector]) -> Result<Self> {
        if vectors.len() != plan.levels.len() {
            return Err(Error::Config(format!(
                "{} vectors for {} levels",
                vectors.len(),
                plan.levels.len()
            )));
        }
        if plan.levels.windows(2).any(|w| w[1].s <= w[0].s) {
            return Err(Error::Plan("level dimensions must be strictly increasing".into()));
        }
        let a = T::c(plan.anchor);
        let levels = plan
            .levels
            .iter()
            .zip(vectors)
            .map(|(lv, g)| {
                check_vector(g, lv.n, lv.s)?;
                Ok((generate_points(g, lv.s)?, truncate(f, lv.s, a)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels })
    }

    /// `Q_l(Psi_{s_l} f - Psi_{s_{l-1}} f)` for every level.
    pub fn level_estimates(&self, spec: &ScrambleSpec) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(self.levels.len());
        for (l, (ps, fine)) in self.levels.iter().enumerate() {
            let sps = scramble::<T>(ps, &level_spec(spec, l + 1))?;
            let est = match l {
                0 => average_rows(sps.values(), sps.s(), |x| fine.eval(x)),
                _ => {
                    let coarse = &self.levels[l - 1].1;
                    average_rows(sps.values(), sps.s(), |x| fine.eval(x) - coarse.eval(x))
                }
            };
            out.push(est);
        }
        Ok(out)
    }

    pub fn estimate(&self, spec: &ScrambleSpec) -> Result<T> {
        Ok(self.level_estimates(spec)?.into_iter().collect::<CompensatedSum<T>>().value())
    }
}

/// Multilevel estimate `sum_l Q_l(Delta_l)` with independent per-level
/// scrambles derived from `spec`.
pub fn ml_estimate<T: Real>(
    f: &ProductIntegrand<T>,
    plan: &MultilevelPlan,
    vectors: &[GeneratingVector],
    spec: &ScrambleSpec,
) -> Result<T> {
    MultilevelRule::new(f, plan, vectors)?.estimate(spec)
}
