//! Weighted reproducing kernel Hilbert spaces of functions of infinitely
//! many variables, and product test integrands with closed-form integrals,
//! truncations and norms.
//!
//! The univariate kernel is `k(x,y) = 1/3 + (x^2 + y^2)/2 - max(x,y)`,
//! equal to `B1(x) B1(y) + B2(|x-y|)/2` with the Bernoulli polynomials
//! `B1(t) = t - 1/2`, `B2(t) = t^2 - t + 1/6`. It integrates to zero in
//! either argument, so `H(1 + gamma k)` splits into constants plus a
//! zero-mean part with norm `gamma^-1 int (f')^2`.
//!
//! Integrands have the form `f(x) = c * prod_j (1 + gamma_j beta_j g(x_j))`
//! with `g = B1` or `g = B2`. Each factor has mean one, so `I(f) = c`, and
//! `||f||_K^2 = c^2 prod_j (1 + gamma_j beta_j^2 kappa_g)` with
//! `kappa = int (g')^2` (1 for `B1`, 1/3 for `B2`).

use crate::error::{Error, Result};
use crate::real::{CompensatedSum, Real};

#[inline]
pub fn bernoulli1<T: Real>(t: T) -> T {
    t - T::c(0.5)
}

#[inline]
pub fn bernoulli2<T: Real>(t: T) -> T {
    t * t - t + T::c(1.0 / 6.0)
}

/// `k(x, y)` without domain checks.
#[inline]
pub fn kernel<T: Real>(x: T, y: T) -> T {
    T::c(1.0 / 3.0) + (x * x + y * y) * T::c(0.5) - x.max(y)
}

fn check_unit<T: Real>(what: &str, v: T) -> Result<()> {
    if v >= T::zero() && v <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} = {v} outside [0, 1]")))
    }
}

/// `k(x, y)` for `x, y` in `[0, 1]`.
pub fn kernel_eval<T: Real>(x: T, y: T) -> Result<T> {
    check_unit("x", x)?;
    check_unit("y", y)?;
    Ok(kernel(x, y))
}

/// Coordinate weights `gamma_1, gamma_2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSequence<T> {
    /// `gamma_j = scale * j^-alpha`.
    PowerLaw { scale: T, alpha: T },
    /// Listed prefix; beyond it either zero or, with `tail_alpha`, the
    /// continuation `gamma_len * (len / j)^tail_alpha`.
    Explicit { values: Vec<T>, tail_alpha: Option<T> },
}

impl<T: Real> WeightSequence<T> {
    pub fn power_law(scale: T, alpha: T) -> Result<Self> {
        if scale.is_nan() || scale <= T::zero() || !alpha.is_finite() || alpha < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "power-law weights need scale > 0 and alpha >= 0, got ({scale}, {alpha})"
            )));
        }
        Ok(WeightSequence::PowerLaw { scale, alpha })
    }

    /// Explicit finite prefix. Values must be nonnegative and nonincreasing.
    pub fn explicit(values: Vec<T>, tail_alpha: Option<T>) -> Result<Self> {
        if values.iter().any(|&g| !g.is_finite() || g < T::zero()) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("weights must be nonincreasing".into()));
        }
        if tail_alpha.is_some() && values.is_empty() {
            return Err(Error::InvalidArgument("a decay tail needs a nonempty prefix".into()));
        }
        Ok(WeightSequence::Explicit { values, tail_alpha })
    }

    /// `gamma_j` for `j >= 1`.
    pub fn gamma(&self, j: usize) -> T {
        assert!(j >= 1, "weights are indexed from 1");
        match self {
            WeightSequence::PowerLaw { scale, alpha } => {
                *scale * T::from_count(j).powf(-*alpha)
            }
            WeightSequence::Explicit { values, tail_alpha } => {
                if j <= values.len() {
                    values[j - 1]
                } else if let Some(a) = tail_alpha {
                    let len = T::from_count(values.len());
                    values[values.len() - 1] * (len / T::from_count(j)).powf(*a)
                } else {
                    T::zero()
                }
            }
        }
    }

    /// `gamma_1..gamma_s`.
    pub fn prefix(&self, s: usize) -> Vec<T> {
        (1..=s).map(|j| self.gamma(j)).collect()
    }

    /// Product weight `gamma_v` of a finite set of 1-based coordinates.
    pub fn product_weight(&self, v: &[usize]) -> T {
        v.iter().map(|&j| self.gamma(j)).fold(T::one(), |a, b| a * b)
    }

    /// Decay exponent of the tail, `None` when only finitely many weights
    /// are nonzero.
    pub fn decay(&self) -> Option<T> {
        match self {
            WeightSequence::PowerLaw { alpha, .. } => Some(*alpha),
            WeightSequence::Explicit { tail_alpha, .. } => *tail_alpha,
        }
    }

    /// Whether `sum_j gamma_j^(1/(3-eps)) < infinity`.
    pub fn theorem1_condition(&self, eps: T) -> Result<bool> {
        if !(eps > T::zero() && eps < T::c(3.0)) {
            return Err(Error::InvalidArgument(format!("eps = {eps} outside (0, 3)")));
        }
        Ok(match self.decay() {
            Some(alpha) => alpha / (T::c(3.0) - eps) > T::one(),
            None => true,
        })
    }

    /// Power-law tail description for `t_j = mult * gamma_j^1 * ...` series.
    fn series(&self, beta: &Beta<T>, beta_power: i32, mult: f64) -> Series {
        let b = |j: usize| beta.get(j).as_f64().powi(beta_power);
        match (self, beta) {
            (WeightSequence::PowerLaw { scale, alpha }, Beta::Constant(bc)) => Series {
                prefix: Vec::new(),
                tail: Some((scale.as_f64() * bc.as_f64().powi(beta_power) * mult, alpha.as_f64())),
            },
            (_, Beta::List(list)) => Series {
                prefix: (1..=list.len()).map(|j| self.gamma(j).as_f64() * b(j) * mult).collect(),
                tail: None,
            },
            (WeightSequence::Explicit { values, tail_alpha }, Beta::Constant(bc)) => {
                let bc = bc.as_f64().powi(beta_power);
                let len = values.len();
                Series {
                    prefix: values.iter().map(|g| g.as_f64() * bc * mult).collect(),
                    tail: tail_alpha.map(|a| {
                        let a = a.as_f64();
                        (values[len - 1].as_f64() * (len as f64).powf(a) * bc * mult, a)
                    }),
                }
            }
        }
    }
}

/// Per-coordinate scale factors `beta_j` of a product integrand.
#[derive(Debug, Clone, PartialEq)]
pub enum Beta<T> {
    Constant(T),
    /// Listed values; coordinates beyond the list have `beta_j = 0`.
    List(Vec<T>),
}

impl<T: Real> Beta<T> {
    pub fn get(&self, j: usize) -> T {
        match self {
            Beta::Constant(b) => *b,
            Beta::List(v) => v.get(j - 1).copied().unwrap_or_else(T::zero),
        }
    }
}

impl<T: Real> Default for Beta<T> {
    fn default() -> Self {
        Beta::Constant(T::one())
    }
}

/// The factor shape `g` of a product integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    /// `g(x) = x - 1/2`
    Linear,
    /// `g(x) = x^2 - x + 1/6`
    Quadratic,
}

impl Shape {
    #[inline]
    pub fn g<T: Real>(self, x: T) -> T {
        match self {
            Shape::Linear => bernoulli1(x),
            Shape::Quadratic => bernoulli2(x),
        }
    }

    /// `int_0^1 g'(x)^2 dx`.
    pub fn kappa(self) -> f64 {
        match self {
            Shape::Linear => 1.0,
            Shape::Quadratic => 1.0 / 3.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Linear => "linear",
            Shape::Quadratic => "quadratic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(Shape::Linear),
            "quadratic" => Ok(Shape::Quadratic),
            other => Err(Error::Parse(format!("unknown shape {other:?}"))),
        }
    }
}

/// Sequence `t_j` given by an explicit prefix and an optional
/// `c * j^-alpha` continuation, used for `prod_{j > s} (1 + t_j)`.
#[derive(Debug, Clone)]
struct Series {
    prefix: Vec<f64>,
    tail: Option<(f64, f64)>,
}

/// Relative switch point between direct summation and the zeta series.
const DIRECT_LIMIT: f64 = 1e-2;

impl Series {
    /// `prod_{j > s} (1 + t_j)`.
    fn tail_product(&self, s: usize) -> Result<f64> {
        let mut log = CompensatedSum::<f64>::new();
        let mut negative = false;
        let mut push = |t: f64| -> bool {
            let f = 1.0 + t;
            if f == 0.0 {
                return false;
            }
            if f < 0.0 {
                negative = !negative;
            }
            log.add(if t.abs() < 0.5 { t.ln_1p() } else { f.abs().ln() });
            true
        };
        for j in (s + 1)..=self.prefix.len() {
            if !push(self.prefix[j - 1]) {
                return Ok(0.0);
            }
        }
        if let Some((c, alpha)) = self.tail {
            if c != 0.0 {
                if alpha <= 1.0 {
                    return Err(Error::UnsupportedWeights(format!(
                        "tail c * j^-{alpha} is not summable"
                    )));
                }
                let mut j = s.max(self.prefix.len()) + 1;
                while (c * (j as f64).powf(-alpha)).abs() > DIRECT_LIMIT {
                    if !push(c * (j as f64).powf(-alpha)) {
                        return Ok(0.0);
                    }
                    j += 1;
                }
                // sum_{i>=j} ln(1 + c i^-a) = sum_k (-1)^(k+1) c^k / k * zeta(k a, j)
                let mut k = 1;
                loop {
                    let z = hurwitz_zeta(k as f64 * alpha, j as f64);
                    let term = c.powi(k) / k as f64 * z;
                    log.add(if k % 2 == 1 { term } else { -term });
                    if term.abs() < 1e-18 * (1.0 + log.value().abs()) || k > 200 {
                        break;
                    }
                    k += 1;
                }
            }
        }
        let v = log.value().exp();
        Ok(if negative { -v } else { v })
    }
}

#[allow(clippy::excessive_precision)]
const EM_DENOMS: [f64; 12] = [
    12.0,
    -720.0,
    30240.0,
    -1209600.0,
    47900160.0,
    -1.8924375803183791606e9,
    7.47242496e10,
    -2.950130727918164224e12,
    1.1646782814350067249e14,
    -4.5979787224074726105e15,
    1.8152105401943546773e17,
    -7.1661652561756670113e18,
];

/// Hurwitz zeta `sum_{k >= 0} (q + k)^-s` for `s > 1`, `q > 0`, by
/// Euler–Maclaurin summation.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0);
    let mut sum = CompensatedSum::<f64>::new();
    let mut w = q;
    let mut n = 0;
    while n < 9 || w < 9.0 {
        sum.add(w.powf(-s));
        w += 1.0;
        n += 1;
    }
    let b = w.powf(-s);
    sum.add(w * b / (s - 1.0));
    sum.add(0.5 * b);
    // Bernoulli correction terms
    let mut rising = 1.0;
    let mut bp = b;
    let mut k = 0.0;
    for denom in EM_DENOMS {
        rising *= s + k;
        bp /= w;
        let t = rising * bp / denom;
        sum.add(t);
        if (t / sum.value()).abs() < 1e-17 {
            break;
        }
        k += 1.0;
        rising *= s + k;
        bp /= w;
        k += 1.0;
    }
    sum.value()
}

/// The space `H(K)` with product weights.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpace<T> {
    pub weights: WeightSequence<T>,
}

impl<T: Real> KernelSpace<T> {
    pub fn new(weights: WeightSequence<T>) -> Self {
        Self { weights }
    }

    /// `K_{1:s}(x, y) = prod_{j <= s} (1 + gamma_j k(x_j, y_j))`.
    pub fn product_kernel_eval(&self, x: &[T], y: &[T], s: usize) -> Result<T> {
        if x.len() < s || y.len() < s {
            return Err(Error::Dimension(format!(
                "points of length {} and {} for s = {s}",
                x.len(),
                y.len()
            )));
        }
        let mut prod = T::one();
        for j in 0..s {
            prod = prod * (T::one() + self.weights.gamma(j + 1) * kernel_eval(x[j], y[j])?);
        }
        Ok(prod)
    }
}

/// `c * prod_j (1 + gamma_j beta_j g(x_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductIntegrand<T> {
    pub weights: WeightSequence<T>,
    pub shape: Shape,
    pub beta: Beta<T>,
    /// Overall multiplier `c`; `1` unless normalized.
    pub scale: T,
}

impl<T: Real> ProductIntegrand<T> {
    pub fn new(weights: WeightSequence<T>, shape: Shape, beta: Beta<T>) -> Self {
        Self { weights, shape, beta, scale: T::one() }
    }

    /// The same function scaled onto the unit sphere of `H(K)`.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_in_k()?;
        Ok(Self { scale: self.scale / norm, ..self.clone() })
    }

    /// `gamma_j * beta_j`.
    #[inline]
    pub fn coefficient(&self, j: usize) -> T {
        self.weights.gamma(j) * self.beta.get(j)
    }

    fn check_summable(&self) -> Result<()> {
        if let (Beta::Constant(b), Some(a)) = (&self.beta, self.weights.decay()) {
            if *b != T::zero() && a <= T::one() {
                return Err(Error::UnsupportedWeights(format!(
                    "sum of gamma_j diverges (decay exponent {a})"
                )));
            }
        }
        Ok(())
    }

    /// `T(s, a) = prod_{j > s} (1 + gamma_j beta_j g(a))`, without the
    /// overall multiplier.
    pub fn tail_factor(&self, s: usize, anchor: T) -> Result<T> {
        check_unit("anchor", anchor)?;
        self.check_summable()?;
        let ga = self.shape.g(anchor).as_f64();
        if ga == 0.0 {
            return Ok(T::one());
        }
        let v = self.weights.series(&self.beta, 1, ga).tail_product(s)?;
        Ok(T::c(v))
    }

    /// `f(x_1, .., x_s, a, a, ...)`.
    pub fn eval(&self, prefix: &[T], anchor: T) -> Result<T> {
        for &x in prefix {
            check_unit("coordinate", x)?;
        }
        let tail = self.tail_factor(prefix.len(), anchor)?;
        let head = prefix
            .iter()
            .enumerate()
            .fold(T::one(), |acc, (j, &x)| acc * (T::one() + self.coefficient(j + 1) * self.shape.g(x)));
        Ok(self.scale * head * tail)
    }

    /// `I(f)`.
    pub fn exact_integral(&self) -> Result<T> {
        self.check_summable()?;
        Ok(self.scale)
    }

    /// `I(Psi_{1:s,a} f)`: the head factors integrate to one.
    pub fn truncated_integral(&self, s: usize, anchor: T) -> Result<T> {
        Ok(self.scale * self.tail_factor(s, anchor)?)
    }

    /// `||f||_K`.
    pub fn norm_in_k(&self) -> Result<T> {
        if let (Beta::Constant(b), Some(a)) = (&self.beta, self.weights.decay()) {
            if *b != T::zero() && a <= T::one() {
                return Err(Error::UnsupportedWeights(format!(
                    "norm product diverges (decay exponent {a})"
                )));
            }
        }
        let sq = self.weights.series(&self.beta, 2, self.shape.kappa()).tail_product(0)?;
        Ok(self.scale.abs() * T::c(sq.sqrt()))
    }

    /// `||Psi_{1:s,a} f||` in `H(K_{1:s})`:
    /// `|c T(s, a)| sqrt(prod_{j <= s} (1 + gamma_j beta_j^2 kappa))`.
    pub fn truncated_norm(&self, s: usize, anchor: T) -> Result<T> {
        let kappa = T::c(self.shape.kappa());
        let sq = (1..=s).fold(T::one(), |acc, j| {
            let b = self.beta.get(j);
            acc * (T::one() + self.weights.gamma(j) * b * b * kappa)
        });
        Ok((self.scale * self.tail_factor(s, anchor)?).abs() * sq.sqrt())
    }

    /// Evaluator of `Psi_{1:s,a} f` with the tail factor precomputed.
    pub fn truncate(&self, s: usize, anchor: T) -> Result<TruncatedProduct<T>> {
        let tail = self.tail_factor(s, anchor)?;
        Ok(TruncatedProduct {
            coefs: (1..=s).map(|j| self.coefficient(j)).collect(),
            shape: self.shape,
            constant: self.scale * tail,
        })
    }

    /// Short description used in reports.
    pub fn descriptor(&self) -> String {
        self.shape.name().to_string()
    }
}

/// `x -> constant * prod_{j <= s} (1 + coef_j g(x_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedProduct<T> {
    coefs: Vec<T>,
    shape: Shape,
    constant: T,
}

impl<T: Real> TruncatedProduct<T> {
    pub fn dim(&self) -> usize {
        self.coefs.len()
    }

    /// Value at the first `dim()` coordinates of `x`.
    #[inline]
    pub fn eval(&self, x: &[T]) -> T {
        debug_assert!(x.len() >= self.coefs.len());
        let mut prod = self.constant;
        for (c, &xj) in self.coefs.iter().zip(x) {
            prod = prod * (T::one() + *c * self.shape.g(xj));
        }
        prod
    }
}
