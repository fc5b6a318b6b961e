//! Component-by-component construction of generating vectors.
//!
//! Two figures of merit are available:
//!
//! * [`Criterion::WorstCase`]: the squared worst-case error of the
//!   deterministic rule in the unit ball of `H(K_{1:s})`. Because the kernel
//!   is mean-centred, `int K(x, .) = 1` and
//!   `e^2(P) = -1 + n^-2 sum_{i,h} prod_j (1 + gamma_j k(x_ij, x_hj))`.
//!   One candidate costs `O(n^2)`.
//! * [`Criterion::ScrambledMean`]: the same quantity averaged over nested
//!   scrambling. The scramble-averaged kernel depends only on the number
//!   `l` of leading digits two coordinates share, with value
//!   `1/6 - 2^-(l+2)` (and `1/6` for equal coordinates). For a digital net
//!   the double sum collapses to `-1 + n^-1 sum_i prod_j (1 + gamma_j phi_ij)`,
//!   so a candidate costs `O(n)`.
//!
//! Both caches store `prod - 1` rather than the product, which keeps the
//! comparison between candidates free of cancellation.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gfpoly::{find_irreducible, Poly};
use crate::polylattice::{fill_coordinate, generator_columns, GeneratingVector, PointSet};
use crate::real::{CompensatedSum, Real};
use crate::scramble::mix64;
use crate::wspace::{kernel, WeightSequence};

/// Largest `m` accepted by the `O(n^2)`-memory worst-case criterion.
pub const MAX_WORST_CASE_M: u32 = 14;

/// Relative margin a candidate must beat the incumbent by.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    WorstCase,
    ScrambledMean,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::WorstCase => "worst-case",
            Criterion::ScrambledMean => "scrambled-mean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "worst-case" | "worst_case" => Ok(Criterion::WorstCase),
            "scrambled-mean" | "scrambled_mean" | "scrambled" => Ok(Criterion::ScrambledMean),
            other => Err(Error::Parse(format!("unknown criterion {other:?}"))),
        }
    }
}

/// Candidate set scanned per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Search {
    /// All `2^m - 1` nonzero polynomials of degree below `m`.
    Full,
    /// `C` uniform draws (deduplicated), seeded by `(m, dimension)`.
    Random(usize),
}

impl Search {
    pub const DEFAULT_RANDOM: usize = 512;

    /// Full scan up to `m = 10`, `Random(512)` beyond.
    pub fn auto(m: u32) -> Self {
        if m <= 10 {
            Search::Full
        } else {
            Search::Random(Self::DEFAULT_RANDOM)
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "full" {
            return Ok(Search::Full);
        }
        if let Some(c) = t.strip_prefix("random:").or_else(|| t.strip_prefix("random")) {
            let c = c.trim_matches(|ch| ch == '(' || ch == ')');
            if c.is_empty() {
                return Ok(Search::Random(Self::DEFAULT_RANDOM));
            }
            return c
                .parse()
                .map(Search::Random)
                .map_err(|_| Error::Parse(format!("bad candidate count in {s:?}")));
        }
        Err(Error::Parse(format!("unknown search {s:?}")))
    }

    pub fn describe(self) -> String {
        match self {
            Search::Full => "full".into(),
            Search::Random(c) => format!("random:{c}"),
        }
    }

    fn candidates(self, m: u32, dimension: usize, seed: u64) -> Vec<u64> {
        let total = (1u64 << m) - 1;
        match self {
            Search::Random(c) if (c as u64) < total => {
                let key = mix64(seed ^ mix64(((m as u64) << 32) ^ dimension as u64));
                let mut rng = ChaCha8Rng::seed_from_u64(key);
                let mut v: Vec<u64> = (0..c).map(|_| rng.gen_range(1..=total)).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            _ => (1..=total).collect(),
        }
    }
}

/// Settings of a construction run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CbcOptions {
    pub search: Search,
    pub criterion: Criterion,
    /// Seed of the random candidate draws.
    pub seed: u64,
}

impl CbcOptions {
    pub fn new(search: Search, criterion: Criterion) -> Self {
        Self { search, criterion, seed: 0 }
    }
}

/// Per-dimension record of a construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MeritReport {
    pub criterion: Criterion,
    pub search: Search,
    /// Chosen component per dimension.
    pub q: Vec<Poly>,
    /// Squared error of the first `j` dimensions after choosing `q_j`.
    pub e2: Vec<f64>,
    /// Smallest squared error seen among scanned candidates.
    pub scanned_min: Vec<f64>,
    pub candidates_scanned: Vec<usize>,
    pub seconds: Vec<f64>,
}

fn check_dims(points: &PointSet, s: usize) -> Result<()> {
    if s > points.s() {
        return Err(Error::Dimension(format!("s = {s} exceeds point dimension {}", points.s())));
    }
    Ok(())
}

/// Squared worst-case error of the deterministic rule in the unit ball of
/// `H(K_{1:s})`, by the double sum.
pub fn wce_squared<T: Real>(points: &PointSet, ws: &WeightSequence<T>, s: usize) -> Result<T> {
    check_dims(points, s)?;
    let n = points.n();
    let vals = points.values::<T>();
    let row = |i: usize| &vals[i * points.s()..i * points.s() + s];
    let gammas = ws.prefix(s);
    let dev = |x: &[T], y: &[T]| -> T {
        // prod_j (1 + a_j) - 1 accumulated without cancellation
        let mut d = T::zero();
        for ((&g, &a), &b) in gammas.iter().zip(x).zip(y) {
            let t = g * kernel(a, b);
            d = d * (T::one() + t) + t;
        }
        d
    };
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        acc.add(dev(row(i), row(i)));
        let mut row_sum = CompensatedSum::new();
        for h in (i + 1)..n {
            row_sum.add(dev(row(i), row(h)));
        }
        acc.add(T::c(2.0) * row_sum.value());
    }
    let nn = T::from_count(n);
    Ok((acc.value() / (nn * nn)).max(T::zero()))
}

/// Scramble-averaged kernel value for coordinates whose packed `m`-digit
/// words XOR to `diff`.
#[inline]
pub fn scrambled_kernel_phi(diff: u32, m: u32) -> f64 {
    if diff == 0 {
        1.0 / 6.0
    } else {
        let shared = diff.leading_zeros() - (32 - m);
        1.0 / 6.0 - 0.25 * 0.5f64.powi(shared as i32)
    }
}

/// Expected squared worst-case error of the scrambled rule, for a point
/// set that is a digital net (rows closed under XOR, origin first), such
/// as any output of [`crate::polylattice::generate_points`].
pub fn scrambled_wce_squared<T: Real>(points: &PointSet, ws: &WeightSequence<T>, s: usize) -> Result<T> {
    check_dims(points, s)?;
    let m = points.m();
    let gammas = ws.prefix(s);
    let mut acc = CompensatedSum::new();
    for i in 0..points.n() {
        let mut d = T::zero();
        for (j, &g) in gammas.iter().enumerate() {
            let t = g * T::c(scrambled_kernel_phi(points.word(i, j), m));
            d = d * (T::one() + t) + t;
        }
        acc.add(d);
    }
    Ok((acc.value() / T::from_count(points.n())).max(T::zero()))
}

/// Same quantity by the full double sum over pairs; valid for any point set.
pub fn scrambled_wce_squared_pairwise<T: Real>(
    points: &PointSet,
    ws: &WeightSequence<T>,
    s: usize,
) -> Result<T> {
    check_dims(points, s)?;
    let (n, m) = (points.n(), points.m());
    let gammas = ws.prefix(s);
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        for h in 0..n {
            let mut d = T::zero();
            for (j, &g) in gammas.iter().enumerate() {
                let t = g * T::c(scrambled_kernel_phi(points.word(i, j) ^ points.word(h, j), m));
                d = d * (T::one() + t) + t;
            }
            acc.add(d);
        }
    }
    let nn = T::from_count(n);
    Ok((acc.value() / (nn * nn)).max(T::zero()))
}

/// CBC with the worst-case criterion and the given search.
pub fn cbc_construct<T: Real>(
    m: u32,
    s_max: usize,
    ws: &WeightSequence<T>,
    search: Search,
) -> Result<(GeneratingVector, MeritReport)> {
    cbc_construct_with(m, s_max, ws, &CbcOptions::new(search, Criterion::WorstCase))
}

/// CBC with explicit options.
pub fn cbc_construct_with<T: Real>(
    m: u32,
    s_max: usize,
    ws: &WeightSequence<T>,
    opts: &CbcOptions,
) -> Result<(GeneratingVector, MeritReport)> {
    if m < 1 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if s_max < 1 {
        return Err(Error::InvalidArgument("s_max must be at least 1".into()));
    }
    let modulus = find_irreducible(m)?;
    let mut state: Box<dyn CbcState<T>> = match opts.criterion {
        Criterion::WorstCase => {
            if m > MAX_WORST_CASE_M {
                return Err(Error::TooLarge(format!(
                    "worst-case criterion keeps n^2/2 pair products; m = {m} exceeds {MAX_WORST_CASE_M}"
                )));
            }
            Box::new(WorstCaseState::new(m))
        }
        Criterion::ScrambledMean => Box::new(ScrambledState::new(m)),
    };
    let n = 1usize << m;
    let mut words = vec![0u32; n];
    let mut report = MeritReport {
        criterion: opts.criterion,
        search: opts.search,
        q: Vec::with_capacity(s_max),
        e2: Vec::with_capacity(s_max),
        scanned_min: Vec::with_capacity(s_max),
        candidates_scanned: Vec::with_capacity(s_max),
        seconds: Vec::with_capacity(s_max),
    };
    for j in 1..=s_max {
        let start = Instant::now();
        let gamma = ws.gamma(j);
        let cands = opts.search.candidates(m, j, opts.seed);
        let mut best: Option<(u64, f64)> = None;
        let mut scanned_min = f64::INFINITY;
        for &c in &cands {
            let cols = generator_columns(modulus, Poly::from_bits(c), m)?;
            fill_coordinate(&cols, &mut words);
            let e2 = state.evaluate(&words, gamma).as_f64();
            scanned_min = scanned_min.min(e2);
            let better = match best {
                None => true,
                Some((_, b)) => e2 < b - TIE_TOLERANCE * b.abs(),
            };
            if better {
                best = Some((c, e2));
            }
        }
        let (c, e2) = best.expect("candidate set is nonempty");
        let cols = generator_columns(modulus, Poly::from_bits(c), m)?;
        fill_coordinate(&cols, &mut words);
        state.commit(&words, gamma);
        report.q.push(Poly::from_bits(c));
        report.e2.push(e2.max(0.0));
        report.scanned_min.push(scanned_min);
        report.candidates_scanned.push(cands.len());
        report.seconds.push(start.elapsed().as_secs_f64());
    }
    let g = GeneratingVector::new(m, modulus, report.q.clone())?;
    Ok((g, report))
}

trait CbcState<T> {
    /// Squared error if `words` (packed coordinate of every index) were
    /// appended with weight `gamma`.
    fn evaluate(&self, words: &[u32], gamma: T) -> T;
    fn commit(&mut self, words: &[u32], gamma: T);
}

/// Pairwise deviations `prod_j (1 + gamma_j k) - 1` for `i < h`, plus the
/// diagonal.
struct WorstCaseState<T> {
    m: u32,
    pairs: Vec<T>,
    diag: Vec<T>,
    // sums of k over the grid: candidate independent
    grid_diag: T,
    grid_off: T,
    sum_pairs: T,
    sum_diag: T,
    u: Vec<T>,
    half_sq: Vec<T>,
}

impl<T: Real> WorstCaseState<T> {
    fn new(m: u32) -> Self {
        let n = 1usize << m;
        let scale = T::powi(T::c(2.0), -(m as i32));
        let grid: Vec<T> = (0..n).map(|v| T::from_count(v) * scale).collect();
        let grid_diag = crate::real::stable_sum(grid.iter().map(|&x| kernel(x, x)));
        let mut off = CompensatedSum::new();
        for a in 0..n {
            let mut row = CompensatedSum::new();
            for b in (a + 1)..n {
                row.add(kernel(grid[a], grid[b]));
            }
            off.add(row.value());
        }
        Self {
            m,
            pairs: vec![T::zero(); n * (n - 1) / 2],
            diag: vec![T::zero(); n],
            grid_diag,
            grid_off: off.value(),
            sum_pairs: T::zero(),
            sum_diag: T::zero(),
            u: vec![T::zero(); n],
            half_sq: vec![T::zero(); n],
        }
    }

    fn load(&mut self, words: &[u32]) {
        let scale = T::powi(T::c(2.0), -(self.m as i32));
        for (i, &w) in words.iter().enumerate() {
            let x = T::c(w as f64) * scale;
            self.u[i] = x;
            self.half_sq[i] = T::c(0.5) * x * x;
        }
    }
}

impl<T: Real> CbcState<T> for WorstCaseState<T> {
    fn evaluate(&self, words: &[u32], gamma: T) -> T {
        let scale = T::powi(T::c(2.0), -(self.m as i32));
        let u: Vec<T> = words.iter().map(|&w| T::c(w as f64) * scale).collect();
        let half_sq: Vec<T> = u.iter().map(|&x| T::c(0.5) * x * x).collect();
        let (off, diag) = weighted_sums(&self.pairs, &self.diag, &u, &half_sq);
        let n = T::from_count(words.len());
        let total = self.sum_diag
            + gamma * (diag + self.grid_diag)
            + T::c(2.0) * (self.sum_pairs + gamma * (off + self.grid_off));
        total / (n * n)
    }

    fn commit(&mut self, words: &[u32], gamma: T) {
        self.load(words);
        let n = self.u.len();
        let third = T::c(1.0 / 3.0);
        let mut idx = 0;
        let mut sum_pairs = CompensatedSum::new();
        for i in 0..n {
            let ui = self.u[i];
            let ai = third + self.half_sq[i];
            let mut row_sum = T::zero();
            for h in (i + 1)..n {
                let t = gamma * (ai + self.half_sq[h] - ui.max(self.u[h]));
                let p = &mut self.pairs[idx];
                *p = *p * (T::one() + t) + t;
                row_sum = row_sum + *p;
                idx += 1;
            }
            sum_pairs.add(row_sum);
        }
        let mut sum_diag = CompensatedSum::new();
        for i in 0..n {
            let t = gamma * kernel(self.u[i], self.u[i]);
            self.diag[i] = self.diag[i] * (T::one() + t) + t;
            sum_diag.add(self.diag[i]);
        }
        self.sum_pairs = sum_pairs.value();
        self.sum_diag = sum_diag.value();
    }
}

/// `sum_{i<h} pairs_ih k(u_i, u_h)` and `sum_i diag_i k(u_i, u_i)`.
fn weighted_sums<T: Real>(pairs: &[T], diag: &[T], u: &[T], half_sq: &[T]) -> (T, T) {
    let n = u.len();
    let third = T::c(1.0 / 3.0);
    let mut off = CompensatedSum::new();
    let mut idx = 0;
    for i in 0..n {
        let ui = u[i];
        let ai = third + half_sq[i];
        let row = &pairs[idx..idx + (n - 1 - i)];
        idx += n - 1 - i;
        let mut acc = T::zero();
        for ((&p, &uh), &bh) in row.iter().zip(&u[i + 1..]).zip(&half_sq[i + 1..]) {
            acc = acc + p * (ai + bh - ui.max(uh));
        }
        off.add(acc);
    }
    let d = crate::real::stable_sum(diag.iter().zip(u).map(|(&d, &x)| d * kernel(x, x)));
    (off.value(), d)
}

/// Per-index deviations `prod_j (1 + gamma_j phi_ij) - 1`.
struct ScrambledState<T> {
    m: u32,
    dev: Vec<T>,
    sum_dev: T,
    phi_by_shared: Vec<T>,
    phi_sum: T,
}

impl<T: Real> ScrambledState<T> {
    fn new(m: u32) -> Self {
        let n = 1usize << m;
        // word 0 is the diagonal; every other word has `shared` leading zeros
        let phi_by_shared: Vec<T> =
            (0..=m).map(|l| T::c(1.0 / 6.0 - 0.25 * 0.5f64.powi(l as i32))).collect();
        let mut phi_sum = CompensatedSum::new();
        phi_sum.add(T::c(1.0 / 6.0));
        for l in 0..m {
            phi_sum.add(T::from_count(1usize << (m - 1 - l)) * phi_by_shared[l as usize]);
        }
        Self { m, dev: vec![T::zero(); n], sum_dev: T::zero(), phi_by_shared, phi_sum: phi_sum.value() }
    }

    #[inline]
    fn phi(&self, w: u32) -> T {
        if w == 0 {
            T::c(1.0 / 6.0)
        } else {
            self.phi_by_shared[(w.leading_zeros() - (32 - self.m)) as usize]
        }
    }
}

impl<T: Real> CbcState<T> for ScrambledState<T> {
    fn evaluate(&self, words: &[u32], gamma: T) -> T {
        let mut acc = T::zero();
        let mut outer = CompensatedSum::new();
        for (k, (&d, &w)) in self.dev.iter().zip(words).enumerate() {
            acc = acc + d * self.phi(w);
            if k % 4096 == 4095 {
                outer.add(acc);
                acc = T::zero();
            }
        }
        outer.add(acc);
        let n = T::from_count(words.len());
        (self.sum_dev + gamma * (self.phi_sum + outer.value())) / n
    }

    fn commit(&mut self, words: &[u32], gamma: T) {
        let mut sum = CompensatedSum::new();
        for (i, &w) in words.iter().enumerate() {
            let t = gamma * self.phi(w);
            self.dev[i] = self.dev[i] * (T::one() + t) + t;
            sum.add(self.dev[i]);
        }
        self.sum_dev = sum.value();
    }
}
