//! Randomization of base-2 point sets.
//!
//! Nested (Owen) scrambling is realized lazily. The flip bit of the tree
//! node reached by digit prefix `(d_1..d_k)` of coordinate `j` is the low bit
//! of `prf(key_j, node_id)`, with `key_j` derived from the seed, the
//! replicate id and `j`, and `node_id = 2^k | prefix`. All `2^m - 1` nodes a
//! point set can reach are visited once per coordinate, so scrambling a
//! coordinate costs `O(n)` hashes.
//!
//! The base points carry `m` digits. Digits `m+1..D` are scrambled zeros,
//! i.e. pseudorandom bits keyed by the full `m`-digit path, and everything
//! below depth `D` is a uniform offset keyed by the same path. Identical
//! inputs therefore map to identical outputs.
//!
//! The PRF is the SplitMix64 finalizer applied to `key ^ mix(node)`. Its
//! output is stable within this crate but is not a cross-implementation
//! contract.

use crate::error::{Error, Result};
use crate::polylattice::PointSet;
use crate::real::{CompensatedSum, Real};

/// Default number of scrambled digits.
pub const DEFAULT_DEPTH: u32 = 31;
const MAX_DEPTH: u32 = 52;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScrambleKind {
    /// Nested uniform scrambling.
    Owen,
    /// Random lower-triangular digit matrix followed by a digital shift.
    LinearShift,
}

impl ScrambleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScrambleKind::Owen => "owen",
            ScrambleKind::LinearShift => "linear_shift",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "owen" => Ok(ScrambleKind::Owen),
            "linear_shift" | "linear-shift" => Ok(ScrambleKind::LinearShift),
            other => Err(Error::Parse(format!("unknown scramble kind {other:?}"))),
        }
    }
}

/// Which randomization to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScrambleSpec {
    pub kind: ScrambleKind,
    pub depth: u32,
    pub seed: u64,
    pub replicate_id: u64,
}

impl ScrambleSpec {
    pub fn owen(seed: u64, replicate_id: u64) -> Self {
        Self { kind: ScrambleKind::Owen, depth: DEFAULT_DEPTH, seed, replicate_id }
    }

    pub fn linear_shift(seed: u64, replicate_id: u64) -> Self {
        Self { kind: ScrambleKind::LinearShift, depth: DEFAULT_DEPTH, seed, replicate_id }
    }

    pub fn with_replicate(self, replicate_id: u64) -> Self {
        Self { replicate_id, ..self }
    }

    /// An independent stream for sub-estimator `stream` (e.g. a multilevel
    /// level), sharing kind, depth and replicate id.
    pub fn substream(self, stream: u64) -> Self {
        Self { seed: mix64(self.seed ^ mix64(stream ^ 0x6c65_7665_6c00_0000)), ..self }
    }

    fn check(&self, m: u32) -> Result<()> {
        if self.depth < m || self.depth > MAX_DEPTH {
            return Err(Error::InvalidDepth { depth: self.depth, m });
        }
        Ok(())
    }

    fn coordinate_key(&self, j: usize) -> u64 {
        let salt = match self.kind {
            ScrambleKind::Owen => 0x4f57_454e,
            ScrambleKind::LinearShift => 0x4c49_4e53,
        };
        let k = mix64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let k = mix64(k ^ self.replicate_id.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        mix64(k ^ (j as u64 + 1).wrapping_mul(0x94d0_49bb_1331_11eb) ^ salt)
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed pseudorandom function over tree nodes.
#[inline]
pub fn prf(key: u64, node: u64) -> u64 {
    mix64(key ^ mix64(node.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

#[inline]
fn unit_from_bits<T: Real>(bits: u64) -> T {
    T::c((bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
}

/// The random map applied to one coordinate of an `m`-digit point set.
enum CoordinateMap {
    Owen { key: u64, m: u32, depth: u32, flips: Vec<u32> },
    Linear { key: u64, depth: u32, cols: Vec<u64>, shift: u64 },
}

impl CoordinateMap {
    fn new(spec: &ScrambleSpec, j: usize, m: u32) -> Self {
        let key = spec.coordinate_key(j);
        match spec.kind {
            ScrambleKind::Owen => {
                // flips[v] is the XOR mask applied to the m-digit word v.
                let mut flips = vec![0u32; 1usize << m];
                let mut width = 1usize;
                for level in 0..m {
                    // Expand masks of prefixes of length `level` in place,
                    // back to front so parents are read before overwritten.
                    for prefix in (0..width).rev() {
                        let node = (1u64 << level) | prefix as u64;
                        let bit = (prf(key, node) & 1) as u32;
                        let parent = flips[prefix];
                        let child = (parent << 1) | bit;
                        flips[2 * prefix] = child;
                        flips[2 * prefix + 1] = child;
                    }
                    width <<= 1;
                }
                Self::Owen { key, m, depth: spec.depth, flips }
            }
            ScrambleKind::LinearShift => {
                let d = spec.depth;
                let full = if d == 64 { u64::MAX } else { (1u64 << d) - 1 };
                let cols = (1..=m)
                    .map(|k| {
                        let below = (1u64 << (d - k)) - 1;
                        (1u64 << (d - k)) | (prf(key, k as u64) & below)
                    })
                    .collect();
                let shift = prf(key, 0) & full;
                Self::Linear { key, depth: d, cols, shift }
            }
        }
    }

    #[inline]
    fn apply<T: Real>(&self, word: u32) -> T {
        match self {
            CoordinateMap::Owen { key, m, depth, flips } => {
                let top = word ^ flips[word as usize];
                let leaf = (1u64 << m) | word as u64;
                let extra = depth - m;
                let low_digits = if extra == 0 { 0 } else { prf(*key, leaf) >> (64 - extra) };
                let offset = unit_from_bits::<T>(prf(*key ^ 0x0ff5_e700_0000_0000, leaf));
                let below = (T::c(low_digits as f64) + offset) * T::powi(T::c(2.0), -(extra as i32));
                (T::c(top as f64) + below) * T::powi(T::c(2.0), -(*m as i32))
            }
            CoordinateMap::Linear { key, depth, cols, shift } => {
                let m = cols.len();
                let mut y = *shift;
                for (k, col) in cols.iter().enumerate() {
                    if (word >> (m - 1 - k)) & 1 == 1 {
                        y ^= col;
                    }
                }
                let leaf = (1u64 << m) | word as u64;
                let offset = unit_from_bits::<T>(prf(*key ^ 0x0ff5_e700_0000_0000, leaf));
                (T::c(y as f64) + offset) * T::powi(T::c(2.0), -(*depth as i32))
            }
        }
    }
}

/// Writes the randomized coordinates of `ps` into `out` (row-major).
pub fn scramble_into<T: Real>(ps: &PointSet, spec: &ScrambleSpec, out: &mut Vec<T>) -> Result<()> {
    spec.check(ps.m())?;
    let (n, s) = (ps.n(), ps.s());
    out.clear();
    out.resize(n * s, T::zero());
    for j in 0..s {
        let map = CoordinateMap::new(spec, j, ps.m());
        for i in 0..n {
            out[i * s + j] = map.apply(ps.word(i, j));
        }
    }
    Ok(())
}

/// A randomized copy of a deterministic point set.
#[derive(Debug, Clone)]
pub struct ScrambledPointSet<'a, T> {
    base: &'a PointSet,
    spec: ScrambleSpec,
    points: Vec<T>,
}

impl<'a, T: Real> ScrambledPointSet<'a, T> {
    pub fn base(&self) -> &'a PointSet {
        self.base
    }

    pub fn spec(&self) -> &ScrambleSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn s(&self) -> usize {
        self.base.s()
    }

    pub fn point(&self, i: usize) -> &[T] {
        let s = self.s();
        &self.points[i * s..(i + 1) * s]
    }

    /// All coordinates, row-major.
    pub fn values(&self) -> &[T] {
        &self.points
    }
}

/// Scrambles every coordinate of `ps` independently.
pub fn scramble<'a, T: Real>(ps: &'a PointSet, spec: &ScrambleSpec) -> Result<ScrambledPointSet<'a, T>> {
    let mut points = Vec::new();
    scramble_into(ps, spec, &mut points)?;
    Ok(ScrambledPointSet { base: ps, spec: *spec, points })
}

/// Equal-weight average of `f` over rows of a row-major `n x s` matrix.
pub fn average_rows<T: Real>(values: &[T], s: usize, mut f: impl FnMut(&[T]) -> T) -> T {
    let Some(n) = values.len().checked_div(s) else {
        return f(&[]);
    };
    let mut acc = CompensatedSum::new();
    for row in values.chunks_exact(s) {
        acc.add(f(row));
    }
    acc.value() / T::from_count(n)
}

/// `(1/n) sum_i f(x_i)` over the scrambled points.
pub fn quadrature<T: Real>(sps: &ScrambledPointSet<'_, T>, f: impl FnMut(&[T]) -> T) -> T {
    if sps.s() == 0 {
        // every point is the empty tuple
        let mut f = f;
        return f(&[]);
    }
    average_rows(&sps.points, sps.s(), f)
}

/// Fallible variant of [`quadrature`]; the first evaluator error is returned.
pub fn try_quadrature<T: Real>(
    sps: &ScrambledPointSet<'_, T>,
    mut f: impl FnMut(&[T]) -> Result<T>,
) -> Result<T> {
    let s = sps.s();
    let mut acc = CompensatedSum::new();
    for i in 0..sps.n() {
        acc.add(f(&sps.points[i * s..(i + 1) * s])?);
    }
    Ok(acc.value() / T::from_count(sps.n()))
}

/// Average of `f` over the unrandomized points.
pub fn deterministic_quadrature<T: Real>(ps: &PointSet, f: impl FnMut(&[T]) -> T) -> T {
    if ps.s() == 0 {
        let mut f = f;
        return f(&[]);
    }
    average_rows(&ps.values::<T>(), ps.s(), f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfpoly::{find_irreducible, Poly};
    use crate::polylattice::{generate_points, GeneratingVector};

    fn example() -> PointSet {
        let g = GeneratingVector::new(2, Poly::from_bits(0b111), vec![Poly::ONE, Poly::X]).unwrap();
        generate_points(&g, 2).unwrap()
    }

    fn rule(m: u32, qs: &[u64]) -> PointSet {
        let g = GeneratingVector::new(
            m,
            find_irreducible(m).unwrap(),
            qs.iter().map(|&q| Poly::from_bits(q)).collect(),
        )
        .unwrap();
        generate_points(&g, qs.len()).unwrap()
    }

    // Occupancy counts of all elementary boxes with resolution d.
    fn box_counts(words: impl Fn(usize, usize) -> u32, n: usize, m: u32, d: &[u32]) -> Vec<u32> {
        let total: u32 = d.iter().sum();
        let mut counts = vec![0u32; 1 << total];
        for i in 0..n {
            let mut key = 0usize;
            for (j, &dj) in d.iter().enumerate() {
                if dj > 0 {
                    key = (key << dj) | (words(i, j) >> (m - dj)) as usize;
                }
            }
            counts[key] += 1;
        }
        counts
    }

    #[test]
    fn identical_spec_gives_identical_output() {
        let ps = example();
        for spec in [ScrambleSpec::owen(11, 3), ScrambleSpec::linear_shift(11, 3)] {
            let a = scramble::<f64>(&ps, &spec).unwrap();
            let b = scramble::<f64>(&ps, &spec).unwrap();
            assert_eq!(a.values(), b.values());
        }
        let c = scramble::<f64>(&ps, &ScrambleSpec::owen(11, 4)).unwrap();
        let a = scramble::<f64>(&ps, &ScrambleSpec::owen(11, 3)).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn example_stays_stratified_after_scrambling() {
        let ps = example();
        for seed in 0..50 {
            let sps = scramble::<f64>(&ps, &ScrambleSpec::owen(seed, 0)).unwrap();
            let mut col: Vec<f64> = (0..4).map(|i| sps.point(i)[0]).collect();
            col.sort_by(f64::total_cmp);
            for (k, v) in col.iter().enumerate() {
                assert!(*v >= k as f64 / 4.0 && *v < (k + 1) as f64 / 4.0, "{col:?}");
            }
        }
    }

    #[test]
    fn depth_below_m_is_rejected() {
        let ps = rule(6, &[1]);
        let spec = ScrambleSpec { depth: 5, ..ScrambleSpec::owen(0, 0) };
        assert!(matches!(scramble::<f64>(&ps, &spec), Err(Error::InvalidDepth { depth: 5, m: 6 })));
        let spec = ScrambleSpec { depth: 6, ..ScrambleSpec::owen(0, 0) };
        assert!(scramble::<f64>(&ps, &spec).is_ok());
    }

    #[test]
    fn points_lie_in_unit_cube() {
        let ps = rule(8, &[1, 0x3b, 0x91]);
        for spec in [ScrambleSpec::owen(5, 1), ScrambleSpec::linear_shift(5, 1)] {
            let sps = scramble::<f64>(&ps, &spec).unwrap();
            assert!(sps.values().iter().all(|&v| (0.0..1.0).contains(&v)));
            let sps32 = scramble::<f32>(&ps, &spec).unwrap();
            assert!(sps32.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn owen_preserves_elementary_interval_counts() {
        for m in 1..=6u32 {
            let qs: Vec<u64> = [1u64, 3, 7].iter().map(|q| q % (1 << m)).map(|q| q.max(1)).collect();
            let ps = rule(m, &qs);
            for seed in 0..4 {
                let sps = scramble::<f64>(&ps, &ScrambleSpec::owen(seed, 9)).unwrap();
                let scale = (1u64 << m) as f64;
                let word = |i: usize, j: usize| (sps.point(i)[j] * scale).floor() as u32;
                for d1 in 0..=m {
                    for d2 in 0..=(m - d1) {
                        for d3 in 0..=(m - d1 - d2) {
                            let d = [d1, d2, d3];
                            // boxes are permuted, the count multiset is not
                            let mut a = box_counts(word, ps.n(), m, &d);
                            let mut b = box_counts(|i, j| ps.word(i, j), ps.n(), m, &d);
                            a.sort_unstable();
                            b.sort_unstable();
                            assert_eq!(a, b);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn linear_shift_preserves_one_dimensional_strata() {
        let ps = rule(6, &[1, 0x2d]);
        let sps = scramble::<f64>(&ps, &ScrambleSpec::linear_shift(2, 2)).unwrap();
        for j in 0..2 {
            let mut seen = [false; 64];
            for i in 0..64 {
                let k = (sps.point(i)[j] * 64.0).floor() as usize;
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
    }

    #[test]
    fn quadrature_examples() {
        let ps = example();
        let sps = scramble::<f64>(&ps, &ScrambleSpec::owen(1, 1)).unwrap();
        assert_eq!(quadrature(&sps, |_| 1.0), 1.0);
        assert_eq!(deterministic_quadrature::<f64>(&ps, |x| x[0]), 3.0 / 8.0);
        let failing = try_quadrature(&sps, |x| {
            if x[0] > 0.5 {
                Err(Error::InvalidArgument("boom".into()))
            } else {
                Ok(x[0])
            }
        });
        assert!(failing.is_err());
    }

    #[test]
    fn owen_estimates_are_unbiased() {
        let ps = rule(4, &[1, 0x7]);
        let r = 10_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for rep in 0..r {
            let sps = scramble::<f64>(&ps, &ScrambleSpec::owen(77, rep)).unwrap();
            let q = quadrature(&sps, |x| x[0] * x[0] + x[1]);
            sum += q;
            sum2 += q * q;
        }
        let mean = sum / r as f64;
        let se = ((sum2 / r as f64 - mean * mean) / r as f64).sqrt();
        let exact = 1.0 / 3.0 + 0.5;
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact}, se {se}");
    }

    #[test]
    fn linear_shift_estimates_are_unbiased() {
        let ps = rule(4, &[1]);
        let r = 10_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for rep in 0..r {
            let sps = scramble::<f64>(&ps, &ScrambleSpec::linear_shift(3, rep)).unwrap();
            let q = quadrature(&sps, |x| x[0] * x[0]);
            sum += q;
            sum2 += q * q;
        }
        let mean = sum / r as f64;
        let se = ((sum2 / r as f64 - mean * mean) / r as f64).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn replicates_are_uncorrelated() {
        let ps = rule(3, &[1, 3]);
        let r = 4000;
        let mut pairs = Vec::with_capacity(r);
        for rep in 0..r as u64 {
            let f = |x: &[f64]| x[0] * x[1];
            let a = quadrature(&scramble::<f64>(&ps, &ScrambleSpec::owen(5, 2 * rep)).unwrap(), f);
            let b = quadrature(&scramble::<f64>(&ps, &ScrambleSpec::owen(5, 2 * rep + 1)).unwrap(), f);
            pairs.push((a, b));
        }
        let ma = pairs.iter().map(|p| p.0).sum::<f64>() / r as f64;
        let mb = pairs.iter().map(|p| p.1).sum::<f64>() / r as f64;
        let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / r as f64;
        let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / r as f64;
        let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / r as f64;
        let corr = cov / (va * vb).sqrt();
        // sd of a sample correlation under independence is about 1/sqrt(r)
        assert!(corr.abs() < 4.0 / (r as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn substreams_differ() {
        let base = ScrambleSpec::owen(1, 0);
        assert_ne!(base.substream(1).seed, base.substream(2).seed);
        assert_eq!(base.substream(1), base.substream(1));
    }
}
