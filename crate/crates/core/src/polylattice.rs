//! Polynomial lattice point sets in base 2.
//!
//! Point `i` has coordinate `j` equal to the first `m` Laurent digits of
//! `i(x) q_j(x) / p(x)`, where `i(x)` is the polynomial whose coefficients
//! are the binary digits of `i`. The map is GF(2)-linear in the digits of
//! `i`, so every coordinate is generated from its `m` generator columns.

use crate::error::{Error, Result};
use crate::gfpoly::{is_irreducible, laurent_bits, poly_mulmod, Poly};
use crate::real::Real;

/// Largest `m` supported by the packed point representation.
pub const MAX_M: u32 = 30;

/// Modulus and generating polynomials of a base-2 polynomial lattice rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratingVector {
    m: u32,
    modulus: Poly,
    q: Vec<Poly>,
}

impl GeneratingVector {
    pub const BASE: u32 = 2;

    /// Validates `deg(p) = m`, `p` irreducible, every `q_j` nonzero with
    /// degree below `m`.
    pub fn new(m: u32, modulus: Poly, q: Vec<Poly>) -> Result<Self> {
        if m == 0 || m > MAX_M {
            return Err(Error::InvalidArgument(format!("m must lie in 1..={MAX_M}, got {m}")));
        }
        if modulus.degree() != Some(m) {
            return Err(Error::InvalidModulus(format!(
                "modulus {} has degree {:?}, expected {m}",
                modulus.to_hex(),
                modulus.degree()
            )));
        }
        if !is_irreducible(modulus)? {
            return Err(Error::InvalidModulus(format!("{} is reducible", modulus.to_hex())));
        }
        for (j, qj) in q.iter().enumerate() {
            match qj.degree() {
                None => {
                    return Err(Error::InvalidArgument(format!("q_{} is zero", j + 1)));
                }
                Some(d) if d >= m => {
                    return Err(Error::InvalidArgument(format!(
                        "q_{} = {} has degree {d} >= m = {m}",
                        j + 1,
                        qj.to_hex()
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { m, modulus, q })
    }

    pub fn base(&self) -> u32 {
        Self::BASE
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> usize {
        1usize << self.m
    }

    pub fn modulus(&self) -> Poly {
        self.modulus
    }

    pub fn components(&self) -> &[Poly] {
        &self.q
    }

    pub fn dims(&self) -> usize {
        self.q.len()
    }

    /// The first `s` components as a new vector.
    pub fn prefix(&self, s: usize) -> Result<Self> {
        if s > self.q.len() {
            return Err(Error::Dimension(format!(
                "requested {s} components, vector has {}",
                self.q.len()
            )));
        }
        Ok(Self { m: self.m, modulus: self.modulus, q: self.q[..s].to_vec() })
    }
}

/// Generator columns of one coordinate: column `k` is the digit pattern of
/// index `2^k`, i.e. the Laurent digits of `x^k q mod p`.
pub fn generator_columns(modulus: Poly, q: Poly, m: u32) -> Result<Vec<u32>> {
    let mut cols = Vec::with_capacity(m as usize);
    let mut xk = Poly::ONE;
    for _ in 0..m {
        let num = poly_mulmod(xk, q, modulus)?;
        cols.push(laurent_bits(num, modulus, m)? as u32);
        xk = poly_mulmod(xk, Poly::X, modulus)?;
    }
    Ok(cols)
}

/// Fills `out[i]` with the packed digits of coordinate `i` for all `2^m`
/// indices, given the coordinate's generator columns.
pub fn fill_coordinate(cols: &[u32], out: &mut [u32]) {
    debug_assert_eq!(out.len(), 1usize << cols.len());
    if out.is_empty() {
        return;
    }
    out[0] = 0;
    for i in 1..out.len() {
        out[i] = out[i & (i - 1)] ^ cols[i.trailing_zeros() as usize];
    }
}

/// A deterministic point set stored as packed digit matrices.
///
/// Entry `(i, j)` holds `sum_l d_l 2^(m-l)` for the digits `d_1..d_m` of
/// `x_i^(j)`, so the real coordinate is that integer times `2^-m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    m: u32,
    s: usize,
    digits: Vec<u32>,
}

impl PointSet {
    /// Wraps raw packed digits laid out row-major (`n` rows of `s`).
    pub fn from_digits(m: u32, s: usize, digits: Vec<u32>) -> Result<Self> {
        if m > MAX_M {
            return Err(Error::InvalidArgument(format!("m must be at most {MAX_M}")));
        }
        let n = 1usize << m;
        if digits.len() != n * s {
            return Err(Error::Dimension(format!(
                "expected {} digit entries, got {}",
                n * s,
                digits.len()
            )));
        }
        if let Some(bad) = digits.iter().find(|&&d| (d as u64) >> m != 0) {
            return Err(Error::InvalidArgument(format!("digit word {bad} exceeds m = {m} digits")));
        }
        Ok(Self { m, s, digits })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> usize {
        1usize << self.m
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Packed digits of `x_i^(j)`.
    #[inline]
    pub fn word(&self, i: usize, j: usize) -> u32 {
        self.digits[i * self.s + j]
    }

    /// Digit `l` (1-based, most significant first) of `x_i^(j)`.
    pub fn digit(&self, i: usize, j: usize, l: u32) -> u8 {
        assert!(l >= 1 && l <= self.m);
        ((self.word(i, j) >> (self.m - l)) & 1) as u8
    }

    /// Packed digit row of point `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.digits[i * self.s..(i + 1) * self.s]
    }

    pub fn value<T: Real>(&self, i: usize, j: usize) -> T {
        T::from_u32(self.word(i, j)).unwrap() * T::powi(T::c(2.0), -(self.m as i32))
    }

    /// All coordinates, row-major.
    pub fn values<T: Real>(&self) -> Vec<T> {
        let scale = T::powi(T::c(2.0), -(self.m as i32));
        self.digits.iter().map(|&d| T::from_u32(d).unwrap() * scale).collect()
    }

    /// Restriction to the first `s` coordinates.
    pub fn project(&self, s: usize) -> Result<Self> {
        if s > self.s {
            return Err(Error::Dimension(format!("cannot project {} dims to {s}", self.s)));
        }
        let digits = (0..self.n()).flat_map(|i| self.row(i)[..s].to_vec()).collect();
        Ok(Self { m: self.m, s, digits })
    }
}

/// Generates the `2^m` points of the rule in its first `s` dimensions.
pub fn generate_points(g: &GeneratingVector, s: usize) -> Result<PointSet> {
    if s > g.dims() {
        return Err(Error::Dimension(format!(
            "requested {s} dimensions, generating vector has {}",
            g.dims()
        )));
    }
    let n = g.n();
    let mut digits = vec![0u32; n * s];
    let mut column = vec![0u32; n];
    for (j, &qj) in g.components()[..s].iter().enumerate() {
        let cols = generator_columns(g.modulus(), qj, g.m())?;
        fill_coordinate(&cols, &mut column);
        for (i, &c) in column.iter().enumerate() {
            digits[i * s + j] = c;
        }
    }
    PointSet::from_digits(g.m(), s, digits)
}

/// Upper limit on `2^m * #compositions` for exhaustive quality checks.
pub const NET_STRENGTH_BUDGET: u64 = 10_000_000;

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Visits every composition of `total` into `parts` nonnegative parts.
fn for_each_composition(total: u32, parts: usize, f: &mut impl FnMut(&[u32]) -> bool) -> bool {
    fn rec(buf: &mut Vec<u32>, left: u32, parts: usize, f: &mut impl FnMut(&[u32]) -> bool) -> bool {
        if buf.len() + 1 == parts {
            buf.push(left);
            let ok = f(buf);
            buf.pop();
            return ok;
        }
        for d in 0..=left {
            buf.push(d);
            let ok = rec(buf, left - d, parts, f);
            buf.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    if parts == 0 {
        return f(&[]);
    }
    let mut buf = Vec::with_capacity(parts);
    rec(&mut buf, total, parts, f)
}

/// Smallest `t` such that the point set is a `(t, m, s)`-net in base 2,
/// found by counting points in every elementary interval.
pub fn net_strength(ps: &PointSet) -> Result<u32> {
    let (m, s) = (ps.m(), ps.s());
    if s == 0 {
        return Ok(0);
    }
    let comps = binomial(m as u64 + s as u64 - 1, s as u64 - 1);
    if (ps.n() as u64).saturating_mul(comps) > NET_STRENGTH_BUDGET {
        return Err(Error::TooLarge(format!(
            "exhaustive check over {comps} compositions of m = {m} with {} points",
            ps.n()
        )));
    }
    let mut counts = Vec::new();
    for t in 0..m {
        let resolution = m - t;
        let expected = 1u32 << t;
        counts.clear();
        counts.resize(1usize << resolution, 0u32);
        let ok = for_each_composition(resolution, s, &mut |d: &[u32]| {
            counts.iter_mut().for_each(|c| *c = 0);
            for i in 0..ps.n() {
                let mut key = 0usize;
                for (j, &dj) in d.iter().enumerate() {
                    if dj > 0 {
                        key = (key << dj) | (ps.word(i, j) >> (m - dj)) as usize;
                    }
                }
                counts[key] += 1;
            }
            counts.iter().all(|&c| c == expected)
        });
        if ok {
            return Ok(t);
        }
    }
    Ok(m)
}
