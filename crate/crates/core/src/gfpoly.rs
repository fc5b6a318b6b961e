//! Polynomials over GF(2) packed into a machine word.
//!
//! Bit `i` of the mask is the coefficient of `x^i`, so `x^2 + x + 1` is
//! `0b111` and serializes as `"0x7"`. Degrees up to 63 are representable,
//! which covers every modulus this crate builds (`m` stays far below 32).

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use crate::error::{Error, Result};

/// A polynomial over GF(2).
///
/// The packed form is always canonical: there are no stored leading zeros,
/// and the zero polynomial is the empty mask. Its degree is reported as
/// `None`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Poly(u64);

impl Poly {
    pub const ZERO: Poly = Poly(0);
    pub const ONE: Poly = Poly(1);
    pub const X: Poly = Poly(2);

    /// Polynomial whose coefficient bits are `mask`.
    pub const fn from_bits(mask: u64) -> Self {
        Poly(mask)
    }

    /// Builds a polynomial from the exponents of its nonzero terms.
    pub fn from_exponents(exps: &[u32]) -> Self {
        exps.iter().fold(Poly::ZERO, |acc, &e| {
            assert!(e < 64, "exponent {e} exceeds packed width");
            acc + Poly(1u64 << e)
        })
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Degree, or `None` for the zero polynomial.
    pub const fn degree(self) -> Option<u32> {
        if self.0 == 0 {
            None
        } else {
            Some(63 - self.0.leading_zeros())
        }
    }

    /// Coefficient of `x^i`.
    pub fn coeff(self, i: u32) -> u8 {
        if i >= 64 {
            0
        } else {
            ((self.0 >> i) & 1) as u8
        }
    }

    /// Hexadecimal coefficient mask, e.g. `"0x7"` for `x^2 + x + 1`.
    pub fn to_hex(self) -> String {
        format!("{:#x}", self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t
            .strip_prefix("0x")
            .or_else(|| t.strip_prefix("0X"))
            .unwrap_or(t);
        u64::from_str_radix(digits, 16)
            .map(Poly)
            .map_err(|e| Error::Parse(format!("bad polynomial mask {s:?}: {e}")))
    }

    /// Remainder of `self` modulo `p`.
    pub fn modulo(self, p: Poly) -> Result<Poly> {
        let dp = p
            .degree()
            .ok_or_else(|| Error::InvalidModulus("zero modulus".into()))?;
        let mut r = self.0;
        while r != 0 {
            let dr = 63 - r.leading_zeros();
            if dr < dp {
                break;
            }
            r ^= p.0 << (dr - dp);
        }
        Ok(Poly(r))
    }

    /// Greatest common divisor (monic is automatic over GF(2)).
    pub fn gcd(self, other: Poly) -> Poly {
        let (mut a, mut b) = (self, other);
        while !b.is_zero() {
            let r = a.modulo(b).expect("nonzero divisor");
            a = b;
            b = r;
        }
        a
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({})", self)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return write!(f, "0");
        }
        let mut first = true;
        for i in (0..64u32).rev() {
            if self.coeff(i) == 1 {
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                match i {
                    0 => write!(f, "1")?,
                    1 => write!(f, "x")?,
                    _ => write!(f, "x^{i}")?,
                }
            }
        }
        Ok(())
    }
}

impl FromStr for Poly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Poly::from_hex(s)
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Add for Poly {
    type Output = Poly;

    fn add(self, rhs: Poly) -> Poly {
        Poly(self.0 ^ rhs.0)
    }
}

#[allow(clippy::suspicious_op_assign_impl)]
impl AddAssign for Poly {
    fn add_assign(&mut self, rhs: Poly) {
        self.0 ^= rhs.0;
    }
}

/// Sum over GF(2): coefficientwise XOR.
pub fn poly_add(a: Poly, b: Poly) -> Poly {
    a + b
}

fn check_modulus(p: Poly) -> Result<u32> {
    match p.degree() {
        None => Err(Error::InvalidModulus("zero modulus".into())),
        Some(0) => Err(Error::InvalidModulus("constant modulus".into())),
        Some(d) => Ok(d),
    }
}

/// `(a * b) mod p`.
pub fn poly_mulmod(a: Poly, b: Poly, p: Poly) -> Result<Poly> {
    let dp = check_modulus(p)?;
    let a = a.modulo(p)?.0;
    let b = b.modulo(p)?.0;
    let top = 1u64 << dp;
    let mut acc = 0u64;
    // Horner over the bits of b, highest first.
    for i in (0..dp).rev() {
        acc <<= 1;
        if acc & top != 0 {
            acc ^= p.0;
        }
        if (b >> i) & 1 == 1 {
            acc ^= a;
        }
    }
    Ok(Poly(acc))
}

/// Irreducibility over GF(2) by Ben-Or's test: `p` of degree `d` is
/// irreducible iff `gcd(x^(2^i) - x, p) = 1` for every `1 <= i <= d/2`.
pub fn is_irreducible(p: Poly) -> Result<bool> {
    let d = match p.degree() {
        None | Some(0) => {
            return Err(Error::InvalidArgument(
                "irreducibility needs degree >= 1".into(),
            ))
        }
        Some(d) => d,
    };
    let x = Poly::X.modulo(p)?;
    let mut power = x;
    for _ in 1..=d / 2 {
        power = poly_mulmod(power, power, p)?;
        if (power + x).gcd(p) != Poly::ONE {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The irreducible polynomial of degree `m` with the smallest bit encoding.
pub fn find_irreducible(m: u32) -> Result<Poly> {
    if !(1..=63).contains(&m) {
        return Err(Error::InvalidArgument(format!(
            "degree must lie in 1..=63, got {m}"
        )));
    }
    let lo = 1u64 << m;
    let hi = if m == 63 { u64::MAX } else { (1u64 << (m + 1)) - 1 };
    for bits in lo..=hi {
        let p = Poly(bits);
        if is_irreducible(p)? {
            return Ok(p);
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// Coefficients of `x^-1, ..., x^-m` in the Laurent expansion of `u / p`.
pub fn laurent_digits(u: Poly, p: Poly, m: u32) -> Result<Vec<u8>> {
    let bits = laurent_bits(u, p, m)?;
    Ok((0..m).map(|l| ((bits >> (m - 1 - l)) & 1) as u8).collect())
}

/// The same digits packed into an integer, first digit most significant,
/// i.e. the point `sum_l u_l 2^-l` scaled by `2^m`.
pub fn laurent_bits(u: Poly, p: Poly, m: u32) -> Result<u64> {
    let dp = check_modulus(p)?;
    if let Some(du) = u.degree() {
        if du >= dp {
            return Err(Error::InvalidArgument(format!(
                "numerator degree {du} must be below modulus degree {dp}"
            )));
        }
    }
    if m > 64 {
        return Err(Error::InvalidArgument(format!("at most 64 digits, got {m}")));
    }
    let top = 1u64 << dp;
    let mut r = u.0;
    let mut out = 0u64;
    for _ in 0..m {
        r <<= 1;
        out <<= 1;
        if r & top != 0 {
            r ^= p.0;
            out |= 1;
        }
    }
    Ok(out)
}
