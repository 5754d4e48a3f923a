//! Rotation numbers: parsing, exact sources, and double-double evaluation of `nα mod 1`.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heisenberg::floor_frac;

/// A real number in `[0, 1)` carried as an unevaluated sum `hi + lo` of two doubles,
/// plus the exact fraction when it is a small rational.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha {
    hi: f64,
    lo: f64,
    exact: Option<(i64, i64)>,
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `frac(c · k)` for a double `c` and an integer-valued double `k`, evaluated
/// with an error-free product so that large `k` does not lose the fractional part.
#[inline]
pub fn frac_product(c: f64, k: f64) -> f64 {
    let (p, e) = two_prod(c, k);
    let (_, r) = floor_frac(p);
    floor_frac(r + e).1
}

/// `frac(c · k)` for an integer `k` of any size up to `2^104`.
pub fn frac_product_wide(c: f64, k: u128) -> f64 {
    const SPLIT: u32 = 52;
    let hi = (k >> SPLIT) as f64;
    let lo = (k & ((1u128 << SPLIT) - 1)) as f64;
    if hi == 0.0 {
        return frac_product(c, lo);
    }
    // c · 2^52 is exact; only its fractional part matters
    let c_hi = floor_frac(c * (1u64 << SPLIT) as f64).1;
    floor_frac(frac_product(c_hi, hi) + frac_product(c, lo)).1
}

impl Alpha {
    pub fn from_f64(a: f64) -> Self {
        Alpha { hi: a, lo: 0.0, exact: None }
    }

    /// Exact fraction `p/q`.
    pub fn from_ratio(p: i64, q: i64) -> Result<Self> {
        if q <= 0 {
            return Err(Error::InvalidArgument(format!("denominator must be positive, got {q}")));
        }
        let g = num_integer::gcd(p, q);
        let (p, q) = (p / g, q / g);
        let r = BigRational::new(BigInt::from(p), BigInt::from(q));
        let mut a = Self::from_rational(&r);
        a.exact = Some((p.rem_euclid(q), q));
        Ok(a)
    }

    /// Double-double approximation of a rational, reduced into `[0, 1)`.
    pub fn from_rational(r: &BigRational) -> Self {
        let r = r - r.floor();
        let hi = r.to_f64().unwrap_or(0.0);
        let rest = &r - BigRational::from_float(hi).unwrap_or_else(BigRational::zero);
        let lo = rest.to_f64().unwrap_or(0.0);
        let exact = if r.denom() <= &BigInt::from(i64::MAX) {
            Some((r.numer().to_i64().unwrap_or(0), r.denom().to_i64().unwrap_or(1)))
        } else {
            None
        };
        Alpha { hi, lo, exact }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.hi
    }

    pub fn exact_ratio(&self) -> Option<(i64, i64)> {
        self.exact
    }

    /// `n α mod 1`.
    pub fn frac_mul(&self, n: i64) -> f64 {
        if let Some((p, q)) = self.exact {
            let r = (n as i128 * p as i128).rem_euclid(q as i128);
            return r as f64 / q as f64;
        }
        let nf = n as f64;
        let (p, e) = two_prod(self.hi, nf);
        let (_, r) = floor_frac(p);
        floor_frac(r + (e + nf * self.lo)).1
    }

    /// `t + n α mod 1`.
    #[inline]
    pub fn rotate(&self, t: f64, n: i64) -> f64 {
        floor_frac(t + self.frac_mul(n)).1
    }

    /// `‖m α‖`, distance to the nearest integer.
    pub fn dist_to_int(&self, m: i64) -> f64 {
        let f = self.frac_mul(m);
        f.min(1.0 - f)
    }
}

/// Where a rotation number comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSpec {
    /// A decimal truncation of an unknown real: the value lies in `[d, d + 10^{-digits})`.
    Decimal(BigRational, BigRational),
    /// An exact rational.
    Rational(BigRational),
    /// Exactly known leading partial quotients `a_1, a_2, …` of an expansion that continues.
    PartialQuotients(Vec<u128>),
}

impl AlphaSpec {
    /// An interval source `[lo, hi]`; `lo == hi` means the value is exact.
    pub fn interval(lo: BigRational, hi: BigRational) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidArgument("empty interval".into()));
        }
        Ok(AlphaSpec::Decimal(lo, hi))
    }

    /// `[0; 1, 1, 1, …]` with `k` ones.
    pub fn golden(k: usize) -> Self {
        AlphaSpec::PartialQuotients(vec![1; k])
    }
}

fn parse_decimal(s: &str) -> Result<(BigRational, BigRational)> {
    let s = s.trim();
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse("empty decimal".into()));
    }
    let digits: String = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("bad decimal digits in {s:?}")));
    }
    let numer: BigInt = digits.parse().map_err(|_| Error::Parse(s.to_string()))?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let lo = BigRational::new(numer, denom.clone());
    let hi = &lo + BigRational::new(BigInt::one(), denom);
    Ok((lo, hi))
}

impl FromStr for AlphaSpec {
    type Err = Error;

    /// Accepts `dec:<digits>`, `rat:<p>/<q>`, or `cf:a1,a2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("alpha {s:?} needs a dec:, rat: or cf: prefix")))?;
        match kind {
            "dec" => {
                let (lo, hi) = parse_decimal(body)?;
                Ok(AlphaSpec::Decimal(lo, hi))
            }
            "rat" => {
                let (p, q) = body
                    .split_once('/')
                    .ok_or_else(|| Error::Parse(format!("rational {body:?} must look like p/q")))?;
                let p: BigInt = p.trim().parse().map_err(|_| Error::Parse(p.to_string()))?;
                let q: BigInt = q.trim().parse().map_err(|_| Error::Parse(q.to_string()))?;
                if q.is_zero() || q.is_negative() {
                    return Err(Error::Parse("rational denominator must be positive".into()));
                }
                Ok(AlphaSpec::Rational(BigRational::new(p, q)))
            }
            "cf" => {
                let a = body
                    .split(',')
                    .map(|t| {
                        let v: u128 = t.trim().parse().map_err(|_| Error::Parse(t.to_string()))?;
                        if v == 0 {
                            Err(Error::Parse("partial quotients must be positive".into()))
                        } else {
                            Ok(v)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                if a.is_empty() {
                    return Err(Error::Parse("empty partial-quotient list".into()));
                }
                Ok(AlphaSpec::PartialQuotients(a))
            }
            other => Err(Error::Parse(format!("unknown alpha kind {other:?}"))),
        }
    }
}
