//! Continued fractions, convergents, and the B-dependent split of denominators.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::alpha::{Alpha, AlphaSpec};
use crate::error::{Error, Result};

/// Convergent `l_k / q_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Convergent {
    pub l: u128,
    pub q: u128,
}

/// Partial quotients `a_1..a_K` and convergents `l_k/q_k`, `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    value: BigRational,
    partial_quotients: Vec<u128>,
    convergents: Vec<Convergent>,
    terminated: bool,
}

impl ContinuedFraction {
    /// Builds the convergents from a known list of partial quotients.
    ///
    /// With `terminated == false` the list is read as the beginning of a longer
    /// expansion, so the last denominator has an unknown successor.
    pub fn from_partial_quotients(a: &[u128], terminated: bool) -> Result<Self> {
        if a.contains(&0) {
            return Err(Error::InvalidArgument("partial quotients must be positive".into()));
        }
        let mut convergents = vec![Convergent { l: 0, q: 1 }];
        let (mut l_prev, mut q_prev) = (1u128, 0u128);
        for &ak in a {
            let last = *convergents.last().expect("nonempty");
            let l = ak
                .checked_mul(last.l)
                .and_then(|v| v.checked_add(l_prev))
                .ok_or(Error::Overflow("building convergent numerators"))?;
            let q = ak
                .checked_mul(last.q)
                .and_then(|v| v.checked_add(q_prev))
                .ok_or(Error::Overflow("building convergent denominators"))?;
            l_prev = last.l;
            q_prev = last.q;
            convergents.push(Convergent { l, q });
        }
        let last = convergents.last().expect("nonempty");
        let value = BigRational::new(BigInt::from(last.l), BigInt::from(last.q));
        Ok(ContinuedFraction {
            value,
            partial_quotients: a.to_vec(),
            convergents,
            terminated,
        })
    }

    /// `a_1..a_K`.
    pub fn partial_quotients(&self) -> &[u128] {
        &self.partial_quotients
    }

    /// `l_k/q_k` for `k = 0..=K`, starting with `0/1`.
    pub fn convergents(&self) -> &[Convergent] {
        &self.convergents
    }

    pub fn q(&self, k: usize) -> u128 {
        self.convergents[k].q
    }

    /// Index of the last convergent.
    pub fn len(&self) -> usize {
        self.partial_quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partial_quotients.is_empty()
    }

    /// Whether the expansion ended exactly (α is the last convergent).
    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// The value used for dynamics: the source value when one was expanded,
    /// otherwise the last convergent.
    pub fn value(&self) -> &BigRational {
        &self.value
    }

    pub fn alpha(&self) -> Alpha {
        Alpha::from_rational(&self.value)
    }

    pub fn largest_q(&self) -> u128 {
        self.convergents.last().map_or(1, |c| c.q)
    }
}

/// Expands α by the Gauss map.
///
/// Stops after `k_max` partial quotients, after the first denominator above
/// `q_cap`, or when the expansion of an exact rational ends. An interval
/// source only yields partial quotients shared by every point of the
/// interval; running out of those before a stopping rule fires is an error.
pub fn cf_expand(spec: &AlphaSpec, k_max: usize, q_cap: u128) -> Result<ContinuedFraction> {
    let (lo, hi) = match spec {
        AlphaSpec::PartialQuotients(a) => {
            let mut taken = Vec::new();
            let mut q_prev = 0u128;
            let mut q = 1u128;
            for &ak in a.iter().take(k_max) {
                taken.push(ak);
                let next = ak.checked_mul(q).and_then(|v| v.checked_add(q_prev));
                match next {
                    Some(n) => {
                        q_prev = q;
                        q = n;
                        if q > q_cap {
                            break;
                        }
                    }
                    None => break,
                }
            }
            let mut cf = ContinuedFraction::from_partial_quotients(&taken, false);
            if matches!(cf, Err(Error::Overflow(_))) {
                taken.pop();
                cf = ContinuedFraction::from_partial_quotients(&taken, false);
            }
            return cf;
        }
        AlphaSpec::Rational(r) => (r.clone(), r.clone()),
        AlphaSpec::Decimal(lo, hi) => (lo.clone(), hi.clone()),
    };
    let zero = BigRational::zero();
    let one = BigRational::one();
    if lo < zero || hi >= one {
        return Err(Error::InvalidArgument("alpha must lie in [0, 1)".into()));
    }
    let value = lo.clone();
    let (mut lo, mut hi) = (lo, hi);
    let mut quotients: Vec<u128> = Vec::new();
    let mut terminated = false;
    let (mut q_prev, mut q) = (0u128, 1u128);
    while quotients.len() < k_max {
        if lo == hi && lo.is_zero() {
            terminated = true;
            break;
        }
        if lo.is_zero() {
            return Err(Error::PrecisionExhausted { certified: quotients.len() });
        }
        let inv_lo = lo.recip();
        let inv_hi = hi.recip();
        let a_hi = inv_lo.floor();
        let a_lo = inv_hi.floor();
        if a_hi != a_lo {
            return Err(Error::PrecisionExhausted { certified: quotients.len() });
        }
        let a = a_lo
            .to_integer()
            .to_u128()
            .ok_or(Error::Overflow("reading a partial quotient"))?;
        let Some(next_q) = a.checked_mul(q).and_then(|v| v.checked_add(q_prev)) else {
            break;
        };
        quotients.push(a);
        let new_lo = inv_hi - &a_lo;
        let new_hi = inv_lo - &a_lo;
        lo = new_lo;
        hi = new_hi;
        q_prev = q;
        q = next_q;
        if q > q_cap {
            break;
        }
    }
    if !terminated && lo == hi && lo.is_zero() {
        terminated = true;
    }
    let mut cf = ContinuedFraction::from_partial_quotients(&quotients, terminated)?;
    cf.value = value;
    Ok(cf)
}

/// Membership of each `q_k` (`k >= 1`) in `Q♭(B)` or `Q♯(B)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenominatorClassification {
    pub b: f64,
    /// Indices `k` with `q_k ∈ Q♭(B)`.
    pub flat: Vec<usize>,
    /// Indices `k` with `q_k ∈ Q♯(B)`.
    pub sharp: Vec<usize>,
    /// Index of the last denominator when its successor is unknown.
    pub unresolved: Option<usize>,
}

impl DenominatorClassification {
    pub fn is_sharp(&self, k: usize) -> bool {
        self.sharp.contains(&k)
    }

    /// Values of `Q♭(B)`, including 1.
    pub fn q_flat(&self, cf: &ContinuedFraction) -> Vec<u128> {
        let mut v: Vec<u128> = std::iter::once(1).chain(self.flat.iter().map(|&k| cf.q(k))).collect();
        v.dedup();
        v
    }

    pub fn q_sharp(&self, cf: &ContinuedFraction) -> Vec<u128> {
        self.sharp.iter().map(|&k| cf.q(k)).collect()
    }

    pub fn first_sharp(&self) -> Option<usize> {
        self.sharp.first().copied()
    }
}

/// `next > q^b`, exact for integral `b`.
fn exceeds_power(next: u128, q: u128, b: f64) -> bool {
    if b.fract() == 0.0 && b >= 0.0 && b <= u32::MAX as f64 {
        match q.checked_pow(b as u32) {
            Some(p) => next > p,
            None => false,
        }
    } else {
        (next as f64).ln() > b * (q as f64).ln()
    }
}

/// Splits the computed denominators by `q_{k+1} > q_k^B > 1`.
///
/// Ties go to `Q♭`. When the expansion terminated, the last denominator has
/// no successor (every multiple of it is an exact resonance) and is placed in
/// `Q♯` when it exceeds 1.
pub fn classify(cf: &ContinuedFraction, b: f64) -> Result<DenominatorClassification> {
    if !(b > 2.0) {
        return Err(Error::InvalidArgument(format!("B must exceed 2, got {b}")));
    }
    let mut cls = DenominatorClassification { b, flat: Vec::new(), sharp: Vec::new(), unresolved: None };
    let k_last = cf.len();
    for k in 1..=k_last {
        let q = cf.q(k);
        if k == k_last {
            if cf.is_terminated() {
                if q > 1 {
                    cls.sharp.push(k);
                } else {
                    cls.flat.push(k);
                }
            } else {
                cls.unresolved = Some(k);
            }
            continue;
        }
        let next = cf.q(k + 1);
        if q > 1 && exceeds_power(next, q, b) {
            cls.sharp.push(k);
        } else {
            cls.flat.push(k);
        }
    }
    Ok(cls)
}

/// Whether `m ∈ M₁(B)`: `m = 0`, or `q_k <= |m| < q_{k+1}` and `q_k | m` for some `q_k ∈ Q♯(B)`.
pub fn m1_member(m: i64, cls: &DenominatorClassification, cf: &ContinuedFraction) -> Result<bool> {
    if m == 0 {
        return Ok(true);
    }
    let am = m.unsigned_abs() as u128;
    let k_last = cf.len();
    if k_last == 0 {
        return Err(Error::UndecidableBand { m, q_max: 1 });
    }
    if am < cf.q(1) {
        return Ok(false);
    }
    for k in 1..k_last {
        let (q, next) = (cf.q(k), cf.q(k + 1));
        if q <= am && am < next {
            return Ok(cls.is_sharp(k) && am.is_multiple_of(q));
        }
    }
    // am >= q_K
    if cf.is_terminated() {
        let q = cf.q(k_last);
        return Ok(cls.is_sharp(k_last) && am.is_multiple_of(q));
    }
    Err(Error::UndecidableBand { m, q_max: cf.largest_q() })
}

/// A rational α whose first `levels` denominators lie in `Q♯(B)`.
///
/// Starts from `a_1 = 2` and picks `a_{k+1} = ⌈q_k^{B-1}⌉ + 1` for
/// `k = 1..=levels`, then continues with a tail of ones.
pub fn liouville_alpha(b: f64, levels: usize) -> Result<ContinuedFraction> {
    liouville_alpha_with_tail(b, levels, &[1; GOLDEN_TAIL])
}

pub const GOLDEN_TAIL: usize = 24;

/// As [`liouville_alpha`], with an explicit tail of partial quotients.
pub fn liouville_alpha_with_tail(b: f64, levels: usize, tail: &[u128]) -> Result<ContinuedFraction> {
    if !(b > 2.0) {
        return Err(Error::InvalidArgument(format!("B must exceed 2, got {b}")));
    }
    if levels > 5 {
        return Err(Error::InvalidArgument("at most 5 forced levels are supported".into()));
    }
    if levels == 0 {
        let mut a = vec![1u128];
        a.extend_from_slice(tail);
        return ContinuedFraction::from_partial_quotients(&a, false);
    }
    let mut a: Vec<u128> = vec![2];
    for _ in 0..levels {
        let cf = ContinuedFraction::from_partial_quotients(&a, false)?;
        let q = cf.largest_q();
        let next = if b.fract() == 0.0 {
            q.checked_pow(b as u32 - 1)
                .and_then(|p| p.checked_add(1))
                .ok_or(Error::Overflow("choosing a Liouville partial quotient"))?
        } else {
            let p = (q as f64).powf(b - 1.0).ceil();
            if p >= u128::MAX as f64 {
                return Err(Error::Overflow("choosing a Liouville partial quotient"));
            }
            p as u128 + 1
        };
        a.push(next);
    }
    a.extend_from_slice(tail);
    ContinuedFraction::from_partial_quotients(&a, false)
}

/// `‖q α‖` for the exact source value, as a rational.
pub fn dist_to_int_exact(alpha: &BigRational, q: u128) -> BigRational {
    let v = alpha * BigRational::from_integer(BigInt::from(q));
    let f = &v - v.floor();
    let g = BigRational::one() - &f;
    if f < g {
        f
    } else {
        g
    }
}
