//! Truncated Fourier series on the circle, the resonant split, the cobounding
//! solver and Birkhoff sums.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{m1_member, Alpha, ContinuedFraction, DenominatorClassification};
use crate::compensated::CompensatedComplex;
use crate::error::{Error, Result};

/// Below this `‖mα‖` the cobounding solver refuses to divide.
pub const SMALL_DIVISOR_FLOOR: f64 = 1e-12;

/// Default frequency cutoff `|m| <= 64`.
pub const DEFAULT_TRUNCATION: i64 = 64;

// Below this `‖mα‖` a geometric Birkhoff sum loses too many digits; loop instead.
const GEOMETRIC_FLOOR: f64 = 1e-4;

/// `e(x) = exp(2πix)`, with the argument reduced mod 1 first.
#[inline]
pub fn e(x: f64) -> Complex64 {
    let r = x - x.floor();
    let (s, c) = (TAU * r).sin_cos();
    Complex64::new(c, s)
}

#[inline]
fn e_freq(m: i64, t: f64) -> Complex64 {
    e(crate::arith::frac_product(m as f64, t))
}

/// A finitely supported Fourier series `Σ f̂(m) e(mt)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierSeries {
    coeffs: BTreeMap<i64, Complex64>,
    real_valued: bool,
}

impl FourierSeries {
    pub fn zero() -> Self {
        FourierSeries { coeffs: BTreeMap::new(), real_valued: true }
    }

    /// Builds a series from `(m, f̂(m))` pairs; repeated frequencies are added.
    ///
    /// With `real_valued`, the coefficients must satisfy `f̂(-m) = conj f̂(m)`.
    pub fn from_coeffs<I>(coeffs: I, real_valued: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        let mut map: BTreeMap<i64, Complex64> = BTreeMap::new();
        for (m, c) in coeffs {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("coefficient at m = {m} is not finite")));
            }
            *map.entry(m).or_default() += c;
        }
        map.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        let f = FourierSeries { coeffs: map, real_valued };
        if real_valued {
            f.check_hermitian()?;
        }
        Ok(f)
    }

    fn check_hermitian(&self) -> Result<()> {
        let scale = self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        for (&m, c) in &self.coeffs {
            let partner = self.coeff(-m).conj();
            if (c - partner).norm() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "real series needs coeff(-{m}) = conj coeff({m})"
                )));
            }
        }
        Ok(())
    }

    pub fn constant(c: f64) -> Self {
        Self::from_coeffs([(0, Complex64::new(c, 0.0))], true).expect("constant is real")
    }

    /// `amp · cos(2π m t + phase)`.
    pub fn cos(m: i64, amp: f64, phase: f64) -> Self {
        let half = Complex64::from_polar(0.5 * amp, phase);
        if m == 0 {
            return Self::constant(amp * phase.cos());
        }
        Self::from_coeffs([(m, half), (-m, half.conj())], true).expect("cosine is real")
    }

    /// `amp · sin(2π m t)`.
    pub fn sin(m: i64, amp: f64) -> Self {
        Self::cos(m, amp, -std::f64::consts::FRAC_PI_2)
    }

    /// The single mode `c · e(mt)`.
    pub fn mode(m: i64, c: Complex64) -> Self {
        let real = m == 0 && c.im == 0.0;
        Self::from_coeffs([(m, c)], real).expect("one mode")
    }

    #[inline]
    pub fn coeff(&self, m: i64) -> Complex64 {
        self.coeffs.get(&m).copied().unwrap_or_default()
    }

    /// `f̂(0)`, the mean over the circle.
    pub fn mean(&self) -> Complex64 {
        self.coeff(0)
    }

    pub fn is_real_valued(&self) -> bool {
        self.real_valued
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().map(|(&m, &c)| (m, c))
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|m|` in the support, 0 for the empty series.
    pub fn max_frequency(&self) -> i64 {
        self.coeffs.keys().map(|m| m.abs()).max().unwrap_or(0)
    }

    /// `Σ |f̂(m)|`, a bound on the sup norm.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// `Σ |m| |f̂(m)|`.
    pub fn derivative_l1(&self) -> f64 {
        self.coeffs.iter().map(|(m, c)| m.unsigned_abs() as f64 * c.norm()).sum()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.coeffs.iter().map(|(&m, &c)| c * e_freq(m, t)).sum()
    }

    /// Real part of [`eval`](Self::eval); exact value for real-valued series.
    #[inline]
    pub fn eval_real(&self, t: f64) -> f64 {
        self.eval(t).re
    }

    pub fn add(&self, other: &FourierSeries) -> FourierSeries {
        let mut map = self.coeffs.clone();
        for (&m, &c) in &other.coeffs {
            *map.entry(m).or_default() += c;
        }
        map.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        FourierSeries { coeffs: map, real_valued: self.real_valued && other.real_valued }
    }

    pub fn sub(&self, other: &FourierSeries) -> FourierSeries {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> FourierSeries {
        let mut map: BTreeMap<i64, Complex64> = self.coeffs.iter().map(|(&m, &c)| (m, c * s)).collect();
        map.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        FourierSeries { coeffs: map, real_valued: self.real_valued }
    }

    /// Coefficient convolution, the series of the pointwise product.
    pub fn mul(&self, other: &FourierSeries) -> FourierSeries {
        let mut map: BTreeMap<i64, Complex64> = BTreeMap::new();
        for (&m, &a) in &self.coeffs {
            for (&n, &b) in &other.coeffs {
                *map.entry(m + n).or_default() += a * b;
            }
        }
        map.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        let mut out = FourierSeries { coeffs: map, real_valued: self.real_valued && other.real_valued };
        if out.real_valued {
            out.symmetrize();
        }
        out
    }

    pub fn square(&self) -> FourierSeries {
        self.mul(self)
    }

    // Forces exact conjugate symmetry after arithmetic that may break it by an ulp.
    fn symmetrize(&mut self) {
        let keys: Vec<i64> = self.coeffs.keys().copied().filter(|&m| m >= 0).collect();
        for m in keys {
            let c = self.coeff(m);
            if m == 0 {
                self.coeffs.insert(0, Complex64::new(c.re, 0.0));
            } else {
                let avg = 0.5 * (c + self.coeff(-m).conj());
                self.coeffs.insert(m, avg);
                self.coeffs.insert(-m, avg.conj());
            }
        }
    }

    /// Keeps the frequencies satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(i64) -> bool) -> FourierSeries {
        FourierSeries {
            coeffs: self.coeffs.iter().filter(|(&m, _)| keep(m)).map(|(&m, &c)| (m, c)).collect(),
            real_valued: self.real_valued,
        }
    }

    /// Drops every `|m| > cutoff`.
    pub fn truncate(&self, cutoff: i64) -> FourierSeries {
        self.filter(|m| m.abs() <= cutoff)
    }

    /// Smallest `C` with `|f̂(m)| <= C |m|^{-p}` on the nonzero support.
    pub fn decay_constant(&self, p: f64) -> f64 {
        self.coeffs
            .iter()
            .filter(|(&m, _)| m != 0)
            .map(|(&m, c)| c.norm() * (m.unsigned_abs() as f64).powf(p))
            .fold(0.0, f64::max)
    }
}

/// JSON form of a function on the circle: a preset name or explicit coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Preset(String),
    Coeffs { real: bool, coeffs: Vec<(i64, f64, f64)> },
}

impl FunctionSpec {
    pub fn to_series(&self) -> Result<FourierSeries> {
        match self {
            FunctionSpec::Preset(name) => match name.as_str() {
                "zero" => Ok(FourierSeries::zero()),
                "cos" => Ok(FourierSeries::cos(1, 1.0, 0.0)),
                "sin" => Ok(FourierSeries::sin(1, 1.0)),
                other => Err(Error::Parse(format!("unknown function preset {other:?}"))),
            },
            FunctionSpec::Coeffs { real, coeffs } => FourierSeries::from_coeffs(
                coeffs.iter().map(|&(m, re, im)| (m, Complex64::new(re, im))),
                *real,
            ),
        }
    }
}

/// Splits `f` into the part on `M₁(B)` and the part on `M₂(B)`.
pub fn decompose(
    f: &FourierSeries,
    cls: &DenominatorClassification,
    cf: &ContinuedFraction,
) -> Result<(FourierSeries, FourierSeries)> {
    let mut resonant = Vec::new();
    let mut rest = Vec::new();
    for (m, c) in f.iter() {
        if m1_member(m, cls, cf)? {
            resonant.push((m, c));
        } else {
            rest.push((m, c));
        }
    }
    let build = |v: Vec<(i64, Complex64)>| FourierSeries {
        coeffs: v.into_iter().collect(),
        real_valued: f.real_valued,
    };
    Ok((build(resonant), build(rest)))
}

/// The split with `M₁ = {0}`: mean and everything else.
pub fn split_mean(f: &FourierSeries) -> (FourierSeries, FourierSeries) {
    (f.filter(|m| m == 0), f.filter(|m| m != 0))
}

/// Solves `g(t + α) - g(t) = f(t)` mode by mode.
pub fn cobound(f: &FourierSeries, alpha: &Alpha, floor: f64) -> Result<FourierSeries> {
    let mut out = Vec::with_capacity(f.len());
    for (m, c) in f.iter() {
        if m == 0 {
            return Err(Error::InvalidArgument("cannot cobound a nonzero mean".into()));
        }
        let dist = alpha.dist_to_int(m);
        if dist < floor {
            return Err(Error::SmallDivisor { m, dist, floor });
        }
        out.push((m, c / (e(alpha.frac_mul(m)) - 1.0)));
    }
    FourierSeries::from_coeffs(out, false).map(|mut g| {
        g.real_valued = f.real_valued;
        if g.real_valued {
            g.symmetrize();
        }
        g
    })
}

/// Assumed coefficient decay `|f̂(m)| <= c |m|^{-2B}` beyond the truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    pub c: f64,
    pub b: f64,
    /// Frequencies `|m| > truncation` were discarded.
    pub truncation: i64,
}

impl TailProfile {
    /// Profile fitted to the support of `f` itself.
    pub fn fit(f: &FourierSeries, b: f64, truncation: i64) -> Self {
        TailProfile { c: f.decay_constant(2.0 * b), b, truncation }
    }
}

/// Which frequencies the solver is asked to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resonance {
    /// Every `m ∈ M₂(B)`.
    Classified,
    /// Every `m != 0`, the finite-`Q♯` variant.
    MeanOnly,
}

/// A cobounding series and a bound on the sup norm of its discarded tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Cobound {
    pub g: FourierSeries,
    pub tail_bound: f64,
}

// Σ_{m=lo}^{hi} m^{-s} for 1 <= lo, with an integral bound for long ranges.
fn power_sum(lo: u128, hi: Option<u128>, s: f64) -> f64 {
    let lo_f = lo as f64;
    match hi {
        Some(hi) if hi < lo => 0.0,
        Some(hi) if hi - lo < 100_000 => (lo..=hi).map(|m| (m as f64).powf(-s)).sum(),
        _ => lo_f.powf(-s) + lo_f.powf(1.0 - s) / (s - 1.0),
    }
}

/// Bound on `sup_t |Σ_{|m| > M} ĝ(m) e(mt)|` for the cobounding series of a
/// function with the given tail profile.
///
/// Each band `q_k <= |m| < q_{k+1}` uses `‖mα‖ > 1/(2q_{k+1})`; inside a `Q♯`
/// band the non-multiples of `q_k` below `q_{k+1}/4` use `‖mα‖ > 1/(4q_k)`.
/// Frequencies past the last computed denominator are bounded as if every
/// later denominator were flat, `‖mα‖ > 1/(2|m|^B)`, and `|e(x) - 1| >= 4‖x‖`
/// throughout.
pub fn cobound_tail_bound(
    profile: &TailProfile,
    cf: &ContinuedFraction,
    cls: &DenominatorClassification,
    resonance: Resonance,
) -> Result<f64> {
    if profile.c == 0.0 {
        return Ok(0.0);
    }
    if !(profile.b > 1.0) {
        return Err(Error::InvalidArgument("tail profile needs B > 1".into()));
    }
    let s = 2.0 * profile.b;
    let first = profile.truncation.max(0) as u128 + 1;
    let k_last = cf.len();
    let mut total = 0.0;
    for k in 0..k_last {
        let (q, next) = (cf.q(k), cf.q(k + 1));
        let lo = q.max(first);
        if next == 0 || lo > next - 1 {
            continue;
        }
        let hi = next - 1;
        let sharp_band = k >= 1 && cls.is_sharp(k) && resonance == Resonance::Classified;
        if sharp_band {
            let split = next / 4;
            total += q as f64 * power_sum(lo, Some(hi.min(split)), s);
            total += next as f64 / 2.0 * power_sum(lo.max(split + 1), Some(hi), s);
        } else {
            total += next as f64 / 2.0 * power_sum(lo, Some(hi), s);
        }
    }
    let q_last = cf.q(k_last);
    let lo = q_last.max(first);
    if cf.is_terminated() {
        // α = l/q exactly: non-multiples of q stay 1/q away from the integers
        let resonant_last = cls.is_sharp(k_last) && resonance == Resonance::Classified;
        if !resonant_last && q_last > 1 {
            return Err(Error::SmallDivisor { m: q_last as i64, dist: 0.0, floor: SMALL_DIVISOR_FLOOR });
        }
        total += q_last as f64 / 4.0 * power_sum(lo, None, s);
    } else {
        total += 0.5 * power_sum(lo, None, profile.b);
    }
    Ok(2.0 * profile.c * total)
}

/// [`cobound`] at the expansion's own α together with its tail bound.
pub fn cobound_with_tail(
    f: &FourierSeries,
    cf: &ContinuedFraction,
    cls: &DenominatorClassification,
    profile: &TailProfile,
    resonance: Resonance,
) -> Result<Cobound> {
    let g = cobound(f, &cf.alpha(), SMALL_DIVISOR_FLOOR)?;
    let tail_bound = cobound_tail_bound(profile, cf, cls, resonance)?;
    Ok(Cobound { g, tail_bound })
}

/// `Σ_{l<n} f(t + lα)` by direct compensated accumulation.
pub fn birkhoff_complex(f: &FourierSeries, alpha: &Alpha, t: f64, n: u64) -> Complex64 {
    let acc: CompensatedComplex = (0..n as i64).map(|l| f.eval(alpha.rotate(t, l))).collect();
    acc.value()
}

/// Real `n`-term ergodic sum of a real-valued series.
pub fn birkhoff(f: &FourierSeries, alpha: &Alpha, t: f64, n: u64) -> f64 {
    birkhoff_complex(f, alpha, t, n).re
}

#[derive(Debug, Clone)]
enum ModeSum {
    // e(mα) - 1 bounded away from zero
    Geometric { ratio_minus_one: Complex64 },
    // e(mα) = 1 exactly
    Constant,
    Direct,
}

/// Precomputed per-frequency data for `O(support)` Birkhoff sums.
#[derive(Debug, Clone)]
pub struct BirkhoffCache {
    series: FourierSeries,
    alpha: Alpha,
    modes: Vec<(i64, Complex64, ModeSum)>,
}

impl BirkhoffCache {
    pub fn new(series: &FourierSeries, alpha: &Alpha) -> Self {
        let modes = series
            .iter()
            .map(|(m, c)| {
                let kind = if m == 0 || (alpha.exact_ratio().is_some() && alpha.frac_mul(m) == 0.0) {
                    ModeSum::Constant
                } else if alpha.dist_to_int(m) >= GEOMETRIC_FLOOR {
                    ModeSum::Geometric { ratio_minus_one: e(alpha.frac_mul(m)) - 1.0 }
                } else {
                    ModeSum::Direct
                };
                (m, c, kind)
            })
            .collect();
        BirkhoffCache { series: series.clone(), alpha: *alpha, modes }
    }

    pub fn series(&self) -> &FourierSeries {
        &self.series
    }

    /// `Σ_{l<n} f(t + lα)`.
    pub fn query_complex(&self, n: u64, t: f64) -> Complex64 {
        let n = n as i64;
        let mut acc = CompensatedComplex::new();
        for (m, c, kind) in &self.modes {
            let base = c * e_freq(*m, t);
            let v = match kind {
                ModeSum::Constant => base * n as f64,
                ModeSum::Geometric { ratio_minus_one } => {
                    let mn = m.checked_mul(n).expect("frequency times length overflows i64");
                    base * (e(self.alpha.frac_mul(mn)) - 1.0) / ratio_minus_one
                }
                ModeSum::Direct => {
                    let s: CompensatedComplex =
                        (0..n).map(|l| e(self.alpha.frac_mul(m * l))).collect();
                    base * s.value()
                }
            };
            acc.add(v);
        }
        acc.value()
    }

    pub fn query(&self, n: u64, t: f64) -> f64 {
        self.query_complex(n, t).re
    }
}

/// `sup_t |Φ_{q_k}(t) - q_k f̂(0)|` over the grid, `Φ` the Birkhoff sum of the resonant part.
pub fn phi_bound_check(
    f: &FourierSeries,
    cf: &ContinuedFraction,
    cls: &DenominatorClassification,
    k_index: usize,
    t_grid: &[f64],
) -> Result<f64> {
    if !cls.is_sharp(k_index) {
        return Err(Error::InvalidArgument(format!("q_{k_index} is not in the sharp class")));
    }
    let (resonant, _) = decompose(f, cls, cf)?;
    let q = cf.q(k_index);
    let q_n = u64::try_from(q).map_err(|_| Error::Overflow("sum length"))?;
    let alpha = cf.alpha();
    let target = f.mean() * q as f64;
    Ok(t_grid
        .par_iter()
        .map(|&t| (birkhoff_complex(&resonant, &alpha, t, q_n) - target).norm())
        .reduce(|| 0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{classify, ContinuedFraction};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(FourierSeries::constant(1.0).eval_real(0.37), 1.0);
        let cos = FourierSeries::cos(1, 1.0, 0.0);
        assert!((cos.eval_real(0.0) - 1.0).abs() < 1e-15);
        assert!(cos.eval_real(0.25).abs() < 1e-15);
        let sin = FourierSeries::sin(1, 1.0);
        assert!((sin.eval_real(0.25) - 1.0).abs() < 1e-15);
        assert!((cos.eval_real(1.3) - cos.eval_real(0.3)).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian_real_series() {
        assert!(FourierSeries::from_coeffs([(1, c(1.0, 0.0))], true).is_err());
        assert!(FourierSeries::from_coeffs([(1, c(0.0, 1.0)), (-1, c(0.0, -1.0))], true).is_ok());
    }

    #[test]
    fn square_of_cos() {
        let sq = FourierSeries::cos(1, 1.0, 0.0).square();
        assert_eq!(sq.coeff(0), c(0.5, 0.0));
        assert_eq!(sq.coeff(2), c(0.25, 0.0));
        assert_eq!(sq.coeff(-2), c(0.25, 0.0));
        assert_eq!(sq.len(), 3);
        assert_eq!(FourierSeries::constant(3.0).square().coeff(0), c(9.0, 0.0));
    }

    #[test]
    fn presets_parse() {
        let spec: FunctionSpec = serde_json::from_str("\"cos\"").unwrap();
        assert_eq!(spec.to_series().unwrap(), FourierSeries::cos(1, 1.0, 0.0));
        let spec: FunctionSpec =
            serde_json::from_str(r#"{"real": true, "coeffs": [[2, 0.5, 0.0], [-2, 0.5, 0.0]]}"#).unwrap();
        assert_eq!(spec.to_series().unwrap(), FourierSeries::cos(2, 1.0, 0.0));
        let spec: FunctionSpec = serde_json::from_str("\"tan\"").unwrap();
        assert!(spec.to_series().is_err());
    }

    #[test]
    fn decompose_examples() {
        let golden = ContinuedFraction::from_partial_quotients(&[1; 20], false).unwrap();
        let cls = classify(&golden, 3.0).unwrap();
        let f = FourierSeries::cos(1, 1.0, 0.0).add(&FourierSeries::constant(0.7));
        let (f1, f2) = decompose(&f, &cls, &golden).unwrap();
        assert_eq!(f1, FourierSeries::constant(0.7));
        assert_eq!(f2, FourierSeries::cos(1, 1.0, 0.0));

        let cf = ContinuedFraction::from_partial_quotients(&[2, 50, 1, 1], false).unwrap();
        let cls = classify(&cf, 3.0).unwrap();
        let f = FourierSeries::constant(1.0)
            .add(&FourierSeries::cos(2, 1.0, 0.0))
            .add(&FourierSeries::cos(3, 1.0, 0.0));
        let (f1, f2) = decompose(&f, &cls, &cf).unwrap();
        assert_eq!(f1.support().collect::<Vec<_>>(), vec![-2, 0, 2]);
        assert_eq!(f2.support().collect::<Vec<_>>(), vec![-3, 3]);
    }

    #[test]
    fn cobound_examples() {
        let alpha = Alpha::from_f64((5f64.sqrt() - 1.0) / 2.0);
        let g = cobound(&FourierSeries::mode(1, c(1.0, 0.0)), &alpha, SMALL_DIVISOR_FLOOR).unwrap();
        let expected = 1.0 / (2.0 * (std::f64::consts::PI * alpha.value()).sin());
        assert!((g.coeff(1).norm() - expected).abs() < 1e-14);
        for &t in &[0.0, 0.3, 0.77] {
            let lhs = g.eval(alpha.rotate(t, 1)) - g.eval(t);
            assert!((lhs - e(t)).norm() < 1e-14);
        }
        assert!(cobound(&FourierSeries::zero(), &alpha, SMALL_DIVISOR_FLOOR).unwrap().is_empty());
        assert!(cobound(&FourierSeries::constant(1.0), &alpha, SMALL_DIVISOR_FLOOR).is_err());
    }

    #[test]
    fn small_divisor_is_refused() {
        let alpha = Alpha::from_ratio(1, 3).unwrap();
        let r = cobound(&FourierSeries::cos(3, 1.0, 0.0), &alpha, SMALL_DIVISOR_FLOOR);
        assert!(matches!(r, Err(Error::SmallDivisor { m: -3, .. })));
    }

    #[test]
    fn tail_bound_vanishes_for_zero_profile_and_decreases_with_cutoff() {
        let golden = ContinuedFraction::from_partial_quotients(&[1; 40], false).unwrap();
        let cls = classify(&golden, 3.0).unwrap();
        let zero = TailProfile { c: 0.0, b: 3.0, truncation: 64 };
        assert_eq!(cobound_tail_bound(&zero, &golden, &cls, Resonance::Classified).unwrap(), 0.0);
        let mut last = f64::INFINITY;
        for cutoff in [8, 16, 64, 256, 4096] {
            let p = TailProfile { c: 1.0, b: 3.0, truncation: cutoff };
            let tb = cobound_tail_bound(&p, &golden, &cls, Resonance::Classified).unwrap();
            assert!(tb > 0.0 && tb < last);
            last = tb;
        }
    }

    #[test]
    fn tail_bound_dominates_a_long_explicit_tail() {
        // synthetic coefficients |m|^{-6} on 65..=20000 against golden α
        let golden = ContinuedFraction::from_partial_quotients(&[1; 40], false).unwrap();
        let cls = classify(&golden, 3.0).unwrap();
        let alpha = golden.alpha();
        let explicit: f64 = (65..=20_000i64)
            .map(|m| 2.0 * (m as f64).powi(-6) / (e(alpha.frac_mul(m)) - 1.0).norm())
            .sum();
        let p = TailProfile { c: 1.0, b: 3.0, truncation: 64 };
        let tb = cobound_tail_bound(&p, &golden, &cls, Resonance::Classified).unwrap();
        assert!(explicit <= tb, "{explicit} > {tb}");
    }

    #[test]
    fn birkhoff_examples() {
        let alpha = Alpha::from_ratio(1, 2).unwrap();
        assert!((birkhoff(&FourierSeries::constant(2.5), &alpha, 0.1, 4) - 10.0).abs() < 1e-15);
        assert!(birkhoff(&FourierSeries::cos(1, 1.0, 0.0), &alpha, 0.0, 2).abs() < 1e-15);
        assert_eq!(birkhoff(&FourierSeries::cos(1, 1.0, 0.0), &alpha, 0.3, 0), 0.0);
    }

    #[test]
    fn cache_matches_direct_loop() {
        let golden = Alpha::from_f64((5f64.sqrt() - 1.0) / 2.0);
        let f = FourierSeries::cos(1, 1.0, 0.2)
            .add(&FourierSeries::cos(3, 0.5, 1.0))
            .add(&FourierSeries::constant(0.1));
        let cache = BirkhoffCache::new(&f, &golden);
        for &n in &[0u64, 1, 7, 100, 5000] {
            for &t in &[0.0, 0.41, 0.93] {
                let direct = birkhoff_complex(&f, &golden, t, n);
                assert!((cache.query_complex(n, t) - direct).norm() < 1e-9, "n = {n}");
            }
        }
        let mode = FourierSeries::mode(5, c(1.0, 0.0));
        let cache = BirkhoffCache::new(&mode, &golden);
        let (n, t) = (321u64, 0.17);
        let closed = e(5.0 * t) * (e(golden.frac_mul(5 * n as i64)) - 1.0) / (e(golden.frac_mul(5)) - 1.0);
        assert!((cache.query_complex(n, t) - closed).norm() < 1e-12);
    }

    #[test]
    fn cache_handles_exact_resonance() {
        let alpha = Alpha::from_ratio(1, 4).unwrap();
        let f = FourierSeries::cos(4, 1.0, 0.0).add(&FourierSeries::cos(1, 1.0, 0.0));
        let cache = BirkhoffCache::new(&f, &alpha);
        for &n in &[3u64, 8, 13] {
            assert!((cache.query(n, 0.1) - birkhoff(&f, &alpha, 0.1, n)).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_bound_check_constant_and_periodic() {
        let cf = crate::arith::liouville_alpha(3.0, 2).unwrap();
        let cls = classify(&cf, 3.0).unwrap();
        let k = cls.first_sharp().unwrap();
        let grid: Vec<f64> = (0..32).map(|i| i as f64 / 32.0).collect();
        assert_eq!(phi_bound_check(&FourierSeries::constant(0.4), &cf, &cls, k, &grid).unwrap(), 0.0);
        let f = FourierSeries::cos(2, 1.0, 0.3);
        let a = phi_bound_check(&f, &cf, &cls, k, &grid).unwrap();
        let shifted: Vec<f64> = grid.iter().map(|t| t + 1.0).collect();
        let b = phi_bound_check(&f, &cf, &cls, k, &shifted).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
