//! Möbius-weighted orbit averages, Möbius exponential sums over progressions,
//! and the residue-class reduction for rational rotation numbers.

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::{frac_product, frac_product_wide, MobiusTable};
use crate::compensated::{Compensated, CompensatedComplex};
use crate::error::{Error, Result};
use crate::flows::{Cocycle, Flow, OrbitSums};
use crate::fourier::{e, FourierSeries};
use crate::heisenberg::{HeisElement, ProductPoint};
use crate::observables::ClassAObservable;

/// Sequence weighting the orbit sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Weights {
    #[default]
    Mobius,
    /// All weights 1, the control run.
    Ones,
}

/// `(1/n) Σ_{k<=n} w(k) f(T^k P₀)` at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationPoint {
    pub n: u64,
    pub average: Complex64Serde,
}

/// A complex number that serializes as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Complex64Serde(pub f64, pub f64);

impl From<Complex64> for Complex64Serde {
    fn from(c: Complex64) -> Self {
        Complex64Serde(c.re, c.im)
    }
}

impl CorrelationPoint {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.average.0, self.average.1)
    }
}

fn validate_checkpoints(checkpoints: &[u64], n: u64) -> Result<()> {
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be sorted".into()));
    }
    if let Some(&c) = checkpoints.iter().find(|&&c| c == 0 || c > n) {
        return Err(Error::InvalidArgument(format!("checkpoint {c} is outside [1, {n}]")));
    }
    Ok(())
}

/// Streams the orbit of `start` once, reporting the running average at each checkpoint.
pub fn mobius_correlation<F>(
    flow: &Flow,
    obs: F,
    start: &ProductPoint,
    n: u64,
    checkpoints: &[u64],
    table: &MobiusTable,
    weights: Weights,
) -> Result<Vec<CorrelationPoint>>
where
    F: Fn(&ProductPoint) -> Complex64,
{
    validate_checkpoints(checkpoints, n)?;
    if weights == Weights::Mobius {
        table.require(n)?;
    }
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = CompensatedComplex::new();
    let mut next = checkpoints.iter().peekable();
    for (k, p) in flow.orbit(start).enumerate().skip(1).take(n as usize) {
        let k = k as u64;
        let w = match weights {
            Weights::Mobius => table.mu(k),
            Weights::Ones => 1,
        };
        if w != 0 {
            acc.add(obs(&p) * w as f64);
        }
        while next.peek().is_some_and(|&&c| c == k) {
            next.next();
            out.push(CorrelationPoint { n: k, average: (acc.value() / k as f64).into() });
        }
    }
    Ok(out)
}

/// `Σ_{n<=N, n ≡ a (mod q)} μ(n) e(f(n))` with `f(x) = Σ_i poly[i] xⁱ`.
pub fn mu_exponential_sum(poly: &[f64], a: u64, q: u64, n_max: u64, table: &MobiusTable) -> Result<Complex64> {
    if q == 0 || a >= q {
        return Err(Error::InvalidArgument(format!("need 0 <= a < q, got a = {a}, q = {q}")));
    }
    if n_max == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    table.require(n_max)?;
    let first = if a == 0 { q } else { a };
    let mut acc = CompensatedComplex::new();
    let mut n = first;
    while n <= n_max {
        let mu = table.mu(n);
        if mu != 0 {
            acc.add(e(poly_phase(poly, n)) * mu as f64);
        }
        n += q;
    }
    Ok(acc.value())
}

/// `f(n) mod 1`, each monomial reduced separately from its exact integer power.
pub fn poly_phase(poly: &[f64], n: u64) -> f64 {
    let mut phase = 0.0;
    let mut power: Option<u128> = Some(1);
    for &c in poly {
        let p = power.expect("polynomial degree too high for exact powers");
        if c != 0.0 {
            phase += frac_product_wide(c, p);
        }
        power = p.checked_mul(n as u128).filter(|&v| v < 1u128 << 104);
    }
    phase - phase.floor()
}

/// `(1/N) Σ μ(n)` and `(1/N) Σ μ(n)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlStats {
    pub n: u64,
    pub mertens_ratio: f64,
    pub squarefree_density: f64,
}

pub fn control_stats(table: &MobiusTable, n: u64) -> Result<ControlStats> {
    if n == 0 {
        return Err(Error::InvalidArgument("control statistics need N >= 1".into()));
    }
    Ok(ControlStats {
        n,
        mertens_ratio: table.mertens(n)? as f64 / n as f64,
        squarefree_density: table.squarefree_count(n)? as f64 / n as f64,
    })
}

/// `γ(h, b) = Σ_{l<b} h(t₀ + lα)`.
fn gamma_partial(h: &FourierSeries, flow: &Flow, t0: f64, b: u64) -> f64 {
    (0..b as i64).map(|l| h.eval_real(flow.alpha.rotate(t0, l))).collect::<Compensated>().value()
}

/// Residue-class structure of a class-A correlation when `α = a/q`.
///
/// For `n ≡ b (mod q)` each S-sum is `Sᵢ(n) = uᵢ n + vᵢ(b)` with `uᵢ = γ(hᵢ)`, so
/// the observable along the orbit is `e(P(n; b)) W(n)` with `P` quadratic in
/// `n` and `W` the theta factor evaluated at the unreduced orbit element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RationalReduction {
    pub a: i64,
    pub q: i64,
    pub gamma_phi: f64,
    pub gamma_psi: f64,
    pub gamma_phi2: f64,
    /// `γ(φ, b), γ(ψ, b), γ(φ², b)` for `b < q`.
    pub partial: Vec<[f64; 3]>,
    /// `[c₀, c₁, c₂]` of `P(n; b) = c₀ + c₁ n + c₂ n²`, one per residue `b`.
    pub polys: Vec<[f64; 3]>,
    /// `max |Sᵢ(n) - (n - b)γ(hᵢ) - γ(hᵢ, b)|` over the checked range.
    pub s_sum_error: f64,
    /// `max |e(P(n; b)) W(n) - f(Tⁿ P₀)|` over the checked range.
    pub phase_error: f64,
    pub n_checked: u64,
    #[serde(skip)]
    start: ProductPoint,
    #[serde(skip)]
    obs: ClassAObservable,
}

impl RationalReduction {
    /// Builds the per-residue polynomials and checks them for `1 <= n <= n_check`.
    pub fn new(flow: &Flow, obs: &ClassAObservable, start: &ProductPoint, n_check: u64) -> Result<Self> {
        let (a, q) = flow
            .alpha
            .exact_ratio()
            .ok_or_else(|| Error::InvalidArgument("residue reduction needs a rational alpha".into()))?;
        let (phi, psi) = match &flow.cocycle {
            Cocycle::Skew { phi, psi } => (phi, psi),
            _ => return Err(Error::InvalidArgument("residue reduction is defined for the skew product T".into())),
        };
        if obs.theta.is_some_and(|th| th.starred) {
            return Err(Error::InvalidArgument("residue reduction uses the unstarred theta functions".into()));
        }
        let phi2 = phi.square();
        let t0 = start.t;
        let qu = q as u64;
        let partial: Vec<[f64; 3]> = (0..qu)
            .map(|b| {
                [
                    gamma_partial(phi, flow, t0, b),
                    gamma_partial(psi, flow, t0, b),
                    gamma_partial(&phi2, flow, t0, b),
                ]
            })
            .collect();
        let gamma = |h: &FourierSeries| gamma_partial(h, flow, t0, qu) / q as f64;
        let (u1, u2, u3) = (gamma(phi), gamma(psi), gamma(&phi2));
        let r = start.p.rep();
        let (m, j) = obs.theta.map_or((0.0, 0.0), |th| (th.m as f64, th.j as f64));
        let [xi1, xi2, xi3] = obs.xi.map(|v| v as f64);
        let alpha = a as f64 / q as f64;
        // phase = ξ₁(t₀ + nα) + (ξ₂ + j) x_n + ξ₃ y_n + m z_n with
        // x_n = x₀ + S₁, y_n = y₀ + S₁, z_n = z₀ + ½S₁² - ½S₃ + S₂ + y₀S₁
        let lin = xi2 + j + xi3 + m * r.y;
        let polys = partial
            .iter()
            .enumerate()
            .map(|(b, p)| {
                let bf = b as f64;
                let (v1, v2, v3) = (p[0] - bf * u1, p[1] - bf * u2, p[2] - bf * u3);
                let c0 = xi1 * t0 + (xi2 + j) * r.x + xi3 * r.y + m * r.z
                    + lin * v1
                    + m * (0.5 * v1 * v1 - 0.5 * v3 + v2);
                let c1 = xi1 * alpha + lin * u1 + m * (u1 * v1 - 0.5 * u3 + u2);
                let c2 = 0.5 * m * u1 * u1;
                [c0, c1, c2]
            })
            .collect();
        let mut red = RationalReduction {
            a,
            q,
            gamma_phi: u1,
            gamma_psi: u2,
            gamma_phi2: u3,
            partial,
            polys,
            s_sum_error: 0.0,
            phase_error: 0.0,
            n_checked: n_check,
            start: *start,
            obs: *obs,
        };
        let mut s_err: f64 = 0.0;
        let mut p_err: f64 = 0.0;
        let mut direct = OrbitSumsStream::new(phi, psi, flow, t0);
        for (n, p) in flow.orbit(start).enumerate().skip(1).take(n_check as usize) {
            let n = n as u64;
            let sums = direct.advance_to(n);
            let pred = red.s_sums(n);
            s_err = s_err.max((sums.s1 - pred.s1).abs()).max((sums.s2 - pred.s2).abs()).max((sums.s3 - pred.s3).abs());
            p_err = p_err.max((red.term(n) - obs.eval(&p)).norm());
        }
        red.s_sum_error = s_err;
        red.phase_error = p_err;
        Ok(red)
    }

    /// `Sᵢ(n) = (n - b)γ(hᵢ) + γ(hᵢ, b)` for `n ≡ b (mod q)`.
    pub fn s_sums(&self, n: u64) -> OrbitSums {
        let q = self.q as u64;
        let b = (n % q) as usize;
        let k = (n - b as u64) as f64;
        let p = self.partial[b];
        OrbitSums {
            s1: k * self.gamma_phi + p[0],
            s2: k * self.gamma_psi + p[1],
            s3: k * self.gamma_phi2 + p[2],
        }
    }

    /// `P(n; b) mod 1` for the residue of `n`.
    pub fn phase(&self, n: u64) -> f64 {
        let [c0, c1, c2] = self.polys[(n % self.q as u64) as usize];
        let nf = n as f64;
        let v = c0 + frac_product(c1, nf) + frac_product(c2, nf * nf);
        v - v.floor()
    }

    /// The theta factor `W(n)` at the unreduced orbit element.
    pub fn theta_factor(&self, n: u64) -> Complex64 {
        let Some(th) = self.obs.theta else {
            return Complex64::new(1.0, 0.0);
        };
        let s1 = self.s_sums(n).s1;
        let r = self.start.p.rep();
        // the theta sum depends on x and y only
        th.theta_sum(&HeisElement::new(r.x + s1, r.y + s1, 0.0))
    }

    /// `e(P(n; b)) W(n)`, the observable at `Tⁿ(P₀)` rebuilt from its residue class.
    pub fn term(&self, n: u64) -> Complex64 {
        let v = e(self.phase(n)) * self.theta_factor(n);
        if self.obs.conjugated {
            v.conj()
        } else {
            v
        }
    }

    /// `(1/N) Σ_b Σ_{n<=N, n≡b} μ(n) e(P(n; b)) W(n)`, residue class by residue class.
    pub fn reassembled_average(&self, table: &MobiusTable, n_max: u64) -> Result<Complex64> {
        table.require(n_max)?;
        let q = self.q as u64;
        let mut total = CompensatedComplex::new();
        for b in 0..q {
            let mut class = CompensatedComplex::new();
            let mut n = if b == 0 { q } else { b };
            while n <= n_max {
                let mu = table.mu(n);
                if mu != 0 {
                    class.add(self.term(n) * mu as f64);
                }
                n += q;
            }
            total.add(class.value());
        }
        Ok(total.value() / n_max as f64)
    }
}

// Running S-sums along the base orbit.
struct OrbitSumsStream<'a> {
    phi: &'a FourierSeries,
    psi: &'a FourierSeries,
    flow: &'a Flow,
    t0: f64,
    n: u64,
    s: [Compensated; 3],
}

impl<'a> OrbitSumsStream<'a> {
    fn new(phi: &'a FourierSeries, psi: &'a FourierSeries, flow: &'a Flow, t0: f64) -> Self {
        OrbitSumsStream { phi, psi, flow, t0, n: 0, s: [Compensated::new(); 3] }
    }

    fn advance_to(&mut self, n: u64) -> OrbitSums {
        while self.n < n {
            let t = self.flow.alpha.rotate(self.t0, self.n as i64);
            let p = self.phi.eval_real(t);
            self.s[0].add(p);
            self.s[1].add(self.psi.eval_real(t));
            self.s[2].add(p * p);
            self.n += 1;
        }
        OrbitSums { s1: self.s[0].value(), s2: self.s[1].value(), s3: self.s[2].value() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::Alpha;
    use crate::observables::ThetaObservable;

    fn table() -> MobiusTable {
        MobiusTable::new(20_000).unwrap()
    }

    #[test]
    fn constant_observable() {
        let flow = Flow::rotation(Alpha::from_ratio(1, 3).unwrap());
        let start = ProductPoint::from_coords(0.1, 0.0, 0.0, 0.0);
        let one = |_: &ProductPoint| Complex64::new(1.0, 0.0);
        let out = mobius_correlation(&flow, one, &start, 10, &[10], &table(), Weights::Mobius).unwrap();
        assert!((out[0].value() - Complex64::new(-0.1, 0.0)).norm() < 1e-15);
        let out = mobius_correlation(&flow, one, &start, 10, &[5, 10], &table(), Weights::Ones).unwrap();
        assert_eq!(out[1].value(), Complex64::new(1.0, 0.0));
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn checkpoint_validation() {
        let flow = Flow::rotation(Alpha::from_ratio(1, 3).unwrap());
        let start = ProductPoint::from_coords(0.0, 0.0, 0.0, 0.0);
        let one = |_: &ProductPoint| Complex64::new(1.0, 0.0);
        assert!(mobius_correlation(&flow, one, &start, 10, &[5, 3], &table(), Weights::Mobius).is_err());
        assert!(mobius_correlation(&flow, one, &start, 10, &[11], &table(), Weights::Mobius).is_err());
        let small = MobiusTable::new(5).unwrap();
        assert!(matches!(
            mobius_correlation(&flow, one, &start, 10, &[10], &small, Weights::Mobius),
            Err(Error::SieveTooSmall { .. })
        ));
    }

    #[test]
    fn exponential_sum_examples() {
        let t = table();
        assert!((mu_exponential_sum(&[], 0, 1, 10, &t).unwrap() - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let s = mu_exponential_sum(&[0.0, 0.5], 1, 2, 10, &t).unwrap();
        assert!((s - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert_eq!(mu_exponential_sum(&[0.3], 0, 1, 0, &t).unwrap(), Complex64::new(0.0, 0.0));
        assert!(mu_exponential_sum(&[0.3], 3, 3, 10, &t).is_err());
    }

    #[test]
    fn linear_phase_matches_rotation_correlation() {
        let alpha = Alpha::from_f64((5f64.sqrt() - 1.0) / 2.0);
        let flow = Flow::rotation(alpha);
        let obs = ClassAObservable { xi: [1, 0, 0], theta: None, conjugated: false };
        let t0 = 0.0;
        let start = ProductPoint::from_coords(t0, 0.0, 0.0, 0.0);
        let n = 5000;
        let out = mobius_correlation(&flow, |p| obs.eval(p), &start, n, &[n], &table(), Weights::Mobius).unwrap();
        let sum = mu_exponential_sum(&[t0, alpha.value()], 0, 1, n, &table()).unwrap();
        assert!((out[0].value() - sum / n as f64).norm() < 1e-12);
    }

    #[test]
    fn control_examples() {
        let t = table();
        let c = control_stats(&t, 10).unwrap();
        assert!((c.mertens_ratio + 0.1).abs() < 1e-15);
        assert!((c.squarefree_density - 0.7).abs() < 1e-15);
        let c = control_stats(&t, 1).unwrap();
        assert_eq!((c.mertens_ratio, c.squarefree_density), (1.0, 1.0));
    }

    #[test]
    fn half_alpha_cos_has_zero_mean() {
        let flow = Flow::skew(Alpha::from_ratio(1, 2).unwrap(), FourierSeries::cos(1, 1.0, 0.0), FourierSeries::zero())
            .unwrap();
        let start = ProductPoint::from_coords(0.17, 0.0, 0.0, 0.0);
        let red = RationalReduction::new(&flow, &ClassAObservable::preset_fa(), &start, 200).unwrap();
        assert!(red.gamma_phi.abs() < 1e-15);
        assert!(red.polys.iter().all(|p| p[2].abs() < 1e-25));
    }

    #[test]
    fn residue_reduction_reproduces_orbit() {
        let phi = FourierSeries::cos(1, 0.4, 0.3).add(&FourierSeries::cos(2, 0.2, 1.0));
        let psi = FourierSeries::constant(0.3).add(&FourierSeries::sin(1, 0.25));
        let flow = Flow::skew(Alpha::from_ratio(2, 5).unwrap(), phi, psi).unwrap();
        let start = ProductPoint::from_coords(0.31, 0.42, 0.77, 0.18);
        let obs = ClassAObservable { xi: [1, 2, -1], theta: Some(ThetaObservable::psi(2, 1)), conjugated: false };
        let red = RationalReduction::new(&flow, &obs, &start, 1000).unwrap();
        assert!(red.s_sum_error < 1e-10, "{}", red.s_sum_error);
        assert!(red.phase_error < 1e-9, "{}", red.phase_error);
        let n = 3000;
        let streamed = mobius_correlation(&flow, |p| obs.eval(p), &start, n, &[n], &table(), Weights::Mobius).unwrap();
        let rebuilt = red.reassembled_average(&table(), n).unwrap();
        assert!((streamed[0].value() - rebuilt).norm() < 1e-10);
    }

    #[test]
    fn rational_reduction_rejects_irrational_alpha() {
        let flow = Flow::rotation(Alpha::from_f64(0.3));
        let start = ProductPoint::from_coords(0.0, 0.0, 0.0, 0.0);
        assert!(RationalReduction::new(&flow, &ClassAObservable::preset_fa(), &start, 10).is_err());
    }

    #[test]
    fn poly_phase_is_exact_for_dyadic_coefficients() {
        let c = [0.25, 0.5, 0.125];
        for n in [1u64, 7, 1_000_003] {
            let nf = n as f64;
            let expected = (0.25 + 0.5 * nf + 0.125 * nf * nf).rem_euclid(1.0);
            assert_eq!(poly_phase(&c, n), expected);
        }
    }
}
