//! Skew products over a circle rotation with Heisenberg fibers, their closed-form
//! orbits and torus factors, and the conjugation to the resonant form.

use rayon::prelude::*;

use crate::arith::{Alpha, ContinuedFraction, DenominatorClassification};
use crate::compensated::Compensated;
use crate::error::{Error, Result};
use crate::fourier::{
    cobound_with_tail, decompose, split_mean, BirkhoffCache, FourierSeries, Resonance, TailProfile,
};
use crate::heisenberg::{circle_dist, d_prod, HeisElement, NilPoint, ProductPoint};

/// The fiber increment as a function of the base point `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cocycle {
    /// `(φ(t), φ(t), ψ(t))`.
    Skew { phi: FourierSeries, psi: FourierSeries },
    /// `(φ₁(t), φ₂(t), ψ(t))`.
    General { phi1: FourierSeries, phi2: FourierSeries, psi: FourierSeries },
    /// `(φ₁(t), φ₁(t), ½φ₁(t)² - ½η₁(t) + ψ₁(t))`.
    Resonant { phi1: FourierSeries, eta1: FourierSeries, psi1: FourierSeries },
}

/// `(t, Γg) ↦ (t + α, Γ g · c(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub alpha: Alpha,
    pub cocycle: Cocycle,
}

fn require_zero_mean(f: &FourierSeries, name: &str) -> Result<()> {
    if f.mean().norm() > 1e-12 {
        return Err(Error::InvalidArgument(format!("{name} must have zero mean, got {}", f.mean())));
    }
    Ok(())
}

fn require_real(f: &FourierSeries, name: &str) -> Result<()> {
    if !f.is_real_valued() {
        return Err(Error::InvalidArgument(format!("{name} must be real-valued")));
    }
    Ok(())
}

impl Flow {
    /// The skew product `T`; `φ` must have zero mean.
    pub fn skew(alpha: Alpha, phi: FourierSeries, psi: FourierSeries) -> Result<Self> {
        require_real(&phi, "phi")?;
        require_real(&psi, "psi")?;
        require_zero_mean(&phi, "phi")?;
        Ok(Flow { alpha, cocycle: Cocycle::Skew { phi, psi } })
    }

    /// The general skew product `S` with independent `x` and `y` increments.
    pub fn general(alpha: Alpha, phi1: FourierSeries, phi2: FourierSeries, psi: FourierSeries) -> Result<Self> {
        for (f, name) in [(&phi1, "phi1"), (&phi2, "phi2"), (&psi, "psi")] {
            require_real(f, name)?;
        }
        Ok(Flow { alpha, cocycle: Cocycle::General { phi1, phi2, psi } })
    }

    pub fn resonant(alpha: Alpha, phi1: FourierSeries, eta1: FourierSeries, psi1: FourierSeries) -> Result<Self> {
        for (f, name) in [(&phi1, "phi1"), (&eta1, "eta1"), (&psi1, "psi1")] {
            require_real(f, name)?;
        }
        Ok(Flow { alpha, cocycle: Cocycle::Resonant { phi1, eta1, psi1 } })
    }

    /// Pure rotation with trivial fiber motion.
    pub fn rotation(alpha: Alpha) -> Self {
        Flow {
            alpha,
            cocycle: Cocycle::Skew { phi: FourierSeries::zero(), psi: FourierSeries::zero() },
        }
    }

    pub fn increment(&self, t: f64) -> HeisElement {
        match &self.cocycle {
            Cocycle::Skew { phi, psi } => {
                let p = phi.eval_real(t);
                HeisElement::new(p, p, psi.eval_real(t))
            }
            Cocycle::General { phi1, phi2, psi } => {
                HeisElement::new(phi1.eval_real(t), phi2.eval_real(t), psi.eval_real(t))
            }
            Cocycle::Resonant { phi1, eta1, psi1 } => {
                let p = phi1.eval_real(t);
                HeisElement::new(p, p, 0.5 * p * p - 0.5 * eta1.eval_real(t) + psi1.eval_real(t))
            }
        }
    }

    pub fn step(&self, p: &ProductPoint) -> ProductPoint {
        ProductPoint::new(self.alpha.rotate(p.t, 1), p.p.translate(&self.increment(p.t)))
    }

    /// `Tⁿ(p)` by `n` successive steps, base coordinate recomputed as `t₀ + nα`.
    pub fn iterate(&self, p: &ProductPoint, n: u64) -> ProductPoint {
        self.orbit(p).nth(n as usize).expect("orbit is infinite")
    }

    /// `P, T(P), T²(P), …`.
    pub fn orbit(&self, start: &ProductPoint) -> Orbit<'_> {
        Orbit { flow: self, t0: start.t, n: 0, fiber: start.p }
    }

    /// The increments `(x, y, ψ-like)` as three series when `x` and `y` share one series.
    fn diagonal_parts(&self) -> Result<(FourierSeries, FourierSeries, FourierSeries)> {
        match &self.cocycle {
            Cocycle::Skew { phi, psi } => Ok((phi.clone(), phi.square(), psi.clone())),
            Cocycle::Resonant { phi1, eta1, psi1 } => {
                // the center entry ½φ₁² - ½η₁ + ψ₁ plays the role of ψ
                let center = phi1.square().scale(0.5).sub(&eta1.scale(0.5)).add(psi1);
                Ok((phi1.clone(), phi1.square(), center))
            }
            Cocycle::General { .. } => Err(Error::InvalidArgument(
                "closed-form orbits need equal x and y increments".into(),
            )),
        }
    }

    fn assemble(&self, start: &ProductPoint, n: u64, sums: OrbitSums) -> ProductPoint {
        let OrbitSums { s1, s2, s3 } = sums;
        let g = HeisElement::new(s1, s1, 0.5 * s1 * s1 - 0.5 * s3 + s2);
        ProductPoint::new(self.alpha.rotate(start.t, n as i64), start.p.translate(&g))
    }

    /// `Tⁿ(P)` from the sums `S₁, S₂, S₃` accumulated directly, without group products.
    pub fn orbit_closed_form(&self, start: &ProductPoint, n: u64) -> Result<ProductPoint> {
        let (phi, _, psi) = self.diagonal_parts()?;
        let sums = OrbitSums::direct(&phi, &psi, &self.alpha, start.t, n);
        Ok(self.assemble(start, n, sums))
    }

    /// `Tⁿ(P)` from geometric-series Birkhoff sums of `φ`, `φ²` and `ψ`.
    pub fn orbit_closed_form_geometric(&self, start: &ProductPoint, n: u64) -> Result<ProductPoint> {
        let (phi, eta, psi) = self.diagonal_parts()?;
        let sums = OrbitSums {
            s1: BirkhoffCache::new(&phi, &self.alpha).query(n, start.t),
            s2: BirkhoffCache::new(&psi, &self.alpha).query(n, start.t),
            s3: BirkhoffCache::new(&eta, &self.alpha).query(n, start.t),
        };
        Ok(self.assemble(start, n, sums))
    }

    /// The torus map `(t, x, y) ↦ (t + α, x + φ₁(t), y + φ₂(t))` on the factor.
    pub fn torus3_step(&self, p: (f64, f64, f64)) -> (f64, f64, f64) {
        let (t, x, y) = p;
        let inc = self.increment(t);
        (self.alpha.rotate(t, 1), (x + inc.x).rem_euclid(1.0), (y + inc.y).rem_euclid(1.0))
    }
}

/// `S₁ = Σ φ(t_l)`, `S₂ = Σ ψ(t_l)`, `S₃ = Σ φ(t_l)²` over `l < n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSums {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl OrbitSums {
    pub fn direct(phi: &FourierSeries, psi: &FourierSeries, alpha: &Alpha, t0: f64, n: u64) -> Self {
        let (mut s1, mut s2, mut s3) = (Compensated::new(), Compensated::new(), Compensated::new());
        for l in 0..n as i64 {
            let t = alpha.rotate(t0, l);
            let p = phi.eval_real(t);
            s1.add(p);
            s2.add(psi.eval_real(t));
            s3.add(p * p);
        }
        OrbitSums { s1: s1.value(), s2: s2.value(), s3: s3.value() }
    }
}

/// Forward orbit of a flow; yields the starting point first.
#[derive(Debug, Clone)]
pub struct Orbit<'a> {
    flow: &'a Flow,
    t0: f64,
    n: i64,
    fiber: NilPoint,
}

impl Iterator for Orbit<'_> {
    type Item = ProductPoint;

    fn next(&mut self) -> Option<ProductPoint> {
        let t = self.flow.alpha.rotate(self.t0, self.n);
        let here = ProductPoint { t, p: self.fiber };
        self.fiber = self.fiber.translate(&self.flow.increment(t));
        self.n += 1;
        Some(here)
    }

    fn nth(&mut self, k: usize) -> Option<ProductPoint> {
        for _ in 0..k {
            self.next();
        }
        self.next()
    }
}

/// Projection `(t, Γ(x, y, z)) ↦ (t, x, y)` onto the 3-torus factor.
pub fn torus_factor(p: &ProductPoint) -> (f64, f64, f64) {
    (p.t, p.p.rep().x, p.p.rep().y)
}

/// The 2-torus skew product `(x, y) ↦ (x + α, y + h(x))`.
pub fn torus2_step(alpha: &Alpha, h: &FourierSeries, p: (f64, f64)) -> (f64, f64) {
    (alpha.rotate(p.0, 1), (p.1 + h.eval_real(p.0)).rem_euclid(1.0))
}

/// Distance on the 3-torus, max of the coordinate circle distances.
pub fn torus3_dist(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    circle_dist(a.0, b.0).max(circle_dist(a.1, b.1)).max(circle_dist(a.2, b.2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// The fiber map `(t, Γg) ↦ (t, Γ g · (g_φ, g_φ, ½g_φ² - ½g_η + g_ψ)(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjugator {
    pub g_phi: FourierSeries,
    pub g_eta: FourierSeries,
    pub g_psi: FourierSeries,
}

impl Conjugator {
    pub fn identity() -> Self {
        Conjugator {
            g_phi: FourierSeries::zero(),
            g_eta: FourierSeries::zero(),
            g_psi: FourierSeries::zero(),
        }
    }

    pub fn element(&self, t: f64) -> HeisElement {
        let a = self.g_phi.eval_real(t);
        HeisElement::new(a, a, 0.5 * a * a - 0.5 * self.g_eta.eval_real(t) + self.g_psi.eval_real(t))
    }

    pub fn apply(&self, p: &ProductPoint, direction: Direction) -> ProductPoint {
        let g = self.element(p.t);
        let g = match direction {
            Direction::Forward => g,
            Direction::Inverse => g.inv(),
        };
        ProductPoint { t: p.t, p: p.p.translate(&g) }
    }
}

/// The skew product `T`, its resonant form `T₁` and the conjugator between them.
#[derive(Debug, Clone)]
pub struct ConjugacySetup {
    pub t: Flow,
    pub t1: Flow,
    pub conjugator: Conjugator,
    /// Sum of the cobounding tail bounds for `g_φ`, `g_η`, `g_ψ`.
    pub tail_bound: f64,
}

impl ConjugacySetup {
    /// Decomposes `φ`, `η = φ²` and `ψ` and solves for the cobounding series.
    ///
    /// `truncation` is the cutoff the models of `φ` and `ψ` were truncated at;
    /// `η` is taken as truncated at twice that.
    pub fn new(
        cf: &ContinuedFraction,
        cls: &DenominatorClassification,
        phi: &FourierSeries,
        psi: &FourierSeries,
        truncation: i64,
        resonance: Resonance,
    ) -> Result<Self> {
        let alpha = cf.alpha();
        let t = Flow::skew(alpha, phi.clone(), psi.clone())?;
        let eta = phi.square();
        let split = |f: &FourierSeries| match resonance {
            Resonance::Classified => decompose(f, cls, cf),
            Resonance::MeanOnly => Ok(split_mean(f)),
        };
        let (phi1, phi2) = split(phi)?;
        let (eta1, eta2) = split(&eta)?;
        let (psi1, psi2) = split(psi)?;
        let b = cls.b;
        let solve = |f: &FourierSeries, cutoff: i64| {
            cobound_with_tail(f, cf, cls, &TailProfile::fit(f, b, cutoff), resonance)
        };
        let gp = solve(&phi2, truncation)?;
        let ge = solve(&eta2, 2 * truncation)?;
        let gs = solve(&psi2, truncation)?;
        Ok(ConjugacySetup {
            t,
            t1: Flow::resonant(alpha, phi1, eta1, psi1)?,
            conjugator: Conjugator { g_phi: gp.g, g_eta: ge.g, g_psi: gs.g },
            tail_bound: gp.tail_bound + ge.tail_bound + gs.tail_bound,
        })
    }
}

/// `sup_P d(S⁻¹ T S (P), T₁(P))` over the sample.
pub fn conjugacy_residual(
    t: &Flow,
    t1: &Flow,
    conjugator: &Conjugator,
    sample: &[ProductPoint],
    window: i64,
) -> f64 {
    sample
        .par_iter()
        .map(|p| {
            let lhs = conjugator.apply(&t.step(&conjugator.apply(p, Direction::Forward)), Direction::Inverse);
            d_prod(&lhs, &t1.step(p), window)
        })
        .reduce(|| 0.0, f64::max)
}
