//! Theta-type functions on the nilmanifold, class-A and class-B observables on
//! the product space, and the projection onto a central character.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::frac_product;
use crate::error::{Error, Result};
use crate::fourier::{e, FourierSeries, FunctionSpec};
use crate::heisenberg::{HeisElement, NilPoint, ProductPoint};

pub const DEFAULT_K_TRUNC: u32 = 12;

/// `ψ_{mj}(x, y, z) = e(mz + jx) Σ_k exp(-π(y + k + j/m)²) e(mkx)`, or the starred variant
/// `ψ*_{mj} = i e(mz + jx) Σ_k exp(-π(y + k + j/m + ½)²) e(½(y + k + j/m) + mkx)`.
///
/// The `k`-sum runs over `2K + 1` terms centred on the Gaussian peak, so any
/// coset representative gives the same value up to the reported tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaObservable {
    pub m: i64,
    pub j: i64,
    pub starred: bool,
    pub k_trunc: u32,
}

impl ThetaObservable {
    pub fn new(m: i64, j: i64, starred: bool, k_trunc: u32) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidArgument(format!("theta index m must be positive, got {m}")));
        }
        if !(0..m).contains(&j) {
            return Err(Error::InvalidArgument(format!("theta index j = {j} must lie in [0, {m})")));
        }
        if k_trunc == 0 {
            return Err(Error::InvalidArgument("k_trunc must be positive".into()));
        }
        Ok(ThetaObservable { m, j, starred, k_trunc })
    }

    pub fn psi(m: i64, j: i64) -> Self {
        Self::new(m, j, false, DEFAULT_K_TRUNC).expect("valid indices")
    }

    /// Bound on the discarded Gaussian terms: `2 Σ_{k > K} exp(-π(k - 1)²)`.
    pub fn tail_bound(&self) -> f64 {
        (self.k_trunc as i64 + 1..self.k_trunc as i64 + 40)
            .map(|k| 2.0 * (-PI * ((k - 1) as f64).powi(2)).exp())
            .sum()
    }

    /// The formula at an arbitrary group element, not necessarily reduced.
    pub fn eval_at(&self, g: &HeisElement) -> Complex64 {
        e(frac_product(self.m as f64, g.z) + frac_product(self.j as f64, g.x)) * self.theta_sum(g)
    }

    /// The formula without its `e(mz + jx)` prefactor (the factor `i` of the starred variant included).
    pub fn theta_sum(&self, g: &HeisElement) -> Complex64 {
        let (m, j) = (self.m as f64, self.j as f64);
        let shift = j / m + if self.starred { 0.5 } else { 0.0 };
        let centre = (-(g.y + shift)).round() as i64;
        let kt = self.k_trunc as i64;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in centre - kt..=centre + kt {
            let kf = k as f64;
            let u = g.y + kf + j / m;
            let weight = (-PI * (u + if self.starred { 0.5 } else { 0.0 }).powi(2)).exp();
            let mut phase = frac_product((self.m * k) as f64, g.x);
            if self.starred {
                phase += 0.5 * u;
            }
            sum += weight * e(phase);
        }
        if self.starred {
            sum * Complex64::i()
        } else {
            sum
        }
    }

    pub fn eval(&self, p: &NilPoint) -> Complex64 {
        self.eval_at(p.rep())
    }
}

/// `e(ξ₁t + ξ₂x + ξ₃y) ψ(Γ(x, y, z))`, optionally conjugated; no theta factor means 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAObservable {
    pub xi: [i64; 3],
    pub theta: Option<ThetaObservable>,
    pub conjugated: bool,
}

impl ClassAObservable {
    /// `e(t + x + y) ψ_{10}`, whose expansion is `e(t + x + y + z) Σ_k …`.
    pub fn preset_fa() -> Self {
        ClassAObservable { xi: [1, 1, 1], theta: Some(ThetaObservable::psi(1, 0)), conjugated: false }
    }

    pub fn eval(&self, p: &ProductPoint) -> Complex64 {
        let r = p.p.rep();
        let phase = frac_product(self.xi[0] as f64, p.t)
            + frac_product(self.xi[1] as f64, r.x)
            + frac_product(self.xi[2] as f64, r.y);
        let theta = self.theta.map_or(Complex64::new(1.0, 0.0), |th| th.eval(&p.p));
        let v = e(phase) * theta;
        if self.conjugated {
            v.conj()
        } else {
            v
        }
    }

    /// `sup |f|`: with the nearest Gaussian centre at distance up to ½, the
    /// theta sum is at most `1 + 2 Σ_{k>=1} exp(-π(k - ½)²)`.
    pub fn sup_bound(&self) -> f64 {
        match self.theta {
            None => 1.0,
            Some(_) => 1.0 + (1..40).map(|k| 2.0 * (-PI * (k as f64 - 0.5).powi(2)).exp()).sum::<f64>(),
        }
    }
}

/// A finitely supported Fourier series on the 2-torus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TorusSeries {
    coeffs: BTreeMap<(i64, i64), Complex64>,
}

impl TorusSeries {
    pub fn from_coeffs<I: IntoIterator<Item = ((i64, i64), Complex64)>>(coeffs: I) -> Self {
        let mut map: BTreeMap<(i64, i64), Complex64> = BTreeMap::new();
        for (k, c) in coeffs {
            *map.entry(k).or_default() += c;
        }
        TorusSeries { coeffs: map }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_coeffs([((0, 0), Complex64::new(c, 0.0))])
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&(a, b), &c)| c * e(frac_product(a as f64, x) + frac_product(b as f64, y)))
            .sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }
}

/// `f₁(t) f₂(x, y)`, a function of the torus factor only.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBObservable {
    pub f1: FourierSeries,
    pub f2: TorusSeries,
}

impl ClassBObservable {
    pub fn eval(&self, p: &ProductPoint) -> Complex64 {
        let r = p.p.rep();
        self.f1.eval(p.t) * self.f2.eval(r.x, r.y)
    }

    pub fn sup_bound(&self) -> f64 {
        self.f1.l1_norm() * self.f2.l1_norm()
    }
}

/// Any observable on the product space.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    Constant(Complex64),
    ClassA(ClassAObservable),
    ClassB(ClassBObservable),
}

impl Observable {
    pub fn eval(&self, p: &ProductPoint) -> Complex64 {
        match self {
            Observable::Constant(c) => *c,
            Observable::ClassA(a) => a.eval(p),
            Observable::ClassB(b) => b.eval(p),
        }
    }

    pub fn sup_bound(&self) -> f64 {
        match self {
            Observable::Constant(c) => c.norm(),
            Observable::ClassA(a) => a.sup_bound(),
            Observable::ClassB(b) => b.sup_bound(),
        }
    }

    /// Gaussian truncation tail of the theta factor, 0 when there is none.
    pub fn tail_bound(&self) -> f64 {
        match self {
            Observable::ClassA(ClassAObservable { theta: Some(th), .. }) => th.tail_bound(),
            _ => 0.0,
        }
    }
}

/// JSON form of an observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    /// `"fA"` or `"one"`.
    Preset(String),
    Tagged(TaggedObservable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum TaggedObservable {
    A {
        xi: [i64; 3],
        #[serde(default)]
        m: Option<i64>,
        #[serde(default)]
        j: i64,
        #[serde(default)]
        starred: bool,
        #[serde(default)]
        conjugated: bool,
        #[serde(default)]
        k_trunc: Option<u32>,
    },
    B {
        f1: FunctionSpec,
        /// `[[a, b, re, im], …]` for `Σ c e(ax + by)`.
        f2: Vec<(i64, i64, f64, f64)>,
    },
}

impl ObservableSpec {
    pub fn build(&self) -> Result<Observable> {
        match self {
            ObservableSpec::Preset(name) => match name.as_str() {
                "fA" => Ok(Observable::ClassA(ClassAObservable::preset_fa())),
                "one" => Ok(Observable::Constant(Complex64::new(1.0, 0.0))),
                other => Err(Error::Parse(format!("unknown observable preset {other:?}"))),
            },
            ObservableSpec::Tagged(TaggedObservable::A { xi, m, j, starred, conjugated, k_trunc }) => {
                let theta = match m {
                    Some(m) => Some(ThetaObservable::new(*m, *j, *starred, k_trunc.unwrap_or(DEFAULT_K_TRUNC))?),
                    None => None,
                };
                Ok(Observable::ClassA(ClassAObservable { xi: *xi, theta, conjugated: *conjugated }))
            }
            ObservableSpec::Tagged(TaggedObservable::B { f1, f2 }) => Ok(Observable::ClassB(ClassBObservable {
                f1: f1.to_series()?,
                f2: TorusSeries::from_coeffs(f2.iter().map(|&(a, b, re, im)| ((a, b), Complex64::new(re, im)))),
            })),
        }
    }
}

/// `p_m F(Γg) = ∫₀¹ F(Γ g (0, 0, s)) e(-ms) ds` by the rectangle rule on `quad_points` nodes.
pub fn project_pm_at<F>(f: &F, m: i64, quad_points: usize, p: &NilPoint) -> Result<Complex64>
where
    F: Fn(&NilPoint) -> Complex64 + ?Sized,
{
    if quad_points < 4 * (m.unsigned_abs() as usize).max(1) {
        return Err(Error::InvalidArgument(format!(
            "{quad_points} quadrature points are too few for m = {m}"
        )));
    }
    let q = quad_points as f64;
    let sum: Complex64 = (0..quad_points)
        .map(|i| {
            let s = i as f64 / q;
            f(&p.translate(&HeisElement::central(s))) * e(-frac_product(m as f64, s))
        })
        .sum();
    Ok(sum / q)
}

/// [`project_pm_at`] as a function of the point.
pub fn project_pm<'a, F>(f: &'a F, m: i64, quad_points: usize) -> Result<impl Fn(&NilPoint) -> Complex64 + 'a>
where
    F: Fn(&NilPoint) -> Complex64 + ?Sized,
{
    project_pm_at(f, m, quad_points, &NilPoint::IDENTITY)?;
    Ok(move |p: &NilPoint| project_pm_at(f, m, quad_points, p).expect("validated above"))
}
