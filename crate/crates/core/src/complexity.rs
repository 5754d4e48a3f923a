//! Bowen-averaged distances, greedy covering estimates of measure complexity,
//! the explicit shadowing grid `F(k)`, and the distality probe.

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{ContinuedFraction, DenominatorClassification};
use crate::compensated::Compensated;
use crate::error::{Error, Result};
use crate::flows::{Cocycle, Flow};
use crate::fourier::FourierSeries;
use crate::heisenberg::{circle_dist, d_prod, NilPoint, ProductPoint};

/// Default cap on group steps for one shadowing run.
pub const DEFAULT_STEP_BUDGET: u128 = 100_000_000;

/// `d̄_n(P, Q) = (1/n) Σ_{j<n} d(T^j P, T^j Q)`.
pub fn dbar_n(flow: &Flow, p: &ProductPoint, q: &ProductPoint, n: u64, window: i64) -> f64 {
    assert!(n >= 1, "d̄_n needs n >= 1");
    let acc: Compensated = flow
        .orbit(p)
        .zip(flow.orbit(q))
        .take(n as usize)
        .map(|(a, b)| d_prod(&a, &b, window))
        .collect();
    acc.value() / n as f64
}

/// `T^{burn_in + i·stride}(P₀)` for `i < count`.
pub fn empirical_sample(flow: &Flow, start: &ProductPoint, burn_in: u64, count: usize, stride: u64) -> Vec<ProductPoint> {
    assert!(count >= 1, "sample needs at least one point");
    let stride = stride.max(1) as usize;
    flow.orbit(start).skip(burn_in as usize).step_by(stride).take(count).collect()
}

/// Kolmogorov distance between the empirical law of `points` in `[0, 1)` and the uniform law.
pub fn discrepancy(points: &[f64]) -> f64 {
    let mut v = points.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Outcome of a greedy `ε`-cover of an empirical sample in the `d̄_n` metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoveringReport {
    pub n: u64,
    pub epsilon: f64,
    pub centers_used: usize,
    pub covered_mass: f64,
    pub sample_size: usize,
}

/// Pairwise `d̄_n` between all sample points.
pub fn dbar_matrix(flow: &Flow, sample: &[ProductPoint], n: u64, window: i64) -> Vec<Vec<f64>> {
    assert!(n >= 1, "d̄_n needs n >= 1");
    let orbits: Vec<Vec<ProductPoint>> =
        sample.par_iter().map(|p| flow.orbit(p).take(n as usize).collect()).collect();
    (0..sample.len())
        .into_par_iter()
        .map(|i| {
            (0..sample.len())
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    let acc: Compensated =
                        orbits[i].iter().zip(&orbits[j]).map(|(a, b)| d_prod(a, b, window)).collect();
                    acc.value() / n as f64
                })
                .collect()
        })
        .collect()
}

/// Greedy cover by open `d̄_n`-balls of radius `ε` centred at sample points,
/// until the covered fraction exceeds `1 - ε`.
pub fn estimate_sn(flow: &Flow, sample: &[ProductPoint], n: u64, epsilon: f64, window: i64) -> Result<CoveringReport> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("covering needs a nonempty sample".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let dist = dbar_matrix(flow, sample, n, window);
    Ok(greedy_cover(&dist, n, epsilon))
}

/// The greedy rounds on a precomputed distance matrix.
pub fn greedy_cover(dist: &[Vec<f64>], n: u64, epsilon: f64) -> CoveringReport {
    let size = dist.len();
    let mut covered = vec![false; size];
    let mut count = 0usize;
    let mut centers = 0usize;
    let target = (1.0 - epsilon) * size as f64;
    while (count as f64) <= target && count < size {
        let (best, _) = (0..size)
            .into_par_iter()
            .map(|c| (c, (0..size).filter(|&j| !covered[j] && dist[c][j] < epsilon).count()))
            .reduce(|| (usize::MAX, 0), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
        for (j, flag) in covered.iter_mut().enumerate() {
            if !*flag && dist[best][j] < epsilon {
                *flag = true;
                count += 1;
            }
        }
        centers += 1;
    }
    CoveringReport { n, epsilon, centers_used: centers, covered_mass: count as f64 / size as f64, sample_size: size }
}

/// `2π Σ |m| |f̂(m)|`, raised to at least `ε⁻¹`.
pub fn lipschitz(f: &FourierSeries, eps_inv: f64) -> f64 {
    (std::f64::consts::TAU * f.derivative_l1()).max(eps_inv)
}

/// Largest [`lipschitz`] constant among the three fiber increments of a flow.
pub fn flow_lipschitz(flow: &Flow, eps_inv: f64) -> f64 {
    let parts: Vec<FourierSeries> = match &flow.cocycle {
        Cocycle::Skew { phi, psi } => vec![phi.clone(), psi.clone()],
        Cocycle::General { phi1, phi2, psi } => vec![phi1.clone(), phi2.clone(), psi.clone()],
        Cocycle::Resonant { phi1, eta1, psi1 } => {
            let center = phi1.square().scale(0.5).sub(&eta1.scale(0.5)).add(psi1);
            vec![phi1.clone(), center]
        }
    };
    parts.iter().map(|f| lipschitz(f, eps_inv)).fold(eps_inv, f64::max)
}

/// The grid `F(k) = F₁(k) × F₂(k)`: `t = jε/(Lq_k)` and fiber coordinates on
/// the lattice of spacing `1/(q_k² L)`. Held implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FkGrid {
    pub q: u128,
    pub eps_inv: u64,
    pub l: u64,
}

impl FkGrid {
    pub fn new(q: u128, eps_inv: u64, l: u64) -> Result<Self> {
        if q == 0 || eps_inv == 0 || l == 0 {
            return Err(Error::InvalidArgument("grid parameters must be positive".into()));
        }
        let g = FkGrid { q, eps_inv, l };
        g.fiber_steps()?;
        g.cardinality()?;
        Ok(g)
    }

    /// Points of `F₁(k)`: `ε⁻¹ L q_k`.
    pub fn t_steps(&self) -> Result<u128> {
        (self.eps_inv as u128)
            .checked_mul(self.l as u128)
            .and_then(|v| v.checked_mul(self.q))
            .ok_or(Error::Overflow("counting F1(k)"))
    }

    /// Points per fiber axis: `q_k² L`.
    pub fn fiber_steps(&self) -> Result<u128> {
        self.q
            .checked_mul(self.q)
            .and_then(|v| v.checked_mul(self.l as u128))
            .ok_or(Error::Overflow("counting F2(k)"))
    }

    /// `#F(k) = ε⁻¹ L⁴ q_k⁷`.
    pub fn cardinality(&self) -> Result<u128> {
        let f = self.fiber_steps()?;
        f.checked_pow(3)
            .and_then(|v| v.checked_mul(self.t_steps().ok()?))
            .ok_or(Error::Overflow("counting F(k)"))
    }

    pub fn t_spacing(&self) -> f64 {
        1.0 / (self.eps_inv as f64 * self.l as f64 * self.q as f64)
    }

    pub fn fiber_spacing(&self) -> f64 {
        1.0 / (self.q as f64 * self.q as f64 * self.l as f64)
    }

    fn snap(v: f64, steps: u128) -> f64 {
        let s = steps as f64;
        let i = ((v * s).floor()).clamp(0.0, s - 1.0);
        i / s
    }

    /// The grid point below `P` in every coordinate of its representative.
    pub fn nearest(&self, p: &ProductPoint) -> ProductPoint {
        let ts = self.t_steps().expect("checked at construction");
        let fs = self.fiber_steps().expect("checked at construction");
        let r = p.p.rep();
        ProductPoint::new(
            Self::snap(p.t, ts),
            NilPoint::from_coords(Self::snap(r.x, fs), Self::snap(r.y, fs), Self::snap(r.z, fs)),
        )
    }

    /// Whether every coordinate sits on its lattice.
    pub fn contains(&self, p: &ProductPoint) -> bool {
        let on = |v: f64, steps: u128| {
            let s = v * steps as f64;
            (s - s.round()).abs() < 1e-9
        };
        let (ts, fs) = (self.t_steps().unwrap_or(0), self.fiber_steps().unwrap_or(0));
        let r = p.p.rep();
        on(p.t, ts) && on(r.x, fs) && on(r.y, fs) && on(r.z, fs)
    }

    /// All grid points, refusing more than `budget`.
    pub fn points(&self, budget: u128) -> Result<Vec<ProductPoint>> {
        let need = self.cardinality()?;
        if need > budget {
            return Err(Error::Budget { what: "F(k) grid points", need, budget });
        }
        let (ts, fs) = (self.t_steps()? as u64, self.fiber_steps()? as u64);
        let mut out = Vec::with_capacity(need as usize);
        for it in 0..ts {
            for ix in 0..fs {
                for iy in 0..fs {
                    for iz in 0..fs {
                        let f = fs as f64;
                        out.push(ProductPoint::new(
                            it as f64 / ts as f64,
                            NilPoint::from_coords(ix as f64 / f, iy as f64 / f, iz as f64 / f),
                        ));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `F(k)` for the denominator `q_k` of the expansion.
pub fn build_fk(cf: &ContinuedFraction, k_index: usize, eps_inv: u64, l: u64) -> Result<FkGrid> {
    if k_index > cf.len() {
        return Err(Error::InvalidArgument(format!("expansion has no q_{k_index}")));
    }
    FkGrid::new(cf.q(k_index), eps_inv, l)
}

/// `n_k = q_k^{B-1}`, rounded up for non-integral `B`.
pub fn shadowing_horizon(q: u128, b: f64) -> Result<u128> {
    if b.fract() == 0.0 && b >= 1.0 {
        q.checked_pow(b as u32 - 1).ok_or(Error::Overflow("computing n_k"))
    } else {
        let v = (q as f64).powf(b - 1.0).ceil();
        if v >= u128::MAX as f64 {
            Err(Error::Overflow("computing n_k"))
        } else {
            Ok(v as u128)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShadowingTrial {
    /// `max_{m <= n_k} d(T^m P, T^m P*)`.
    pub max_pointwise: f64,
    /// `d̄_{n_k}(P, P*)`.
    pub dbar: f64,
    /// `d(P, P*)` at the start.
    pub initial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowingReport {
    pub q: u128,
    pub n_k: u128,
    pub epsilon: f64,
    pub l: u64,
    pub grid_cardinality: u128,
    pub max_pointwise: f64,
    pub max_dbar: f64,
    /// `max_pointwise < 20ε`.
    pub success: bool,
    pub trials: Vec<ShadowingTrial>,
}

/// Tracks each trial point against its `F(k)` grid point for `n_k = q_k^{B-1}` steps.
pub fn verify_shadowing(
    flow: &Flow,
    cf: &ContinuedFraction,
    cls: &DenominatorClassification,
    k_index: usize,
    eps_inv: u64,
    l: u64,
    trials: &[ProductPoint],
    window: i64,
    step_budget: u128,
) -> Result<ShadowingReport> {
    match &flow.cocycle {
        Cocycle::Resonant { phi1, .. } if phi1.mean().norm() <= 1e-12 => {}
        Cocycle::Resonant { .. } => {
            return Err(Error::InvalidArgument("shadowing needs a resonant flow with mean-zero phi1".into()))
        }
        _ => return Err(Error::InvalidArgument("shadowing runs on the resonant form T1".into())),
    }
    if !cls.is_sharp(k_index) {
        return Err(Error::InvalidArgument(format!("q_{k_index} is not in the sharp class")));
    }
    let grid = build_fk(cf, k_index, eps_inv, l)?;
    let n_k = shadowing_horizon(grid.q, cls.b)?;
    let need = n_k
        .checked_add(1)
        .and_then(|v| v.checked_mul(2 * trials.len() as u128))
        .ok_or(Error::Overflow("counting shadowing steps"))?;
    if need > step_budget {
        return Err(Error::Budget { what: "shadowing steps", need, budget: step_budget });
    }
    let steps = n_k as usize;
    let results: Vec<ShadowingTrial> = trials
        .par_iter()
        .map(|p| {
            let star = grid.nearest(p);
            let mut max_pointwise: f64 = 0.0;
            let mut acc = Compensated::new();
            for (m, (a, b)) in flow.orbit(p).zip(flow.orbit(&star)).take(steps + 1).enumerate() {
                let d = d_prod(&a, &b, window);
                max_pointwise = max_pointwise.max(d);
                if m < steps {
                    acc.add(d);
                }
            }
            ShadowingTrial {
                max_pointwise,
                dbar: acc.value() / steps.max(1) as f64,
                initial: d_prod(p, &star, window),
            }
        })
        .collect();
    let epsilon = 1.0 / eps_inv as f64;
    let max_pointwise = results.iter().map(|r| r.max_pointwise).fold(0.0, f64::max);
    Ok(ShadowingReport {
        q: grid.q,
        n_k,
        epsilon,
        l,
        grid_cardinality: grid.cardinality()?,
        max_pointwise,
        max_dbar: results.iter().map(|r| r.dbar).fold(0.0, f64::max),
        success: max_pointwise < 20.0 * epsilon,
        trials: results,
    })
}

/// Minimum distance along two orbits and where it is first attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistalityProbe {
    pub min_dist: f64,
    pub argmin: u64,
}

/// `min_{0 <= n <= N} d(Tⁿ P, Tⁿ Q)`.
pub fn distality_probe(flow: &Flow, p: &ProductPoint, q: &ProductPoint, n: u64, window: i64) -> DistalityProbe {
    let mut best = DistalityProbe { min_dist: f64::INFINITY, argmin: 0 };
    for (i, (a, b)) in flow.orbit(p).zip(flow.orbit(q)).take(n as usize + 1).enumerate() {
        let d = d_prod(&a, &b, window);
        if d < best.min_dist {
            best = DistalityProbe { min_dist: d, argmin: i as u64 };
        }
    }
    best
}

/// The distances `d(Tⁿ P, Tⁿ Q)` for `0 <= n <= N`.
pub fn distance_trace(flow: &Flow, p: &ProductPoint, q: &ProductPoint, n: u64, window: i64) -> Vec<f64> {
    flow.orbit(p).zip(flow.orbit(q)).take(n as usize + 1).map(|(a, b)| d_prod(&a, &b, window)).collect()
}

/// Minimum of a distance trace over each half-open decade `(lo, hi]`, with `[0, first]` for the first.
pub fn decade_minima(trace: &[f64], edges: &[u64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(edges.len());
    let mut lo = 0usize;
    for (i, &hi) in edges.iter().enumerate() {
        let hi = (hi as usize).min(trace.len().saturating_sub(1));
        let start = if i == 0 { 0 } else { lo + 1 };
        out.push(trace.get(start..=hi).map_or(f64::INFINITY, |s| s.iter().copied().fold(f64::INFINITY, f64::min)));
        lo = hi;
    }
    out
}

/// Circle distance between base points, which a rotation preserves.
pub fn base_distance(p: &ProductPoint, q: &ProductPoint) -> f64 {
    circle_dist(p.t, q.t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{classify, liouville_alpha, Alpha};
    use crate::fourier::decompose;
    use crate::heisenberg::DEFAULT_WINDOW;

    fn golden() -> Alpha {
        Alpha::from_f64((5f64.sqrt() - 1.0) / 2.0)
    }

    #[test]
    fn dbar_examples() {
        let flow = Flow::rotation(golden());
        let p = ProductPoint::from_coords(0.1, 0.2, 0.3, 0.4);
        let q = ProductPoint::from_coords(0.4, 0.2, 0.3, 0.4);
        assert_eq!(dbar_n(&flow, &p, &q, 1, 3), d_prod(&p, &q, 3));
        assert_eq!(dbar_n(&flow, &p, &p, 10, 3), 0.0);
        assert!((dbar_n(&flow, &p, &q, 25, 3) - d_prod(&p, &q, 3)).abs() < 1e-12);
    }

    #[test]
    fn sample_examples() {
        let flow = Flow::rotation(golden());
        let p = ProductPoint::from_coords(0.3, 0.0, 0.0, 0.0);
        assert_eq!(empirical_sample(&flow, &p, 0, 1, 1), vec![p]);
        let frozen = Flow::rotation(Alpha::from_f64(0.0));
        assert!(empirical_sample(&frozen, &p, 5, 20, 3).iter().all(|s| *s == p));
        let ts: Vec<f64> = empirical_sample(&flow, &p, 0, 10_000, 1).iter().map(|s| s.t).collect();
        assert!(discrepancy(&ts) <= 0.05);
    }

    #[test]
    fn discrepancy_of_a_midpoint_grid() {
        let v: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert!((discrepancy(&v) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn cover_examples() {
        let flow = Flow::rotation(golden());
        let single = [ProductPoint::from_coords(0.2, 0.0, 0.0, 0.0)];
        assert_eq!(estimate_sn(&flow, &single, 3, 0.1, 3).unwrap().centers_used, 1);
        let sample: Vec<ProductPoint> =
            (0..1000).map(|i| ProductPoint::from_coords(i as f64 / 1000.0, 0.0, 0.0, 0.0)).collect();
        let r = estimate_sn(&flow, &sample, 1, 0.26, 3).unwrap();
        assert_eq!(r.centers_used, 2);
        assert!(r.covered_mass > 0.74);
        let tight: Vec<ProductPoint> =
            (0..20).map(|i| ProductPoint::from_coords(0.5 + i as f64 * 1e-3, 0.0, 0.0, 0.0)).collect();
        assert_eq!(estimate_sn(&flow, &tight, 4, 0.5, 3).unwrap().centers_used, 1);
        assert!(estimate_sn(&flow, &[], 1, 0.1, 3).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz(&FourierSeries::constant(3.0), 10.0), 10.0);
        let cos = FourierSeries::cos(1, 1.0, 0.0);
        assert!((lipschitz(&cos, 1.0) - std::f64::consts::TAU).abs() < 1e-12);
        assert!((lipschitz(&cos.scale(-5.0), 1.0) - 5.0 * std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn grid_cardinality_and_lattice() {
        let g = FkGrid::new(1, 2, 2).unwrap();
        assert_eq!(g.cardinality().unwrap(), 32);
        let pts = g.points(1000).unwrap();
        assert_eq!(pts.len(), 32);
        assert!(pts.iter().all(|p| g.contains(p)));
        assert!(matches!(g.points(10), Err(Error::Budget { .. })));
        let big = FkGrid::new(2, 100, 100).unwrap();
        assert_eq!(big.cardinality().unwrap(), 100 * 100u128.pow(4) * 2u128.pow(7));
        assert!(FkGrid::new(u128::MAX / 2, 100, 100).is_err());
    }

    #[test]
    fn nearest_grid_point_is_close() {
        let g = FkGrid::new(3, 10, 7).unwrap();
        for i in 0..200 {
            let s = i as f64 / 200.0;
            let p = ProductPoint::from_coords(s, (0.37 + 3.1 * s) % 1.0, (0.11 + 7.3 * s) % 1.0, (5.7 * s) % 1.0);
            let star = g.nearest(&p);
            assert!(g.contains(&star));
            assert!(p.t - star.t < g.t_spacing() && p.t >= star.t);
            let (r, s) = (p.p.rep(), star.p.rep());
            for (a, b) in [(r.x, s.x), (r.y, s.y), (r.z, s.z)] {
                assert!(a - b < g.fiber_spacing() + 1e-15 && a >= b);
            }
        }
    }

    #[test]
    fn trivial_resonant_flow_shadows_at_grid_distance() {
        let cf = liouville_alpha(3.0, 2).unwrap();
        let cls = classify(&cf, 3.0).unwrap();
        let k = cls.first_sharp().unwrap();
        let flow = Flow::resonant(cf.alpha(), FourierSeries::zero(), FourierSeries::zero(), FourierSeries::zero()).unwrap();
        let g = build_fk(&cf, k, 10, 10).unwrap();
        let on_grid = g.nearest(&ProductPoint::from_coords(0.3, 0.2, 0.1, 0.7));
        let trials = [ProductPoint::from_coords(0.31, 0.22, 0.13, 0.71), on_grid];
        let r = verify_shadowing(&flow, &cf, &cls, k, 10, 10, &trials, DEFAULT_WINDOW, DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(r.n_k, 4);
        assert!(r.success);
        assert!((r.trials[0].max_pointwise - r.trials[0].initial).abs() < 1e-12);
        assert!(r.trials[0].initial < 0.1);
        assert_eq!(r.trials[1].max_pointwise, 0.0);
    }

    #[test]
    fn shadowing_budget_and_preconditions() {
        let cf = liouville_alpha(3.0, 2).unwrap();
        let cls = classify(&cf, 3.0).unwrap();
        let k = cls.first_sharp().unwrap();
        let phi = FourierSeries::cos(2, 0.1, 0.0);
        let (phi1, _) = decompose(&phi, &cls, &cf).unwrap();
        let flow = Flow::resonant(cf.alpha(), phi1, FourierSeries::zero(), FourierSeries::zero()).unwrap();
        let trials = vec![ProductPoint::from_coords(0.5, 0.5, 0.5, 0.5); 10];
        let r = verify_shadowing(&flow, &cf, &cls, k, 100, 100, &trials, DEFAULT_WINDOW, 20);
        assert!(matches!(r, Err(Error::Budget { .. })));
        let skew = Flow::rotation(cf.alpha());
        assert!(verify_shadowing(&skew, &cf, &cls, k, 100, 100, &trials, 3, DEFAULT_STEP_BUDGET).is_err());
        let flat = cls.flat[0];
        assert!(verify_shadowing(&flow, &cf, &cls, flat, 100, 100, &trials, 3, DEFAULT_STEP_BUDGET).is_err());
    }

    #[test]
    fn distality_examples() {
        let phi1 = FourierSeries::cos(1, 0.3, 0.0);
        let flow = Flow::general(golden(), phi1.clone(), phi1.scale(2.0), FourierSeries::sin(1, 0.1)).unwrap();
        let p = ProductPoint::from_coords(0.1, 0.2, 0.3, 0.4);
        let q = ProductPoint::from_coords(0.35, 0.6, 0.1, 0.9);
        assert_eq!(distality_probe(&flow, &p, &p, 100, 3), DistalityProbe { min_dist: 0.0, argmin: 0 });
        let probe = distality_probe(&flow, &p, &q, 2000, 3);
        assert!(probe.min_dist >= base_distance(&p, &q) - 1e-12);
        let rot = Flow::rotation(golden());
        let probe = distality_probe(&rot, &p, &q, 500, 3);
        assert!((probe.min_dist - d_prod(&p, &q, 3)).abs() < 1e-12);
    }

    #[test]
    fn decade_minima_split() {
        let trace = [5.0, 4.0, 3.0, 9.0, 1.0, 8.0, 7.0];
        assert_eq!(decade_minima(&trace, &[2, 4, 6]), vec![3.0, 1.0, 7.0]);
    }
}
