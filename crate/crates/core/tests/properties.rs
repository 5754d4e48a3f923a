use nilmobius::arith::{classify, cf_expand, dist_to_int_exact, m1_member, Alpha, AlphaSpec, MobiusTable};
use nilmobius::complexity::dbar_n;
use nilmobius::correlate::{mobius_correlation, Weights};
use nilmobius::flows::{torus3_dist, torus_factor, ConjugacySetup, Flow};
use nilmobius::fourier::{birkhoff, cobound, decompose, BirkhoffCache, FourierSeries, Resonance};
use nilmobius::heisenberg::{
    circle_dist, d_g_upper, d_nil, d_prod, reduce, HeisElement, LatticeElement, NilPoint, ProductPoint,
};
use nilmobius::observables::ThetaObservable;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use proptest::prelude::*;
use std::sync::OnceLock;

fn golden() -> Alpha {
    Alpha::from_f64((5f64.sqrt() - 1.0) / 2.0)
}

fn table() -> &'static MobiusTable {
    static T: OnceLock<MobiusTable> = OnceLock::new();
    T.get_or_init(|| MobiusTable::new(1_000_000).unwrap())
}

fn elem() -> impl Strategy<Value = HeisElement> {
    (-4.0..4.0f64, -4.0..4.0f64, -4.0..4.0f64).prop_map(|(x, y, z)| HeisElement::new(x, y, z))
}

fn lattice() -> impl Strategy<Value = LatticeElement> {
    (-3i64..=3, -3i64..=3, -3i64..=3).prop_map(|(a, b, c)| LatticeElement::new(a, b, c))
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..1.0f64
}

fn point() -> impl Strategy<Value = ProductPoint> {
    (unit(), unit(), unit(), unit()).prop_map(|(t, x, y, z)| ProductPoint::from_coords(t, x, y, z))
}

/// Small real zero-mean series on frequencies `1..=4`.
fn series() -> impl Strategy<Value = FourierSeries> {
    proptest::collection::vec((0.0..0.4f64, unit()), 4).prop_map(|v| {
        v.iter()
            .enumerate()
            .fold(FourierSeries::zero(), |acc, (i, &(a, ph))| acc.add(&FourierSeries::cos(i as i64 + 1, a, ph)))
    })
}

fn close(a: &HeisElement, b: &HeisElement, tol: f64) -> bool {
    (a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol && (a.z - b.z).abs() < tol
}

fn matrix(g: &HeisElement) -> [[f64; 3]; 3] {
    [[1.0, g.y, g.z], [0.0, 1.0, g.x], [0.0, 0.0, 1.0]]
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

proptest! {
    #[test]
    fn product_matches_matrices(g in elem(), h in elem()) {
        let lhs = matrix(&g.mul(&h));
        let rhs = matmul(&matrix(&g), &matrix(&h));
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((lhs[i][j] - rhs[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn associativity_and_inverse(g in elem(), h in elem(), k in elem()) {
        prop_assert!(close(&g.mul(&h).mul(&k), &g.mul(&h.mul(&k)), 1e-12));
        prop_assert!(close(&g.mul(&g.inv()), &HeisElement::IDENTITY, 1e-12));
        prop_assert!(close(&g.left_quotient(&h), &g.inv().mul(&h), 1e-12));
    }

    #[test]
    fn kappa_round_trips(g in elem()) {
        prop_assert!(close(&HeisElement::from_kappa(g.kappa()), &g, 1e-12));
    }

    #[test]
    fn reduction_is_unique_up_to_lattice(g in elem(), gamma in lattice()) {
        let (p, lift) = reduce(&g);
        let r = p.rep();
        prop_assert!((0.0..1.0).contains(&r.x) && (0.0..1.0).contains(&r.y) && (0.0..1.0).contains(&r.z));
        prop_assert!(close(&lift.act(&g), r, 1e-9));
        let (p2, _) = reduce(&gamma.act(&g));
        prop_assert!(d_nil(&p, &p2, 3) < 1e-9);
    }

    #[test]
    fn lattice_action_is_a_homomorphism(a in lattice(), b in lattice(), g in elem()) {
        prop_assert!(close(&a.act(&b.act(&g)), &a.mul(&b).act(&g), 1e-12));
        prop_assert!(close(&a.inv().act(&a.act(&g)), &g, 1e-12));
    }

    #[test]
    fn group_distance_bounds(g in elem(), h in elem(), k in elem()) {
        let direct = g.left_quotient(&h).kappa_norm();
        let d1 = d_g_upper(&g, &h, 1);
        let d2 = d_g_upper(&g, &h, 2);
        prop_assert!(d1 <= direct + 1e-12);
        prop_assert!(d2 <= d1 + 1e-12);
        prop_assert!((d1 - d_g_upper(&h, &g, 1)).abs() < 1e-9);
        prop_assert!((d1 - d_g_upper(&k.mul(&g), &k.mul(&h), 1)).abs() < 1e-6 * (1.0 + d1));
    }

    #[test]
    fn nil_distance_is_symmetric_and_invariant(p in point(), q in point(), gamma in lattice()) {
        let d = d_nil(&p.p, &q.p, 3);
        prop_assert!((d - d_nil(&q.p, &p.p, 3)).abs() < 1e-12);
        prop_assert!(d_nil(&p.p, &p.p, 3) < 1e-12);
        let moved = NilPoint::of(&gamma.act(p.p.rep()));
        prop_assert!((d_nil(&moved, &q.p, 3) - d).abs() < 1e-12);
    }

    #[test]
    fn circle_triangle(a in unit(), b in unit(), c in unit()) {
        prop_assert!(circle_dist(a, c) <= circle_dist(a, b) + circle_dist(b, c) + 1e-15);
        prop_assert!(circle_dist(a, b) <= 0.5);
    }

    #[test]
    fn convergent_bracket(a in proptest::collection::vec(1u128..50, 6..20)) {
        let cf = cf_expand(&AlphaSpec::PartialQuotients(a.clone()), a.len(), u128::MAX).unwrap();
        let value = cf.value().clone();
        for k in 1..cf.len().saturating_sub(2) {
            let (q, next) = (cf.q(k), cf.q(k + 1));
            let d = dist_to_int_exact(&value, q);
            prop_assert!(BigRational::new(BigInt::from(1), BigInt::from(2 * next)) < d);
            prop_assert!(d < BigRational::new(BigInt::from(1), BigInt::from(next)));
        }
    }

    #[test]
    fn classification_partitions(a in proptest::collection::vec(1u128..400, 3..10), b in 2.1..4.0f64) {
        let cf = cf_expand(&AlphaSpec::PartialQuotients(a), 10, u128::MAX).unwrap();
        let cls = classify(&cf, b).unwrap();
        let mut all: Vec<usize> = cls.flat.iter().chain(&cls.sharp).copied().chain(cls.unresolved).collect();
        all.sort();
        prop_assert_eq!(all, (1..=cf.len()).collect::<Vec<_>>());
        for &k in &cls.sharp {
            prop_assert!((cf.q(k + 1) as f64) > (cf.q(k) as f64).powf(b) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn mobius_is_multiplicative(a in 1u64..1000, b in 1u64..1000) {
        let t = table();
        if a.gcd(&b) == 1 {
            prop_assert_eq!(t.mu(a * b), t.mu(a) * t.mu(b));
        } else if a.gcd(&b) > 1 {
            prop_assert_eq!(t.mu(a * b), 0);
        }
    }

    #[test]
    fn decomposition_is_a_split(f in series(), g in series(), s in -2.0..2.0f64) {
        let cf = nilmobius::arith::liouville_alpha(3.0, 2).unwrap();
        let cls = classify(&cf, 3.0).unwrap();
        let (f1, f2) = decompose(&f, &cls, &cf).unwrap();
        prop_assert_eq!(f1.add(&f2), f.clone());
        for m in f1.support() {
            prop_assert!(m1_member(m, &cls, &cf).unwrap());
        }
        let h = f.add(&g.scale(s));
        let (h1, _) = decompose(&h, &cls, &cf).unwrap();
        let (g1, _) = decompose(&g, &cls, &cf).unwrap();
        let expect = f1.add(&g1.scale(s));
        for m in -4..=4 {
            prop_assert!((h1.coeff(m) - expect.coeff(m)).norm() < 1e-15);
        }
    }

    #[test]
    fn cobound_solves_the_equation(f in series(), t in unit()) {
        let alpha = golden();
        let g = cobound(&f, &alpha, 1e-12).unwrap();
        let lhs = g.eval_real(alpha.rotate(t, 1)) - g.eval_real(t);
        prop_assert!((lhs - f.eval_real(t)).abs() < 1e-12);
    }

    #[test]
    fn birkhoff_cache_matches_direct(f in series(), t in unit(), n in 1u64..3000) {
        let alpha = golden();
        let cache = BirkhoffCache::new(&f, &alpha);
        prop_assert!((cache.query(n, t) - birkhoff(&f, &alpha, t, n)).abs() < 1e-9);
    }

    #[test]
    fn torus_factor_semiconjugacy(phi in series(), psi in series(), p in point()) {
        let flow = Flow::skew(golden(), phi, psi).unwrap();
        let lhs = torus_factor(&flow.step(&p));
        let rhs = flow.torus3_step(torus_factor(&p));
        prop_assert!(torus3_dist(lhs, rhs) < 1e-12);
    }

    #[test]
    fn closed_form_matches_iteration(phi in series(), psi in series(), p in point(), n in 1u64..500) {
        let flow = Flow::skew(golden(), phi, psi).unwrap();
        let it = flow.iterate(&p, n);
        prop_assert!(d_prod(&it, &flow.orbit_closed_form(&p, n).unwrap(), 3) < 1e-9);
        prop_assert!(d_prod(&it, &flow.orbit_closed_form_geometric(&p, n).unwrap(), 3) < 1e-9);
    }

    #[test]
    fn theta_is_lattice_invariant_and_central(
        m in 1i64..5, j in 0i64..4, starred in any::<bool>(), g in elem(), gamma in lattice(), s in unit()
    ) {
        let th = ThetaObservable::new(m, j % m, starred, 12).unwrap();
        let v = th.eval_at(&g);
        prop_assert!((th.eval_at(&gamma.act(&g)) - v).norm() < 1e-9);
        let shifted = th.eval_at(&g.mul(&HeisElement::central(s)));
        let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 * s);
        prop_assert!((shifted - v * phase).norm() < 1e-9);
    }

    #[test]
    fn correlation_is_linear(phi in series(), p in point(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let flow = Flow::skew(golden(), phi, FourierSeries::zero()).unwrap();
        let th = ThetaObservable::psi(1, 0);
        let f = |q: &ProductPoint| th.eval(&q.p);
        let g = |q: &ProductPoint| Complex64::new(q.t.cos(), q.p.rep().x);
        let n = 500;
        let run = |obs: &dyn Fn(&ProductPoint) -> Complex64| {
            mobius_correlation(&flow, obs, &p, n, &[n], table(), Weights::Mobius).unwrap()[0].value()
        };
        let combined = run(&|q| f(q) * a + g(q) * b);
        prop_assert!((combined - (run(&f) * a + run(&g) * b)).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bowen_distance_is_symmetric(phi in series(), p in point(), q in point(), n in 1u64..40) {
        let flow = Flow::general(golden(), phi.clone(), phi.scale(0.5), FourierSeries::zero()).unwrap();
        let d = dbar_n(&flow, &p, &q, n, 3);
        prop_assert!(d >= 0.0);
        prop_assert!((d - dbar_n(&flow, &q, &p, n, 3)).abs() < 1e-12);
    }

    #[test]
    fn without_sharp_denominators_bowen_distance_is_constant(
        phi in series(), psi in series(), p in point(), q in point()
    ) {
        let cf = cf_expand(&AlphaSpec::golden(60), 60, u128::MAX).unwrap();
        let cls = classify(&cf, 3.0).unwrap();
        let setup = ConjugacySetup::new(&cf, &cls, &phi, &psi, 64, Resonance::MeanOnly).unwrap();
        let d0 = d_prod(&p, &q, 3);
        for n in [1u64, 5, 30] {
            prop_assert!((dbar_n(&setup.t1, &p, &q, n, 3) - d0).abs() < 1e-10);
        }
    }
}

#[test]
fn squarefree_density_approaches_six_over_pi_squared() {
    let n = 1_000_000;
    let density = table().squarefree_count(n).unwrap() as f64 / n as f64;
    assert!((density - 6.0 / (std::f64::consts::PI * std::f64::consts::PI)).abs() < 1e-3);
}
