//! The three-dimensional Heisenberg group, its integer lattice, and the
//! nilmanifold of right cosets.
//!
//! Elements are triples `(x, y, z)` with group law
//!
//! ```text
//! (x, y, z) · (x', y', z') = (x + x', y + y', z + z' + y·x')
//! ```
//!
//! which is the product of unipotent matrices `[[1, y, z], [0, 1, x], [0, 0, 1]]`.
//! Cosets are represented by the unique point of the half-open unit cube
//! reached by a left lattice translation.

use serde::{Deserialize, Serialize};

/// Default lattice search window used by [`d_nil`].
pub const DEFAULT_WINDOW: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeisElement {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HeisElement {
    pub const IDENTITY: HeisElement = HeisElement { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        HeisElement { x, y, z }
    }

    /// Element with Mal'cev coordinates `k`, the inverse of [`HeisElement::kappa`].
    pub fn from_kappa(k: [f64; 3]) -> Self {
        HeisElement::new(k[0], k[1], k[2] + k[0] * k[1])
    }

    /// Central element `(0, 0, z)`.
    pub const fn central(z: f64) -> Self {
        HeisElement::new(0.0, 0.0, z)
    }

    #[inline]
    pub fn mul(&self, h: &HeisElement) -> HeisElement {
        HeisElement {
            x: self.x + h.x,
            y: self.y + h.y,
            z: self.z + h.z + self.y * h.x,
        }
    }

    #[inline]
    pub fn inv(&self) -> HeisElement {
        HeisElement {
            x: -self.x,
            y: -self.y,
            z: self.x * self.y - self.z,
        }
    }

    /// `self⁻¹ · h`, evaluated without forming the inverse.
    #[inline]
    pub fn left_quotient(&self, h: &HeisElement) -> HeisElement {
        let dx = h.x - self.x;
        HeisElement {
            x: dx,
            y: h.y - self.y,
            z: (h.z - self.z) - self.y * dx,
        }
    }

    /// Mal'cev coordinates `(x, y, z - x·y)`.
    #[inline]
    pub fn kappa(&self) -> [f64; 3] {
        [self.x, self.y, self.z - self.x * self.y]
    }

    /// `l^∞` norm of the Mal'cev coordinates.
    #[inline]
    pub fn kappa_norm(&self) -> f64 {
        let k = self.kappa();
        k[0].abs().max(k[1].abs()).max(k[2].abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// An element of the integer lattice Γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeElement {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl LatticeElement {
    pub const IDENTITY: LatticeElement = LatticeElement { a: 0, b: 0, c: 0 };

    pub const fn new(a: i64, b: i64, c: i64) -> Self {
        LatticeElement { a, b, c }
    }

    pub fn to_element(self) -> HeisElement {
        HeisElement::new(self.a as f64, self.b as f64, self.c as f64)
    }

    pub fn mul(&self, h: &LatticeElement) -> LatticeElement {
        LatticeElement {
            a: self.a + h.a,
            b: self.b + h.b,
            c: self.c + h.c + self.b * h.a,
        }
    }

    pub fn inv(&self) -> LatticeElement {
        LatticeElement {
            a: -self.a,
            b: -self.b,
            c: self.a * self.b - self.c,
        }
    }

    /// Left action on a group element.
    #[inline]
    pub fn act(&self, g: &HeisElement) -> HeisElement {
        HeisElement {
            x: g.x + self.a as f64,
            y: g.y + self.b as f64,
            z: g.z + self.c as f64 + self.b as f64 * g.x,
        }
    }
}

/// Floor and fractional part, with the fractional part forced into `[0, 1)`.
#[inline]
pub(crate) fn floor_frac(v: f64) -> (i64, f64) {
    let f = v.floor();
    let mut r = v - f;
    let mut n = f as i64;
    if r >= 1.0 {
        r = 0.0;
        n += 1;
    }
    (n, r)
}

/// A coset Γg, stored as its representative in `[0,1)^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NilPoint {
    rep: HeisElement,
}

impl NilPoint {
    pub const IDENTITY: NilPoint = NilPoint { rep: HeisElement::IDENTITY };

    /// Coset of `g`.
    pub fn of(g: &HeisElement) -> Self {
        reduce(g).0
    }

    pub fn from_coords(x: f64, y: f64, z: f64) -> Self {
        Self::of(&HeisElement::new(x, y, z))
    }

    #[inline]
    pub fn rep(&self) -> &HeisElement {
        &self.rep
    }

    /// The coset `Γ g h`.
    #[inline]
    pub fn translate(&self, h: &HeisElement) -> NilPoint {
        NilPoint::of(&self.rep.mul(h))
    }
}

/// Canonical coset representative of `g` and the lattice element moving `g` onto it.
///
/// Returns `(p, γ)` with `γ · g = p.rep` and every coordinate of `p.rep` in `[0, 1)`.
/// The translation is applied in the order a, then b, then c.
pub fn reduce(g: &HeisElement) -> (NilPoint, LatticeElement) {
    let (fa, x) = floor_frac(g.x);
    let (fb, y) = floor_frac(g.y);
    let (a, b) = (-fa, -fb);
    let (fc, z) = floor_frac(g.z + b as f64 * g.x);
    (
        NilPoint { rep: HeisElement { x, y, z } },
        LatticeElement { a, b, c: -fc },
    )
}

/// A point `(t, Γg)` of the product space. `t` is kept in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductPoint {
    pub t: f64,
    pub p: NilPoint,
}

impl ProductPoint {
    pub fn new(t: f64, p: NilPoint) -> Self {
        ProductPoint { t: floor_frac(t).1, p }
    }

    pub fn from_coords(t: f64, x: f64, y: f64, z: f64) -> Self {
        ProductPoint::new(t, NilPoint::from_coords(x, y, z))
    }
}

/// Distance on the circle `R/Z`.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[inline]
fn d_one_step(g: &HeisElement, h: &HeisElement) -> f64 {
    let forward = g.left_quotient(h).kappa_norm();
    let backward = h.left_quotient(g).kappa_norm();
    forward.min(backward)
}

fn midpoints(g: &HeisElement, h: &HeisElement) -> [HeisElement; 9] {
    let [a, b, c] = g.left_quotient(h).kappa();
    let s = c.abs().sqrt();
    let step = |k: [f64; 3]| g.mul(&HeisElement::from_kappa(k));
    [
        step([a, 0.0, 0.0]),
        step([0.0, b, 0.0]),
        step([0.0, 0.0, c]),
        step([0.5 * a, 0.5 * b, 0.5 * c]),
        step([a, b, 0.0]),
        // first legs of a commutator loop for the central part
        step([s, 0.0, 0.0]),
        step([-s, 0.0, 0.0]),
        step([0.0, s, 0.0]),
        step([0.0, -s, 0.0]),
    ]
}

/// Upper bound on the left-invariant metric `d_G`.
///
/// Minimises the chain sum over chains of at most `depth` links whose
/// intermediate points come from a fixed midpoint set (axis splits, the
/// half-way point in Mal'cev coordinates, and commutator legs of length `√|c|`). Depth 1 is
/// `min(|κ(g⁻¹h)|, |κ(h⁻¹g)|)`. Non-increasing in `depth`.
pub fn d_g_upper(g: &HeisElement, h: &HeisElement, depth: u32) -> f64 {
    assert!(depth >= 1, "chain depth must be at least 1");
    let direct = d_one_step(g, h);
    if depth == 1 || direct == 0.0 {
        return direct;
    }
    midpoints(g, h)
        .iter()
        .map(|m| d_one_step(g, m) + d_g_upper(m, h, depth - 1))
        .fold(direct, f64::min)
}

// Search over γ in the window for d(g, γh), skipping γ whose x or y offset
// already exceeds the best value found.
fn lattice_search(g: &HeisElement, h: &HeisElement, window: i64, mut best: f64) -> f64 {
    for a in -window..=window {
        if (h.x + a as f64 - g.x).abs() >= best {
            continue;
        }
        for b in -window..=window {
            if (h.y + b as f64 - g.y).abs() >= best {
                continue;
            }
            for c in -window..=window {
                let moved = LatticeElement::new(a, b, c).act(h);
                best = best.min(d_one_step(g, &moved));
            }
        }
    }
    best
}

/// Upper bound on the nilmanifold metric: the minimum of the depth-1 bound
/// over lattice translates with entries in `[-window, window]`, taken in
/// both orders so the result is symmetric.
pub fn d_nil(p: &NilPoint, q: &NilPoint, window: i64) -> f64 {
    assert!(window >= 1, "lattice window must be at least 1");
    let best = lattice_search(&p.rep, &q.rep, window, f64::INFINITY);
    lattice_search(&q.rep, &p.rep, window, best)
}

/// `l^∞` product of the circle metric and [`d_nil`].
pub fn d_prod(a: &ProductPoint, b: &ProductPoint, window: i64) -> f64 {
    let dt = circle_dist(a.t, b.t);
    dt.max(d_nil(&a.p, &b.p, window))
}
