//! The kink profile, its derivatives and the internal mode, both as analytic
//! functions and sampled on a grid.

use crate::fields::Grid1D;

/// Scale of the kink: th(x) = tanh(x / KINK_SCALE).
pub const KINK_SCALE: f64 = std::f64::consts::SQRT_2;

#[inline]
fn sech(s: f64) -> f64 {
    1.0 / s.cosh()
}

/// Kink profile tanh(x/√2).
#[inline]
pub fn th(x: f64) -> f64 {
    (x / KINK_SCALE).tanh()
}

/// First derivative of the kink, sech²(x/√2)/√2.
#[inline]
pub fn th_d1(x: f64) -> f64 {
    let c = sech(x / KINK_SCALE);
    c * c / KINK_SCALE
}

/// Second derivative of the kink, -sech²·tanh.
#[inline]
pub fn th_d2(x: f64) -> f64 {
    let s = x / KINK_SCALE;
    let c = sech(s);
    -c * c * s.tanh()
}

/// Third derivative of the kink, (2 - 3 sech²) th′.
#[inline]
pub fn th_d3(x: f64) -> f64 {
    let c = sech(x / KINK_SCALE);
    (2.0 - 3.0 * c * c) * th_d1(x)
}

/// Unnormalized internal mode sinh(s)/cosh²(s), s = x/√2.
#[inline]
pub fn phi_tilde(x: f64) -> f64 {
    let s = x / KINK_SCALE;
    s.tanh() * sech(s)
}

#[inline]
pub fn phi_tilde_d1(x: f64) -> f64 {
    let c = sech(x / KINK_SCALE);
    c * (2.0 * c * c - 1.0) / KINK_SCALE
}

#[inline]
pub fn phi_tilde_d2(x: f64) -> f64 {
    let s = x / KINK_SCALE;
    let c = sech(s);
    0.5 * c * s.tanh() * (1.0 - 6.0 * c * c)
}

/// Potential of the linearized operator, -3 sech²(x/√2).
#[inline]
pub fn potential(x: f64) -> f64 {
    let c = sech(x / KINK_SCALE);
    -3.0 * c * c
}

/// Bounded zero-energy solution sech² - 2 tanh² (argument x/√2).
#[inline]
pub fn resonance(x: f64) -> f64 {
    let s = x / KINK_SCALE;
    let c = sech(s);
    let t = s.tanh();
    c * c - 2.0 * t * t
}

/// Ground-state profile sech²(x/√2) (eigenvalue -2).
#[inline]
pub fn ground_state(x: f64) -> f64 {
    let c = sech(x / KINK_SCALE);
    c * c
}

/// Sampled kink data on a grid.
#[derive(Clone, Debug)]
pub struct KinkTables {
    pub grid: Grid1D,
    pub th: Vec<f64>,
    pub th1: Vec<f64>,
    pub th2: Vec<f64>,
    pub th3: Vec<f64>,
    /// Internal mode normalized in the grid's trapezoid inner product.
    pub phi: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    /// ‖φ̃‖₂ by trapezoid quadrature on the grid.
    pub norm_phi_tilde: f64,
}

impl KinkTables {
    /// Internal mode at an arbitrary point, with the grid normalization.
    pub fn phi_at(&self, x: f64) -> f64 {
        phi_tilde(x) / self.norm_phi_tilde
    }
}

pub fn build_kink_tables(g: &Grid1D) -> KinkTables {
    let pt = g.sample(phi_tilde);
    let norm = g.norm(&pt);
    KinkTables {
        grid: g.clone(),
        th: g.sample(th),
        th1: g.sample(th_d1),
        th2: g.sample(th_d2),
        th3: g.sample(th_d3),
        phi: pt.iter().map(|v| v / norm).collect(),
        phi1: g.sample(|x| phi_tilde_d1(x) / norm),
        phi2: g.sample(|x| phi_tilde_d2(x) / norm),
        norm_phi_tilde: norm,
    }
}
