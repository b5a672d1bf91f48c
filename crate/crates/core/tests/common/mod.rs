//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod normal_form;

use kinklab::hyperbolic::{HyperField, HyperGrid};

/// Refinement level l of the manufactured-field grid: T ∈ [3, 5],
/// R ∈ [0.2, 2.2], h = 0.1 / 2^l in T and R, 32·2^l angles.
pub fn hyper_level(l: u32, k: f64) -> HyperGrid {
    let s = 1u32 << l;
    let h = 0.1 / s as f64;
    let n = 20 * s as usize + 1;
    HyperGrid::new(3.0, h, n, 0.2, h, n, 32 * s as usize, k).unwrap()
}

/// Window kept clear of the one-sided stencils at every level.
pub const T_WINDOW: (f64, f64) = (3.5, 4.5);
pub const R_WINDOW: (f64, f64) = (0.7, 1.7);

/// Largest |u| over grid points with T and R inside the given windows.
pub fn window_max(u: &HyperField, t: (f64, f64), r: (f64, f64)) -> f64 {
    let g = &u.grid;
    let eps = 1e-9;
    let mut best = 0.0_f64;
    for j in 0..g.n_t {
        let tj = g.t_at(j);
        if tj < t.0 - eps || tj > t.1 + eps {
            continue;
        }
        for m in 0..g.n_r {
            let rm = g.r_at(m);
            if rm < r.0 - eps || rm > r.1 + eps {
                continue;
            }
            for n in 0..g.n_theta {
                for v in u.point(j, m, n) {
                    best = best.max(v.abs());
                }
            }
        }
    }
    best
}

pub fn in_window(u: &HyperField) -> f64 {
    window_max(u, T_WINDOW, R_WINDOW)
}

/// log₂ of the error ratio under halving of the step.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Outcome of a convergence study of a residual that should vanish in
/// the continuum limit.
#[derive(Clone, Copy, Debug)]
pub enum Convergence {
    /// Residual at rounding level relative to the scale at every level.
    Exact { rel: f64 },
    /// Measured order from the two finest levels.
    Order { order: f64, finest: f64 },
}

impl Convergence {
    pub fn from_levels(residuals: &[f64], scale: f64) -> Self {
        let worst = residuals.iter().fold(0.0_f64, |m, r| m.max(*r));
        if worst <= 1e-10 * scale {
            return Convergence::Exact { rel: worst / scale };
        }
        let n = residuals.len();
        Convergence::Order {
            order: observed_order(residuals[n - 2], residuals[n - 1]),
            finest: residuals[n - 1],
        }
    }

    /// Second order (or exact) within the [1.8, 2.2] band.
    pub fn is_second_order(&self) -> bool {
        match self {
            Convergence::Exact { .. } => true,
            Convergence::Order { order, .. } => (1.8..=2.2).contains(order),
        }
    }
}

/// Manufactured field on the hyperboloidal chart with nontrivial
/// dependence on all three variables.
pub fn manufactured(t: f64, r: f64, th: f64) -> f64 {
    (0.7 * t).cos() * (-(r - 1.0) * (r - 1.0)).exp() * (1.0 + 0.5 * th.cos() + 0.3 * (2.0 * th).sin())
}

/// A second manufactured field for bilinear forms.
pub fn manufactured2(t: f64, r: f64, th: f64) -> f64 {
    (0.4 * t).sin() * (1.0 + 0.2 * t) * (-0.5 * r * r).exp() * (1.0 + 0.4 * th.sin())
}

/// Runs `residual` on refinement levels 0, 1, 2 of [`hyper_level`] and
/// classifies the result.  The closure returns (residual, scale).
pub fn study(k: f64, residual: impl Fn(&HyperGrid) -> (f64, f64)) -> Convergence {
    let mut res = Vec::new();
    let mut scale = 0.0_f64;
    for l in 0..3 {
        let (r, s) = residual(&hyper_level(l, k));
        res.push(r);
        scale = scale.max(s);
    }
    Convergence::from_levels(&res, scale)
}

/// Analytic test function f(t, y) of the flat variables and its □f.
pub fn flat_field(t: f64, y1: f64, y2: f64) -> f64 {
    let s = 50.0;
    let r2 = y1 * y1 + y2 * y2;
    (0.8 * t).cos() * (-r2 / s).exp() * (1.0 + 0.1 * y1)
}

pub fn flat_field_box(t: f64, y1: f64, y2: f64) -> f64 {
    let s = 50.0;
    let r2 = y1 * y1 + y2 * y2;
    let e = (-r2 / s).exp();
    let lap = e * (4.0 * r2 / (s * s) - 4.0 / s) + 0.1 * y1 * e * (4.0 * r2 / (s * s) - 8.0 / s);
    let g = e * (1.0 + 0.1 * y1);
    -0.64 * (0.8 * t).cos() * g - (0.8 * t).cos() * lap
}

fn z(j: usize) -> impl Fn(&HyperField) -> HyperField {
    move |u| kinklab::hyperbolic::apply_z(j, u).unwrap()
}

/// [A, B]u with scale max|A B u| over the window.
fn commutator(a: &dyn Fn(&HyperField) -> HyperField, b: &dyn Fn(&HyperField) -> HyperField, u: &HyperField) -> (f64, f64) {
    let ab = a(&b(u));
    let ba = b(&a(u));
    (in_window(&ab.sub(&ba).unwrap()), in_window(&ab))
}

/// [Z, 𝓑](f, g) = Z𝓑(f, g) - 𝓑(Zf, g) - 𝓑(f, Zg) minus `expected`.
fn bilinear_commutator(
    zf: &dyn Fn(&HyperField) -> HyperField,
    b: &dyn Fn(&HyperField, &HyperField) -> HyperField,
    f: &HyperField,
    g: &HyperField,
    expected: &dyn Fn(&HyperField) -> HyperField,
) -> (f64, f64) {
    let bfg = b(f, g);
    let lhs = zf(&bfg).sub(&b(&zf(f), g)).unwrap().sub(&b(f, &zf(g))).unwrap();
    (in_window(&lhs.sub(&expected(&bfg)).unwrap()), in_window(&zf(&bfg)))
}

/// Residual studies of the geometric identities of the hyperboloidal chart
/// on manufactured fields.  Each entry should converge at second order or
/// hold exactly on the grid.
pub fn geometry_identities() -> Vec<(String, Convergence)> {
    use kinklab::hyperbolic::*;
    let k = 1.0;
    let p = |u: &HyperField| operator_p(u).unwrap();
    let lap = |u: &HyperField| delta_hyp(u).unwrap();
    let dt = |u: &HyperField| u.d_t().unwrap();
    let tdt = |u: &HyperField| u.d_t().unwrap().times_t();
    let q0 = |f: &HyperField, g: &HyperField| null_q0_hyper(f, g).unwrap();
    let q1 = |f: &HyperField, g: &HyperField| null_q0_hyper(f, g).unwrap().times_t().times_t();
    let u_of = |g: &HyperGrid| HyperField::from_fn(g, manufactured);
    let v_of = |g: &HyperGrid| HyperField::from_fn(g, manufactured2);
    let zero = |u: &HyperField| u.scaled(0.0);
    let mut out = Vec::new();

    for j in 0..3 {
        out.push((format!("[Z{j}, P] = 0"), study(k, |g| commutator(&z(j), &p, &u_of(g)))));
    }
    for j in 0..4 {
        out.push((format!("[Z{j}, d_T] = 0"), study(k, |g| commutator(&z(j), &dt, &u_of(g)))));
    }
    for j in 0..4 {
        out.push((format!("[Z{j}, Delta_hyp] = 0"), study(k, |g| commutator(&z(j), &lap, &u_of(g)))));
    }
    out.push((
        "[d_T, P] = (2/T^3) Delta_hyp".into(),
        study(k, |g| {
            let u = u_of(g);
            let c = dt(&p(&u)).sub(&p(&dt(&u))).unwrap();
            let rhs = lap(&u).mul(&HyperField::from_fn(g, |t, _, _| 2.0 / (t * t * t))).unwrap();
            (in_window(&c.sub(&rhs).unwrap()), in_window(&rhs))
        }),
    ));
    out.push((
        "Delta_hyp = Z1^2 + Z2^2 - Z0^2".into(),
        study(k, |g| {
            let u = u_of(g);
            let a = lap(&u);
            (in_window(&a.sub(&delta_hyp_from_z(&u).unwrap()).unwrap()), in_window(&a))
        }),
    ));
    out.push((
        "d_t^2 - Delta_y = P + (2/T) d_T".into(),
        study(k, |g| {
            let f = HyperField::from_fn(g, |tt, r, th| {
                let (t, y) = from_hyper(HyperPoint { t_hyp: tt, r, theta: th }, k);
                flat_field(t, y[0], y[1])
            });
            let exact = HyperField::from_fn(g, |tt, r, th| {
                let (t, y) = from_hyper(HyperPoint { t_hyp: tt, r, theta: th }, k);
                flat_field_box(t, y[0], y[1])
            });
            let b = box_hyper(&f).unwrap();
            (in_window(&b.sub(&exact).unwrap()), in_window(&exact))
        }),
    ));
    out.push((
        "Morawetz flux identity for K".into(),
        study(k, |g| {
            let u = u_of(g);
            let scale = in_window(&morawetz_k(&u).unwrap().mul(&p(&u)).unwrap());
            (in_window(&morawetz_identity_residual(&u).unwrap()), scale)
        }),
    ));
    out.push((
        "energy identity for T^2 d_T".into(),
        study(k, |g| {
            let u = u_of(g);
            let scale = in_window(&dt(&u).mul(&p(&u)).unwrap().times_t().times_t());
            (in_window(&t_multiplier_identity_residual(&u).unwrap()), scale)
        }),
    ));
    for j in 0..3 {
        out.push((
            format!("[Z{j}, Q0] = 0"),
            study(k, |g| bilinear_commutator(&z(j), &q0, &u_of(g), &v_of(g), &zero)),
        ));
    }
    for j in 0..3 {
        out.push((
            format!("[Z{j}, Q1] = 0"),
            study(k, |g| bilinear_commutator(&z(j), &q1, &u_of(g), &v_of(g), &zero)),
        ));
    }
    out.push((
        "[T d_T, Q1] = 0".into(),
        study(k, |g| bilinear_commutator(&tdt, &q1, &u_of(g), &v_of(g), &zero)),
    ));
    out.push((
        "[T d_T, Q0] = -2 Q0".into(),
        study(k, |g| bilinear_commutator(&tdt, &q0, &u_of(g), &v_of(g), &|b| b.scaled(-2.0))),
    ));
    out
}

/// Compactly supported smooth bump of radius `rho` centred at `c`.
pub fn bump_1d(x: f64, c: f64, rho: f64) -> f64 {
    let r = ((x - c) / rho).powi(2);
    if r < 1.0 {
        (1.0 / (r - 1.0)).exp()
    } else {
        0.0
    }
}

/// Sup-norm decay of cos(tB) P_c u₀ for a bump u₀ of radius 2 centred at
/// x = 1, sampled every 0.5 over t ∈ [10, 100].  The box |x| ≤ 106 keeps
/// the unit-speed wave front away from the walls.
pub fn dispersive_fit() -> kinklab::diagnostics::DecayFit {
    use kinklab::diagnostics::{fit_decay, DecaySeries};
    use kinklab::spectral::{build_h, Propagator};
    let g = kinklab::fields::Grid1D::with_spacing(106.0, 0.2).unwrap();
    let h = build_h(&g).unwrap();
    let u0 = g.sample(|x| bump_1d(x, 1.0, 2.0));
    let c = h.cont_coefficients(&u0).unwrap();
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for i in 0..=180 {
        let t = 10.0 + 0.5 * i as f64;
        let u = h.cont_synthesis(&h.propagate_coefficients(&c, t, Propagator::Cos));
        ts.push(t);
        vs.push(u.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    fit_decay(&DecaySeries::new(ts, vs).unwrap())
}

/// Closed-form transmission coefficient of the reflectionless well
/// -3 sech²(x/√2): T = Π_{n=1,2} (q + i n) / (q - i n) with q = √2 k, whose
/// poles q = i n are the bound states.
pub fn transmission_closed_form(k: f64) -> num_complex::Complex64 {
    use num_complex::Complex64;
    let q = std::f64::consts::SQRT_2 * k;
    (1..=2)
        .map(|n| Complex64::new(q, n as f64) / Complex64::new(q, -(n as f64)))
        .product()
}
