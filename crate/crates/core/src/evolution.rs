//! Leapfrog (velocity Verlet) integration of the perturbation equation
//!
//! ```text
//! w_tt = Δw + w - 3 th² w - 3 th w² - w³
//! ```
//!
//! on the x-Dirichlet, y-periodic grid, with its discrete energy, support
//! measurement and standard initial data.

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::fields::{Columnar, Grid1D, ScalarField3, TransverseGrid};
use crate::kink;

pub use crate::runner::{run, run_with, DiagnosticSample, ProbeSample, ProbeValues, RunObserver, RunReport};

/// |w| above this is treated as blow-up.
pub const BLOWUP_THRESHOLD: f64 = 10.0;
/// Largest admissible dt / min(dx, dy).
pub const MAX_DT_FACTOR: f64 = 0.4;

/// Grids plus the sampled kink coefficients of the equation.
#[derive(Clone, Debug)]
pub struct Model {
    gx: Grid1D,
    gy: TransverseGrid,
    th: Vec<f64>,
    /// 1 - 3 th²
    lin: Vec<f64>,
    /// 3 th
    quad: Vec<f64>,
}

impl Model {
    pub fn new(gx: &Grid1D, gy: &TransverseGrid) -> Self {
        let th = gx.sample(kink::th);
        Self {
            lin: th.iter().map(|t| 1.0 - 3.0 * t * t).collect(),
            quad: th.iter().map(|t| 3.0 * t).collect(),
            th,
            gx: gx.clone(),
            gy: gy.clone(),
        }
    }
    pub fn gx(&self) -> &Grid1D {
        &self.gx
    }
    pub fn gy(&self) -> &TransverseGrid {
        &self.gy
    }
    /// Largest stable time step, dt_factor · min(dx, dy).
    pub fn max_dt(&self) -> f64 {
        MAX_DT_FACTOR * self.gx.dx().min(self.gy.dy())
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt.abs() <= self.max_dt() * (1.0 + 1e-12) && dt != 0.0) {
            return Err(LabError::Invalid(format!(
                "time step {dt} violates 0 < |dt| <= {}",
                self.max_dt()
            )));
        }
        Ok(())
    }

    /// Acceleration of one x-column given its four transverse neighbours.
    #[inline]
    fn accel_column(&self, c: &[f64], nb: [&[f64]; 4], out: &mut [f64]) {
        let n = c.len();
        let ix2 = 1.0 / (self.gx.dx() * self.gx.dx());
        let iy2 = 1.0 / (self.gy.dy() * self.gy.dy());
        let [e, w, nn, s] = nb;
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let u = c[i];
            let lap = (c[i - 1] - 2.0 * u + c[i + 1]) * ix2 + (e[i] + w[i] + nn[i] + s[i] - 4.0 * u) * iy2;
            out[i] = lap + u * (self.lin[i] - u * (self.quad[i] + u));
        }
    }

    /// Writes w_tt for the field `w` into `out`.
    fn accel_into(&self, w: &[f64], out: &mut [f64]) {
        let n = self.gx.n_x();
        let ny = self.gy.n_y();
        out.par_chunks_mut(n * ny).enumerate().for_each(|(iy2, plane)| {
            let up2 = (iy2 + 1) % ny;
            let dn2 = (iy2 + ny - 1) % ny;
            let col = |a: usize, b: usize| &w[n * (a + ny * b)..n * (a + ny * b) + n];
            for iy1 in 0..ny {
                let up1 = (iy1 + 1) % ny;
                let dn1 = (iy1 + ny - 1) % ny;
                self.accel_column(
                    col(iy1, iy2),
                    [col(up1, iy2), col(dn1, iy2), col(iy1, up2), col(iy1, dn2)],
                    &mut plane[n * iy1..n * iy1 + n],
                );
            }
        });
    }
}

/// Perturbation and its time derivative at time t.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub w: ScalarField3,
    pub w_t: ScalarField3,
}

impl WaveState {
    pub fn zeros(gx: &Grid1D, gy: &TransverseGrid) -> Self {
        Self {
            t: 0.0,
            w: ScalarField3::zeros(gx.n_x(), gy.n_y()),
            w_t: ScalarField3::zeros(gx.n_x(), gy.n_y()),
        }
    }

    /// Zeroes both fields on the x-boundary nodes.
    pub fn enforce_dirichlet(&mut self) {
        for f in [&mut self.w, &mut self.w_t] {
            let n = f.n_x();
            for c in f.values_mut().chunks_mut(n) {
                c[0] = 0.0;
                c[n - 1] = 0.0;
            }
        }
    }

    fn check(&self, m: &Model) -> Result<()> {
        self.w.check(&m.gx, &m.gy)?;
        self.w_t.check(&m.gx, &m.gy)
    }
}

/// w_tt for the state.
pub fn rhs_w(m: &Model, s: &WaveState) -> Result<ScalarField3> {
    s.check(m)?;
    let mut out = ScalarField3::zeros(m.gx.n_x(), m.gy.n_y());
    m.accel_into(s.w.values(), out.values_mut());
    Ok(out)
}

/// One velocity-Verlet step of size `dt` (negative dt runs backwards).
pub fn step(m: &Model, s: &WaveState, dt: f64) -> Result<WaveState> {
    let mut it = Integrator::new(m.clone(), s.clone())?;
    it.advance(dt)?;
    Ok(it.into_state())
}

/// Stepper that keeps the acceleration of the current state, so each step
/// costs one force evaluation.
#[derive(Clone, Debug)]
pub struct Integrator {
    model: Model,
    state: WaveState,
    accel: ScalarField3,
}

impl Integrator {
    pub fn new(model: Model, state: WaveState) -> Result<Self> {
        state.check(&model)?;
        let accel = rhs_w(&model, &state)?;
        Ok(Self { model, state, accel })
    }

    pub fn state(&self) -> &WaveState {
        &self.state
    }
    pub fn model(&self) -> &Model {
        &self.model
    }
    pub fn into_state(self) -> WaveState {
        self.state
    }

    /// Advances by `dt`; returns max |w| after the step.
    pub fn advance(&mut self, dt: f64) -> Result<f64> {
        self.model.check_dt(dt)?;
        let half = 0.5 * dt;
        let n = self.model.gx.n_x();
        let chunk = n * self.model.gy.n_y();
        let w = self.state.w.values_mut();
        let v = self.state.w_t.values_mut();
        let a = self.accel.values();
        // Kick and drift, fused; also tracks the largest amplitude.
        let maxes: Vec<f64> = w
            .par_chunks_mut(chunk)
            .zip(v.par_chunks_mut(chunk))
            .zip(a.par_chunks(chunk))
            .map(|((wp, vp), ap)| {
                let mut m = 0.0_f64;
                for i in 0..wp.len() {
                    let vi = vp[i] + half * ap[i];
                    vp[i] = vi;
                    let wi = wp[i] + dt * vi;
                    wp[i] = wi;
                    m = m.max(wi.abs());
                    if wi.is_nan() {
                        m = f64::NAN;
                    }
                }
                m
            })
            .collect();
        let t_new = self.state.t + dt;
        let mut wmax = 0.0_f64;
        for m in maxes {
            if m.is_nan() {
                return Err(LabError::BlowUp {
                    t: t_new,
                    detail: "non-finite value in w".into(),
                });
            }
            wmax = wmax.max(m);
        }
        if wmax > BLOWUP_THRESHOLD || !wmax.is_finite() {
            return Err(LabError::BlowUp {
                t: t_new,
                detail: format!("max |w| = {wmax:e} exceeds {BLOWUP_THRESHOLD}"),
            });
        }
        self.model.accel_into(self.state.w.values(), self.accel.values_mut());
        self.state
            .w_t
            .values_mut()
            .par_chunks_mut(chunk)
            .zip(self.accel.values().par_chunks(chunk))
            .for_each(|(vp, ap)| {
                for (vi, ai) in vp.iter_mut().zip(ap) {
                    *vi += half * ai;
                }
            });
        self.state.t = t_new;
        Ok(wmax)
    }
}

/// Discrete energy conserved by the semi-discrete system:
/// dV Σ [½ w_t² + ½ Σ_edges (Δw/h)² + ½(3th² - 1) w² + th w³ + ¼ w⁴].
pub fn discrete_energy(m: &Model, s: &WaveState) -> Result<f64> {
    s.check(m)?;
    let n = m.gx.n_x();
    let ny = m.gy.n_y();
    let dx = m.gx.dx();
    let dy = m.gy.dy();
    let w = s.w.values();
    let v = s.w_t.values();
    let parts: Vec<f64> = (0..ny)
        .into_par_iter()
        .map(|iy2| {
            let mut acc = 0.0;
            let up2 = (iy2 + 1) % ny;
            for iy1 in 0..ny {
                let up1 = (iy1 + 1) % ny;
                let o = n * (iy1 + ny * iy2);
                let c = &w[o..o + n];
                let cv = &v[o..o + n];
                let e = &w[n * (up1 + ny * iy2)..n * (up1 + ny * iy2) + n];
                let nn = &w[n * (iy1 + ny * up2)..n * (iy1 + ny * up2) + n];
                for i in 0..n {
                    let u = c[i];
                    let th = m.th[i];
                    let mut d = 0.5 * cv[i] * cv[i]
                        + 0.5 * (3.0 * th * th - 1.0) * u * u
                        + th * u * u * u
                        + 0.25 * u * u * u * u;
                    let gy1 = (e[i] - u) / dy;
                    let gy2 = (nn[i] - u) / dy;
                    d += 0.5 * (gy1 * gy1 + gy2 * gy2);
                    if i + 1 < n {
                        let gx = (c[i + 1] - u) / dx;
                        d += 0.5 * gx * gx;
                    }
                    acc += d;
                }
            }
            acc
        })
        .collect();
    Ok(parts.iter().sum::<f64>() * dx * dy * dy)
}

/// Radius of the region where |w| or |w_t| exceeds `tol`, measured from the
/// origin with the periodic transverse distance.
pub fn support_radius(m: &Model, s: &WaveState, tol: f64) -> f64 {
    let n = m.gx.n_x();
    let ny = m.gy.n_y();
    let parts: Vec<f64> = (0..ny)
        .into_par_iter()
        .map(|iy2| {
            let y2 = m.gy.abs_y(iy2);
            let mut r = 0.0_f64;
            for iy1 in 0..ny {
                let y1 = m.gy.abs_y(iy1);
                let o = n * (iy1 + ny * iy2);
                let c = &s.w.values()[o..o + n];
                let cv = &s.w_t.values()[o..o + n];
                for i in 0..n {
                    if c[i].abs() > tol || cv[i].abs() > tol {
                        let x = m.gx.x(i);
                        r = r.max((x * x + y1 * y1 + y2 * y2).sqrt());
                    }
                }
            }
            r
        })
        .collect();
    parts.into_iter().fold(0.0, f64::max)
}

/// Largest |w| or |w_t| on the nodes adjacent to the x-boundary and on the
/// periodic seam of the transverse square.  Returns (x-edge, y-seam).
pub fn edge_amplitudes(m: &Model, s: &WaveState) -> (f64, f64) {
    let n = m.gx.n_x();
    let ny = m.gy.n_y();
    let mut ex = 0.0_f64;
    let mut ey = 0.0_f64;
    for f in [&s.w, &s.w_t] {
        for iy2 in 0..ny {
            for iy1 in 0..ny {
                let c = f.column(iy1, iy2);
                ex = ex.max(c[1].abs()).max(c[n - 2].abs());
                if iy1 == 0 || iy2 == 0 {
                    ey = ey.max(c.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
                }
            }
        }
    }
    (ex, ey)
}

/// Smooth compactly supported bump ε·exp(1/((r/ρ)² - 1)) of radius ρ
/// centred at (x_c, 0, 0), zero outside.
pub fn bump(x: f64, y1: f64, y2: f64, eps: f64, radius: f64, x_c: f64) -> f64 {
    let r2 = ((x - x_c) * (x - x_c) + y1 * y1 + y2 * y2) / (radius * radius);
    if r2 >= 1.0 {
        0.0
    } else {
        eps * (1.0 / (r2 - 1.0)).exp()
    }
}

/// Initial state with w₀ a bump supported in the ball of radius `k` about
/// the origin (centre offset `x_c` along x, radius k - |x_c|), w₁ = 0.
pub fn bump_initial_state(gx: &Grid1D, gy: &TransverseGrid, eps: f64, k: f64, x_c: f64) -> WaveState {
    let radius = k - x_c.abs();
    let mut s = WaveState {
        t: 0.0,
        w: ScalarField3::from_fn(gx, gy, |x, a, b| bump(x, a, b, eps, radius, x_c)),
        w_t: ScalarField3::zeros(gx.n_x(), gy.n_y()),
    };
    s.enforce_dirichlet();
    s
}
