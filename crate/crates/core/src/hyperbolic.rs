//! Hyperboloidal coordinates inside the light cone of the shifted origin,
//!
//! ```text
//! t + 2K = T cosh R,   y = T sinh R (cos θ, sin θ),
//! ```
//!
//! fields sampled on (T, R, θ) tensor grids, the vector fields Z₀..Z₃, the
//! operator P = ∂_T² - Δ_hyp/T², null forms and the Morawetz fluxes and
//! energies.  All derivatives are second-order finite differences; fields
//! may carry an extra inner axis (the x-columns of Ψ) that the operators
//! act on pointwise.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::fields::{interpolate_columns, Columnar, Grid1D, TransverseGrid};
use crate::quadrature::cubic_weights;

/// Point in hyperboloidal coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HyperPoint {
    pub t_hyp: f64,
    pub r: f64,
    pub theta: f64,
}

/// (t, y) → (T, R, θ) for the cone with vertex at t = -2K.
pub fn to_hyper(t: f64, y: [f64; 2], k: f64) -> Result<HyperPoint> {
    let tau = t + 2.0 * k;
    let ry = (y[0] * y[0] + y[1] * y[1]).sqrt();
    if !(tau > ry) {
        return Err(LabError::Invalid(format!(
            "point (t = {t}, |y| = {ry}) lies outside the light cone t + 2K > |y|"
        )));
    }
    let th = ((tau - ry) * (tau + ry)).sqrt();
    Ok(HyperPoint {
        t_hyp: th,
        r: (ry / th).asinh(),
        theta: y[1].atan2(y[0]),
    })
}

/// (T, R, θ) → (t, y).
pub fn from_hyper(h: HyperPoint, k: f64) -> (f64, [f64; 2]) {
    let s = h.t_hyp * h.r.sinh();
    (
        h.t_hyp * h.r.cosh() - 2.0 * k,
        [s * h.theta.cos(), s * h.theta.sin()],
    )
}

/// Tensor grid T_j = t0 + j dT, R_m = r0 + m dR, θ_n = 2π n / n_θ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_t: usize,
    pub r0: f64,
    pub dr: f64,
    pub n_r: usize,
    pub n_theta: usize,
    /// Vertex offset K of the cone.
    pub k: f64,
}

impl HyperGrid {
    pub fn new(t0: f64, dt: f64, n_t: usize, r0: f64, dr: f64, n_r: usize, n_theta: usize, k: f64) -> Result<Self> {
        if !(t0 > 0.0 && dt > 0.0 && dr > 0.0 && r0 >= 0.0) || n_t == 0 || n_r < 3 || n_theta < 4 {
            return Err(LabError::Grid(format!(
                "hyperboloidal grid T0={t0} dT={dt} nT={n_t} R0={r0} dR={dr} nR={n_r} nθ={n_theta}"
            )));
        }
        Ok(Self { t0, dt, n_t, r0, dr, n_r, n_theta, k })
    }
    #[inline]
    pub fn t_at(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }
    #[inline]
    pub fn r_at(&self, m: usize) -> f64 {
        self.r0 + m as f64 * self.dr
    }
    #[inline]
    pub fn theta_at(&self, n: usize) -> f64 {
        std::f64::consts::TAU * n as f64 / self.n_theta as f64
    }
    pub fn dtheta(&self) -> f64 {
        std::f64::consts::TAU / self.n_theta as f64
    }
    pub fn len(&self) -> usize {
        self.n_t * self.n_r * self.n_theta
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Samples on a [`HyperGrid`], with `inner` values per grid point.
/// Layout: inner fastest, then θ, then R, then T.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperField {
    pub grid: HyperGrid,
    pub inner: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Axis {
    T,
    R,
    Theta,
}

impl HyperField {
    pub fn zeros(grid: &HyperGrid, inner: usize) -> Self {
        Self {
            grid: grid.clone(),
            inner,
            data: vec![0.0; grid.len() * inner],
        }
    }

    pub fn from_fn(grid: &HyperGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, 1);
        for j in 0..grid.n_t {
            for m in 0..grid.n_r {
                for n in 0..grid.n_theta {
                    let i = out.index(j, m, n);
                    out.data[i] = f(grid.t_at(j), grid.r_at(m), grid.theta_at(n));
                }
            }
        }
        out
    }

    #[inline]
    pub fn index(&self, j: usize, m: usize, n: usize) -> usize {
        ((j * self.grid.n_r + m) * self.grid.n_theta + n) * self.inner
    }

    #[inline]
    pub fn get(&self, j: usize, m: usize, n: usize) -> f64 {
        self.data[self.index(j, m, n)]
    }

    /// Values at one grid point (length `inner`).
    pub fn point(&self, j: usize, m: usize, n: usize) -> &[f64] {
        let i = self.index(j, m, n);
        &self.data[i..i + self.inner]
    }

    pub fn point_mut(&mut self, j: usize, m: usize, n: usize) -> &mut [f64] {
        let i = self.index(j, m, n);
        &mut self.data[i..i + self.inner]
    }

    fn same_shape(&self, o: &HyperField) -> Result<()> {
        if self.grid != o.grid || self.inner != o.inner {
            return Err(LabError::Dimension("hyperboloidal fields on different grids".into()));
        }
        Ok(())
    }

    /// Pointwise combination `f(grid coordinates, a, b)`.
    fn zip_map(&self, o: &HyperField, f: impl Fn(f64, f64, f64, f64, f64) -> f64) -> Result<HyperField> {
        self.same_shape(o)?;
        let mut out = self.clone();
        self.for_each_point(|j, m, n, i| {
            let (t, r, th) = (self.grid.t_at(j), self.grid.r_at(m), self.grid.theta_at(n));
            for q in 0..self.inner {
                out.data[i + q] = f(t, r, th, self.data[i + q], o.data[i + q]);
            }
        });
        Ok(out)
    }

    fn map(&self, f: impl Fn(f64, f64, f64, f64) -> f64) -> HyperField {
        let mut out = self.clone();
        self.for_each_point(|j, m, n, i| {
            let (t, r, th) = (self.grid.t_at(j), self.grid.r_at(m), self.grid.theta_at(n));
            for q in 0..self.inner {
                out.data[i + q] = f(t, r, th, self.data[i + q]);
            }
        });
        out
    }

    fn for_each_point(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        for j in 0..self.grid.n_t {
            for m in 0..self.grid.n_r {
                for n in 0..self.grid.n_theta {
                    f(j, m, n, self.index(j, m, n));
                }
            }
        }
    }

    pub fn scaled(&self, c: f64) -> HyperField {
        self.map(|_, _, _, v| c * v)
    }

    pub fn add(&self, o: &HyperField) -> Result<HyperField> {
        self.zip_map(o, |_, _, _, a, b| a + b)
    }

    pub fn sub(&self, o: &HyperField) -> Result<HyperField> {
        self.zip_map(o, |_, _, _, a, b| a - b)
    }

    pub fn mul(&self, o: &HyperField) -> Result<HyperField> {
        self.zip_map(o, |_, _, _, a, b| a * b)
    }

    /// Multiplies by T.
    pub fn times_t(&self) -> HyperField {
        self.map(|t, _, _, v| t * v)
    }

    fn axis_len_stride(&self, axis: Axis) -> (usize, usize, f64) {
        let g = &self.grid;
        match axis {
            Axis::T => (g.n_t, g.n_r * g.n_theta * self.inner, g.dt),
            Axis::R => (g.n_r, g.n_theta * self.inner, g.dr),
            Axis::Theta => (g.n_theta, self.inner, g.dtheta()),
        }
    }

    /// First (order 1) or second (order 2) derivative along an axis.
    fn diff(&self, axis: Axis, order: usize) -> Result<HyperField> {
        let (len, stride, h) = self.axis_len_stride(axis);
        let periodic = matches!(axis, Axis::Theta);
        if order == 1 && len < 3 && !periodic {
            return Err(LabError::Dimension(format!("need at least 3 samples along the axis, have {len}")));
        }
        if order == 2 && len < 3 {
            return Err(LabError::Dimension(format!(
                "need at least 3 samples for a second derivative, have {len}"
            )));
        }
        let mut out = self.clone();
        let block = len * stride;
        let d = &self.data;
        for base in (0..d.len()).step_by(block) {
            for off in 0..stride {
                let at = |k: usize| d[base + off + k * stride];
                for k in 0..len {
                    let v = if periodic {
                        let kp = (k + 1) % len;
                        let km = (k + len - 1) % len;
                        match order {
                            1 => (at(kp) - at(km)) / (2.0 * h),
                            _ => (at(kp) - 2.0 * at(k) + at(km)) / (h * h),
                        }
                    } else if order == 1 {
                        if k == 0 {
                            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                        } else if k == len - 1 {
                            (3.0 * at(k) - 4.0 * at(k - 1) + at(k - 2)) / (2.0 * h)
                        } else {
                            (at(k + 1) - at(k - 1)) / (2.0 * h)
                        }
                    } else if k == 0 || k == len - 1 {
                        if len >= 4 {
                            let (a, s): (usize, isize) = if k == 0 { (0, 1) } else { (len - 1, -1) };
                            let p = |i: isize| at((a as isize + s * i) as usize);
                            (2.0 * p(0) - 5.0 * p(1) + 4.0 * p(2) - p(3)) / (h * h)
                        } else {
                            (at(0) - 2.0 * at(1) + at(2)) / (h * h)
                        }
                    } else {
                        (at(k + 1) - 2.0 * at(k) + at(k - 1)) / (h * h)
                    };
                    out.data[base + off + k * stride] = v;
                }
            }
        }
        Ok(out)
    }

    pub fn d_t(&self) -> Result<HyperField> {
        self.diff(Axis::T, 1)
    }
    pub fn d_tt(&self) -> Result<HyperField> {
        self.diff(Axis::T, 2)
    }
    pub fn d_r(&self) -> Result<HyperField> {
        self.diff(Axis::R, 1)
    }
    pub fn d_rr(&self) -> Result<HyperField> {
        self.diff(Axis::R, 2)
    }
    pub fn d_theta(&self) -> Result<HyperField> {
        self.diff(Axis::Theta, 1)
    }
    pub fn d_thetatheta(&self) -> Result<HyperField> {
        self.diff(Axis::Theta, 2)
    }

    /// Largest |value| over points with T-index in `jr`, R-index in `mr`.
    pub fn max_abs_in(&self, jr: std::ops::Range<usize>, mr: std::ops::Range<usize>) -> f64 {
        let mut best = 0.0_f64;
        for j in jr {
            for m in mr.clone() {
                for n in 0..self.grid.n_theta {
                    for v in self.point(j, m, n) {
                        best = best.max(v.abs());
                    }
                }
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Klainerman vector field Z_j, j = 0..3, in the (R, θ) chart:
/// Z₀ = ∂_θ, Z₁ = cos θ ∂_R - sin θ coth R ∂_θ,
/// Z₂ = sin θ ∂_R + cos θ coth R ∂_θ, Z₃ = ∂_T.
pub fn apply_z(j: usize, u: &HyperField) -> Result<HyperField> {
    match j {
        0 => u.d_theta(),
        1 | 2 => {
            let ur = u.d_r()?;
            let uth = u.d_theta()?;
            let sign = j == 1;
            ur.zip_map(&uth, move |_, r, th, a, b| {
                let coth = 1.0 / r.tanh();
                if sign {
                    th.cos() * a - th.sin() * coth * b
                } else {
                    th.sin() * a + th.cos() * coth * b
                }
            })
        }
        3 => u.d_t(),
        _ => Err(LabError::Invalid(format!("vector field index {j} not in 0..3"))),
    }
}

/// Δ_hyp u = u_RR + coth R u_R + u_θθ / sinh² R.
pub fn delta_hyp(u: &HyperField) -> Result<HyperField> {
    let urr = u.d_rr()?;
    let ur = u.d_r()?;
    let utt = u.d_thetatheta()?;
    let a = urr.zip_map(&ur, |_, r, _, x, y| x + y / r.tanh())?;
    a.zip_map(&utt, |_, r, _, x, y| x + y / (r.sinh() * r.sinh()))
}

/// Δ_hyp assembled as Z₁² + Z₂² - Z₀².
pub fn delta_hyp_from_z(u: &HyperField) -> Result<HyperField> {
    let z1 = apply_z(1, &apply_z(1, u)?)?;
    let z2 = apply_z(2, &apply_z(2, u)?)?;
    let z0 = apply_z(0, &apply_z(0, u)?)?;
    z1.add(&z2)?.sub(&z0)
}

/// P u = u_TT - Δ_hyp u / T².
pub fn operator_p(u: &HyperField) -> Result<HyperField> {
    if u.grid.n_t < 3 {
        return Err(LabError::Dimension(format!(
            "operator P needs at least 3 T-slices, have {}",
            u.grid.n_t
        )));
    }
    let utt = u.d_tt()?;
    let lap = delta_hyp(u)?;
    utt.zip_map(&lap, |t, _, _, a, b| a - b / (t * t))
}

/// The flat wave operator ∂_t² - Δ_y written in the chart: P + (2/T)∂_T.
pub fn box_hyper(u: &HyperField) -> Result<HyperField> {
    let p = operator_p(u)?;
    let ut = u.d_t()?;
    p.zip_map(&ut, |t, _, _, a, b| a + 2.0 * b / t)
}

/// The null form f_t g_t - ∇f·∇g expressed in the chart:
/// f_T g_T - f_R g_R / T² - f_θ g_θ / (T² sinh² R).
pub fn q0_in_chart(f: &HyperField, g: &HyperField) -> Result<HyperField> {
    f.same_shape(g)?;
    let (ft, fr, fth) = (f.d_t()?, f.d_r()?, f.d_theta()?);
    let (gt, gr, gth) = (g.d_t()?, g.d_r()?, g.d_theta()?);
    let mut out = f.clone();
    f.for_each_point(|j, m, n, i| {
        let t = f.grid.t_at(j);
        let s = f.grid.r_at(m).sinh();
        let _ = n;
        for q in 0..f.inner {
            let k = i + q;
            out.data[k] = ft.data[k] * gt.data[k]
                - fr.data[k] * gr.data[k] / (t * t)
                - fth.data[k] * gth.data[k] / (t * t * s * s);
        }
    });
    Ok(out)
}

/// The null form for the rescaled unknowns:
/// (f_T - f/T)(g_T - g/T) - f_R g_R / T² - f_θ g_θ / (T² sinh² R).
pub fn null_q0_hyper(f: &HyperField, g: &HyperField) -> Result<HyperField> {
    f.same_shape(g)?;
    let (ft, fr, fth) = (f.d_t()?, f.d_r()?, f.d_theta()?);
    let (gt, gr, gth) = (g.d_t()?, g.d_r()?, g.d_theta()?);
    let mut out = f.clone();
    f.for_each_point(|j, m, _n, i| {
        let t = f.grid.t_at(j);
        let s = f.grid.r_at(m).sinh();
        for q in 0..f.inner {
            let k = i + q;
            out.data[k] = (ft.data[k] - f.data[k] / t) * (gt.data[k] - g.data[k] / t)
                - fr.data[k] * gr.data[k] / (t * t)
                - fth.data[k] * gth.data[k] / (t * t * s * s);
        }
    });
    Ok(out)
}

/// 𝓚u = T² cosh R u_T + T sinh R u_R.
pub fn morawetz_k(u: &HyperField) -> Result<HyperField> {
    let ut = u.d_t()?;
    let ur = u.d_r()?;
    ut.zip_map(&ur, |t, r, _, a, b| t * t * r.cosh() * a + t * r.sinh() * b)
}

/// Pointwise Morawetz flux densities from derivative values at (T, R).
pub fn flux_densities(t: f64, r: f64, ut: f64, ur: f64, uth: f64) -> (f64, f64, f64) {
    let (sh, ch) = (r.sinh(), r.cosh());
    let th = r.tanh();
    let p0 = 0.5 * sh * ch * (t * t * ut * ut + 2.0 * t * th * ut * ur + ur * ur + uth * uth / (sh * sh));
    let p1 = 0.5 * sh * sh * (-t * ut * ut - 2.0 / th * ut * ur - ur * ur / t + uth * uth / (t * sh * sh));
    let p2 = -ur * uth / t - ut * uth / th;
    (p0, p1, p2)
}

/// The flux fields 𝓟⁰, 𝓟¹, 𝓟² of the Morawetz identity
/// ∂_T𝓟⁰ + ∂_R𝓟¹ + ∂_θ𝓟² = sinh R (𝓚u)(Pu).
pub fn morawetz_fluxes(u: &HyperField) -> Result<(HyperField, HyperField, HyperField)> {
    let (ut, ur, uth) = (u.d_t()?, u.d_r()?, u.d_theta()?);
    let mut p0 = u.clone();
    let mut p1 = u.clone();
    let mut p2 = u.clone();
    u.for_each_point(|j, m, _n, i| {
        let t = u.grid.t_at(j);
        let r = u.grid.r_at(m);
        for q in 0..u.inner {
            let k = i + q;
            let (a, b, c) = flux_densities(t, r, ut.data[k], ur.data[k], uth.data[k]);
            p0.data[k] = a;
            p1.data[k] = b;
            p2.data[k] = c;
        }
    });
    Ok((p0, p1, p2))
}

/// ∂_T𝓟⁰ + ∂_R𝓟¹ + ∂_θ𝓟² - sinh R (𝓚u)(Pu).
pub fn morawetz_identity_residual(u: &HyperField) -> Result<HyperField> {
    let (p0, p1, p2) = morawetz_fluxes(u)?;
    let div = p0.d_t()?.add(&p1.d_r()?)?.add(&p2.d_theta()?)?;
    let src = morawetz_k(u)?.mul(&operator_p(u)?)?;
    div.zip_map(&src, |_, r, _, d, s| d - r.sinh() * s)
}

/// Residual of the energy identity for the multiplier T² ∂_T:
/// sinh R T² u_T Pu = [½ sinh R (T²u_T² + u_R² + u_θ²/sinh²R)]_T
///   - (sinh R u_R u_T)_R - (u_θ u_T / sinh R)_θ - T sinh R u_T².
pub fn t_multiplier_identity_residual(u: &HyperField) -> Result<HyperField> {
    let (ut, ur, uth) = (u.d_t()?, u.d_r()?, u.d_theta()?);
    let pu = operator_p(u)?;
    let mut e = u.clone();
    let mut fr = u.clone();
    let mut fth = u.clone();
    let mut lhs = u.clone();
    u.for_each_point(|j, m, _n, i| {
        let t = u.grid.t_at(j);
        let sh = u.grid.r_at(m).sinh();
        for q in 0..u.inner {
            let k = i + q;
            let (a, b, c) = (ut.data[k], ur.data[k], uth.data[k]);
            e.data[k] = 0.5 * sh * (t * t * a * a + b * b + c * c / (sh * sh));
            fr.data[k] = sh * b * a;
            fth.data[k] = c * a / sh;
            lhs.data[k] = sh * t * t * a * pu.data[k] + t * sh * a * a;
        }
    });
    let rhs = e.d_t()?.sub(&fr.d_r()?)?.sub(&fth.d_theta()?)?;
    lhs.sub(&rhs)
}

/// Which Morawetz energy to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorawetzEnergy {
    /// ∬ 𝓟⁰ / cosh R dR dθ
    E1,
    /// ½ ∬ sinh R [T² u_T² + u_R² + u_θ² / sinh² R] dR dθ
    E2,
}

/// Quadrature weights along the inner axis (x-columns) for energies.
pub type InnerWeights<'a> = Option<&'a [f64]>;

/// Morawetz energy on T-slice `j`; the flag reports whether |u| at the
/// outermost R ring exceeds `decay_tol` times its maximum on the slice.
pub fn morawetz_energy(u: &HyperField, j: usize, which: MorawetzEnergy, w: InnerWeights) -> Result<(f64, bool)> {
    let (ut, ur, uth) = (u.d_t()?, u.d_r()?, u.d_theta()?);
    let g = &u.grid;
    let t = g.t_at(j);
    let mut total = 0.0;
    for m in 0..g.n_r {
        let r = g.r_at(m);
        let (sh, ch) = (r.sinh(), r.cosh());
        for n in 0..g.n_theta {
            let i = u.index(j, m, n);
            for q in 0..u.inner {
                let k = i + q;
                let (a, b, c) = (ut.data[k], ur.data[k], uth.data[k]);
                let dens = match which {
                    MorawetzEnergy::E1 => flux_densities(t, r, a, b, c).0 / ch,
                    MorawetzEnergy::E2 => 0.5 * sh * (t * t * a * a + b * b + c * c / (sh * sh)),
                };
                total += dens * w.map_or(1.0, |w| w[q]);
            }
        }
    }
    Ok((total * g.dr * g.dtheta(), boundary_not_decayed(u, j)))
}

/// Ẽ(T, u) = ∬ [u_T² + (u_R/T)² + (u_θ/(T sinh R))²] sinh R dR dθ on slice j.
pub fn tilde_energy(u: &HyperField, j: usize, w: InnerWeights) -> Result<f64> {
    let (ut, ur, uth) = (u.d_t()?, u.d_r()?, u.d_theta()?);
    let g = &u.grid;
    let t = g.t_at(j);
    let mut total = 0.0;
    for m in 0..g.n_r {
        let sh = g.r_at(m).sinh();
        for n in 0..g.n_theta {
            let i = u.index(j, m, n);
            for q in 0..u.inner {
                let k = i + q;
                let (a, b, c) = (ut.data[k], ur.data[k] / t, uth.data[k] / (t * sh));
                total += (a * a + b * b + c * c) * sh * w.map_or(1.0, |w| w[q]);
            }
        }
    }
    Ok(total * g.dr * g.dtheta())
}

/// ∬ c(R) |u|² sinh R dR dθ on slice j.
pub fn weighted_l2(u: &HyperField, j: usize, w: InnerWeights) -> f64 {
    let g = &u.grid;
    let mut total = 0.0;
    for m in 0..g.n_r {
        let sh = g.r_at(m).sinh();
        for n in 0..g.n_theta {
            for (q, v) in u.point(j, m, n).iter().enumerate() {
                total += v * v * sh * w.map_or(1.0, |w| w[q]);
            }
        }
    }
    total * g.dr * g.dtheta()
}

/// Whether the outermost R ring of slice j still carries more than 1% of
/// the slice maximum.
pub fn boundary_not_decayed(u: &HyperField, j: usize) -> bool {
    let g = &u.grid;
    let all = u.max_abs_in(j..j + 1, 0..g.n_r);
    let edge = u.max_abs_in(j..j + 1, g.n_r - 1..g.n_r);
    all > 0.0 && edge > 1e-2 * all
}

/// Sampled function of (t, y) on a uniform, non-periodic tensor grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeField {
    pub t0: f64,
    pub dt: f64,
    pub n_t: usize,
    pub y_min: f64,
    pub dy: f64,
    pub n_y: usize,
    /// Layout: y1 fastest, then y2, then t.
    pub data: Vec<f64>,
}

impl SpacetimeField {
    pub fn from_fn(t0: f64, dt: f64, n_t: usize, y_min: f64, dy: f64, n_y: usize, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_t * n_y * n_y);
        for k in 0..n_t {
            for b in 0..n_y {
                for a in 0..n_y {
                    data.push(f(t0 + k as f64 * dt, y_min + a as f64 * dy, y_min + b as f64 * dy));
                }
            }
        }
        Self { t0, dt, n_t, y_min, dy, n_y, data }
    }

    #[inline]
    pub fn index(&self, k: usize, a: usize, b: usize) -> usize {
        a + self.n_y * (b + self.n_y * k)
    }
    pub fn get(&self, k: usize, a: usize, b: usize) -> f64 {
        self.data[self.index(k, a, b)]
    }
    pub fn coords(&self, k: usize, a: usize, b: usize) -> (f64, f64, f64) {
        (
            self.t0 + k as f64 * self.dt,
            self.y_min + a as f64 * self.dy,
            self.y_min + b as f64 * self.dy,
        )
    }

    fn same_shape(&self, o: &SpacetimeField) -> Result<()> {
        if (self.n_t, self.n_y) != (o.n_t, o.n_y) || self.dt != o.dt || self.dy != o.dy {
            return Err(LabError::Dimension("spacetime fields on different grids".into()));
        }
        Ok(())
    }

    /// Derivative along axis 0 (t), 1 (y1) or 2 (y2), order 1 or 2.
    pub fn diff(&self, axis: usize, order: usize) -> SpacetimeField {
        let (len, stride, h) = match axis {
            0 => (self.n_t, self.n_y * self.n_y, self.dt),
            1 => (self.n_y, 1, self.dy),
            _ => (self.n_y, self.n_y, self.dy),
        };
        let mut out = self.clone();
        let d = &self.data;
        for i in 0..d.len() {
            let k = (i / stride) % len;
            let at = |s: isize| d[(i as isize + s * stride as isize) as usize];
            out.data[i] = match (order, k) {
                (1, 0) => (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h),
                (1, k) if k == len - 1 => (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h),
                (1, _) => (at(1) - at(-1)) / (2.0 * h),
                (_, 0) => (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h),
                (_, k) if k == len - 1 => (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / (h * h),
                _ => (at(1) - 2.0 * at(0) + at(-1)) / (h * h),
            };
        }
        out
    }

    fn zip(&self, o: &SpacetimeField, f: impl Fn(f64, f64) -> f64) -> SpacetimeField {
        let mut out = self.clone();
        for (v, (a, b)) in out.data.iter_mut().zip(self.data.iter().zip(&o.data)) {
            *v = f(*a, *b);
        }
        out
    }

    pub fn mul(&self, o: &SpacetimeField) -> Result<SpacetimeField> {
        self.same_shape(o)?;
        Ok(self.zip(o, |a, b| a * b))
    }

    pub fn sub(&self, o: &SpacetimeField) -> Result<SpacetimeField> {
        self.same_shape(o)?;
        Ok(self.zip(o, |a, b| a - b))
    }

    /// Largest |value| over points at least `margin` nodes from every face.
    pub fn interior_max_abs(&self, margin: usize) -> f64 {
        let mut best = 0.0_f64;
        for k in margin..self.n_t.saturating_sub(margin) {
            for b in margin..self.n_y.saturating_sub(margin) {
                for a in margin..self.n_y.saturating_sub(margin) {
                    best = best.max(self.get(k, a, b).abs());
                }
            }
        }
        best
    }
}

/// Q₀(f, g) = f_t g_t - ∇_y f · ∇_y g.
pub fn null_q0(f: &SpacetimeField, g: &SpacetimeField) -> Result<SpacetimeField> {
    f.same_shape(g)?;
    let (ft, f1, f2) = (f.diff(0, 1), f.diff(1, 1), f.diff(2, 1));
    let (gt, g1, g2) = (g.diff(0, 1), g.diff(1, 1), g.diff(2, 1));
    let mut out = f.clone();
    for i in 0..out.data.len() {
        out.data[i] = ft.data[i] * gt.data[i] - f1.data[i] * g1.data[i] - f2.data[i] * g2.data[i];
    }
    Ok(out)
}

/// □f = f_tt - Δ_y f.
pub fn box_y(f: &SpacetimeField) -> SpacetimeField {
    let (a, b, c) = (f.diff(0, 2), f.diff(1, 2), f.diff(2, 2));
    let mut out = f.clone();
    for i in 0..out.data.len() {
        out.data[i] = a.data[i] - b.data[i] - c.data[i];
    }
    out
}

/// Morawetz field K₀f = (τ² + |y|²) f_t + 2τ y·∇f + τ f with τ = t + 2K.
pub fn k0_morawetz(f: &SpacetimeField, k: f64) -> SpacetimeField {
    let (ft, f1, f2) = (f.diff(0, 1), f.diff(1, 1), f.diff(2, 1));
    let mut out = f.clone();
    for kk in 0..f.n_t {
        for b in 0..f.n_y {
            for a in 0..f.n_y {
                let (t, y1, y2) = f.coords(kk, a, b);
                let tau = t + 2.0 * k;
                let i = f.index(kk, a, b);
                out.data[i] = (tau * tau + y1 * y1 + y2 * y2) * ft.data[i]
                    + 2.0 * tau * (y1 * f1.data[i] + y2 * f2.data[i])
                    + tau * f.data[i];
            }
        }
    }
    out
}

/// Vector fields in Cartesian form, τ = t + 2K:
/// Z₀ = y₁∂₂ - y₂∂₁, Z_j = y_j ∂_t + τ ∂_j (j = 1, 2), Z₃ = (τ∂_t + y·∇)/T.
pub fn apply_z_spacetime(j: usize, f: &SpacetimeField, k: f64) -> Result<SpacetimeField> {
    if j > 3 {
        return Err(LabError::Invalid(format!("vector field index {j} not in 0..3")));
    }
    let (ft, f1, f2) = (f.diff(0, 1), f.diff(1, 1), f.diff(2, 1));
    let mut out = f.clone();
    for kk in 0..f.n_t {
        for b in 0..f.n_y {
            for a in 0..f.n_y {
                let (t, y1, y2) = f.coords(kk, a, b);
                let tau = t + 2.0 * k;
                let i = f.index(kk, a, b);
                out.data[i] = match j {
                    0 => y1 * f2.data[i] - y2 * f1.data[i],
                    1 => y1 * ft.data[i] + tau * f1.data[i],
                    2 => y2 * ft.data[i] + tau * f2.data[i],
                    _ => {
                        let big_t = (tau * tau - y1 * y1 - y2 * y2).sqrt();
                        (tau * ft.data[i] + y1 * f1.data[i] + y2 * f2.data[i]) / big_t
                    }
                };
            }
        }
    }
    Ok(out)
}

/// Snapshots of a columnar field at uniform times, for resampling.
#[derive(Clone, Debug)]
pub struct SnapshotSeries<F: Columnar> {
    pub t0: f64,
    pub dt: f64,
    pub frames: Vec<F>,
}

/// Evaluates stored (t, y) snapshots on the hyperboloids T = T_j of `grid`
/// by cubic interpolation in t and periodic bicubic interpolation in y.
pub fn resample_to_hyper<F: Columnar>(series: &SnapshotSeries<F>, grid: &HyperGrid, gy: &TransverseGrid) -> Result<HyperField> {
    let nf = series.frames.len();
    if nf < 4 {
        return Err(LabError::Invalid(format!("need at least 4 snapshots, have {nf}")));
    }
    let inner = series.frames[0].inner_len();
    let t_last = series.t0 + (nf - 1) as f64 * series.dt;
    let mut out = HyperField::zeros(grid, inner);
    let mut cols = vec![vec![0.0; inner]; 4];
    for j in 0..grid.n_t {
        for m in 0..grid.n_r {
            for n in 0..grid.n_theta {
                let h = HyperPoint {
                    t_hyp: grid.t_at(j),
                    r: grid.r_at(m),
                    theta: grid.theta_at(n),
                };
                let (t, y) = from_hyper(h, grid.k);
                if t < series.t0 - 1e-12 || t > t_last + 1e-12 {
                    return Err(LabError::Invalid(format!(
                        "slice point at t = {t} leaves the stored range [{}, {t_last}]",
                        series.t0
                    )));
                }
                let s = ((t - series.t0) / series.dt).clamp(0.0, (nf - 1) as f64);
                let base = (s.floor() as isize - 1).clamp(0, nf as isize - 4) as usize;
                let u = s - (base + 1) as f64;
                let w = cubic_weights(u);
                for (c, col) in cols.iter_mut().enumerate() {
                    interpolate_columns(&series.frames[base + c], gy, y[0], y[1], col);
                }
                let dst = out.point_mut(j, m, n);
                for q in 0..inner {
                    dst[q] = w[0] * cols[0][q] + w[1] * cols[1][q] + w[2] * cols[2][q] + w[3] * cols[3][q];
                }
            }
        }
    }
    Ok(out)
}

/// Modulated fields captured on three neighbouring hyperboloids.
#[derive(Clone, Debug)]
pub struct HyperSlice {
    /// Central hyperboloid; the grid holds T - δ, T, T + δ.
    pub t_center: f64,
    /// Ψ = T ψ with the x-columns as inner axis.
    pub psi: HyperField,
    /// 𝓐 = T a.
    pub cal_a: HyperField,
    /// Σ = T σ.
    pub sigma: HyperField,
    pub x_grid: Grid1D,
    /// Whether R_max was cut by the transverse domain rather than the
    /// light cone of the final time.
    pub truncated: bool,
}
