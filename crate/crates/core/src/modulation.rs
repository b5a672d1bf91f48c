//! Splitting a perturbation w into a translation σ(y), an internal-mode
//! amplitude a(y) and a remainder ψ(x, y), and the inverse map.
//!
//! With v(x) = w(x + σ) + th(x + σ) - th(x), the translation is fixed by
//! ⟨v, th′⟩ = 0, written in terms of w as F(σ, w) = 0 where
//!
//! ```text
//! F(σ, w) = ⟨w, th′(· - σ)⟩ + σ ∫₀¹ ⟨th′(· - sσ), th′(· - σ)⟩ ds.
//! ```
//!
//! Then a = ⟨v, φ⟩ and ψ = v - a φ - ⟨v, e₀⟩ e₀.  The frame (e₀ ∝ th′, φ) is
//! built from the closed-form eigenfunctions normalized on the grid, so the
//! split of φ·a₀ or of a shifted kink is exact to rounding.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::fields::{Columnar, Grid1D, ScalarField2, ScalarField3};
use crate::kink::{self, KinkTables};

/// Newton stops once |F| falls below this.
pub const NEWTON_TOL: f64 = 1e-12;
/// Newton iteration cap.
pub const NEWTON_MAX_ITER: usize = 25;
/// Default smallness threshold on ‖w‖∞.
pub const DEFAULT_EPS0: f64 = 0.1;

/// Decomposed perturbation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationState {
    pub sigma: ScalarField2,
    pub a: ScalarField2,
    pub psi: ScalarField3,
    /// Largest Newton iteration count over the transverse points.
    pub newton_iters: usize,
    /// Largest final |F| over the transverse points.
    pub residual: f64,
}

/// Decomposition of a single x-column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnSplit {
    pub sigma: f64,
    pub a: f64,
    pub psi: Vec<f64>,
    pub newton_iters: usize,
    pub residual: f64,
    /// ⟨v, th′⟩ before the e₀ component is removed.
    pub v_th1: f64,
}

/// Precomputed tables for the decomposition on one x-grid.
#[derive(Clone, Debug)]
pub struct Modulator {
    grid: Grid1D,
    kink: KinkTables,
    weights: Vec<f64>,
    e0: Vec<f64>,
    th1_norm_sq: f64,
    eps0: f64,
}

impl Modulator {
    pub fn new(g: &Grid1D) -> Self {
        let kink = kink::build_kink_tables(g);
        let n2 = g.dot(&kink.th1, &kink.th1);
        let e0 = kink.th1.iter().map(|v| v / n2.sqrt()).collect();
        Self {
            grid: g.clone(),
            weights: g.weights(),
            kink,
            e0,
            th1_norm_sq: n2,
            eps0: DEFAULT_EPS0,
        }
    }

    pub fn with_eps0(mut self, eps0: f64) -> Self {
        self.eps0 = eps0;
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn kink(&self) -> &KinkTables {
        &self.kink
    }

    /// Unit vector along th′ used as the ground-state direction.
    pub fn e0(&self) -> &[f64] {
        &self.e0
    }

    /// Discrete ‖th′‖².
    pub fn th1_norm_sq(&self) -> f64 {
        self.th1_norm_sq
    }

    fn check_column(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.grid.n_x() {
            return Err(LabError::Dimension(format!(
                "column has {} samples, grid has {}",
                w.len(),
                self.grid.n_x()
            )));
        }
        Ok(())
    }

    fn check_shift(&self, sigma: f64) -> Result<()> {
        if !(sigma.abs() <= self.grid.x_max() / 4.0) {
            return Err(LabError::Invalid(format!(
                "translation {sigma} exceeds x_max/4 = {}",
                self.grid.x_max() / 4.0
            )));
        }
        Ok(())
    }

    /// F(σ, w) and ∂F/∂σ for one column.  The shift integral equals
    /// th(x) - th(x - σ), which is evaluated directly: its absolute
    /// rounding error stays at machine level as σ → 0.
    fn residual_and_slope(&self, sigma: f64, w: &[f64]) -> (f64, f64) {
        let mut f = 0.0;
        let mut df = 0.0;
        for (i, wi) in self.weights.iter().enumerate() {
            let t = kink::th(self.grid.x(i) - sigma);
            let sech2 = 1.0 - t * t;
            let t1 = sech2 * std::f64::consts::FRAC_1_SQRT_2;
            let t2 = -sech2 * t;
            let v = w[i] + self.kink.th[i] - t;
            f += wi * v * t1;
            df += wi * (t1 * t1 - v * t2);
        }
        (f, df)
    }

    /// F(σ, w) for one column.
    pub fn residual_column(&self, sigma: f64, w: &[f64]) -> Result<f64> {
        self.check_column(w)?;
        self.check_shift(sigma)?;
        Ok(self.residual_and_slope(sigma, w).0)
    }

    /// ∂F/∂σ for one column.
    pub fn residual_slope_column(&self, sigma: f64, w: &[f64]) -> Result<f64> {
        self.check_column(w)?;
        self.check_shift(sigma)?;
        Ok(self.residual_and_slope(sigma, w).1)
    }

    /// F(σ(y), w(·, y)) on the transverse grid.
    pub fn modulation_residual(&self, sigma: &ScalarField2, w: &ScalarField3) -> Result<ScalarField2> {
        self.check_field(w)?;
        if sigma.n_y() != w.n_y() {
            return Err(LabError::Dimension("σ and w transverse sizes differ".into()));
        }
        let n = w.n_x();
        let out: Result<Vec<f64>> = w
            .values()
            .par_chunks(n)
            .zip(sigma.values().par_iter())
            .map(|(c, s)| self.residual_column(*s, c))
            .collect();
        ScalarField2::from_vec(w.n_y(), out?)
    }

    fn check_field(&self, w: &ScalarField3) -> Result<()> {
        self.check_column(&vec![0.0; w.n_x()])
    }

    /// Newton solve of F(σ, w) = 0 for one column.  Returns
    /// (σ, iterations, final |F|).
    pub fn solve_sigma_column(&self, w: &[f64], guess: Option<f64>) -> Result<(f64, usize, f64)> {
        self.check_column(w)?;
        let wmax = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !(wmax <= self.eps0) {
            return Err(LabError::Invalid(format!(
                "‖w‖∞ = {wmax:e} exceeds the smallness threshold {}",
                self.eps0
            )));
        }
        let mut sigma = guess.unwrap_or_else(|| -self.grid.dot(w, &self.kink.th1) / self.th1_norm_sq);
        let mut last = f64::INFINITY;
        for iter in 0..=NEWTON_MAX_ITER {
            self.check_shift(sigma)?;
            let (f, df) = self.residual_and_slope(sigma, w);
            last = f.abs();
            if last < NEWTON_TOL {
                return Ok((sigma, iter, last));
            }
            if iter == NEWTON_MAX_ITER || df == 0.0 || !f.is_finite() {
                break;
            }
            sigma -= f / df;
        }
        Err(LabError::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual: last,
            iy1: 0,
            iy2: 0,
        })
    }

    /// Translation field σ(y) solving F = 0 pointwise in y.
    pub fn solve_sigma(&self, w: &ScalarField3) -> Result<ScalarField2> {
        let m = self.decompose_inner(w, false)?;
        Ok(m.sigma)
    }

    /// Splits one column.
    pub fn decompose_column(&self, w: &[f64]) -> Result<ColumnSplit> {
        let (sigma, iters, res) = self.solve_sigma_column(w, None)?;
        Ok(self.split_with_sigma(w, sigma, iters, res))
    }

    /// Splits one column given σ.
    pub fn split_with_sigma(&self, w: &[f64], sigma: f64, iters: usize, res: f64) -> ColumnSplit {
        let g = &self.grid;
        let n = g.n_x();
        let mut v = vec![0.0; n];
        for (i, vi) in v.iter_mut().enumerate() {
            let x = g.x(i);
            *vi = g.interpolate(w, x + sigma) + kink::th(x + sigma) - kink::th(x);
        }
        let a = g.dot(&v, &self.kink.phi);
        let c0 = g.dot(&v, &self.e0);
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= a * self.kink.phi[i] + c0 * self.e0[i];
        }
        ColumnSplit {
            sigma,
            a,
            psi: v,
            newton_iters: iters,
            residual: res,
            v_th1: c0 * self.th1_norm_sq.sqrt(),
        }
    }

    /// Full decomposition of a 3D perturbation.
    pub fn decompose(&self, w: &ScalarField3) -> Result<ModulationState> {
        self.decompose_inner(w, true)
    }

    fn decompose_inner(&self, w: &ScalarField3, with_psi: bool) -> Result<ModulationState> {
        self.check_field(w)?;
        let n = w.n_x();
        let ny = w.n_y();
        let solved: Vec<Result<(f64, usize, f64)>> = w
            .values()
            .par_chunks(n)
            .map(|c| self.solve_sigma_column(c, None))
            .collect();
        let mut sig = Vec::with_capacity(ny * ny);
        let mut iters = 0;
        let mut residual = 0.0_f64;
        let mut failure: Option<(usize, f64)> = None;
        for (idx, r) in solved.into_iter().enumerate() {
            match r {
                Ok((s, it, res)) => {
                    sig.push(s);
                    iters = iters.max(it);
                    residual = residual.max(res);
                }
                Err(LabError::NoConvergence { residual: res, .. }) => {
                    if failure.is_none_or(|(_, worst)| res > worst) {
                        failure = Some((idx, res));
                    }
                    sig.push(f64::NAN);
                }
                Err(e) => return Err(e),
            }
        }
        if let Some((idx, res)) = failure {
            return Err(LabError::NoConvergence {
                iterations: NEWTON_MAX_ITER,
                residual: res,
                iy1: idx % ny,
                iy2: idx / ny,
            });
        }
        let sigma = ScalarField2::from_vec(ny, sig)?;
        let mut a = ScalarField2::zeros(ny);
        let mut psi = ScalarField3::zeros(n, ny);
        if with_psi {
            let splits: Vec<ColumnSplit> = w
                .values()
                .par_chunks(n)
                .zip(sigma.values().par_iter())
                .map(|(c, s)| self.split_with_sigma(c, *s, 0, 0.0))
                .collect();
            for (idx, s) in splits.into_iter().enumerate() {
                a.values_mut()[idx] = s.a;
                psi.values_mut()[idx * n..(idx + 1) * n].copy_from_slice(&s.psi);
            }
        }
        Ok(ModulationState {
            sigma,
            a,
            psi,
            newton_iters: iters,
            residual,
        })
    }

    /// Inverse of the split for one column: w(x) = v(x - σ) + th(x - σ) - th(x)
    /// with v = a φ + ψ.
    pub fn reconstruct_column(&self, sigma: f64, a: f64, psi: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let v: Vec<f64> = psi
            .iter()
            .zip(&self.kink.phi)
            .map(|(p, f)| p + a * f)
            .collect();
        (0..g.n_x())
            .map(|i| {
                let x = g.x(i);
                g.interpolate(&v, x - sigma) + kink::th(x - sigma) - kink::th(x)
            })
            .collect()
    }

    pub fn reconstruct(&self, m: &ModulationState) -> Result<ScalarField3> {
        self.check_field(&m.psi)?;
        let n = m.psi.n_x();
        let ny = m.psi.n_y();
        if m.sigma.n_y() != ny || m.a.n_y() != ny {
            return Err(LabError::Dimension("state components have different transverse sizes".into()));
        }
        let cols: Vec<Vec<f64>> = m
            .psi
            .values()
            .par_chunks(n)
            .zip(m.sigma.values().par_iter().zip(m.a.values().par_iter()))
            .map(|(p, (s, a))| self.reconstruct_column(*s, *a, p))
            .collect();
        ScalarField3::from_vec(n, ny, cols.concat())
    }

    /// Largest |⟨ψ, e₀⟩| and |⟨ψ, φ⟩| over the transverse points.
    pub fn orthogonality_defect(&self, m: &ModulationState) -> (f64, f64) {
        let n = m.psi.n_x();
        m.psi.values().chunks(n).fold((0.0_f64, 0.0_f64), |(d0, d1), c| {
            (
                d0.max(self.grid.dot(c, &self.e0).abs()),
                d1.max(self.grid.dot(c, &self.kink.phi).abs()),
            )
        })
    }
}
