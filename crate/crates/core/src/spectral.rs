//! The discretized linearized operator H = -d²/dx² - 3 sech²(x/√2), its
//! eigendecomposition, the spectral projections and the propagators
//! cos(tB), sin(tB)/B with B = sqrt(H+2) on the continuous subspace.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::fields::{Columnar, Grid1D, ScalarField3};
use crate::kink::{self, KinkTables};

/// Which spectral projection to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Onto the ground state (eigenvalue near -2).
    P0,
    /// Onto the internal mode (eigenvalue near -1/2).
    P1,
    /// Onto the continuous subspace, I - P0 - P1.
    Pc,
}

/// Propagator kind for [`SpectralH::propagate_b`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Propagator {
    Cos,
    /// sin(tB)/B
    Sin,
}

/// Discretized H with Dirichlet conditions at ±x_max and its full
/// eigendecomposition.  Eigenvectors are stored on the full grid (zero at
/// the two boundary nodes) and are orthonormal in the trapezoid inner
/// product of the grid.
#[derive(Clone, Debug)]
pub struct SpectralH {
    grid: Grid1D,
    /// Diagonal of H on the interior nodes.
    diag: Vec<f64>,
    /// Constant off-diagonal entry, -1/dx².
    off: f64,
    eigenvalues: Vec<f64>,
    /// Eigenvectors as columns over the interior nodes, Euclidean-orthonormal.
    vectors: DMatrix<f64>,
    bound: [(f64, Vec<f64>); 2],
}

/// Relative residuals of the exact eigenfunctions and of the resonance.
#[derive(Clone, Debug, Serialize)]
pub struct EigenResidualReport {
    /// ‖(H+2) sech²‖ / ‖sech²‖
    pub ground_rel: f64,
    /// ‖(H+½) φ̃‖ / ‖φ̃‖
    pub internal_rel: f64,
    /// ‖H f_res‖ / ‖f_res‖ over interior nodes
    pub resonance_rel: f64,
    /// sup |f_res| on the grid
    pub resonance_sup: f64,
    /// f_res at the grid ends
    pub resonance_at_ends: (f64, f64),
}

impl SpectralH {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// (eigenvalue, unit eigenvector) of the ground state and internal mode.
    pub fn bound_pairs(&self) -> &[(f64, Vec<f64>); 2] {
        &self.bound
    }

    /// Eigenvalues of the continuous-subspace modes.
    pub fn cont_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[2..]
    }

    /// Frequencies sqrt(λ + 2) of the continuous-subspace modes.
    pub fn cont_freqs(&self) -> Vec<f64> {
        self.cont_eigenvalues().iter().map(|l| (l + 2.0).sqrt()).collect()
    }

    /// Number of continuous-subspace modes.
    pub fn cont_len(&self) -> usize {
        self.eigenvalues.len() - 2
    }

    /// k-th continuous-subspace eigenvector on the full grid.
    pub fn cont_vector(&self, k: usize) -> Vec<f64> {
        self.full_vector(k + 2)
    }

    fn full_vector(&self, k: usize) -> Vec<f64> {
        let n = self.grid.n_x();
        let s = 1.0 / self.grid.dx().sqrt();
        let mut v = vec![0.0; n];
        for i in 0..n - 2 {
            v[i + 1] = self.vectors[(i, k)] * s;
        }
        v
    }

    /// H applied at interior nodes using the given nodal values (no
    /// Dirichlet truncation); zero at the two ends.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        apply_tridiagonal(&self.diag, self.off, f)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.grid.n_x() {
            return Err(LabError::Dimension(format!(
                "profile has {len} samples, operator grid has {}",
                self.grid.n_x()
            )));
        }
        Ok(())
    }

    /// Spectral projection of a profile.
    pub fn project(&self, f: &[f64], which: Projection) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        let mut out = vec![0.0; f.len()];
        self.project_into(f, which, &mut out);
        Ok(out)
    }

    fn project_into(&self, f: &[f64], which: Projection, out: &mut [f64]) {
        let g = &self.grid;
        let c0 = g.dot(&self.bound[0].1, f);
        let c1 = g.dot(&self.bound[1].1, f);
        let (e0, e1) = (&self.bound[0].1, &self.bound[1].1);
        for i in 0..f.len() {
            out[i] = match which {
                Projection::P0 => c0 * e0[i],
                Projection::P1 => c1 * e1[i],
                Projection::Pc => f[i] - c0 * e0[i] - c1 * e1[i],
            };
        }
    }

    /// Spectral projection applied to every x-column of a 3D field.
    pub fn project_field(&self, f: &ScalarField3, which: Projection) -> Result<ScalarField3> {
        self.check_len(f.n_x())?;
        let n = f.n_x();
        let mut out = f.clone();
        out.values_mut()
            .par_chunks_mut(n)
            .zip(f.values().par_chunks(n))
            .for_each(|(o, c)| self.project_into(c, which, o));
        Ok(out)
    }

    /// Coefficients ⟨e_k, f⟩ of a profile on the continuous-subspace modes.
    pub fn cont_coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        let n = f.len();
        let s = self.grid.dx().sqrt();
        // Interior nodes carry weight dx; eigenvectors scaled by 1/sqrt(dx).
        let inner = DVector::from_iterator(n - 2, f[1..n - 1].iter().map(|v| v * s));
        let all = self.vectors.tr_mul(&inner);
        Ok(all.iter().skip(2).copied().collect())
    }

    /// Synthesis Σ_k c_k e_k over the continuous-subspace modes.
    pub fn cont_synthesis(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.grid.n_x();
        let mut c = DVector::zeros(n - 2);
        for (k, v) in coeffs.iter().enumerate() {
            c[k + 2] = *v;
        }
        let inner = &self.vectors * c;
        let s = 1.0 / self.grid.dx().sqrt();
        let mut out = vec![0.0; n];
        for i in 0..n - 2 {
            out[i + 1] = inner[i] * s;
        }
        out
    }

    /// cos(tB)P_c u0 or sin(tB)/B P_c u0 by mode-wise synthesis.
    pub fn propagate_b(&self, u0: &[f64], t: f64, kind: Propagator) -> Result<Vec<f64>> {
        let c = self.cont_coefficients(u0)?;
        Ok(self.cont_synthesis(&self.propagate_coefficients(&c, t, kind)))
    }

    /// Mode-wise propagation of continuous-subspace coefficients.
    pub fn propagate_coefficients(&self, c: &[f64], t: f64, kind: Propagator) -> Vec<f64> {
        self.cont_eigenvalues()
            .iter()
            .zip(c)
            .map(|(l, ck)| {
                let w = (l + 2.0).sqrt();
                match kind {
                    Propagator::Cos => ck * (w * t).cos(),
                    Propagator::Sin => ck * (w * t).sin() / w,
                }
            })
            .collect()
    }

    /// ‖B f‖² = ⟨P_c f, (H+2) P_c f⟩ in the discrete inner product.
    pub fn b_norm_sq(&self, f: &[f64]) -> Result<f64> {
        let c = self.cont_coefficients(f)?;
        Ok(self
            .cont_eigenvalues()
            .iter()
            .zip(&c)
            .map(|(l, ck)| (l + 2.0) * ck * ck)
            .sum())
    }

    /// Residuals of the closed-form eigenfunctions and of the resonance
    /// under the discrete operator.
    pub fn check_exact_eigenfunctions(&self, _k: &KinkTables) -> EigenResidualReport {
        eigenfunction_residuals(&self.grid)
    }
}

/// H applied at the interior nodes of `g` to nodal values (no Dirichlet
/// truncation); zero at the two ends.
pub fn apply_h(g: &Grid1D, f: &[f64]) -> Vec<f64> {
    let (diag, off) = tridiagonal(g);
    apply_tridiagonal(&diag, off, f)
}

fn apply_tridiagonal(diag: &[f64], off: f64, f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = off * (f[i - 1] + f[i + 1]) + diag[i - 1] * f[i];
    }
    out
}

/// Relative residuals of the closed-form ground state, internal mode and
/// resonance under the discrete H on `g`, over the interior nodes.
pub fn eigenfunction_residuals(g: &Grid1D) -> EigenResidualReport {
    let rel = |f: &[f64], shift: f64| {
        let hf = apply_h(g, f);
        let n = f.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..n - 1 {
            let r = hf[i] + shift * f[i];
            num += r * r;
            den += f[i] * f[i];
        }
        (num / den).sqrt()
    };
    let e0 = g.sample(kink::ground_state);
    let e1 = g.sample(kink::phi_tilde);
    let fr = g.sample(kink::resonance);
    EigenResidualReport {
        ground_rel: rel(&e0, 2.0),
        internal_rel: rel(&e1, 0.5),
        resonance_rel: rel(&fr, 0.0),
        resonance_sup: fr.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        resonance_at_ends: (fr[0], fr[fr.len() - 1]),
    }
}

/// Interior diagonal of H and the constant off-diagonal entry.
fn tridiagonal(g: &Grid1D) -> (Vec<f64>, f64) {
    let n = g.n_x();
    let h2 = g.dx() * g.dx();
    let diag = (1..n - 1).map(|i| 2.0 / h2 + kink::potential(g.x(i))).collect();
    (diag, -1.0 / h2)
}

/// Builds H on the grid and diagonalizes it densely.
pub fn build_h(g: &Grid1D) -> Result<SpectralH> {
    let (diag, off) = tridiagonal(g);
    let m = diag.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = diag[i];
        if i + 1 < m {
            a[(i, i + 1)] = off;
            a[(i + 1, i)] = off;
        }
    }
    let eig = nalgebra::SymmetricEigen::try_new(a, 1e-15, 100_000).ok_or(LabError::EigenSolver(m))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(m, m);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    if eigenvalues[2] <= -0.1 {
        return Err(LabError::Spectral(format!(
            "third eigenvalue {} is not above -0.1; grid too coarse or too short",
            eigenvalues[2]
        )));
    }
    if let Some(l) = eigenvalues[2..].iter().find(|l| **l + 2.0 <= 0.0) {
        return Err(LabError::Spectral(format!(
            "continuous-subspace eigenvalue {l} gives a non-real frequency"
        )));
    }
    // Sign convention: ground state positive at the centre, internal mode
    // increasing through the centre, matching th′ and φ.
    let centre = m / 2;
    if vectors[(centre, 0)] < 0.0 {
        vectors.column_mut(0).neg_mut();
    }
    if vectors[(centre + 1, 1)] - vectors[(centre.saturating_sub(1), 1)] < 0.0 {
        vectors.column_mut(1).neg_mut();
    }
    let mut h = SpectralH {
        grid: g.clone(),
        diag,
        off,
        eigenvalues,
        vectors,
        bound: [(0.0, Vec::new()), (0.0, Vec::new())],
    };
    h.bound = [
        (h.eigenvalues[0], h.full_vector(0)),
        (h.eigenvalues[1], h.full_vector(1)),
    ];
    Ok(h)
}

/// Number of eigenvalues of a symmetric tridiagonal matrix below `x`
/// (Sturm sequence count).
fn sturm_count(diag: &[f64], off_sq: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - off_sq / q };
        if q == 0.0 {
            q = f64::EPSILON * (d.abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue of the discretized H by Sturm bisection,
/// independent of the dense eigen-solver.
pub fn eigenvalue_by_bisection(g: &Grid1D, k: usize) -> f64 {
    let (diag, off) = tridiagonal(g);
    let off_sq = off * off;
    let bound = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs())) + 2.0 * off.abs();
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(&diag, off_sq, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}
