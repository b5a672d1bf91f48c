//! Grids, sampled fields, finite-difference stencils and x-inner products.
//!
//! Fields on the 3D grid are stored with `x` fastest, then `y1`, then `y2`,
//! so every transverse point owns a contiguous x-column.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::quadrature::{cubic_weights, trapezoid_weights};

/// Uniform grid on the symmetric interval [-x_max, x_max].
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    x_max: f64,
    n_x: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_max: f64, n_x: usize) -> Result<Self> {
        if n_x < 16 {
            return Err(LabError::Grid(format!("n_x = {n_x} must be at least 16")));
        }
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(LabError::Grid(format!("x_max = {x_max} must be positive")));
        }
        Ok(Self {
            x_max,
            n_x,
            dx: 2.0 * x_max / (n_x - 1) as f64,
        })
    }

    /// Grid with the number of nodes chosen so the spacing is `dx` (rounded
    /// to the nearest admissible spacing).
    pub fn with_spacing(x_max: f64, dx: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(LabError::Grid(format!("dx = {dx} must be positive")));
        }
        let n = (2.0 * x_max / dx).round() as usize + 1;
        Self::new(x_max, n)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn x_min(&self) -> f64 {
        -self.x_max
    }

    /// Node coordinate.  Built from the centre so that x(n-1-i) = -x(i)
    /// holds bitwise.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.n_x - 1) as f64) * self.dx
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_x).map(|i| f(self.x(i))).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_x, self.dx)
    }

    /// Trapezoid inner product of two profiles.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        trapezoid_dot(f, g, self.dx)
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.dot(f, f).sqrt()
    }

    /// Cubic Lagrange interpolation of nodal values at `x`, treating the
    /// values as zero outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        interp_cubic_zero(values, self.x(0), self.dx, x)
    }
}

/// Trapezoid-weighted dot product on uniform nodes.
pub fn trapezoid_dot(f: &[f64], g: &[f64], dx: f64) -> f64 {
    let n = f.len();
    if n == 0 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 1..n - 1 {
        s += f[i] * g[i];
    }
    s += 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]);
    s * dx
}

/// Cubic Lagrange interpolation on nodes `x0 + i*dx`, zero outside.
pub fn interp_cubic_zero(values: &[f64], x0: f64, dx: f64, x: f64) -> f64 {
    let s = (x - x0) / dx;
    let j = s.floor();
    let u = s - j;
    let j = j as isize;
    let w = cubic_weights(u);
    let n = values.len() as isize;
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        let idx = j - 1 + k as isize;
        if idx >= 0 && idx < n {
            acc += wk * values[idx as usize];
        }
    }
    acc
}

/// Periodic square [-side/2, side/2)² with `n_y` points per side.
#[derive(Clone, Debug, PartialEq)]
pub struct TransverseGrid {
    side: f64,
    n_y: usize,
    dy: f64,
}

impl TransverseGrid {
    pub fn new(side: f64, n_y: usize) -> Result<Self> {
        if n_y < 8 {
            return Err(LabError::Grid(format!("n_y = {n_y} must be at least 8")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(LabError::Grid(format!("side = {side} must be positive")));
        }
        Ok(Self {
            side,
            n_y,
            dy: side / n_y as f64,
        })
    }
    pub fn side(&self) -> f64 {
        self.side
    }
    pub fn n_y(&self) -> usize {
        self.n_y
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    /// Coordinate of index `j`; index n_y/2 sits at the origin.
    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 - (self.n_y / 2) as f64) * self.dy
    }
    /// Index of the node nearest to `y`, wrapped periodically.
    pub fn nearest(&self, y: f64) -> usize {
        let s = (y / self.dy).round() as i64 + (self.n_y / 2) as i64;
        s.rem_euclid(self.n_y as i64) as usize
    }
    /// Shortest periodic distance of node `j` from the origin.
    pub fn abs_y(&self, j: usize) -> f64 {
        let v = self.y(j).abs();
        v.min(self.side - v)
    }
}

/// Field data laid out as contiguous columns over an `n_y × n_y` transverse
/// grid: 3D fields have x-columns, 2D fields have columns of length one.
pub trait Columnar: Clone {
    fn inner_len(&self) -> usize;
    fn n_y(&self) -> usize;
    fn values(&self) -> &[f64];
    fn values_mut(&mut self) -> &mut [f64];

    fn column(&self, iy1: usize, iy2: usize) -> &[f64] {
        let m = self.inner_len();
        let start = m * (iy1 + self.n_y() * iy2);
        &self.values()[start..start + m]
    }

    fn all_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Real samples on the 3D tensor grid, x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField3 {
    n_x: usize,
    n_y: usize,
    data: Vec<f64>,
}

impl ScalarField3 {
    pub fn zeros(n_x: usize, n_y: usize) -> Self {
        Self {
            n_x,
            n_y,
            data: vec![0.0; n_x * n_y * n_y],
        }
    }

    pub fn from_vec(n_x: usize, n_y: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_x * n_y * n_y {
            return Err(LabError::Dimension(format!(
                "{} samples for a {n_x}x{n_y}x{n_y} field",
                data.len()
            )));
        }
        Ok(Self { n_x, n_y, data })
    }

    /// Samples `f(x, y1, y2)` on the grids.
    pub fn from_fn(
        gx: &Grid1D,
        gy: &TransverseGrid,
        f: impl Fn(f64, f64, f64) -> f64 + Sync,
    ) -> Self {
        let n_x = gx.n_x();
        let n_y = gy.n_y();
        let mut data = vec![0.0; n_x * n_y * n_y];
        data.par_chunks_mut(n_x * n_y)
            .enumerate()
            .for_each(|(iy2, plane)| {
                let y2 = gy.y(iy2);
                for (iy1, col) in plane.chunks_mut(n_x).enumerate() {
                    let y1 = gy.y(iy1);
                    for (ix, v) in col.iter_mut().enumerate() {
                        *v = f(gx.x(ix), y1, y2);
                    }
                }
            });
        Self { n_x, n_y, data }
    }

    /// Field constant in y equal to the profile.
    pub fn from_profile(profile: &[f64], n_y: usize) -> Self {
        let n_x = profile.len();
        let mut data = Vec::with_capacity(n_x * n_y * n_y);
        for _ in 0..n_y * n_y {
            data.extend_from_slice(profile);
        }
        Self { n_x, n_y, data }
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    #[inline]
    pub fn index(&self, ix: usize, iy1: usize, iy2: usize) -> usize {
        ix + self.n_x * (iy1 + self.n_y * iy2)
    }

    #[inline]
    pub fn get(&self, ix: usize, iy1: usize, iy2: usize) -> f64 {
        self.data[self.index(ix, iy1, iy2)]
    }

    pub fn set(&mut self, ix: usize, iy1: usize, iy2: usize, v: f64) {
        let i = self.index(ix, iy1, iy2);
        self.data[i] = v;
    }

    pub fn column_mut(&mut self, iy1: usize, iy2: usize) -> &mut [f64] {
        let start = self.n_x * (iy1 + self.n_y * iy2);
        &mut self.data[start..start + self.n_x]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Whether the dimensions agree with the grids.
    pub fn matches(&self, gx: &Grid1D, gy: &TransverseGrid) -> bool {
        self.n_x == gx.n_x() && self.n_y == gy.n_y()
    }

    pub fn check(&self, gx: &Grid1D, gy: &TransverseGrid) -> Result<()> {
        if !self.matches(gx, gy) {
            return Err(LabError::Dimension(format!(
                "field is {}x{}x{}, grid is {}x{}x{}",
                self.n_x,
                self.n_y,
                self.n_y,
                gx.n_x(),
                gy.n_y(),
                gy.n_y()
            )));
        }
        Ok(())
    }

    /// L2 norm over the 3D grid (trapezoid in x, rectangle rule in y).
    pub fn l2_norm(&self, gx: &Grid1D, gy: &TransverseGrid) -> f64 {
        let w = gx.weights();
        let s: f64 = self
            .data
            .chunks(self.n_x)
            .map(|c| c.iter().zip(&w).map(|(v, wi)| wi * v * v).sum::<f64>())
            .sum();
        (s * gy.dy() * gy.dy()).sqrt()
    }
}

impl Columnar for ScalarField3 {
    fn inner_len(&self) -> usize {
        self.n_x
    }
    fn n_y(&self) -> usize {
        self.n_y
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Real samples on the transverse grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField2 {
    n_y: usize,
    data: Vec<f64>,
}

impl ScalarField2 {
    pub fn zeros(n_y: usize) -> Self {
        Self {
            n_y,
            data: vec![0.0; n_y * n_y],
        }
    }

    pub fn constant(n_y: usize, c: f64) -> Self {
        Self {
            n_y,
            data: vec![c; n_y * n_y],
        }
    }

    pub fn from_vec(n_y: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_y * n_y {
            return Err(LabError::Dimension(format!(
                "{} samples for a {n_y}x{n_y} field",
                data.len()
            )));
        }
        Ok(Self { n_y, data })
    }

    pub fn from_fn(gy: &TransverseGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n_y = gy.n_y();
        let mut data = Vec::with_capacity(n_y * n_y);
        for iy2 in 0..n_y {
            for iy1 in 0..n_y {
                data.push(f(gy.y(iy1), gy.y(iy2)));
            }
        }
        Self { n_y, data }
    }

    #[inline]
    pub fn get(&self, iy1: usize, iy2: usize) -> f64 {
        self.data[iy1 + self.n_y * iy2]
    }

    pub fn set(&mut self, iy1: usize, iy2: usize, v: f64) {
        self.data[iy1 + self.n_y * iy2] = v;
    }
}

impl Columnar for ScalarField2 {
    fn inner_len(&self) -> usize {
        1
    }
    fn n_y(&self) -> usize {
        self.n_y
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Second derivative of a single profile: central stencil inside, one-sided
/// second-order stencil at both ends.
pub fn second_derivative_profile(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    second_derivative_into(f, dx, &mut out);
    out
}

fn second_derivative_into(f: &[f64], dx: f64, out: &mut [f64]) {
    let n = f.len();
    let inv = 1.0 / (dx * dx);
    for i in 1..n - 1 {
        out[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) * inv;
    }
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv;
    out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * inv;
}

/// ∂²/∂x² of a 3D field.
pub fn second_derivative_x(f: &ScalarField3, g: &Grid1D) -> Result<ScalarField3> {
    if f.n_x != g.n_x() {
        return Err(LabError::Dimension(format!(
            "field has {} x-samples, grid has {}",
            f.n_x,
            g.n_x()
        )));
    }
    let mut out = ScalarField3::zeros(f.n_x, f.n_y);
    out.data
        .par_chunks_mut(f.n_x)
        .zip(f.data.par_chunks(f.n_x))
        .for_each(|(o, c)| second_derivative_into(c, g.dx(), o));
    Ok(out)
}

/// Five-point periodic Laplacian in the transverse variables.
pub fn laplacian_y<F: Columnar>(f: &F, g: &TransverseGrid) -> Result<F> {
    let n = f.n_y();
    if n != g.n_y() {
        return Err(LabError::Dimension(format!(
            "field has {n} transverse samples per side, grid has {}",
            g.n_y()
        )));
    }
    let m = f.inner_len();
    let inv = 1.0 / (g.dy() * g.dy());
    let mut out = f.clone();
    let src = f.values();
    out.values_mut()
        .par_chunks_mut(m * n)
        .enumerate()
        .for_each(|(iy2, plane)| {
            let up2 = (iy2 + 1) % n;
            let dn2 = (iy2 + n - 1) % n;
            for iy1 in 0..n {
                let up1 = (iy1 + 1) % n;
                let dn1 = (iy1 + n - 1) % n;
                let col = |a: usize, b: usize| &src[m * (a + n * b)..m * (a + n * b) + m];
                let c = col(iy1, iy2);
                let e = col(up1, iy2);
                let w = col(dn1, iy2);
                let nn = col(iy1, up2);
                let s = col(iy1, dn2);
                let o = &mut plane[m * iy1..m * iy1 + m];
                for i in 0..m {
                    o[i] = (e[i] + w[i] + nn[i] + s[i] - 4.0 * c[i]) * inv;
                }
            }
        });
    Ok(out)
}

/// Transverse field ⟨profile, f(·, y)⟩ with trapezoid quadrature in x.
pub fn inner_x(f: &ScalarField3, profile: &[f64], g: &Grid1D) -> Result<ScalarField2> {
    if profile.len() != f.n_x || g.n_x() != f.n_x {
        return Err(LabError::Dimension(format!(
            "profile has {} samples, field {}, grid {}",
            profile.len(),
            f.n_x,
            g.n_x()
        )));
    }
    let data: Vec<f64> = f
        .data
        .par_chunks(f.n_x)
        .map(|c| g.dot(c, profile))
        .collect();
    ScalarField2::from_vec(f.n_y, data)
}

/// Periodic bicubic interpolation of all columns at the transverse point
/// `(y1, y2)`, written into `out` (length `inner_len`).
pub fn interpolate_columns<F: Columnar>(f: &F, g: &TransverseGrid, y1: f64, y2: f64, out: &mut [f64]) {
    let n = g.n_y() as i64;
    let half = (g.n_y() / 2) as f64;
    let s1 = y1 / g.dy() + half;
    let s2 = y2 / g.dy() + half;
    let j1 = s1.floor();
    let j2 = s2.floor();
    let w1 = cubic_weights(s1 - j1);
    let w2 = cubic_weights(s2 - j2);
    out.iter_mut().for_each(|v| *v = 0.0);
    for (b, wb) in w2.iter().enumerate() {
        let i2 = (j2 as i64 - 1 + b as i64).rem_euclid(n) as usize;
        for (a, wa) in w1.iter().enumerate() {
            let i1 = (j1 as i64 - 1 + a as i64).rem_euclid(n) as usize;
            let w = wa * wb;
            let c = f.column(i1, i2);
            for (o, v) in out.iter_mut().zip(c) {
                *o += w * v;
            }
        }
    }
}

/// Seeded smooth random field: a few Gaussian-in-x wave packets with random
/// transverse Fourier modes, scaled so that max |w| = `amplitude`.  Packets
/// sit within `|x| ≤ x_spread`.
pub fn random_smooth_field(
    gx: &Grid1D,
    gy: &TransverseGrid,
    seed: u64,
    amplitude: f64,
    x_spread: f64,
) -> ScalarField3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k0 = 2.0 * std::f64::consts::PI / gy.side();
    let packets: Vec<[f64; 6]> = (0..4)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-x_spread..x_spread),
                rng.random_range(1.0..2.5),
                rng.random_range(-2..=2) as f64 * k0,
                rng.random_range(-2..=2) as f64 * k0,
                rng.random_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    let mut f = ScalarField3::from_fn(gx, gy, |x, y1, y2| {
        packets
            .iter()
            .map(|p| {
                let d = (x - p[1]) / p[2];
                p[0] * (-d * d).exp() * (p[3] * y1 + p[4] * y2 + p[5]).cos()
            })
            .sum()
    });
    let n = f.n_x;
    for c in f.data.chunks_mut(n) {
        c[0] = 0.0;
        c[n - 1] = 0.0;
    }
    let m = f.max_abs();
    if m > 0.0 {
        let s = amplitude / m;
        f.data.iter_mut().for_each(|v| *v *= s);
    }
    f
}
