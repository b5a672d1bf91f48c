//! The internal-mode amplitude oscillator
//!
//! ```text
//! 𝓐'' + (3/2) 𝓐 = -(3c/T) 𝓐² - R(T)/T²,     c = ∫ th φ³ dx,
//! ```
//!
//! its complex variables 𝓐± = (∓i∂_T + ω)𝓐 with ω = sqrt(3/2), and the
//! near-identity change of unknowns
//!
//! ```text
//! A₁± = 𝓐± + (α± 𝓐±² + β± 𝓐₊𝓐₋ + γ± 𝓐∓²) / T
//! ```
//!
//! that removes the quadratic terms of order 1/T.

use num_complex::Complex64;
use num_rational::Rational64;
use ode_solvers::{Dop853, OutputType, System, Vector2};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::kink::KinkTables;

/// Internal-mode frequency sqrt(3/2).
pub fn omega() -> f64 {
    1.5_f64.sqrt()
}

/// Local tolerance of the amplitude integrator.
pub const ODE_TOL: f64 = 1e-12;

/// (𝓐, 𝓐_T) → (𝓐₊, 𝓐₋).
pub fn to_apm(a: f64, a_t: f64) -> (Complex64, Complex64) {
    let w = omega();
    (Complex64::new(w * a, -a_t), Complex64::new(w * a, a_t))
}

/// (𝓐₊, 𝓐₋) → (𝓐, 𝓐_T), using 𝓐₊ + 𝓐₋ = 2ω𝓐 = sqrt(6)·𝓐 and
/// 𝓐₊ - 𝓐₋ = -2i𝓐_T.
pub fn from_apm(p: Complex64, m: Complex64) -> (f64, f64) {
    let a = (p + m) / 6.0_f64.sqrt();
    let at = Complex64::i() * (p - m) * 0.5;
    (a.re, at.re)
}

/// c = ∫ th φ³ dx by trapezoid quadrature.
pub fn coupling_constant(k: &KinkTables) -> f64 {
    let f: Vec<f64> = k.th.iter().zip(&k.phi).map(|(t, p)| t * p * p * p).collect();
    k.grid.dot(&f, &vec![1.0; f.len()])
}

/// Element a + bω of Q(ω), ω² = 3/2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QOmega {
    pub a: Rational64,
    pub b: Rational64,
}

impl QOmega {
    pub fn new(a: Rational64, b: Rational64) -> Self {
        Self { a, b }
    }
    pub fn int(n: i64) -> Self {
        Self::new(Rational64::from_integer(n), Rational64::from_integer(0))
    }
    pub fn omega() -> Self {
        Self::new(Rational64::from_integer(0), Rational64::from_integer(1))
    }
    pub fn zero() -> Self {
        Self::int(0)
    }
    pub fn is_zero(&self) -> bool {
        self.a == Rational64::from_integer(0) && self.b == Rational64::from_integer(0)
    }
    pub fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b)
    }
    pub fn neg(self) -> Self {
        Self::new(-self.a, -self.b)
    }
    pub fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }
    pub fn mul(self, o: Self) -> Self {
        let three_halves = Rational64::new(3, 2);
        Self::new(self.a * o.a + three_halves * self.b * o.b, self.a * o.b + self.b * o.a)
    }
    pub fn inv(self) -> Option<Self> {
        let n = self.a * self.a - Rational64::new(3, 2) * self.b * self.b;
        if n == Rational64::from_integer(0) {
            return None;
        }
        Some(Self::new(self.a / n, -self.b / n))
    }
    pub fn to_f64(self) -> f64 {
        let f = |r: Rational64| *r.numer() as f64 / *r.denom() as f64;
        f(self.a) + f(self.b) * omega()
    }
}

/// Complex number with components in Q(ω).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QOmegaC {
    pub re: QOmega,
    pub im: QOmega,
}

impl QOmegaC {
    pub fn real(re: QOmega) -> Self {
        Self { re, im: QOmega::zero() }
    }
    pub fn i() -> Self {
        Self {
            re: QOmega::zero(),
            im: QOmega::int(1),
        }
    }
    pub fn zero() -> Self {
        Self::real(QOmega::zero())
    }
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    pub fn add(self, o: Self) -> Self {
        Self {
            re: self.re.add(o.re),
            im: self.im.add(o.im),
        }
    }
    pub fn sub(self, o: Self) -> Self {
        Self {
            re: self.re.sub(o.re),
            im: self.im.sub(o.im),
        }
    }
    pub fn mul(self, o: Self) -> Self {
        Self {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }
    pub fn inv(self) -> Option<Self> {
        let n = self.re.mul(self.re).add(self.im.mul(self.im)).inv()?;
        Some(Self {
            re: self.re.mul(n),
            im: self.im.neg().mul(n),
        })
    }
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

impl std::fmt::Display for QOmega {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} + {}*w", self.a, self.b)
    }
}

impl std::fmt::Display for QOmegaC {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) + i({})", self.re, self.im)
    }
}

/// Coefficients of the change of unknowns.  For the + equation α, β, γ
/// multiply 𝓐₊², 𝓐₊𝓐₋, 𝓐₋²; for the - equation 𝓐₋², 𝓐₊𝓐₋, 𝓐₊².
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalFormCoeffs {
    pub coupling: f64,
    pub alpha_p: Complex64,
    pub alpha_m: Complex64,
    pub beta_p: Complex64,
    pub beta_m: Complex64,
    pub gamma_p: Complex64,
    pub gamma_m: Complex64,
}

/// Exact coefficients per unit coupling, ordered as for [`NormalFormCoeffs`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactCoeffs {
    pub alpha_p: QOmegaC,
    pub alpha_m: QOmegaC,
    pub beta_p: QOmegaC,
    pub beta_m: QOmegaC,
    pub gamma_p: QOmegaC,
    pub gamma_m: QOmegaC,
}

/// Solves the resonance equations exactly for unit coupling.
///
/// With 𝓐₊ ~ e^{iωT}, 𝓐₋ ~ e^{-iωT}, the operator (±i∂_T + ω) acts on the
/// monomial 𝓐₊^p 𝓐₋^q as multiplication by ω(1 ∓ (p - q)).  The right side
/// -(1/2T)(𝓐₊ + 𝓐₋)² has coefficients -1/2, -1, -1/2, and each coefficient
/// k of the correction solves k·ω(1 ∓ (p - q)) + r = 0.
pub fn derive_nf_coeffs_exact() -> Result<ExactCoeffs> {
    let w = QOmega::omega();
    let half = QOmega::new(Rational64::new(-1, 2), Rational64::from_integer(0));
    let rhs = [(2i64, 0i64, half), (1, 1, QOmega::int(-1)), (0, 2, half)];
    let solve = |sign: i64, p: i64, q: i64| -> Result<QOmegaC> {
        let r = rhs.iter().find(|(a, b, _)| *a == p && *b == q).map(|x| x.2).unwrap_or(QOmega::zero());
        let factor = QOmega::int(1 - sign * (p - q)).mul(w);
        let inv = QOmegaC::real(factor)
            .inv()
            .ok_or_else(|| LabError::Invalid(format!("resonant monomial p={p}, q={q}")))?;
        Ok(QOmegaC::real(r.neg()).mul(inv))
    };
    Ok(ExactCoeffs {
        alpha_p: solve(1, 2, 0)?,
        beta_p: solve(1, 1, 1)?,
        gamma_p: solve(1, 0, 2)?,
        alpha_m: solve(-1, 0, 2)?,
        beta_m: solve(-1, 1, 1)?,
        gamma_m: solve(-1, 2, 0)?,
    })
}

/// Coefficients for coupling `c`.
pub fn derive_nf_coeffs(c: f64) -> Result<NormalFormCoeffs> {
    let e = derive_nf_coeffs_exact()?;
    let s = |q: QOmegaC| q.to_complex() * c;
    Ok(NormalFormCoeffs {
        coupling: c,
        alpha_p: s(e.alpha_p),
        alpha_m: s(e.alpha_m),
        beta_p: s(e.beta_p),
        beta_m: s(e.beta_m),
        gamma_p: s(e.gamma_p),
        gamma_m: s(e.gamma_m),
    })
}

/// (𝓐₊, 𝓐₋) → (A₁₊, A₁₋) at time T.
pub fn nf_forward(k: &NormalFormCoeffs, p: Complex64, m: Complex64, t: f64) -> (Complex64, Complex64) {
    (
        p + (k.alpha_p * p * p + k.beta_p * p * m + k.gamma_p * m * m) / t,
        m + (k.alpha_m * m * m + k.beta_m * p * m + k.gamma_m * p * p) / t,
    )
}

/// Inverse of [`nf_forward`] by fixed-point iteration.
pub fn nf_inverse(k: &NormalFormCoeffs, p1: Complex64, m1: Complex64, t: f64) -> Result<(Complex64, Complex64)> {
    let (mut p, mut m) = (p1, m1);
    for _ in 0..200 {
        let (fp, fm) = nf_forward(k, p, m, t);
        let (np, nm) = (p - (fp - p1), m - (fm - m1));
        let change = (np - p).norm() + (nm - m).norm();
        p = np;
        m = nm;
        if change <= 1e-15 * (1.0 + p.norm() + m.norm()) {
            return Ok((p, m));
        }
    }
    Err(LabError::Invalid(format!("normal-form map not invertible at T = {t}")))
}

/// Sampled solution of the amplitude oscillator.
#[derive(Clone, Debug, Serialize)]
pub struct AmplitudeTrajectory {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub a_t: Vec<f64>,
    pub a_plus: Vec<Complex64>,
    pub a_minus: Vec<Complex64>,
    pub a1_plus: Vec<Complex64>,
    pub a1_minus: Vec<Complex64>,
}

struct AmplitudeOde<'a> {
    c: f64,
    forcing: Option<&'a dyn Fn(f64) -> f64>,
}

impl System<f64, Vector2<f64>> for AmplitudeOde<'_> {
    fn system(&self, t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        let extra = self.forcing.map_or(0.0, |f| f(t) / (t * t));
        dy[0] = y[1];
        dy[1] = -1.5 * y[0] - 3.0 * self.c / t * y[0] * y[0] - extra;
    }
}

/// Integrates the oscillator from T0 to T_end with output every `dt_out`.
/// `forcing` supplies R(T) for the -R/T² term (zero when absent).
pub fn integrate_model_ode(
    a0: f64,
    a_t0: f64,
    c: f64,
    t0: f64,
    t_end: f64,
    dt_out: f64,
    forcing: Option<&dyn Fn(f64) -> f64>,
) -> Result<AmplitudeTrajectory> {
    if !(a0.abs() <= 0.5) {
        return Err(LabError::Invalid(format!("initial amplitude {a0} exceeds 0.5")));
    }
    if !(t0 > 0.0 && t_end > t0 && dt_out > 0.0) {
        return Err(LabError::Invalid(format!(
            "need 0 < T0 < T_end and dt_out > 0 (T0 = {t0}, T_end = {t_end}, dt_out = {dt_out})"
        )));
    }
    // The solver's output at its final point is unreliable, so integrate one
    // output interval past T_end and drop the extra sample.
    let mut solver = Dop853::from_param(
        AmplitudeOde { c, forcing },
        t0,
        t_end + dt_out,
        dt_out,
        Vector2::new(a0, a_t0),
        ODE_TOL,
        ODE_TOL,
        0.9,
        0.04,
        0.2,
        10.0,
        dt_out,
        0.0,
        u32::MAX,
        u32::MAX,
        OutputType::Dense,
    );
    solver
        .integrate()
        .map_err(|e| LabError::Integration(format!("amplitude oscillator: {e:?}")))?;
    let coeffs = derive_nf_coeffs(c)?;
    let mut tr = AmplitudeTrajectory {
        t: Vec::new(),
        a: Vec::new(),
        a_t: Vec::new(),
        a_plus: Vec::new(),
        a_minus: Vec::new(),
        a1_plus: Vec::new(),
        a1_minus: Vec::new(),
    };
    for (t, y) in solver.x_out().iter().zip(solver.y_out()) {
        if *t > t_end + 1e-9 * dt_out {
            break;
        }
        let (p, m) = to_apm(y[0], y[1]);
        let (p1, m1) = nf_forward(&coeffs, p, m, *t);
        tr.t.push(*t);
        tr.a.push(y[0]);
        tr.a_t.push(y[1]);
        tr.a_plus.push(p);
        tr.a_minus.push(m);
        tr.a1_plus.push(p1);
        tr.a1_minus.push(m1);
    }
    Ok(tr)
}

/// Dominant frequency (cycles per unit time) of a uniformly sampled real
/// series, and the bin width.
pub fn dominant_frequency(samples: &[f64], dt: f64) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<num_complex::Complex<f64>> = samples.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (best, _) = buf[1..n / 2]
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, c)| if c.norm() > bv { (i + 1, c.norm()) } else { (bi, bv) });
    let width = 1.0 / (n as f64 * dt);
    (best as f64 * width, width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_oscillator_matches_cosine() {
        let tr = integrate_model_ode(0.1, 0.0, 0.0, 10.0, 200.0, 0.5, None).unwrap();
        let w = omega();
        for (t, a) in tr.t.iter().zip(&tr.a) {
            assert!((a - 0.1 * (w * (t - 10.0)).cos()).abs() < 1e-9, "T={t} a={a} n={}", tr.t.len());
        }
        assert!((tr.t.last().unwrap() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn apm_examples() {
        let (p, m) = to_apm(1.0, 0.0);
        assert!((p.re - 1.5_f64.sqrt()).abs() < 1e-15 && p.im == 0.0 && p == m);
        let (a, at) = from_apm(p, m);
        assert!((a - 1.0).abs() < 1e-15 && at == 0.0);
        let (p, m) = to_apm(0.0, 1.0);
        assert_eq!(p, Complex64::new(0.0, -1.0));
        assert_eq!(m, Complex64::new(0.0, 1.0));
    }

    #[test]
    fn zero_coupling_gives_zero_coefficients() {
        let k = derive_nf_coeffs(0.0).unwrap();
        for c in [k.alpha_p, k.alpha_m, k.beta_p, k.beta_m, k.gamma_p, k.gamma_m] {
            assert_eq!(c.norm(), 0.0);
        }
    }

    #[test]
    fn qomega_arithmetic() {
        let w = QOmega::omega();
        assert_eq!(w.mul(w), QOmega::new(Rational64::new(3, 2), Rational64::from_integer(0)));
        let x = QOmega::new(Rational64::new(2, 3), Rational64::new(-1, 5));
        assert_eq!(x.mul(x.inv().unwrap()), QOmega::int(1));
        let z = QOmegaC { re: x, im: w };
        let one = z.mul(z.inv().unwrap());
        assert_eq!(one, QOmegaC::real(QOmega::int(1)));
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(integrate_model_ode(0.6, 0.0, 0.1, 10.0, 20.0, 0.1, None).is_err());
        assert!(integrate_model_ode(0.1, 0.0, 0.1, 10.0, 5.0, 0.1, None).is_err());
    }
}
