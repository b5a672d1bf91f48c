//! Decay-rate fits, the weighted sup norm of the perturbation, the energy
//! panel on hyperboloids, the energy growth fit and the residual of the
//! modulated equations for (a, σ).

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evolution::{Model, WaveState};
use crate::fields::{inner_x, laplacian_y, Columnar, ScalarField2, TransverseGrid};
use crate::hyperbolic::{morawetz_energy, tilde_energy, weighted_l2, HyperField, MorawetzEnergy};
use crate::modulation::{ModulationState, Modulator};
use crate::quadrature::least_squares_line;
use crate::spectral::SpectralH;

/// Positive samples (T_j, v_j) with strictly increasing T.
#[derive(Clone, Debug, PartialEq)]
pub struct DecaySeries {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl DecaySeries {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.len() != v.len() {
            return Err(LabError::Dimension(format!("{} times, {} values", t.len(), v.len())));
        }
        if t.len() < 8 {
            return Err(LabError::Invalid(format!("need at least 8 samples, have {}", t.len())));
        }
        if t.windows(2).any(|p| !(p[1] > p[0])) || !(t[0] > 0.0) {
            return Err(LabError::Invalid("times must be positive and strictly increasing".into()));
        }
        if let Some(bad) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(LabError::Invalid(format!("non-positive value {bad} in decay series")));
        }
        if t[t.len() - 1] < 4.0 * t[0] {
            return Err(LabError::Invalid(format!(
                "times span [{}, {}], less than a factor 4",
                t[0],
                t[t.len() - 1]
            )));
        }
        Ok(Self { t, v })
    }

    /// Samples with t in [t_min, t_max].
    pub fn windowed(t: &[f64], v: &[f64], t_min: f64, t_max: f64) -> Result<Self> {
        let (tt, vv): (Vec<f64>, Vec<f64>) = t
            .iter()
            .zip(v)
            .filter(|(a, _)| **a >= t_min && **a <= t_max)
            .map(|(a, b)| (*a, *b))
            .unzip();
        Self::new(tt, vv)
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }
    pub fn values(&self) -> &[f64] {
        &self.v
    }
}

/// v ≈ C T^p fitted by least squares in log-log coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// RMS residual in log space.
    pub residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

pub fn fit_decay(s: &DecaySeries) -> DecayFit {
    let lt: Vec<f64> = s.t.iter().map(|t| t.ln()).collect();
    let lv: Vec<f64> = s.v.iter().map(|v| v.ln()).collect();
    let (p, c, r) = least_squares_line(&lt, &lv);
    DecayFit {
        exponent: p,
        amplitude: c.exp(),
        residual: r,
        window: (s.t[0], s.t[s.t.len() - 1]),
        samples: s.t.len(),
    }
}

/// Local maxima of |v| (the oscillation envelope).
pub fn envelope_peaks(t: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pt = Vec::new();
    let mut pv = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        let (a, b, c) = (v[i - 1].abs(), v[i].abs(), v[i + 1].abs());
        if b >= a && b > c {
            pt.push(t[i]);
            pv.push(b);
        }
    }
    (pt, pv)
}

/// max |w| √(1+t) √(1+|t - |y||) over the grid.
pub fn weighted_sup(m: &Model, s: &WaveState) -> f64 {
    let gy = m.gy();
    let n = m.gx().n_x();
    let ny = gy.n_y();
    let t = s.t;
    let mut best = 0.0_f64;
    for iy2 in 0..ny {
        for iy1 in 0..ny {
            let (a, b) = (gy.abs_y(iy1), gy.abs_y(iy2));
            let ry = (a * a + b * b).sqrt();
            let weight = (1.0 + t).sqrt() * (1.0 + (t - ry).abs()).sqrt();
            let col = s.w.column(iy1, iy2);
            let cmax = col[..n].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            best = best.max(cmax * weight);
        }
    }
    best
}

/// Energies on one hyperboloid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyPanel {
    pub t_hyp: f64,
    /// Ẽ(T, Σ)
    pub e_tilde: f64,
    /// E₍₁₎(T, Ψ)
    pub e1: f64,
    /// E₍₂₎(T, 𝓐)
    pub e2: f64,
    /// E₍₁₎ + E₍₂₎
    pub e_total: f64,
    /// 𝓔₁(T, Σ)
    pub morawetz1: f64,
    /// 𝓔₂(T, Σ)
    pub morawetz2: f64,
    /// Some field still carries >1% of its maximum at the outer R ring.
    pub boundary_not_decayed: bool,
}

/// Energy panel on T-level `j` of the three modulated fields; Ψ carries the
/// x-columns as inner axis and BΨ is evaluated with the discrete spectral
/// decomposition of H.
pub fn energy_panel(psi: &HyperField, cal_a: &HyperField, sigma: &HyperField, j: usize, h: &SpectralH) -> Result<EnergyPanel> {
    if psi.inner != h.grid().n_x() || cal_a.inner != 1 || sigma.inner != 1 {
        return Err(LabError::Dimension("energy panel expects Ψ columns on the operator grid".into()));
    }
    let xw = h.grid().weights();
    let g = &psi.grid;
    let mut b_term = 0.0;
    for m in 0..g.n_r {
        let sh = g.r_at(m).sinh();
        for n in 0..g.n_theta {
            b_term += h.b_norm_sq(psi.point(j, m, n))? * sh;
        }
    }
    b_term *= g.dr * g.dtheta();
    let e1 = tilde_energy(psi, j, Some(&xw))? + b_term;
    let e2 = tilde_energy(cal_a, j, None)? + 1.5 * weighted_l2(cal_a, j, None);
    let (m1, f1) = morawetz_energy(sigma, j, MorawetzEnergy::E1, None)?;
    let (m2, _) = morawetz_energy(sigma, j, MorawetzEnergy::E2, None)?;
    let flag = f1
        || crate::hyperbolic::boundary_not_decayed(cal_a, j)
        || crate::hyperbolic::boundary_not_decayed(psi, j);
    Ok(EnergyPanel {
        t_hyp: g.t_at(j),
        e_tilde: tilde_energy(sigma, j, None)?,
        e1,
        e2,
        e_total: e1 + e2,
        morawetz1: m1,
        morawetz2: m2,
        boundary_not_decayed: flag,
    })
}

/// Power-law fit of an energy proxy against T.
pub fn growth_check(t: &[f64], e: &[f64]) -> Result<DecayFit> {
    if t.len() < 6 {
        return Err(LabError::Invalid(format!("need energies at >= 6 slices, have {}", t.len())));
    }
    let lt: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    if e.iter().any(|v| !(*v > 0.0)) {
        return Err(LabError::Invalid("energies must be positive".into()));
    }
    let le: Vec<f64> = e.iter().map(|x| x.ln()).collect();
    let (p, c, r) = least_squares_line(&lt, &le);
    Ok(DecayFit {
        exponent: p,
        amplitude: c.exp(),
        residual: r,
        window: (t[0], t[t.len() - 1]),
        samples: t.len(),
    })
}

/// Left and right sides of the modulated equations for a and σ.
#[derive(Clone, Debug, Serialize)]
pub struct ModulatedSystemReport {
    /// max_y |LHS - RHS| of the a-equation.
    pub residual_a: f64,
    /// max_y of the sum of magnitudes of the a-equation terms.
    pub scale_a: f64,
    pub relative_a: f64,
    pub residual_sigma: f64,
    pub scale_sigma: f64,
    pub relative_sigma: f64,
    /// max_y |3a²⟨th φ², th′⟩|, zero by parity.
    pub parity_term: f64,
}

fn ratio(r: f64, s: f64) -> f64 {
    if s > 0.0 {
        r / s
    } else {
        0.0
    }
}

/// Central first derivatives of a periodic transverse field.
fn gradient(f: &ScalarField2, gy: &TransverseGrid) -> (ScalarField2, ScalarField2) {
    let n = gy.n_y();
    let h = 2.0 * gy.dy();
    let mut d1 = ScalarField2::zeros(n);
    let mut d2 = ScalarField2::zeros(n);
    for b in 0..n {
        for a in 0..n {
            d1.set(a, b, (f.get((a + 1) % n, b) - f.get((a + n - 1) % n, b)) / h);
            d2.set(a, b, (f.get(a, (b + 1) % n) - f.get(a, (b + n - 1) % n)) / h);
        }
    }
    (d1, d2)
}

/// Evaluates both modulated equations at the middle of three snapshots
/// spaced `dt` apart.
pub fn check_modulated_system(frames: &[WaveState], dt: f64, gy: &TransverseGrid, md: &Modulator) -> Result<ModulatedSystemReport> {
    if frames.len() != 3 {
        return Err(LabError::Invalid(format!("need 3 snapshots, have {}", frames.len())));
    }
    for p in frames.windows(2) {
        if ((p[1].t - p[0].t) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(LabError::Invalid(format!(
                "snapshot cadence {} does not match dt = {dt}",
                p[1].t - p[0].t
            )));
        }
    }
    let gx = md.grid();
    let k = md.kink();
    let states: Vec<ModulationState> = frames.iter().map(|f| md.decompose(&f.w)).collect::<Result<_>>()?;
    let psi_phi1: Vec<ScalarField2> = states.iter().map(|s| inner_x(&s.psi, &k.phi1, gx)).collect::<Result<_>>()?;
    let psi_th2: Vec<ScalarField2> = states.iter().map(|s| inner_x(&s.psi, &k.th2, gx)).collect::<Result<_>>()?;
    let n = gy.n_y();
    let dt_of = |f: &[ScalarField2], a: usize, b: usize| (f[2].get(a, b) - f[0].get(a, b)) / (2.0 * dt);
    let dtt_of = |f: &[ScalarField2], a: usize, b: usize| (f[2].get(a, b) - 2.0 * f[1].get(a, b) + f[0].get(a, b)) / (dt * dt);
    let sig: Vec<ScalarField2> = states.iter().map(|s| s.sigma.clone()).collect();
    let amp: Vec<ScalarField2> = states.iter().map(|s| s.a.clone()).collect();
    let lap_s = laplacian_y(&sig[1], gy)?;
    let lap_a = laplacian_y(&amp[1], gy)?;
    let (s1, s2) = gradient(&sig[1], gy);
    let (a1, a2) = gradient(&amp[1], gy);
    let (p1, p2) = gradient(&psi_phi1[1], gy);
    let (q1, q2) = gradient(&psi_th2[1], gy);

    let dot = |f: &[f64], g: &[f64]| gx.dot(f, g);
    let th1_sq = dot(&k.th1, &k.th1);
    let phi1_sq = dot(&k.phi1, &k.phi1);
    let th2_phi = dot(&k.th2, &k.phi);
    let phi1_th1 = dot(&k.phi1, &k.th1);
    let th_phi2: Vec<f64> = (0..gx.n_x()).map(|i| k.th[i] * k.phi[i] * k.phi[i]).collect();
    let th_phi2_th1 = dot(&th_phi2, &k.th1);

    let mut rep = ModulatedSystemReport {
        residual_a: 0.0,
        scale_a: 0.0,
        relative_a: 0.0,
        residual_sigma: 0.0,
        scale_sigma: 0.0,
        relative_sigma: 0.0,
        parity_term: 0.0,
    };
    let nx = gx.n_x();
    let mut v = vec![0.0; nx];
    for b in 0..n {
        for a in 0..n {
            let s_t = dt_of(&sig, a, b);
            let a_t = dt_of(&amp, a, b);
            let q0 = |ft: f64, f1: f64, f2: f64, gt: f64, g1: f64, g2: f64| ft * gt - f1 * g1 - f2 * g2;
            let q_ss = q0(s_t, s1.get(a, b), s2.get(a, b), s_t, s1.get(a, b), s2.get(a, b));
            let q_sa = q0(s_t, s1.get(a, b), s2.get(a, b), a_t, a1.get(a, b), a2.get(a, b));
            let q_sp = q0(
                s_t,
                s1.get(a, b),
                s2.get(a, b),
                dt_of(&psi_phi1, a, b),
                p1.get(a, b),
                p2.get(a, b),
            );
            let q_sq = q0(
                s_t,
                s1.get(a, b),
                s2.get(a, b),
                dt_of(&psi_th2, a, b),
                q1.get(a, b),
                q2.get(a, b),
            );
            let box_s = dtt_of(&sig, a, b) - lap_s.get(a, b);
            let am = amp[1].get(a, b);
            let psi = states[1].psi.column(a, b);
            for i in 0..nx {
                v[i] = am * k.phi[i] + psi[i];
            }
            let mut g2 = 0.0;
            let mut g3 = 0.0;
            let mut h2 = 0.0;
            let mut h3 = 0.0;
            let mut psi_phi2 = 0.0;
            let mut psi_th3 = 0.0;
            let w = gx.weights();
            for i in 0..nx {
                let v2 = v[i] * v[i];
                g2 += w[i] * 3.0 * k.th[i] * v2 * k.phi[i];
                g3 += w[i] * v2 * v[i] * k.phi[i];
                h2 += w[i] * 3.0 * k.th[i] * v2 * k.th1[i];
                h3 += w[i] * v2 * v[i] * k.th1[i];
                psi_phi2 += w[i] * psi[i] * k.phi2[i];
                psi_th3 += w[i] * psi[i] * k.th3[i];
            }
            let pp1 = psi_phi1[1].get(a, b);
            let pt2 = psi_th2[1].get(a, b);

            let lhs_a = dtt_of(&amp, a, b) - lap_a.get(a, b) + 1.5 * am;
            let terms_a = [
                -g2,
                -g3,
                -pp1 * box_s,
                -q_ss * th2_phi,
                -2.0 * q_sp,
                -q_ss * psi_phi2,
                am * q_ss * phi1_sq,
            ];
            let rhs_a: f64 = terms_a.iter().sum();
            let scale_a = dtt_of(&amp, a, b).abs()
                + lap_a.get(a, b).abs()
                + 1.5 * am.abs()
                + terms_a.iter().map(|x| x.abs()).sum::<f64>();

            let lhs_s = box_s * (th1_sq + am * phi1_th1 - pt2);
            let terms_s = [h2, h3, 2.0 * q_sq, -2.0 * q_sa * phi1_th1, q_ss * psi_th3];
            let rhs_s: f64 = terms_s.iter().sum();
            let scale_s = lhs_s.abs() + terms_s.iter().map(|x| x.abs()).sum::<f64>();

            rep.residual_a = rep.residual_a.max((lhs_a - rhs_a).abs());
            rep.scale_a = rep.scale_a.max(scale_a);
            rep.residual_sigma = rep.residual_sigma.max((lhs_s - rhs_s).abs());
            rep.scale_sigma = rep.scale_sigma.max(scale_s);
            rep.parity_term = rep.parity_term.max((3.0 * am * am * th_phi2_th1).abs());
        }
    }
    rep.relative_a = ratio(rep.residual_a, rep.scale_a);
    rep.relative_sigma = ratio(rep.residual_sigma, rep.scale_sigma);
    Ok(rep)
}
