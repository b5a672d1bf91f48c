//! Orchestration of a 3D run: initial bump, leapfrog integration, per-step
//! modulation probes, periodic full-grid diagnostics, snapshot emission and
//! streaming capture of the modulated fields on hyperboloids.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::LabConfig;
use crate::diagnostics::weighted_sup;
use crate::error::{LabError, Result};
use crate::evolution::{bump_initial_state, discrete_energy, edge_amplitudes, support_radius, Integrator, Model, WaveState};
use crate::fields::{interpolate_columns, Columnar, Grid1D, TransverseGrid};
use crate::hyperbolic::{from_hyper, HyperField, HyperGrid, HyperPoint, HyperSlice};
use crate::modulation::{ColumnSplit, Modulator};
use crate::normalform::{coupling_constant, derive_nf_coeffs, NormalFormCoeffs};
use crate::quadrature::hermite;

/// Half-width of the x-window for local sups of ψ.
pub const LOCAL_X: f64 = 5.0;
/// Edge amplitude, relative to epsilon, that counts as reaching the boundary.
pub const CONTAINMENT_REL_TOL: f64 = 1e-2;
/// Transverse cells kept clear of the periodic seam by hyperboloid points.
const SEAM_MARGIN_CELLS: f64 = 3.0;

/// Modulation parameters of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeValues {
    pub sigma: f64,
    pub a: f64,
    /// max |ψ| over |x| ≤ 5.
    pub psi_local_sup: f64,
}

/// Probes taken every step at y = 0 and at y = (t/2, 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeSample {
    pub t: f64,
    pub center: ProbeValues,
    pub cone: ProbeValues,
}

/// Full-grid diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticSample {
    pub t: f64,
    pub energy: f64,
    pub support_radius: f64,
    /// max |w| √(1+t) √(1+|t - |y||)
    pub weighted_sup: f64,
    pub max_w: f64,
    pub edge_x: f64,
    pub edge_y: f64,
    pub sigma_max: f64,
    pub a_max: f64,
    /// max over y of the local-in-x sup of ψ.
    pub psi_local_sup: f64,
    pub psi_global_sup: f64,
    pub newton_iters: usize,
}

/// Summary of a run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub dt: f64,
    pub n_steps: usize,
    pub probes: Vec<ProbeSample>,
    pub diagnostics: Vec<DiagnosticSample>,
    pub snapshot_times: Vec<f64>,
    /// max over diagnostic times t > 0 of (R(t) - K) / t.
    pub support_growth: f64,
    pub normal_form: NormalFormCoeffs,
    #[serde(skip)]
    pub hyper_slices: Vec<HyperSlice>,
}

impl RunReport {
    /// Final over initial weighted sup; `None` for zero data.
    pub fn weighted_sup_ratio(&self) -> Option<f64> {
        let a = self.diagnostics.first()?.weighted_sup;
        let b = self.diagnostics.last()?.weighted_sup;
        (a > 0.0).then_some(b / a)
    }
}

/// Hooks called while a run progresses.
pub trait RunObserver {
    fn on_probe(&mut self, _p: &ProbeSample) -> Result<()> {
        Ok(())
    }
    fn on_diagnostic(&mut self, _d: &DiagnosticSample) -> Result<()> {
        Ok(())
    }
    fn on_snapshot(&mut self, _s: &WaveState, _gx: &Grid1D, _gy: &TransverseGrid) -> Result<()> {
        Ok(())
    }
    fn on_hyper_slice(&mut self, _s: &HyperSlice) -> Result<()> {
        Ok(())
    }
}

struct Silent;
impl RunObserver for Silent {}

pub fn run(cfg: &LabConfig) -> Result<RunReport> {
    run_with(cfg, &mut Silent)
}

fn local_sup(gx: &Grid1D, psi: &[f64]) -> f64 {
    psi.iter()
        .enumerate()
        .filter(|(i, _)| gx.x(*i).abs() <= LOCAL_X)
        .fold(0.0_f64, |m, (_, v)| m.max(v.abs()))
}

fn probe_values(md: &Modulator, col: &[f64]) -> Result<ProbeValues> {
    let s = md.decompose_column(col)?;
    Ok(ProbeValues {
        sigma: s.sigma,
        a: s.a,
        psi_local_sup: local_sup(md.grid(), &s.psi),
    })
}

fn probe(md: &Modulator, gy: &TransverseGrid, s: &WaveState, buf: &mut [f64]) -> Result<ProbeSample> {
    let center = probe_values(md, s.w.column(gy.n_y() / 2, gy.n_y() / 2))?;
    interpolate_columns(&s.w, gy, 0.5 * s.t, 0.0, buf);
    let cone = probe_values(md, buf)?;
    Ok(ProbeSample { t: s.t, center, cone })
}

fn diagnose(cfg: &LabConfig, m: &Model, md: &Modulator, s: &WaveState) -> Result<DiagnosticSample> {
    let gx = m.gx();
    let n = gx.n_x();
    let splits: Vec<Result<(ColumnSplit, f64, f64)>> = s
        .w
        .values()
        .par_chunks(n)
        .map(|c| {
            let sp = md.decompose_column(c)?;
            let loc = local_sup(gx, &sp.psi);
            let glob = sp.psi.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            Ok((sp, loc, glob))
        })
        .collect();
    let mut d = DiagnosticSample {
        t: s.t,
        energy: discrete_energy(m, s)?,
        support_radius: support_radius(m, s, cfg.support_rel_tol * cfg.epsilon),
        weighted_sup: weighted_sup(m, s),
        max_w: s.w.max_abs(),
        edge_x: 0.0,
        edge_y: 0.0,
        sigma_max: 0.0,
        a_max: 0.0,
        psi_local_sup: 0.0,
        psi_global_sup: 0.0,
        newton_iters: 0,
    };
    (d.edge_x, d.edge_y) = edge_amplitudes(m, s);
    for r in splits {
        let (sp, loc, glob) = r?;
        d.sigma_max = d.sigma_max.max(sp.sigma.abs());
        d.a_max = d.a_max.max(sp.a.abs());
        d.psi_local_sup = d.psi_local_sup.max(loc);
        d.psi_global_sup = d.psi_global_sup.max(glob);
        d.newton_iters = d.newton_iters.max(sp.newton_iters);
    }
    Ok(d)
}

/// Largest cell-centred R range on hyperboloid level `t_top` that stays
/// below t_end and away from the transverse seam; the flag is set when the
/// seam is the binding constraint.
fn r_extent(cfg: &LabConfig, gy: &TransverseGrid, t_top: f64) -> (f64, bool) {
    let light = ((cfg.t_end + 2.0 * cfg.k) / t_top).acosh();
    let room = ((0.5 * cfg.side - SEAM_MARGIN_CELLS * gy.dy()) / t_top).asinh();
    if room < light {
        (room, true)
    } else {
        (light, false)
    }
}

struct Capture {
    slice: usize,
    j: usize,
    m: usize,
    n: usize,
    t: f64,
    y: [f64; 2],
}

/// Hyperboloid points sampled by Hermite interpolation in t between steps.
struct HyperCapture {
    grids: Vec<(HyperGrid, bool)>,
    points: Vec<Capture>,
    next: usize,
    /// w columns at the captured points, per slice.
    columns: Vec<HyperField>,
    remaining: Vec<usize>,
    start: Vec<(Vec<f64>, Vec<f64>)>,
}

impl HyperCapture {
    fn new(cfg: &LabConfig, gy: &TransverseGrid, n_x: usize) -> Result<Self> {
        let mut grids = Vec::new();
        let mut points = Vec::new();
        for (si, &tc) in cfg.hyper_slices.iter().enumerate() {
            let (r_max, truncated) = r_extent(cfg, gy, tc + cfg.hyper_dt);
            let dr = r_max / cfg.hyper_nr as f64;
            let g = HyperGrid::new(tc - cfg.hyper_dt, cfg.hyper_dt, 3, 0.5 * dr, dr, cfg.hyper_nr, cfg.hyper_ntheta, cfg.k)
                .map_err(|e| LabError::config("hyper_slices", format!("slice T = {tc}: {e}")))?;
            for j in 0..3 {
                for m in 0..g.n_r {
                    for n in 0..g.n_theta {
                        let h = HyperPoint {
                            t_hyp: g.t_at(j),
                            r: g.r_at(m),
                            theta: g.theta_at(n),
                        };
                        let (t, y) = from_hyper(h, cfg.k);
                        points.push(Capture { slice: si, j, m, n, t, y });
                    }
                }
            }
            grids.push((g, truncated));
        }
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        let columns = grids.iter().map(|(g, _)| HyperField::zeros(g, n_x)).collect();
        let remaining = grids.iter().map(|(g, _)| g.len()).collect();
        Ok(Self {
            grids,
            points,
            next: 0,
            columns,
            remaining,
            start: Vec::new(),
        })
    }

    fn done(&self) -> bool {
        self.next == self.points.len()
    }

    /// Number of points whose time lies in (t0, t0 + dt].
    fn pending(&self, t0: f64, dt: f64) -> usize {
        self.points[self.next..]
            .iter()
            .take_while(|p| p.t <= t0 + dt)
            .count()
    }

    fn begin_step(&mut self, s: &WaveState, gy: &TransverseGrid, dt: f64) {
        let k = self.pending(s.t, dt);
        let n = s.w.inner_len();
        self.start = self.points[self.next..self.next + k]
            .iter()
            .map(|p| {
                let mut f = vec![0.0; n];
                let mut d = vec![0.0; n];
                interpolate_columns(&s.w, gy, p.y[0], p.y[1], &mut f);
                interpolate_columns(&s.w_t, gy, p.y[0], p.y[1], &mut d);
                (f, d)
            })
            .collect();
    }

    /// Completes the points opened by `begin_step`; returns indices of
    /// slices whose capture is now complete.
    fn end_step(&mut self, s: &WaveState, gy: &TransverseGrid, dt: f64) -> Vec<usize> {
        let n = s.w.inner_len();
        let t0 = s.t - dt;
        let mut f1 = vec![0.0; n];
        let mut d1 = vec![0.0; n];
        let mut finished = Vec::new();
        let start = std::mem::take(&mut self.start);
        for (f0, d0) in start {
            let p = &self.points[self.next];
            interpolate_columns(&s.w, gy, p.y[0], p.y[1], &mut f1);
            interpolate_columns(&s.w_t, gy, p.y[0], p.y[1], &mut d1);
            let u = ((p.t - t0) / dt).clamp(0.0, 1.0);
            let dst = self.columns[p.slice].point_mut(p.j, p.m, p.n);
            for q in 0..n {
                dst[q] = hermite(f0[q], d0[q], f1[q], d1[q], dt, u);
            }
            self.remaining[p.slice] -= 1;
            if self.remaining[p.slice] == 0 {
                finished.push(p.slice);
            }
            self.next += 1;
        }
        finished
    }

    /// Decomposes the captured columns of a slice and scales by T.
    fn build_slice(&self, si: usize, md: &Modulator, gx: &Grid1D, t_center: f64) -> Result<HyperSlice> {
        let (g, truncated) = &self.grids[si];
        let cols = &self.columns[si];
        let n = gx.n_x();
        let splits: Vec<Result<ColumnSplit>> = cols.data.par_chunks(n).map(|c| md.decompose_column(c)).collect();
        let mut psi = HyperField::zeros(g, n);
        let mut cal_a = HyperField::zeros(g, 1);
        let mut sigma = HyperField::zeros(g, 1);
        let per_level = g.n_r * g.n_theta;
        for (idx, r) in splits.into_iter().enumerate() {
            let sp = r?;
            let t_lvl = g.t_at(idx / per_level);
            cal_a.data[idx] = t_lvl * sp.a;
            sigma.data[idx] = t_lvl * sp.sigma;
            for (d, v) in psi.data[idx * n..(idx + 1) * n].iter_mut().zip(&sp.psi) {
                *d = t_lvl * v;
            }
        }
        Ok(HyperSlice {
            t_center,
            psi,
            cal_a,
            sigma,
            x_grid: gx.clone(),
            truncated: *truncated,
        })
    }
}

/// Runs the configured experiment, reporting progress to `obs`.
pub fn run_with(cfg: &LabConfig, obs: &mut dyn RunObserver) -> Result<RunReport> {
    cfg.validate()?;
    let gx = cfg.x_grid()?;
    let gy = cfg.y_grid()?;
    let dt = cfg.dt()?;
    let n_steps = cfg.n_steps()?;
    let model = Model::new(&gx, &gy);
    let md = Modulator::new(&gx).with_eps0(cfg.eps0);
    let nf = derive_nf_coeffs(coupling_constant(md.kink()))?;
    let init = bump_initial_state(&gx, &gy, cfg.epsilon, cfg.k, cfg.bump_center_x);
    let mut it = Integrator::new(model, init)?;

    let every = |cadence: f64| ((cadence / dt).round() as usize).max(1);
    let diag_every = every(cfg.diag_dt);
    let snap_every = (cfg.snapshot_dt > 0.0).then(|| every(cfg.snapshot_dt));
    let mut capture = if cfg.hyper_slices.is_empty() {
        None
    } else {
        Some(HyperCapture::new(cfg, &gy, gx.n_x())?)
    };
    let edge_tol = CONTAINMENT_REL_TOL * cfg.epsilon;

    let mut report = RunReport {
        config_hash: cfg.hash(),
        dt,
        n_steps,
        probes: Vec::with_capacity(n_steps + 1),
        diagnostics: Vec::new(),
        snapshot_times: Vec::new(),
        support_growth: 0.0,
        normal_form: nf,
        hyper_slices: Vec::new(),
    };
    let mut buf = vec![0.0; gx.n_x()];
    for step in 0..=n_steps {
        let s = it.state();
        let p = probe(&md, &gy, s, &mut buf)?;
        obs.on_probe(&p)?;
        report.probes.push(p);
        if step % diag_every == 0 || step == n_steps {
            let d = diagnose(cfg, it.model(), &md, s)?;
            if d.edge_x > edge_tol || d.edge_y > edge_tol {
                let edge = if d.edge_x > edge_tol {
                    format!("x boundary, amplitude {:e}", d.edge_x)
                } else {
                    format!("transverse seam, amplitude {:e}", d.edge_y)
                };
                return Err(LabError::Containment { t: d.t, edge });
            }
            if d.t > 0.0 {
                report.support_growth = report.support_growth.max((d.support_radius - cfg.k) / d.t);
            }
            obs.on_diagnostic(&d)?;
            report.diagnostics.push(d);
        }
        if snap_every.is_some_and(|k| step % k == 0) {
            obs.on_snapshot(s, &gx, &gy)?;
            report.snapshot_times.push(s.t);
        }
        if step == n_steps {
            break;
        }
        if let Some(c) = capture.as_mut() {
            c.begin_step(it.state(), &gy, dt);
        }
        it.advance(dt)?;
        if let Some(c) = capture.as_mut() {
            for si in c.end_step(it.state(), &gy, dt) {
                let sl = c.build_slice(si, &md, &gx, cfg.hyper_slices[si])?;
                obs.on_hyper_slice(&sl)?;
                report.hyper_slices.push(sl);
            }
        }
    }
    if let Some(c) = &capture {
        if !c.done() {
            return Err(LabError::Invalid("hyperboloid capture incomplete at t_end".into()));
        }
    }
    Ok(report)
}
