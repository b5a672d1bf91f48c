//! Acceptance suite: runs the ten criteria in order at their stated
//! tolerances and prints one PASS/FAIL line for each.
//!
//! Run with `cargo test -p kinklab --test acceptance -- --nocapture`
//! to see the report.  Criterion 10 is a full desk-scale 3D run; its decay
//! exponents are soft trend checks that print FAIL without failing the test,
//! while every other check is hard.

mod common;

use std::time::Instant;

use kinklab::config::LabConfig;
use kinklab::diagnostics::{envelope_peaks, fit_decay, DecaySeries};
use kinklab::evolution::{Integrator, Model, WaveState};
use kinklab::fields::{inner_x, random_smooth_field, Columnar, Grid1D, ScalarField3, TransverseGrid};
use kinklab::kink::{self, build_kink_tables};
use kinklab::modulation::Modulator;
use kinklab::normalform::{coupling_constant, derive_nf_coeffs_exact, integrate_model_ode};
use kinklab::runner::run;
use kinklab::scattering::jost_transmission;
use kinklab::spectral::{build_h, eigenfunction_residuals, eigenvalue_by_bisection};

use common::normal_form::{minus_map, plus_map, quadratic_residual};
use common::{geometry_identities, observed_order};

struct Outcome {
    pass: bool,
    /// Whether the hard checks passed; differs from `pass` only when a
    /// soft trend check failed.
    hard_pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, hard_pass: pass, detail }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn spectral_exactness() -> Outcome {
    let exact = [-2.0, -0.5];
    let h = build_h(&Grid1D::with_spacing(20.0, 0.05).unwrap()).unwrap();
    let errs: Vec<f64> = (0..2).map(|n| (h.bound_pairs()[n].0 - exact[n]).abs()).collect();
    let mut pass = errs.iter().all(|e| *e < 5e-3);
    let mut orders = Vec::new();
    for (n, e) in exact.iter().enumerate() {
        let lv: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|dx| (eigenvalue_by_bisection(&Grid1D::with_spacing(20.0, *dx).unwrap(), n) - e).abs())
            .collect();
        for w in lv.windows(2) {
            let p = observed_order(w[0], w[1]);
            pass &= (1.8..=2.2).contains(&p);
            orders.push(p);
        }
    }
    outcome(pass, format!("errors {:.2e}, {:.2e} at dx = 0.05, orders {orders:.3?}", errs[0], errs[1]))
}

fn resonance() -> Outcome {
    let r: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|dx| eigenfunction_residuals(&Grid1D::with_spacing(20.0, *dx).unwrap()).resonance_rel)
        .collect();
    let orders = [observed_order(r[0], r[1]), observed_order(r[1], r[2])];
    let pass = r[1] < 1e-2 && orders.iter().all(|p| (1.8..=2.2).contains(p));
    outcome(pass, format!("relative residual {:.3e} at dx = 0.05, orders {orders:.3?}", r[1]))
}

fn scattering_endpoint() -> Outcome {
    let r = jost_transmission(0.0).unwrap();
    let a = r.jost_limit_a.unwrap_or(f64::NAN);
    let t = r.transmission;
    let pass = (a - 1.0).abs() <= 1e-6 && (t.re - 1.0).abs() <= 1e-6 && t.im.abs() <= 1e-6;
    outcome(pass, format!("a = {a:.12}, T(0) = {:.12} {:+.3e}i", t.re, t.im))
}

fn dispersive_decay() -> Outcome {
    let fit = common::dispersive_fit();
    outcome(
        (-0.65..=-0.35).contains(&fit.exponent),
        format!("exponent {:.4} over t in [10, 100]", fit.exponent),
    )
}

fn modulation_round_trip() -> Outcome {
    let g = Grid1D::with_spacing(20.0, 0.05).unwrap();
    let gy = TransverseGrid::new(8.0, 8).unwrap();
    let md = Modulator::new(&g);
    let mut round = 0.0_f64;
    let mut ortho = 0.0_f64;
    for seed in 0..4 {
        let w = random_smooth_field(&g, &gy, seed, 1e-3, 5.0);
        let m = md.decompose(&w).unwrap();
        round = round.max(sup_diff(md.reconstruct(&m).unwrap().values(), w.values()));
        let (d0, d1) = md.orthogonality_defect(&m);
        ortho = ortho.max(d0).max(d1);
    }
    let s = 0.05;
    let col = g.sample(|x| kink::th(x - s) - kink::th(x));
    let m = md.decompose(&ScalarField3::from_profile(&col, gy.n_y())).unwrap();
    let shift = m.sigma.values().iter().fold(0.0_f64, |e, v| e.max((v - s).abs()));
    let (d0, d1) = md.orthogonality_defect(&m);
    ortho = ortho.max(d0).max(d1);
    let pass = round <= 1e-9 && shift <= 1e-10 && ortho <= 1e-8;
    outcome(pass, format!("round trip {round:.2e}, shift error {shift:.2e}, orthogonality {ortho:.2e}"))
}

/// Angular frequency from interpolated zero crossings of a mean-free series.
fn crossing_frequency(t: &[f64], v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut crossings = Vec::new();
    for i in 1..v.len() {
        let (a, b) = (v[i - 1] - mean, v[i] - mean);
        if a == 0.0 || a * b < 0.0 {
            crossings.push(t[i - 1] + (t[i] - t[i - 1]) * a / (a - b));
        }
    }
    let n = crossings.len();
    std::f64::consts::PI * (n - 1) as f64 / (crossings[n - 1] - crossings[0])
}

fn internal_mode_frequency() -> Outcome {
    let gx = Grid1D::with_spacing(20.0, 0.05).unwrap();
    let m = Model::new(&gx, &TransverseGrid::new(8.0, 8).unwrap());
    let k = build_kink_tables(&gx);
    let eps = 1e-2;
    let mut s = WaveState::zeros(&gx, m.gy());
    let col: Vec<f64> = k.phi.iter().map(|v| eps * v).collect();
    s.w = ScalarField3::from_profile(&col, m.gy().n_y());
    s.enforce_dirichlet();
    let dt = m.max_dt();
    let mut it = Integrator::new(m.clone(), s).unwrap();
    let (mut t, mut a) = (vec![0.0], vec![eps]);
    let t_end = 20.0 * std::f64::consts::TAU / 1.5_f64.sqrt();
    while it.state().t < t_end {
        it.advance(dt).unwrap();
        t.push(it.state().t);
        a.push(inner_x(&it.state().w, &k.phi, &gx).unwrap().get(0, 0));
    }
    let f = crossing_frequency(&t, &a);
    let want = 1.5_f64.sqrt();
    outcome((f - want).abs() <= 1e-2, format!("frequency {f:.5} vs {want:.5}"))
}

fn geometry() -> Outcome {
    let all = geometry_identities();
    let bad: Vec<String> = all
        .iter()
        .filter(|(_, c)| !c.is_second_order())
        .map(|(n, c)| format!("{n}: {c:?}"))
        .collect();
    let detail = if bad.is_empty() {
        format!("{} identities exact or second order", all.len())
    } else {
        format!("failing: {}", bad.join("; "))
    };
    outcome(bad.is_empty(), detail)
}

fn normal_form() -> Outcome {
    let e = derive_nf_coeffs_exact().unwrap();
    let symbolic = quadratic_residual(&plus_map(&e), 1).is_zero() && quadratic_residual(&minus_map(&e), -1).is_zero();
    let c = coupling_constant(&build_kink_tables(&Grid1D::with_spacing(20.0, 0.05).unwrap()));
    let tr = integrate_model_ode(0.1, 0.0, c, 10.0, 1000.0, 0.05, None).unwrap();
    let sup = tr.a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let a: Vec<f64> = tr.t.iter().zip(&tr.a).map(|(t, v)| v / t).collect();
    let (pt, pv) = envelope_peaks(&tr.t, &a);
    let fit = fit_decay(&DecaySeries::windowed(&pt, &pv, 10.0, 1000.0).unwrap());
    let pass = symbolic && sup.is_finite() && sup <= 0.2 && (fit.exponent + 1.0).abs() <= 0.05;
    outcome(
        pass,
        format!("symbolic residual zero: {symbolic}, sup |A| = {sup:.4}, exponent {:.4}", fit.exponent),
    )
}

fn parity() -> Outcome {
    let g = Grid1D::with_spacing(20.0, 0.05).unwrap();
    let k = build_kink_tables(&g);
    let th_phi2: Vec<f64> = k.th.iter().zip(&k.phi).map(|(t, p)| t * p * p).collect();
    let a = g.dot(&th_phi2, &k.th1).abs();
    let b = g.dot(&k.phi, &k.th1).abs();
    outcome(a <= 1e-12 && b <= 1e-12, format!("|<th phi^2, th'>| = {a:.2e}, |<phi, th'>| = {b:.2e}"))
}

fn desk_run() -> Outcome {
    let cfg = LabConfig::parse_str("n_x = 512\nn_y = 256\nepsilon = 0.01\nK = 2\nt_end = 60\n").unwrap();
    let r = match run(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let ratio = r.weighted_sup_ratio().unwrap_or(f64::NAN);
    let t: Vec<f64> = r.probes.iter().map(|p| p.t).collect();
    let a: Vec<f64> = r.probes.iter().map(|p| p.center.a.abs()).collect();
    let psi: Vec<f64> = r.probes.iter().map(|p| p.center.psi_local_sup).collect();
    let (pt, pv) = envelope_peaks(&t, &a);
    let fit_a = DecaySeries::windowed(&pt, &pv, 10.0, 60.0).map(|s| fit_decay(&s).exponent);
    let fit_psi = DecaySeries::windowed(&t, &psi, 10.0, 60.0).map(|s| fit_decay(&s).exponent);
    let (ea, ep) = (fit_a.unwrap_or(f64::NAN), fit_psi.unwrap_or(f64::NAN));
    // (a) and (b) are hard checks; the decay exponents are soft trend checks.
    let hard_pass = ratio <= 3.0 && r.support_growth <= 1.0 + 1e-3;
    let soft_pass = (-1.4..=-0.6).contains(&ea) && (-2.0..=-1.0).contains(&ep);
    Outcome {
        pass: hard_pass && soft_pass,
        hard_pass,
        detail: format!(
            "weighted sup ratio {ratio:.3}, support growth {:.5}, |a| exponent {ea:.3} in [-1.4, -0.6], \
             local psi exponent {ep:.3} in [-2.0, -1.0]{}",
            r.support_growth,
            if hard_pass && !soft_pass { " (soft trend check failed)" } else { "" }
        ),
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("spectral exactness", spectral_exactness),
        ("zero-energy resonance", resonance),
        ("scattering endpoint", scattering_endpoint),
        ("dispersive decay", dispersive_decay),
        ("modulation round trip", modulation_round_trip),
        ("internal-mode frequency", internal_mode_frequency),
        ("geometry identities", geometry),
        ("normal form", normal_form),
        ("parity cancellations", parity),
        ("desk-scale 3D run", desk_run),
    ];
    let mut failed = Vec::new();
    let mut hard_failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name} ({secs:.1} s): {}", i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
        if !o.hard_pass {
            hard_failed.push(i + 1);
        }
    }
    println!("failed criteria: {failed:?}, of which hard: {hard_failed:?}");
    assert!(hard_failed.is_empty(), "hard checks failed in criteria {hard_failed:?}");
}
