//! `kinklab` command-line driver.
//!
//! Every command writes CSV data and a JSON summary into the output
//! directory, each stamped with the tool version and a provenance hash (the
//! config hash, or a hash of the command options for config-free commands).
//! Failures print a JSON object on stderr and exit with status 2.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use kinklab::config::LabConfig;
use kinklab::diagnostics::{energy_panel, envelope_peaks, fit_decay, growth_check, DecaySeries};
use kinklab::evolution::{run_with, DiagnosticSample, ProbeSample, RunObserver};
use kinklab::fields::{Columnar, Grid1D, TransverseGrid};
use kinklab::hyperbolic::{morawetz_identity_residual, HyperSlice};
use kinklab::io::{self, fmt_f64};
use kinklab::kink::build_kink_tables;
use kinklab::modulation::Modulator;
use kinklab::normalform::{coupling_constant, derive_nf_coeffs, derive_nf_coeffs_exact, integrate_model_ode};
use kinklab::scattering::{jost_transmission_at, DEFAULT_X_FAR};
use kinklab::spectral::{build_h, eigenvalue_by_bisection};
use kinklab::{LabError, Result};

#[derive(Parser)]
#[command(name = "kinklab", version, about = "Numerical laboratory for perturbations of the 3D phi^4 kink")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (defaults to `out_dir` of the config, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of H = -d² - 3 sech²(x/√2) and eigenfunction residuals.
    Spectrum(SpectrumArgs),
    /// Transmission and reflection coefficients from the Jost solution.
    Scattering(ScatteringArgs),
    /// 3D evolution of a perturbed kink.
    Simulate,
    /// Modulation decomposition of a snapshot file.
    Decompose(DecomposeArgs),
    /// Energies on the hyperboloid slices written by `simulate`.
    HyperDiagnostics(HyperArgs),
    /// Normal-form coefficients and the amplitude oscillator trajectory.
    NormalForm(NormalFormArgs),
    /// Power-law fits of CSV series.
    Fit(FitArgs),
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 20.0)]
    x_max: f64,
    #[arg(long, default_value_t = 0.05)]
    dx: f64,
}

#[derive(Args)]
struct ScatteringArgs {
    /// Wavenumbers (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_X_FAR)]
    x_far: f64,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Snapshot file written by `simulate`.
    #[arg(long)]
    snapshot: PathBuf,
}

#[derive(Args)]
struct HyperArgs {
    /// Directory holding hyper_T*.bin files.
    #[arg(long)]
    run_dir: PathBuf,
    /// Only the slice centred at this T (default: all slices).
    #[arg(long = "slice-T")]
    slice_t: Option<f64>,
}

#[derive(Args)]
struct NormalFormArgs {
    #[arg(long, default_value_t = 0.1)]
    a0: f64,
    #[arg(long, default_value_t = 0.0)]
    a_t0: f64,
    #[arg(long = "T0", default_value_t = 10.0)]
    t0: f64,
    #[arg(long = "T-end", default_value_t = 1000.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.5)]
    dt_out: f64,
}

#[derive(Args)]
struct FitArgs {
    /// CSV files written by kinklab.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Columns to fit (default: every column except the time column).
    #[arg(long)]
    column: Vec<String>,
    /// Time column (default `t`, else `T`, else the first column).
    #[arg(long)]
    time_column: Option<String>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Fit the local maxima of |v| instead of every sample.
    #[arg(long)]
    envelope: bool,
    /// Allow series with different provenance hashes.
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Invalid(format!("thread pool: {e}")))?;
    }
    let cfg = cli.config.as_deref().map(LabConfig::parse_file).transpose()?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().map(|c| PathBuf::from(&c.out_dir)))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    match cli.cmd {
        Command::Spectrum(a) => spectrum(&a, &out),
        Command::Scattering(a) => scattering(&a, &out),
        Command::Simulate => {
            let cfg = cfg.ok_or_else(|| LabError::Invalid("simulate needs --config".into()))?;
            simulate(&cfg, &out)
        }
        Command::Decompose(a) => decompose(&a, cfg.as_ref(), &out),
        Command::HyperDiagnostics(a) => hyper_diagnostics(&a, &out),
        Command::NormalForm(a) => normal_form(&a, &out),
        Command::Fit(a) => fit(&a, &out),
    }
}

fn write_json(path: &Path, hash: &str, v: &serde_json::Value) -> Result<()> {
    io::write_json(path, hash, v)
}

fn spectrum(a: &SpectrumArgs, out: &Path) -> Result<()> {
    let hash = io::hash_text(&format!("spectrum x_max={} dx={}", fmt_f64(a.x_max), fmt_f64(a.dx)));
    let g = Grid1D::with_spacing(a.x_max, a.dx)?;
    let h = build_h(&g)?;
    let rows: Vec<Vec<f64>> = h
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i as f64, *l])
        .collect();
    io::write_csv(&out.join("spectrum.csv"), &hash, &["index", "eigenvalue"], &rows)?;
    let res = h.check_exact_eigenfunctions(&build_kink_tables(&g));
    let summary = json!({
        "x_max": a.x_max,
        "dx": g.dx(),
        "n_x": g.n_x(),
        "bound_eigenvalues": [h.eigenvalues()[0], h.eigenvalues()[1]],
        "bisection_eigenvalues": [eigenvalue_by_bisection(&g, 0), eigenvalue_by_bisection(&g, 1)],
        "lowest_continuum": h.eigenvalues()[2],
        "residuals": res,
    });
    write_json(&out.join("spectrum.json"), &hash, &summary)?;
    println!("{}", io::json_summary(&hash, &summary)?);
    Ok(())
}

fn scattering(a: &ScatteringArgs, out: &Path) -> Result<()> {
    let ks: Vec<String> = a.k.iter().map(|k| fmt_f64(*k)).collect();
    let hash = io::hash_text(&format!("scattering k={} x_far={}", ks.join(","), fmt_f64(a.x_far)));
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &k in &a.k {
        let r = jost_transmission_at(k, a.x_far)?;
        rows.push(vec![
            k,
            r.transmission.re,
            r.transmission.im,
            r.transmission.norm(),
            r.reflection.re,
            r.reflection.im,
            r.transmission.norm_sqr() + r.reflection.norm_sqr(),
        ]);
        results.push(r);
    }
    io::write_csv(
        &out.join("scattering.csv"),
        &hash,
        &["k", "T_re", "T_im", "T_abs", "R_re", "R_im", "unitarity"],
        &rows,
    )?;
    let summary = json!({ "x_far": a.x_far, "results": results });
    write_json(&out.join("scattering.json"), &hash, &summary)?;
    println!("{}", io::json_summary(&hash, &summary)?);
    Ok(())
}

/// Streams probes and diagnostics to memory and snapshots/slices to disk.
struct Writer<'a> {
    out: &'a Path,
    hash: String,
    probes: Vec<Vec<f64>>,
    diags: Vec<Vec<f64>>,
}

impl RunObserver for Writer<'_> {
    fn on_probe(&mut self, p: &ProbeSample) -> Result<()> {
        self.probes.push(vec![
            p.t,
            p.center.sigma,
            p.center.a,
            p.center.psi_local_sup,
            p.cone.sigma,
            p.cone.a,
            p.cone.psi_local_sup,
        ]);
        Ok(())
    }
    fn on_diagnostic(&mut self, d: &DiagnosticSample) -> Result<()> {
        self.diags.push(vec![
            d.t,
            d.energy,
            d.support_radius,
            d.weighted_sup,
            d.max_w,
            d.edge_x,
            d.edge_y,
            d.sigma_max,
            d.a_max,
            d.psi_local_sup,
            d.psi_global_sup,
        ]);
        Ok(())
    }
    fn on_snapshot(&mut self, s: &kinklab::evolution::WaveState, gx: &Grid1D, gy: &TransverseGrid) -> Result<()> {
        let name = format!("snapshot_t{:09.4}.bin", s.t);
        io::write_snapshot(&self.out.join(name), s, gx, gy, &self.hash)
    }
    fn on_hyper_slice(&mut self, s: &HyperSlice) -> Result<()> {
        io::write_hyper_slice(&self.out.join(io::hyper_slice_name(s.t_center)), s, &self.hash)
    }
}

const PROBE_COLUMNS: [&str; 7] = ["t", "sigma_0", "a_0", "psi_loc_0", "sigma_cone", "a_cone", "psi_loc_cone"];
const DIAG_COLUMNS: [&str; 11] = [
    "t",
    "energy",
    "support_radius",
    "weighted_sup",
    "max_w",
    "edge_x",
    "edge_y",
    "sigma_max",
    "a_max",
    "psi_loc_sup",
    "psi_global_sup",
];

fn simulate(cfg: &LabConfig, out: &Path) -> Result<()> {
    let hash = cfg.hash();
    fs::write(out.join("config.txt"), cfg.serialize())?;
    let mut w = Writer {
        out,
        hash: hash.clone(),
        probes: Vec::new(),
        diags: Vec::new(),
    };
    let report = run_with(cfg, &mut w)?;
    io::write_csv(&out.join("probes.csv"), &hash, &PROBE_COLUMNS, &w.probes)?;
    io::write_csv(&out.join("diagnostics.csv"), &hash, &DIAG_COLUMNS, &w.diags)?;
    let a_fit = {
        let t: Vec<f64> = report.probes.iter().map(|p| p.t).collect();
        let a: Vec<f64> = report.probes.iter().map(|p| p.center.a).collect();
        let (pt, pv) = envelope_peaks(&t, &a);
        DecaySeries::windowed(&pt, &pv, 10.0, cfg.t_end).map(|s| fit_decay(&s)).ok()
    };
    let summary = json!({
        "dt": report.dt,
        "n_steps": report.n_steps,
        "weighted_sup_ratio": report.weighted_sup_ratio(),
        "support_growth": report.support_growth,
        "energy_initial": report.diagnostics.first().map(|d| d.energy),
        "energy_final": report.diagnostics.last().map(|d| d.energy),
        "a_center_envelope_fit": a_fit,
        "snapshot_times": report.snapshot_times,
        "hyper_slices": cfg.hyper_slices,
        "normal_form": report.normal_form,
    });
    write_json(&out.join("run.json"), &hash, &summary)?;
    println!("{}", io::json_summary(&hash, &summary)?);
    Ok(())
}

fn decompose(a: &DecomposeArgs, cfg: Option<&LabConfig>, out: &Path) -> Result<()> {
    let snap = io::read_snapshot(&a.snapshot)?;
    if let Some(c) = cfg {
        if c.hash() != snap.config_hash {
            return Err(LabError::Format(format!(
                "snapshot hash {} differs from the config hash {}",
                snap.config_hash,
                c.hash()
            )));
        }
    }
    let md = Modulator::new(&snap.gx).with_eps0(cfg.map_or(kinklab::modulation::DEFAULT_EPS0, |c| c.eps0));
    let m = md.decompose(&snap.state.w)?;
    let gx = &snap.gx;
    let gy = &snap.gy;
    let mut rows = Vec::new();
    for iy2 in 0..gy.n_y() {
        for iy1 in 0..gy.n_y() {
            let psi = m.psi.column(iy1, iy2);
            rows.push(vec![
                gy.y(iy1),
                gy.y(iy2),
                m.sigma.get(iy1, iy2),
                m.a.get(iy1, iy2),
                gx.norm(psi),
                psi.iter().fold(0.0_f64, |s, v| s.max(v.abs())),
            ]);
        }
    }
    let hash = snap.config_hash.clone();
    io::write_csv(
        &out.join("decompose.csv"),
        &hash,
        &["y1", "y2", "sigma", "a", "psi_l2", "psi_sup"],
        &rows,
    )?;
    let (d_phi, d_th1) = md.orthogonality_defect(&m);
    let summary = json!({
        "t": snap.state.t,
        "sigma_max": m.sigma.max_abs(),
        "a_max": m.a.max_abs(),
        "psi_sup": m.psi.max_abs(),
        "newton_iters": m.newton_iters,
        "newton_residual": m.residual,
        "orthogonality_defect": [d_phi, d_th1],
    });
    write_json(&out.join("decompose.json"), &hash, &summary)?;
    println!("{}", io::json_summary(&hash, &summary)?);
    Ok(())
}

fn hyper_diagnostics(a: &HyperArgs, out: &Path) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(&a.run_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("hyper_T") && n.ends_with(".bin"))
        })
        .collect();
    files.sort();
    let mut slices = Vec::new();
    let mut hash: Option<String> = None;
    for f in files {
        let (s, h) = io::read_hyper_slice(&f)?;
        if a.slice_t.is_some_and(|t| (t - s.t_center).abs() > 1e-9) {
            continue;
        }
        if hash.as_ref().is_some_and(|x| *x != h) {
            return Err(LabError::Format(format!("{} comes from a different run", f.display())));
        }
        hash = Some(h);
        slices.push(s);
    }
    let hash = hash.ok_or_else(|| LabError::Invalid(format!("no matching hyper slices in {}", a.run_dir.display())))?;
    let h = build_h(&slices[0].x_grid)?;
    let mut rows = Vec::new();
    let mut panels = Vec::new();
    for s in &slices {
        let p = energy_panel(&s.psi, &s.cal_a, &s.sigma, 1, &h)?;
        let mr = morawetz_identity_residual(&s.sigma)?;
        let g = &s.sigma.grid;
        let morawetz_res = mr.max_abs_in(1..2, 1..g.n_r - 1);
        rows.push(vec![
            s.t_center,
            p.e_tilde,
            p.e1,
            p.e2,
            p.e_total,
            p.morawetz1,
            p.morawetz2,
            morawetz_res,
            f64::from(u8::from(p.boundary_not_decayed)),
            f64::from(u8::from(s.truncated)),
        ]);
        panels.push(p);
    }
    io::write_csv(
        &out.join("hyper_energies.csv"),
        &hash,
        &[
            "T",
            "E_tilde_Sigma",
            "E1_Psi",
            "E2_A",
            "E",
            "Morawetz1",
            "Morawetz2",
            "morawetz_identity_residual",
            "boundary_not_decayed",
            "truncated",
        ],
        &rows,
    )?;
    let growth = if panels.len() >= 6 {
        let t: Vec<f64> = panels.iter().map(|p| p.t_hyp).collect();
        let e: Vec<f64> = panels.iter().map(|p| p.e_total + p.e_tilde).collect();
        Some(growth_check(&t, &e)?)
    } else {
        None
    };
    let summary = json!({ "panels": panels, "growth_fit": growth });
    write_json(&out.join("hyper_diagnostics.json"), &hash, &summary)?;
    println!("{}", io::json_summary(&hash, &summary)?);
    Ok(())
}

fn normal_form(a: &NormalFormArgs, out: &Path) -> Result<()> {
    let hash = io::hash_text(&format!(
        "normal-form a0={} a_t0={} T0={} T_end={} dt_out={}",
        fmt_f64(a.a0),
        fmt_f64(a.a_t0),
        fmt_f64(a.t0),
        fmt_f64(a.t_end),
        fmt_f64(a.dt_out)
    ));
    let kt = build_kink_tables(&Grid1D::with_spacing(20.0, 0.01)?);
    let c = coupling_constant(&kt);
    let coeffs = derive_nf_coeffs(c)?;
    let exact = derive_nf_coeffs_exact()?;
    let tr = integrate_model_ode(a.a0, a.a_t0, c, a.t0, a.t_end, a.dt_out, None)?;
    let rows: Vec<Vec<f64>> = (0..tr.t.len())
        .map(|i| {
            vec![
                tr.t[i],
                tr.a[i],
                tr.a_t[i],
                tr.a[i] / tr.t[i],
                tr.a_plus[i].norm(),
                tr.a1_plus[i].norm(),
            ]
        })
        .collect();
    io::write_csv(
        &out.join("normal_form.csv"),
        &hash,
        &["T", "A", "A_T", "a", "abs_A_plus", "abs_A1_plus"],
        &rows,
    )?;
    let sup = tr.a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let summary = json!({
        "coupling": c,
        "coefficients": coeffs,
        "exact_coefficients_per_unit_coupling": {
            "alpha_p": exact.alpha_p.to_string(),
            "alpha_m": exact.alpha_m.to_string(),
            "beta_p": exact.beta_p.to_string(),
            "beta_m": exact.beta_m.to_string(),
            "gamma_p": exact.gamma_p.to_string(),
            "gamma_m": exact.gamma_m.to_string(),
        },
        "sup_abs_A": sup,
    });
    write_json(&out.join("normal_form.json"), &hash, &summary)?;
    println!("{}", io::json_summary(&hash, &summary)?);
    Ok(())
}

fn fit(a: &FitArgs, out: &Path) -> Result<()> {
    let mut tables = Vec::new();
    for p in &a.input {
        tables.push((p, io::read_csv(p)?));
    }
    let hash = tables[0].1.config_hash.clone();
    if let Some((p, _)) = tables.iter().find(|(_, t)| t.config_hash != hash) {
        if !a.force {
            return Err(LabError::Format(format!(
                "{} has a different config hash; pass --force to mix runs",
                p.display()
            )));
        }
    }
    let mut report = serde_json::Map::new();
    for (p, t) in &tables {
        let tcol = match &a.time_column {
            Some(c) => c.clone(),
            None => ["t", "T"]
                .iter()
                .find(|c| t.columns.iter().any(|x| x == *c))
                .map(|c| c.to_string())
                .unwrap_or_else(|| t.columns[0].clone()),
        };
        let times = t.column(&tcol)?;
        let names: Vec<String> = if a.column.is_empty() {
            t.columns.iter().filter(|c| **c != tcol).cloned().collect()
        } else {
            a.column.clone()
        };
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
        for name in names {
            let v = t.column(&name)?;
            let (tt, vv) = if a.envelope {
                envelope_peaks(&times, &v)
            } else {
                (times.clone(), v.iter().map(|x| x.abs()).collect())
            };
            let s = DecaySeries::windowed(
                &tt,
                &vv,
                a.t_min.unwrap_or(f64::NEG_INFINITY),
                a.t_max.unwrap_or(f64::INFINITY),
            )?;
            let f = fit_decay(&s);
            let key = if tables.len() > 1 { format!("{stem}:{name}") } else { name };
            report.insert(
                key,
                json!({
                    "exponent": f.exponent,
                    "amplitude": f.amplitude,
                    "residual": f.residual,
                    "window": [f.window.0, f.window.1],
                }),
            );
        }
    }
    let summary = serde_json::Value::Object(report);
    write_json(&out.join("fit.json"), &hash, &summary)?;
    println!("{}", io::json_summary(&hash, &summary)?);
    Ok(())
}
