//! End-to-end runs of the `kinklab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kinklab::io::{read_csv, write_csv};
use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kinklab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn kinklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinklab")).args(args).output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "status {:?}, stderr {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn err_json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(2), "stdout {}", String::from_utf8_lossy(&out.stdout));
    serde_json::from_slice(&out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn spectrum_reports_both_bound_states() {
    let dir = scratch("spectrum");
    let v = ok_json(&kinklab(&["spectrum", "--out", s(&dir)]));
    let b = &v["data"]["bound_eigenvalues"];
    assert!((b[0].as_f64().unwrap() + 2.0).abs() < 5e-3);
    assert!((b[1].as_f64().unwrap() + 0.5).abs() < 5e-3);
    let t = read_csv(&dir.join("spectrum.csv")).unwrap();
    assert_eq!(t.config_hash, v["config_hash"].as_str().unwrap());
    // Dirichlet ends leave the 799 interior nodes of the 801-point grid.
    assert_eq!(t.rows.len(), 799);
}

#[test]
fn scattering_at_zero_energy_is_transparent() {
    let dir = scratch("scattering");
    let v = ok_json(&kinklab(&["scattering", "--k", "0,0.7", "--out", s(&dir)]));
    let t = read_csv(&dir.join("scattering.csv")).unwrap();
    assert_eq!(t.config_hash, v["config_hash"].as_str().unwrap());
    let (re, im) = (t.column("T_re").unwrap(), t.column("T_im").unwrap());
    assert!((re[0] - 1.0).abs() <= 1e-6 && im[0].abs() <= 1e-6);
    for (a, u) in t.column("T_abs").unwrap().iter().zip(t.column("unitarity").unwrap()) {
        assert!((a - 1.0).abs() <= 1e-6 && (u - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn fit_recovers_inverse_time_decay() {
    let dir = scratch("fit");
    let rows: Vec<Vec<f64>> = (10..=200).map(|i| i as f64).map(|t| vec![t, 3.0 / t, 0.5 * t.powf(-1.5)]).collect();
    let input = dir.join("series.csv");
    write_csv(&input, "aaaa", &["t", "u", "v"], &rows).unwrap();
    let v = ok_json(&kinklab(&["fit", "--input", s(&input), "--out", s(&dir)]));
    assert_eq!(v["config_hash"], "aaaa");
    assert!((v["data"]["u"]["exponent"].as_f64().unwrap() + 1.0).abs() < 1e-10);
    assert!((v["data"]["u"]["amplitude"].as_f64().unwrap() - 3.0).abs() < 1e-8);
    assert!((v["data"]["v"]["exponent"].as_f64().unwrap() + 1.5).abs() < 1e-10);
}

#[test]
fn fit_refuses_mixed_hashes_unless_forced() {
    let dir = scratch("mixed");
    let rows: Vec<Vec<f64>> = (1..=20).map(|i| vec![i as f64, 1.0 / i as f64]).collect();
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    write_csv(&a, "1111", &["t", "u"], &rows).unwrap();
    write_csv(&b, "2222", &["t", "u"], &rows).unwrap();
    let e = err_json(&kinklab(&["fit", "--input", s(&a), "--input", s(&b), "--out", s(&dir)]));
    assert_eq!(e["error"], "format");
    assert!(e["message"].as_str().unwrap().contains("--force"));
    let v = ok_json(&kinklab(&["fit", "--input", s(&a), "--input", s(&b), "--force", "--out", s(&dir)]));
    assert!((v["data"]["b:u"]["exponent"].as_f64().unwrap() + 1.0).abs() < 1e-10);
}

#[test]
fn containment_violation_is_a_config_error() {
    let dir = scratch("containment");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "n_x = 65\nn_y = 16\nt_end = 10\nside = 20\n").unwrap();
    let e = err_json(&kinklab(&["simulate", "--config", s(&cfg), "--out", s(&dir)]));
    assert_eq!(e["error"], "config");
    assert!(e["message"].as_str().unwrap().contains("containment"));
}

const TINY: &str = "n_x = 57\nn_y = 28\nK = 1\nepsilon = 0.01\nt_end = 3\nx_max = 7\nside = 14\n\
                    diag_dt = 0.5\nsnapshot_dt = 1.5\nhyper_slices = 3.0, 3.5\nhyper_nR = 4\nhyper_ntheta = 8\n";

fn simulate(name: &str, threads: &str) -> (PathBuf, Value) {
    let dir = scratch(name);
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, TINY).unwrap();
    let v = ok_json(&kinklab(&["simulate", "--config", s(&cfg), "--out", s(&dir), "--threads", threads]));
    (dir, v)
}

#[test]
fn simulation_outputs_are_deterministic_and_stamped() {
    let (d1, v1) = simulate("sim1", "1");
    let (d2, v2) = simulate("sim2", "2");
    let hash = v1["config_hash"].as_str().unwrap().to_string();
    assert_eq!(v1, v2);
    for f in ["probes.csv", "diagnostics.csv"] {
        let (a, b) = (std::fs::read(d1.join(f)).unwrap(), std::fs::read(d2.join(f)).unwrap());
        assert_eq!(a, b, "{f} differs between thread counts");
        assert_eq!(read_csv(&d1.join(f)).unwrap().config_hash, hash);
    }
    let run_json: Value = serde_json::from_str(&std::fs::read_to_string(d1.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_json["config_hash"], hash.as_str());

    let snaps: Vec<PathBuf> = std::fs::read_dir(&d1)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("snapshot_"))
        .collect();
    assert!(!snaps.is_empty());
    let out = d1.join("decomposed");
    let cfg = d1.join("run.cfg");
    let v = ok_json(&kinklab(&["decompose", "--snapshot", s(&snaps[0]), "--config", s(&cfg), "--out", s(&out)]));
    assert_eq!(v["config_hash"], hash.as_str());
    let d = &v["data"]["orthogonality_defect"];
    assert!(d[0].as_f64().unwrap() <= 1e-8 && d[1].as_f64().unwrap() <= 1e-8);

    let out = d1.join("hyper");
    let v = ok_json(&kinklab(&["hyper-diagnostics", "--run-dir", s(&d1), "--out", s(&out)]));
    assert_eq!(v["config_hash"], hash.as_str());
    assert_eq!(read_csv(&out.join("hyper_energies.csv")).unwrap().rows.len(), 2);
}

#[test]
fn decompose_rejects_a_snapshot_from_another_config() {
    let (d, _) = simulate("foreign", "1");
    let snap = std::fs::read_dir(&d)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with("snapshot_"))
        .unwrap();
    let other = d.join("other.cfg");
    std::fs::write(&other, TINY.replace("epsilon = 0.01", "epsilon = 0.02")).unwrap();
    let e = err_json(&kinklab(&["decompose", "--snapshot", s(&snap), "--config", s(&other), "--out", s(&d)]));
    assert!(e["message"].as_str().unwrap().contains("differs"));
}

#[test]
fn normal_form_reports_exact_coefficients() {
    let dir = scratch("nf");
    let v = ok_json(&kinklab(&["normal-form", "--T-end", "200", "--out", s(&dir)]));
    assert!(v["data"]["coupling"].as_f64().unwrap() > 0.0);
    assert!(v["data"]["sup_abs_A"].as_f64().unwrap() <= 0.2);
    let t = read_csv(&dir.join("normal_form.csv")).unwrap();
    assert_eq!(t.columns[0], "T");
    assert_eq!(t.config_hash, v["config_hash"].as_str().unwrap());
}

#[test]
fn invalid_arguments_fail_cleanly() {
    let dir = scratch("invalid");
    let e = err_json(&kinklab(&["normal-form", "--a0", "0.9", "--out", s(&dir)]));
    assert_eq!(e["error"], "invalid");
    let e = err_json(&kinklab(&["simulate", "--out", s(&dir)]));
    assert_eq!(e["error"], "invalid");
}
