//! The translation / internal-mode / remainder split and its inverse.

use std::sync::OnceLock;

use kinklab::fields::{random_smooth_field, Columnar, Grid1D, ScalarField2, ScalarField3, TransverseGrid};
use kinklab::kink;
use kinklab::modulation::Modulator;
use proptest::prelude::*;

const TWO_SQRT2_OVER_3: f64 = 2.0 * std::f64::consts::SQRT_2 / 3.0;

fn grids() -> &'static (Grid1D, TransverseGrid, Modulator) {
    static G: OnceLock<(Grid1D, TransverseGrid, Modulator)> = OnceLock::new();
    G.get_or_init(|| {
        let g = Grid1D::with_spacing(20.0, 0.05).unwrap();
        let gy = TransverseGrid::new(8.0, 8).unwrap();
        let md = Modulator::new(&g);
        (g, gy, md)
    })
}

/// F(σ, w) from its defining integral: the s-integral by composite Simpson
/// and x-integrals by the trapezoid rule with shifted profiles evaluated
/// analytically.
fn residual_oracle(g: &Grid1D, sigma: f64, w: &[f64]) -> f64 {
    let shifted = g.sample(|x| kink::th_d1(x - sigma));
    let mut f = g.dot(w, &shifted);
    let panels = 64;
    let h = 1.0 / panels as f64;
    let integrand = |s: f64| g.dot(&g.sample(|x| kink::th_d1(x - s * sigma)), &shifted);
    let mut acc = integrand(0.0) + integrand(1.0);
    for i in 1..panels {
        let c = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += c * integrand(i as f64 * h);
    }
    f += sigma * acc * h / 3.0;
    f
}

#[test]
fn residual_at_origin_and_its_slope() {
    let (g, _, md) = grids();
    let zero = vec![0.0; g.n_x()];
    assert_eq!(md.residual_column(0.0, &zero).unwrap(), 0.0);
    let slope = md.residual_slope_column(0.0, &zero).unwrap();
    assert!((slope - TWO_SQRT2_OVER_3).abs() < 1e-6, "{slope}");
    let phi: Vec<f64> = md.kink().phi.iter().map(|v| 1e-3 * v).collect();
    assert!(md.residual_column(0.0, &phi).unwrap().abs() < 1e-15);
}

#[test]
fn residual_matches_integral_definition() {
    let (g, gy, md) = grids();
    let w = random_smooth_field(g, gy, 11, 0.02, 4.0);
    for (idx, c) in w.values().chunks(g.n_x()).enumerate().step_by(7) {
        for sigma in [-0.3, -0.01, 0.0, 0.004, 0.2] {
            let lib = md.residual_column(sigma, c).unwrap();
            let oracle = residual_oracle(g, sigma, c);
            assert!((lib - oracle).abs() < 1e-12, "column {idx}, σ = {sigma}: {lib} vs {oracle}");
        }
    }
}

#[test]
fn zero_data_and_reconstruction_of_zero() {
    let (g, gy, md) = grids();
    let w = ScalarField3::zeros(g.n_x(), gy.n_y());
    let m = md.decompose(&w).unwrap();
    assert_eq!(m.sigma.max_abs(), 0.0);
    assert_eq!(m.a.max_abs(), 0.0);
    assert_eq!(m.psi.max_abs(), 0.0);
    assert_eq!(md.reconstruct(&m).unwrap().max_abs(), 0.0);
}

#[test]
fn internal_mode_data_is_pure_amplitude() {
    let (_, gy, md) = grids();
    let a0 = 1e-3;
    let col: Vec<f64> = md.kink().phi.iter().map(|v| a0 * v).collect();
    let w = ScalarField3::from_profile(&col, gy.n_y());
    let m = md.decompose(&w).unwrap();
    assert!(m.sigma.max_abs() < 1e-14);
    assert!(m.a.values().iter().all(|a| (a - a0).abs() < 1e-8));
    assert!(m.psi.max_abs() < 1e-8);
}

#[test]
fn kink_shift_is_recovered_exactly() {
    let (g, gy, md) = grids();
    let s = 0.05;
    let col = g.sample(|x| kink::th(x - s) - kink::th(x));
    let w = ScalarField3::from_profile(&col, gy.n_y());
    let m = md.decompose(&w).unwrap();
    assert!(m.sigma.values().iter().all(|v| (v - s).abs() < 1e-10));
    assert!(m.a.max_abs() < 1e-10);
    assert!(m.psi.max_abs() < 1e-10);
    let mut built = m.clone();
    built.sigma = ScalarField2::constant(gy.n_y(), s);
    built.a = ScalarField2::zeros(gy.n_y());
    built.psi = ScalarField3::zeros(g.n_x(), gy.n_y());
    let r = md.reconstruct(&built).unwrap();
    let err = r.values().iter().zip(w.values()).fold(0.0_f64, |e, (a, b)| e.max((a - b).abs()));
    assert!(err < 1e-14, "{err}");
}

#[test]
fn random_small_data_round_trips() {
    let (g, gy, md) = grids();
    for seed in 0..3 {
        let w = random_smooth_field(g, gy, seed, 1e-3, 5.0);
        let m = md.decompose(&w).unwrap();
        let r = md.reconstruct(&m).unwrap();
        let err = r.values().iter().zip(w.values()).fold(0.0_f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err <= 1e-9, "seed {seed}: {err:e}");
        let (d0, d1) = md.orthogonality_defect(&m);
        assert!(d0 <= 1e-8 && d1 <= 1e-8, "{d0:e} {d1:e}");
    }
}

#[test]
fn translation_mode_data_gives_first_order_shift() {
    let (g, gy, md) = grids();
    let norm = md.th1_norm_sq().sqrt();
    for eps in [1e-3, 5e-4] {
        let gfun = |y1: f64, y2: f64| 1.0 + 0.5 * (0.4 * y1).cos() * (0.8 * y2).sin();
        let w = ScalarField3::from_fn(g, gy, |x, y1, y2| eps * kink::th_d1(x) / norm * gfun(y1, y2));
        let m = md.decompose(&w).unwrap();
        for iy2 in 0..gy.n_y() {
            for iy1 in 0..gy.n_y() {
                let want = -eps * gfun(gy.y(iy1), gy.y(iy2)) / norm;
                let got = m.sigma.get(iy1, iy2);
                assert!((got - want).abs() < 2.0 * eps * eps, "ε = {eps}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn modulation_residual_vanishes_at_the_solution() {
    let (g, gy, md) = grids();
    let w = random_smooth_field(g, gy, 5, 5e-3, 3.0);
    let sigma = md.solve_sigma(&w).unwrap();
    assert!(md.modulation_residual(&sigma, &w).unwrap().max_abs() < 1e-12);
    let wrong = ScalarField2::zeros(gy.n_y() + 1);
    assert!(md.modulation_residual(&wrong, &w).is_err());
    let far = ScalarField2::constant(gy.n_y(), 6.0);
    assert!(md.modulation_residual(&far, &w).is_err());
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn newton_limit_is_independent_of_the_guess(seed in 0u64..10_000, amp in 1e-5..1e-2_f64) {
        let (g, gy, md) = grids();
        let w = random_smooth_field(g, gy, seed, amp, 5.0);
        for c in w.values().chunks(g.n_x()).step_by(9) {
            let (s0, _, _) = md.solve_sigma_column(c, Some(0.0)).unwrap();
            for guess in [0.02, -0.02] {
                let (s, _, _) = md.solve_sigma_column(c, Some(guess)).unwrap();
                prop_assert!((s - s0).abs() <= 1e-10, "{} vs {}", s, s0);
            }
        }
    }

    #[test]
    fn split_is_orthogonal_and_bounded(seed in 0u64..10_000, amp in 1e-5..1e-2_f64) {
        let (g, gy, md) = grids();
        let w = random_smooth_field(g, gy, seed, amp, 5.0);
        let m = md.decompose(&w).unwrap();
        let (d0, d1) = md.orthogonality_defect(&m);
        prop_assert!(d0 <= 1e-8 && d1 <= 1e-8);
        let n = g.n_x();
        for (idx, c) in w.values().chunks(n).enumerate() {
            let split = md.decompose_column(c).unwrap();
            let v: Vec<f64> = split.psi.iter().zip(&md.kink().phi).map(|(p, f)| p + split.a * f).collect();
            prop_assert!(g.dot(&v, &md.kink().th1).abs() <= 1e-8);
            let size = split.sigma.abs() + split.a.abs() + sup(&m.psi.values()[idx * n..(idx + 1) * n]);
            prop_assert!(size <= 10.0 * sup(c), "C = {}", size / sup(c));
        }
    }

    #[test]
    fn odd_data_has_no_translation(seed in 0u64..10_000, amp in 1e-5..1e-2_f64) {
        let (g, gy, md) = grids();
        let w = random_smooth_field(g, gy, seed, amp, 5.0);
        let n = g.n_x();
        let mut odd = w.clone();
        for (o, c) in odd.values_mut().chunks_mut(n).zip(w.values().chunks(n)) {
            for i in 0..n {
                o[i] = 0.5 * (c[i] - c[n - 1 - i]);
            }
        }
        let sigma = md.solve_sigma(&odd).unwrap();
        prop_assert!(sigma.max_abs() <= 1e-8);
    }
}
