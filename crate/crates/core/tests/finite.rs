mod common;

use common::{sup, sup_diff};
use infomfg::equilibrium::{solve, SolveOptions};
use infomfg::error::Error;
use infomfg::finite::*;
use infomfg::grid::{ScalarCurve, TimeGrid};
use infomfg::model::{ModelParams, Q0Law};
use infomfg::operators::{apply_l, apply_l_tilde, build_base_kernels};
use infomfg::path::{MuPath, Revelation, TimePath};
use infomfg::trader::{moments_on, trader_control};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn grid(n: usize) -> TimeGrid {
    TimeGrid::new(2.0, n).unwrap()
}

fn impact_params() -> ModelParams {
    let mut p = ModelParams::table1();
    p.phi = 0.02;
    p.b = 0.5 * p.b_admissibility_bound();
    p.q0_mean = 0.3;
    p.q0_second_moment = 0.34;
    p.mu_mean = 1.0;
    p
}

#[test]
fn without_impact_every_n_gives_the_mean_field_coefficients() {
    let p = ModelParams::table1();
    let g = grid(200);
    let eq = solve(&p, g, SolveOptions::default()).unwrap();
    for n in [1, 5, 100] {
        let fc = compute_finite_coefficients(&p, n, g).unwrap();
        assert_eq!(fc.coeffs.abar.values(), eq.trader().abar.values());
        assert_eq!(fc.coeffs.bbar.values(), eq.trader().bbar.values());
        assert_eq!(fc.coeffs.cbar.values(), eq.trader().cbar.values());
        assert_eq!(fc.coeffs.dbar.values(), eq.trader().dbar.values());
        assert!(fc.coeffs.abar.values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn coefficient_gap_decays_like_one_over_n() {
    let p = impact_params();
    let g = grid(200);
    let eq = solve(&p, g, SolveOptions::default()).unwrap();
    let mf = eq.trader();
    let gap = |n| {
        let fc = compute_finite_coefficients(&p, n, g).unwrap();
        let c = &fc.coeffs;
        sup_diff(c.abar.values(), mf.abar.values())
            .max(sup_diff(c.bbar.values(), mf.bbar.values()))
            .max(sup_diff(c.dbar.values(), mf.dbar.values()))
    };
    let gaps: Vec<f64> = [64, 128, 256].iter().map(|&n| gap(n)).collect();
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 2.0).abs() <= 0.5, "{ratio}");
    }
}

#[test]
fn two_traders_differ_measurably() {
    let p = impact_params();
    let g = grid(200);
    let eq = solve(&p, g, SolveOptions::default()).unwrap();
    let fc = compute_finite_coefficients(&p, 2, g).unwrap();
    let gap = sup_diff(fc.coeffs.abar.values(), eq.trader().abar.values());
    assert!(gap > 10.0 * 1e-5 * eq.trader().abar.sup_norm(), "{gap:e}");
}

#[test]
fn average_control_solves_the_n_player_fixed_point() {
    let p = impact_params();
    let g = grid(200);
    for n in [2, 10, 400] {
        let fc = compute_finite_coefficients(&p, n, g).unwrap();
        let kernels = build_base_kernels(&fc.riccati);
        let mu = MuPath::constant(3.0);
        let control = trader_control(&fc.coeffs, TimePath::new(g, Revelation::Never));
        let m = moments_on(&control, &mu, p.q0_mean, p.q0_second_moment).unwrap();
        let avg = ScalarCurve::new(g, m.nu_bar).unwrap();
        let lt = apply_l_tilde(&kernels.seed_pair(), &ScalarCurve::constant(g, 3.0));
        let la = apply_l(&avg, &kernels);
        let z = fc.z();
        let resid: Vec<f64> = (0..g.len())
            .map(|k| avg.get(k) - z.get(k) * p.q0_mean - lt.get(k) - fc.b_eff * la.get(k))
            .collect();
        assert!(sup(&resid) < 1e-8, "N = {n}: {:e}", sup(&resid));
        assert!((fc.b_eff - p.b * (n - 1) as f64 / n as f64).abs() < 1e-20);
    }
}

#[test]
fn cross_sectional_average_uses_the_empirical_mean() {
    let p = impact_params();
    let g = grid(100);
    let fc = compute_finite_coefficients(&p, 7, g).unwrap();
    let q = [0.1, -0.4, 2.0, 0.0, 0.3, 0.9, -1.2];
    let mu = MuPath::new(Revelation::At(0.6), 1.0, -2.0);
    let ctl = evaluate_nash_controls(&fc, &q, p.q0_mean, &mu).unwrap();
    let mean_q = q.iter().sum::<f64>() / 7.0;
    let single = evaluate_nash_controls(&fc, &[mean_q; 7], p.q0_mean, &mu).unwrap();
    for k in 0..ctl[0].len() {
        let avg = ctl.iter().map(|c| c[k]).sum::<f64>() / 7.0;
        assert!((avg - single[0][k]).abs() < 1e-12 * avg.abs().max(1.0));
    }
    assert!(single.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn wrong_number_of_inventories_is_rejected() {
    let p = impact_params();
    let fc = compute_finite_coefficients(&p, 3, grid(50)).unwrap();
    let err = evaluate_nash_controls(&fc, &[0.0; 4], 0.0, &MuPath::constant(0.0)).unwrap_err();
    assert!(matches!(err, Error::LengthMismatch { expected: 3, got: 4 }));
}

#[test]
fn single_trader_needs_zero_impact() {
    let p = impact_params();
    assert!(matches!(
        compute_finite_coefficients(&p, 1, grid(50)),
        Err(Error::NTooSmall { n: 1, .. })
    ));
    assert!(compute_finite_coefficients(&ModelParams::table1(), 1, grid(50)).is_ok());
}

#[test]
fn empirical_average_converges_for_large_n() {
    let p = impact_params();
    let g = grid(100);
    let n = 10_000;
    let fc = compute_finite_coefficients(&p, n, g).unwrap();
    let law = Normal::new(p.q0_mean, p.q0_std()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let q: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
    let mu = MuPath::new(Revelation::At(0.5), 1.0, 4.0);
    let ctl = evaluate_nash_controls(&fc, &q, p.q0_mean, &mu).unwrap();
    let control = trader_control(&fc.coeffs, TimePath::new(g, mu.revelation));
    let m = moments_on(&control, &mu, p.q0_mean, p.q0_second_moment).unwrap();
    let mut gap = 0.0f64;
    let mut sd = 0.0f64;
    for k in 0..m.nu_bar.len() {
        let avg = ctl.iter().map(|c| c[k]).sum::<f64>() / n as f64;
        let var = ctl.iter().map(|c| (c[k] - avg).powi(2)).sum::<f64>() / (n - 1) as f64;
        gap = gap.max((avg - m.nu_bar[k]).abs());
        sd = sd.max(var.sqrt());
    }
    assert!(gap < 4.0 * sd / (n as f64).sqrt(), "{gap:e} vs {:e}", sd / (n as f64).sqrt());
}

#[test]
fn deterministic_inventories_without_impact_have_no_mean_error() {
    let mut p = ModelParams::table1();
    p.q0_mean = 0.5;
    p.q0_second_moment = 0.25;
    let eq = solve(&p, grid(100), SolveOptions::zeroth_order()).unwrap();
    let report = convergence_study(&eq, &[10, 40], 4, 1, Q0Law::Gaussian).unwrap();
    assert!(report.coefficients_identical);
    for r in &report.records {
        assert!(r.e1 < 1e-20, "{:e}", r.e1);
    }
}

#[test]
fn study_is_reproducible_and_shrinks_with_n() {
    let p = impact_params();
    let eq = solve(&p, grid(100), SolveOptions::default()).unwrap();
    let a = convergence_study(&eq, &[50, 800], 16, 3, Q0Law::Gaussian).unwrap();
    let b = convergence_study(&eq, &[50, 800], 16, 3, Q0Law::Gaussian).unwrap();
    assert_eq!(a.slope_e1, b.slope_e1);
    assert!(!a.coefficients_identical);
    assert!(a.summary[1].e1 < a.summary[0].e1);
    assert!(a.summary[1].e2 < a.summary[0].e2);
}

#[test]
fn log_log_slope_of_a_power_law() {
    let x = [10.0, 100.0, 1000.0];
    let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
    assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-12);
}
