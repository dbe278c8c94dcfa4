mod common;

use common::{sup, sup_diff};
use infomfg::equilibrium::{solve, SolveOptions};
use infomfg::grid::{ScalarCurve, TimeGrid};
use infomfg::model::ModelParams;
use infomfg::operators::{apply_l, apply_l_tilde};
use infomfg::path::{MuPath, Revelation, TimePath};
use infomfg::reproduce::closed_form;
use infomfg::trader::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn params_with_b(frac: f64) -> ModelParams {
    let mut p = ModelParams::table1();
    p.phi = 0.02;
    p.b = frac * p.b_admissibility_bound();
    p.q0_mean = 0.3;
    p.q0_second_moment = 0.3 * 0.3 + 0.25;
    p.mu_mean = 1.0;
    p
}

fn grid(n: usize) -> TimeGrid {
    TimeGrid::new(2.0, n).unwrap()
}

#[test]
fn beta3_and_control_coefficients_at_b_zero() {
    let eq = solve(&ModelParams::table1(), grid(800), SolveOptions::zeroth_order()).unwrap();
    let tr = eq.trader();
    let g = eq.grid();
    for k in 0..g.len() {
        let t = g.time(k);
        let want = closed_form::beta3(2.0, t);
        assert!((tr.beta3.get(k) - want).abs() < 1e-5 * 7.39);
        assert_eq!(tr.abar.get(k), 0.0);
    }
    assert_eq!(tr.beta3.last(), 0.0);
    assert_eq!(tr.dbar.last(), 0.0);
    assert!((tr.bbar.first() + 1.0).abs() < 1e-12);
    assert!((tr.cbar.get(0, g.n_steps()) - 50.0 * ((-2.0f64).exp() - 1.0)).abs() < 1e-3);
}

#[test]
fn beta3_moves_by_order_b() {
    let g = grid(200);
    let base = solve(&params_with_b(0.0), g, SolveOptions::default()).unwrap();
    let gap = |frac: f64| {
        let eq = solve(&params_with_b(frac), g, SolveOptions::default()).unwrap();
        sup_diff(eq.trader().beta3.values(), base.trader().beta3.values())
    };
    let (g1, g2) = (gap(0.4), gap(0.2));
    assert!(g1 > 0.0);
    assert!((g1 / g2 - 2.0).abs() < 0.2, "{}", g1 / g2);
}

#[test]
fn cbar_from_betas_matches_the_series_sum() {
    let eq = solve(&params_with_b(0.5), grid(200), SolveOptions::default()).unwrap();
    let l = &eq.layer;
    let alt = cbar_from_betas(&l.betas, &l.kernels);
    let diff = (alt.values() - eq.trader().cbar.values())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(diff < 1e-3 * eq.trader().cbar.causal_sup_norm(), "{diff:e}");
}

fn fixed_point_residual(p: &ModelParams, mu: MuPath) -> f64 {
    let eq = solve(p, grid(400), SolveOptions::default()).unwrap();
    let g = eq.grid();
    let m = conditional_moments(eq.trader(), &mu, p.q0_mean, p.q0_second_moment).unwrap();
    assert_eq!(m.nu_bar.len(), g.len());
    let nu = ScalarCurve::new(g, m.nu_bar.clone()).unwrap();
    let mu_curve = ScalarCurve::constant(g, mu.mu_realized);
    let lt = apply_l_tilde(&eq.layer.kernels.seed_pair(), &mu_curve);
    let ln = apply_l(&nu, &eq.layer.kernels);
    let z = &eq.trader().z;
    let resid: Vec<f64> = (0..g.len())
        .map(|k| nu.get(k) - z.get(k) * p.q0_mean - lt.get(k) - eq.b_used * ln.get(k))
        .collect();
    sup(&resid)
}

#[test]
fn mean_control_solves_the_fixed_point() {
    let p = params_with_b(0.5);
    assert!(fixed_point_residual(&p, MuPath::constant(p.mu_mean)) < 1e-8);
    assert!(fixed_point_residual(&p, MuPath::constant(5.0)) < 1e-8);
}

#[test]
fn variance_identity_holds_on_every_slot() {
    let p = params_with_b(0.5);
    let eq = solve(&p, grid(400), SolveOptions::default()).unwrap();
    let var = p.q0_variance();
    for rev in [Revelation::Never, Revelation::At(0.5), Revelation::At(0.3217)] {
        let mu = MuPath::new(rev, p.mu_mean, -3.0);
        let m = conditional_moments(eq.trader(), &mu, p.q0_mean, p.q0_second_moment).unwrap();
        for k in 0..m.times.len() {
            let lhs = m.m_bar[k] - m.nu_bar[k] * m.nu_bar[k];
            let rhs = m.bbar[k] * m.bbar[k] * var;
            assert!((lhs - rhs).abs() <= 1e-10 * m.m_bar[k].abs().max(1e-300), "slot {k}");
        }
    }
}

#[test]
fn zero_variance_gives_squared_mean() {
    let p = params_with_b(0.5);
    let eq = solve(&p, grid(100), SolveOptions::default()).unwrap();
    let mu = MuPath::new(Revelation::At(0.4), 1.0, 2.0);
    let m = conditional_moments(eq.trader(), &mu, 0.7, 0.49).unwrap();
    for (a, b) in m.m_bar.iter().zip(&m.nu_bar) {
        assert!((a - b * b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    assert!(conditional_moments(eq.trader(), &mu, 0.7, 0.3).is_err());
}

#[test]
fn zero_means_before_revelation() {
    let eq = solve(&ModelParams::table1(), grid(200), SolveOptions::zeroth_order()).unwrap();
    let mu = MuPath::new(Revelation::At(0.32), 0.0, 5.0);
    let m = conditional_moments(eq.trader(), &mu, 0.0, 0.25).unwrap();
    let path = TimePath::new(eq.grid(), mu.revelation);
    for (k, slot) in path.slots().iter().enumerate() {
        if !slot.revealed {
            assert_eq!(m.nu_bar[k], 0.0);
            assert!((m.m_bar[k] - m.bbar[k] * m.bbar[k] * 0.25).abs() < 1e-14);
        }
    }
}

#[test]
fn mean_control_matches_monte_carlo() {
    let p = params_with_b(0.5);
    let eq = solve(&p, grid(200), SolveOptions::default()).unwrap();
    let mu = MuPath::new(Revelation::At(eq.policy.decision.revelation().time().unwrap()), p.mu_mean, 4.0);
    let control = trader_control(eq.trader(), TimePath::new(eq.grid(), mu.revelation));
    let m = moments_on(&control, &mu, p.q0_mean, p.q0_second_moment).unwrap();
    let law = Normal::new(p.q0_mean, p.q0_std()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let slots = [0, 40, 100, 160, control.times().len() - 1];
    let n = 100_000;
    let mut sum = [0.0; 5];
    let mut sq = [0.0; 5];
    let drift = control.response.value(mu.mu_mean, mu.mu_realized);
    for _ in 0..n {
        let q0 = law.sample(&mut rng);
        for (i, &k) in slots.iter().enumerate() {
            let v = control.mean_coef[k] * p.q0_mean + control.own_coef[k] * q0 + drift[k];
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    for (i, &k) in slots.iter().enumerate() {
        let mean = sum[i] / n as f64;
        let se = ((sq[i] / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!((mean - m.nu_bar[k]).abs() <= 3.0 * se + 1e-12, "slot {k}");
    }
}

#[test]
fn control_ignores_realized_drift_until_revelation() {
    let p = params_with_b(0.5);
    let eq = solve(&p, grid(200), SolveOptions::default()).unwrap();
    let tc = 0.45;
    let run = |mu| evaluate_trader_control(eq.trader(), 0.8, p.q0_mean, &MuPath::new(Revelation::At(tc), 1.0, mu));
    let (x, y) = (run(-2.0), run(3.0));
    let path = TimePath::new(eq.grid(), Revelation::At(tc));
    let tr = eq.trader();
    for (k, slot) in path.slots().iter().enumerate() {
        if !slot.revealed {
            assert_eq!(x.control[k], y.control[k]);
        } else {
            let t = slot.time;
            let slope = (y.control[k] - x.control[k]) / 5.0;
            let mut pts: Vec<f64> = vec![tc];
            pts.extend(eq.grid().times().into_iter().filter(|&s| s > tc && s < t));
            pts.push(t);
            let (j, _) = eq.grid().locate(t);
            let node = slot.node.unwrap_or(j);
            let vals: Vec<f64> = pts
                .iter()
                .map(|&s| {
                    let (i, w) = eq.grid().locate(s);
                    let i2 = (i + 1).min(eq.grid().n_steps());
                    (1.0 - w) * tr.cbar.get(i, node) + w * tr.cbar.get(i2, node)
                })
                .collect();
            let integral: f64 = pts
                .windows(2)
                .zip(vals.windows(2))
                .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
                .sum();
            if slot.node.is_some() {
                let want = integral + tr.dbar.get(node);
                assert!((slope - want).abs() < 1e-9 * want.abs().max(1.0), "t = {t}");
            }
        }
    }
}

#[test]
fn terminal_control_is_minus_terminal_inventory() {
    let eq = solve(&ModelParams::table1(), grid(800), SolveOptions::zeroth_order()).unwrap();
    for (q0, mu) in [(200.0, 5.0), (0.0, -5.0), (1.3, 5.0)] {
        let path = evaluate_trader_control(eq.trader(), q0, 0.0, &MuPath::new(Revelation::At(0.32), 0.0, mu));
        let last = path.control.len() - 1;
        let (c, q) = (path.control[last], path.inventory[last]);
        assert!((c + q).abs() < 1e-4 * (1.0 + q.abs()), "{c} vs {q}");
    }
}

#[test]
fn large_holder_sells_and_flat_holder_waits() {
    let eq = solve(&ModelParams::table1(), grid(400), SolveOptions::zeroth_order()).unwrap();
    let tc = eq.policy.decision.revelation().time().unwrap();
    let mu = MuPath::new(Revelation::At(tc), 0.0, 5.0);
    let big = evaluate_trader_control(eq.trader(), 200.0, 0.0, &mu);
    let flat = evaluate_trader_control(eq.trader(), 0.0, 0.0, &mu);
    let path = TimePath::new(eq.grid(), mu.revelation);
    let bbar = path.sample(&eq.trader().bbar);
    for (k, slot) in path.slots().iter().enumerate() {
        if !slot.revealed {
            assert!(big.control[k] < 0.0);
            assert!((big.control[k] - 200.0 * bbar[k]).abs() < 1e-9 * big.control[k].abs());
            assert_eq!(flat.control[k], 0.0);
        }
    }
    assert!(flat.control.last().unwrap().abs() > 0.0);
}
