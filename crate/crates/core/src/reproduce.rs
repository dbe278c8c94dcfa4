//! The numerical example: closed forms in the `b → 0` limit and the checks
//! run by `reproduce-example`.

use serde::Serialize;

use crate::broker::Decision;
use crate::equilibrium::{solve, Equilibrium, SolveOptions};
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::model::ModelParams;
use crate::simulate::simulate_broker_path;

/// Closed forms for `γ ≡ γ^B ≡ 0`, `a = η = a^B = 2η^B = 0.01`.
pub mod closed_form {
    pub fn beta3(t_end: f64, s: f64) -> f64 {
        (t_end - s).exp() - 1.0
    }

    pub fn cbar(t_end: f64, s: f64, t: f64) -> f64 {
        50.0 * ((s - t).exp() - (t_end - t).exp())
    }

    pub fn dbar(t_end: f64, t: f64) -> f64 {
        50.0 * ((t_end - t).exp() - 1.0)
    }

    pub fn cbar_b(t_end: f64, s: f64, t: f64) -> f64 {
        -(2.0 * (t_end - t)).exp() + (t_end + s - 2.0 * t).exp() + (t_end - t).exp() - (s - t).exp()
    }

    pub fn dbar_b(t_end: f64, t: f64) -> f64 {
        (-t_end + t + 2.5) * (2.0 * (t_end - t)).exp() - 3.0 * (t_end - t).exp() + 0.5
    }

    pub fn a_prime(t_end: f64, s: f64) -> f64 {
        let x = t_end - s;
        50.0 * (x - 2.5) * (x - 2.0) * (4.0 * x).exp()
            + 275.0 * (x - 13.0 / 6.0) * (3.0 * x).exp()
            - 50.0 * (x - 107.0 / 12.0) * (2.0 * x).exp()
            - 112.5 * x.exp()
            - 50.0 * (x - 17.0 / 12.0)
            + 50.0 * (x - 13.0 / 6.0) * (-x).exp()
            + 50.0 * (-2.0 * x).exp()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    pub n_steps: usize,
    pub tolerance: f64,
    pub checks: Vec<Check>,
}

impl ExampleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `sup |x − y| / sup |y|` over the grid.
pub fn curve_error(grid: TimeGrid, got: impl Fn(usize) -> f64, want: impl Fn(f64) -> f64) -> f64 {
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for k in 0..grid.len() {
        let w = want(grid.time(k));
        num = num.max((got(k) - w).abs());
        den = den.max(w.abs());
    }
    num / den
}

/// The same over the causal triangle `s ≤ t`.
pub fn kernel_error(
    grid: TimeGrid,
    got: impl Fn(usize, usize) -> f64,
    want: impl Fn(f64, f64) -> f64,
) -> f64 {
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for t in 0..grid.len() {
        for s in 0..=t {
            let w = want(grid.time(s), grid.time(t));
            num = num.max((got(s, t) - w).abs());
            den = den.max(w.abs());
        }
    }
    num / den
}

fn check(name: &str, value: f64, target: String, passed: bool) -> Check {
    Check {
        name: name.into(),
        value,
        target,
        passed,
    }
}

/// Relative tolerance for the closed-form checks at a given resolution.
pub fn tolerance_for(n_steps: usize) -> f64 {
    if n_steps >= 800 {
        1e-5
    } else {
        1e-3
    }
}

pub fn run_example_checks(eq: &Equilibrium) -> ExampleReport {
    let g = eq.grid();
    let t_end = g.horizon();
    let tol = tolerance_for(g.n_steps());
    let tr = eq.trader();
    let br = eq.broker();
    let mut checks = Vec::new();

    let tc = match eq.policy.decision {
        Decision::RevealAt(t) => t,
        Decision::NeverReveal => f64::NAN,
    };
    checks.push(check("critical time", tc, "[0.31, 0.33]".into(), (0.31..=0.33).contains(&tc)));

    let rel = |name: &str, e: f64| check(name, e, format!("< {tol:e}"), e < tol);
    checks.push(rel(
        "beta3 closed form",
        curve_error(g, |k| tr.beta3.get(k), |s| closed_form::beta3(t_end, s)),
    ));
    checks.push(rel(
        "cbar closed form",
        kernel_error(g, |s, t| tr.cbar.get(s, t), |s, t| closed_form::cbar(t_end, s, t)),
    ));
    checks.push(rel(
        "dbar closed form",
        curve_error(g, |k| tr.dbar.get(k), |t| closed_form::dbar(t_end, t)),
    ));
    checks.push(rel(
        "cbar_B closed form",
        kernel_error(g, |s, t| br.cbar_b.get(s, t), |s, t| closed_form::cbar_b(t_end, s, t)),
    ));
    checks.push(rel(
        "dbar_B closed form",
        curve_error(g, |k| br.dbar_b.get(k), |t| closed_form::dbar_b(t_end, t)),
    ));
    checks.push(rel(
        "A_prime closed form",
        curve_error(g, |k| eq.a_prime.get(k), |s| closed_form::a_prime(t_end, s)),
    ));

    let interior = tc > 0.0 && tc < t_end && eq.policy.a_min < 0.0;
    checks.push(check(
        "A has a negative interior minimum",
        eq.policy.a_min,
        "< 0 inside (0, T)".into(),
        interior,
    ));

    let bp = simulate_broker_path(eq, eq.params.mu_realized);
    let (peak_k, _) = bp
        .inventory
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    let peak = bp.times[peak_k];
    checks.push(check(
        "broker inventory peak",
        peak,
        "0.75 ± 0.05".into(),
        (peak - 0.75).abs() <= 0.05,
    ));

    let quiet = bp
        .times
        .iter()
        .zip(&bp.control)
        .filter(|(t, _)| **t < tc)
        .all(|(_, v)| *v == 0.0);
    checks.push(check(
        "broker inactive before t_c",
        0.0,
        "control = 0".into(),
        quiet,
    ));

    ExampleReport {
        n_steps: g.n_steps(),
        tolerance: tol,
        checks,
    }
}

/// Solve the example in the `b → 0` limit and run every check.
pub fn reproduce_example(n_steps: usize, tamper: bool) -> Result<(Equilibrium, ExampleReport)> {
    let params = ModelParams::table1();
    let grid = TimeGrid::new(params.horizon, n_steps)?;
    let options = SolveOptions {
        tamper_a_prime: tamper,
        ..SolveOptions::zeroth_order()
    };
    let eq = solve(&params, grid, options)?;
    let report = run_example_checks(&eq);
    Ok((eq, report))
}
