//! The `N`-trader Nash equilibrium and its convergence to the mean field limit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{b_admissibility_bound, ModelParams, Q0Law};
use crate::operators::build_base_kernels;
use crate::path::{AffineControl, MuPath, TimePath};
use crate::riccati::{solve_gamma_n, RiccatiSolution};
use crate::trader::{
    compute_beta_coefficients, compute_trader_coefficients, trader_control, TraderCoefficients,
};

/// `(Ā^N, B̄^N, C̄^N, D̄^N)` with `ν^{N,j} = Ā^N Q̄₀ + B̄^N Q₀^j + ∫C̄^N μ + D̄^N μ_t`.
#[derive(Debug, Clone)]
pub struct FiniteCoefficients {
    pub n: usize,
    pub riccati: RiccatiSolution,
    /// Impact seen by the average fixed point, `b (N−1)/N`.
    pub b_eff: f64,
    pub coeffs: TraderCoefficients,
}

impl FiniteCoefficients {
    pub fn z(&self) -> &crate::grid::ScalarCurve {
        &self.coeffs.z
    }
}

fn check_n(params: &ModelParams, n: usize) -> Result<()> {
    if params.b == 0.0 {
        return if n == 0 {
            Err(Error::NTooSmall {
                n,
                reason: "at least one trader is needed".into(),
            })
        } else {
            Ok(())
        };
    }
    if n <= 1 {
        return Err(Error::NTooSmall {
            n,
            reason: "with b > 0 the own-impact terms need N ≥ 2".into(),
        });
    }
    if n as f64 <= params.b / params.a {
        return Err(Error::NTooSmall {
            n,
            reason: format!("N must exceed b/a = {:e}", params.b / params.a),
        });
    }
    let a_n = params.a_n(n);
    let b_eff = params.b * (n - 1) as f64 / n as f64;
    let bound = b_admissibility_bound(a_n, params.eta, params.phi, params.horizon);
    if b_eff >= bound {
        return Err(Error::NTooSmall {
            n,
            reason: format!("b(N-1)/N = {b_eff:e} is not below the bound {bound:e} at a_N"),
        });
    }
    Ok(())
}

pub fn compute_finite_coefficients(
    params: &ModelParams,
    n: usize,
    grid: TimeGrid,
) -> Result<FiniteCoefficients> {
    check_n(params, n)?;
    let riccati = solve_gamma_n(params, n, grid)?;
    let kernels = build_base_kernels(&riccati);
    let b_eff = if n > 1 {
        params.b * (n - 1) as f64 / n as f64
    } else {
        0.0
    };
    let betas = compute_beta_coefficients(b_eff, &riccati, &kernels)?;
    let coeffs = compute_trader_coefficients(&betas, &riccati, &kernels);
    Ok(FiniteCoefficients {
        n,
        riccati,
        b_eff,
        coeffs,
    })
}

/// Nash controls of all `N` traders on the path of `mu`.
pub fn evaluate_nash_controls(
    coeffs: &FiniteCoefficients,
    inventories: &[f64],
    q0_mean: f64,
    mu: &MuPath,
) -> Result<Vec<Vec<f64>>> {
    if inventories.len() != coeffs.n {
        return Err(Error::LengthMismatch {
            expected: coeffs.n,
            got: inventories.len(),
        });
    }
    let control = trader_control(
        &coeffs.coeffs,
        TimePath::new(coeffs.coeffs.abar.grid(), mu.revelation),
    );
    Ok(inventories
        .iter()
        .map(|&q| control.eval(q0_mean, q, mu.mu_mean, mu.mu_realized))
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub repeat: usize,
    pub e1: f64,
    pub e2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub n: usize,
    pub e1: f64,
    pub e2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
    pub summary: Vec<ConvergenceSummary>,
    pub slope_e1: f64,
    pub slope_e2: f64,
    /// True when the finite coefficients equal the mean field ones exactly.
    pub coefficients_identical: bool,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

struct Sup {
    e1: f64,
    e2: f64,
}

fn errors(
    finite: &AffineControl,
    mean_field: &AffineControl,
    inventories: &[f64],
    params: &ModelParams,
    mu: f64,
) -> Sup {
    let n = inventories.len() as f64;
    let mf = crate::trader::moments_on(
        mean_field,
        &MuPath::new(mean_field.path.revelation(), params.mu_mean, mu),
        params.q0_mean,
        params.q0_second_moment,
    )
    .expect("validated moments");
    let x = finite.response.value(params.mu_mean, mu);
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for k in 0..x.len() {
        let base = finite.mean_coef[k] * params.q0_mean + x[k];
        let own = finite.own_coef[k];
        let (mut s1, mut s2) = (0.0, 0.0);
        for &q in inventories {
            let v = base + own * q;
            s1 += v;
            s2 += v * v;
        }
        e1 = e1.max((s1 / n - mf.nu_bar[k]).powi(2));
        e2 = e2.max((s2 / n - mf.m_bar[k]).abs());
    }
    Sup { e1, e2 }
}

/// Monte Carlo estimates of the two mean field approximation errors for each
/// `N`, with the traders facing the equilibrium revelation policy.
pub fn convergence_study(
    eq: &Equilibrium,
    ns: &[usize],
    n_repeats: usize,
    seed: u64,
    q0_law: Q0Law,
) -> Result<ConvergenceReport> {
    let mut params = eq.params.clone();
    params.b = eq.b_used;
    let grid = eq.grid();
    let path = TimePath::new(grid, eq.policy.decision.revelation());
    let mean_field = trader_control(eq.trader(), path.clone());
    let std = params.q0_std();

    let mut records = Vec::new();
    let mut summary = Vec::new();
    let mut identical = true;
    for (i, &n) in ns.iter().enumerate() {
        let fc = compute_finite_coefficients(&params, n, grid)?;
        identical &= fc.coeffs.abar.values() == eq.trader().abar.values()
            && fc.coeffs.bbar.values() == eq.trader().bbar.values()
            && fc.coeffs.cbar.values() == eq.trader().cbar.values()
            && fc.coeffs.dbar.values() == eq.trader().dbar.values();
        let finite = trader_control(&fc.coeffs, path.clone());
        let recs: Vec<ConvergenceRecord> = (0..n_repeats)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((i as u64) << 32) | r as u64);
                let q: Vec<f64> = (0..n)
                    .map(|_| q0_law.draw(&mut rng, params.q0_mean, std))
                    .collect();
                let s = errors(&finite, &mean_field, &q, &params, params.mu_realized);
                ConvergenceRecord {
                    n,
                    repeat: r,
                    e1: s.e1,
                    e2: s.e2,
                }
            })
            .collect();
        let m = recs.len().max(1) as f64;
        summary.push(ConvergenceSummary {
            n,
            e1: recs.iter().map(|r| r.e1).sum::<f64>() / m,
            e2: recs.iter().map(|r| r.e2).sum::<f64>() / m,
        });
        records.extend(recs);
    }
    let xs: Vec<f64> = summary.iter().map(|s| s.n as f64).collect();
    let slope = |f: fn(&ConvergenceSummary) -> f64| {
        let ys: Vec<f64> = summary.iter().map(f).collect();
        if xs.len() < 2 || ys.iter().any(|&y| !(y > 0.0)) {
            f64::NAN
        } else {
            log_log_slope(&xs, &ys)
        }
    };
    Ok(ConvergenceReport {
        slope_e1: slope(|s| s.e1),
        slope_e2: slope(|s| s.e2),
        records,
        summary,
        coefficients_identical: identical,
    })
}
