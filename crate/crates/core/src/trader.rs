//! Trader-side equilibrium: the `β` coefficients, the control coefficients
//! `(Ā, B̄, C̄, D̄)` and the conditional moments of the mean field control.

use ndarray::parallel::prelude::*;
use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::grid::{cumulative, tail, KernelSurface, ScalarCurve};
use crate::operators::{
    column_partials, lhat_series, neumann_resolve, BaseKernels, KernelPair, LhatSeries,
};
use crate::path::{AffineControl, MuPath, TimePath};
use crate::riccati::RiccatiSolution;

#[derive(Debug, Clone)]
pub struct BetaCoefficients {
    pub beta1: ScalarCurve,
    /// Two-time `β²_{u,s}` (`u ≤ s`).
    pub beta2: KernelSurface,
    pub beta3: ScalarCurve,
    /// `(I − bL)^{-1} z`
    pub y: ScalarCurve,
    /// `Σ_k b^k L̂^k[C, D]`
    pub series: LhatSeries,
}

#[derive(Debug, Clone)]
pub struct TraderCoefficients {
    pub beta1: ScalarCurve,
    pub beta2: KernelSurface,
    pub beta3: ScalarCurve,
    pub abar: ScalarCurve,
    pub bbar: ScalarCurve,
    pub cbar: KernelSurface,
    pub dbar: ScalarCurve,
    pub z: ScalarCurve,
    pub y: ScalarCurve,
}

/// `z_t = ((γ_t − 2a)/(2η)) Γ_{0,t}`.
pub fn z_curve(riccati: &RiccatiSolution) -> ScalarCurve {
    let grid = riccati.grid();
    ScalarCurve::from_vec(
        grid,
        (0..grid.len())
            .map(|t| riccati.rate(t) * riccati.gamma_kernel(0, t))
            .collect(),
    )
}

pub fn compute_beta_coefficients(
    b: f64,
    riccati: &RiccatiSolution,
    kernels: &BaseKernels,
) -> Result<BetaCoefficients> {
    let grid = kernels.grid();
    let n = grid.len();
    let h = grid.step();
    let eg: Vec<f64> = (0..n).map(|t| kernels.gamma(0, t)).collect();
    let eng: Vec<f64> = eg.iter().map(|v| 1.0 / v).collect();

    let z = z_curve(riccati);
    let y = neumann_resolve(&z, b, kernels)?;
    let ty = tail(&mul(&eng, y.values()), h);
    let beta1 = ScalarCurve::from_vec(grid, (0..n).map(|s| b * eg[s] * ty[s]).collect());

    let series = lhat_series(&kernels.seed_pair(), b, kernels)?;
    let p = &series.sum;

    let mut beta2 = Array2::zeros((n, n));
    if b != 0.0 {
        let pe = p.e.values();
        beta2
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(u, mut row)| {
                let src = pe.row(u);
                let mut acc = 0.0;
                row[n - 1] = 0.0;
                for s in (u..n - 1).rev() {
                    acc += 0.5 * h * (eng[s] * src[s] + eng[s + 1] * src[s + 1]);
                    row[s] = b * eg[s] * acc;
                }
            });
    }

    let partials = column_partials(p.e.values(), h);
    let pf = p.f.values();
    let mass = kernels.horizon_mass();
    let beta3: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|s| {
            if b == 0.0 {
                return mass[s];
            }
            let v: Vec<f64> = (s..n)
                .map(|r| eng[r] * (partials[[s, r]] + pf[r]))
                .collect();
            mass[s] + b * eg[s] * crate::grid::integrate(&v, h)
        })
        .collect();

    Ok(BetaCoefficients {
        beta1,
        beta2: KernelSurface::from_array(grid, beta2),
        beta3: ScalarCurve::from_vec(grid, beta3),
        y,
        series,
    })
}

pub fn compute_trader_coefficients(
    betas: &BetaCoefficients,
    riccati: &RiccatiSolution,
    kernels: &BaseKernels,
) -> TraderCoefficients {
    let grid = kernels.grid();
    let n = grid.len();
    let h = grid.step();
    let eta = kernels.eta();
    let eg: Vec<f64> = (0..n).map(|t| kernels.gamma(0, t)).collect();
    let eng: Vec<f64> = eg.iter().map(|v| 1.0 / v).collect();

    let cb1 = cumulative(&mul(&eng, betas.beta1.values()), h);
    let abar = (0..n)
        .map(|t| betas.beta1.get(t) / (2.0 * eta) + kernels.c_factor(t) * eg[t] * cb1[t])
        .collect();
    let dbar = betas.beta3.map(|v| v / (2.0 * eta));

    TraderCoefficients {
        beta1: betas.beta1.clone(),
        beta2: betas.beta2.clone(),
        beta3: betas.beta3.clone(),
        abar: ScalarCurve::from_vec(grid, abar),
        bbar: z_curve(riccati),
        cbar: betas.series.sum.e.clone(),
        dbar,
        z: z_curve(riccati),
        y: betas.y.clone(),
    }
}

/// `C̄_{s,t}` assembled from `β²`, `β³` by
/// `c_t (∫_s^t Γ_{r,t} β²_{s,r} dr + Γ_{s,t} β³_s) + β²_{s,t}/(2η)`.
///
/// Equal to the kernel-pair series sum up to quadrature error.
pub fn cbar_from_betas(betas: &BetaCoefficients, kernels: &BaseKernels) -> KernelSurface {
    let grid = kernels.grid();
    let n = grid.len();
    let h = grid.step();
    let eta = kernels.eta();
    let eg: Vec<f64> = (0..n).map(|t| kernels.gamma(0, t)).collect();
    let b2 = betas.beta2.values();
    let mut out = Array2::zeros((n, n));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(s, mut row)| {
            let src = b2.row(s);
            let mut acc = 0.0;
            for t in s..n {
                if t > s {
                    acc += 0.5 * h * (src[t - 1] / eg[t - 1] + src[t] / eg[t]);
                }
                row[t] = kernels.c_factor(t) * eg[t] * (acc + betas.beta3.get(s) / eg[s])
                    + src[t] / (2.0 * eta);
            }
        });
    KernelSurface::from_array(grid, out)
}

/// `K_t = ∫_0^t C̄_{s,t} ds + D̄_t`, the response to a constant unit drift.
pub fn unit_drift_response(coeffs: &TraderCoefficients) -> ScalarCurve {
    let pair = KernelPair {
        e: coeffs.cbar.clone(),
        f: coeffs.dbar.clone(),
    };
    crate::operators::apply_l_tilde(&pair, &ScalarCurve::constant(coeffs.dbar.grid(), 1.0))
}

/// The mean field control `ν̂` of one trader as an affine map on a path.
pub fn trader_control(coeffs: &TraderCoefficients, path: TimePath) -> AffineControl {
    AffineControl::new(path, &coeffs.abar, &coeffs.bbar, &coeffs.cbar, &coeffs.dbar)
}

/// Control and inventory of one trader with initial inventory `q0`.
#[derive(Debug, Clone)]
pub struct TraderPath {
    pub times: Vec<f64>,
    pub control: Vec<f64>,
    pub inventory: Vec<f64>,
}

pub fn evaluate_trader_control(
    coeffs: &TraderCoefficients,
    q0: f64,
    q0_mean: f64,
    mu: &MuPath,
) -> TraderPath {
    let control = trader_control(coeffs, TimePath::new(coeffs.abar.grid(), mu.revelation));
    trader_path(&control, q0, q0_mean, mu)
}

pub fn trader_path(control: &AffineControl, q0: f64, q0_mean: f64, mu: &MuPath) -> TraderPath {
    let nu = control.eval(q0_mean, q0, mu.mu_mean, mu.mu_realized);
    let inventory = control.path.integrate(&nu, q0);
    TraderPath {
        times: control.times(),
        control: nu,
        inventory,
    }
}

/// `ν̄_t = E[ν̂_t | ℱ_t]` and `M̄_t = E[ν̂_t² | ℱ_t]` along a path.
#[derive(Debug, Clone)]
pub struct ConditionalMoments {
    pub times: Vec<f64>,
    pub nu_bar: Vec<f64>,
    pub m_bar: Vec<f64>,
    /// `B̄_t` on the same slots.
    pub bbar: Vec<f64>,
}

pub fn conditional_moments(
    coeffs: &TraderCoefficients,
    mu: &MuPath,
    q0_mean: f64,
    q0_second_moment: f64,
) -> Result<ConditionalMoments> {
    let control = trader_control(coeffs, TimePath::new(coeffs.abar.grid(), mu.revelation));
    moments_on(&control, mu, q0_mean, q0_second_moment)
}

pub fn moments_on(
    control: &AffineControl,
    mu: &MuPath,
    q0_mean: f64,
    q0_second_moment: f64,
) -> Result<ConditionalMoments> {
    let mean_sq = q0_mean * q0_mean;
    if q0_second_moment < mean_sq - 1e-12 * mean_sq.max(1.0) {
        return Err(Error::MomentInconsistency {
            variable: "q0",
            second: q0_second_moment,
            mean_sq,
        });
    }
    let x = control.response.value(mu.mu_mean, mu.mu_realized);
    let mut nu_bar = Vec::with_capacity(x.len());
    let mut m_bar = Vec::with_capacity(x.len());
    for ((a, b), x) in control.mean_coef.iter().zip(&control.own_coef).zip(&x) {
        nu_bar.push((a + b) * q0_mean + x);
        m_bar.push(
            (a * a + 2.0 * a * b) * mean_sq
                + b * b * q0_second_moment
                + 2.0 * (a + b) * x * q0_mean
                + x * x,
        );
    }
    Ok(ConditionalMoments {
        times: control.times(),
        nu_bar,
        m_bar,
        bbar: control.own_coef.clone(),
    })
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}
