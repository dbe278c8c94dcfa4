//! Scalar Riccati terminal-value problems and their exponential kernels.

use crate::error::{Error, Result};
use crate::grid::{cumulative, KernelSurface, ScalarCurve, TimeGrid};
use crate::model::ModelParams;

/// A solved Riccati coefficient `γ` together with the kernel
/// `Γ_{s,t} = exp(∫_s^t (γ_r − 2a)/(2η) dr)`.
///
/// The kernel is stored through its exponent `G_t = ∫_0^t (γ_r − 2a)/(2η) dr`
/// so that `Γ_{s,t} = exp(G_t − G_s)` for every ordered or reversed pair.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    a: f64,
    eta: f64,
    gamma: ScalarCurve,
    exponent: ScalarCurve,
}

impl RiccatiSolution {
    pub fn grid(&self) -> TimeGrid {
        self.gamma.grid()
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> &ScalarCurve {
        &self.gamma
    }

    pub fn exponent(&self) -> &ScalarCurve {
        &self.exponent
    }

    /// `(γ_t − 2a) / (2η)` at node `k`.
    pub fn rate(&self, k: usize) -> f64 {
        (self.gamma.get(k) - 2.0 * self.a) / (2.0 * self.eta)
    }

    /// `Γ_{s,t}` for node indices `s` and `t` (either order).
    pub fn gamma_kernel(&self, s: usize, t: usize) -> f64 {
        (self.exponent.get(t) - self.exponent.get(s)).exp()
    }

    /// The full `Γ_{s,t}` table.
    pub fn kernel(&self) -> KernelSurface {
        let g = self.exponent.values();
        let grid = self.grid();
        let values = ndarray::Array2::from_shape_fn((grid.len(), grid.len()), |(s, t)| {
            (g[t] - g[s]).exp()
        });
        KernelSurface::from_array(grid, values)
    }
}

/// Trader Riccati: `dγ/dt = φ − a²/η + (2a/η)γ − γ²/(2η)`, `γ_T = 0`.
pub fn solve_gamma(a: f64, eta: f64, phi: f64, grid: TimeGrid) -> Result<RiccatiSolution> {
    solve(phi - a * a / eta, a, eta, grid)
}

/// Broker Riccati: the constant term is `2(φ^B − (a^B)²/η^B)`.
pub fn solve_gamma_broker(a_b: f64, eta_b: f64, phi_b: f64, grid: TimeGrid) -> Result<RiccatiSolution> {
    solve(2.0 * (phi_b - a_b * a_b / eta_b), a_b, eta_b, grid)
}

/// `N`-trader Riccati: the trader equation with `a` replaced by `a − b/(2N)`.
pub fn solve_gamma_n(params: &ModelParams, n: usize, grid: TimeGrid) -> Result<RiccatiSolution> {
    if params.b > 0.0 && (n as f64) <= params.b / params.a {
        return Err(Error::NTooSmall {
            n,
            reason: format!(
                "N must exceed b/a = {:e} so that the shifted aversion stays positive",
                params.b / params.a
            ),
        });
    }
    let a_n = params.a_n(n);
    solve(params.phi - a_n * a_n / params.eta, a_n, params.eta, grid)
}

/// Classical RK4 backwards from `γ_T = 0` on the grid.
fn solve(c0: f64, a: f64, eta: f64, grid: TimeGrid) -> Result<RiccatiSolution> {
    let rhs = |g: f64| c0 + 2.0 * a / eta * g - g * g / (2.0 * eta);
    let n = grid.n_steps();
    let h = -grid.step();
    let mut gamma = vec![0.0; grid.len()];
    for k in (0..n).rev() {
        let g = gamma[k + 1];
        let k1 = rhs(g);
        let k2 = rhs(g + 0.5 * h * k1);
        let k3 = rhs(g + 0.5 * h * k2);
        let k4 = rhs(g + h * k3);
        let next = g + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() || next.abs() > 1e150 {
            return Err(Error::RiccatiBlowup { time: grid.time(k) });
        }
        gamma[k] = next;
    }
    let rate: Vec<f64> = gamma.iter().map(|g| (g - 2.0 * a) / (2.0 * eta)).collect();
    let exponent = cumulative(&rate, grid.step());
    Ok(RiccatiSolution {
        a,
        eta,
        gamma: ScalarCurve::from_vec(grid, gamma),
        exponent: ScalarCurve::from_vec(grid, exponent),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(2.0, 800).unwrap()
    }

    #[test]
    fn balanced_penalty_gives_zero_gamma() {
        let sol = solve_gamma(0.01, 0.01, 0.01, grid()).unwrap();
        assert!(sol.gamma().values().iter().all(|&g| g == 0.0));
        let k = sol.kernel();
        assert!((k.get(0, 800) - (-2.0f64).exp()).abs() < 1e-14);
        assert!((k.get(0, 800) - 0.135335).abs() < 1e-6);
        let sb = solve_gamma_broker(0.01, 0.005, 0.02, grid()).unwrap();
        assert!(sb.gamma().values().iter().all(|&g| g == 0.0));
        assert!((sb.gamma_kernel(100, 500) - (-2.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn terminal_condition_and_diagonal() {
        let sol = solve_gamma(0.01, 0.01, 0.03, grid()).unwrap();
        assert_eq!(sol.gamma().last(), 0.0);
        for k in 0..=800 {
            assert_eq!(sol.gamma_kernel(k, k), 1.0);
        }
    }

    #[test]
    fn kernel_is_multiplicative() {
        let sol = solve_gamma(0.02, 0.01, 0.005, grid()).unwrap();
        for &(r, s, t) in &[(0, 100, 800), (10, 400, 20), (799, 3, 402)] {
            let lhs = sol.gamma_kernel(r, s) * sol.gamma_kernel(s, t);
            let rhs = sol.gamma_kernel(r, t);
            assert!((lhs - rhs).abs() < 1e-13 * rhs.abs());
        }
    }

    #[test]
    fn finite_difference_residual() {
        let (a, eta, phi) = (0.01, 0.01, 0.03);
        let g = grid();
        let sol = solve_gamma(a, eta, phi, g).unwrap();
        let v = sol.gamma().values();
        let h = g.step();
        let mut worst: f64 = 0.0;
        for k in 1..800 {
            let d = (v[k + 1] - v[k - 1]) / (2.0 * h);
            let rhs = phi - a * a / eta + 2.0 * a / eta * v[k] - v[k] * v[k] / (2.0 * eta);
            worst = worst.max((d - rhs).abs());
        }
        assert!(worst < 1e-6, "residual {worst}");
    }

    #[test]
    fn n_player_requires_large_n() {
        let mut p = ModelParams::table1();
        p.b = 0.05;
        assert!(matches!(
            solve_gamma_n(&p, 4, grid()),
            Err(Error::NTooSmall { .. })
        ));
        assert!(solve_gamma_n(&p, 6, grid()).is_ok());
    }

    #[test]
    fn n_player_equals_mean_field_without_impact() {
        let p = ModelParams {
            phi: 0.02,
            ..ModelParams::table1()
        };
        let mf = solve_gamma(p.a, p.eta, p.phi, grid()).unwrap();
        let fin = solve_gamma_n(&p, 10, grid()).unwrap();
        assert_eq!(mf.gamma().values(), fin.gamma().values());
    }
}
