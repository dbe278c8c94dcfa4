//! Market and risk parameters of the broker/trader game.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the traders' initial inventory, used only when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Q0Law {
    #[default]
    Gaussian,
    /// `mean ± std` with probability one half each.
    TwoPoint,
}

impl Q0Law {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, mean: f64, std: f64) -> f64 {
        match self {
            Q0Law::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            Q0Law::TwoPoint => {
                if rng.random::<bool>() {
                    mean + std
                } else {
                    mean - std
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub eta: f64,
    pub phi: f64,
    pub b: f64,
    pub a_b: f64,
    pub eta_b: f64,
    pub phi_b: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Broker initial inventory `Q_0^B`.
    pub q0_b: f64,
    pub mu_mean: f64,
    pub mu_second_moment: f64,
    pub mu_realized: f64,
    pub q0_mean: f64,
    pub q0_second_moment: f64,
    pub q0_law: Q0Law,
}

impl ModelParams {
    /// The numerical example: `γ ≡ γ^B ≡ 0`, `E[μ] = 0`, realized `μ = 5`,
    /// `Q_0 ~ N(0, 0.5²)`.
    ///
    /// The example leaves `b` and `E[μ²]` open; here `b = 0` and
    /// `E[μ²] = 25` (a two-point law `±5`).
    pub fn table1() -> Self {
        let (a, eta, a_b, eta_b) = (1e-2, 1e-2, 1e-2, 5e-3);
        Self {
            a,
            eta,
            phi: a * a / eta,
            b: 0.0,
            a_b,
            eta_b,
            phi_b: a_b * a_b / eta_b,
            horizon: 2.0,
            q0_b: 0.0,
            mu_mean: 0.0,
            mu_second_moment: 25.0,
            mu_realized: 5.0,
            q0_mean: 0.0,
            q0_second_moment: 0.25,
            q0_law: Q0Law::Gaussian,
        }
    }

    pub fn validate(self) -> Result<Self> {
        let positive = [
            ("a", self.a),
            ("eta", self.eta),
            ("phi", self.phi),
            ("a_B", self.a_b),
            ("eta_B", self.eta_b),
            ("phi_B", self.phi_b),
            ("T", self.horizon),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::NegativeParameter {
                name: "b",
                value: self.b,
            });
        }
        let finite = [
            ("Q0_B", self.q0_b),
            ("mu_mean", self.mu_mean),
            ("mu_second_moment", self.mu_second_moment),
            ("mu_realized", self.mu_realized),
            ("q0_mean", self.q0_mean),
            ("q0_second_moment", self.q0_second_moment),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::InvalidInput(format!("`{name}` must be finite, got {value}")));
            }
        }
        check_moments("mu", self.mu_mean, self.mu_second_moment)?;
        check_moments("q0", self.q0_mean, self.q0_second_moment)?;
        Ok(self)
    }

    pub fn mu_variance(&self) -> f64 {
        (self.mu_second_moment - self.mu_mean * self.mu_mean).max(0.0)
    }

    pub fn q0_variance(&self) -> f64 {
        (self.q0_second_moment - self.q0_mean * self.q0_mean).max(0.0)
    }

    pub fn q0_std(&self) -> f64 {
        self.q0_variance().sqrt()
    }

    /// True when `E[μ²] = E[μ]²`, i.e. revealing carries no information.
    pub fn mu_is_degenerate(&self) -> bool {
        self.mu_variance() <= 1e-14 * self.mu_second_moment.abs().max(1.0)
    }

    pub fn b_admissibility_bound(&self) -> f64 {
        b_admissibility_bound(self.a, self.eta, self.phi, self.horizon)
    }

    /// Effective trader aversion in the `N`-player game.
    pub fn a_n(&self, n: usize) -> f64 {
        self.a - self.b / (2.0 * n as f64)
    }
}

fn check_moments(variable: &'static str, mean: f64, second: f64) -> Result<()> {
    let mean_sq = mean * mean;
    // Allow for rounding when the second moment was formed as mean² + var.
    if second < mean_sq - 1e-12 * mean_sq.max(1.0) {
        return Err(Error::MomentInconsistency {
            variable,
            second,
            mean_sq,
        });
    }
    Ok(())
}

/// `max(a, √(ηφ))`, the rate that controls every kernel bound.
pub fn dominant_rate(a: f64, eta: f64, phi: f64) -> f64 {
    a.max((eta * phi).sqrt())
}

/// Upper limit on the permanent impact `b` for which the Neumann series of
/// both the curve operator and the kernel-pair operator converge.
pub fn b_admissibility_bound(a: f64, eta: f64, phi: f64, horizon: f64) -> f64 {
    let m = dominant_rate(a, eta, phi);
    let small = (eta * eta / a).min(eta.powf(1.5) / phi.sqrt()).min(eta);
    (-2.0 * horizon * m / eta).exp() * small / (horizon * horizon + horizon)
}

/// Closed-form bound on the sup-norm of the curve operator `L`.
pub fn l_norm_bound(a: f64, eta: f64, phi: f64, horizon: f64) -> f64 {
    let m = dominant_rate(a, eta, phi);
    let t = horizon;
    (2.0 * t * m / eta).exp()
        * ((m * m) / (4.0 * eta.powi(4)) * t.powi(4) + t * t / (eta * eta)).sqrt()
}

/// Closed-form bound on the norm of the kernel-pair operator `L̂`.
pub fn lhat_norm_bound(a: f64, eta: f64, phi: f64, horizon: f64) -> f64 {
    let m = dominant_rate(a, eta, phi);
    let t = horizon;
    let first = t * t / (4.0 * eta) + t / (2.0 * eta);
    let second = m / (2.0 * eta * eta) * (t * t + t) + t / (2.0 * eta);
    (2.0 * t * m / eta).exp() * first.max(second)
}
