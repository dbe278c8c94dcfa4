//! End-to-end Stackelberg solve: trader equilibrium, broker coefficients,
//! information curve and revelation policy.

use serde::{Deserialize, Serialize};

use crate::broker::{
    compute_a, compute_a_prime_terms, compute_broker_beta_coefficients,
    compute_broker_control_coefficients, critical_time, APrimeTerms, BrokerBetas,
    BrokerCoefficients, RevelationPolicy,
};
use crate::error::{Error, Result};
use crate::grid::{ScalarCurve, TimeGrid};
use crate::model::ModelParams;
use crate::operators::{build_base_kernels, BaseKernels};
use crate::riccati::{solve_gamma, solve_gamma_broker, RiccatiSolution};
use crate::trader::{
    compute_beta_coefficients, compute_trader_coefficients, BetaCoefficients, TraderCoefficients,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Drop every correction in `b` (solve at `b = 0`).
    pub zeroth_order: bool,
    /// Extrapolate `𝒜′` and `𝒜` from the grid and its refinement.
    pub richardson: bool,
    /// Negative control: flip the sign of one `𝒜′` term.
    pub tamper_a_prime: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            zeroth_order: false,
            richardson: true,
            tamper_a_prime: false,
        }
    }
}

impl SolveOptions {
    pub fn zeroth_order() -> Self {
        Self {
            zeroth_order: true,
            ..Self::default()
        }
    }
}

/// Every coefficient computed on a single grid.
#[derive(Debug, Clone)]
pub struct Layer {
    pub grid: TimeGrid,
    pub riccati: RiccatiSolution,
    pub broker_riccati: RiccatiSolution,
    pub kernels: BaseKernels,
    pub betas: BetaCoefficients,
    pub trader: TraderCoefficients,
    pub broker_betas: BrokerBetas,
    pub broker: BrokerCoefficients,
    pub a_prime_terms: APrimeTerms,
}

pub fn solve_layer(params: &ModelParams, b: f64, grid: TimeGrid, tamper: bool) -> Result<Layer> {
    let riccati = solve_gamma(params.a, params.eta, params.phi, grid)?;
    let broker_riccati = solve_gamma_broker(params.a_b, params.eta_b, params.phi_b, grid)?;
    let kernels = build_base_kernels(&riccati);
    let betas = compute_beta_coefficients(b, &riccati, &kernels)?;
    let trader = compute_trader_coefficients(&betas, &riccati, &kernels);
    let broker_betas = compute_broker_beta_coefficients(b, &trader, &broker_riccati);
    let broker = compute_broker_control_coefficients(&broker_betas, &trader, &broker_riccati);
    let mut a_prime_terms = compute_a_prime_terms(params.eta, params.eta_b, &trader, &broker_betas);
    if tamper {
        a_prime_terms = a_prime_terms.tampered();
    }
    Ok(Layer {
        grid,
        riccati,
        broker_riccati,
        kernels,
        betas,
        trader,
        broker_betas,
        broker,
        a_prime_terms,
    })
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub params: ModelParams,
    pub options: SolveOptions,
    /// The `b` actually used (zero in zeroth-order mode).
    pub b_used: f64,
    pub layer: Layer,
    /// `𝒜′` after extrapolation (equal to the layer's sum without it).
    pub a_prime: ScalarCurve,
    pub a_curve: ScalarCurve,
    pub policy: RevelationPolicy,
}

impl Equilibrium {
    pub fn grid(&self) -> TimeGrid {
        self.layer.grid
    }

    pub fn trader(&self) -> &TraderCoefficients {
        &self.layer.trader
    }

    pub fn broker(&self) -> &BrokerCoefficients {
        &self.layer.broker
    }
}

/// Reject `b` at or above the admissibility bound.
pub fn check_b(params: &ModelParams) -> Result<()> {
    let bound = params.b_admissibility_bound();
    if params.b >= bound {
        return Err(Error::BAboveBound { b: params.b, bound });
    }
    Ok(())
}

pub fn solve(params: &ModelParams, grid: TimeGrid, options: SolveOptions) -> Result<Equilibrium> {
    let params = params.clone().validate()?;
    if (grid.horizon() - params.horizon).abs() > 1e-12 * params.horizon {
        return Err(Error::InvalidGrid(format!(
            "grid horizon {} differs from T = {}",
            grid.horizon(),
            params.horizon
        )));
    }
    let b = if options.zeroth_order {
        0.0
    } else {
        check_b(&params)?;
        params.b
    };

    let (layer, fine) = if options.richardson {
        let (coarse, fine) = rayon::join(
            || solve_layer(&params, b, grid, options.tamper_a_prime),
            || solve_layer(&params, b, grid.refined(), options.tamper_a_prime),
        );
        (coarse?, Some(fine?))
    } else {
        (solve_layer(&params, b, grid, options.tamper_a_prime)?, None)
    };

    let coarse_prime = layer.a_prime_terms.total();
    let coarse_a = compute_a(&coarse_prime);
    let (a_prime, a_curve) = match &fine {
        Some(f) => {
            let fine_prime = f.a_prime_terms.total();
            let fine_a = compute_a(&fine_prime);
            (
                extrapolate(&coarse_prime, &ScalarCurve::restrict_from_refined(&fine_prime)),
                extrapolate(&coarse_a, &ScalarCurve::restrict_from_refined(&fine_a)),
            )
        }
        None => (coarse_prime, coarse_a),
    };
    let policy = critical_time(&a_curve, &a_prime);
    Ok(Equilibrium {
        params,
        options,
        b_used: b,
        layer,
        a_prime,
        a_curve,
        policy,
    })
}

/// `(4 f_{h/2} − f_h)/3` at shared nodes.
pub fn extrapolate(coarse: &ScalarCurve, fine_restricted: &ScalarCurve) -> ScalarCurve {
    coarse.zip_with(fine_restricted, |c, f| (4.0 * f - c) / 3.0)
}
