//! Broker side: value coefficients, the information curve `𝒜`, the
//! revelation time and the broker's optimal control.

use ndarray::parallel::prelude::*;
use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::grid::{cumulative, integrate, tail, KernelSurface, ScalarCurve};
use crate::model::ModelParams;
use crate::operators::column_partials;
use crate::path::{AffineControl, MuPath, Revelation, TimePath};
use crate::riccati::RiccatiSolution;
use crate::trader::{moments_on, trader_control, TraderCoefficients};

/// `(Ā^B, C̄^B, D̄^B)`: the broker's `β^B = Ā^B Q̄₀ + ∫ C̄^B μ + D̄^B μ_t`.
#[derive(Debug, Clone)]
pub struct BrokerBetas {
    pub abar_b: ScalarCurve,
    pub cbar_b: KernelSurface,
    pub dbar_b: ScalarCurve,
}

#[derive(Debug, Clone)]
pub struct BrokerCoefficients {
    pub abar_b: ScalarCurve,
    pub cbar_b: KernelSurface,
    pub dbar_b: ScalarCurve,
    pub ahat_b: ScalarCurve,
    pub bhat_b: ScalarCurve,
    pub chat_b: KernelSurface,
    pub dhat_b: ScalarCurve,
}

struct Exp {
    eg: Vec<f64>,
    eng: Vec<f64>,
}

fn exps(r: &RiccatiSolution) -> Exp {
    let eg: Vec<f64> = r.exponent().values().iter().map(|g| g.exp()).collect();
    let eng = eg.iter().map(|v| 1.0 / v).collect();
    Exp { eg, eng }
}

pub fn compute_broker_beta_coefficients(
    b: f64,
    trader: &TraderCoefficients,
    broker_riccati: &RiccatiSolution,
) -> BrokerBetas {
    let grid = broker_riccati.grid();
    let n = grid.len();
    let h = grid.step();
    let a_b = broker_riccati.a();
    let Exp { eg, eng } = exps(broker_riccati);
    let gb = broker_riccati.gamma().values();
    let w: Vec<f64> = gb.iter().map(|g| b + 2.0 * a_b - g).collect();

    let src: Vec<f64> = (0..n)
        .map(|s| w[s] * eng[s] * (trader.abar.get(s) + trader.bbar.get(s)))
        .collect();
    let ta = tail(&src, h);
    let abar_b = (0..n).map(|t| eg[t] * ta[t]).collect();

    let cbar = trader.cbar.values();
    let mut cbar_b = Array2::zeros((n, n));
    cbar_b
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(s, mut row)| {
            let c = cbar.row(s);
            let mut acc = 0.0;
            row[n - 1] = 0.0;
            for t in (s..n - 1).rev() {
                acc += 0.5 * h * (w[t] * eng[t] * c[t] + w[t + 1] * eng[t + 1] * c[t + 1]);
                row[t] = eg[t] * acc;
            }
        });

    let partials = column_partials(cbar, h);
    let mass = tail(&eng, h);
    let dbar_b = (0..n)
        .into_par_iter()
        .map(|t| {
            let v: Vec<f64> = (t..n)
                .map(|s| w[s] * eng[s] * (partials[[t, s]] + trader.dbar.get(s)))
                .collect();
            eg[t] * (integrate(&v, h) + mass[t])
        })
        .collect();

    BrokerBetas {
        abar_b: ScalarCurve::from_vec(grid, abar_b),
        cbar_b: KernelSurface::from_array(grid, cbar_b),
        dbar_b: ScalarCurve::from_vec(grid, dbar_b),
    }
}

pub fn compute_broker_control_coefficients(
    betas: &BrokerBetas,
    trader: &TraderCoefficients,
    broker_riccati: &RiccatiSolution,
) -> BrokerCoefficients {
    let grid = broker_riccati.grid();
    let n = grid.len();
    let h = grid.step();
    let inv = 1.0 / (2.0 * broker_riccati.eta());
    let Exp { eg, eng } = exps(broker_riccati);
    let rate: Vec<f64> = (0..n).map(|t| broker_riccati.rate(t)).collect();

    let src: Vec<f64> = (0..n)
        .map(|s| {
            eng[s] * (inv * betas.abar_b.get(s) - trader.abar.get(s) - trader.bbar.get(s))
        })
        .collect();
    let cs = cumulative(&src, h);
    let ahat_b = (0..n)
        .map(|t| inv * betas.abar_b.get(t) + rate[t] * eg[t] * cs[t])
        .collect();
    let bhat_b = (0..n).map(|t| rate[t] * eg[t]).collect();

    let cb = betas.cbar_b.values();
    let c = trader.cbar.values();
    let mut chat_b = Array2::zeros((n, n));
    chat_b
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(s, mut row)| {
            let boundary = eng[s] * (inv * betas.dbar_b.get(s) - trader.dbar.get(s));
            let f = |r: usize| eng[r] * (inv * cb[[s, r]] - c[[s, r]]);
            let mut acc = 0.0;
            for t in s..n {
                if t > s {
                    acc += 0.5 * h * (f(t - 1) + f(t));
                }
                row[t] = inv * cb[[s, t]] + rate[t] * eg[t] * (acc + boundary);
            }
        });

    BrokerCoefficients {
        abar_b: betas.abar_b.clone(),
        cbar_b: betas.cbar_b.clone(),
        dbar_b: betas.dbar_b.clone(),
        ahat_b: ScalarCurve::from_vec(grid, ahat_b),
        bhat_b: ScalarCurve::from_vec(grid, bhat_b),
        chat_b: KernelSurface::from_array(grid, chat_b),
        dhat_b: betas.dbar_b.map(|v| inv * v),
    }
}

/// The eleven terms whose sum is `𝒜′`.
pub const A_PRIME_TERM_NAMES: [&str; 11] = [
    "eta_D2",
    "minus_D_DB",
    "DB2_over_4etaB",
    "two_eta_int_D_C",
    "minus_int_D_CB",
    "minus_int_DB_C",
    "int_DB_CB_over_2etaB",
    "two_eta_int_IC_C",
    "minus_int_IC_CB",
    "minus_int_ICB_C",
    "int_ICB_CB_over_2etaB",
];

#[derive(Debug, Clone)]
pub struct APrimeTerms {
    pub terms: Vec<ScalarCurve>,
}

impl APrimeTerms {
    pub fn total(&self) -> ScalarCurve {
        let grid = self.terms[0].grid();
        let mut out = vec![0.0; grid.len()];
        for term in &self.terms {
            for (o, v) in out.iter_mut().zip(term.values()) {
                *o += v;
            }
        }
        ScalarCurve::from_vec(grid, out)
    }

    fn group(&self, range: std::ops::Range<usize>) -> ScalarCurve {
        let grid = self.terms[0].grid();
        let mut out = vec![0.0; grid.len()];
        for term in &self.terms[range] {
            for (o, v) in out.iter_mut().zip(term.values()) {
                *o += v;
            }
        }
        ScalarCurve::from_vec(grid, out)
    }

    /// `ηD̄² − D̄D̄^B + (D̄^B)²/(4η^B)`
    pub fn squares(&self) -> ScalarCurve {
        self.group(0..3)
    }

    pub fn single_integrals(&self) -> ScalarCurve {
        self.group(3..7)
    }

    pub fn double_integrals(&self) -> ScalarCurve {
        self.group(7..11)
    }

    /// Flip the sign of the `−D̄D̄^B` term (negative control for the checks).
    pub fn tampered(mut self) -> Self {
        self.terms[1] = self.terms[1].map(|v| -v);
        self
    }
}

pub fn compute_a_prime_terms(
    eta: f64,
    eta_b: f64,
    trader: &TraderCoefficients,
    broker: &BrokerBetas,
) -> APrimeTerms {
    let grid = trader.dbar.grid();
    let n = grid.len();
    let h = grid.step();
    let d = trader.dbar.values();
    let db = broker.dbar_b.values();
    let c = trader.cbar.values();
    let cb = broker.cbar_b.values();
    let ic = column_partials(c, h);
    let icb = column_partials(cb, h);

    let rows: Vec<[f64; 8]> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut acc = [0.0; 8];
            let mut prev = [0.0; 8];
            for r in s..n {
                let cur = [
                    d[r] * c[[s, r]],
                    d[r] * cb[[s, r]],
                    db[r] * c[[s, r]],
                    db[r] * cb[[s, r]],
                    ic[[s, r]] * c[[s, r]],
                    ic[[s, r]] * cb[[s, r]],
                    icb[[s, r]] * c[[s, r]],
                    icb[[s, r]] * cb[[s, r]],
                ];
                if r > s {
                    for i in 0..8 {
                        acc[i] += 0.5 * h * (prev[i] + cur[i]);
                    }
                }
                prev = cur;
            }
            acc
        })
        .collect();

    let inv_b = 1.0 / (2.0 * eta_b);
    let mut terms = vec![vec![0.0; n]; 11];
    for s in 0..n {
        let q = &rows[s];
        terms[0][s] = eta * d[s] * d[s];
        terms[1][s] = -d[s] * db[s];
        terms[2][s] = db[s] * db[s] / (4.0 * eta_b);
        terms[3][s] = 2.0 * eta * q[0];
        terms[4][s] = -q[1];
        terms[5][s] = -q[2];
        terms[6][s] = inv_b * q[3];
        terms[7][s] = 2.0 * eta * q[4];
        terms[8][s] = -q[5];
        terms[9][s] = -q[6];
        terms[10][s] = inv_b * q[7];
    }
    APrimeTerms {
        terms: terms
            .into_iter()
            .map(|v| ScalarCurve::from_vec(grid, v))
            .collect(),
    }
}

/// `𝒜_t = −∫_t^T 𝒜′_s ds`.
pub fn compute_a(a_prime: &ScalarCurve) -> ScalarCurve {
    let grid = a_prime.grid();
    let tl = tail(a_prime.values(), grid.step());
    ScalarCurve::from_vec(grid, tl.into_iter().map(|v| -v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    RevealAt(f64),
    NeverReveal,
}

impl Decision {
    pub fn revelation(&self) -> Revelation {
        match self {
            Decision::RevealAt(t) => Revelation::At(*t),
            Decision::NeverReveal => Revelation::Never,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RevelationPolicy {
    pub decision: Decision,
    pub a_curve: ScalarCurve,
    pub a_prime: ScalarCurve,
    /// `min_t 𝒜_t` after refinement (0 when never revealing).
    pub a_min: f64,
}

/// Earliest minimizer of `𝒜`, refined by a parabola through the bracketing nodes.
pub fn critical_time(a_curve: &ScalarCurve, a_prime: &ScalarCurve) -> RevelationPolicy {
    let v = a_curve.values();
    let grid = a_curve.grid();
    let scale = a_curve.sup_norm();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let never = RevelationPolicy {
        decision: Decision::NeverReveal,
        a_curve: a_curve.clone(),
        a_prime: a_prime.clone(),
        a_min: 0.0,
    };
    if !(min < 0.0) {
        return never;
    }
    let tol = 1e-12 * scale;
    let k = v.iter().position(|&x| x <= min + tol).unwrap_or(0);
    let (mut t, mut value) = (grid.time(k), v[k]);
    if k > 0 && k + 1 < v.len() {
        let (l, c, r) = (v[k - 1], v[k], v[k + 1]);
        let curv = l - 2.0 * c + r;
        if curv > 0.0 {
            let delta = (0.5 * (l - r) / curv).clamp(-0.5, 0.5);
            t += delta * grid.step();
            value = c - 0.25 * (l - r) * delta;
        }
    }
    if !(value < 0.0) {
        return never;
    }
    RevelationPolicy {
        decision: Decision::RevealAt(t),
        a_curve: a_curve.clone(),
        a_prime: a_prime.clone(),
        a_min: value,
    }
}

/// `𝒜` at an arbitrary time by quadratic interpolation about the nearest node.
pub fn a_value_at(a_curve: &ScalarCurve, t: f64) -> f64 {
    let grid = a_curve.grid();
    let v = a_curve.values();
    let h = grid.step();
    let k = ((t / h).round() as usize).clamp(1, grid.n_steps().saturating_sub(1).max(1));
    if grid.n_steps() < 2 {
        return a_curve.value_at(t);
    }
    let x = (t - grid.time(k)) / h;
    let (l, c, r) = (v[k - 1], v[k], v[k + 1]);
    c + 0.5 * x * (r - l) + 0.5 * x * x * (l - 2.0 * c + r)
}

/// `−E[μ]² 𝒜_0 − (E[μ²] − E[μ]²) 𝒜_t` for the step second-moment path revealing at `t`.
pub fn broker_objective_reduced(decision: Decision, a_curve: &ScalarCurve, mu_mean: f64, mu_second_moment: f64) -> f64 {
    let var = mu_second_moment - mu_mean * mu_mean;
    let base = -mu_mean * mu_mean * a_curve.first();
    match decision {
        Decision::NeverReveal => base,
        Decision::RevealAt(t) => base - var * a_value_at(a_curve, t),
    }
}

/// The broker's optimal control as an affine map on a path.
pub fn broker_control(coeffs: &BrokerCoefficients, path: TimePath) -> AffineControl {
    AffineControl::new(path, &coeffs.ahat_b, &coeffs.bhat_b, &coeffs.chat_b, &coeffs.dhat_b)
}

#[derive(Debug, Clone)]
pub struct BrokerPath {
    pub times: Vec<f64>,
    pub control: Vec<f64>,
    pub inventory: Vec<f64>,
}

/// Broker control `ν̂^B` and inventory `dQ^B = (ν̂^B − ν̄) dt`.
pub fn evaluate_broker_control(
    broker: &BrokerCoefficients,
    trader: &TraderCoefficients,
    params: &ModelParams,
    decision: Decision,
    mu_realized: f64,
) -> BrokerPath {
    let grid = broker.ahat_b.grid();
    let path = TimePath::new(grid, decision.revelation());
    let bc = broker_control(broker, path.clone());
    let tc = trader_control(trader, path);
    broker_path_on(&bc, &tc, params, mu_realized)
}

pub(crate) fn broker_path_on(
    bc: &AffineControl,
    tc: &AffineControl,
    params: &ModelParams,
    mu_realized: f64,
) -> BrokerPath {
    let control = bc.eval(params.q0_mean, params.q0_b, params.mu_mean, mu_realized);
    let nu_bar = tc.response.value(params.mu_mean, mu_realized);
    let flow: Vec<f64> = control
        .iter()
        .zip(&nu_bar)
        .zip(tc.mean_coef.iter().zip(&tc.own_coef))
        .map(|((v, x), (a, b))| v - ((a + b) * params.q0_mean + x))
        .collect();
    let inventory = bc.path.integrate(&flow, params.q0_b);
    BrokerPath {
        times: bc.times(),
        control,
        inventory,
    }
}

/// Law used to draw `μ` in payoff simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuSampler {
    /// `E[μ] ± sd` with probability one half each.
    TwoPoint,
    Gaussian,
}

impl MuSampler {
    pub fn draw(&self, rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
        match self {
            MuSampler::TwoPoint => {
                if rand::Rng::random::<bool>(rng) {
                    mean + sd
                } else {
                    mean - sd
                }
            }
            MuSampler::Gaussian => Normal::new(mean, sd).expect("finite sd").sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Monte Carlo estimate of the broker's mean field payoff
/// `E ∫ Q^B(bν̄ + μ_t) + ηM̄ − η^B(ν^B)² − 2a^B Q^B(ν^B − ν̄) − φ^B(Q^B)² dt`
/// under the given revelation decision.
pub fn broker_payoff_monte_carlo(
    decision: Decision,
    trader: &TraderCoefficients,
    broker: &BrokerCoefficients,
    params: &ModelParams,
    sampler: MuSampler,
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    let grid = trader.abar.grid();
    let path = TimePath::new(grid, decision.revelation());
    let tc = trader_control(trader, path.clone());
    let bc = broker_control(broker, path.clone());
    let times = path.times();
    let sd = params.mu_variance().sqrt();

    let values: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mu = sampler.draw(&mut rng, params.mu_mean, sd);
            let mp = MuPath::new(decision.revelation(), params.mu_mean, mu);
            let m = moments_on(&tc, &mp, params.q0_mean, params.q0_second_moment)
                .expect("validated moments");
            let bp = broker_path_on(&bc, &tc, params, mu);
            let mus = path.mu_values(&mp);
            let integrand: Vec<f64> = (0..times.len())
                .map(|k| {
                    let q = bp.inventory[k];
                    let v = bp.control[k];
                    let nb = m.nu_bar[k];
                    q * (params.b * nb + mus[k]) + params.eta * m.m_bar[k]
                        - params.eta_b * v * v
                        - 2.0 * params.a_b * q * (v - nb)
                        - params.phi_b * q * q
                })
                .collect();
            crate::grid::integrate_irregular(&times, &integrand)
        })
        .collect();

    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    #[test]
    fn constant_positive_curve_never_reveals() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let a = ScalarCurve::constant(g, 1.0);
        let p = critical_time(&a, &ScalarCurve::zeros(g));
        assert_eq!(p.decision, Decision::NeverReveal);
    }

    #[test]
    fn zero_minimum_is_treated_as_never() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let a = ScalarCurve::from_fn(g, |t| t * (1.0 - t));
        let p = critical_time(&a, &ScalarCurve::zeros(g));
        assert_eq!(p.decision, Decision::NeverReveal);
    }

    #[test]
    fn equal_minima_pick_the_earliest() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let a = ScalarCurve::from_fn(g, |t| -(2.0 * std::f64::consts::PI * t).sin().powi(2));
        let p = critical_time(&a, &ScalarCurve::zeros(g));
        match p.decision {
            Decision::RevealAt(t) => assert!((t - 0.25).abs() < 1e-9, "{t}"),
            _ => panic!("expected revelation"),
        }
    }

    #[test]
    fn parabola_refines_between_nodes() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let a = ScalarCurve::from_fn(g, |t| (t - 0.33) * (t - 0.33) - 0.5);
        let p = critical_time(&a, &ScalarCurve::zeros(g));
        match p.decision {
            Decision::RevealAt(t) => assert!((t - 0.33).abs() < 1e-12, "{t}"),
            _ => panic!("expected revelation"),
        }
        assert!((p.a_min + 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_mu_makes_objective_flat() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let a = ScalarCurve::from_fn(g, |t| (t - 0.4).powi(2) - 0.1 - 0.26 * (1.0 - t));
        let at = |t| broker_objective_reduced(Decision::RevealAt(t), &a, 2.0, 4.0);
        assert_eq!(at(0.1), at(0.7));
        assert_eq!(at(1.0), broker_objective_reduced(Decision::NeverReveal, &a, 2.0, 4.0));
    }

    #[test]
    fn a_curve_vanishes_at_horizon() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let a = compute_a(&ScalarCurve::from_fn(g, |t| t.exp()));
        assert_eq!(a.last(), 0.0);
        let zero = compute_a(&ScalarCurve::zeros(g));
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

}
