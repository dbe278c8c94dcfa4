//! Monte Carlo trajectories: trader population, broker and price.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::broker::{evaluate_broker_control, BrokerPath};
use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::model::Q0Law;
use crate::path::{MuPath, TimePath};
use crate::trader::{moments_on, trader_control};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub q0_mean: f64,
    pub q0_std: f64,
    pub q0_law: Q0Law,
    pub sigma: Option<f64>,
    pub s0: f64,
    pub checkpoints: Vec<f64>,
    pub n_bins: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            seed: 42,
            q0_mean: 0.0,
            q0_std: 0.5,
            q0_law: Q0Law::Gaussian,
            sigma: None,
            s0: 100.0,
            checkpoints: vec![0.0, 0.25, 0.5, 1.0, 1.5, 2.0],
            n_bins: 40,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidInput("n_paths must be at least 1".into()));
        }
        if self.n_bins == 0 {
            return Err(Error::InvalidInput("n_bins must be at least 1".into()));
        }
        if !(self.q0_std >= 0.0) {
            return Err(Error::InvalidInput(format!("q0_std must be non-negative, got {}", self.q0_std)));
        }
        if let Some(&t) = self
            .checkpoints
            .iter()
            .find(|&&t| !(0.0..=horizon).contains(&t))
        {
            return Err(Error::InvalidInput(format!("checkpoint {t} lies outside [0, {horizon}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationSnapshot {
    pub time: f64,
    pub mean: f64,
    pub std: f64,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone)]
pub struct Population {
    pub times: Vec<f64>,
    /// Sample mean and standard deviation of the inventories on every slot.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub snapshots: Vec<PopulationSnapshot>,
}

/// Linear interpolation on a nondecreasing slot axis, taking the right limit
/// at a repeated time.
fn at_time(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|&s| s <= t);
    if k == 0 {
        return values[0];
    }
    if k == times.len() {
        return values[k - 1];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    if t1 <= t0 {
        return values[k];
    }
    let w = (t - t0) / (t1 - t0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

fn histogram(values: &[f64], n_bins: usize) -> Vec<HistogramBin> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            left: lo + i as f64 * width,
            right: lo + (i + 1) as f64 * width,
            count,
        })
        .collect()
}

/// Population mean and standard deviation, accumulated about the first sample.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let shift = values[0];
    let (s1, s2) = values.iter().fold((0.0, 0.0), |(a, b), v| {
        let d = v - shift;
        (a + d, b + d * d)
    });
    let m = s1 / n;
    (shift + m, (s2 / n - m * m).max(0.0).sqrt())
}

/// Inventories of `n_paths` traders with sampled `Q₀`, all facing the
/// equilibrium policy and the realized drift `mu`.
pub fn simulate_population(eq: &Equilibrium, mu: f64, config: &SimulationConfig) -> Result<Population> {
    config.validate(eq.params.horizon)?;
    let path = TimePath::new(eq.grid(), eq.policy.decision.revelation());
    let control = trader_control(eq.trader(), path);
    let mp = MuPath::new(control.path.revelation(), eq.params.mu_mean, mu);
    let times = control.times();
    let q0_mean = eq.params.q0_mean;

    let paths: Vec<Vec<f64>> = (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let q0 = config.q0_law.draw(&mut rng, config.q0_mean, config.q0_std);
            crate::trader::trader_path(&control, q0, q0_mean, &mp).inventory
        })
        .collect();

    let (mean, std): (Vec<f64>, Vec<f64>) = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let col: Vec<f64> = paths.iter().map(|p| p[k]).collect();
            mean_std(&col)
        })
        .unzip();

    let snapshots = config
        .checkpoints
        .iter()
        .map(|&t| {
            let values: Vec<f64> = paths.iter().map(|p| at_time(&times, p, t)).collect();
            let (m, s) = mean_std(&values);
            PopulationSnapshot {
                time: t,
                mean: m,
                std: s,
                bins: histogram(&values, config.n_bins),
            }
        })
        .collect();

    Ok(Population {
        times,
        mean,
        std,
        snapshots,
    })
}

pub fn simulate_broker_path(eq: &Equilibrium, mu: f64) -> BrokerPath {
    evaluate_broker_control(eq.broker(), eq.trader(), &eq.params, eq.policy.decision, mu)
}

#[derive(Debug, Clone)]
pub struct PricePath {
    pub times: Vec<f64>,
    pub price: Vec<f64>,
}

/// Euler path of `dS = (b ν̄_t + μ) dt + σ dW` driven by the true drift `mu`.
pub fn simulate_price(
    eq: &Equilibrium,
    mu: f64,
    sigma: Option<f64>,
    s0: f64,
    seed: u64,
) -> Result<PricePath> {
    let sigma = sigma.ok_or(Error::MissingSigma)?;
    let path = TimePath::new(eq.grid(), eq.policy.decision.revelation());
    let control = trader_control(eq.trader(), path);
    let mp = MuPath::new(control.path.revelation(), eq.params.mu_mean, mu);
    let m = moments_on(&control, &mp, eq.params.q0_mean, eq.params.q0_second_moment)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut price = Vec::with_capacity(m.times.len());
    let mut s = s0;
    price.push(s);
    for k in 1..m.times.len() {
        let dt = m.times[k] - m.times[k - 1];
        if dt > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            s += (eq.b_used * m.nu_bar[k - 1] + mu) * dt + sigma * dt.sqrt() * z;
        }
        price.push(s);
    }
    Ok(PricePath {
        times: m.times,
        price,
    })
}
