//! Flat key/value run configuration.
//!
//! Keys follow the parameter symbols: `a`, `eta`, `phi`, `b`, `a_B`, `eta_B`,
//! `phi_B`, `T`, `Q0_B`, `mu_mean`, `mu_second_moment`, `mu_realized`,
//! `q0_mean`, `q0_std`, `n_steps`, `seed`. Missing keys take the numerical
//! example's values; `phi` and `phi_B` default to `a²/η` and `(a^B)²/η^B`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::equilibrium::SolveOptions;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{ModelParams, Q0Law};
use crate::simulate::SimulationConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub a: Option<f64>,
    pub eta: Option<f64>,
    pub phi: Option<f64>,
    pub b: Option<f64>,
    #[serde(rename = "a_B")]
    pub a_b: Option<f64>,
    #[serde(rename = "eta_B")]
    pub eta_b: Option<f64>,
    #[serde(rename = "phi_B")]
    pub phi_b: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[serde(rename = "Q0_B")]
    pub q0_b: Option<f64>,
    pub mu_mean: Option<f64>,
    pub mu_second_moment: Option<f64>,
    pub mu_realized: Option<f64>,
    pub q0_mean: Option<f64>,
    pub q0_std: Option<f64>,
    pub q0_law: Option<Q0Law>,
    pub n_steps: Option<usize>,
    pub seed: Option<u64>,
    pub zeroth_order: Option<bool>,
    pub richardson: Option<bool>,
    pub n_paths: Option<usize>,
    pub sigma: Option<f64>,
    pub s0: Option<f64>,
    pub checkpoints: Option<Vec<f64>>,
    pub n_bins: Option<usize>,
    pub finite_n: Option<Vec<usize>>,
    pub n_repeats: Option<usize>,
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n_steps: usize,
    pub seed: u64,
    pub options: SolveOptions,
    pub simulation: SimulationConfig,
    pub finite_n: Vec<usize>,
    pub n_repeats: usize,
    pub mc_samples: usize,
}

impl RunConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.params.horizon, self.n_steps)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RawConfig::default().resolve().expect("defaults are valid")
    }
}

impl RawConfig {
    pub fn resolve(self) -> Result<RunConfig> {
        let base = ModelParams::table1();
        let a = self.a.unwrap_or(base.a);
        let eta = self.eta.unwrap_or(base.eta);
        let a_b = self.a_b.unwrap_or(base.a_b);
        let eta_b = self.eta_b.unwrap_or(base.eta_b);
        let q0_mean = self.q0_mean.unwrap_or(base.q0_mean);
        let q0_std = self.q0_std.unwrap_or(base.q0_std());
        if !(q0_std >= 0.0) {
            return Err(Error::ConfigParse(format!("q0_std must be non-negative, got {q0_std}")));
        }
        let q0_law = self.q0_law.unwrap_or_default();
        let params = ModelParams {
            a,
            eta,
            phi: self.phi.unwrap_or(a * a / eta),
            b: self.b.unwrap_or(base.b),
            a_b,
            eta_b,
            phi_b: self.phi_b.unwrap_or(a_b * a_b / eta_b),
            horizon: self.horizon.unwrap_or(base.horizon),
            q0_b: self.q0_b.unwrap_or(base.q0_b),
            mu_mean: self.mu_mean.unwrap_or(base.mu_mean),
            mu_second_moment: self.mu_second_moment.unwrap_or(base.mu_second_moment),
            mu_realized: self.mu_realized.unwrap_or(base.mu_realized),
            q0_mean,
            q0_second_moment: q0_mean * q0_mean + q0_std * q0_std,
            q0_law,
        }
        .validate()?;
        let n_steps = self.n_steps.unwrap_or(800);
        let seed = self.seed.unwrap_or(42);
        let defaults = SimulationConfig::default();
        let simulation = SimulationConfig {
            n_paths: self.n_paths.unwrap_or(defaults.n_paths),
            seed,
            q0_mean,
            q0_std,
            q0_law,
            sigma: self.sigma,
            s0: self.s0.unwrap_or(defaults.s0),
            checkpoints: self.checkpoints.unwrap_or_else(|| {
                [0.0, 0.125, 0.25, 0.5, 0.75, 1.0]
                    .iter()
                    .map(|f| f * params.horizon)
                    .collect()
            }),
            n_bins: self.n_bins.unwrap_or(defaults.n_bins),
        };
        simulation.validate(params.horizon)?;
        let options = SolveOptions {
            zeroth_order: self.zeroth_order.unwrap_or(false),
            richardson: self.richardson.unwrap_or(true),
            tamper_a_prime: false,
        };
        let cfg = RunConfig {
            params,
            n_steps,
            seed,
            options,
            simulation,
            finite_n: self.finite_n.unwrap_or_else(|| vec![100, 400, 1600]),
            n_repeats: self.n_repeats.unwrap_or(64),
            mc_samples: self.mc_samples.unwrap_or(100_000),
        };
        cfg.grid()?;
        Ok(cfg)
    }
}

fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::ConfigParse(e.to_string()))
}

/// Apply `key=value` overrides; values are read as TOML, falling back to a string.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::ConfigParse(format!("override `{item}` is not key=value")))?;
        let (key, value) = (key.trim(), value.trim());
        let parsed = match parse_table(&format!("v = {value}")) {
            Ok(mut t) => t.remove("v").expect("just inserted"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        table.insert(key.to_string(), parsed);
    }
    Ok(())
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table = parse_table(text)?;
    apply_overrides(&mut table, overrides)?;
    let raw: RawConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
    raw.resolve()
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::ConfigParse(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}
