//! Time axes that carry the revelation instant and the drift paths on them.
//!
//! The traders' drift estimate is `μ_t = E[μ]` up to `t_c` and `μ` afterwards.
//! Paths are sampled on the grid nodes plus `t_c` taken twice (left and right
//! limits), so trapezoid sums over the path never straddle the jump.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::grid::{cumulative_irregular, lerp, KernelSurface, ScalarCurve, TimeGrid};
use crate::operators::column_partials;

/// When the broker discloses the drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Revelation {
    At(f64),
    Never,
}

impl Revelation {
    pub fn time(&self) -> Option<f64> {
        match self {
            Revelation::At(t) => Some(*t),
            Revelation::Never => None,
        }
    }
}

/// The two-valued drift path `μ_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuPath {
    pub revelation: Revelation,
    pub mu_mean: f64,
    pub mu_realized: f64,
}

impl MuPath {
    pub fn new(revelation: Revelation, mu_mean: f64, mu_realized: f64) -> Self {
        Self {
            revelation,
            mu_mean,
            mu_realized,
        }
    }

    /// A path that is constant at `value` on the whole horizon.
    pub fn constant(value: f64) -> Self {
        Self::new(Revelation::Never, value, value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub time: f64,
    /// Grid node this slot sits on, if any.
    pub node: Option<usize>,
    /// True once `μ_t` equals the realized drift.
    pub revealed: bool,
}

#[derive(Debug, Clone)]
pub struct TimePath {
    grid: TimeGrid,
    revelation: Revelation,
    slots: Vec<Slot>,
}

impl TimePath {
    pub fn new(grid: TimeGrid, revelation: Revelation) -> Self {
        let mut slots = Vec::with_capacity(grid.len() + 2);
        match revelation {
            Revelation::Never => {
                for k in 0..grid.len() {
                    slots.push(Slot {
                        time: grid.time(k),
                        node: Some(k),
                        revealed: false,
                    });
                }
            }
            Revelation::At(tc) => {
                let tc = tc.clamp(0.0, grid.horizon());
                let on_node = grid.node_index(tc);
                let tc = on_node.map(|k| grid.time(k)).unwrap_or(tc);
                let mut inserted = false;
                for k in 0..grid.len() {
                    let t = grid.time(k);
                    if !inserted && t > tc {
                        slots.push(Slot { time: tc, node: None, revealed: false });
                        slots.push(Slot { time: tc, node: None, revealed: true });
                        inserted = true;
                    }
                    slots.push(Slot { time: t, node: Some(k), revealed: t > tc });
                    if Some(k) == on_node {
                        slots.push(Slot { time: t, node: Some(k), revealed: true });
                        inserted = true;
                    }
                }
            }
        }
        Self {
            grid,
            revelation,
            slots,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn revelation(&self) -> Revelation {
        self.revelation
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.time).collect()
    }

    /// `μ_t` at every slot.
    pub fn mu_values(&self, mu: &MuPath) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| if s.revealed { mu.mu_realized } else { mu.mu_mean })
            .collect()
    }

    /// A curve sampled on the path (exact at nodes, linear elsewhere).
    pub fn sample(&self, curve: &ScalarCurve) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match s.node {
                Some(k) => curve.get(k),
                None => curve.value_at(s.time),
            })
            .collect()
    }

    /// Running trapezoid integral of slot values, starting from `start`.
    pub fn integrate(&self, values: &[f64], start: f64) -> Vec<f64> {
        let times = self.times();
        cumulative_irregular(&times, values)
            .into_iter()
            .map(|v| v + start)
            .collect()
    }

    /// Drift response of the control `∫_0^t E_{s,t} μ_s ds + μ_t F_t`, split
    /// as `E[μ]·full + (μ − E[μ])·post`.
    pub fn response(&self, e: &KernelSurface, f: &ScalarCurve) -> Response {
        let grid = self.grid;
        let h = grid.step();
        let partials = column_partials(e.values(), h);
        let full_nodes: Vec<f64> = (0..grid.len())
            .map(|t| partials[[0, t]] + f.get(t))
            .collect();
        let full_curve = ScalarCurve::from_vec(grid, full_nodes);
        let mut full = Vec::with_capacity(self.len());
        let mut post = Vec::with_capacity(self.len());
        for slot in &self.slots {
            full.push(match slot.node {
                Some(k) => full_curve.get(k),
                None => full_curve.value_at(slot.time),
            });
            if !slot.revealed {
                post.push(0.0);
                continue;
            }
            let tc = self.revelation.time().unwrap_or(0.0);
            post.push(match slot.node {
                None => f.value_at(tc),
                Some(k) => since(&partials, e.values(), grid, tc, k) + f.get(k),
            });
        }
        Response { full, post }
    }
}

/// `∫_{tc}^{t_k} E_{s,t_k} ds` with `t_k ≥ tc`.
fn since(partials: &Array2<f64>, e: &Array2<f64>, grid: TimeGrid, tc: f64, k: usize) -> f64 {
    if let Some(j) = grid.node_index(tc) {
        return partials[[j.min(k), k]];
    }
    let (j, w) = grid.locate(tc);
    let at_tc = lerp(e[[j, k]], e[[j + 1, k]], w);
    0.5 * (grid.time(j + 1) - tc) * (at_tc + e[[j + 1, k]]) + partials[[j + 1, k]]
}

/// Drift response of a control on a [`TimePath`].
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    /// `∫_0^t E_{s,t} ds + F_t`
    pub full: Vec<f64>,
    /// `1{revealed}·(∫_{t_c}^t E_{s,t} ds + F_t)`
    pub post: Vec<f64>,
}

impl Response {
    pub fn value(&self, mu_mean: f64, mu: f64) -> Vec<f64> {
        self.full
            .iter()
            .zip(&self.post)
            .map(|(k, s)| mu_mean * k + (mu - mu_mean) * s)
            .collect()
    }
}

/// A control of the form `A_t·Q̄₀ + B_t·q + drift response`, sampled on a path.
#[derive(Debug, Clone)]
pub struct AffineControl {
    pub path: TimePath,
    /// Coefficient of the population mean inventory `Q̄₀`.
    pub mean_coef: Vec<f64>,
    /// Coefficient of the agent's own initial inventory.
    pub own_coef: Vec<f64>,
    pub response: Response,
}

impl AffineControl {
    pub fn new(
        path: TimePath,
        mean_coef: &ScalarCurve,
        own_coef: &ScalarCurve,
        e: &KernelSurface,
        f: &ScalarCurve,
    ) -> Self {
        let response = path.response(e, f);
        Self {
            mean_coef: path.sample(mean_coef),
            own_coef: path.sample(own_coef),
            response,
            path,
        }
    }

    pub fn eval(&self, q0_mean: f64, q0: f64, mu_mean: f64, mu: f64) -> Vec<f64> {
        let drift = self.response.value(mu_mean, mu);
        self.mean_coef
            .iter()
            .zip(&self.own_coef)
            .zip(drift)
            .map(|((a, b), x)| a * q0_mean + b * q0 + x)
            .collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.path.times()
    }
}
