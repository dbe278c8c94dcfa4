//! Uniform time grid on `[0, T]` and the sampled objects living on it.
//!
//! Every integral in the solver is a composite trapezoid sum over a range of
//! grid nodes. The rule is additive over adjacent ranges and its weights are
//! symmetric under exchanging the order of integration on triangles
//! `{s <= u <= t}`, so rearrangements of nested integrals hold exactly on the
//! grid (up to rounding).

use ndarray::Array2;

use crate::error::{Error, Result};

/// Uniform discretization `t_k = k T / n_steps`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// The grid with twice as many intervals; node `k` here is node `2k` there.
    pub fn refined(&self) -> Self {
        Self {
            horizon: self.horizon,
            n_steps: 2 * self.n_steps,
        }
    }

    /// Index of the cell containing `x` and the fractional position inside it.
    ///
    /// Returns `(k, w)` with `t = t_k + w h`, `0 <= w <= 1`, and `k < n_steps`.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let x = x.clamp(0.0, self.horizon);
        let pos = x / self.step();
        let k = (pos.floor() as usize).min(self.n_steps - 1);
        (k, (pos - k as f64).clamp(0.0, 1.0))
    }

    /// Index of `x` if it coincides with a node (within a relative 1e-12 of the step).
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let pos = x / self.step();
        let k = pos.round();
        if (pos - k).abs() <= 1e-12 && k >= 0.0 && k as usize <= self.n_steps {
            Some(k as usize)
        } else {
            None
        }
    }
}

/// A function of time sampled at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCurve {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl ScalarCurve {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self::from_vec(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self::from_vec(grid, vec![value; grid.len()])
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(grid, (0..grid.len()).map(|k| f(grid.time(k))).collect())
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Linear interpolation between nodes.
    pub fn value_at(&self, t: f64) -> f64 {
        let (k, w) = self.grid.locate(t);
        lerp(self.values[k], self.values[k + 1], w)
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self::from_vec(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Samples at every other node of a curve living on the refined grid.
    pub fn restrict_from_refined(fine: &ScalarCurve) -> Self {
        let grid = TimeGrid {
            horizon: fine.grid.horizon,
            n_steps: fine.grid.n_steps / 2,
        };
        Self::from_vec(grid, fine.values.iter().step_by(2).copied().collect())
    }
}

/// A function of two times `(s, t)`, indexed `[s-node, t-node]`.
///
/// Most kernels in this crate are causal: only entries with `s <= t` carry
/// meaning and the remaining entries are held at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSurface {
    grid: TimeGrid,
    values: Array2<f64>,
}

impl KernelSurface {
    pub fn new(grid: TimeGrid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.len(), grid.len()) {
            return Err(Error::InvalidInput(format!(
                "kernel table has shape {:?}, expected ({n}, {n})",
                values.dim(),
                n = grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_array(grid: TimeGrid, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), (grid.len(), grid.len()));
        Self { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self::from_array(grid, Array2::zeros((grid.len(), grid.len())))
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.len(), grid.len()), |(i, j)| {
            f(grid.time(i), grid.time(j))
        });
        Self::from_array(grid, values)
    }

    /// Like [`KernelSurface::from_fn`] but only fills `s <= t`.
    pub fn causal_from_fn(grid: TimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.len(), grid.len()), |(i, j)| {
            if i <= j {
                f(grid.time(i), grid.time(j))
            } else {
                0.0
            }
        });
        Self::from_array(grid, values)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.values[[s, t]]
    }

    /// Bilinear interpolation between nodes.
    pub fn value_at(&self, s: f64, t: f64) -> f64 {
        let (i, u) = self.grid.locate(s);
        let (j, v) = self.grid.locate(t);
        let lo = lerp(self.values[[i, j]], self.values[[i + 1, j]], u);
        let hi = lerp(self.values[[i, j + 1]], self.values[[i + 1, j + 1]], u);
        lerp(lo, hi, v)
    }

    /// Largest absolute entry over the causal triangle `s <= t`.
    pub fn causal_sup_norm(&self) -> f64 {
        let n = self.grid.len();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                m = m.max(self.values[[i, j]].abs());
            }
        }
        m
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn restrict_from_refined(fine: &KernelSurface) -> Self {
        let grid = TimeGrid {
            horizon: fine.grid.horizon,
            n_steps: fine.grid.n_steps / 2,
        };
        let values =
            Array2::from_shape_fn((grid.len(), grid.len()), |(i, j)| fine.values[[2 * i, 2 * j]]);
        Self::from_array(grid, values)
    }
}

pub(crate) fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `out[k] = ∫_{t_0}^{t_k} f` by the composite trapezoid rule.
pub fn cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for k in 1..f.len() {
        out[k] = out[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
    }
    out
}

/// `out[k] = ∫_{t_k}^{t_last} f` by the composite trapezoid rule.
pub fn tail(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for k in (0..n.saturating_sub(1)).rev() {
        out[k] = out[k + 1] + 0.5 * h * (f[k] + f[k + 1]);
    }
    out
}

/// Trapezoid integral of the samples `f` over their whole range.
pub fn integrate(f: &[f64], h: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => h * (f[1..n - 1].iter().sum::<f64>() + 0.5 * (f[0] + f[n - 1])),
    }
}

/// Trapezoid integral over an irregular set of abscissae (zero-width pieces allowed).
pub fn integrate_irregular(times: &[f64], f: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(f.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Running trapezoid integral over irregular abscissae.
pub fn cumulative_irregular(times: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for k in 1..f.len() {
        out[k] = out[k - 1] + 0.5 * (times[k] - times[k - 1]) * (f[k - 1] + f[k]);
    }
    out
}
