//! Integral operators of the trader fixed point and their Neumann series.
//!
//! With `Γ_{s,t} = e^{G_t − G_s}` every kernel is separable, so each nested
//! integral reduces to running trapezoid sums along one axis. `L` costs
//! `O(n)` and `L̂` costs `O(n²)`.
//!
//! The discrete `L̂` is chosen so that, on the grid,
//! `L[∫_0^· E_{s,·} ds + F] = ∫_0^· Ẽ_{s,·} ds + F̃` holds exactly. Nested
//! trapezoid sums over the triangle `{u ≤ s ≤ t}` differ between the two
//! orders of summation by `h²/4 · (g(t,t) − g(0,0))`; `L̂₁` carries this
//! boundary term spread evenly along `s ∈ [0,t]`, which changes each entry
//! by `O(h²)` only.

use ndarray::parallel::prelude::*;
use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::grid::{cumulative, sup_norm, tail, KernelSurface, ScalarCurve, TimeGrid};
use crate::riccati::RiccatiSolution;

/// Building blocks `A_{r,s,t}`, `B_{s,t}`, `C_{s,t}`, `D_t` in separated form.
#[derive(Debug, Clone)]
pub struct BaseKernels {
    grid: TimeGrid,
    eta: f64,
    /// `(γ_t − 2a) / (4η²)`
    c: Vec<f64>,
    /// `e^{G_t}`
    eg: Vec<f64>,
    /// `e^{−G_t}`
    eng: Vec<f64>,
    /// `∫_s^T Γ_{r,s} dr`
    mass: Vec<f64>,
    d: ScalarCurve,
}

/// A two-time kernel together with a one-time weight, `(E_{s,t}, F_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPair {
    pub e: KernelSurface,
    pub f: ScalarCurve,
}

impl KernelPair {
    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            e: KernelSurface::zeros(grid),
            f: ScalarCurve::zeros(grid),
        }
    }

    /// `‖E‖ ∨ ‖F‖` with `E` measured on `s ≤ t`.
    pub fn norm(&self) -> f64 {
        self.e.causal_sup_norm().max(self.f.sup_norm())
    }

    fn add_scaled(&mut self, other: &KernelPair, factor: f64) {
        self.e
            .values_mut()
            .scaled_add(factor, other.e.values());
        let f: Vec<f64> = self
            .f
            .values()
            .iter()
            .zip(other.f.values())
            .map(|(a, b)| a + factor * b)
            .collect();
        self.f = ScalarCurve::from_vec(self.f.grid(), f);
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            e: KernelSurface::from_array(self.e.grid(), self.e.values() * factor),
            f: self.f.map(|v| v * factor),
        }
    }
}

pub fn build_base_kernels(riccati: &RiccatiSolution) -> BaseKernels {
    let grid = riccati.grid();
    let eta = riccati.eta();
    let h = grid.step();
    let c: Vec<f64> = (0..grid.len())
        .map(|k| riccati.rate(k) / (2.0 * eta))
        .collect();
    let g = riccati.exponent().values();
    let eg: Vec<f64> = g.iter().map(|x| x.exp()).collect();
    let eng: Vec<f64> = g.iter().map(|x| (-x).exp()).collect();
    let tl = tail(&eng, h);
    let mass: Vec<f64> = eg.iter().zip(&tl).map(|(a, b)| a * b).collect();
    let d = ScalarCurve::from_vec(grid, mass.iter().map(|m| m / (2.0 * eta)).collect());
    BaseKernels {
        grid,
        eta,
        c,
        eg,
        eng,
        mass,
        d,
    }
}

impl BaseKernels {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `(γ_t − 2a) / (4η²)` at node `t`.
    pub fn c_factor(&self, t: usize) -> f64 {
        self.c[t]
    }

    /// `Γ_{s,t}` at node indices.
    pub fn gamma(&self, s: usize, t: usize) -> f64 {
        self.eg[t] * self.eng[s]
    }

    /// `∫_s^T Γ_{r,s} dr`.
    pub fn horizon_mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn a3(&self, r: usize, s: usize, t: usize) -> f64 {
        self.c[t] * self.gamma(r, s) * self.gamma(s, t)
    }

    pub fn b2(&self, s: usize, t: usize) -> f64 {
        self.gamma(s, t) / (2.0 * self.eta)
    }

    /// `C_{s,t}` on `s ≤ t`.
    pub fn c2(&self) -> KernelSurface {
        let n = self.grid.len();
        let values = Array2::from_shape_fn((n, n), |(s, t)| {
            if s <= t {
                self.c[t] * self.gamma(s, t) * self.mass[s]
            } else {
                0.0
            }
        });
        KernelSurface::from_array(self.grid, values)
    }

    pub fn d1(&self) -> &ScalarCurve {
        &self.d
    }

    /// The seed pair `(C, D)` of the kernel-pair series.
    pub fn seed_pair(&self) -> KernelPair {
        KernelPair {
            e: self.c2(),
            f: self.d.clone(),
        }
    }
}

/// `Lξ_t = ∫_0^t ∫_s^T A_{r,s,t} ξ_r dr ds + ∫_t^T B_{s,t} ξ_s ds` for a deterministic `ξ`.
pub fn apply_l(curve: &ScalarCurve, kernels: &BaseKernels) -> ScalarCurve {
    let h = kernels.grid.step();
    let weighted: Vec<f64> = curve
        .values()
        .iter()
        .zip(&kernels.eng)
        .map(|(x, e)| x * e)
        .collect();
    let tl = tail(&weighted, h);
    let inner = cumulative(&tl, h);
    let out = (0..tl.len())
        .map(|t| kernels.eg[t] * (kernels.c[t] * inner[t] + tl[t] / (2.0 * kernels.eta)))
        .collect();
    ScalarCurve::from_vec(kernels.grid, out)
}

/// `L̃^{E,F} μ_t = ∫_0^t E_{s,t} μ_s ds + μ_t F_t` for a deterministic `μ`.
pub fn apply_l_tilde(pair: &KernelPair, mu: &ScalarCurve) -> ScalarCurve {
    let mut out = column_integral_weighted(pair.e.values(), mu.values(), pair.e.grid().step());
    for (o, (f, m)) in out.iter_mut().zip(pair.f.values().iter().zip(mu.values())) {
        *o += f * m;
    }
    ScalarCurve::from_vec(pair.f.grid(), out)
}

/// `∫_0^t E_{s,t} w_s ds` for every node `t`.
pub(crate) fn column_integral_weighted(e: &Array2<f64>, w: &[f64], h: f64) -> Vec<f64> {
    let n = w.len();
    let mut out = vec![0.0; n];
    for s in 0..n {
        let row = e.row(s);
        let ws = w[s];
        for t in (s + 1)..n {
            let q = if s == 0 || s == t { 0.5 * h } else { h };
            out[t] += q * row[t] * ws;
        }
        if s > 0 {
            // diagonal node s closes the interval [0, s]
            out[s] += 0.5 * h * row[s] * ws;
        }
    }
    out
}

/// Table of `∫_s^t E_{r,t} dr` for `s ≤ t` (zero below the diagonal).
pub(crate) fn column_partials(e: &Array2<f64>, h: f64) -> Array2<f64> {
    let n = e.nrows();
    let mut p = Array2::zeros((n, n));
    for s in (0..n.saturating_sub(1)).rev() {
        let (upper, lower) = p.view_mut().split_at(Axis(0), s + 1);
        let mut cur = upper.index_axis_move(Axis(0), s);
        let next = lower.index_axis(Axis(0), 0);
        let es = e.row(s);
        let es1 = e.row(s + 1);
        for t in (s + 1)..n {
            cur[t] = next[t] + 0.5 * h * (es[t] + es1[t]);
        }
    }
    p
}

/// `(I − bL)^{-1}` applied to a deterministic curve, by the Neumann series.
pub fn neumann_resolve(curve: &ScalarCurve, b: f64, kernels: &BaseKernels) -> Result<ScalarCurve> {
    let mut sum = curve.values().to_vec();
    let mut term = curve.clone();
    let mut prev_norm = f64::INFINITY;
    for order in 1..=MAX_TERMS {
        term = apply_l(&term, kernels).map(|v| b * v);
        let norm = term.sup_norm();
        for (s, t) in sum.iter_mut().zip(term.values()) {
            *s += t;
        }
        if norm < SERIES_TOL * (1.0 + sup_norm(&sum)) {
            return Ok(ScalarCurve::from_vec(kernels.grid, sum));
        }
        if order >= 2 && norm >= prev_norm {
            return Err(Error::SeriesDiverging {
                order,
                ratio: norm / prev_norm,
            });
        }
        prev_norm = norm;
    }
    Err(Error::TruncationLimit {
        terms: MAX_TERMS,
        last_norm: prev_norm,
    })
}

pub const MAX_TERMS: usize = 200;
pub const SERIES_TOL: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sign {
    Signed,
    Absolute,
}

/// One application of `L̂` to `(E, F)`; returns `(L̂₁[E,F], L̂₂[E,F])`.
pub fn apply_lhat(pair: &KernelPair, kernels: &BaseKernels) -> KernelPair {
    lhat_impl(pair, kernels, Sign::Signed)
}

fn lhat_impl(pair: &KernelPair, kernels: &BaseKernels, sign: Sign) -> KernelPair {
    let grid = kernels.grid;
    let n = grid.len();
    let h = grid.step();
    let e = pair.e.values();
    let f = pair.f.values();
    let c: Vec<f64> = match sign {
        Sign::Signed => kernels.c.clone(),
        Sign::Absolute => kernels.c.iter().map(|v| v.abs()).collect(),
    };
    let eng = &kernels.eng;
    let eg = &kernels.eg;
    let inv2eta = 1.0 / (2.0 * kernels.eta);

    // Kt_s = ∫_s^T e^{−G_r} (∫_s^r E_{u,r} du + F_r) dr, sweeping s downwards.
    let mut kt = vec![0.0; n];
    let mut col = vec![0.0; n];
    let mut integrand = vec![0.0; n];
    for s in (0..n).rev() {
        if s + 1 < n {
            let es = e.row(s);
            let es1 = e.row(s + 1);
            for r in (s + 1)..n {
                col[r] += 0.5 * h * (es[r] + es1[r]);
            }
        }
        col[s] = 0.0;
        for r in s..n {
            integrand[r] = eng[r] * (col[r] + f[r]);
        }
        kt[s] = tail_from(&integrand[s..], h);
    }

    // T_u(u) = ∫_u^T e^{−G_r} E_{u,r} dr, needed by the boundary term.
    let diag: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|u| {
            let row = e.row(u);
            let v: Vec<f64> = (u..n).map(|r| eng[r] * row[r]).collect();
            tail_from(&v, h)
        })
        .collect();
    let corr: Vec<f64> = (0..n)
        .map(|t| {
            if t == 0 {
                0.0
            } else {
                let delta = match sign {
                    Sign::Signed => diag[t] - diag[0],
                    Sign::Absolute => diag[t] + diag[0],
                };
                0.25 * h * h * delta / grid.time(t)
            }
        })
        .collect();

    let mut out = Array2::zeros((n, n));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(u, mut row_out)| {
            let row = e.row(u);
            // T_u(s) for s ≥ u
            let mut tu = vec![0.0; n - u];
            for s in (u..n.saturating_sub(1)).rev() {
                let k = s - u;
                tu[k] = tu[k + 1] + 0.5 * h * (eng[s] * row[s] + eng[s + 1] * row[s + 1]);
            }
            // running ∫_u^t T_u(s) ds
            let mut cu = 0.0;
            for t in u..n {
                let k = t - u;
                if t > u {
                    cu += 0.5 * h * (tu[k - 1] + tu[k]);
                }
                row_out[t] = eg[t] * (c[t] * (cu + kt[u] + corr[t]) + tu[k] * inv2eta);
            }
        });

    let f_out: Vec<f64> = (0..n).map(|t| eg[t] * kt[t] * inv2eta).collect();
    KernelPair {
        e: KernelSurface::from_array(grid, out),
        f: ScalarCurve::from_vec(grid, f_out),
    }
}

fn tail_from(v: &[f64], h: f64) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        m => h * (v[1..m - 1].iter().sum::<f64>() + 0.5 * (v[0] + v[m - 1])),
    }
}

/// Result of summing `Σ_k b^k L̂^k[seed]`.
#[derive(Debug, Clone)]
pub struct LhatSeries {
    pub sum: KernelPair,
    /// Norm of `b^k L̂^k[seed]` for each order `k` that was added.
    pub term_norms: Vec<f64>,
    /// The individual terms, when requested.
    pub terms: Option<Vec<KernelPair>>,
}

pub fn lhat_series(seed: &KernelPair, b: f64, kernels: &BaseKernels) -> Result<LhatSeries> {
    lhat_series_impl(seed, b, kernels, false)
}

pub fn lhat_series_with_terms(seed: &KernelPair, b: f64, kernels: &BaseKernels) -> Result<LhatSeries> {
    lhat_series_impl(seed, b, kernels, true)
}

fn lhat_series_impl(seed: &KernelPair, b: f64, kernels: &BaseKernels, keep: bool) -> Result<LhatSeries> {
    let mut sum = seed.clone();
    let mut term_norms = vec![seed.norm()];
    let mut terms = keep.then(|| vec![seed.clone()]);
    if b == 0.0 {
        return Ok(LhatSeries {
            sum,
            term_norms,
            terms,
        });
    }
    let mut term = seed.clone();
    let mut prev_norm = f64::INFINITY;
    for order in 1..=MAX_TERMS {
        term = apply_lhat(&term, kernels).scaled(b);
        let norm = term.norm();
        sum.add_scaled(&term, 1.0);
        term_norms.push(norm);
        if let Some(ts) = terms.as_mut() {
            ts.push(term.clone());
        }
        if norm < SERIES_TOL * (1.0 + sum.norm()) {
            return Ok(LhatSeries {
                sum,
                term_norms,
                terms,
            });
        }
        if order >= 2 && norm >= prev_norm {
            return Err(Error::SeriesDiverging {
                order,
                ratio: norm / prev_norm,
            });
        }
        prev_norm = norm;
    }
    Err(Error::TruncationLimit {
        terms: MAX_TERMS,
        last_norm: prev_norm,
    })
}

/// The discretized `L` as a dense matrix, `(Lξ)_t = Σ_r M[t, r] ξ_r`.
pub fn l_matrix(kernels: &BaseKernels) -> Array2<f64> {
    let n = kernels.grid.len();
    let mut m = Array2::zeros((n, n));
    m.axis_iter_mut(Axis(1))
        .into_par_iter()
        .enumerate()
        .for_each(|(r, mut col)| {
            let mut unit = vec![0.0; n];
            unit[r] = 1.0;
            let out = apply_l(&ScalarCurve::from_vec(kernels.grid, unit), kernels);
            col.assign(&ndarray::ArrayView1::from(out.values()));
        });
    m
}

/// Induced sup-norm of the discretized `L` (maximum absolute row sum).
pub fn l_norm(kernels: &BaseKernels) -> f64 {
    l_matrix(kernels)
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// An upper bound on the induced norm of the discretized `L̂`, obtained by
/// applying the operator with every coefficient replaced by its absolute
/// value to the all-ones pair.
pub fn lhat_norm_upper(kernels: &BaseKernels) -> f64 {
    let grid = kernels.grid;
    let ones = KernelPair {
        e: KernelSurface::causal_from_fn(grid, |_, _| 1.0),
        f: ScalarCurve::constant(grid, 1.0),
    };
    lhat_impl(&ones, kernels, Sign::Absolute).norm()
}
