#![allow(dead_code)]

use infomfg::grid::TimeGrid;

/// Adaptive Dormand–Prince 5(4) with outputs forced onto `outputs`
/// (visited in the given order, which may run backwards).
pub fn dopri5(f: impl Fn(f64, f64) -> f64, t0: f64, y0: f64, outputs: &[f64], rtol: f64, atol: f64) -> Vec<f64> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut out = Vec::with_capacity(outputs.len());
    let (mut t, mut y) = (t0, y0);
    let mut h = 1e-3 * outputs.first().map(|o| (o - t0).signum()).unwrap_or(1.0);
    for &target in outputs {
        while (target - t).abs() > 1e-15 {
            let dir = (target - t).signum();
            h = dir * h.abs().min((target - t).abs());
            let mut k = [0.0; 7];
            for i in 0..7 {
                let yi = y + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
                k[i] = f(t + C[i] * h, yi);
            }
            let y5 = y + h * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
            let y4 = y + h * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();
            let err = (y5 - y4).abs() / (atol + rtol * y5.abs().max(y.abs()));
            if err <= 1.0 {
                t += h;
                y = y5;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        }
        t = target;
        out.push(y);
    }
    out
}

/// `γ` on the grid from the oracle integrator for `dγ/dt = c0 + (2a/η)γ − γ²/(2η)`.
pub fn gamma_oracle(c0: f64, a: f64, eta: f64, grid: TimeGrid) -> Vec<f64> {
    let times: Vec<f64> = (0..grid.len()).rev().map(|k| grid.time(k)).collect();
    let mut v = dopri5(
        |_, g| c0 + 2.0 * a / eta * g - g * g / (2.0 * eta),
        grid.horizon(),
        0.0,
        &times,
        1e-13,
        1e-15,
    );
    v.reverse();
    v
}

/// Closed-form solution of the constant-coefficient Riccati equation and
/// its exponential kernel.
#[derive(Debug, Clone, Copy)]
pub struct Analytic {
    pub a: f64,
    pub eta: f64,
    pub horizon: f64,
    delta: f64,
    kappa: f64,
    c: f64,
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Tanh,
    Coth,
    Flat,
}

impl Analytic {
    pub fn new(c0: f64, a: f64, eta: f64, horizon: f64) -> Self {
        let delta = (4.0 * a * a + 2.0 * eta * c0).sqrt();
        let kappa = delta / (2.0 * eta);
        let r = 2.0 * a / delta;
        let (kind, c) = if (r - 1.0).abs() < 1e-14 {
            (Kind::Flat, 0.0)
        } else if r < 1.0 {
            (Kind::Tanh, r.atanh())
        } else {
            (Kind::Coth, (1.0 / r).atanh())
        };
        Self { a, eta, horizon, delta, kappa, c, kind }
    }

    pub fn trader(a: f64, eta: f64, phi: f64, horizon: f64) -> Self {
        Self::new(phi - a * a / eta, a, eta, horizon)
    }

    pub fn broker(a: f64, eta: f64, phi: f64, horizon: f64) -> Self {
        Self::new(2.0 * (phi - a * a / eta), a, eta, horizon)
    }

    fn y(&self, t: f64) -> f64 {
        self.kappa * (self.horizon - t) + self.c
    }

    pub fn gamma(&self, t: f64) -> f64 {
        let u = match self.kind {
            Kind::Tanh => -self.delta * self.y(t).tanh(),
            Kind::Coth => -self.delta / self.y(t).tanh(),
            Kind::Flat => -2.0 * self.a,
        };
        u + 2.0 * self.a
    }

    /// `Γ_{s,t} = exp(∫_s^t (γ_r − 2a)/(2η) dr)`
    pub fn big_gamma(&self, s: f64, t: f64) -> f64 {
        match self.kind {
            Kind::Tanh => self.y(t).cosh() / self.y(s).cosh(),
            Kind::Coth => self.y(t).sinh() / self.y(s).sinh(),
            Kind::Flat => (-(self.a / self.eta) * (t - s)).exp(),
        }
    }

    /// `∫_s^T Γ_{r,s} dr`
    pub fn mass(&self, s: f64) -> f64 {
        let ys = self.y(s);
        match self.kind {
            Kind::Tanh => {
                let gd = |y: f64| y.sinh().atan();
                ys.cosh() * (gd(ys) - gd(self.c)) / self.kappa
            }
            Kind::Coth => {
                let lt = |y: f64| (y / 2.0).tanh().ln();
                ys.sinh() * (lt(ys) - lt(self.c)) / self.kappa
            }
            Kind::Flat => {
                let r = self.a / self.eta;
                ((r * (self.horizon - s)).exp() - 1.0) / r
            }
        }
    }

    /// `(γ_t − 2a)/(4η²)`
    pub fn c_factor(&self, t: f64) -> f64 {
        (self.gamma(t) - 2.0 * self.a) / (4.0 * self.eta * self.eta)
    }

    /// `C_{s,t}` of the base kernels.
    pub fn c2(&self, s: f64, t: f64) -> f64 {
        self.c_factor(t) * self.big_gamma(s, t) * self.mass(s)
    }

    /// `D_t = (1/2η) ∫_t^T Γ_{s,t} ds`
    pub fn d1(&self, t: f64) -> f64 {
        self.mass(t) / (2.0 * self.eta)
    }

    pub fn a3(&self, r: f64, s: f64, t: f64) -> f64 {
        self.c_factor(t) * self.big_gamma(s, t) * self.big_gamma(r, s)
    }

    pub fn b2(&self, s: f64, t: f64) -> f64 {
        self.big_gamma(s, t) / (2.0 * self.eta)
    }
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sup(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Parameter sets with `ηφ` below, at and above `a²`.
pub const REGIMES: [(f64, f64, f64); 3] = [(0.01, 0.01, 0.004), (0.01, 0.01, 0.01), (0.01, 0.01, 0.03)];
