//! CSV emission. Every file opens with a `#` line naming the symbol behind
//! each column.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::broker::{broker_objective_reduced, BrokerPath, Decision};
use crate::equilibrium::Equilibrium;
use crate::error::Result;
use crate::finite::ConvergenceReport;
use crate::simulate::{Population, PricePath};
use crate::trader::TraderPath;

fn writer(path: &Path, comment: &str) -> Result<csv::Writer<File>> {
    let mut file = File::create(path)?;
    writeln!(file, "# {comment}")?;
    Ok(csv::Writer::from_writer(file))
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn write_coefficients(eq: &Equilibrium, path: &Path) -> Result<PathBuf> {
    let mut w = writer(
        path,
        "t; γ; γ^B; β¹; β³; Ā; B̄; D̄; z; Ā^B; D̄^B; Â^B; B̂^B; D̂^B; 𝒜′; 𝒜",
    )?;
    w.write_record([
        "t", "gamma", "gamma_B", "beta1", "beta3", "abar", "bbar", "dbar", "z", "abar_B",
        "dbar_B", "ahat_B", "bhat_B", "dhat_B", "A_prime", "A",
    ])?;
    let l = &eq.layer;
    let (t, b) = (&l.trader, &l.broker);
    for k in 0..eq.grid().len() {
        let row = [
            eq.grid().time(k),
            l.riccati.gamma().get(k),
            l.broker_riccati.gamma().get(k),
            t.beta1.get(k),
            t.beta3.get(k),
            t.abar.get(k),
            t.bbar.get(k),
            t.dbar.get(k),
            t.z.get(k),
            b.abar_b.get(k),
            b.dbar_b.get(k),
            b.ahat_b.get(k),
            b.bhat_b.get(k),
            b.dhat_b.get(k),
            eq.a_prime.get(k),
            eq.a_curve.get(k),
        ];
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Two-time kernels on every `stride`-th node, upper triangle only.
pub fn write_kernels(eq: &Equilibrium, path: &Path, stride: usize) -> Result<PathBuf> {
    let mut w = writer(path, "s; t; C̄_{s,t}; C̄^B_{s,t}; Ĉ^B_{s,t}; β²_{s,t}")?;
    w.write_record(["s", "t", "cbar", "cbar_B", "chat_B", "beta2"])?;
    let g = eq.grid();
    let stride = stride.max(1);
    let nodes: Vec<usize> = (0..g.len()).step_by(stride).collect();
    for &s in &nodes {
        for &t in nodes.iter().filter(|&&t| t >= s) {
            let row = [
                g.time(s),
                g.time(t),
                eq.trader().cbar.get(s, t),
                eq.broker().cbar_b.get(s, t),
                eq.broker().chat_b.get(s, t),
                eq.trader().beta2.get(s, t),
            ];
            w.write_record(row.iter().map(|v| fmt(*v)))?;
        }
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

pub fn write_information(eq: &Equilibrium, path: &Path) -> Result<PathBuf> {
    let mut w = writer(
        path,
        "t; 𝒜′; 𝒜; ηD̄² − D̄D̄^B + (D̄^B)²/(4η^B); single integrals of 𝒜′; double integrals of 𝒜′",
    )?;
    w.write_record(["t", "A_prime", "A", "squares", "single_integrals", "double_integrals"])?;
    let terms = &eq.layer.a_prime_terms;
    let (sq, si, di) = (terms.squares(), terms.single_integrals(), terms.double_integrals());
    for k in 0..eq.grid().len() {
        let row = [
            eq.grid().time(k),
            eq.a_prime.get(k),
            eq.a_curve.get(k),
            sq.get(k),
            si.get(k),
            di.get(k),
        ];
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

pub fn write_policy(eq: &Equilibrium, path: &Path) -> Result<PathBuf> {
    let mut w = writer(path, "revelation decision; t_c; reduced objective; min 𝒜; objective without revelation; degenerate μ")?;
    w.write_record(["decision", "t_c", "objective", "a_min", "never_objective", "degenerate"])?;
    let p = &eq.params;
    let obj = broker_objective_reduced(eq.policy.decision, &eq.a_curve, p.mu_mean, p.mu_second_moment);
    let never = broker_objective_reduced(Decision::NeverReveal, &eq.a_curve, p.mu_mean, p.mu_second_moment);
    let (decision, tc) = match eq.policy.decision {
        Decision::RevealAt(t) => ("reveal".to_string(), fmt(t)),
        Decision::NeverReveal => ("never".to_string(), "never".to_string()),
    };
    w.write_record([
        decision,
        tc,
        fmt(obj),
        fmt(eq.policy.a_min),
        fmt(never),
        p.mu_is_degenerate().to_string(),
    ])?;
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Representative trader paths, one block per sample.
pub fn write_trader_paths(paths: &[(usize, TraderPath)], path: &Path) -> Result<PathBuf> {
    let mut w = writer(path, "t; ν̂_t; Q̂_t; sample")?;
    w.write_record(["t", "control", "inventory", "sample_id"])?;
    for (id, p) in paths {
        for k in 0..p.times.len() {
            w.write_record([
                fmt(p.times[k]),
                fmt(p.control[k]),
                fmt(p.inventory[k]),
                id.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Snapshot histograms (`kind = bin`) and their moments (`kind = mean`, `std`).
pub fn write_population(pop: &Population, path: &Path) -> Result<PathBuf> {
    let mut w = writer(path, "row kind; t; bin left edge; bin right edge; count; statistic value")?;
    w.write_record(["kind", "time", "bin_left", "bin_right", "count", "value"])?;
    for s in &pop.snapshots {
        for b in &s.bins {
            w.write_record([
                "bin".to_string(),
                fmt(s.time),
                fmt(b.left),
                fmt(b.right),
                b.count.to_string(),
                String::new(),
            ])?;
        }
        for (kind, v) in [("mean", s.mean), ("std", s.std)] {
            w.write_record([
                kind.to_string(),
                fmt(s.time),
                String::new(),
                String::new(),
                String::new(),
                fmt(v),
            ])?;
        }
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

pub fn write_broker(path_data: &BrokerPath, path: &Path) -> Result<PathBuf> {
    let mut w = writer(path, "t; ν̂^B_t; Q^B_t")?;
    w.write_record(["t", "broker_control", "broker_inventory"])?;
    for k in 0..path_data.times.len() {
        w.write_record([
            fmt(path_data.times[k]),
            fmt(path_data.control[k]),
            fmt(path_data.inventory[k]),
        ])?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

pub fn write_price(price: &PricePath, path: &Path) -> Result<PathBuf> {
    let mut w = writer(path, "t; S_t")?;
    w.write_record(["t", "price"])?;
    for (t, s) in price.times.iter().zip(&price.price) {
        w.write_record([fmt(*t), fmt(*s)])?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Per-repeat errors, per-`N` means (`repeat = mean`) and a final slope row.
pub fn write_finite(report: &ConvergenceReport, path: &Path) -> Result<PathBuf> {
    let mut w = writer(
        path,
        "N; repeat; sup|mean ν^N − ν̄|²; sup|mean (ν^N)² − M̄|",
    )?;
    w.write_record(["N", "repeat", "e1", "e2"])?;
    for r in &report.records {
        w.write_record([r.n.to_string(), r.repeat.to_string(), fmt(r.e1), fmt(r.e2)])?;
    }
    for s in &report.summary {
        w.write_record([s.n.to_string(), "mean".to_string(), fmt(s.e1), fmt(s.e2)])?;
    }
    w.write_record([
        "slope".to_string(),
        String::new(),
        fmt(report.slope_e1),
        fmt(report.slope_e2),
    ])?;
    w.flush()?;
    Ok(path.to_path_buf())
}
