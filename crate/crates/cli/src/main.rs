use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use infomfg::broker::{broker_objective_reduced, Decision};
use infomfg::config::{load_config, RunConfig};
use infomfg::equilibrium::{solve, Equilibrium};
use infomfg::finite::convergence_study;
use infomfg::model::ModelParams;
use infomfg::output;
use infomfg::path::MuPath;
use infomfg::reproduce::{reproduce_example, ExampleReport};
use infomfg::simulate::{simulate_broker_path, simulate_population, simulate_price};
use infomfg::trader::evaluate_trader_control;

#[derive(Parser)]
#[command(name = "infomfg", version, about = "Informed broker / uninformed traders mean field game solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file with flat parameter keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set b=1e-5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Parent directory for the run directory.
    #[arg(short, long, default_value = "runs")]
    out: PathBuf,
    /// Solve in the `b → 0` limit.
    #[arg(long)]
    zeroth_order: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibrium and write coefficients, 𝒜 and the policy.
    Solve(Common),
    /// Solve, then simulate representative traders, the population and the broker.
    Simulate(Common),
    /// Finite-N convergence study.
    FiniteN {
        #[command(flatten)]
        common: Common,
        /// Comma separated trader counts.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Run the numerical example and print a pass/fail table.
    ReproduceExample {
        #[arg(long, default_value_t = 800)]
        n_steps: usize,
        #[arg(short, long, default_value = "runs")]
        out: PathBuf,
        #[arg(long, hide = true)]
        tamper_a_prime: bool,
    },
    /// Print the admissibility bound on `b`.
    PrintBound {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: Option<&'a RunConfig>,
    seed: u64,
    t_c: Option<f64>,
    decision: Option<String>,
    objective: Option<f64>,
    never_objective: Option<f64>,
    degenerate_mu: Option<bool>,
    b_used: Option<f64>,
    tolerances: Tolerances,
    timings_s: Vec<(String, f64)>,
    files: Vec<String>,
    extra: serde_json::Value,
}

#[derive(Serialize)]
struct Tolerances {
    series_tol: f64,
    max_series_terms: usize,
    richardson: bool,
}

struct Run {
    dir: PathBuf,
    files: Vec<PathBuf>,
    timings: Vec<(String, f64)>,
}

impl Run {
    fn new(root: &Path, seed: u64) -> Result<Self> {
        let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f");
        let dir = root.join(format!("{stamp}_seed{seed}"));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            files: Vec::new(),
            timings: Vec::new(),
        })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn push(&mut self, p: PathBuf) {
        self.files.push(p);
    }

    fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push((label.into(), start.elapsed().as_secs_f64()));
        out
    }

    fn finish(self, mut manifest: Manifest) -> Result<PathBuf> {
        manifest.timings_s = self.timings;
        manifest.files = self
            .files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        println!("run directory: {}", self.dir.display());
        Ok(path)
    }
}

fn manifest<'a>(command: &'a str, cfg: Option<&'a RunConfig>, seed: u64, eq: Option<&Equilibrium>) -> Manifest<'a> {
    let (mut t_c, mut decision, mut objective, mut never, mut degenerate, mut b_used) =
        (None, None, None, None, None, None);
    if let Some(eq) = eq {
        let p = &eq.params;
        t_c = match eq.policy.decision {
            Decision::RevealAt(t) => Some(t),
            Decision::NeverReveal => None,
        };
        decision = Some(match eq.policy.decision {
            Decision::RevealAt(_) => "reveal".to_string(),
            Decision::NeverReveal => "never".to_string(),
        });
        objective = Some(broker_objective_reduced(eq.policy.decision, &eq.a_curve, p.mu_mean, p.mu_second_moment));
        never = Some(broker_objective_reduced(Decision::NeverReveal, &eq.a_curve, p.mu_mean, p.mu_second_moment));
        degenerate = Some(p.mu_is_degenerate());
        b_used = Some(eq.b_used);
    }
    Manifest {
        command,
        config: cfg,
        seed,
        t_c,
        decision,
        objective,
        never_objective: never,
        degenerate_mu: degenerate,
        b_used,
        tolerances: Tolerances {
            series_tol: infomfg::operators::SERIES_TOL,
            max_series_terms: infomfg::operators::MAX_TERMS,
            richardson: eq.map(|e| e.options.richardson).unwrap_or(false),
        },
        timings_s: Vec::new(),
        files: Vec::new(),
        extra: serde_json::Value::Null,
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = load_config(common.config.as_deref(), &common.overrides)?;
    if common.zeroth_order {
        cfg.options.zeroth_order = true;
    }
    Ok(cfg)
}

fn report_policy(eq: &Equilibrium) {
    if eq.params.mu_is_degenerate() {
        println!("policy: degenerate: objective flat in t_c (E[mu^2] = E[mu]^2)");
        return;
    }
    match eq.policy.decision {
        Decision::RevealAt(t) => println!("policy: reveal at t_c = {t:.6} (min A = {:.6e})", eq.policy.a_min),
        Decision::NeverReveal => println!("policy: never reveal"),
    }
}

fn solve_and_write(cfg: &RunConfig, run: &mut Run) -> Result<Equilibrium> {
    let grid = cfg.grid()?;
    let eq = run.time("solve", || solve(&cfg.params, grid, cfg.options))?;
    let stride = (grid.n_steps() / 100).max(1);
    run.push(output::write_coefficients(&eq, &run.file("coefficients.csv"))?);
    run.push(output::write_kernels(&eq, &run.file("kernels.csv"), stride)?);
    run.push(output::write_information(&eq, &run.file("fig1_information.csv"))?);
    run.push(output::write_policy(&eq, &run.file("policy.csv"))?);
    report_policy(&eq);
    Ok(eq)
}

fn cmd_solve(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let mut run = Run::new(&common.out, cfg.seed)?;
    let eq = solve_and_write(&cfg, &mut run)?;
    let m = manifest("solve", Some(&cfg), cfg.seed, Some(&eq));
    run.finish(m)?;
    Ok(())
}

fn cmd_simulate(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let mut run = Run::new(&common.out, cfg.seed)?;
    let eq = solve_and_write(&cfg, &mut run)?;
    let p = &eq.params;
    let mu = MuPath::new(eq.policy.decision.revelation(), p.mu_mean, p.mu_realized);
    let zero = evaluate_trader_control(eq.trader(), 0.0, p.q0_mean, &mu);
    run.push(output::write_trader_paths(&[(0, zero)], &run.file("fig2_trader.csv"))?);
    let big = evaluate_trader_control(eq.trader(), 200.0, p.q0_mean, &mu);
    run.push(output::write_trader_paths(&[(0, big)], &run.file("fig3_trader.csv"))?);
    let pop = run.time("population", || simulate_population(&eq, p.mu_realized, &cfg.simulation))?;
    run.push(output::write_population(&pop, &run.file("fig4_population.csv"))?);
    let broker = simulate_broker_path(&eq, p.mu_realized);
    run.push(output::write_broker(&broker, &run.file("fig5_broker.csv"))?);
    if cfg.simulation.sigma.is_some() {
        let price = simulate_price(&eq, p.mu_realized, cfg.simulation.sigma, cfg.simulation.s0, cfg.seed)?;
        run.push(output::write_price(&price, &run.file("price.csv"))?);
    }
    let m = manifest("simulate", Some(&cfg), cfg.seed, Some(&eq));
    run.finish(m)?;
    Ok(())
}

fn cmd_finite(common: &Common, n: Option<Vec<usize>>, repeats: Option<usize>) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(n) = n {
        cfg.finite_n = n;
    }
    if let Some(r) = repeats {
        cfg.n_repeats = r;
    }
    let mut run = Run::new(&common.out, cfg.seed)?;
    let grid = cfg.grid()?;
    let eq = run.time("solve", || solve(&cfg.params, grid, cfg.options))?;
    let report = run.time("study", || {
        convergence_study(&eq, &cfg.finite_n, cfg.n_repeats, cfg.seed, cfg.params.q0_law)
    })?;
    run.push(output::write_finite(&report, &run.file("finite_n.csv"))?);
    for s in &report.summary {
        println!("N = {:>6}  e1 = {:.4e}  e2 = {:.4e}", s.n, s.e1, s.e2);
    }
    println!("slope e1 = {:.3}  slope e2 = {:.3}", report.slope_e1, report.slope_e2);
    if report.coefficients_identical {
        println!("finite-N coefficients equal the mean field ones exactly (b = 0)");
    }
    let mut m = manifest("finite-n", Some(&cfg), cfg.seed, Some(&eq));
    m.extra = serde_json::json!({
        "slope_e1": report.slope_e1,
        "slope_e2": report.slope_e2,
        "coefficients_identical": report.coefficients_identical,
    });
    run.finish(m)?;
    Ok(())
}

fn print_table(report: &ExampleReport) {
    println!("{:<36} {:>14}  {:<18} result", "check", "value", "target");
    for c in &report.checks {
        println!(
            "{:<36} {:>14.6e}  {:<18} {}",
            c.name,
            c.value,
            c.target,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
}

fn cmd_reproduce(n_steps: usize, out: &Path, tamper: bool) -> Result<bool> {
    let mut run = Run::new(out, 0)?;
    let (eq, report) = run.time("solve", || reproduce_example(n_steps, tamper))?;
    print_table(&report);
    run.push(output::write_coefficients(&eq, &run.file("coefficients.csv"))?);
    run.push(output::write_information(&eq, &run.file("fig1_information.csv"))?);
    run.push(output::write_policy(&eq, &run.file("policy.csv"))?);
    let path = run.file("checks.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    run.push(path);
    let mut m = manifest("reproduce-example", None, 0, Some(&eq));
    m.extra = serde_json::json!({ "n_steps": n_steps, "all_passed": report.all_passed() });
    run.finish(m)?;
    Ok(report.all_passed())
}

fn cmd_bound(config: Option<&Path>, overrides: &[String]) -> Result<()> {
    let cfg = load_config(config, overrides)?;
    let p: &ModelParams = &cfg.params;
    let bound = p.b_admissibility_bound();
    println!("b bound = {bound:.6e}");
    println!("b       = {:.6e} ({})", p.b, if p.b < bound { "admissible" } else { "too large" });
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve(c) => cmd_solve(&c).map(|_| true),
        Command::Simulate(c) => cmd_simulate(&c).map(|_| true),
        Command::FiniteN { common, n, repeats } => cmd_finite(&common, n, repeats).map(|_| true),
        Command::ReproduceExample {
            n_steps,
            out,
            tamper_a_prime,
        } => cmd_reproduce(n_steps, &out, tamper_a_prime),
        Command::PrintBound { config, overrides } => {
            cmd_bound(config.as_deref(), &overrides).map(|_| true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
