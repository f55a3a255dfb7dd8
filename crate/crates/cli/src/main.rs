use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lp_rmdp::bellman::{drvi, SolverOptions, DEFAULT_MAX_ITER};
use lp_rmdp::io::{model_to_json, parse_exponent, parse_mode, parse_model};
use lp_rmdp::model::random_mdp;
use lp_rmdp::{Mdp, Rectangularity, RmdpError, Uncertainty};
use lp_rmdp_cli::experiment::{self, ExperimentConfig, REFERENCE_GRID};
use lp_rmdp_cli::verify::{self, VerifyConfig};
use lp_rmdp_cli::UncertaintyOverrides;

#[derive(Parser)]
#[command(name = "lp-rmdp", version, about = "Robust MDPs with L_p-ball uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model file with robust value iteration.
    Solve(SolveArgs),
    /// Run the randomized self-checks.
    Verify(VerifyArgs),
    /// Estimate how the planning error scales with the sample count.
    SampleComplexity(SampleArgs),
    /// Write a random model file.
    RandomModel(RandomArgs),
}

#[derive(Args, Clone)]
struct UncertaintyArgs {
    /// Rectangularity: sa or s.
    #[arg(long, value_parser = mode_arg)]
    mode: Option<Rectangularity>,
    /// Norm exponent, a number >= 1 or "inf".
    #[arg(long, value_parser = exponent_arg)]
    p: Option<f64>,
    /// Kernel radius, broadcast over pairs or states.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Reward radius, broadcast over pairs or states.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
}

impl UncertaintyArgs {
    fn overrides(&self) -> UncertaintyOverrides {
        UncertaintyOverrides {
            mode: self.mode,
            p: self.p,
            beta: self.beta,
            alpha: self.alpha,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    model: PathBuf,
    #[command(flatten)]
    uncertainty: UncertaintyArgs,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Solution file (JSON); the summary always goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dual-vs-oracle instances.
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Largest state count of the random instances.
    #[arg(long, default_value_t = 5)]
    states: usize,
    /// Exponents to sweep, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = exponent_arg, default_values_t = [1.0, 1.5, 2.0, 3.0, f64::INFINITY])]
    p: Vec<f64>,
    /// Radii to sweep, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [0.0, 0.05, 0.3, 2.5])]
    beta: Vec<f64>,
    /// Oracle grid step.
    #[arg(long, default_value_t = 1e-3)]
    resolution: f64,
    /// Random pairs for the contraction and Lipschitz checks.
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    /// Random models for the contraction and monotonicity checks.
    #[arg(long, default_value_t = 10)]
    models: usize,
}

#[derive(Args)]
struct SampleArgs {
    /// Model file; a random model is generated when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    random: RandomShape,
    #[command(flatten)]
    uncertainty: UncertaintyArgs,
    /// Samples per state-action pair, comma separated.
    #[arg(long = "n-grid", value_delimiter = ',', default_values_t = REFERENCE_GRID)]
    n_grid: Vec<u64>,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// First sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// CSV output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repeat the experiment at this discount and print both medians.
    #[arg(long)]
    compare_gamma: Option<f64>,
}

#[derive(Args, Clone)]
struct RandomShape {
    #[arg(long, default_value_t = 5)]
    states: usize,
    #[arg(long, default_value_t = 3)]
    actions: usize,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Seed of the random model.
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
}

#[derive(Args)]
struct RandomArgs {
    #[arg(long, default_value_t = 5)]
    states: usize,
    #[arg(long, default_value_t = 3)]
    actions: usize,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    uncertainty: UncertaintyArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn mode_arg(s: &str) -> Result<Rectangularity, String> {
    parse_mode(s).map_err(|e| e.to_string())
}

fn exponent_arg(s: &str) -> Result<f64, String> {
    parse_exponent(s).map_err(|e| e.to_string())
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn solver(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 3, error: error.into() }
}

fn io_failure(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

/// Invalid input is a usage error; anything raised while iterating is a
/// solver failure.
fn classify(error: RmdpError) -> Failure {
    match error {
        RmdpError::NonConvergence(_)
        | RmdpError::BisectionFailure { .. }
        | RmdpError::DegeneratePolicyRow(_) => solver(error),
        other => usage(other),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Verify(args) => run_verify(args),
        Command::SampleComplexity(args) => sample_complexity(args),
        Command::RandomModel(args) => random_model(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() {
    let Ok(text) = std::env::var("RMDP_THREADS") else {
        return;
    };
    match text.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: RMDP_THREADS ignored: {e}");
            }
        }
        _ => eprintln!("warning: RMDP_THREADS must be a positive integer, got '{text}'"),
    }
}

fn load_model(path: &PathBuf) -> Result<(Mdp, Uncertainty), Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    parse_model(&text).map_err(|e| usage(anyhow!("{}: {e}", path.display())))
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(io_failure),
        None => io::stdout().write_all(text.as_bytes()).map_err(io_failure),
    }
}

#[derive(Serialize)]
struct SolutionFile {
    mode: &'static str,
    p: String,
    values: Vec<f64>,
    q: Vec<Vec<f64>>,
    policy: Vec<Vec<f64>>,
    iterations: usize,
    residual: f64,
    eps_opt_bound: f64,
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let (m, base) = load_model(&args.model)?;
    let (ns, na) = (m.num_states(), m.num_actions());
    let u = args.uncertainty.overrides().apply(&base, ns, na).map_err(usage)?;
    if !(args.tol > 0.0) {
        return Err(usage(anyhow!("--tol must be positive")));
    }
    let opts = SolverOptions {
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let sol = drvi(&m, &u, opts).map_err(classify)?;
    println!(
        "mode={} p={} states={ns} actions={na} iterations={} residual={:.3e} eps_opt_bound={:.3e}",
        u.mode().name(),
        u.exponent().p(),
        sol.iterations,
        sol.residual,
        sol.eps_opt_bound
    );
    for (s, v) in sol.values.iter().enumerate() {
        println!("V[{s}] = {v:.10}");
    }
    if let Some(path) = &args.out {
        let file = SolutionFile {
            mode: u.mode().name(),
            p: u.exponent().p().to_string(),
            values: sol.values.clone(),
            q: (0..ns).map(|s| sol.q.row(s).to_vec()).collect(),
            policy: (0..ns).map(|s| sol.policy.row(s).to_vec()).collect(),
            iterations: sol.iterations,
            residual: sol.residual,
            eps_opt_bound: sol.eps_opt_bound,
        };
        let text = serde_json::to_string_pretty(&file).map_err(io_failure)?;
        write_output(Some(path), &text)?;
    }
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<(), Failure> {
    let cfg = VerifyConfig {
        seed: args.seed,
        instances: args.instances,
        max_states: args.states,
        ps: args.p,
        betas: args.beta,
        resolution: args.resolution,
        pairs: args.pairs,
        models: args.models,
        ..VerifyConfig::default()
    };
    cfg.validate().map_err(usage)?;
    let reports = verify::run_all(&cfg).map_err(solver)?;
    println!("{:<36} {:>6} {:>12} {:>10}  result", "check", "cases", "max error", "tolerance");
    for r in &reports {
        println!(
            "{:<36} {:>6} {:>12.3e} {:>10.1e}  {}",
            r.name,
            r.cases,
            r.max_error,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(io_failure(anyhow!("failed checks: {}", failed.join(", "))))
    }
}

fn sample_complexity(args: SampleArgs) -> Result<(), Failure> {
    let (model, base) = match &args.model {
        Some(path) => load_model(path)?,
        None => {
            let r = &args.random;
            let m = random_mdp(r.states, r.actions, r.gamma, r.model_seed).map_err(usage)?;
            let u = Uncertainty::uniform(Rectangularity::Sa, 1.0, r.states, r.actions, 0.05, 0.0).map_err(usage)?;
            (m, u)
        }
    };
    let uncertainty = args
        .uncertainty
        .overrides()
        .apply(&base, model.num_states(), model.num_actions())
        .map_err(usage)?;
    let cfg = ExperimentConfig {
        model,
        uncertainty,
        n_grid: args.n_grid,
        num_seeds: args.seeds,
        first_seed: args.seed,
        tol: args.tol,
    };
    cfg.validate().map_err(usage)?;
    let outcome = experiment::run(&cfg).map_err(solver)?;

    let mut csv = Vec::new();
    experiment::write_csv(&outcome.records, &mut csv).map_err(io_failure)?;
    write_output(args.out.as_ref(), &String::from_utf8_lossy(&csv))?;

    eprintln!("{:>8} {:>14}", "N", "median eps_hat");
    for (n, e) in outcome.medians() {
        eprintln!("{n:>8} {e:>14.6e}");
    }
    match outcome.slope() {
        Some(slope) => eprintln!("log-log slope of median eps_hat vs N: {slope:.4}"),
        None => eprintln!("log-log slope undefined (fewer than two positive medians)"),
    }
    if let Some(gamma) = args.compare_gamma {
        let other = experiment::with_discount(&cfg, gamma).map_err(usage)?;
        let second = experiment::run(&other).map_err(solver)?;
        eprintln!("{:>8} {:>14} {:>14} {:>8}", "N", format!("gamma={}", cfg.model.discount()), format!("gamma={gamma}"), "ratio");
        for (n, a, b, ratio) in experiment::horizon_table(&outcome, &second) {
            eprintln!("{n:>8} {a:>14.6e} {b:>14.6e} {ratio:>8.3}");
        }
    }
    if let Some((n, seed, msg)) = outcome.failures.first() {
        return Err(solver(anyhow!(
            "{} cell(s) failed; first at N={n} seed={seed}: {msg}",
            outcome.failures.len()
        )));
    }
    Ok(())
}

fn random_model(args: RandomArgs) -> Result<(), Failure> {
    let m = random_mdp(args.states, args.actions, args.gamma, args.seed).map_err(usage)?;
    let base = Uncertainty::nominal(Rectangularity::Sa, args.states, args.actions);
    let u = args.uncertainty.overrides().apply(&base, args.states, args.actions).map_err(usage)?;
    let mut text = model_to_json(&m, &u);
    text.push('\n');
    write_output(args.out.as_ref(), &text)
}
