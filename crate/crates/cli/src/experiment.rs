//! Sample-complexity experiment: plan on an empirical model, score the
//! resulting policy on the true one.

use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use lp_rmdp::bellman::{drvi, robust_policy_eval, SolverOptions};
use lp_rmdp::generative::{build_empirical, empirical_rmdp};
use lp_rmdp::{Mdp, Solution, Uncertainty};

/// Reference grid of per-pair sample counts.
pub const REFERENCE_GRID: [u64; 6] = [100, 316, 1000, 3162, 10000, 31623];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: Mdp,
    pub uncertainty: Uncertainty,
    /// Samples per state-action pair, strictly increasing.
    pub n_grid: Vec<u64>,
    pub num_seeds: u64,
    /// Seeds are `first_seed, first_seed + 1, ...`.
    pub first_seed: u64,
    pub tol: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            bail!("N grid must be non-empty and strictly increasing");
        }
        if self.n_grid[0] == 0 {
            bail!("N must be at least 1");
        }
        if self.num_seeds == 0 {
            bail!("need at least one seed");
        }
        if !(self.tol > 0.0) {
            bail!("tolerance must be positive");
        }
        Ok(())
    }
}

/// One `(N, seed)` cell; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub mode: &'static str,
    pub p: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(rename = "N")]
    pub n: u64,
    pub seed: u64,
    pub eps_hat: f64,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<ExperimentRecord>,
    /// Robust optimum of the true model.
    pub reference: Solution,
    /// Largest planner bound seen on an empirical model.
    pub max_eps_opt_bound: f64,
    /// Cells whose solve failed, as `(N, seed, message)`.
    pub failures: Vec<(u64, u64, String)>,
}

impl ExperimentOutcome {
    /// `(N, median eps_hat)` in grid order.
    pub fn medians(&self) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, f64)> = Vec::new();
        for r in &self.records {
            match out.last() {
                Some(&(n, _)) if n == r.n => {}
                _ => out.push((r.n, 0.0)),
            }
        }
        for cell in &mut out {
            let eps: Vec<f64> = self.records.iter().filter(|r| r.n == cell.0).map(|r| r.eps_hat).collect();
            cell.1 = median(eps);
        }
        out
    }

    /// Least-squares slope of `log median eps_hat` against `log N`.
    pub fn slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .medians()
            .into_iter()
            .filter(|&(_, e)| e > 0.0)
            .map(|(n, e)| ((n as f64).ln(), e.ln()))
            .collect();
        fit_slope(&pts)
    }
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let k = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[k]
    } else {
        0.5 * (xs[k - 1] + xs[k])
    }
}

/// Ordinary least-squares slope; `None` below two distinct abscissae.
pub fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Runs every `(N, seed)` cell. The true model is solved once at a tolerance
/// a hundred times tighter than the planner's.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let (m, u) = (&cfg.model, &cfg.uncertainty);
    let reference = drvi(m, u, SolverOptions::new(cfg.tol * 1e-2)).context("solving the true model")?;
    let cells: Vec<(u64, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.num_seeds).map(move |k| (n, cfg.first_seed + k)))
        .collect();
    let results: Vec<Result<(ExperimentRecord, f64)>> =
        cells.par_iter().map(|&(n, seed)| run_cell(cfg, &reference, n, seed)).collect();
    let mut records = Vec::with_capacity(results.len());
    let mut max_eps_opt_bound = 0.0f64;
    let mut failures = Vec::new();
    for (&(n, seed), r) in cells.iter().zip(results) {
        match r {
            Ok((rec, bound)) => {
                max_eps_opt_bound = max_eps_opt_bound.max(bound);
                records.push(rec);
            }
            Err(e) => failures.push((n, seed, format!("{e:#}"))),
        }
    }
    Ok(ExperimentOutcome {
        records,
        reference,
        max_eps_opt_bound,
        failures,
    })
}

fn run_cell(cfg: &ExperimentConfig, reference: &Solution, n: u64, seed: u64) -> Result<(ExperimentRecord, f64)> {
    let (m, u) = (&cfg.model, &cfg.uncertainty);
    let start = Instant::now();
    let emp = build_empirical(m, n, seed)?;
    let m_hat = empirical_rmdp(m, &emp, u)?;
    let planned = drvi(&m_hat, u, SolverOptions::new(cfg.tol)).with_context(|| format!("N={n} seed={seed}"))?;
    let eval = robust_policy_eval(m, u, &planned.policy, cfg.tol * 1e-2)
        .with_context(|| format!("evaluating N={n} seed={seed}"))?;
    let eps_hat = reference.q.sup_distance(&eval.q);
    let record = ExperimentRecord {
        mode: u.mode().name(),
        p: u.exponent().p(),
        beta: u.max_beta(),
        gamma: m.discount(),
        n,
        seed,
        eps_hat,
        iterations: planned.iterations,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((record, planned.eps_opt_bound))
}

/// Same experiment with the discount replaced, for the horizon comparison.
pub fn with_discount(cfg: &ExperimentConfig, gamma: f64) -> Result<ExperimentConfig> {
    let mut raw = cfg.model.to_raw();
    raw.discount = gamma;
    Ok(ExperimentConfig {
        model: Mdp::new(raw)?,
        ..cfg.clone()
    })
}

/// Rows `N, median at γ₁, median at γ₂, ratio` for two runs on one grid.
pub fn horizon_table(first: &ExperimentOutcome, second: &ExperimentOutcome) -> Vec<(u64, f64, f64, f64)> {
    first
        .medians()
        .into_iter()
        .zip(second.medians())
        .filter(|(a, b)| a.0 == b.0)
        .map(|((n, e1), (_, e2))| (n, e1, e2, e2 / e1))
        .collect()
}

pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
