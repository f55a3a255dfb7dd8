//! Randomized self-checks of the solver against the brute-force oracle and
//! against the operator properties it must satisfy.

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lp_rmdp::bellman::{drvi, robust_bellman_optimal, robust_bellman_policy, SolverOptions};
use lp_rmdp::dual::{kappa_s, kappa_sa};
use lp_rmdp::model::{conjugate, random_mdp};
use lp_rmdp::oracle::{brute_kappa, MAX_KAPPA_STATES};
use lp_rmdp::span::{q_mean, q_mean_bisection, span_seminorm};
use lp_rmdp::{Mdp, Policy, Rectangularity, Uncertainty};

/// Outcome of one check: the worst observed value of its error measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(name: impl Into<String>, cases: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            cases,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Instances of the dual-vs-oracle check.
    pub instances: usize,
    pub max_states: usize,
    pub ps: Vec<f64>,
    pub betas: Vec<f64>,
    pub resolution: f64,
    /// Random pairs of the contraction and Lipschitz checks.
    pub pairs: usize,
    pub models: usize,
    pub gamma: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 200,
            max_states: 5,
            ps: vec![1.0, 1.5, 2.0, 3.0, f64::INFINITY],
            betas: vec![0.0, 0.05, 0.3, 2.5],
            resolution: 1e-3,
            pairs: 100,
            models: 10,
            gamma: 0.9,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.betas.iter().find(|&&b| !(b >= 0.0)) {
            bail!("radius must be non-negative, got {b}");
        }
        if let Some(p) = self.ps.iter().find(|&&p| !(p >= 1.0)) {
            bail!("exponent must be at least 1, got {p}");
        }
        if self.ps.is_empty() || self.betas.is_empty() {
            bail!("need at least one exponent and one radius");
        }
        if !(2..=MAX_KAPPA_STATES).contains(&self.max_states) {
            bail!("state count must be in 2..={MAX_KAPPA_STATES}");
        }
        if !(self.resolution > 0.0) {
            bail!("resolution must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            bail!("discount must be in (0, 1)");
        }
        Ok(())
    }
}

/// Random value vectors are drawn from `[0, VALUE_SCALE]`.
pub const VALUE_SCALE: f64 = 10.0;

pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn random_vector(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen::<f64>()).collect()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}


/// `|κ − brute κ|` over random rows, values in `[0, VALUE_SCALE]` and radii;
/// both modes, the s mode through a random three-action policy row. The
/// allowance is `1e-4` plus the oracle's grid error `resolution·VALUE_SCALE`.
pub fn dual_vs_oracle(cfg: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut worst_sa, mut worst_s) = (0f64, 0f64);
    for i in 0..cfg.instances {
        let n = rng.gen_range(2..=cfg.max_states);
        let p = cfg.ps[i % cfg.ps.len()];
        let beta = cfg.betas[(i / cfg.ps.len()) % cfg.betas.len()];
        let q = conjugate(p);
        let v = random_vector(&mut rng, n, VALUE_SCALE);

        let row = random_simplex(&mut rng, n);
        let dual = kappa_sa(&row, &v, beta, q)?.value;
        let brute = brute_kappa(&row, &v, beta, p, cfg.resolution)?;
        worst_sa = worst_sa.max((dual - brute).abs());

        let rows: Vec<Vec<f64>> = (0..3).map(|_| random_simplex(&mut rng, n)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let pi = random_simplex(&mut rng, 3);
        let dual = kappa_s(&refs, &pi, &v, beta, q)?.value;
        let mixed: Vec<f64> = (0..n).map(|j| (0..3).map(|a| pi[a] * rows[a][j]).sum()).collect();
        let norm = lp_rmdp::scalar::lp_norm(&pi, q);
        let brute = brute_kappa(&mixed, &v, beta * norm, p, cfg.resolution)?;
        worst_s = worst_s.max((dual - brute).abs());
    }
    let allowance = 1e-4 + cfg.resolution * VALUE_SCALE;
    Ok(vec![
        CheckReport::new("dual vs oracle (sa)", cfg.instances, worst_sa, allowance),
        CheckReport::new("dual vs oracle (s)", cfg.instances, worst_s, allowance),
    ])
}

fn check_models(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Mdp>> {
    (0..cfg.models)
        .map(|_| {
            let ns = rng.gen_range(2..=cfg.max_states);
            let na = rng.gen_range(2..=3);
            Ok(random_mdp(ns, na, cfg.gamma, rng.gen())?)
        })
        .collect()
}

fn random_policy(rng: &mut impl Rng, ns: usize, na: usize) -> Result<Policy<f64>> {
    Ok(Policy::from_rows((0..ns).map(|_| random_simplex(rng, na)).collect())?)
}

/// `‖TV₁ − TV₂‖_∞ − γ‖V₁ − V₂‖_∞` for `T^π` and `T*` in both modes.
pub fn contraction(cfg: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc0);
    let models = check_models(cfg, &mut rng)?;
    let mut reports = Vec::new();
    for mode in [Rectangularity::Sa, Rectangularity::S] {
        let (mut worst_pi, mut worst_opt) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..cfg.pairs {
            let m = &models[i % models.len()];
            let (ns, na) = (m.num_states(), m.num_actions());
            let p = cfg.ps[i % cfg.ps.len()];
            let beta = cfg.betas[i % cfg.betas.len()].min(1.0);
            let u = Uncertainty::uniform(mode, p, ns, na, beta, 0.1)?;
            let v1 = random_vector(&mut rng, ns, 10.0);
            let v2 = random_vector(&mut rng, ns, 10.0);
            let pi = random_policy(&mut rng, ns, na)?;
            let bound = m.discount() * sup(&v1, &v2);
            let t1 = robust_bellman_policy(m, &u, &pi, &v1)?;
            let t2 = robust_bellman_policy(m, &u, &pi, &v2)?;
            worst_pi = worst_pi.max(sup(&t1, &t2) - bound);
            let t1 = robust_bellman_optimal(m, &u, &v1)?;
            let t2 = robust_bellman_optimal(m, &u, &v2)?;
            worst_opt = worst_opt.max(sup(&t1, &t2) - bound);
        }
        let name = mode.name();
        reports.push(CheckReport::new(format!("contraction T^pi ({name})"), cfg.pairs, worst_pi, 1e-10));
        reports.push(CheckReport::new(format!("contraction T* ({name})"), cfg.pairs, worst_opt, 1e-10));
    }
    Ok(reports)
}

/// `|κ(V₁) − κ(V₂)| − ‖V₁ − V₂‖_∞` over random rows and radii.
pub fn lipschitz(cfg: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1f);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..cfg.pairs {
        let n = rng.gen_range(2..=8);
        let q = conjugate(cfg.ps[i % cfg.ps.len()]);
        let beta = cfg.betas[i % cfg.betas.len()];
        let row = random_simplex(&mut rng, n);
        let v1 = random_vector(&mut rng, n, 10.0);
        let v2: Vec<f64> = if i % 2 == 0 {
            random_vector(&mut rng, n, 10.0)
        } else {
            v1.iter().map(|&x| x + rng.gen_range(-0.1..0.1)).collect()
        };
        let k1 = kappa_sa(&row, &v1, beta, q)?.value;
        let k2 = kappa_sa(&row, &v2, beta, q)?.value;
        worst = worst.max((k1 - k2).abs() - sup(&v1, &v2));
    }
    Ok(vec![CheckReport::new("kappa 1-Lipschitz", cfg.pairs, worst, 1e-9)])
}

/// Robust optimal values must not increase with the radius.
pub fn beta_monotonicity(cfg: &VerifyConfig, betas: &[f64]) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xb7);
    let models = check_models(cfg, &mut rng)?;
    let mut reports = Vec::new();
    for mode in [Rectangularity::Sa, Rectangularity::S] {
        let mut worst = f64::NEG_INFINITY;
        for (i, m) in models.iter().enumerate() {
            let p = cfg.ps[i % cfg.ps.len()];
            let mut previous: Option<Vec<f64>> = None;
            for &beta in betas {
                let u = Uncertainty::uniform(mode, p, m.num_states(), m.num_actions(), beta, 0.0)?;
                let v = drvi(m, &u, SolverOptions::new(1e-12))?.values;
                if let Some(prev) = &previous {
                    let rise = v.iter().zip(prev).fold(f64::NEG_INFINITY, |w, (a, b)| w.max(a - b));
                    worst = worst.max(rise);
                }
                previous = Some(v);
            }
        }
        reports.push(CheckReport::new(
            format!("monotone in beta ({})", mode.name()),
            models.len(),
            worst,
            1e-9,
        ));
    }
    Ok(reports)
}

/// Span seminorm: closed forms against bisection (finite `q`), translation invariance,
/// homogeneity and the dominance bounds `sp_q ≤ ‖v‖_q ≤ 2‖v‖_q` and
/// `sp_q ≤ 2·n^{1/q}·‖v‖_∞`.
pub fn span_suite(seed: u64, vectors: usize) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a);
    let qs = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];
    let (mut agree, mut translate, mut homog, mut dominance) = (0f64, 0f64, 0f64, f64::NEG_INFINITY);
    for i in 0..vectors {
        let n = rng.gen_range(1..=12);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let q = qs[i % qs.len()];
        let sp = span_seminorm(&v, q)?.value;
        if q.is_finite() {
            let exact = q_mean(&v, q)?;
            let search = q_mean_bisection(&v, q)?;
            let shifted: Vec<f64> = v.iter().map(|x| x - search).collect();
            let sp_at_search = lp_rmdp::scalar::lp_norm(&shifted, q);
            // q = 1 has a whole interval of minimizers; compare objective values there.
            agree = agree.max(if q == 1.0 { (sp_at_search - sp).abs() } else { (exact - search).abs() });
        }

        let c = rng.gen_range(-10.0..10.0);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        translate = translate.max((span_seminorm(&shifted, q)?.value - sp).abs());
        let lambda = rng.gen_range(-3.0..3.0);
        let scaled: Vec<f64> = v.iter().map(|x| lambda * x).collect();
        homog = homog.max((span_seminorm(&scaled, q)?.value - lambda.abs() * sp).abs());

        let norm = lp_rmdp::scalar::lp_norm(&v, q);
        let sup_norm = lp_rmdp::scalar::lp_norm(&v, f64::INFINITY);
        let root = if q.is_infinite() { 1.0 } else { (n as f64).powf(1.0 / q) };
        let slack = [sp - norm, sp - 2.0 * norm, sp - 2.0 * root * sup_norm];
        dominance = dominance.max(slack.into_iter().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(vec![
        CheckReport::new("q-mean closed form vs bisection", vectors, agree, 1e-4),
        CheckReport::new("span translation invariance", vectors, translate, 1e-9),
        CheckReport::new("span homogeneity", vectors, homog, 1e-9),
        CheckReport::new("span dominance", vectors, dominance, 1e-9),
    ])
}

/// All checks at the configuration's sizes.
pub fn run_all(cfg: &VerifyConfig) -> Result<Vec<CheckReport>> {
    cfg.validate()?;
    let mut reports = dual_vs_oracle(cfg)?;
    reports.extend(contraction(cfg)?);
    reports.extend(lipschitz(cfg)?);
    reports.extend(beta_monotonicity(cfg, &[0.0, 0.05, 0.1, 0.2])?);
    reports.extend(span_suite(cfg.seed, 500)?);
    Ok(reports)
}
