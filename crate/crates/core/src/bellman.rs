//! Robust Bellman operators and distributionally robust value iteration.

use rayon::prelude::*;

use crate::dual::{kappa_s, kappa_s_certificate, kappa_sa, kappa_sa_certificate};
use crate::error::{Result, RmdpError};
use crate::model::{argmax, Policy, QFunction, Rectangularity, TabularMdp, UncertaintySpec};
use crate::scalar::{dot, lp_norm, sup_distance, Scalar};
use crate::search::brent_root;
use crate::span::span_value;

/// Iteration cap of the value-iteration loops.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Root residual accepted by the threshold equation.
pub const THRESHOLD_RESIDUAL: f64 = 1e-8;
/// Best-response rounds of the s-rectangular backup for `1 < p < ∞`.
const MAX_ASCENT: usize = 500;
/// Below this many multiply-adds per sweep the sweep runs on one thread.
const PARALLEL_WORK: usize = 1 << 14;

/// Output of a planner.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub values: Vec<T>,
    pub q: QFunction<T>,
    pub policy: Policy<T>,
    pub iterations: usize,
    /// `‖V_T − V_{T−1}‖_∞` at exit.
    pub residual: T,
    /// `2γ·residual/(1−γ)`, a bound on the suboptimality of `values`.
    pub eps_opt_bound: T,
    /// Final-iterate threshold solves, one per state (s-rectangular only).
    pub thresholds: Vec<ThresholdSolve<T>>,
}

/// Robust policy evaluation output.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation<T> {
    pub values: Vec<T>,
    pub q: QFunction<T>,
    pub iterations: usize,
    pub residual: T,
}

/// One s-rectangular optimal backup at a single state.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSolve<T> {
    /// Penalty scale `α_s + γ·β_s·sp_q(W)`.
    pub sigma: T,
    /// The backed-up value `(T*V)(s)`.
    pub x: T,
    /// Per-action values `Q(s, a)` entering the threshold equation.
    pub q_values: Vec<T>,
    /// `A(s, a) = Q(s, a) − x`.
    pub advantage: Vec<T>,
    /// The threshold policy at this state.
    pub policy: Vec<T>,
}

/// Iteration control shared by the planners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Target suboptimality; iteration stops once `‖ΔV‖_∞ ≤ tol(1−γ)/(2γ)`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> SolverOptions<T> {
    pub fn new(tol: T) -> Self {
        Self {
            tol,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

fn converged<T: Scalar>(gamma: T, delta: T, tol: T) -> bool {
    T::lit(2.0) * gamma * delta <= tol * (T::one() - gamma)
}

fn certified_bound<T: Scalar>(gamma: T, residual: T) -> T {
    T::lit(2.0) * gamma * residual / (T::one() - gamma)
}

fn per_state<T, F>(m: &TabularMdp<impl Scalar>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let (ns, na) = (m.num_states(), m.num_actions());
    if ns * na * ns >= PARALLEL_WORK {
        (0..ns).into_par_iter().map(f).collect()
    } else {
        (0..ns).map(f).collect()
    }
}

fn check_setup<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    mode: Option<Rectangularity>,
) -> Result<()> {
    if let Some(expected) = mode {
        if u.mode() != expected {
            return Err(RmdpError::ModeMismatch {
                expected: expected.name(),
                got: u.mode().name(),
            });
        }
    }
    u.check_dims(m)
}

fn check_values<T: Scalar>(m: &TabularMdp<T>, v: &[T]) -> Result<()> {
    if v.len() != m.num_states() {
        return Err(RmdpError::DimensionMismatch {
            expected: m.num_states(),
            got: v.len(),
        });
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(RmdpError::NonFiniteEntry(i));
    }
    Ok(())
}

fn check_policy<T: Scalar>(m: &TabularMdp<T>, pi: &Policy<T>) -> Result<()> {
    if pi.num_states() != m.num_states() || pi.num_actions() != m.num_actions() {
        return Err(RmdpError::DimensionMismatch {
            expected: m.num_states() * m.num_actions(),
            got: pi.num_states() * pi.num_actions(),
        });
    }
    Ok(())
}

fn rows_at<T: Scalar>(m: &TabularMdp<T>, s: usize) -> Vec<&[T]> {
    (0..m.num_actions()).map(|a| m.row(s, a)).collect()
}

fn with_state(err: RmdpError, s: usize) -> RmdpError {
    match err {
        RmdpError::NonSimplexPolicyRow(_) => RmdpError::NonSimplexPolicyRow(s),
        RmdpError::BisectionFailure { residual, .. } => RmdpError::BisectionFailure { state: s, residual },
        other => other,
    }
}

/// sa-rectangular robust action values `R₀ − α + γ·κ_sa(P₀, V)` at state `s`.
fn sa_q_row<T: Scalar>(m: &TabularMdp<T>, u: &UncertaintySpec<T>, v: &[T], s: usize) -> Result<Vec<T>> {
    let q = u.exponent().q();
    (0..m.num_actions())
        .map(|a| {
            let k = kappa_sa(m.row(s, a), v, u.beta(s, a), q)?;
            Ok(m.reward(s, a) - u.alpha(s, a) + m.discount() * k.value)
        })
        .collect()
}

/// One application of the robust policy operator `T^π`.
pub fn robust_bellman_policy<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    pi: &Policy<T>,
    v: &[T],
) -> Result<Vec<T>> {
    check_setup(m, u, None)?;
    check_policy(m, pi)?;
    check_values(m, v)?;
    per_state(m, |s| policy_backup(m, u, pi.row(s), v, s))
}

fn policy_backup<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    pi_s: &[T],
    v: &[T],
    s: usize,
) -> Result<T> {
    let gamma = m.discount();
    let q = u.exponent().q();
    match u.mode() {
        Rectangularity::Sa => {
            let mut total = T::zero();
            for (a, &w) in pi_s.iter().enumerate() {
                if w == T::zero() {
                    continue;
                }
                let k = kappa_sa(m.row(s, a), v, u.beta(s, a), q)?;
                total = total + w * (m.reward(s, a) - u.alpha(s, a) + gamma * k.value);
            }
            Ok(total)
        }
        Rectangularity::S => {
            let rows = rows_at(m, s);
            let k = kappa_s(&rows, pi_s, v, u.beta(s, 0), q).map_err(|e| with_state(e, s))?;
            let reward: T = pi_s.iter().enumerate().map(|(a, &w)| w * m.reward(s, a)).sum();
            Ok(reward - lp_norm(pi_s, q) * u.alpha(s, 0) + gamma * k.value)
        }
    }
}

/// One application of the robust optimality operator `T*`.
pub fn robust_bellman_optimal<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    v: &[T],
) -> Result<Vec<T>> {
    check_setup(m, u, None)?;
    check_values(m, v)?;
    match u.mode() {
        Rectangularity::Sa => per_state(m, |s| {
            let row = sa_q_row(m, u, v, s)?;
            Ok(row[argmax(&row)])
        }),
        Rectangularity::S => per_state(m, |s| Ok(s_backup(m, u, v, s, None)?.x)),
    }
}

/// Robust action values of `pi` given its value `v`.
///
/// sa mode: `R₀ − α + γ·κ_sa(P₀_{s,a}, V)`. s mode: the reward radius is
/// split across actions with weights `(π(a)/‖π_s‖_q)^{q−1}` and the
/// adversarial correction `κ_s − P^π·V` is shared, so that
/// `Σ_a π(a|s)Q(s,a) = (T^π V)(s)`.
pub fn robust_q<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    pi: &Policy<T>,
    v: &[T],
) -> Result<QFunction<T>> {
    check_setup(m, u, None)?;
    check_policy(m, pi)?;
    check_values(m, v)?;
    let rows = per_state(m, |s| match u.mode() {
        Rectangularity::Sa => sa_q_row(m, u, v, s),
        Rectangularity::S => s_q_row(m, u, pi.row(s), v, s),
    })?;
    Ok(QFunction::new(m.num_actions(), rows.into_iter().flatten().collect()))
}

fn s_q_row<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    pi_s: &[T],
    v: &[T],
    s: usize,
) -> Result<Vec<T>> {
    let gamma = m.discount();
    let q = u.exponent().q();
    let rows = rows_at(m, s);
    let k = kappa_s(&rows, pi_s, v, u.beta(s, 0), q).map_err(|e| with_state(e, s))?;
    let nominal: Vec<T> = rows.iter().map(|r| dot(r, v)).collect();
    let mixed: T = pi_s.iter().zip(&nominal).map(|(&w, &x)| w * x).sum();
    let weights = reward_split(pi_s, q);
    Ok((0..m.num_actions())
        .map(|a| {
            m.reward(s, a) - weights[a] * u.alpha(s, 0) + gamma * nominal[a] + gamma * (k.value - mixed)
        })
        .collect())
}

/// Weights `w_a` with `Σ π_a w_a = ‖π‖_q`.
fn reward_split<T: Scalar>(pi_s: &[T], q: T) -> Vec<T> {
    let norm = lp_norm(pi_s, q);
    if q.is_infinite() {
        let top = pi_s.iter().copied().fold(T::zero(), T::max);
        let count = pi_s.iter().filter(|&&w| w == top).count();
        return pi_s
            .iter()
            .map(|&w| if w == top { T::from_count(count).recip() } else { T::zero() })
            .collect();
    }
    pi_s.iter().map(|&w| (w / norm).powf(q - T::one())).collect()
}

/// Fixed point of `T^π` by iteration from `V₀ = 0`, accurate to `tol`.
pub fn robust_policy_eval<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    pi: &Policy<T>,
    tol: T,
) -> Result<PolicyEvaluation<T>> {
    robust_policy_eval_with(m, u, pi, SolverOptions::new(tol))
}

pub fn robust_policy_eval_with<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    pi: &Policy<T>,
    opts: SolverOptions<T>,
) -> Result<PolicyEvaluation<T>> {
    check_tol(opts.tol)?;
    let gamma = m.discount();
    let mut v = vec![T::zero(); m.num_states()];
    for iteration in 1..=opts.max_iter {
        let next = robust_bellman_policy(m, u, pi, &v)?;
        let delta = sup_distance(&next, &v);
        v = next;
        if converged(gamma, delta, opts.tol) {
            let q = robust_q(m, u, pi, &v)?;
            return Ok(PolicyEvaluation {
                values: v,
                q,
                iterations: iteration,
                residual: delta,
            });
        }
    }
    Err(RmdpError::NonConvergence(opts.max_iter))
}

fn check_tol<T: Scalar>(tol: T) -> Result<()> {
    if !(tol > T::zero()) {
        return Err(RmdpError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Robust value iteration under sa-rectangular uncertainty.
pub fn drvi_sa<T: Scalar>(m: &TabularMdp<T>, u: &UncertaintySpec<T>, tol: T) -> Result<SolveResult<T>> {
    drvi_sa_with(m, u, SolverOptions::new(tol))
}

pub fn drvi_sa_with<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    opts: SolverOptions<T>,
) -> Result<SolveResult<T>> {
    check_setup(m, u, Some(Rectangularity::Sa))?;
    check_tol(opts.tol)?;
    let gamma = m.discount();
    let na = m.num_actions();
    let mut v = vec![T::zero(); m.num_states()];
    for iteration in 1..=opts.max_iter {
        let q_rows = per_state(m, |s| sa_q_row(m, u, &v, s))?;
        let next: Vec<T> = q_rows.iter().map(|row| row[argmax(row)]).collect();
        let delta = sup_distance(&next, &v);
        v = next;
        if converged(gamma, delta, opts.tol) {
            let q = QFunction::new(na, q_rows.into_iter().flatten().collect());
            let policy = Policy::deterministic(&q.greedy_actions(), na);
            return Ok(SolveResult {
                values: v,
                q,
                policy,
                iterations: iteration,
                residual: delta,
                eps_opt_bound: certified_bound(gamma, delta),
                thresholds: Vec::new(),
            });
        }
    }
    Err(RmdpError::NonConvergence(opts.max_iter))
}

/// Root `x` of `Σ_a max(Q_a − x, 0)^p = σ^p` in `[max Q − σ, max Q]`.
pub fn threshold_root<T: Scalar>(q_values: &[T], sigma: T, p: T) -> Result<T> {
    if q_values.is_empty() {
        return Err(RmdpError::EmptyVector);
    }
    let qmax = q_values[argmax(q_values)];
    if sigma == T::zero() {
        return Ok(qmax);
    }
    if q_values.len() == 1 {
        return Ok(qmax - sigma);
    }
    if p.is_infinite() {
        return Ok(qmax - sigma);
    }
    // Normalized by σ so that large p neither overflows nor underflows.
    let g = |x: T| -> T {
        q_values
            .iter()
            .map(|&qa| ((qa - x) / sigma).max(T::zero()).powf(p))
            .sum::<T>()
            - T::one()
    };
    let (lo, hi) = (qmax - sigma, qmax);
    let xtol = T::lit(4.0) * T::epsilon() * (qmax.abs() + sigma);
    let root = brent_root(g, lo, hi, g(lo), -T::one(), xtol, 200);
    let x = root.x.max(lo).min(hi);
    let lhs: T = q_values
        .iter()
        .map(|&qa| (qa - x).max(T::zero()).powf(p))
        .sum();
    let residual = (lhs - sigma.powf(p)).abs();
    if !(residual <= T::lit(THRESHOLD_RESIDUAL)) {
        return Err(RmdpError::BisectionFailure {
            state: 0,
            residual: residual.as_f64(),
        });
    }
    Ok(x)
}

/// Threshold policy from advantages: weights `max(A, 0)^{p−1}`, which is
/// uniform over `{A ≥ 0}` when `p = 1`. Falls back to the lowest-index
/// argmax when every weight vanishes (e.g. `σ = 0`). `None` if every
/// advantage is negative.
pub fn threshold_policy<T: Scalar>(advantage: &[T], p: T) -> Option<Vec<T>> {
    if advantage.iter().all(|&a| a < T::zero()) {
        return None;
    }
    let weights: Vec<T> = if p == T::one() {
        advantage
            .iter()
            .map(|&a| if a >= T::zero() { T::one() } else { T::zero() })
            .collect()
    } else if p.is_infinite() {
        vec![T::zero(); advantage.len()]
    } else {
        advantage
            .iter()
            .map(|&a| a.max(T::zero()).powf(p - T::one()))
            .collect()
    };
    let total: T = weights.iter().copied().sum();
    if total > T::zero() && total.is_finite() {
        return Some(weights.into_iter().map(|w| w / total).collect());
    }
    let mut greedy = vec![T::zero(); advantage.len()];
    greedy[argmax(advantage)] = T::one();
    Some(greedy)
}

/// The s-rectangular optimal backup `(T*V)(s)` with its threshold policy.
pub fn s_rect_optimal_backup<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    v: &[T],
    s: usize,
) -> Result<ThresholdSolve<T>> {
    check_setup(m, u, Some(Rectangularity::S))?;
    check_values(m, v)?;
    if s >= m.num_states() {
        return Err(RmdpError::InvalidArgument(format!("state {s} out of range")));
    }
    s_backup(m, u, v, s, None)
}

/// Threshold solve for a fixed dual vector `W ≤ V`.
fn solve_at<T: Scalar>(m: &TabularMdp<T>, u: &UncertaintySpec<T>, w: &[T], s: usize) -> Result<ThresholdSolve<T>> {
    let gamma = m.discount();
    let exp = u.exponent();
    let (p, q) = (exp.p(), exp.q());
    let q_values: Vec<T> = (0..m.num_actions())
        .map(|a| m.reward(s, a) + gamma * dot(m.row(s, a), w))
        .collect();
    let beta = u.beta(s, 0);
    let spread = if beta == T::zero() { T::zero() } else { span_value(w, q) };
    let sigma = u.alpha(s, 0) + gamma * beta * spread;
    let x = threshold_root(&q_values, sigma, p).map_err(|e| with_state(e, s))?;
    finish(q_values, sigma, x, p, s)
}

fn finish<T: Scalar>(q_values: Vec<T>, sigma: T, x: T, p: T, s: usize) -> Result<ThresholdSolve<T>> {
    let advantage: Vec<T> = q_values.iter().map(|&qa| qa - x).collect();
    let policy = threshold_policy(&advantage, p).ok_or(RmdpError::DegeneratePolicyRow(s))?;
    Ok(ThresholdSolve {
        sigma,
        x,
        q_values,
        advantage,
        policy,
    })
}

fn s_backup<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    v: &[T],
    s: usize,
    warm: Option<&[T]>,
) -> Result<ThresholdSolve<T>> {
    let exp = u.exponent();
    let q = exp.q();
    let beta = u.beta(s, 0);
    let gamma = m.discount();
    let na = m.num_actions();

    if exp.is_infinite() || crate::span::q_is_one(q) {
        // ‖π‖_1 = 1: the penalty no longer depends on π, so a vertex is optimal.
        let q_values = (0..na)
            .map(|a| Ok(m.reward(s, a) + gamma * kappa_sa(m.row(s, a), v, beta, q)?.value))
            .collect::<Result<Vec<T>>>()?;
        let sigma = u.alpha(s, 0);
        let x = q_values[argmax(&q_values)] - sigma;
        let advantage: Vec<T> = q_values.iter().map(|&qa| qa - x).collect();
        let mut policy = vec![T::zero(); na];
        policy[argmax(&q_values)] = T::one();
        return Ok(ThresholdSolve {
            sigma,
            x,
            q_values,
            advantage,
            policy,
        });
    }
    if beta == T::zero() {
        return solve_at(m, u, v, s);
    }

    // Single-level truncations [V]_α at every breakpoint α ∈ {V_s}.
    let mut levels = v.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    levels.dedup();
    let mut best: Option<ThresholdSolve<T>> = None;
    let consider = |cand: ThresholdSolve<T>, best: &mut Option<ThresholdSolve<T>>| {
        if best.as_ref().map_or(true, |b| cand.x > b.x) {
            *best = Some(cand);
        }
    };
    for &level in &levels {
        let w = crate::dual::truncate(v, level);
        consider(solve_at(m, u, &w, s)?, &mut best);
    }
    if exp.is_one() {
        // Exact: x is convex in α between breakpoints.
        return Ok(best.expect("at least one level"));
    }

    // 1 < p < ∞: alternate best responses from the best of several starts.
    let rows = rows_at(m, s);
    for a in 0..na {
        let (_, w) = kappa_sa_certificate(rows[a], v, beta, q)?;
        consider(solve_at(m, u, &w, s)?, &mut best);
    }
    let uniform = vec![T::from_count(na).recip(); na];
    let starts = [Some(uniform.as_slice()), warm];
    for pi_s in starts.into_iter().flatten() {
        let (_, w) = kappa_s_certificate(&rows, pi_s, v, beta, q).map_err(|e| with_state(e, s))?;
        consider(solve_at(m, u, &w, s)?, &mut best);
    }
    let mut current = best.expect("at least one start");
    for _ in 0..MAX_ASCENT {
        let (_, w) = kappa_s_certificate(&rows, &current.policy, v, beta, q).map_err(|e| with_state(e, s))?;
        let next = solve_at(m, u, &w, s)?;
        let gain = next.x - current.x;
        if gain > T::zero() {
            current = next;
        }
        if !(gain > T::lit(1e-15) * (T::one() + current.x.abs())) {
            break;
        }
    }
    Ok(current)
}

/// Robust value iteration under s-rectangular uncertainty. The returned
/// policy is the threshold policy of the final iterate's backups.
pub fn drvi_s<T: Scalar>(m: &TabularMdp<T>, u: &UncertaintySpec<T>, tol: T) -> Result<SolveResult<T>> {
    drvi_s_with(m, u, SolverOptions::new(tol))
}

pub fn drvi_s_with<T: Scalar>(
    m: &TabularMdp<T>,
    u: &UncertaintySpec<T>,
    opts: SolverOptions<T>,
) -> Result<SolveResult<T>> {
    check_setup(m, u, Some(Rectangularity::S))?;
    check_tol(opts.tol)?;
    let gamma = m.discount();
    let na = m.num_actions();
    let mut v = vec![T::zero(); m.num_states()];
    let mut previous: Option<Vec<ThresholdSolve<T>>> = None;
    for iteration in 1..=opts.max_iter {
        let solves = per_state(m, |s| {
            let warm = previous.as_ref().map(|p| p[s].policy.as_slice());
            s_backup(m, u, &v, s, warm)
        })?;
        let next: Vec<T> = solves.iter().map(|t| t.x).collect();
        let delta = sup_distance(&next, &v);
        v = next;
        if converged(gamma, delta, opts.tol) {
            let policy = Policy::new(
                m.num_states(),
                na,
                solves.iter().flat_map(|t| t.policy.iter().copied()).collect(),
            )?;
            let q = robust_q(m, u, &policy, &v)?;
            return Ok(SolveResult {
                values: v,
                q,
                policy,
                iterations: iteration,
                residual: delta,
                eps_opt_bound: certified_bound(gamma, delta),
                thresholds: solves,
            });
        }
        previous = Some(solves);
    }
    Err(RmdpError::NonConvergence(opts.max_iter))
}

/// Dispatches to [`drvi_sa`] or [`drvi_s`] by the uncertainty mode.
pub fn drvi<T: Scalar>(m: &TabularMdp<T>, u: &UncertaintySpec<T>, opts: SolverOptions<T>) -> Result<SolveResult<T>> {
    match u.mode() {
        Rectangularity::Sa => drvi_sa_with(m, u, opts),
        Rectangularity::S => drvi_s_with(m, u, opts),
    }
}
