//! Brute-force reference solvers for small instances.
//!
//! Nothing here goes through the dual machinery in [`crate::dual`]: the inner
//! minimum is attacked directly in the primal, over explicit feasible points
//! of `Δ ∩ {‖P′ − P‖_p ≤ β}`. Every candidate is feasible, so the returned
//! value is an upper bound on the true minimum.

use crate::error::{Result, RmdpError};
use crate::model::{argmax, Policy, Rectangularity, TabularMdp, UncertaintySpec};
use crate::scalar::{dot, lp_norm, sup_distance};
use crate::search::brent_root;

/// Largest state space accepted by [`brute_kappa`].
pub const MAX_KAPPA_STATES: usize = 6;
/// Largest model accepted by [`brute_robust_value`].
pub const MAX_MODEL_STATES: usize = 4;
pub const MAX_MODEL_ACTIONS: usize = 3;
/// Largest policy count accepted by [`exhaustive_sa_optimum`].
pub const MAX_POLICIES: usize = 64;
/// Default grid resolution.
pub const DEFAULT_RESOLUTION: f64 = 1e-3;

/// Budget of the general-`p` search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Simplex grid step; coarsened when the grid would exceed `grid_cap`.
    pub resolution: f64,
    pub grid_cap: usize,
    /// Projected-gradient runs (from the nominal row, then from the best
    /// candidate found so far, then from grid vertices).
    pub pgd_starts: usize,
    pub pgd_iters: usize,
    /// Alternating-projection rounds per projection onto `Δ ∩ ball`.
    pub projection_rounds: usize,
}

impl OracleConfig {
    pub fn with_resolution(resolution: f64) -> Self {
        Self {
            resolution,
            grid_cap: 20_000,
            pgd_starts: 2,
            pgd_iters: 200,
            projection_rounds: 50,
        }
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self::with_resolution(DEFAULT_RESOLUTION)
    }
}

/// `min { P′·V : P′ ∈ Δ, ‖P′ − row‖_p ≤ β }` by primal search.
pub fn brute_kappa(row: &[f64], v: &[f64], beta: f64, p: f64, resolution: f64) -> Result<f64> {
    brute_kappa_with(row, v, beta, p, &OracleConfig::with_resolution(resolution))
}

pub fn brute_kappa_with(row: &[f64], v: &[f64], beta: f64, p: f64, cfg: &OracleConfig) -> Result<f64> {
    let n = v.len();
    if n > MAX_KAPPA_STATES {
        return Err(RmdpError::TooManyStates {
            limit: MAX_KAPPA_STATES,
            got: n,
        });
    }
    if n == 0 || row.len() != n {
        return Err(RmdpError::DimensionMismatch {
            expected: n,
            got: row.len(),
        });
    }
    if !(beta >= 0.0) {
        return Err(RmdpError::NegativeBeta(beta));
    }
    if !(p >= 1.0) {
        return Err(RmdpError::BadExponent(p));
    }
    if !(cfg.resolution > 0.0) {
        return Err(RmdpError::InvalidArgument("resolution must be positive".into()));
    }
    let nominal = dot(row, v);
    if beta == 0.0 {
        return Ok(nominal);
    }
    let best = if n == 2 {
        segment_end(row, v, beta, p)
    } else if p == 1.0 {
        l1_transport(row, v, beta)
    } else if p.is_infinite() {
        box_fill(row, v, beta)
    } else {
        general_search(row, v, beta, p, cfg)
    };
    Ok(best.min(nominal))
}

/// Two states: the feasible set is a segment along `e₀ − e₁`, so the
/// minimum sits at the end reached by moving mass onto the cheaper state.
fn segment_end(row: &[f64], v: &[f64], beta: f64, p: f64) -> f64 {
    let (lo, hi) = if v[0] <= v[1] { (0, 1) } else { (1, 0) };
    let reach = if p.is_infinite() { beta } else { beta / 2f64.powf(p.recip()) };
    let moved = reach.min(row[hi]);
    (row[lo] + moved) * v[lo] + (row[hi] - moved) * v[hi]
}

/// L1 ball: shift up to `β/2` mass from the highest-valued states onto the
/// lowest-valued one.
fn l1_transport(row: &[f64], v: &[f64], beta: f64) -> f64 {
    let target = (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b });
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).expect("finite"));
    let mut y = row.to_vec();
    let mut budget = beta / 2.0;
    for i in order {
        if budget <= 0.0 || v[i] <= v[target] {
            break;
        }
        let moved = y[i].min(budget);
        y[i] -= moved;
        y[target] += moved;
        budget -= moved;
    }
    dot(&y, v)
}

/// L∞ ball: each coordinate moves at most `β`; start every coordinate at its
/// lower limit and pour the remaining mass into the cheapest states first.
fn box_fill(row: &[f64], v: &[f64], beta: f64) -> f64 {
    let lower: Vec<f64> = row.iter().map(|&x| (x - beta).max(0.0)).collect();
    let upper: Vec<f64> = row.iter().map(|&x| (x + beta).min(1.0)).collect();
    let mut y = lower.clone();
    let mut left = 1.0 - lower.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite"));
    for i in order {
        if left <= 0.0 {
            break;
        }
        let add = (upper[i] - lower[i]).min(left);
        y[i] += add;
        left -= add;
    }
    dot(&y, v)
}

fn general_search(row: &[f64], v: &[f64], beta: f64, p: f64, cfg: &OracleConfig) -> f64 {
    let ball = Ball { center: row, radius: beta, p };
    let mut best = ball.feasible(row.to_vec());
    let mut best_value = dot(&best, v);
    let offer = |y: Vec<f64>, best: &mut Vec<f64>, best_value: &mut f64| {
        let value = dot(&y, v);
        if value < *best_value {
            *best_value = value;
            *best = y;
        }
    };

    // Rays from the nominal row towards every vertex and every pairwise
    // mass transfer, stopped at the ball boundary.
    let n = v.len();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        offer(ball.ray(&e), &mut best, &mut best_value);
        for i in 0..n {
            if i != j && row[i] > 0.0 {
                let mut y = row.to_vec();
                y[j] += row[i];
                y[i] = 0.0;
                offer(ball.ray(&y), &mut best, &mut best_value);
            }
        }
    }

    offer(lagrangian_point(&ball, v), &mut best, &mut best_value);
    for y in simplex_grid(n, cfg.resolution, cfg.grid_cap) {
        if ball.contains(&y) {
            offer(y, &mut best, &mut best_value);
        }
    }

    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vmax > 0.0 {
        let step = 0.1 / vmax;
        let mut starts = vec![row.to_vec(), best.clone()];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            starts.push(ball.ray(&e));
        }
        for start in starts.into_iter().take(cfg.pgd_starts) {
            let y = projected_gradient(&ball, v, start, step, cfg);
            offer(y, &mut best, &mut best_value);
        }
    }
    best_value
}

struct Ball<'a> {
    center: &'a [f64],
    radius: f64,
    p: f64,
}

impl Ball<'_> {
    fn distance(&self, y: &[f64]) -> f64 {
        let d: Vec<f64> = y.iter().zip(self.center).map(|(a, b)| a - b).collect();
        lp_norm(&d, self.p)
    }

    fn contains(&self, y: &[f64]) -> bool {
        self.distance(y) <= self.radius
    }

    /// Pulls a point onto the simplex and then radially into the ball.
    fn feasible(&self, y: Vec<f64>) -> Vec<f64> {
        let mut y = project_simplex(&y);
        let mut scale = 1.0;
        for _ in 0..60 {
            let d = self.distance(&y);
            if d <= self.radius {
                return y;
            }
            scale = self.radius / d * (1.0 - 1e-14);
            y = y
                .iter()
                .zip(self.center)
                .map(|(&a, &c)| (c + scale * (a - c)).max(0.0))
                .collect();
        }
        debug_assert!(scale >= 0.0);
        self.center.to_vec()
    }

    /// Furthest point of the segment from the center towards `target` (a
    /// simplex point) that stays in the ball.
    fn ray(&self, target: &[f64]) -> Vec<f64> {
        let d = self.distance(target);
        let t = if d <= self.radius { 1.0 } else { self.radius / d };
        let y = self.center.iter().zip(target).map(|(&c, &x)| c + t * (x - c)).collect();
        self.feasible(y)
    }

    /// Euclidean projection onto the ball.
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = x.iter().zip(self.center).map(|(a, b)| a - b).collect();
        let norm = lp_norm(&w, self.p);
        if norm <= self.radius {
            return x.to_vec();
        }
        let d = if self.p == 2.0 {
            w.iter().map(|&wi| wi * self.radius / norm).collect()
        } else {
            project_lp_origin(&w, self.radius, self.p)
        };
        self.center.iter().zip(d).map(|(c, di)| c + di).collect()
    }
}

/// Euclidean projection of `w` onto `{‖d‖_p ≤ r}` for `1 < p < ∞`, `‖w‖_p > r`.
/// Coordinatewise `g_i + λ p g_i^{p−1} = |w_i|`, with `λ` set by `‖g‖_p = r`.
fn project_lp_origin(w: &[f64], r: f64, p: f64) -> Vec<f64> {
    let magnitudes = |lambda: f64| -> Vec<f64> {
        w.iter()
            .map(|&wi| {
                let a = wi.abs();
                if a == 0.0 {
                    return 0.0;
                }
                let h = |g: f64| g + lambda * p * g.powf(p - 1.0) - a;
                brent_root(h, 0.0, a, -a, h(a), 1e-16 * a, 200).x
            })
            .collect()
    };
    let excess = |t: f64| lp_norm(&magnitudes(t.exp()), p) - r;
    let (mut lo, mut hi) = (-1.0, 1.0);
    let (mut flo, mut fhi) = (excess(lo), excess(hi));
    while flo < 0.0 && lo > -700.0 {
        lo -= 4.0;
        flo = excess(lo);
    }
    while fhi > 0.0 && hi < 700.0 {
        hi += 4.0;
        fhi = excess(hi);
    }
    let t = brent_root(excess, lo, hi, flo, fhi, 1e-14, 200).x;
    let g = magnitudes(t.exp());
    w.iter().zip(g).map(|(&wi, gi)| gi.copysign(wi)).collect()
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if x - candidate > 0.0 {
            theta = candidate;
        }
    }
    y.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Dykstra's alternating projections onto `Δ ∩ ball`, then made feasible.
fn project_feasible(ball: &Ball, z: &[f64], rounds: usize) -> Vec<f64> {
    let n = z.len();
    let mut x = z.to_vec();
    let mut pa = vec![0.0; n];
    let mut pb = vec![0.0; n];
    for _ in 0..rounds {
        let shifted: Vec<f64> = x.iter().zip(&pa).map(|(a, b)| a + b).collect();
        let y = project_simplex(&shifted);
        pa = shifted.iter().zip(&y).map(|(a, b)| a - b).collect();
        let shifted: Vec<f64> = y.iter().zip(&pb).map(|(a, b)| a + b).collect();
        let next = ball.project(&shifted);
        pb = shifted.iter().zip(&next).map(|(a, b)| a - b).collect();
        let moved = sup_distance(&next, &x);
        x = next;
        if moved < 1e-15 {
            break;
        }
    }
    ball.feasible(x)
}

fn projected_gradient(ball: &Ball, v: &[f64], start: Vec<f64>, step: f64, cfg: &OracleConfig) -> Vec<f64> {
    let mut y = start;
    let mut value = dot(&y, v);
    let mut best = (value, y.clone());
    for _ in 0..cfg.pgd_iters {
        let z: Vec<f64> = y.iter().zip(v).map(|(a, b)| a - step * b).collect();
        let next = project_feasible(ball, &z, cfg.projection_rounds);
        let next_value = dot(&next, v);
        let moved = sup_distance(&next, &y);
        y = next;
        if next_value < best.0 {
            best = (next_value, y.clone());
        }
        if moved < 1e-13 || (value - next_value).abs() < 1e-15 {
            break;
        }
        value = next_value;
    }
    best.1
}

/// Penalized relaxation `min_{y∈Δ} y·V + λ‖y − P‖_p^p`, with `λ` tuned so
/// the minimizer sits on the ball boundary. Each coordinate minimizes in
/// closed form given the multiplier `ν` of `Σy = 1`.
fn lagrangian_point(ball: &Ball, v: &[f64]) -> Vec<f64> {
    let p = ball.p;
    let row = ball.center;
    let minimizer = |lambda: f64| -> Vec<f64> {
        let coord = |nu: f64, i: usize| {
            let x = (nu - v[i]) / (lambda * p);
            (row[i] + x.abs().powf(1.0 / (p - 1.0)).copysign(x)).max(0.0)
        };
        let mass = |nu: f64| (0..v.len()).map(|i| coord(nu, i)).sum::<f64>() - 1.0;
        let (vmin, vmax) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let lo = vmin - lambda * p;
        let hi = vmax + lambda * p;
        let nu = brent_root(mass, lo, hi, mass(lo), mass(hi), 1e-15 * (1.0 + hi.abs()), 300).x;
        (0..v.len()).map(|i| coord(nu, i)).collect()
    };
    let excess = |t: f64| ball.distance(&project_simplex(&minimizer(t.exp()))) - ball.radius;
    let (mut lo, mut hi) = (-2.0, 2.0);
    let (mut flo, mut fhi) = (excess(lo), excess(hi));
    while flo < 0.0 && lo > -600.0 {
        hi = lo;
        fhi = flo;
        lo -= 8.0;
        flo = excess(lo);
    }
    while fhi > 0.0 && hi < 600.0 {
        lo = hi;
        flo = fhi;
        hi += 8.0;
        fhi = excess(hi);
    }
    if flo < 0.0 {
        // even the unpenalized optimum fits in the ball
        return ball.feasible(minimizer(lo.exp()));
    }
    let t = brent_root(excess, lo, hi, flo, fhi, 1e-13, 300).x;
    ball.feasible(minimizer(t.exp()))
}

/// Simplex points with coordinates on a `1/K` lattice, `K ≤ 1/resolution`,
/// with `K` lowered until the lattice has at most `cap` points.
fn simplex_grid(n: usize, resolution: f64, cap: usize) -> Vec<Vec<f64>> {
    let mut k = (1.0 / resolution).round().max(1.0) as usize;
    while k > 1 && lattice_size(n, k) > cap {
        k = k * 9 / 10;
    }
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    fill_lattice(n, k, 0, k, &mut current, &mut out);
    out
}

fn lattice_size(n: usize, k: usize) -> usize {
    // C(k + n − 1, n − 1), saturating
    let mut acc: f64 = 1.0;
    for i in 1..n {
        acc = acc * (k + i) as f64 / i as f64;
    }
    acc.min(usize::MAX as f64) as usize
}

fn fill_lattice(n: usize, k: usize, idx: usize, left: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
    if idx == n - 1 {
        current[idx] = left;
        out.push(current.iter().map(|&c| c as f64 / k as f64).collect());
        return;
    }
    for c in 0..=left {
        current[idx] = c;
        fill_lattice(n, k, idx + 1, left - c, current, out);
    }
}

/// Fixed point of the policy operator with every inner minimum replaced by
/// [`brute_kappa`].
pub fn brute_robust_value(
    m: &TabularMdp<f64>,
    u: &UncertaintySpec<f64>,
    pi: &Policy<f64>,
    resolution: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    brute_robust_value_from(m, u, pi, &OracleConfig::with_resolution(resolution), tol, None)
}

/// [`brute_robust_value`] with an explicit search budget and an optional
/// starting point for the iteration. The start only affects speed.
pub fn brute_robust_value_from(
    m: &TabularMdp<f64>,
    u: &UncertaintySpec<f64>,
    pi: &Policy<f64>,
    cfg: &OracleConfig,
    tol: f64,
    start: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let (ns, na) = (m.num_states(), m.num_actions());
    if ns > MAX_MODEL_STATES {
        return Err(RmdpError::TooManyStates {
            limit: MAX_MODEL_STATES,
            got: ns,
        });
    }
    if na > MAX_MODEL_ACTIONS {
        return Err(RmdpError::InvalidArgument(format!(
            "oracle limited to {MAX_MODEL_ACTIONS} actions, got {na}"
        )));
    }
    if pi.num_states() != ns || pi.num_actions() != na {
        return Err(RmdpError::ShapeMismatch);
    }
    let gamma = m.discount();
    let p = u.exponent().p();
    let q = u.exponent().q();
    let mut v = start.map_or_else(|| vec![0.0; ns], <[f64]>::to_vec);
    for _ in 0..crate::bellman::DEFAULT_MAX_ITER {
        let mut next = vec![0.0; ns];
        for (s, out) in next.iter_mut().enumerate() {
            let pi_s = pi.row(s);
            *out = match u.mode() {
                Rectangularity::Sa => {
                    let mut total = 0.0;
                    for (a, &w) in pi_s.iter().enumerate() {
                        if w > 0.0 {
                            let k = brute_kappa_with(m.row(s, a), &v, u.beta(s, a), p, cfg)?;
                            total += w * (m.reward(s, a) - u.alpha(s, a) + gamma * k);
                        }
                    }
                    total
                }
                Rectangularity::S => {
                    let mut mixed = vec![0.0; ns];
                    let mut reward = 0.0;
                    for (a, &w) in pi_s.iter().enumerate() {
                        reward += w * m.reward(s, a);
                        for (o, &x) in mixed.iter_mut().zip(m.row(s, a)) {
                            *o += w * x;
                        }
                    }
                    let norm = lp_norm(pi_s, q);
                    let k = brute_kappa_with(&mixed, &v, u.beta(s, 0) * norm, p, cfg)?;
                    reward - norm * u.alpha(s, 0) + gamma * k
                }
            };
        }
        let delta = sup_distance(&next, &v);
        v = next;
        if 2.0 * gamma * delta <= tol * (1.0 - gamma) {
            return Ok(v);
        }
    }
    Err(RmdpError::NonConvergence(crate::bellman::DEFAULT_MAX_ITER))
}

/// Best deterministic policy by enumeration, each evaluated with
/// [`brute_robust_value`]. Picks the policy with the largest value sum; the
/// optimal one dominates every other state by state.
pub fn exhaustive_sa_optimum(
    m: &TabularMdp<f64>,
    u: &UncertaintySpec<f64>,
    resolution: f64,
) -> Result<(Policy<f64>, Vec<f64>)> {
    if u.mode() != Rectangularity::Sa {
        return Err(RmdpError::ModeMismatch {
            expected: "sa",
            got: u.mode().name(),
        });
    }
    let (ns, na) = (m.num_states(), m.num_actions());
    let count = (na as f64).powi(ns as i32);
    if count > MAX_POLICIES as f64 {
        return Err(RmdpError::TooManyPolicies {
            limit: MAX_POLICIES,
            got: count as usize,
        });
    }
    let cfg = OracleConfig::with_resolution(resolution);
    let mut best: Option<(f64, Policy<f64>, Vec<f64>)> = None;
    for code in 0..count as usize {
        let actions: Vec<usize> = (0..ns).map(|s| code / na.pow(s as u32) % na).collect();
        let pi = Policy::deterministic(&actions, na);
        let v = brute_robust_value_from(m, u, &pi, &cfg, 1e-7, None)?;
        let total: f64 = v.iter().sum();
        if best.as_ref().map_or(true, |b| total > b.0) {
            best = Some((total, pi, v));
        }
    }
    let (_, pi, v) = best.expect("at least one policy");
    Ok((pi, v))
}

/// Non-robust value iteration on the nominal model; returns the optimal
/// values and a greedy deterministic policy.
pub fn classical_value_iteration(m: &TabularMdp<f64>, tol: f64) -> Result<(Vec<f64>, Policy<f64>)> {
    let (ns, na) = (m.num_states(), m.num_actions());
    let gamma = m.discount();
    let mut v = vec![0.0; ns];
    for _ in 0..crate::bellman::DEFAULT_MAX_ITER {
        let q: Vec<Vec<f64>> = (0..ns)
            .map(|s| (0..na).map(|a| m.reward(s, a) + gamma * dot(m.row(s, a), &v)).collect())
            .collect();
        let next: Vec<f64> = q.iter().map(|row| row[argmax(row)]).collect();
        let delta = sup_distance(&next, &v);
        v = next;
        if 2.0 * gamma * delta <= tol * (1.0 - gamma) {
            let actions: Vec<usize> = q.iter().map(|row| argmax(row)).collect();
            return Ok((v, Policy::deterministic(&actions, na)));
        }
    }
    Err(RmdpError::NonConvergence(crate::bellman::DEFAULT_MAX_ITER))
}

/// Non-robust policy evaluation on the nominal model by direct iteration.
pub fn classical_policy_value(m: &TabularMdp<f64>, pi: &Policy<f64>, tol: f64) -> Result<Vec<f64>> {
    let nominal = UncertaintySpec::nominal(Rectangularity::Sa, m.num_states(), m.num_actions());
    brute_robust_value_from(m, &nominal, pi, &OracleConfig::default(), tol, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_radius() {
        let r = brute_kappa(&[0.2, 0.8], &[1.0, 3.0], 0.0, 2.0, 1e-3).unwrap();
        assert!((r - 2.6).abs() < 1e-15);
    }

    #[test]
    fn l1_full_simplex() {
        let r = brute_kappa(&[0.3, 0.3, 0.4], &[2.0, -1.0, 5.0], 2.0, 1.0, 1e-3).unwrap();
        assert_eq!(r, -1.0);
    }

    #[test]
    fn two_state_general_p() {
        // moving t units costs t·2^{1/p}
        for p in [1.5, 2.0, 3.0] {
            let beta: f64 = 0.2;
            let t = beta / 2f64.powf(1.0 / p);
            let r = brute_kappa(&[0.5, 0.5], &[0.0, 1.0], beta, p, 1e-3).unwrap();
            assert!((r - (0.5 - t)).abs() < 1e-9, "p={p}: {r}");
        }
    }

    #[test]
    fn sandwich_and_monotone() {
        let row = [1.0 / 3.0; 3];
        let v = [0.0, 1.0, 2.0];
        let mut last = 1.0 + 1e-12;
        for beta in [0.05, 0.1, 0.2, 0.4] {
            let r = brute_kappa(&row, &v, beta, 2.0, 1e-3).unwrap();
            assert!(r <= last && r >= 0.0);
            last = r;
        }
    }

    #[test]
    fn simplex_projection() {
        let y = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(y.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn guards() {
        assert!(matches!(
            brute_kappa(&[0.1; 7], &[0.0; 7], 0.1, 2.0, 1e-3),
            Err(RmdpError::TooManyStates { limit: 6, got: 7 })
        ));
    }
}
