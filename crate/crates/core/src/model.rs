//! Domain types: the nominal MDP, the uncertainty specification, policies,
//! Q-functions and the empirical model built from generative samples.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RmdpError};
use crate::scalar::{lp_norm, Scalar};

/// Tolerance used when checking that input rows are probability vectors.
pub fn stochastic_tolerance<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(16.0))
}

/// Unvalidated model parts, as read from a file or assembled by hand.
///
/// `kernel[s][a]` is the next-state distribution of the pair `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMdp<T> {
    pub num_states: usize,
    pub num_actions: usize,
    pub kernel: Vec<Vec<Vec<T>>>,
    pub reward: Vec<Vec<T>>,
    pub discount: T,
    pub initial_dist: Vec<T>,
}

/// Checks every [`TabularMdp`] invariant and reports all violations at once.
pub fn validate_mdp<T: Scalar>(raw: &RawMdp<T>) -> Result<()> {
    let tol = stochastic_tolerance::<T>();
    let mut errors = Vec::new();
    let (ns, na) = (raw.num_states, raw.num_actions);
    if ns == 0 || na == 0 {
        return Err(RmdpError::InvalidArgument(
            "num_states and num_actions must be positive".into(),
        ));
    }
    if raw.kernel.len() != ns {
        return Err(RmdpError::DimensionMismatch {
            expected: ns,
            got: raw.kernel.len(),
        });
    }
    for (s, rows) in raw.kernel.iter().enumerate() {
        if rows.len() != na {
            return Err(RmdpError::DimensionMismatch {
                expected: na,
                got: rows.len(),
            });
        }
        for (a, row) in rows.iter().enumerate() {
            if row.len() != ns {
                return Err(RmdpError::DimensionMismatch {
                    expected: ns,
                    got: row.len(),
                });
            }
            let sum: T = row.iter().copied().sum();
            let residual = (sum - T::one()).abs();
            let negative = row.iter().any(|&x| x < T::zero() || !x.is_finite());
            if negative || !(residual <= tol) {
                errors.push(RmdpError::NonStochasticRow {
                    state: s,
                    action: a,
                    residual: residual.as_f64(),
                });
            }
        }
    }
    if raw.reward.len() != ns {
        return Err(RmdpError::DimensionMismatch {
            expected: ns,
            got: raw.reward.len(),
        });
    }
    for (s, rewards) in raw.reward.iter().enumerate() {
        if rewards.len() != na {
            return Err(RmdpError::DimensionMismatch {
                expected: na,
                got: rewards.len(),
            });
        }
        for (a, &r) in rewards.iter().enumerate() {
            if !(r >= T::zero() && r <= T::one()) {
                errors.push(RmdpError::RewardOutOfRange {
                    state: s,
                    action: a,
                    value: r.as_f64(),
                });
            }
        }
    }
    if !(raw.discount >= T::zero() && raw.discount < T::one()) {
        errors.push(RmdpError::BadDiscount(raw.discount.as_f64()));
    }
    if raw.initial_dist.len() != ns {
        return Err(RmdpError::DimensionMismatch {
            expected: ns,
            got: raw.initial_dist.len(),
        });
    }
    let mu_sum: T = raw.initial_dist.iter().copied().sum();
    let mu_residual = (mu_sum - T::one()).abs();
    if raw.initial_dist.iter().any(|&x| x < T::zero()) || !(mu_residual <= tol) {
        errors.push(RmdpError::BadInitialDistribution(mu_residual.as_f64()));
    }
    match errors.len() {
        0 => Ok(()),
        1 => Err(errors.pop().expect("one error")),
        n => Err(RmdpError::Invalid(n, errors)),
    }
}

/// A validated tabular MDP `(S, A, P₀, R₀, γ, μ)`.
///
/// Kernel rows are renormalized once at construction, so downstream code
/// sees rows that sum to one up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<T> {
    num_states: usize,
    num_actions: usize,
    kernel: Vec<T>,
    reward: Vec<T>,
    discount: T,
    initial_dist: Vec<T>,
}

impl<T: Scalar> TabularMdp<T> {
    pub fn new(raw: RawMdp<T>) -> Result<Self> {
        validate_mdp(&raw)?;
        let (ns, na) = (raw.num_states, raw.num_actions);
        let mut kernel = Vec::with_capacity(ns * na * ns);
        for rows in &raw.kernel {
            for row in rows {
                let sum: T = row.iter().copied().sum();
                kernel.extend(row.iter().map(|&x| x / sum));
            }
        }
        let mu_sum: T = raw.initial_dist.iter().copied().sum();
        Ok(Self {
            num_states: ns,
            num_actions: na,
            kernel,
            reward: raw.reward.into_iter().flatten().collect(),
            discount: raw.discount,
            initial_dist: raw.initial_dist.into_iter().map(|x| x / mu_sum).collect(),
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    /// Effective horizon `1/(1−γ)`.
    pub fn horizon(&self) -> T {
        (T::one() - self.discount).recip()
    }

    /// Nominal next-state distribution of `(s, a)`.
    pub fn row(&self, s: usize, a: usize) -> &[T] {
        let n = self.num_states;
        let start = (s * self.num_actions + a) * n;
        &self.kernel[start..start + n]
    }

    pub fn reward(&self, s: usize, a: usize) -> T {
        self.reward[s * self.num_actions + a]
    }

    pub fn initial_dist(&self) -> &[T] {
        &self.initial_dist
    }

    /// Copy of this model with the kernel replaced. Rows must already be
    /// validated probability vectors of the right shape.
    pub(crate) fn with_kernel(&self, kernel: Vec<T>) -> Self {
        debug_assert_eq!(kernel.len(), self.kernel.len());
        Self {
            kernel,
            ..self.clone()
        }
    }

    pub fn to_raw(&self) -> RawMdp<T> {
        let (ns, na) = (self.num_states, self.num_actions);
        RawMdp {
            num_states: ns,
            num_actions: na,
            kernel: (0..ns)
                .map(|s| (0..na).map(|a| self.row(s, a).to_vec()).collect())
                .collect(),
            reward: (0..ns)
                .map(|s| (0..na).map(|a| self.reward(s, a)).collect())
                .collect(),
            discount: self.discount,
            initial_dist: self.initial_dist.clone(),
        }
    }
}

/// Garnet-style random MDP: Dirichlet(1) kernel rows, uniform rewards in
/// `[0, 1)`, uniform initial distribution. Deterministic for a given seed.
pub fn random_mdp<T: Scalar>(
    num_states: usize,
    num_actions: usize,
    discount: T,
    seed: u64,
) -> Result<TabularMdp<T>> {
    if num_states == 0 || num_actions == 0 {
        return Err(RmdpError::InvalidArgument(
            "num_states and num_actions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernel = (0..num_states)
        .map(|_| {
            (0..num_actions)
                .map(|_| {
                    // exponential draws normalised to the simplex
                    let draws: Vec<f64> = (0..num_states)
                        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + f64::MIN_POSITIVE)
                        .collect();
                    let total: f64 = draws.iter().sum();
                    draws.iter().map(|&x| T::lit(x / total)).collect()
                })
                .collect()
        })
        .collect();
    let reward = (0..num_states)
        .map(|_| (0..num_actions).map(|_| T::lit(rng.gen::<f64>())).collect())
        .collect();
    TabularMdp::new(RawMdp {
        num_states,
        num_actions,
        kernel,
        reward,
        discount,
        initial_dist: vec![T::from_count(num_states).recip(); num_states],
    })
}

/// Rectangularity of the uncertainty set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rectangularity {
    /// One ball per state-action pair.
    Sa,
    /// One ball per state, shared by all actions.
    S,
}

impl Rectangularity {
    pub fn name(self) -> &'static str {
        match self {
            Rectangularity::Sa => "sa",
            Rectangularity::S => "s",
        }
    }
}

/// Ball exponent `p ∈ [1, ∞]`. The Hölder conjugate `q` is always derived,
/// never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent<T>(T);

impl<T: Scalar> Exponent<T> {
    pub fn new(p: T) -> Result<Self> {
        if p.is_nan() || p < T::one() {
            return Err(RmdpError::BadExponent(p.as_f64()));
        }
        Ok(Self(p))
    }

    pub fn infinity() -> Self {
        Self(T::infinity())
    }

    pub fn p(self) -> T {
        self.0
    }

    /// Conjugate exponent, `1/p + 1/q = 1`.
    pub fn q(self) -> T {
        conjugate(self.0)
    }

    pub fn is_one(self) -> bool {
        self.0 == T::one()
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

/// Hölder conjugate of an exponent in `[1, ∞]`.
pub fn conjugate<T: Scalar>(p: T) -> T {
    if p == T::one() {
        T::infinity()
    } else if p.is_infinite() {
        T::one()
    } else {
        p / (p - T::one())
    }
}

/// L_p uncertainty around the nominal model: kernel radii `beta` and
/// reward radii `alpha`, indexed per `(s, a)` or per `s` depending on `mode`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySpec<T> {
    mode: Rectangularity,
    exponent: Exponent<T>,
    beta: Vec<T>,
    alpha: Vec<T>,
    num_actions: usize,
}

impl<T: Scalar> UncertaintySpec<T> {
    /// Builds a spec from explicit radius arrays. Arrays have length `S·A`
    /// (row-major) in sa mode and `S` in s mode.
    pub fn new(
        mode: Rectangularity,
        exponent: Exponent<T>,
        num_states: usize,
        num_actions: usize,
        beta: Vec<T>,
        alpha: Vec<T>,
    ) -> Result<Self> {
        let expected = match mode {
            Rectangularity::Sa => num_states * num_actions,
            Rectangularity::S => num_states,
        };
        for radii in [&beta, &alpha] {
            if radii.len() != expected {
                return Err(RmdpError::DimensionMismatch {
                    expected,
                    got: radii.len(),
                });
            }
            if let Some(&bad) = radii.iter().find(|&&r| !(r >= T::zero() && r.is_finite())) {
                return Err(RmdpError::NegativeBeta(bad.as_f64()));
            }
        }
        Ok(Self {
            mode,
            exponent,
            beta,
            alpha,
            num_actions,
        })
    }

    /// Uniform radii broadcast over every pair (sa) or state (s).
    pub fn uniform(
        mode: Rectangularity,
        p: T,
        num_states: usize,
        num_actions: usize,
        beta: T,
        alpha: T,
    ) -> Result<Self> {
        let len = match mode {
            Rectangularity::Sa => num_states * num_actions,
            Rectangularity::S => num_states,
        };
        Self::new(
            mode,
            Exponent::new(p)?,
            num_states,
            num_actions,
            vec![beta; len],
            vec![alpha; len],
        )
    }

    /// No uncertainty at all; every robust operator reduces to the nominal one.
    pub fn nominal(mode: Rectangularity, num_states: usize, num_actions: usize) -> Self {
        Self::uniform(mode, T::one(), num_states, num_actions, T::zero(), T::zero())
            .expect("zero radii are valid")
    }

    pub fn mode(&self) -> Rectangularity {
        self.mode
    }

    pub fn exponent(&self) -> Exponent<T> {
        self.exponent
    }

    /// Kernel radius of pair `(s, a)` in sa mode, of state `s` in s mode.
    pub fn beta(&self, s: usize, a: usize) -> T {
        match self.mode {
            Rectangularity::Sa => self.beta[s * self.num_actions + a],
            Rectangularity::S => self.beta[s],
        }
    }

    pub fn alpha(&self, s: usize, a: usize) -> T {
        match self.mode {
            Rectangularity::Sa => self.alpha[s * self.num_actions + a],
            Rectangularity::S => self.alpha[s],
        }
    }

    /// Aggregate radius `sup β`.
    pub fn max_beta(&self) -> T {
        self.beta.iter().copied().fold(T::zero(), T::max)
    }

    pub fn max_alpha(&self) -> T {
        self.alpha.iter().copied().fold(T::zero(), T::max)
    }

    pub fn betas(&self) -> &[T] {
        &self.beta
    }

    pub fn alphas(&self) -> &[T] {
        &self.alpha
    }

    /// Same radii under a different rectangularity. Only meaningful when the
    /// radii are uniform or the model has a single action.
    pub fn with_mode(&self, mode: Rectangularity, num_states: usize) -> Result<Self> {
        if mode == self.mode {
            return Ok(self.clone());
        }
        let na = self.num_actions;
        let (beta, alpha) = match mode {
            Rectangularity::S => (
                (0..num_states).map(|s| self.beta(s, 0)).collect(),
                (0..num_states).map(|s| self.alpha(s, 0)).collect(),
            ),
            Rectangularity::Sa => (
                (0..num_states * na).map(|i| self.beta[i / na]).collect(),
                (0..num_states * na).map(|i| self.alpha[i / na]).collect(),
            ),
        };
        Self::new(mode, self.exponent, num_states, na, beta, alpha)
    }

    pub(crate) fn check_dims(&self, m: &TabularMdp<T>) -> Result<()> {
        let expected = match self.mode {
            Rectangularity::Sa => m.num_states() * m.num_actions(),
            Rectangularity::S => m.num_states(),
        };
        if self.beta.len() != expected || self.num_actions != m.num_actions() {
            return Err(RmdpError::DimensionMismatch {
                expected,
                got: self.beta.len(),
            });
        }
        Ok(())
    }
}

/// Stationary stochastic policy; every row lies in the simplex over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    num_actions: usize,
    probs: Vec<T>,
}

impl<T: Scalar> Policy<T> {
    /// Validates rows (non-negative, summing to one within tolerance) and
    /// renormalizes them.
    pub fn new(num_states: usize, num_actions: usize, mut probs: Vec<T>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(RmdpError::DimensionMismatch {
                expected: num_states * num_actions,
                got: probs.len(),
            });
        }
        let tol = stochastic_tolerance::<T>();
        for (s, row) in probs.chunks_mut(num_actions).enumerate() {
            check_simplex_row(row, tol).map_err(|_| RmdpError::NonSimplexPolicyRow(s))?;
            let sum: T = row.iter().copied().sum();
            row.iter_mut().for_each(|x| *x = *x / sum);
        }
        Ok(Self { num_actions, probs })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let ns = rows.len();
        let na = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != na) {
            return Err(RmdpError::ShapeMismatch);
        }
        Self::new(ns, na, rows.into_iter().flatten().collect())
    }

    pub fn deterministic(actions: &[usize], num_actions: usize) -> Self {
        let mut probs = vec![T::zero(); actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * num_actions + a] = T::one();
        }
        Self { num_actions, probs }
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            probs: vec![T::from_count(num_actions).recip(); num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> T {
        self.probs[s * self.num_actions + a]
    }

    /// The action taken with probability one in every state, if any.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        (0..self.num_states())
            .map(|s| self.row(s).iter().position(|&x| x == T::one()))
            .collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.as_deterministic().is_some()
    }

    /// Hölder `q`-norm of the action distribution at `s`.
    pub fn row_norm(&self, s: usize, q: T) -> T {
        lp_norm(self.row(s), q)
    }
}

pub(crate) fn check_simplex_row<T: Scalar>(row: &[T], tol: T) -> Result<()> {
    let sum: T = row.iter().copied().sum();
    if row.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) || !((sum - T::one()).abs() <= tol)
    {
        return Err(RmdpError::InvalidArgument("row is not in the simplex".into()));
    }
    Ok(())
}

/// Action values indexed by `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction<T> {
    num_actions: usize,
    values: Vec<T>,
}

impl<T: Scalar> QFunction<T> {
    pub fn new(num_actions: usize, values: Vec<T>) -> Self {
        assert!(num_actions > 0 && values.len() % num_actions == 0);
        Self {
            num_actions,
            values,
        }
    }

    pub fn get(&self, s: usize, a: usize) -> T {
        self.values[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Greedy action per state, lowest index on ties.
    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..self.num_states()).map(|s| argmax(self.row(s))).collect()
    }

    /// `‖self − other‖_∞`.
    pub fn sup_distance(&self, other: &Self) -> T {
        crate::scalar::sup_distance(&self.values, &other.values)
    }
}

/// Index of the first maximal entry.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Transition counts from `N` generative-model calls per pair and the
/// resulting maximum-likelihood kernel `count/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel<T> {
    pub(crate) num_states: usize,
    pub(crate) num_actions: usize,
    pub(crate) samples_per_pair: u64,
    pub(crate) counts: Vec<u64>,
    pub(crate) kernel_hat: Vec<T>,
}

impl<T: Scalar> EmpiricalModel<T> {
    /// Builds the model from raw counts laid out `[s][a][s']`; every pair must
    /// have exactly `samples_per_pair` counts.
    pub fn from_counts(
        num_states: usize,
        num_actions: usize,
        samples_per_pair: u64,
        counts: Vec<u64>,
    ) -> Result<Self> {
        if samples_per_pair == 0 {
            return Err(RmdpError::InvalidArgument("N must be at least 1".into()));
        }
        if counts.len() != num_states * num_actions * num_states {
            return Err(RmdpError::ShapeMismatch);
        }
        if counts
            .chunks(num_states)
            .any(|row| row.iter().sum::<u64>() != samples_per_pair)
        {
            return Err(RmdpError::InvalidArgument(
                "every pair must have exactly N samples".into(),
            ));
        }
        let n = T::lit(samples_per_pair as f64);
        let kernel_hat = counts.iter().map(|&c| T::lit(c as f64) / n).collect();
        Ok(Self {
            num_states,
            num_actions,
            samples_per_pair,
            counts,
            kernel_hat,
        })
    }

    pub fn samples_per_pair(&self) -> u64 {
        self.samples_per_pair
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn counts(&self, s: usize, a: usize) -> &[u64] {
        let n = self.num_states;
        let start = (s * self.num_actions + a) * n;
        &self.counts[start..start + n]
    }

    pub fn kernel_hat(&self, s: usize, a: usize) -> &[T] {
        let n = self.num_states;
        let start = (s * self.num_actions + a) * n;
        &self.kernel_hat[start..start + n]
    }

    /// Exact estimate `count/N` of one row.
    pub fn rational_row(&self, s: usize, a: usize) -> Vec<Ratio<u64>> {
        self.counts(s, a)
            .iter()
            .map(|&c| Ratio::new(c, self.samples_per_pair))
            .collect()
    }

    /// Total number of sampler calls, `N·|S|·|A|`.
    pub fn total_samples(&self) -> u64 {
        self.samples_per_pair * (self.num_states * self.num_actions) as u64
    }
}
