//! Generative-model sampling and the empirical model built from it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, RmdpError};
use crate::model::{EmpiricalModel, TabularMdp, UncertaintySpec};
use crate::scalar::Scalar;

/// Draws `s′ ~ P₀(· | s, a)` by inverse CDF on one uniform draw.
pub fn sample_next<T: Scalar, R: Rng + ?Sized>(m: &TabularMdp<T>, s: usize, a: usize, rng: &mut R) -> usize {
    let row = m.row(s, a);
    let draw: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (next, &prob) in row.iter().enumerate() {
        let prob = prob.as_f64();
        if prob > 0.0 {
            last_positive = next;
        }
        cumulative += prob;
        if draw < cumulative {
            return next;
        }
    }
    // rounding left the cumulative sum just below one
    last_positive
}

/// Independent random stream of the pair `(s, a)` under `seed`.
pub fn pair_stream(seed: u64, s: usize, a: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((s as u64) << 32) | a as u64);
    rng
}

/// Calls the sampler `n` times on every pair and counts outcomes. Each pair
/// draws from its own keyed stream, so the result does not depend on the
/// order (or parallelism) in which pairs are visited.
pub fn build_empirical<T: Scalar>(m: &TabularMdp<T>, n: u64, seed: u64) -> Result<EmpiricalModel<T>> {
    if n == 0 {
        return Err(RmdpError::InvalidArgument("N must be at least 1".into()));
    }
    let (ns, na) = (m.num_states(), m.num_actions());
    let count_pair = |pair: usize| {
        let (s, a) = (pair / na, pair % na);
        let mut rng = pair_stream(seed, s, a);
        let mut counts = vec![0u64; ns];
        for _ in 0..n {
            counts[sample_next(m, s, a, &mut rng)] += 1;
        }
        counts
    };
    let pairs = ns * na;
    let per_pair: Vec<Vec<u64>> = if (n as usize).saturating_mul(pairs) >= 1 << 16 {
        (0..pairs).into_par_iter().map(count_pair).collect()
    } else {
        (0..pairs).map(count_pair).collect()
    };
    EmpiricalModel::from_counts(ns, na, n, per_pair.concat())
}

/// The nominal model with its kernel replaced by the empirical estimate.
pub fn empirical_rmdp<T: Scalar>(
    m: &TabularMdp<T>,
    emp: &EmpiricalModel<T>,
    u: &UncertaintySpec<T>,
) -> Result<TabularMdp<T>> {
    if emp.num_states() != m.num_states() || emp.num_actions() != m.num_actions() {
        return Err(RmdpError::ShapeMismatch);
    }
    u.check_dims(m).map_err(|_| RmdpError::ShapeMismatch)?;
    Ok(m.with_kernel(emp.kernel_hat.clone()))
}
