//! Library side of the `lp-rmdp` command-line tool: the sample-complexity
//! experiment and the randomized verification suites.

pub mod experiment;
pub mod verify;

use anyhow::Result;
use lp_rmdp::model::Exponent;
use lp_rmdp::{Rectangularity, Uncertainty};

/// Uncertainty settings given on the command line; unset fields keep the
/// model file's values.
#[derive(Debug, Clone, Default)]
pub struct UncertaintyOverrides {
    pub mode: Option<Rectangularity>,
    pub p: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
}

impl UncertaintyOverrides {
    pub fn is_empty(&self) -> bool {
        self.mode.is_none() && self.p.is_none() && self.beta.is_none() && self.alpha.is_none()
    }

    pub fn apply(&self, base: &Uncertainty, num_states: usize, num_actions: usize) -> Result<Uncertainty> {
        let mode = self.mode.unwrap_or(base.mode());
        let base = base.with_mode(mode, num_states)?;
        let len = base.betas().len();
        let p = self.p.unwrap_or(base.exponent().p());
        let beta = self.beta.map_or_else(|| base.betas().to_vec(), |b| vec![b; len]);
        let alpha = self.alpha.map_or_else(|| base.alphas().to_vec(), |a| vec![a; len]);
        Ok(Uncertainty::new(mode, Exponent::new(p)?, num_states, num_actions, beta, alpha)?)
    }
}
