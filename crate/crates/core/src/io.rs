//! JSON model files: the nominal MDP plus an `uncertainty` block.
//!
//! ```json
//! {
//!   "num_states": 2, "num_actions": 1, "discount": 0.9,
//!   "kernel": [[[0.5, 0.5]], [[0.0, 1.0]]],
//!   "reward": [[0.0], [1.0]],
//!   "initial_dist": [1.0, 0.0],
//!   "uncertainty": {"mode": "sa", "p": 2, "beta": 0.1, "alpha": 0.0}
//! }
//! ```
//!
//! `p` may be a number or the string `"inf"`. `beta` and `alpha` may be a
//! scalar (broadcast), a flat array, or an `[s][a]` nested array in sa mode;
//! `alpha` defaults to zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::RmdpError;
use crate::model::{Exponent, RawMdp, Rectangularity, TabularMdp, UncertaintySpec};

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(#[from] RmdpError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub discount: f64,
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_dist: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintyFile {
    pub mode: String,
    pub p: ExponentValue,
    #[serde(default)]
    pub beta: Radii,
    #[serde(default)]
    pub alpha: Radii,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentValue {
    Number(f64),
    Text(String),
}

impl ExponentValue {
    pub fn from_p(p: f64) -> Self {
        if p.is_infinite() {
            ExponentValue::Text("inf".into())
        } else {
            ExponentValue::Number(p)
        }
    }

    pub fn value(&self) -> Result<f64, RmdpError> {
        match self {
            ExponentValue::Number(p) => Ok(*p),
            ExponentValue::Text(t) => parse_exponent(t),
        }
    }
}

/// Parses `p` from text; accepts `inf`, `infinity` and `∞`.
pub fn parse_exponent(text: &str) -> Result<f64, RmdpError> {
    let t = text.trim().to_ascii_lowercase();
    match t.as_str() {
        "inf" | "+inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => t
            .parse::<f64>()
            .map_err(|_| RmdpError::InvalidArgument(format!("cannot parse exponent '{text}'"))),
    }
}

/// Parses a rectangularity name (`sa` or `s`).
pub fn parse_mode(text: &str) -> Result<Rectangularity, RmdpError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "sa" | "sa_rect" | "sa-rect" => Ok(Rectangularity::Sa),
        "s" | "s_rect" | "s-rect" => Ok(Rectangularity::S),
        other => Err(RmdpError::InvalidArgument(format!("unknown mode '{other}'"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Radii {
    Scalar(f64),
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

impl Default for Radii {
    fn default() -> Self {
        Radii::Scalar(0.0)
    }
}

impl Radii {
    /// Expands to the `len` entries the mode expects.
    pub fn expand(&self, len: usize) -> Result<Vec<f64>, RmdpError> {
        let flat = match self {
            Radii::Scalar(x) => return Ok(vec![*x; len]),
            Radii::Flat(v) => v.clone(),
            Radii::Nested(v) => v.concat(),
        };
        if flat.len() != len {
            return Err(RmdpError::DimensionMismatch {
                expected: len,
                got: flat.len(),
            });
        }
        Ok(flat)
    }

    fn compact(values: &[f64]) -> Self {
        match values.first() {
            Some(&x) if values.iter().all(|&y| y == x) => Radii::Scalar(x),
            _ => Radii::Flat(values.to_vec()),
        }
    }
}

impl ModelFile {
    /// Validated model and uncertainty. A missing uncertainty block means
    /// no uncertainty; a missing initial distribution is uniform.
    pub fn build(self) -> Result<(TabularMdp<f64>, UncertaintySpec<f64>), RmdpError> {
        let (ns, na) = (self.num_states, self.num_actions);
        let initial_dist = self
            .initial_dist
            .unwrap_or_else(|| vec![1.0 / ns.max(1) as f64; ns]);
        let m = TabularMdp::new(RawMdp {
            num_states: ns,
            num_actions: na,
            kernel: self.kernel,
            reward: self.reward,
            discount: self.discount,
            initial_dist,
        })?;
        let u = match self.uncertainty {
            None => UncertaintySpec::nominal(Rectangularity::Sa, ns, na),
            Some(block) => block.build(ns, na)?,
        };
        Ok((m, u))
    }

    pub fn from_model(m: &TabularMdp<f64>, u: &UncertaintySpec<f64>) -> Self {
        let raw = m.to_raw();
        ModelFile {
            num_states: raw.num_states,
            num_actions: raw.num_actions,
            discount: raw.discount,
            kernel: raw.kernel,
            reward: raw.reward,
            initial_dist: Some(raw.initial_dist),
            uncertainty: Some(UncertaintyFile {
                mode: u.mode().name().into(),
                p: ExponentValue::from_p(u.exponent().p()),
                beta: Radii::compact(u.betas()),
                alpha: Radii::compact(u.alphas()),
            }),
        }
    }
}

impl UncertaintyFile {
    pub fn build(&self, ns: usize, na: usize) -> Result<UncertaintySpec<f64>, RmdpError> {
        let mode = parse_mode(&self.mode)?;
        let len = match mode {
            Rectangularity::Sa => ns * na,
            Rectangularity::S => ns,
        };
        UncertaintySpec::new(
            mode,
            Exponent::new(self.p.value()?)?,
            ns,
            na,
            self.beta.expand(len)?,
            self.alpha.expand(len)?,
        )
    }
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<(TabularMdp<f64>, UncertaintySpec<f64>), ModelFileError> {
    let file: ModelFile = serde_json::from_str(text)?;
    Ok(file.build()?)
}

/// Serializes a model and its uncertainty as a pretty-printed document.
pub fn model_to_json(m: &TabularMdp<f64>, u: &UncertaintySpec<f64>) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(m, u)).expect("model serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_mdp;

    #[test]
    fn round_trip() {
        let m = random_mdp::<f64>(3, 2, 0.9, 4).unwrap();
        let u = UncertaintySpec::uniform(Rectangularity::S, f64::INFINITY, 3, 2, 0.1, 0.05).unwrap();
        let (m2, u2) = parse_model(&model_to_json(&m, &u)).unwrap();
        assert_eq!(u, u2);
        assert!(crate::scalar::sup_distance(m.row(2, 1), m2.row(2, 1)) < 1e-15);
    }

    #[test]
    fn radii_shapes() {
        let text = r#"{"num_states": 2, "num_actions": 2, "discount": 0.5,
            "kernel": [[[1,0],[0,1]],[[0.5,0.5],[1,0]]],
            "reward": [[0,1],[1,0]], "initial_dist": [0.5,0.5],
            "uncertainty": {"mode": "sa", "p": "inf", "beta": [[0.1,0.2],[0.3,0.4]]}}"#;
        let (_, u) = parse_model(text).unwrap();
        assert_eq!(u.beta(1, 0), 0.3);
        assert_eq!(u.alpha(1, 1), 0.0);
        assert!(u.exponent().is_infinite());
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_model("{\n \"num_states\": 2,\n oops }").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn bad_row_is_reported() {
        let text = r#"{"num_states": 2, "num_actions": 1, "discount": 0.5,
            "kernel": [[[0.5,0.6]],[[0.5,0.5]]], "reward": [[0],[1]], "initial_dist": [0.5,0.5]}"#;
        assert!(matches!(
            parse_model(text),
            Err(ModelFileError::Invalid(RmdpError::NonStochasticRow { state: 0, action: 0, .. }))
        ));
    }
}
