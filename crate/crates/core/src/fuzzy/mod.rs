//! Differentiable fuzzy semantics for rule sets and embedding refinement.
//!
//! Connectives: product t-norm for `&`, `1 - a` for `~`, probabilistic sum
//! for `|`, the generalized p-mean for `exists`, and Reichenbach implication
//! `1 - a + a*b` between a rule body and its target. `similar(x, y)` relaxes
//! to `sigmoid(k * (cos(x, y) - tau))`.

mod ground;
mod grad;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine, EmbedError, SimilarityConfig};
use crate::kb::KbError;
use crate::rules::RuleError;

pub use grad::{batch_loss, ground_batch, Gradient, GroundedBatch, LossReport};
pub use ground::{ground_body, Domain, GroundedBody, Op};
pub use train::{apply_refined, finetune, Classifier, FinetuneConfig, FinetuneResult, OptimConfig, TraceRow, Variant};

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("truth value {0} lies outside [0, 1]")]
    OutOfRange(f64),
    #[error("`{connective}` takes {expected} inputs, got {found}")]
    Arity { connective: &'static str, expected: usize, found: usize },
    #[error("invalid fuzzy configuration: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzyConfig {
    pub tau: f64,
    /// Slope `k` of the shifted sigmoid.
    #[serde(default = "default_steepness")]
    pub steepness: f64,
    /// Exponent of the p-mean used for `exists`.
    #[serde(default = "default_p")]
    pub p_exists: f64,
    /// Exponent of the p-mean-error aggregating all clauses.
    #[serde(default = "default_p")]
    pub p_aggregate: f64,
}

fn default_steepness() -> f64 {
    10.0
}

fn default_p() -> f64 {
    2.0
}

impl FuzzyConfig {
    pub fn new(tau: f64) -> Self {
        FuzzyConfig { tau, steepness: default_steepness(), p_exists: default_p(), p_aggregate: default_p() }
    }

    pub fn from_similarity(s: &SimilarityConfig) -> Self {
        FuzzyConfig { steepness: s.steepness, ..FuzzyConfig::new(s.tau) }
    }

    pub fn similarity(&self) -> SimilarityConfig {
        SimilarityConfig { tau: self.tau, steepness: self.steepness }
    }

    pub fn validate(&self) -> Result<(), FuzzyError> {
        self.similarity().validate()?;
        for (name, p) in [("p_exists", self.p_exists), ("p_aggregate", self.p_aggregate)] {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(FuzzyError::InvalidConfig(format!("{name} = {p} must be at least 1")));
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(k * (cos(x, y) - tau))`.
pub fn fuzzy_similar(x: &[f64], y: &[f64], config: &FuzzyConfig) -> Result<f64, FuzzyError> {
    let c = cosine(x, y)?;
    Ok(sigmoid(config.steepness * (c - config.tau)))
}

/// Generalized mean `(sum t^p / n)^(1/p)`; 0 on an empty input.
///
/// Computed as `m * (sum (t/m)^p / n)^(1/p)` with `m = max t` so that large
/// exponents do not underflow.
pub fn pmean(values: &[f64], p: f64) -> f64 {
    let m = values.iter().copied().fold(0.0, f64::max);
    if values.is_empty() || m <= 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|&t| (t / m).powf(p)).sum::<f64>() / values.len() as f64;
    m * s.powf(1.0 / p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connective {
    And,
    Or,
    Not,
    Exists,
    Implies,
}

pub fn eval_connective(kind: Connective, inputs: &[f64], config: &FuzzyConfig) -> Result<f64, FuzzyError> {
    if let Some(&bad) = inputs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(FuzzyError::OutOfRange(bad));
    }
    let arity = |name, n| {
        if inputs.len() == n {
            Ok(())
        } else {
            Err(FuzzyError::Arity { connective: name, expected: n, found: inputs.len() })
        }
    };
    Ok(match kind {
        Connective::And => inputs.iter().product(),
        Connective::Or => 1.0 - inputs.iter().map(|a| 1.0 - a).product::<f64>(),
        Connective::Not => {
            arity("not", 1)?;
            1.0 - inputs[0]
        }
        Connective::Exists => pmean(inputs, config.p_exists),
        Connective::Implies => {
            arity("implies", 2)?;
            1.0 - inputs[0] + inputs[0] * inputs[1]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> FuzzyConfig {
        FuzzyConfig::new(0.5)
    }

    #[test]
    fn similar_values() {
        let x = [1.0, 2.0, 0.0];
        assert_abs_diff_eq!(fuzzy_similar(&x, &x, &cfg()).unwrap(), 1.0 / (1.0 + (-5.0f64).exp()), epsilon = 1e-12);
        assert_abs_diff_eq!(fuzzy_similar(&x, &x, &cfg()).unwrap(), 0.99331, epsilon = 5e-6);
        let y = [0.0, 0.0, 3.0];
        assert_abs_diff_eq!(fuzzy_similar(&x, &y, &cfg()).unwrap(), 0.00669, epsilon = 5e-6);
        // cos = 0.5 exactly
        let a = [1.0, 0.0];
        let b = [0.5, 0.75f64.sqrt()];
        assert_abs_diff_eq!(fuzzy_similar(&a, &b, &cfg()).unwrap(), 0.5, epsilon = 1e-12);
        assert!(fuzzy_similar(&a, &[0.0, 0.0], &cfg()).is_err());
    }

    #[test]
    fn connective_identities() {
        let c = cfg();
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(eval_connective(Connective::And, &[1.0, x], &c).unwrap(), x);
            assert_eq!(eval_connective(Connective::Implies, &[0.0, x], &c).unwrap(), 1.0);
            assert_eq!(eval_connective(Connective::Implies, &[x, 1.0], &c).unwrap(), 1.0);
        }
        assert_eq!(eval_connective(Connective::Not, &[0.0], &c).unwrap(), 1.0);
        assert_eq!(eval_connective(Connective::Implies, &[1.0, 0.0], &c).unwrap(), 0.0);
        assert_abs_diff_eq!(eval_connective(Connective::Or, &[0.5, 0.5], &c).unwrap(), 0.75);
        assert!(matches!(eval_connective(Connective::And, &[1.2], &c), Err(FuzzyError::OutOfRange(_))));
        assert!(matches!(eval_connective(Connective::Not, &[0.1, 0.2], &c), Err(FuzzyError::Arity { .. })));
    }

    #[test]
    fn exists_pmean() {
        let c = cfg();
        assert_abs_diff_eq!(eval_connective(Connective::Exists, &[0.2, 0.8], &c).unwrap(), 0.583095, epsilon = 1e-6);
        assert_abs_diff_eq!(eval_connective(Connective::Exists, &[0.2, 0.8], &c).unwrap(), (0.68f64 / 2.0).sqrt(), epsilon = 1e-15);
        assert_eq!(eval_connective(Connective::Exists, &[], &c).unwrap(), 0.0);
        assert_eq!(pmean(&[0.0, 0.0], 2.0), 0.0);
        // Large exponents approach the maximum without underflow.
        assert_abs_diff_eq!(pmean(&[1e-3, 0.9, 0.1], 1e4), 0.9, epsilon = 1e-3);
    }

    #[test]
    fn config_validation() {
        assert!(FuzzyConfig { p_exists: 0.5, ..cfg() }.validate().is_err());
        assert!(FuzzyConfig { steepness: 0.0, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }
}
