//! Logit post-processing: softmax, predictions and OOD scores.
//!
//! Every score follows one convention: a higher value means the image is more
//! likely to belong to an unseen class.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classifier output for one image: finite logits over at least two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewClasses { found: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteLogit { index, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for LogitVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        LogitVector::new(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OodMethod {
    #[serde(rename = "msp")]
    Msp,
    MaxLogit,
    Energy,
    Entropy,
    RatioLogit,
    RatioSoftmax,
}

impl OodMethod {
    pub const ALL: [OodMethod; 6] = [
        OodMethod::Msp,
        OodMethod::MaxLogit,
        OodMethod::Energy,
        OodMethod::Entropy,
        OodMethod::RatioLogit,
        OodMethod::RatioSoftmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OodMethod::Msp => "msp",
            OodMethod::MaxLogit => "max-logit",
            OodMethod::Energy => "energy",
            OodMethod::Entropy => "entropy",
            OodMethod::RatioLogit => "ratio-logit",
            OodMethod::RatioSoftmax => "ratio-softmax",
        }
    }
}

impl fmt::Display for OodMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OodMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "msp" => Ok(OodMethod::Msp),
            "maxlogit" => Ok(OodMethod::MaxLogit),
            "energy" => Ok(OodMethod::Energy),
            "entropy" => Ok(OodMethod::Entropy),
            "ratiologit" => Ok(OodMethod::RatioLogit),
            "ratiosoftmax" => Ok(OodMethod::RatioSoftmax),
            _ => Err(Error::InvalidConfig(format!(
                "unknown OOD method '{s}' (expected one of msp, max-logit, energy, entropy, ratio-logit, ratio-softmax)"
            ))),
        }
    }
}

fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest and second-largest entries; a repeated maximum counts twice.
fn top_two(values: &[f64]) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in values {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    (first, second)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = max(values);
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &LogitVector) -> ProbabilityVector {
    let m = max(logits.values());
    let exps: Vec<f64> = logits.values().iter().map(|v| (v - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    ProbabilityVector(exps.into_iter().map(|e| e / total).collect())
}

/// Index of the largest logit, lowest index on ties.
pub fn predict(logits: &LogitVector) -> usize {
    let mut best = 0;
    for (i, &v) in logits.values().iter().enumerate().skip(1) {
        if v > logits.values()[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreWarning {
    /// The ratio of logits was taken with a non-positive maximum, so larger
    /// values no longer mean "less confident".
    NonPositiveMaxLogit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOutcome {
    pub score: f64,
    pub warning: Option<ScoreWarning>,
}

pub fn ood_score(method: OodMethod, logits: &LogitVector) -> f64 {
    score_with_diagnostics(method, logits).score
}

pub fn score_with_diagnostics(method: OodMethod, logits: &LogitVector) -> ScoreOutcome {
    let s = logits.values();
    let mut warning = None;
    let score = match method {
        OodMethod::Msp => -max(softmax(logits).values()),
        OodMethod::MaxLogit => -max(s),
        OodMethod::Energy => -log_sum_exp(s),
        OodMethod::Entropy => -softmax(logits)
            .values()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>(),
        OodMethod::RatioLogit => {
            let (first, second) = top_two(s);
            if first <= 0.0 {
                warning = Some(ScoreWarning::NonPositiveMaxLogit);
            }
            second / first
        }
        OodMethod::RatioSoftmax => {
            let p = softmax(logits);
            let (first, second) = top_two(p.values());
            second / first
        }
    };
    ScoreOutcome { score, warning }
}
