//! External-parameter estimators: fixed values, frequentist means and a
//! conjugate Bayesian posterior mean.

use std::path::Path;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferError {
    #[error("{method} needs at least one observation")]
    NoObservations { method: &'static str },
    #[error("mean_rate needs positive durations, got {0}")]
    NonPositiveDuration(String),
    #[error("negative observation {0}")]
    NegativeObservation(String),
    #[error("bayes: {0}")]
    InvalidPrior(String),
    #[error("cannot read observations from {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("{path}, line {line}: `{text}` is not a number")]
    BadValue { path: String, line: usize, text: String },
}

/// How an external parameter gets its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum InferenceSpec {
    Fixed {
        #[serde(with = "rational_text")]
        value: BigRational,
    },
    /// Arithmetic mean of the observations.
    Mean {
        #[serde(with = "rational_list")]
        observations: Vec<BigRational>,
    },
    /// Events per second: the reciprocal of the mean duration.
    MeanRate {
        #[serde(with = "rational_list")]
        observations: Vec<BigRational>,
    },
    /// Posterior mean of one outcome under a Dirichlet prior given as
    /// pseudo-counts.
    Bayes {
        #[serde(with = "rational_list")]
        prior: Vec<BigRational>,
        counts: Vec<u64>,
        target: usize,
    },
}

impl InferenceSpec {
    pub fn method(&self) -> &'static str {
        match self {
            InferenceSpec::Fixed { .. } => "fixed",
            InferenceSpec::Mean { .. } => "mean",
            InferenceSpec::MeanRate { .. } => "mean_rate",
            InferenceSpec::Bayes { .. } => "bayes",
        }
    }
}

pub fn infer(spec: &InferenceSpec) -> Result<BigRational, InferError> {
    match spec {
        InferenceSpec::Fixed { value } => Ok(value.clone()),
        InferenceSpec::Mean { observations } => {
            if let Some(bad) = observations.iter().find(|o| o.is_negative()) {
                return Err(InferError::NegativeObservation(num::canonical_text(bad)));
            }
            mean(observations, "mean")
        }
        InferenceSpec::MeanRate { observations } => {
            if let Some(bad) = observations.iter().find(|o| !o.is_positive()) {
                return Err(InferError::NonPositiveDuration(num::canonical_text(bad)));
            }
            Ok(mean(observations, "mean_rate")?.recip())
        }
        InferenceSpec::Bayes { prior, counts, target } => {
            if prior.len() != counts.len() {
                return Err(InferError::InvalidPrior(format!(
                    "{} pseudo-counts for {} outcomes",
                    prior.len(),
                    counts.len()
                )));
            }
            if *target >= prior.len() {
                return Err(InferError::InvalidPrior(format!("target outcome {target} out of range")));
            }
            if prior.iter().any(|a| !a.is_positive()) {
                return Err(InferError::InvalidPrior("pseudo-counts must be positive".into()));
            }
            let post = |i: usize| &prior[i] + BigRational::from_integer(counts[i].into());
            let total = (0..prior.len()).fold(BigRational::zero(), |acc, i| acc + post(i));
            Ok(post(*target) / total)
        }
    }
}

fn mean(obs: &[BigRational], method: &'static str) -> Result<BigRational, InferError> {
    if obs.is_empty() {
        return Err(InferError::NoObservations { method });
    }
    let sum = obs.iter().fold(BigRational::zero(), |a, b| a + b);
    Ok(sum / BigRational::from_integer(obs.len().into()))
}

/// Reads one value per line (first CSV column); blank lines and a
/// non-numeric header are skipped.
pub fn load_observations(path: &Path) -> Result<Vec<BigRational>, InferError> {
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| InferError::Io { path: shown.clone(), detail: e.to_string() })?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| InferError::Io { path: shown.clone(), detail: e.to_string() })?;
        let Some(text) = record.get(0).map(str::trim) else { continue };
        if text.is_empty() {
            continue;
        }
        match num::parse_rational(text) {
            Some(v) => out.push(v),
            None if i == 0 => {}
            None => return Err(InferError::BadValue { path: shown, line: i + 1, text: text.to_string() }),
        }
    }
    Ok(out)
}

/// Serializes rationals as JSON numbers when they are short decimals, and
/// as `"p/q"` strings otherwise; accepts either.
pub(crate) mod rational_text {
    use num_rational::BigRational;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::num;

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        match num::format_decimal(v).and_then(|t| t.parse::<f64>().ok()) {
            Some(f) if num::from_f64_decimal(f).as_ref() == Some(v) => s.serialize_f64(f),
            _ => s.serialize_str(&num::canonical_text(v)),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(serde_json::Number),
        Text(String),
    }

    fn parse<E: Error>(raw: Raw) -> Result<BigRational, E> {
        let text = match raw {
            Raw::Num(n) => n.to_string(),
            Raw::Text(t) => t,
        };
        num::parse_rational(&text).ok_or_else(|| E::custom(format!("`{text}` is not a number")))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        parse(Raw::deserialize(d)?)
    }

    pub(crate) fn deserialize_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        Vec::<Raw>::deserialize(d)?.into_iter().map(parse).collect()
    }
}

pub(crate) mod rational_list {
    use num_rational::BigRational;
    use serde::ser::SerializeSeq;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
        struct Item<'a>(&'a BigRational);
        impl serde::Serialize for Item<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::rational_text::serialize(self.0, s)
            }
        }
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&Item(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        super::rational_text::deserialize_list(d)
    }
}

/// Prior mean of the target outcome.
pub fn prior_mean(prior: &[BigRational], target: usize) -> BigRational {
    let total = prior.iter().fold(BigRational::zero(), |a, b| a + b);
    if total.is_zero() {
        return BigRational::zero();
    }
    &prior[target] / total
}
