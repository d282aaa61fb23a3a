use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A finite probability vector over a labelled, ordered outcome list.
///
/// Outcome labels are shared behind an `Arc` so that the many predictive
/// distributions built during action selection do not copy them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    outcomes: Arc<[String]>,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(outcomes: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        Self::with_domain(outcomes.into(), probs)
    }

    /// Builds a distribution over an already shared outcome list.
    pub fn with_domain(outcomes: Arc<[String]>, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no outcomes".into()));
        }
        if outcomes.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} labels for {} probabilities",
                outcomes.len(),
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "probability {bad} is not a finite non-negative number"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Distribution { outcomes, probs })
    }

    /// Outcomes labelled `"0"`, `"1"`, ... in order.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let labels = (0..probs.len()).map(|i| i.to_string()).collect::<Vec<_>>();
        Self::new(labels, probs)
    }

    /// Normalizes non-negative counts (or weights) into a distribution.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("counts have no mass".into()));
        }
        Self::from_probs(counts.iter().map(|c| c / total).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution("no outcomes".into()));
        }
        Self::from_probs(vec![1.0 / k as f64; k])
    }

    pub fn degenerate(k: usize, index: usize) -> Result<Self> {
        if index >= k {
            return Err(Error::IndexOutOfRange { index, len: k });
        }
        let mut probs = vec![0.0; k];
        probs[index] = 1.0;
        Self::from_probs(probs)
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn domain(&self) -> &Arc<[String]> {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> Result<f64> {
        self.probs.get(index).copied().ok_or(Error::IndexOutOfRange {
            index,
            len: self.probs.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == label)
    }

    pub fn same_domain(&self, other: &Distribution) -> bool {
        Arc::ptr_eq(&self.outcomes, &other.outcomes) || self.outcomes == other.outcomes
    }
}

#[derive(Deserialize)]
struct RawDistribution {
    outcomes: Vec<String>,
    probs: Vec<f64>,
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawDistribution::deserialize(deserializer)?;
        Distribution::new(raw.outcomes, raw.probs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_mass() {
        assert!(Distribution::from_probs(vec![0.5, 0.4]).is_err());
        assert!(Distribution::from_probs(vec![1.2, -0.2]).is_err());
        assert!(Distribution::from_probs(vec![]).is_err());
        assert!(Distribution::new(vec!["a".into()], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn json_shape() {
        let d = Distribution::new(vec!["lo".into(), "hi".into()], vec![0.25, 0.75]).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(text, r#"{"outcomes":["lo","hi"],"probs":[0.25,0.75]}"#);
        let back: Distribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<Distribution>(r#"{"outcomes":["a"],"probs":[0.3]}"#).is_err());
    }
}
