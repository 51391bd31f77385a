//! Retrieval bias diagnostics: how old the retrieved strategies are and how
//! many successes are retrieved per failure.

use serde::{Deserialize, Serialize};

use super::scoring::ScoredCandidate;
use super::MemoryError;

/// One retrieval, reduced to what the diagnostics need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalEvent {
    pub query_trial: usize,
    pub ages: Vec<usize>,
    pub successes: usize,
    pub failures: usize,
}

impl RetrievalEvent {
    pub fn from_candidates(query_trial: usize, retrieved: &[ScoredCandidate]) -> Self {
        let failures = retrieved.iter().filter(|c| c.strategy.is_failure()).count();
        Self {
            query_trial,
            ages: retrieved.iter().map(|c| c.age).collect(),
            successes: retrieved.len() - failures,
            failures,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SuccessFailureRatio {
    Finite(f64),
    /// Successes were retrieved but never a failure.
    NoFailures,
}

impl SuccessFailureRatio {
    /// Finite ratios compare as numbers; `NoFailures` ranks above all of them.
    pub fn as_f64(self) -> f64 {
        match self {
            SuccessFailureRatio::Finite(x) => x,
            SuccessFailureRatio::NoFailures => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for SuccessFailureRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SuccessFailureRatio::Finite(x) => write!(f, "{x:.2}"),
            SuccessFailureRatio::NoFailures => f.write_str("no failures"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasDiagnostics {
    pub age_mean: f64,
    /// Population standard deviation.
    pub age_std: f64,
    pub success_failure_ratio: SuccessFailureRatio,
    pub retrieved: usize,
}

pub fn bias_diagnostics(log: &[RetrievalEvent]) -> Result<BiasDiagnostics, MemoryError> {
    let ages: Vec<f64> = log.iter().flat_map(|e| e.ages.iter().map(|&a| a as f64)).collect();
    if ages.is_empty() {
        return Err(MemoryError::InsufficientData);
    }
    let n = ages.len() as f64;
    let age_mean = ages.iter().sum::<f64>() / n;
    let age_std = (ages.iter().map(|a| (a - age_mean).powi(2)).sum::<f64>() / n).sqrt();
    let successes: usize = log.iter().map(|e| e.successes).sum();
    let failures: usize = log.iter().map(|e| e.failures).sum();
    let success_failure_ratio = if failures == 0 {
        SuccessFailureRatio::NoFailures
    } else {
        SuccessFailureRatio::Finite(successes as f64 / failures as f64)
    };
    Ok(BiasDiagnostics {
        age_mean,
        age_std,
        success_failure_ratio,
        retrieved: ages.len(),
    })
}
