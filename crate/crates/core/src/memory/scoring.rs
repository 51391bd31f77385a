//! Composite retrieval score: semantic overlap, temporal decay, failure
//! amplification and a diversity penalty.

use serde::{Deserialize, Serialize};

use super::strategy::{DistilledStrategy, Keywords};
use super::MemoryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayForm {
    /// `exp(-age / theta)`: theta is a time constant in trials.
    #[default]
    TimeConstant,
    /// `exp(-theta * age)`: theta is a rate.
    AsPrinted,
}

impl DecayForm {
    pub fn apply(self, age: f64, theta: f64) -> f64 {
        match self {
            DecayForm::TimeConstant => (-age / theta).exp(),
            DecayForm::AsPrinted => (-theta * age).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub theta: f64,
    pub n_top: usize,
    pub debiasing_enabled: bool,
    pub decay_form: DecayForm,
    /// Reserve the last retrieval slot for the best failure when greedy
    /// selection would otherwise return none.
    pub force_failure_slot: bool,
}

impl Default for MemoryParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            gamma: 1.0,
            delta: 1.0,
            theta: 5.0,
            n_top: 5,
            debiasing_enabled: true,
            decay_form: DecayForm::TimeConstant,
            force_failure_slot: false,
        }
    }
}

impl MemoryParams {
    pub fn vanilla() -> Self {
        Self {
            debiasing_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        let weights = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ];
        for (name, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(MemoryError::InvalidParams(format!("{name} must be finite and >= 0")));
            }
        }
        if !(self.theta > 0.0) {
            return Err(MemoryError::InvalidParams("theta must be > 0".into()));
        }
        if self.n_top == 0 {
            return Err(MemoryError::InvalidParams("n_top must be >= 1".into()));
        }
        Ok(())
    }
}

/// A stored strategy with every score component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    /// Insertion position in the store.
    pub index: usize,
    pub strategy: DistilledStrategy,
    pub age: usize,
    pub phi_semantic: f64,
    pub phi_decay: f64,
    pub phi_inflection: f64,
    pub phi_diversity: f64,
    pub phi_base: f64,
    pub phi_final: f64,
}

/// `|a ∩ b| / |a ∪ b|`, zero when both are empty.
pub fn jaccard(a: &Keywords, b: &Keywords) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn inflection(s: &DistilledStrategy) -> f64 {
    if s.outcome.sla_violation {
        1.0
    } else if s.outcome.unresolved {
        0.5
    } else {
        0.0
    }
}

/// Scores one stored strategy against a query.
pub fn score(
    strategy: &DistilledStrategy,
    index: usize,
    query_keywords: &Keywords,
    query_trial: usize,
    selected_keywords: &Keywords,
    params: &MemoryParams,
) -> Result<ScoredCandidate, MemoryError> {
    let trial = strategy.trial_id();
    if trial > query_trial {
        return Err(MemoryError::NegativeAge {
            stored: trial,
            query: query_trial,
        });
    }
    let age = query_trial - trial;
    let phi_semantic = jaccard(query_keywords, &strategy.keywords);
    let phi_decay = params.decay_form.apply(age as f64, params.theta);
    let phi_inflection = inflection(strategy);
    let phi_diversity = params.gamma * jaccard(&strategy.keywords, selected_keywords);
    let phi_base = params.alpha * phi_semantic + params.beta * phi_decay + params.delta * phi_inflection;
    Ok(ScoredCandidate {
        index,
        strategy: strategy.clone(),
        age,
        phi_semantic,
        phi_decay,
        phi_inflection,
        phi_diversity,
        phi_base,
        phi_final: phi_base - phi_diversity,
    })
}
