//! RAN and Edge negotiation agents.
//!
//! Rule-based policies are the default reasoners. An external chat-completion
//! service can replace them through [`external::ExternalAgent`].

pub mod external;
pub mod prompts;
pub mod rules;

use serde::{Deserialize, Serialize};

use crate::a2a::{A2AMessage, Configuration, Intent, Role};
use crate::environment::{MetricsSnapshot, NetworkState};
use crate::memory::ScoredCandidate;
use crate::twin::TwinPrediction;

pub use external::{ChatRequest, ChatTransport, ExternalAgent, HttpTransport, TransportError};
pub use rules::{PolicySettings, RuleBasedAgent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentObjective {
    pub role: Role,
    /// Internal latency target, seconds. Kept below the SLA.
    pub latency_target: f64,
    /// MHz.
    pub bw_range: (f64, f64),
    /// GHz.
    pub cpu_range: (f64, f64),
    /// Number of final rounds in which passing but suboptimal offers are accepted.
    pub compromise_window: usize,
}

impl AgentObjective {
    pub fn new(role: Role) -> Self {
        Self {
            role,
            latency_target: 9e-3,
            bw_range: (5.0, 40.0),
            cpu_range: (25.0, 50.0),
            compromise_window: 2,
        }
    }

    pub fn is_late(&self, round: usize, max_rounds: usize) -> bool {
        round >= max_rounds.saturating_sub(self.compromise_window)
    }
}

/// Everything an agent deliberates over in one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliberationContext {
    pub trial_id: usize,
    pub observed: NetworkState,
    pub metrics: Option<MetricsSnapshot>,
    pub opponent_last: Option<A2AMessage>,
    pub opponent_proposal: Option<Configuration>,
    pub own_proposal: Option<Configuration>,
    pub round: usize,
    pub max_rounds: usize,
    pub retrieved: Vec<ScoredCandidate>,
    pub suggestion: Option<Configuration>,
    pub twin_budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Counter,
}

/// Accepts offers that meet the internal target, and in the compromise
/// window any offer that still meets the SLA.
pub fn accept_or_counter_policy(
    objective: &AgentObjective,
    _opponent: &Configuration,
    prediction: &TwinPrediction,
    round: usize,
    max_rounds: usize,
) -> Decision {
    if !prediction.passes_sla {
        return Decision::Counter;
    }
    if prediction.predicted_latency < objective.latency_target || objective.is_late(round, max_rounds) {
        Decision::Accept
    } else {
        Decision::Counter
    }
}

/// Call trace of one agent, used to check that nothing leaves the agent
/// without passing the twin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TraceEvent {
    Deliberation { round: usize },
    MemoryQuery { retrieved: usize },
    TwinTest { config: Configuration, prediction: TwinPrediction },
    Emitted { intent: Intent, config: Option<Configuration> },
}

/// True when every emitted proposal or acceptance was preceded, within the
/// same deliberation, by a passing twin test of exactly that configuration.
pub fn trace_is_validated(trace: &[TraceEvent]) -> bool {
    let mut passing: Vec<Configuration> = Vec::new();
    for e in trace {
        match e {
            TraceEvent::Deliberation { .. } => passing.clear(),
            TraceEvent::TwinTest { config, prediction } if prediction.passes_sla => passing.push(*config),
            TraceEvent::Emitted { config: Some(c), .. } if !passing.contains(c) => return false,
            _ => {}
        }
    }
    true
}

/// Reason suffix carrying the twin's prediction.
pub fn prediction_suffix(p: &TwinPrediction) -> String {
    format!(
        "Predicted Latency: {:.2} ms, Predicted Energy: {:.2} W.",
        p.predicted_latency * 1e3,
        p.predicted_energy
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(latency_ms: f64) -> TwinPrediction {
        TwinPrediction {
            predicted_latency: latency_ms * 1e-3,
            predicted_energy: 15.0,
            predicted_cpu_conflicts: 0,
            passes_sla: latency_ms < 10.0,
        }
    }

    #[test]
    fn rule_table() {
        let o = AgentObjective::new(Role::Edge);
        let c = Configuration::new(30.0, 45.0);
        assert_eq!(accept_or_counter_policy(&o, &c, &pred(9.5), 7, 8), Decision::Accept);
        assert_eq!(accept_or_counter_policy(&o, &c, &pred(9.5), 2, 8), Decision::Counter);
        assert_eq!(accept_or_counter_policy(&o, &c, &pred(7.27), 3, 8), Decision::Accept);
        for round in 1..=8 {
            assert_eq!(accept_or_counter_policy(&o, &c, &pred(10.5), round, 8), Decision::Counter);
        }
    }

    #[test]
    fn target_below_sla() {
        let o = AgentObjective::new(Role::Ran);
        assert!(o.latency_target < crate::net_math::NetParams::default().sla_latency);
        assert!(o.is_late(6, 8) && !o.is_late(5, 8));
    }

    #[test]
    fn trace_validation() {
        let c = Configuration::new(20.0, 30.0);
        let ok = vec![
            TraceEvent::Deliberation { round: 1 },
            TraceEvent::TwinTest { config: c, prediction: pred(5.0) },
            TraceEvent::Emitted { intent: Intent::ProposeAction, config: Some(c) },
        ];
        assert!(trace_is_validated(&ok));
        let stale = vec![
            TraceEvent::Deliberation { round: 1 },
            TraceEvent::TwinTest { config: c, prediction: pred(5.0) },
            TraceEvent::Deliberation { round: 2 },
            TraceEvent::Emitted { intent: Intent::ProposeAction, config: Some(c) },
        ];
        assert!(!trace_is_validated(&stale));
        let failing = vec![
            TraceEvent::Deliberation { round: 1 },
            TraceEvent::TwinTest { config: c, prediction: pred(12.0) },
            TraceEvent::Emitted { intent: Intent::AcceptAgreement, config: Some(c) },
        ];
        assert!(!trace_is_validated(&failing));
    }

    #[test]
    fn suffix_format() {
        assert_eq!(
            prediction_suffix(&pred(7.27)),
            "Predicted Latency: 7.27 ms, Predicted Energy: 15.00 W."
        );
    }
}
