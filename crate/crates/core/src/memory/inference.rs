//! Turns a retrieved anchor into a suggested starting configuration.

use serde::{Deserialize, Serialize};

use super::scoring::ScoredCandidate;
use super::strategy::{DistilledStrategy, TrafficLevel};
use crate::a2a::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceRules {
    /// Bandwidth multiplier under low or medium traffic.
    pub bw_light: f64,
    /// Bandwidth multiplier under high traffic.
    pub bw_heavy: f64,
    /// CPU multiplier under low or medium traffic.
    pub cpu_light: f64,
    /// CPU multiplier under high traffic.
    pub cpu_heavy: f64,
    /// Step away from a failed anchor, MHz and GHz.
    pub failure_step: f64,
    pub bw_min_mhz: f64,
    pub bw_max_mhz: f64,
    pub cpu_min_ghz: f64,
    pub cpu_max_ghz: f64,
}

impl Default for InferenceRules {
    fn default() -> Self {
        Self {
            bw_light: 0.85,
            bw_heavy: 0.95,
            cpu_light: 1.05,
            cpu_heavy: 1.15,
            failure_step: 5.0,
            bw_min_mhz: 5.0,
            bw_max_mhz: 40.0,
            cpu_min_ghz: 25.0,
            cpu_max_ghz: 45.0,
        }
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

impl InferenceRules {
    fn clamp_b(&self, b: f64) -> f64 {
        round1(b.clamp(self.bw_min_mhz, self.bw_max_mhz))
    }

    fn clamp_f(&self, f: f64) -> f64 {
        round1(f.clamp(self.cpu_min_ghz, self.cpu_max_ghz))
    }

    /// Traffic-aware adjustment of a configuration that worked.
    fn scale_success(&self, s: &DistilledStrategy, level: TrafficLevel) -> Configuration {
        let (kb, kf) = match level {
            TrafficLevel::High => (self.bw_heavy, self.cpu_heavy),
            TrafficLevel::Low | TrafficLevel::Medium => (self.bw_light, self.cpu_light),
        };
        Configuration::new(
            self.clamp_b(s.action.ran_bw_mhz * kb),
            self.clamp_f(s.action.edge_cpu_ghz * kf),
        )
    }
}

/// Suggests `(B, f)` for the current traffic level from the anchor and the
/// rest of the retrieved set.
///
/// A successful anchor is scaled by the traffic rule. A failed anchor is
/// never replayed: CPU moves up by one step (or to the best retrieved
/// success's CPU if higher); bandwidth moves up after an SLA violation and
/// follows the best retrieved success after an unresolved negotiation.
/// Suggestions saturate at the configured bounds.
pub fn infer_configuration(
    anchor: &DistilledStrategy,
    retrieved: &[ScoredCandidate],
    level: TrafficLevel,
    rules: &InferenceRules,
) -> Configuration {
    if !anchor.is_failure() {
        return rules.scale_success(anchor, level);
    }
    let reference = retrieved
        .iter()
        .map(|c| &c.strategy)
        .find(|s| !s.is_failure());
    let step = rules.failure_step;
    let f = reference.map_or(f64::MIN, |s| s.action.edge_cpu_ghz).max(anchor.action.edge_cpu_ghz + step);
    let b = if anchor.outcome.sla_violation {
        reference
            .map_or(f64::MIN, |s| s.action.ran_bw_mhz)
            .max(anchor.action.ran_bw_mhz + step)
    } else {
        match reference {
            Some(s) => rules.scale_success(s, level).ran_bandwidth_mhz,
            None => anchor.action.ran_bw_mhz + step,
        }
    };
    Configuration::new(rules.clamp_b(b), rules.clamp_f(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::strategy::{KeywordBands, StrategyAction, StrategyContext, StrategyOutcome};

    fn anchor(b: f64, f: f64, violation: bool, unresolved: bool) -> DistilledStrategy {
        DistilledStrategy::new(
            StrategyContext {
                traffic_level: TrafficLevel::Medium,
                arrival_rate_bps: 5e7,
                sla_latency_ms: 10.0,
                time_step: 1,
                trial_id: 0,
            },
            StrategyAction {
                ran_bw_mhz: b,
                edge_cpu_ghz: f,
            },
            StrategyOutcome {
                latency_ms: 5.0,
                sla_violation: violation,
                unresolved,
                energy_watts: b / 2.0,
                energy_saved_percent: 0.0,
            },
            &KeywordBands::default(),
        )
    }

    fn wrap(s: DistilledStrategy) -> ScoredCandidate {
        ScoredCandidate {
            index: 0,
            strategy: s,
            age: 0,
            phi_semantic: 0.0,
            phi_decay: 1.0,
            phi_inflection: 0.0,
            phi_diversity: 0.0,
            phi_base: 0.0,
            phi_final: 0.0,
        }
    }

    #[test]
    fn medium_traffic_success() {
        let c = infer_configuration(&anchor(40.0, 30.0, false, false), &[], TrafficLevel::Medium, &InferenceRules::default());
        assert_eq!(c, Configuration::new(34.0, 31.5));
    }

    #[test]
    fn high_traffic_never_lowers_cpu() {
        let r = InferenceRules::default();
        for f in [25.0, 30.0, 38.0, 45.0] {
            let c = infer_configuration(&anchor(30.0, f, false, false), &[], TrafficLevel::High, &r);
            assert!(c.edge_cpu_frequency_ghz >= f);
            assert_eq!(c.ran_bandwidth_mhz, 28.5);
        }
    }

    #[test]
    fn bandwidth_floor() {
        let c = infer_configuration(&anchor(5.0, 30.0, false, false), &[], TrafficLevel::Low, &InferenceRules::default());
        assert_eq!(c.ran_bandwidth_mhz, 5.0);
    }

    #[test]
    fn violation_moves_away() {
        let a = anchor(15.0, 30.0, true, false);
        let c = infer_configuration(&a, &[], TrafficLevel::Medium, &InferenceRules::default());
        assert!(c.ran_bandwidth_mhz > a.action.ran_bw_mhz);
        assert!(c.edge_cpu_frequency_ghz > a.action.edge_cpu_ghz);
        assert_ne!(c, a.action.config());
    }

    #[test]
    fn unresolved_follows_best_success() {
        let a = anchor(20.0, 30.0, false, true);
        let ok = anchor(30.0, 45.0, false, false);
        let r = InferenceRules::default();
        let c = infer_configuration(&a, &[wrap(a.clone()), wrap(ok)], TrafficLevel::Medium, &r);
        assert_eq!(c, Configuration::new(25.5, 45.0));
        let alone = infer_configuration(&a, &[wrap(a.clone())], TrafficLevel::Medium, &r);
        assert_eq!(alone, Configuration::new(25.0, 35.0));
    }
}
