//! Deterministic negotiation policies for the RAN energy-saving agent and the
//! Edge latency agent.
//!
//! RAN: open at a moderate bandwidth (or the memory suggestion), trim
//! bandwidth when the twin shows headroom, add bandwidth when latency nears
//! the target. Edge: ask for full CPU and enough bandwidth to carry the edge
//! output at the worst spectral efficiency.
//!
//! Every configuration that leaves an agent has passed its own twin in the
//! same turn. Failed twin tests move the agent's own lever by one step until
//! the test budget runs out, after which the agent refuses.

use serde::{Deserialize, Serialize};

use super::{
    accept_or_counter_policy, prediction_suffix, AgentObjective, Decision, DeliberationContext,
    TraceEvent,
};
use crate::a2a::{A2AMessage, AgentFault, Configuration, NegotiationAgent, Role, TurnContext};
use crate::environment::measure_state;
use crate::memory::{infer_configuration, InferenceRules, QueryContext, SharedMemory, TrafficLevel};
use crate::net_math::NetParams;
use crate::twin::{DigitalTwin, TwinPrediction};

pub const REFUSAL_TEXT: &str =
    "Failed to generate a valid negotiation message after multiple internal Digital Twin test attempts.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySettings {
    pub twin_budget: usize,
    /// MHz.
    pub bw_step: f64,
    /// GHz.
    pub cpu_step: f64,
    pub ran_opener: (f64, f64),
    pub edge_opener: (f64, f64),
    /// Bandwidth cut used when the offer's latency is under this fraction of
    /// the target is two steps instead of one.
    pub wide_margin: f64,
}

impl Default for PolicySettings {
    fn default() -> Self {
        Self {
            twin_budget: 4,
            bw_step: 5.0,
            cpu_step: 5.0,
            ran_opener: (20.0, 30.0),
            edge_opener: (40.0, 45.0),
            wide_margin: 0.5,
        }
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn ceil1(x: f64) -> f64 {
    // Guard against representation noise such as 12.750000000000002.
    ((x * 10.0) - 1e-9).ceil() / 10.0
}

#[derive(Debug, Clone)]
struct MemoryAccess {
    shared: SharedMemory,
    rules: InferenceRules,
}

#[derive(Debug, Clone)]
pub struct RuleBasedAgent {
    objective: AgentObjective,
    params: NetParams,
    twin: DigitalTwin,
    settings: PolicySettings,
    memory: Option<MemoryAccess>,
    trial_id: usize,
    desired_b: Option<f64>,
    consulted: Option<(Vec<crate::memory::ScoredCandidate>, Option<Configuration>)>,
    notes: Vec<String>,
    trace: Vec<TraceEvent>,
}

impl RuleBasedAgent {
    pub fn new(role: Role, params: NetParams, trial_id: usize) -> Self {
        Self {
            objective: AgentObjective::new(role),
            twin: DigitalTwin::new(params.clone()),
            params,
            settings: PolicySettings::default(),
            memory: None,
            trial_id,
            desired_b: None,
            consulted: None,
            notes: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn with_memory(mut self, shared: SharedMemory, rules: InferenceRules) -> Self {
        self.memory = Some(MemoryAccess { shared, rules });
        self
    }

    pub fn with_settings(mut self, settings: PolicySettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn with_twin(mut self, twin: DigitalTwin) -> Self {
        self.twin = twin;
        self
    }

    pub fn objective(&self) -> &AgentObjective {
        &self.objective
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    fn role(&self) -> Role {
        self.objective.role
    }

    fn traffic_level(&self, ctx: &DeliberationContext) -> TrafficLevel {
        TrafficLevel::classify(ctx.observed.avg_arrival_rate, &self.params)
    }

    /// Queries memory once per negotiation.
    fn consult_memory(&mut self, observed: &crate::environment::NetworkState) {
        if self.consulted.is_some() {
            return;
        }
        let Some(mem) = &self.memory else {
            self.consulted = Some((Vec::new(), None));
            return;
        };
        let level = TrafficLevel::classify(observed.avg_arrival_rate, &self.params);
        let query = QueryContext {
            traffic_level: level,
            trial_id: self.trial_id,
        };
        let retrieved = match mem.shared.retrieve(&query) {
            Ok(r) => r,
            Err(e) => {
                self.notes.push(format!("Memory query failed: {e}"));
                Vec::new()
            }
        };
        self.trace.push(TraceEvent::MemoryQuery {
            retrieved: retrieved.len(),
        });
        let suggestion = retrieved
            .first()
            .map(|anchor| infer_configuration(&anchor.strategy, &retrieved, level, &mem.rules));
        match (retrieved.first(), suggestion) {
            (Some(anchor), Some(s)) => self.notes.push(format!(
                "Retrieved {} strategies from memory. Anchor: trial {} ({}). Suggested ({s}).",
                retrieved.len(),
                anchor.strategy.trial_id(),
                anchor.strategy.description
            )),
            _ => self.notes.push("Memory holds no matching strategy.".into()),
        }
        self.consulted = Some((retrieved, suggestion));
    }

    fn context(&mut self, turn: &TurnContext<'_>) -> DeliberationContext {
        self.consult_memory(turn.observed);
        let (retrieved, suggestion) = self.consulted.clone().unwrap_or_default();
        DeliberationContext {
            trial_id: self.trial_id,
            observed: turn.observed.clone(),
            metrics: measure_state(turn.observed, &self.params).ok(),
            opponent_last: turn.opponent_last.cloned(),
            opponent_proposal: turn.opponent_proposal,
            own_proposal: turn.own_proposal,
            round: turn.round,
            max_rounds: turn.max_rounds,
            retrieved,
            suggestion,
            twin_budget: self.settings.twin_budget,
        }
    }

    fn test(&mut self, ctx: &DeliberationContext, c: Configuration, budget: &mut usize) -> Option<TwinPrediction> {
        if *budget == 0 {
            return None;
        }
        *budget -= 1;
        let pred = match self.twin.test_proposal(&ctx.observed, c.bandwidth_hz(), c.cpu_hz()) {
            Ok(p) => p,
            Err(e) => {
                self.notes.push(format!("Digital Twin rejected proposal ({c}): {e}"));
                return Some(TwinPrediction {
                    predicted_latency: f64::INFINITY,
                    predicted_energy: f64::NAN,
                    predicted_cpu_conflicts: 0,
                    passes_sla: false,
                });
            }
        };
        self.trace.push(TraceEvent::TwinTest {
            config: c,
            prediction: pred,
        });
        if !pred.passes_sla {
            self.notes.push(format!(
                "Digital Twin test failed for proposal ({c}). Predicted Latency: {:.2}ms (SLA: {:.1}ms), Predicted CPU Conflicts: {}.",
                pred.predicted_latency * 1e3,
                self.params.sla_latency * 1e3,
                pred.predicted_cpu_conflicts
            ));
        }
        Some(pred)
    }

    fn clamp(&self, c: Configuration) -> Configuration {
        let (bl, bh) = self.objective.bw_range;
        let (fl, fh) = self.objective.cpu_range;
        let bh = bh.min(self.params.b_max / 1e6);
        Configuration::new(
            round1(c.ran_bandwidth_mhz.clamp(bl, bh)),
            round1(c.edge_cpu_frequency_ghz.clamp(fl, fh)),
        )
    }

    /// Raises the agent's own lever by one step, or `None` at the ceiling.
    fn adjust(&self, c: Configuration) -> Option<Configuration> {
        let b_cap = self.objective.bw_range.1.min(self.params.b_max / 1e6);
        let f_cap = self.params.f_max / 1e9;
        match self.role() {
            Role::Ran if c.ran_bandwidth_mhz < b_cap => Some(self.clamp(Configuration::new(
                c.ran_bandwidth_mhz + self.settings.bw_step,
                c.edge_cpu_frequency_ghz,
            ))),
            Role::Edge if c.edge_cpu_frequency_ghz + 1e-9 < f_cap => Some(self.clamp(Configuration::new(
                c.ran_bandwidth_mhz,
                (c.edge_cpu_frequency_ghz + self.settings.cpu_step).min(f_cap),
            ))),
            Role::Edge if c.ran_bandwidth_mhz < b_cap => Some(self.clamp(Configuration::new(
                c.ran_bandwidth_mhz + self.settings.bw_step,
                c.edge_cpu_frequency_ghz,
            ))),
            _ => None,
        }
    }

    /// Twin-validates `candidate`, adjusting on failure.
    fn validate(
        &mut self,
        ctx: &DeliberationContext,
        mut candidate: Configuration,
        budget: &mut usize,
    ) -> Option<(Configuration, TwinPrediction)> {
        loop {
            let pred = self.test(ctx, candidate, budget)?;
            if pred.passes_sla {
                return Some((candidate, pred));
            }
            candidate = self.adjust(candidate)?;
        }
    }

    fn edge_targets(&self, ctx: &DeliberationContext) -> (f64, f64) {
        let f_max = self.params.f_max / 1e9;
        let f = if self.traffic_level(ctx) == TrafficLevel::Low {
            f_max - self.settings.cpu_step
        } else {
            f_max
        };
        let floor =
            ceil1(f * 1e9 * self.params.cpu_efficiency / (self.params.eta_min * self.params.spatial_gain) / 1e6);
        (f, floor)
    }

    fn refuse(&mut self) -> A2AMessage {
        self.notes
            .push("No valid negotiation message was set after all attempts. Forcing NO_AGREEMENT_POSSIBLE.".into());
        A2AMessage::no_agreement(REFUSAL_TEXT)
    }

    fn ran_deliberate(&mut self, ctx: &DeliberationContext, budget: &mut usize) -> A2AMessage {
        let s = self.settings;
        let target = self.objective.latency_target;
        let opener = self.clamp(
            ctx.suggestion
                .unwrap_or(Configuration::new(s.ran_opener.0, s.ran_opener.1)),
        );
        let mut desired = *self.desired_b.get_or_insert(opener.ran_bandwidth_mhz);

        let (candidate, why) = match ctx.opponent_proposal {
            None => {
                let why = if ctx.suggestion.is_some() {
                    "Opening with the configuration inferred from collective memory"
                } else {
                    "Opening with a moderate bandwidth to keep latency safe before trimming energy"
                };
                (opener, why.to_string())
            }
            Some(p) => {
                if let Some(own) = ctx.own_proposal {
                    if p.ran_bandwidth_mhz > own.ran_bandwidth_mhz {
                        desired = (desired + s.bw_step).min(p.ran_bandwidth_mhz);
                    }
                }
                let Some(pred) = self.test(ctx, p, budget) else {
                    return self.refuse();
                };
                let late = self.objective.is_late(ctx.round, ctx.max_rounds);
                let decision = accept_or_counter_policy(&self.objective, &p, &pred, ctx.round, ctx.max_rounds);
                if decision == Decision::Accept && (late || p.ran_bandwidth_mhz <= desired + 1e-9) {
                    self.desired_b = Some(desired);
                    let reason = format!(
                        "The offer of {:.1} MHz and {:.1} GHz keeps latency under the target with acceptable energy use. {}",
                        p.ran_bandwidth_mhz,
                        p.edge_cpu_frequency_ghz,
                        prediction_suffix(&pred)
                    );
                    return A2AMessage::accept(p, reason);
                }
                let f = p.edge_cpu_frequency_ghz.min(self.params.f_max / 1e9);
                if pred.predicted_latency >= target {
                    let b = (p.ran_bandwidth_mhz + s.bw_step).max(desired);
                    (
                        self.clamp(Configuration::new(b, f)),
                        "Latency is close to the target, so I add bandwidth".to_string(),
                    )
                } else {
                    let cut = if pred.predicted_latency < s.wide_margin * target {
                        2.0 * s.bw_step
                    } else {
                        s.bw_step
                    };
                    let b = desired.max(p.ran_bandwidth_mhz - cut);
                    (
                        self.clamp(Configuration::new(b, f)),
                        format!(
                            "Latency has headroom at {:.2} ms, so I reduce bandwidth to save energy",
                            pred.predicted_latency * 1e3
                        ),
                    )
                }
            }
        };

        let Some((c, pred)) = self.validate(ctx, candidate, budget) else {
            return self.refuse();
        };
        self.desired_b = Some(desired.max(c.ran_bandwidth_mhz));
        self.emit(ctx, c, pred, &why)
    }

    fn edge_deliberate(&mut self, ctx: &DeliberationContext, budget: &mut usize) -> A2AMessage {
        let s = self.settings;
        let (want_f, floor_b) = self.edge_targets(ctx);
        let b_cap = self.objective.bw_range.1.min(self.params.b_max / 1e6);

        let (candidate, why) = match ctx.opponent_proposal {
            None => {
                let c = ctx.suggestion.unwrap_or(Configuration::new(s.edge_opener.0, s.edge_opener.1));
                (
                    self.clamp(Configuration::new(c.ran_bandwidth_mhz.max(floor_b), want_f.max(c.edge_cpu_frequency_ghz).min(self.params.f_max / 1e9))),
                    "Opening with high CPU and enough bandwidth to carry the edge output".to_string(),
                )
            }
            Some(p) => {
                let Some(pred) = self.test(ctx, p, budget) else {
                    return self.refuse();
                };
                let late = self.objective.is_late(ctx.round, ctx.max_rounds);
                let decision = accept_or_counter_policy(&self.objective, &p, &pred, ctx.round, ctx.max_rounds);
                let preferred =
                    p.edge_cpu_frequency_ghz + 1e-9 >= want_f && p.ran_bandwidth_mhz + 1e-9 >= floor_b;
                if decision == Decision::Accept && (late || preferred) {
                    let reason = format!(
                        "The offer of {:.1} MHz and {:.1} GHz meets my latency target without CPU conflicts. {}",
                        p.ran_bandwidth_mhz,
                        p.edge_cpu_frequency_ghz,
                        prediction_suffix(&pred)
                    );
                    return A2AMessage::accept(p, reason);
                }
                let mut c = self.clamp(Configuration::new(
                    p.ran_bandwidth_mhz.max(floor_b).min(b_cap),
                    want_f,
                ));
                if c == p {
                    c = self.clamp(Configuration::new(p.ran_bandwidth_mhz + s.bw_step, want_f));
                }
                (
                    c,
                    format!(
                        "I need {:.1} GHz of CPU and at least {:.1} MHz of bandwidth to keep latency low",
                        want_f, floor_b
                    ),
                )
            }
        };

        let Some((c, pred)) = self.validate(ctx, candidate, budget) else {
            return self.refuse();
        };
        self.emit(ctx, c, pred, &why)
    }

    fn emit(&mut self, ctx: &DeliberationContext, c: Configuration, pred: TwinPrediction, why: &str) -> A2AMessage {
        let suffix = prediction_suffix(&pred);
        if ctx.opponent_proposal == Some(c) {
            A2AMessage::accept(c, format!("{why}; this matches the standing offer. {suffix}"))
        } else {
            A2AMessage::propose(c, format!("{why}. {suffix}"))
        }
    }

    /// One turn of the policy.
    pub fn deliberate(&mut self, ctx: &DeliberationContext) -> A2AMessage {
        self.trace.push(TraceEvent::Deliberation { round: ctx.round });
        let mut budget = ctx.twin_budget;
        let msg = match self.role() {
            Role::Ran => self.ran_deliberate(ctx, &mut budget),
            Role::Edge => self.edge_deliberate(ctx, &mut budget),
        };
        self.trace.push(TraceEvent::Emitted {
            intent: msg.intent,
            config: msg.payload,
        });
        msg
    }

    /// Builds the deliberation context for a turn without deliberating.
    pub fn prepare(&mut self, turn: &TurnContext<'_>) -> DeliberationContext {
        self.context(turn)
    }
}

impl NegotiationAgent for RuleBasedAgent {
    fn role(&self) -> Role {
        self.objective.role
    }

    fn greeting(&mut self) -> Option<String> {
        Some(match self.objective.role {
            Role::Ran => "Hello, this is the RAN agent. I want to save energy by trimming bandwidth as far as latency allows. What configuration do you have in mind?".into(),
            Role::Edge => "Hello, this is the Edge agent. I care about end-to-end latency for the slice and am ready to agree on bandwidth and CPU.".into(),
        })
    }

    fn respond(&mut self, turn: &TurnContext<'_>) -> Result<String, AgentFault> {
        let ctx = self.context(turn);
        Ok(self.deliberate(&ctx).serialize())
    }

    fn drain_notes(&mut self) -> Vec<String> {
        std::mem::take(&mut self.notes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a2a::{run_negotiation, Intent, Outcome, ProtocolConfig};
    use crate::environment::{Environment, NetworkState};

    fn observed(rate: f64) -> NetworkState {
        let p = NetParams::default();
        let mut s = NetworkState::fresh(&p);
        s.t = 1;
        s.q.q_edge = rate * p.tau;
        s.current_arrival_rate = rate;
        s.avg_arrival_rate = rate;
        s.arrival_history = vec![rate];
        s.queue_history_edge = vec![0.0];
        s.queue_history_ran = vec![0.0];
        s
    }

    fn ctx(obs: NetworkState, opp: Option<Configuration>, own: Option<Configuration>, round: usize) -> DeliberationContext {
        DeliberationContext {
            trial_id: 0,
            metrics: None,
            observed: obs,
            opponent_last: opp.map(|c| A2AMessage::propose(c, "x")),
            opponent_proposal: opp,
            own_proposal: own,
            round,
            max_rounds: 8,
            retrieved: Vec::new(),
            suggestion: None,
            twin_budget: 4,
        }
    }

    #[test]
    fn edge_accepts_comfortable_offer() {
        let mut edge = RuleBasedAgent::new(Role::Edge, NetParams::default(), 0);
        let m = edge.deliberate(&ctx(observed(5.3e7), Some(Configuration::new(30.0, 45.0)), None, 3));
        assert_eq!(m.intent, Intent::AcceptAgreement);
        assert_eq!(m.payload, Some(Configuration::new(30.0, 45.0)));
        assert!(m.reason.contains("Predicted Latency:"));
    }

    #[test]
    fn ran_trims_generous_offer() {
        let mut ran = RuleBasedAgent::new(Role::Ran, NetParams::default(), 0);
        ran.desired_b = Some(20.0);
        let m = ran.deliberate(&ctx(
            observed(5.3e7),
            Some(Configuration::new(40.0, 45.0)),
            Some(Configuration::new(20.0, 30.0)),
            2,
        ));
        assert_eq!(m.intent, Intent::ProposeAction);
        let c = m.payload.unwrap();
        assert_eq!(c.edge_cpu_frequency_ghz, 45.0);
        assert_eq!(c.ran_bandwidth_mhz, 30.0);
    }

    #[test]
    fn overload_forces_refusal() {
        // 2e8 bits/s exceeds the edge service rate even at full CPU.
        let mut ran = RuleBasedAgent::new(Role::Ran, NetParams::default(), 0);
        let m = ran.deliberate(&ctx(observed(2e8), None, None, 1));
        assert_eq!(m.intent, Intent::NoAgreementPossible);
        assert_eq!(m.reason, REFUSAL_TEXT);
        let notes = ran.drain_notes();
        assert_eq!(notes.iter().filter(|n| n.contains("test failed")).count(), 4);
        assert!(notes.last().unwrap().contains("Forcing NO_AGREEMENT_POSSIBLE"));
    }

    #[test]
    fn edge_floor_at_full_cpu() {
        let edge = RuleBasedAgent::new(Role::Edge, NetParams::default(), 0);
        let (f, floor) = edge.edge_targets(&ctx(observed(5e7), None, None, 1));
        assert_eq!(f, 45.0);
        assert_eq!(floor, 12.8);
        let (f_low, _) = edge.edge_targets(&ctx(observed(2e7), None, None, 1));
        assert_eq!(f_low, 40.0);
    }

    #[test]
    fn proposals_stay_in_range_and_are_validated() {
        for seed in 0..40u64 {
            let p = NetParams::default();
            let mut env = Environment::new(p.clone(), seed).unwrap();
            env.advance().unwrap();
            let mut ran = RuleBasedAgent::new(Role::Ran, p.clone(), 0);
            let mut edge = RuleBasedAgent::new(Role::Edge, p.clone(), 0);
            let rec = run_negotiation(&mut ran, &mut edge, &mut env, &ProtocolConfig::default());
            assert_ne!(rec.outcome, Outcome::ParseFailure);
            assert!(trace_ok(&ran) && trace_ok(&edge));
            for t in &rec.rounds {
                if let Some(c) = t.message.as_ref().and_then(|m| m.payload) {
                    assert!((5.0..=40.0).contains(&c.ran_bandwidth_mhz));
                    assert!((25.0..=50.0).contains(&c.edge_cpu_frequency_ghz));
                }
            }
        }
    }

    fn trace_ok(a: &RuleBasedAgent) -> bool {
        super::super::trace_is_validated(a.trace())
    }
}
