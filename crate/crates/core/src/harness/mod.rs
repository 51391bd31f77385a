//! Scenario runner: repeated negotiation trials with an accumulating shared
//! memory, and the statistics reported over them.

pub mod compare;
pub mod stats;

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::a2a::{run_negotiation, Configuration, NegotiationAgent, NegotiationRecord, Outcome, ProtocolConfig, Role};
use crate::agents::{ChatTransport, ExternalAgent, PolicySettings, RuleBasedAgent};
use crate::environment::{EnvError, Environment, MetricsSnapshot};
use crate::memory::{
    distill, BiasDiagnostics, DistillContext, InferenceRules, MemoryError, MemoryParams, MemoryStore,
    RawMeta, RetrievalEvent, SharedMemory, TrafficLevel,
};
use crate::net_math::{NetError, NetParams};
use crate::twin::{DigitalTwin, EtaEstimate};

pub use compare::{compare_scenarios, ComparisonRow, ComparisonTable, OrderingFlags};
pub use stats::{cdf_with_bands, empirical_cdf, median, BootstrapSpec, CdfPoint, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMode {
    None,
    Vanilla,
    Unbiased,
}

impl MemoryMode {
    pub const ALL: [MemoryMode; 3] = [MemoryMode::None, MemoryMode::Vanilla, MemoryMode::Unbiased];

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryMode::None => "none",
            MemoryMode::Vanilla => "vanilla",
            MemoryMode::Unbiased => "unbiased",
        }
    }

    /// Label used in transcripts.
    pub fn label(self) -> &'static str {
        match self {
            MemoryMode::None => "w/o memory",
            MemoryMode::Vanilla => "vanilla memory",
            MemoryMode::Unbiased => "unbiased memory",
        }
    }
}

impl fmt::Display for MemoryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MemoryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(MemoryMode::None),
            "vanilla" => Ok(MemoryMode::Vanilla),
            "unbiased" => Ok(MemoryMode::Unbiased),
            other => Err(format!("unknown memory mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasonerKind {
    #[default]
    Rules,
    External,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub memory_mode: MemoryMode,
    pub trials: usize,
    pub seed: u64,
    pub max_rounds: usize,
    pub reasoner: ReasonerKind,
    pub net: NetParams,
    pub memory: MemoryParams,
    pub policy: PolicySettings,
    pub inference: InferenceRules,
    pub eta_estimate: EtaEstimate,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            memory_mode: MemoryMode::Unbiased,
            trials: 50,
            seed: 7,
            max_rounds: 8,
            reasoner: ReasonerKind::Rules,
            net: NetParams::default(),
            memory: MemoryParams::default(),
            policy: PolicySettings::default(),
            inference: InferenceRules::default(),
            eta_estimate: EtaEstimate::Midpoint,
        }
    }
}

impl ScenarioConfig {
    pub fn for_mode(mut self, mode: MemoryMode) -> Self {
        self.memory_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Invalid("trials must be at least 1".into()));
        }
        if self.max_rounds == 0 {
            return Err(HarnessError::Invalid("max_rounds must be at least 1".into()));
        }
        self.net.validate()?;
        self.memory.validate()?;
        Ok(())
    }

    /// Memory parameters with the debiasing switch set by the mode.
    pub fn effective_memory(&self) -> MemoryParams {
        MemoryParams {
            debiasing_enabled: self.memory_mode == MemoryMode::Unbiased,
            ..self.memory
        }
    }
}

/// Seed of one trial. Scenarios with the same master seed see the same
/// traffic and spectral efficiency draws trial by trial.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

/// Builds the two agents of a trial.
pub trait AgentFactory: Sync {
    fn build(
        &self,
        role: Role,
        trial: usize,
        cfg: &ScenarioConfig,
        memory: Option<&SharedMemory>,
    ) -> Box<dyn NegotiationAgent + Send>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleFactory;

impl AgentFactory for RuleFactory {
    fn build(
        &self,
        role: Role,
        trial: usize,
        cfg: &ScenarioConfig,
        memory: Option<&SharedMemory>,
    ) -> Box<dyn NegotiationAgent + Send> {
        let mut agent = RuleBasedAgent::new(role, cfg.net.clone(), trial)
            .with_settings(cfg.policy)
            .with_twin(DigitalTwin::new(cfg.net.clone()).with_eta_estimate(cfg.eta_estimate));
        if let Some(m) = memory {
            agent = agent.with_memory(m.clone(), cfg.inference);
        }
        Box::new(agent)
    }
}

/// Both agents backed by the same chat transport.
#[derive(Clone)]
pub struct ExternalFactory {
    pub transport: Arc<dyn ChatTransport>,
    pub timeout_retries: usize,
}

impl AgentFactory for ExternalFactory {
    fn build(
        &self,
        role: Role,
        trial: usize,
        cfg: &ScenarioConfig,
        memory: Option<&SharedMemory>,
    ) -> Box<dyn NegotiationAgent + Send> {
        let mut agent = ExternalAgent::new(role, cfg.net.clone(), trial, self.transport.clone())
            .with_timeout_retries(self.timeout_retries);
        if let Some(m) = memory {
            agent = agent.with_memory(m.clone(), cfg.inference);
        }
        Box::new(agent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub consensus_round: Option<usize>,
    pub agreed_config: Option<Configuration>,
    /// Ended without agreement at the round cap or by refusal.
    pub unresolved: bool,
    pub sla_violation: bool,
    pub parse_failure: bool,
    pub failure: Option<String>,
    pub traffic_level: TrafficLevel,
    /// Average arrival rate seen while negotiating, bits/s.
    pub negotiation_arrival_rate: f64,
    pub negotiation_step: usize,
    pub rounds: usize,
    pub metrics: MetricsSnapshot,
    #[serde(skip)]
    pub record: Option<NegotiationRecord>,
}

impl TrialOutcome {
    pub fn is_agreement(&self) -> bool {
        self.outcome == Outcome::Agreement
    }

    pub fn is_conflict(&self) -> bool {
        self.unresolved
    }

    fn title(s: bool) -> &'static str {
        if s {
            "True"
        } else {
            "False"
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "Trial {} Summary: Consensus Time = {}, Unresolved Negotiation = {}, SLA Violation = {}, Parsing Failure = {}",
            self.trial,
            self.consensus_round.map_or("None".to_string(), |r| r.to_string()),
            Self::title(self.unresolved),
            Self::title(self.sla_violation),
            Self::title(self.parse_failure)
        )
    }

    /// Full transcript of the trial in the log layout.
    pub fn transcript(&self, mode: MemoryMode) -> String {
        let mut out = format!(
            "--- Scenario: {} - Trial {} (Starting at time step {}) ---\n\n",
            mode.label(),
            self.trial,
            self.negotiation_step
        );
        if let Some(r) = &self.record {
            out.push_str(&r.transcript());
        }
        let heading = if self.is_agreement() {
            "Final Metrics after agreement"
        } else {
            "Final Metrics at default allocation"
        };
        let _ = writeln!(out, "{heading}: {}", self.metrics.block_json());
        let _ = writeln!(out, "Percentage Saved Energy: {:.2}%", self.metrics.energy_saved_percent);
        let _ = writeln!(out, "{}", self.summary_line());
        out
    }
}

/// Scenario-level aggregates. Latency, energy and consensus samples cover
/// agreements only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: usize,
    pub agreements: usize,
    pub conflict_count: usize,
    pub no_agreement_count: usize,
    pub unresolved_count: usize,
    pub parse_failure_count: usize,
    pub sla_violations: usize,
    /// Percent of agreements.
    pub sla_violation_rate: f64,
    /// Mean of `latency - sla` over violating trials, seconds.
    pub avg_latency_exceeding_sla: f64,
    /// Seconds.
    pub latency_samples: Vec<f64>,
    pub energy_saved_samples: Vec<f64>,
    pub consensus_samples: Vec<f64>,
}

impl Aggregates {
    pub fn from_trials(trials: &[TrialOutcome], sla_latency: f64) -> Self {
        let agreed: Vec<&TrialOutcome> = trials.iter().filter(|t| t.is_agreement()).collect();
        let violating: Vec<&&TrialOutcome> = agreed.iter().filter(|t| t.sla_violation).collect();
        let count = |o: Outcome| trials.iter().filter(|t| t.outcome == o).count();
        Self {
            trials: trials.len(),
            agreements: agreed.len(),
            conflict_count: trials.iter().filter(|t| t.is_conflict()).count(),
            no_agreement_count: count(Outcome::NoAgreement),
            unresolved_count: count(Outcome::Unresolved),
            parse_failure_count: count(Outcome::ParseFailure),
            sla_violations: violating.len(),
            sla_violation_rate: if agreed.is_empty() {
                0.0
            } else {
                100.0 * violating.len() as f64 / agreed.len() as f64
            },
            avg_latency_exceeding_sla: if violating.is_empty() {
                0.0
            } else {
                violating.iter().map(|t| t.metrics.latency - sla_latency).sum::<f64>() / violating.len() as f64
            },
            latency_samples: agreed.iter().map(|t| t.metrics.latency).collect(),
            energy_saved_samples: agreed.iter().map(|t| t.metrics.energy_saved_percent).collect(),
            consensus_samples: agreed
                .iter()
                .filter_map(|t| t.consensus_round.map(|r| r as f64))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: MemoryMode,
    pub config: ScenarioConfig,
    pub trials: Vec<TrialOutcome>,
    pub aggregate: Aggregates,
    pub bias: Option<BiasDiagnostics>,
    pub memory_queries: usize,
    pub retrieval_log: Vec<RetrievalEvent>,
    #[serde(skip)]
    pub memory: Option<MemoryStore>,
}

impl ScenarioReport {
    pub fn transcripts(&self) -> String {
        self.trials
            .iter()
            .map(|t| t.transcript(self.scenario))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn run_trial(
    cfg: &ScenarioConfig,
    trial: usize,
    memory: Option<&SharedMemory>,
    factory: &dyn AgentFactory,
) -> Result<TrialOutcome, HarnessError> {
    let seed = trial_seed(cfg.seed, trial);
    let mut env = Environment::new(cfg.net.clone(), seed)?;
    env.advance()?;
    let observed = env.state().clone();

    let mut ran = factory.build(Role::Ran, trial, cfg, memory);
    let mut edge = factory.build(Role::Edge, trial, cfg, memory);
    let protocol = ProtocolConfig {
        max_rounds: cfg.max_rounds,
        ..ProtocolConfig::default()
    };
    let record = run_negotiation(&mut ran, &mut edge, &mut env, &protocol);
    env.run_to_end()?;
    let metrics = env.measure()?;

    let agreed = record.outcome == Outcome::Agreement;
    let outcome = TrialOutcome {
        trial,
        seed,
        outcome: record.outcome,
        consensus_round: record.consensus_round,
        agreed_config: record.agreed_config,
        unresolved: matches!(record.outcome, Outcome::Unresolved | Outcome::NoAgreement),
        sla_violation: agreed && metrics.sla_violation,
        parse_failure: record.outcome == Outcome::ParseFailure,
        failure: record.failure.clone(),
        traffic_level: TrafficLevel::classify(observed.avg_arrival_rate, &cfg.net),
        negotiation_arrival_rate: observed.avg_arrival_rate,
        negotiation_step: observed.t,
        rounds: record.rounds.len(),
        metrics,
        record: Some(record),
    };

    if let Some(m) = memory {
        let record = outcome.record.as_ref().expect("record kept");
        let ctx = DistillContext {
            trial_id: trial,
            time_step: observed.t,
            arrival_rate: observed.avg_arrival_rate,
        };
        m.insert(distill(record, &outcome.metrics, &ctx, &cfg.net));
        m.append_raw(
            outcome.transcript(cfg.memory_mode),
            RawMeta {
                trial_id: trial,
                time_step: observed.t,
                label: cfg.memory_mode.label().to_string(),
            },
        );
    }
    Ok(outcome)
}

/// Runs all trials of one scenario in order, with a fresh memory.
pub fn run_scenario_with(cfg: &ScenarioConfig, factory: &dyn AgentFactory) -> Result<ScenarioReport, HarnessError> {
    cfg.validate()?;
    let memory = match cfg.memory_mode {
        MemoryMode::None => None,
        _ => Some(SharedMemory::new(cfg.effective_memory())),
    };
    let mut trials = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        trials.push(run_trial(cfg, trial, memory.as_ref(), factory)?);
    }
    let aggregate = Aggregates::from_trials(&trials, cfg.net.sla_latency);
    Ok(ScenarioReport {
        scenario: cfg.memory_mode,
        config: cfg.clone(),
        trials,
        aggregate,
        bias: memory.as_ref().and_then(|m| m.diagnostics().ok()),
        memory_queries: memory.as_ref().map_or(0, SharedMemory::query_count),
        retrieval_log: memory.as_ref().map(SharedMemory::retrieval_log).unwrap_or_default(),
        memory: memory.as_ref().map(SharedMemory::snapshot),
    })
}

/// Runs one scenario with rule-based agents.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, HarnessError> {
    run_scenario_with(cfg, &RuleFactory)
}

/// Runs independent scenarios in parallel; results keep the input order.
pub fn run_scenarios(
    cfgs: &[ScenarioConfig],
    factory: &dyn AgentFactory,
) -> Vec<Result<ScenarioReport, HarnessError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|cfg| s.spawn(move || run_scenario_with(cfg, factory)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    })
}
