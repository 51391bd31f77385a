//! Distilled context-action-outcome records and their keyword sets.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::a2a::{Configuration, NegotiationRecord, Outcome};
use crate::environment::MetricsSnapshot;
use crate::net_math::NetParams;

pub type Keywords = BTreeSet<String>;

pub const LATENCY: &str = "latency";
pub const SLA: &str = "sla";
pub const SUCCESS: &str = "success";
pub const SLA_VIOLATION: &str = "sla_violation";
pub const UNRESOLVED: &str = "unresolved";

/// Edges of the CPU band tokens, GHz.
pub const CPU_BAND_RANGE: (f64, f64) = (25.0, 50.0);
/// Lower edge of the bandwidth band tokens, MHz. The upper edge is `b_max`.
pub const BW_BAND_FLOOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficLevel {
    Low,
    Medium,
    High,
}

impl TrafficLevel {
    /// Low below `mu - sigma/2`, high above `mu + sigma/2`.
    pub fn classify(rate: f64, params: &NetParams) -> Self {
        let half = params.traffic_sigma / 2.0;
        if rate < params.traffic_mu - half {
            TrafficLevel::Low
        } else if rate > params.traffic_mu + half {
            TrafficLevel::High
        } else {
            TrafficLevel::Medium
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            TrafficLevel::Low => "low_traffic",
            TrafficLevel::Medium => "medium_traffic",
            TrafficLevel::High => "high_traffic",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficLevel::Low => "low",
            TrafficLevel::Medium => "medium",
            TrafficLevel::High => "high",
        }
    }
}

impl fmt::Display for TrafficLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TrafficLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" | "low_traffic" => Ok(TrafficLevel::Low),
            "medium" | "medium_traffic" => Ok(TrafficLevel::Medium),
            "high" | "high_traffic" => Ok(TrafficLevel::High),
            other => Err(format!("unknown traffic level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyContext {
    pub traffic_level: TrafficLevel,
    pub arrival_rate_bps: f64,
    pub sla_latency_ms: f64,
    pub time_step: usize,
    #[serde(alias = "triaL_id")]
    pub trial_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyAction {
    pub ran_bw_mhz: f64,
    pub edge_cpu_ghz: f64,
}

impl StrategyAction {
    pub fn config(&self) -> Configuration {
        Configuration::new(self.ran_bw_mhz, self.edge_cpu_ghz)
    }
}

impl From<Configuration> for StrategyAction {
    fn from(c: Configuration) -> Self {
        Self {
            ran_bw_mhz: c.ran_bandwidth_mhz,
            edge_cpu_ghz: c.edge_cpu_frequency_ghz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub latency_ms: f64,
    pub sla_violation: bool,
    #[serde(default)]
    pub unresolved: bool,
    pub energy_watts: f64,
    pub energy_saved_percent: f64,
}

impl StrategyOutcome {
    pub fn is_failure(&self) -> bool {
        self.sla_violation || self.unresolved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistilledStrategy {
    pub context: StrategyContext,
    pub action: StrategyAction,
    pub outcome: StrategyOutcome,
    pub description: String,
    #[serde(default)]
    pub keywords: Keywords,
}

/// Band bounds used by keyword extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeywordBands {
    pub bw: (f64, f64),
    pub cpu: (f64, f64),
}

impl KeywordBands {
    pub fn new(params: &NetParams) -> Self {
        Self {
            bw: (BW_BAND_FLOOR, params.b_max / 1e6),
            cpu: CPU_BAND_RANGE,
        }
    }
}

impl Default for KeywordBands {
    fn default() -> Self {
        Self::new(&NetParams::default())
    }
}

fn band(x: f64, (lo, hi): (f64, f64)) -> &'static str {
    let third = (hi - lo) / 3.0;
    if x < lo + third {
        "low"
    } else if x < lo + 2.0 * third {
        "mid"
    } else {
        "high"
    }
}

pub fn outcome_token(o: &StrategyOutcome) -> &'static str {
    if o.sla_violation {
        SLA_VIOLATION
    } else if o.unresolved {
        UNRESOLVED
    } else {
        SUCCESS
    }
}

/// Fixed-vocabulary keyword extraction.
pub fn extract_keywords(
    ctx: &StrategyContext,
    action: &StrategyAction,
    outcome: &StrategyOutcome,
    bands: &KeywordBands,
) -> Keywords {
    [
        ctx.traffic_level.token().to_string(),
        outcome_token(outcome).to_string(),
        LATENCY.to_string(),
        SLA.to_string(),
        format!("bw_{}", band(action.ran_bw_mhz, bands.bw)),
        format!("cpu_{}", band(action.edge_cpu_ghz, bands.cpu)),
    ]
    .into_iter()
    .collect()
}

/// Keywords of a retrieval query for the given traffic level.
pub fn query_keywords(level: TrafficLevel) -> Keywords {
    [level.token(), LATENCY, SLA]
        .into_iter()
        .map(String::from)
        .collect()
}

pub fn describe(outcome: &StrategyOutcome) -> String {
    if outcome.sla_violation {
        format!(
            "Failure: SLA violated (latency {:.2} ms). Energy savings: {:.2}%",
            outcome.latency_ms, outcome.energy_saved_percent
        )
    } else if outcome.unresolved {
        "Failure: Negotiation unresolved. No configuration agreed.".to_string()
    } else {
        format!(
            "Success: Latency met. Energy savings: {:.2}%",
            outcome.energy_saved_percent
        )
    }
}

impl DistilledStrategy {
    /// Builds a record and derives its description and keywords.
    pub fn new(
        context: StrategyContext,
        action: StrategyAction,
        outcome: StrategyOutcome,
        bands: &KeywordBands,
    ) -> Self {
        let keywords = extract_keywords(&context, &action, &outcome, bands);
        let description = describe(&outcome);
        Self {
            context,
            action,
            outcome,
            description,
            keywords,
        }
    }

    pub fn trial_id(&self) -> usize {
        self.context.trial_id
    }

    pub fn is_failure(&self) -> bool {
        self.outcome.is_failure()
    }

    /// Reads a record from JSON, accepting the record itself or one wrapped
    /// under a single `distilled_strategy_example` key. Missing keywords are
    /// derived.
    pub fn from_json(text: &str, bands: &KeywordBands) -> Result<Self, serde_json::Error> {
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(inner) = value.get_mut("distilled_strategy_example") {
            value = inner.take();
        }
        let mut s: Self = serde_json::from_value(value)?;
        if s.keywords.is_empty() {
            s.keywords = extract_keywords(&s.context, &s.action, &s.outcome, bands);
        }
        Ok(s)
    }
}

/// Inputs to distillation besides the negotiation record itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillContext {
    pub trial_id: usize,
    /// Step at which the negotiation took place.
    pub time_step: usize,
    /// Arrival rate observed when negotiating, bits/s.
    pub arrival_rate: f64,
}

/// Turns a finished negotiation into a distilled record.
///
/// Agreements record the agreed configuration. Failed negotiations record the
/// last configuration put on the table (or the measured allocation when no
/// proposal was made) and are flagged unresolved.
pub fn distill(
    record: &NegotiationRecord,
    metrics: &MetricsSnapshot,
    ctx: &DistillContext,
    params: &NetParams,
) -> DistilledStrategy {
    let agreed = record.outcome == Outcome::Agreement;
    let action = record
        .agreed_config
        .or_else(|| {
            record
                .rounds
                .iter()
                .rev()
                .find_map(|t| t.message.as_ref().and_then(|m| m.payload))
        })
        .unwrap_or_else(|| Configuration::new(metrics.allocated_b / 1e6, metrics.allocated_f / 1e9));
    let context = StrategyContext {
        traffic_level: TrafficLevel::classify(ctx.arrival_rate, params),
        arrival_rate_bps: ctx.arrival_rate,
        sla_latency_ms: params.sla_latency * 1e3,
        time_step: ctx.time_step,
        trial_id: ctx.trial_id,
    };
    let outcome = StrategyOutcome {
        latency_ms: metrics.latency * 1e3,
        sla_violation: agreed && metrics.sla_violation,
        unresolved: !agreed,
        energy_watts: metrics.power,
        energy_saved_percent: metrics.energy_saved_percent,
    };
    DistilledStrategy::new(context, action.into(), outcome, &KeywordBands::new(params))
}
