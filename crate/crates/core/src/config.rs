//! Run configuration file. Sections mirror the parameter tables and use
//! their units (GHz, MHz, ms); conversion to SI happens once, in
//! [`RunConfig::scenarios`].
//!
//! Missing keys take defaults, so a file only lists what it changes. The run
//! manifest is this same structure fully written out plus a `[run]` table.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::PolicySettings;
use crate::harness::{MemoryMode, ReasonerKind, ScenarioConfig};
use crate::memory::{DecayForm, InferenceRules, MemoryParams};
use crate::net_math::{LatencyForm, NetParams, QueueTransfer};
use crate::twin::EtaEstimate;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioSelection {
    None,
    Vanilla,
    Unbiased,
    #[default]
    All,
}

impl ScenarioSelection {
    pub fn modes(self) -> Vec<MemoryMode> {
        match self {
            ScenarioSelection::None => vec![MemoryMode::None],
            ScenarioSelection::Vanilla => vec![MemoryMode::Vanilla],
            ScenarioSelection::Unbiased => vec![MemoryMode::Unbiased],
            ScenarioSelection::All => MemoryMode::ALL.to_vec(),
        }
    }
}

impl FromStr for ScenarioSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(ScenarioSelection::All),
            other => match other.parse::<MemoryMode>()? {
                MemoryMode::None => Ok(ScenarioSelection::None),
                MemoryMode::Vanilla => Ok(ScenarioSelection::Vanilla),
                MemoryMode::Unbiased => Ok(ScenarioSelection::Unbiased),
            },
        }
    }
}

impl fmt::Display for ScenarioSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioSelection::None => "none",
            ScenarioSelection::Vanilla => "vanilla",
            ScenarioSelection::Unbiased => "unbiased",
            ScenarioSelection::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinSection {
    pub time_step_s: f64,
    pub max_cpu_frequency_ghz: f64,
    /// Bits per CPU cycle.
    pub cpu_processing_efficiency: f64,
    pub min_spectral_efficiency: f64,
    pub max_spectral_efficiency: f64,
    pub sla_latency_ms: f64,
    pub ran_power_per_carrier_w: f64,
    pub reference_bandwidth_mhz: f64,
    pub max_bandwidth_mhz: f64,
    pub base_average_traffic_bps: f64,
    pub traffic_variation_bps: f64,
    pub number_of_time_steps: usize,
    pub spatial_gain: f64,
    pub queue_transfer: QueueTransfer,
    pub latency_form: LatencyForm,
    /// Spectral efficiency the agents' twins assume.
    pub eta_estimate: EtaEstimate,
}

impl Default for TwinSection {
    fn default() -> Self {
        let p = NetParams::default();
        Self {
            time_step_s: p.tau,
            max_cpu_frequency_ghz: 45.0,
            cpu_processing_efficiency: p.cpu_efficiency,
            min_spectral_efficiency: p.eta_min,
            max_spectral_efficiency: p.eta_max,
            sla_latency_ms: 10.0,
            ran_power_per_carrier_w: p.p0,
            reference_bandwidth_mhz: 20.0,
            max_bandwidth_mhz: 40.0,
            base_average_traffic_bps: p.traffic_mu,
            traffic_variation_bps: p.traffic_sigma,
            number_of_time_steps: p.n_steps,
            spatial_gain: p.spatial_gain,
            queue_transfer: p.queue_transfer,
            latency_form: p.latency_form,
            eta_estimate: EtaEstimate::Midpoint,
        }
    }
}

impl TwinSection {
    pub fn net_params(&self) -> NetParams {
        NetParams {
            tau: self.time_step_s,
            f_max: self.max_cpu_frequency_ghz * 1e9,
            cpu_efficiency: self.cpu_processing_efficiency,
            eta_min: self.min_spectral_efficiency,
            eta_max: self.max_spectral_efficiency,
            sla_latency: self.sla_latency_ms / 1e3,
            p0: self.ran_power_per_carrier_w,
            b0: self.reference_bandwidth_mhz * 1e6,
            b_max: self.max_bandwidth_mhz * 1e6,
            traffic_mu: self.base_average_traffic_bps,
            traffic_sigma: self.traffic_variation_bps,
            n_steps: self.number_of_time_steps,
            spatial_gain: self.spatial_gain,
            queue_transfer: self.queue_transfer,
            latency_form: self.latency_form,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorySection {
    /// Normally implied by the scenario; setting it must agree with it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub debiasing_enabled: Option<bool>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub theta: f64,
    pub n_top: usize,
    pub decay_form: DecayForm,
    pub force_failure_slot: bool,
}

impl Default for MemorySection {
    fn default() -> Self {
        let m = MemoryParams::default();
        Self {
            debiasing_enabled: None,
            alpha: m.alpha,
            beta: m.beta,
            gamma: m.gamma,
            delta: m.delta,
            theta: m.theta,
            n_top: m.n_top,
            decay_form: m.decay_form,
            force_failure_slot: m.force_failure_slot,
        }
    }
}

impl MemorySection {
    pub fn params(&self) -> MemoryParams {
        MemoryParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            theta: self.theta,
            n_top: self.n_top,
            debiasing_enabled: self.debiasing_enabled.unwrap_or(true),
            decay_form: self.decay_form,
            force_failure_slot: self.force_failure_slot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub scenario: ScenarioSelection,
    pub trials: usize,
    pub seed: u64,
    pub max_rounds: usize,
    pub reasoner: ReasonerKind,
    /// Extra attempts after a reasoner timeout.
    pub timeout_retries: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            scenario: ScenarioSelection::All,
            trials: 50,
            seed: 7,
            max_rounds: 8,
            reasoner: ReasonerKind::Rules,
            timeout_retries: 2,
        }
    }
}

/// Provenance written into manifests; ignored when a manifest is read back.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunInfo {
    pub version: String,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
    pub scenario: ScenarioSection,
    pub digital_twin: TwinSection,
    pub memory: MemorySection,
    pub agents: PolicySettings,
    pub inference: InferenceRules,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// One scenario configuration per selected mode, validated.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>, ConfigError> {
        let s = &self.scenario;
        if let Some(d) = self.memory.debiasing_enabled {
            let conflicting = match s.scenario {
                ScenarioSelection::Vanilla => d,
                ScenarioSelection::Unbiased => !d,
                ScenarioSelection::None | ScenarioSelection::All => true,
            };
            if conflicting {
                return Err(ConfigError::Invalid(format!(
                    "debiasing_enabled = {d} conflicts with scenario `{}`",
                    s.scenario
                )));
            }
        }
        let base = ScenarioConfig {
            memory_mode: MemoryMode::None,
            trials: s.trials,
            seed: s.seed,
            max_rounds: s.max_rounds,
            reasoner: s.reasoner,
            net: self.digital_twin.net_params(),
            memory: self.memory.params(),
            policy: self.agents,
            inference: self.inference,
            eta_estimate: self.digital_twin.eta_estimate,
        };
        base.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(s.scenario.modes().into_iter().map(|m| base.clone().for_mode(m)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let cfgs = RunConfig::default().scenarios().unwrap();
        assert_eq!(cfgs.len(), 3);
        assert_eq!(cfgs[0].net, NetParams::default());
        assert_eq!(cfgs[2].effective_memory(), MemoryParams::default());
        assert_eq!(cfgs[0].trials, 50);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c = RunConfig::parse("[digital_twin]\nmax_bandwidth_mhz = 30.0\n[memory]\ntheta = 2.5\n").unwrap();
        assert_eq!(c.digital_twin.net_params().b_max, 30e6);
        assert_eq!(c.digital_twin.max_cpu_frequency_ghz, 45.0);
        assert_eq!(c.memory.theta, 2.5);
        assert_eq!(c.memory.alpha, 1.0);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(RunConfig::parse("[memory]\nalpah = 1.0\n"), Err(ConfigError::Syntax(_))));
        assert!(matches!(RunConfig::parse("[nope]\n"), Err(ConfigError::Syntax(_))));
    }

    #[test]
    fn conflicting_debias_switch() {
        let c = RunConfig::parse("[scenario]\nscenario = \"unbiased\"\n[memory]\ndebiasing_enabled = false\n").unwrap();
        assert!(matches!(c.scenarios(), Err(ConfigError::Invalid(_))));
        let ok = RunConfig::parse("[scenario]\nscenario = \"vanilla\"\n[memory]\ndebiasing_enabled = false\n").unwrap();
        assert_eq!(ok.scenarios().unwrap().len(), 1);
    }

    #[test]
    fn zero_trials_invalid() {
        let c = RunConfig::parse("[scenario]\ntrials = 0\n").unwrap();
        assert!(c.scenarios().is_err());
    }

    #[test]
    fn written_config_reads_back_identically() {
        let mut c = RunConfig::parse("[digital_twin]\nqueue_transfer = \"as-printed\"\n[scenario]\nseed = 99\n").unwrap();
        c.run = Some(RunInfo {
            version: "x".into(),
            artifacts: vec!["a.jsonl".into()],
        });
        let text = c.to_toml();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        assert_eq!(RunConfig::parse(&text).unwrap().to_toml(), text);
    }
}
