//! Ground-truth network into which agreed configurations are enforced.
//!
//! Differs from the digital twin in two ways: arrivals are drawn per step
//! from the traffic distribution, and spectral efficiency fluctuates
//! uniformly in `[eta_min, eta_max]` every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net_math::{self, NetError, NetParams, QueuePair};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("episode complete: all {0} steps have been simulated")]
    EpisodeComplete(usize),
    #[error("no step has been simulated yet")]
    InsufficientData,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Observable state of the network at step `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub t: usize,
    pub q: QueuePair,
    /// Allocated RAN bandwidth, Hz.
    pub allocated_b: f64,
    /// Allocated edge CPU frequency, Hz (already clamped to `f_max`).
    pub allocated_f: f64,
    pub eta_t: f64,
    pub current_arrival_rate: f64,
    pub avg_arrival_rate: f64,
    pub arrival_history: Vec<f64>,
    /// Post-service edge backlog per step.
    pub queue_history_edge: Vec<f64>,
    /// Post-service RAN backlog per step.
    pub queue_history_ran: Vec<f64>,
    pub cpu_conflict_count: u32,
}

impl NetworkState {
    pub fn fresh(params: &NetParams) -> Self {
        Self {
            t: 0,
            q: QueuePair::default(),
            allocated_b: params.b_max,
            allocated_f: params.f_max,
            eta_t: params.eta_midpoint(),
            current_arrival_rate: 0.0,
            avg_arrival_rate: 0.0,
            arrival_history: Vec::new(),
            queue_history_edge: Vec::new(),
            queue_history_ran: Vec::new(),
            cpu_conflict_count: 0,
        }
    }

    pub fn remaining_steps(&self, params: &NetParams) -> usize {
        params.n_steps.saturating_sub(self.t)
    }
}

/// Metrics after enforcement, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub latency: f64,
    pub latency_edge: f64,
    pub latency_ran: f64,
    pub sla_violation: bool,
    /// Edge service rate `f * U`, bits/s.
    pub transmission_rate: f64,
    /// Radio capacity at the current spectral efficiency, bits/s.
    pub channel_capacity: f64,
    pub q_edge: f64,
    pub q_ran: f64,
    pub power: f64,
    pub energy_saved_percent: f64,
    pub allocated_f: f64,
    pub allocated_b: f64,
    pub cpu_conflict_count: u32,
    pub time_step: usize,
    pub current_arrival_rate: f64,
    pub avg_arrival_rate: f64,
    pub eta: f64,
}

/// The metrics block as printed in negotiation logs; key names and order are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub latency_ms: f64,
    pub transmission_rate_bps: f64,
    pub cqueue_bits: f64,
    pub rqueue_bits: f64,
    pub energy_consumption_watts: f64,
    pub cpu_frequency_ghz_allocated: f64,
    pub bandwidth_mhz_allocated: f64,
    pub cpu_allocation_conflict_count: u32,
    pub current_time_step: usize,
    pub current_traffic_arrival_rate_bps: f64,
    pub average_traffic_arrival_rate_bps: f64,
    pub current_spectral_efficiency_bits_per_hz_per_s: f64,
}

impl MetricsSnapshot {
    pub fn block(&self) -> MetricsBlock {
        MetricsBlock {
            latency_ms: self.latency * 1e3,
            transmission_rate_bps: self.transmission_rate,
            cqueue_bits: self.q_edge,
            rqueue_bits: self.q_ran,
            energy_consumption_watts: self.power,
            cpu_frequency_ghz_allocated: self.allocated_f / 1e9,
            bandwidth_mhz_allocated: self.allocated_b / 1e6,
            cpu_allocation_conflict_count: self.cpu_conflict_count,
            current_time_step: self.time_step,
            current_traffic_arrival_rate_bps: self.current_arrival_rate,
            average_traffic_arrival_rate_bps: self.avg_arrival_rate,
            current_spectral_efficiency_bits_per_hz_per_s: self.eta,
        }
    }

    pub fn block_json(&self) -> String {
        serde_json::to_string_pretty(&self.block()).expect("metrics block serializes")
    }
}

/// Simulated network for a single trial.
#[derive(Debug, Clone)]
pub struct Environment {
    params: NetParams,
    state: NetworkState,
    rng: ChaCha8Rng,
    eta_override: Option<f64>,
}

impl Environment {
    pub fn new(params: NetParams, seed: u64) -> Result<Self, EnvError> {
        params.validate()?;
        let state = NetworkState::fresh(&params);
        Ok(Self {
            params,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            eta_override: None,
        })
    }

    /// Pins spectral efficiency to a constant instead of drawing it.
    pub fn with_constant_eta(mut self, eta: f64) -> Result<Self, EnvError> {
        if !(eta >= self.params.eta_min && eta <= self.params.eta_max) {
            return Err(NetError::Domain {
                quantity: "eta",
                value: eta,
                domain: format!("[{}, {}]", self.params.eta_min, self.params.eta_max),
            }
            .into());
        }
        self.eta_override = Some(eta);
        Ok(self)
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn is_complete(&self) -> bool {
        self.state.t >= self.params.n_steps
    }

    pub fn advance(&mut self) -> Result<&NetworkState, EnvError> {
        let p = &self.params;
        if self.state.t >= p.n_steps {
            return Err(EnvError::EpisodeComplete(p.n_steps));
        }
        let rate = net_math::sample_arrival(p.traffic_mu, p.traffic_sigma, &mut self.rng);
        let drawn_eta = if p.eta_min < p.eta_max {
            self.rng.random_range(p.eta_min..=p.eta_max)
        } else {
            p.eta_min
        };
        let eta = self.eta_override.unwrap_or(drawn_eta);

        let step = net_math::step_queues(
            self.state.q,
            rate * p.tau,
            self.state.allocated_f,
            eta,
            self.state.allocated_b,
            p,
        )?;

        let s = &mut self.state;
        s.t += 1;
        s.q = step.next;
        s.eta_t = eta;
        s.current_arrival_rate = rate;
        s.arrival_history.push(rate);
        s.avg_arrival_rate = s.arrival_history.iter().sum::<f64>() / s.arrival_history.len() as f64;
        s.queue_history_edge.push(step.residual.q_edge);
        s.queue_history_ran.push(step.residual.q_ran);
        Ok(&self.state)
    }

    /// Applies a configuration through the E2-like path. CPU requests above
    /// `f_max` are clamped and counted as allocation conflicts.
    pub fn enforce(&mut self, b: f64, f: f64) -> Result<&NetworkState, EnvError> {
        let p = &self.params;
        if !(b > 0.0 && b <= p.b_max) {
            return Err(NetError::Domain {
                quantity: "B",
                value: b,
                domain: format!("(0, {}]", p.b_max),
            }
            .into());
        }
        if !(f > 0.0 && f.is_finite()) {
            return Err(NetError::Domain {
                quantity: "f",
                value: f,
                domain: "(0, inf)".into(),
            }
            .into());
        }
        let s = &mut self.state;
        s.allocated_b = b;
        if f > p.f_max {
            s.allocated_f = p.f_max;
            s.cpu_conflict_count += 1;
        } else {
            s.allocated_f = f;
        }
        Ok(&self.state)
    }

    /// Advances until the episode horizon is reached.
    pub fn run_to_end(&mut self) -> Result<&NetworkState, EnvError> {
        while !self.is_complete() {
            self.advance()?;
        }
        Ok(&self.state)
    }

    pub fn measure(&self) -> Result<MetricsSnapshot, EnvError> {
        measure_state(&self.state, &self.params)
    }
}

/// Computes the metrics snapshot for any observed state.
pub fn measure_state(s: &NetworkState, p: &NetParams) -> Result<MetricsSnapshot, EnvError> {
    if s.t == 0 || s.queue_history_edge.is_empty() {
        return Err(EnvError::InsufficientData);
    }
    let (latency_edge, latency_ran) = if s.avg_arrival_rate > 0.0 {
        (
            net_math::little_latency(&s.queue_history_edge, s.avg_arrival_rate, p.latency_form)?,
            net_math::little_latency(&s.queue_history_ran, s.avg_arrival_rate, p.latency_form)?,
        )
    } else {
        // No traffic ever arrived, so no queue ever formed.
        (0.0, 0.0)
    };
    let latency = latency_edge + latency_ran;
    Ok(MetricsSnapshot {
        latency,
        latency_edge,
        latency_ran,
        sla_violation: latency > p.sla_latency,
        transmission_rate: s.allocated_f * p.cpu_efficiency,
        channel_capacity: s.eta_t * s.allocated_b * p.spatial_gain,
        q_edge: s.q.q_edge,
        q_ran: s.q.q_ran,
        power: net_math::power(s.allocated_b, p)?,
        energy_saved_percent: net_math::energy_saved_percent(s.allocated_b, p),
        allocated_f: s.allocated_f,
        allocated_b: s.allocated_b,
        cpu_conflict_count: s.cpu_conflict_count,
        time_step: s.t,
        current_arrival_rate: s.current_arrival_rate,
        avg_arrival_rate: s.avg_arrival_rate,
        eta: s.eta_t,
    })
}
