//! Stateless formulas of the RAN/Edge queuing model.
//!
//! Everything here is shared by the ground-truth [`crate::environment`] and
//! the agent-internal [`crate::twin`], so both sides of the validation gate
//! run exactly the same arithmetic. All quantities are SI: seconds, Hz, bits,
//! bits/s and watts.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("{quantity} = {value} is outside its domain {domain}")]
    Domain {
        quantity: &'static str,
        value: f64,
        domain: String,
    },
    #[error("latency is undefined for a zero average arrival rate")]
    UndefinedLatency,
    #[error("latency needs at least one queue sample")]
    EmptyHistory,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

fn domain(quantity: &'static str, value: f64, domain: impl Into<String>) -> NetError {
    NetError::Domain {
        quantity,
        value,
        domain: domain.into(),
    }
}

/// Which source feeds the RAN queue each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueueTransfer {
    /// Bits actually drained from the edge queue, `min(Q_edge, U_edge)`.
    #[default]
    Corrected,
    /// The literal `min(Q_ran, U_edge)` term; the RAN queue then gates its own arrivals.
    AsPrinted,
}

/// How the average queue length is turned into a delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatencyForm {
    /// Little's law, `W = L / lambda`.
    #[default]
    Division,
    /// `L * lambda`, kept for compatibility; not a time quantity.
    AsPrinted,
}

/// Physical parameters of the simulated slice. Defaults are the reference
/// digital-twin settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    /// Step duration in seconds.
    pub tau: f64,
    /// Peak edge CPU frequency in Hz.
    pub f_max: f64,
    /// Bits processed per CPU cycle.
    pub cpu_efficiency: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    /// Latency SLA in seconds.
    pub sla_latency: f64,
    /// Power per reference carrier in watts.
    pub p0: f64,
    /// Reference carrier bandwidth in Hz.
    pub b0: f64,
    pub b_max: f64,
    /// Mean and standard deviation of the arrival rate, bits/s.
    pub traffic_mu: f64,
    pub traffic_sigma: f64,
    pub n_steps: usize,
    /// Spatial multiplexing gain.
    pub spatial_gain: f64,
    #[serde(default)]
    pub queue_transfer: QueueTransfer,
    #[serde(default)]
    pub latency_form: LatencyForm,
}

impl Default for NetParams {
    fn default() -> Self {
        Self {
            tau: 0.01,
            f_max: 45.0e9,
            cpu_efficiency: 0.0017,
            eta_min: 6.0,
            eta_max: 8.0,
            sla_latency: 0.010,
            p0: 10.0,
            b0: 20.0e6,
            b_max: 40.0e6,
            traffic_mu: 5.0e7,
            traffic_sigma: 3.0e7,
            n_steps: 8,
            spatial_gain: 1.0,
            queue_transfer: QueueTransfer::Corrected,
            latency_form: LatencyForm::Division,
        }
    }
}

impl NetParams {
    pub fn validate(&self) -> Result<(), NetError> {
        let positive = [
            ("tau", self.tau),
            ("f_max", self.f_max),
            ("cpu_efficiency", self.cpu_efficiency),
            ("eta_min", self.eta_min),
            ("eta_max", self.eta_max),
            ("sla_latency", self.sla_latency),
            ("p0", self.p0),
            ("b0", self.b0),
            ("b_max", self.b_max),
            ("traffic_mu", self.traffic_mu),
            ("spatial_gain", self.spatial_gain),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(NetError::InvalidParams(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        if !(self.traffic_sigma.is_finite() && self.traffic_sigma >= 0.0) {
            return Err(NetError::InvalidParams(format!(
                "traffic_sigma must be non-negative, got {}",
                self.traffic_sigma
            )));
        }
        if self.eta_min > self.eta_max {
            return Err(NetError::InvalidParams(format!(
                "eta_min {} exceeds eta_max {}",
                self.eta_min, self.eta_max
            )));
        }
        if self.b0 > self.b_max {
            return Err(NetError::InvalidParams(format!(
                "b0 {} exceeds b_max {}",
                self.b0, self.b_max
            )));
        }
        if self.n_steps == 0 {
            return Err(NetError::InvalidParams("n_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn eta_midpoint(&self) -> f64 {
        0.5 * (self.eta_min + self.eta_max)
    }
}

/// Computation (edge) and communication (RAN) queue contents, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QueuePair {
    pub q_edge: f64,
    pub q_ran: f64,
}

impl QueuePair {
    pub fn total(&self) -> f64 {
        self.q_edge + self.q_ran
    }
}

/// Result of one queue update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueStep {
    /// Queue contents at the start of the next step.
    pub next: QueuePair,
    /// Backlog left after this step's service, before new arrivals join.
    /// Little's-law latency is computed over these samples.
    pub residual: QueuePair,
    /// Bits removed from the edge queue this step.
    pub edge_drained: f64,
    /// Bits transmitted over the radio this step.
    pub ran_drained: f64,
}

/// One arrival-rate draw: `max(N(mu, sigma), 0)`.
pub fn sample_arrival<R: Rng + ?Sized>(mu: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return mu.max(0.0);
    }
    let normal = Normal::new(mu, sigma).expect("sigma is finite and non-negative");
    normal.sample(rng).max(0.0)
}

/// Bits the edge CPU processes in one step at frequency `f`.
pub fn edge_processed_bits(f: f64, params: &NetParams) -> Result<f64, NetError> {
    if !(f > 0.0 && f <= params.f_max) {
        return Err(domain("f", f, format!("(0, {}]", params.f_max)));
    }
    Ok(params.tau * f * params.cpu_efficiency)
}

/// Radio capacity `eta * B * N_s` in bits/s.
pub fn channel_capacity(eta: f64, b: f64, params: &NetParams) -> Result<f64, NetError> {
    if !(eta >= params.eta_min && eta <= params.eta_max) {
        return Err(domain(
            "eta",
            eta,
            format!("[{}, {}]", params.eta_min, params.eta_max),
        ));
    }
    check_bandwidth(b, params)?;
    Ok(eta * b * params.spatial_gain)
}

fn check_bandwidth(b: f64, params: &NetParams) -> Result<(), NetError> {
    if !(b > 0.0 && b <= params.b_max) {
        return Err(domain("B", b, format!("(0, {}]", params.b_max)));
    }
    Ok(())
}

/// Advances both queues by one step.
pub fn step_queues(
    q: QueuePair,
    arrived_bits: f64,
    f: f64,
    eta: f64,
    b: f64,
    params: &NetParams,
) -> Result<QueueStep, NetError> {
    if !(arrived_bits >= 0.0 && arrived_bits.is_finite()) {
        return Err(domain("arrived_bits", arrived_bits, "[0, inf)"));
    }
    if !(q.q_edge >= 0.0 && q.q_ran >= 0.0) {
        return Err(domain("queue", q.q_edge.min(q.q_ran), "[0, inf)"));
    }
    let edge_service = edge_processed_bits(f, params)?;
    let ran_service = params.tau * channel_capacity(eta, b, params)?;

    let edge_residual = (q.q_edge - edge_service).max(0.0);
    let edge_drained = q.q_edge.min(edge_service);
    let ran_residual = (q.q_ran - ran_service).max(0.0);
    let ran_drained = q.q_ran.min(ran_service);

    let transfer = match params.queue_transfer {
        QueueTransfer::Corrected => edge_drained,
        QueueTransfer::AsPrinted => q.q_ran.min(edge_service),
    };

    Ok(QueueStep {
        next: QueuePair {
            q_edge: edge_residual + arrived_bits,
            q_ran: ran_residual + transfer,
        },
        residual: QueuePair {
            q_edge: edge_residual,
            q_ran: ran_residual,
        },
        edge_drained,
        ran_drained,
    })
}

/// Long-run latency of one queue from its sample history.
pub fn little_latency(
    queue_history: &[f64],
    avg_arrival_rate: f64,
    form: LatencyForm,
) -> Result<f64, NetError> {
    if queue_history.is_empty() {
        return Err(NetError::EmptyHistory);
    }
    if !(avg_arrival_rate > 0.0) {
        return Err(NetError::UndefinedLatency);
    }
    let mean = queue_history.iter().sum::<f64>() / queue_history.len() as f64;
    Ok(match form {
        LatencyForm::Division => mean / avg_arrival_rate,
        LatencyForm::AsPrinted => mean * avg_arrival_rate,
    })
}

/// End-to-end latency: edge latency plus RAN latency.
pub fn end_to_end_latency(
    edge_history: &[f64],
    ran_history: &[f64],
    avg_arrival_rate: f64,
    form: LatencyForm,
) -> Result<f64, NetError> {
    Ok(little_latency(edge_history, avg_arrival_rate, form)?
        + little_latency(ran_history, avg_arrival_rate, form)?)
}

/// RAN power draw `B * P0 / B0`.
pub fn power(b: f64, params: &NetParams) -> Result<f64, NetError> {
    check_bandwidth(b, params)?;
    Ok(b * params.p0 / params.b0)
}

/// Energy saved relative to running the full `b_max` carrier, in percent.
pub fn energy_saved_percent(b: f64, params: &NetParams) -> f64 {
    100.0 * (params.b_max - b) / params.b_max
}
