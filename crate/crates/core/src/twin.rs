//! Agent-internal digital twin used as a validation gate before proposals
//! leave an agent.
//!
//! The twin replays the queue recurrence from an observed state over the rest
//! of the episode, holding the arrival rate at its observed running average
//! and spectral efficiency at a fixed estimate.

use serde::{Deserialize, Serialize};

use crate::environment::NetworkState;
use crate::net_math::{self, NetError, NetParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaEstimate {
    /// `(eta_min + eta_max) / 2`.
    #[default]
    Midpoint,
    /// Spectral efficiency seen at the last observed step.
    LastObserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinPrediction {
    /// Seconds.
    pub predicted_latency: f64,
    /// Watts.
    pub predicted_energy: f64,
    pub predicted_cpu_conflicts: u32,
    pub passes_sla: bool,
}

#[derive(Debug, Clone)]
pub struct DigitalTwin {
    params: NetParams,
    eta_estimate: EtaEstimate,
}

impl DigitalTwin {
    pub fn new(params: NetParams) -> Self {
        Self {
            params,
            eta_estimate: EtaEstimate::Midpoint,
        }
    }

    pub fn with_eta_estimate(mut self, estimate: EtaEstimate) -> Self {
        self.eta_estimate = estimate;
        self
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    /// Predicts the episode latency if `(b, f)` were enforced now.
    pub fn test_proposal(
        &self,
        observed: &NetworkState,
        b: f64,
        f: f64,
    ) -> Result<TwinPrediction, NetError> {
        let p = &self.params;
        let predicted_energy = net_math::power(b, p)?;
        if !(f > 0.0 && f.is_finite()) {
            return Err(NetError::Domain {
                quantity: "f",
                value: f,
                domain: "(0, inf)".into(),
            });
        }
        let predicted_cpu_conflicts = u32::from(f > p.f_max);
        let f_eff = f.min(p.f_max);

        let eta = match self.eta_estimate {
            EtaEstimate::Midpoint => p.eta_midpoint(),
            EtaEstimate::LastObserved if observed.t > 0 => observed.eta_t,
            EtaEstimate::LastObserved => p.eta_midpoint(),
        };
        let rate = if observed.arrival_history.is_empty() {
            p.traffic_mu
        } else {
            observed.avg_arrival_rate
        };

        let mut edge = observed.queue_history_edge.clone();
        let mut ran = observed.queue_history_ran.clone();
        let mut q = observed.q;
        for _ in 0..observed.remaining_steps(p) {
            let step = net_math::step_queues(q, rate * p.tau, f_eff, eta, b, p)?;
            edge.push(step.residual.q_edge);
            ran.push(step.residual.q_ran);
            q = step.next;
        }

        let predicted_latency = if edge.is_empty() || rate <= 0.0 {
            0.0
        } else {
            net_math::end_to_end_latency(&edge, &ran, rate, p.latency_form)?
        };
        Ok(TwinPrediction {
            predicted_latency,
            predicted_energy,
            predicted_cpu_conflicts,
            passes_sla: predicted_latency < p.sla_latency && predicted_cpu_conflicts == 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Environment;

    fn observed(params: &NetParams, seed: u64) -> NetworkState {
        let mut env = Environment::new(params.clone(), seed).unwrap();
        env.advance().unwrap();
        env.state().clone()
    }

    #[test]
    fn ample_resources_predict_no_backlog() {
        let params = NetParams {
            traffic_sigma: 0.0,
            ..NetParams::default()
        };
        let twin = DigitalTwin::new(params.clone());
        let pred = twin
            .test_proposal(&NetworkState::fresh(&params), 40e6, 45e9)
            .unwrap();
        assert!(pred.predicted_latency < 1e-12);
        assert!(pred.passes_sla);
        assert_eq!(pred.predicted_energy, 20.0);
    }

    #[test]
    fn undersized_bandwidth_fails() {
        // Traffic 6e7 bits/s against 7 * 5 MHz = 3.5e7 bits/s of radio capacity.
        let params = NetParams {
            traffic_mu: 6e7,
            traffic_sigma: 0.0,
            ..NetParams::default()
        };
        let twin = DigitalTwin::new(params.clone());
        let obs = observed(&params, 1);
        let pred = twin.test_proposal(&obs, 5e6, 45e9).unwrap();
        assert!(pred.predicted_latency > params.sla_latency);
        assert!(!pred.passes_sla);

        // The backlog grows monotonically under the deficit.
        let mut q = obs.q;
        let mut last = 0.0;
        for _ in 0..obs.remaining_steps(&params) {
            let s = net_math::step_queues(q, 6e5, 45e9, 7.0, 5e6, &params).unwrap();
            assert!(s.residual.q_ran >= last);
            last = s.residual.q_ran;
            q = s.next;
        }
        assert!(last > 0.0);
    }

    #[test]
    fn over_asking_cpu_is_a_conflict() {
        let params = NetParams::default();
        let twin = DigitalTwin::new(params.clone());
        let pred = twin.test_proposal(&observed(&params, 2), 40e6, 50e9).unwrap();
        assert_eq!(pred.predicted_cpu_conflicts, 1);
        assert!(!pred.passes_sla);
    }

    #[test]
    fn deterministic() {
        let params = NetParams::default();
        let twin = DigitalTwin::new(params.clone());
        let obs = observed(&params, 4);
        assert_eq!(
            twin.test_proposal(&obs, 12e6, 33e9).unwrap(),
            twin.test_proposal(&obs, 12e6, 33e9).unwrap()
        );
    }

    #[test]
    fn domain_errors() {
        let params = NetParams::default();
        let twin = DigitalTwin::new(params.clone());
        let obs = observed(&params, 4);
        assert!(twin.test_proposal(&obs, 0.0, 30e9).is_err());
        assert!(twin.test_proposal(&obs, 50e6, 30e9).is_err());
        assert!(twin.test_proposal(&obs, 20e6, 0.0).is_err());
    }

    #[test]
    fn last_observed_eta_estimate() {
        let params = NetParams::default();
        let mut obs = NetworkState::fresh(&params);
        obs.t = 1;
        obs.eta_t = 6.0;
        obs.q.q_edge = 5e5;
        obs.current_arrival_rate = 5e7;
        obs.avg_arrival_rate = 5e7;
        obs.arrival_history = vec![5e7];
        obs.queue_history_edge = vec![0.0];
        obs.queue_history_ran = vec![0.0];
        let mid = DigitalTwin::new(params.clone());
        let last = DigitalTwin::new(params).with_eta_estimate(EtaEstimate::LastObserved);
        // 8 MHz carries 5.6e7 bits/s at eta 7 but only 4.8e7 at eta 6.
        let a = mid.test_proposal(&obs, 8e6, 45e9).unwrap();
        let b = last.test_proposal(&obs, 8e6, 45e9).unwrap();
        assert_eq!(a.predicted_latency, 0.0);
        assert!(b.predicted_latency > 0.0);
    }
}
