//! Agent backed by an external chat-completion service.
//!
//! The service receives the role's system prompt and a per-turn summary and
//! must answer with one A2A line. Proposals and acceptances it produces are
//! checked on the agent's digital twin; a failing configuration is sent back
//! with the twin's verdict until the test budget runs out.
//!
//! Configuration for [`HttpTransport`] comes from `RANEDGE_LLM_URL`,
//! `RANEDGE_LLM_MODEL`, `RANEDGE_LLM_API_KEY` (optional) and
//! `RANEDGE_LLM_TIMEOUT_S` (optional, default 60).

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::prompts::{bundle, PromptBundle};
use super::rules::{RuleBasedAgent, REFUSAL_TEXT};
use super::{prediction_suffix, AgentObjective, DeliberationContext, TraceEvent};
use crate::a2a::{parse, A2AMessage, AgentFault, NegotiationAgent, Role, TurnContext};
use crate::memory::{InferenceRules, SharedMemory};
use crate::net_math::NetParams;
use crate::twin::DigitalTwin;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("{0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub prompts: PromptBundle,
    /// Structured form of the user prompt, for in-process reasoners.
    pub context: DeliberationContext,
    pub role: Role,
}

pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Blocking HTTP client for an OpenAI-style `/chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.into(),
            model: model.into(),
            api_key,
            agent,
        }
    }

    pub fn from_env() -> Result<Self, String> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let url = var("RANEDGE_LLM_URL").ok_or("RANEDGE_LLM_URL is not set")?;
        let model = var("RANEDGE_LLM_MODEL").ok_or("RANEDGE_LLM_MODEL is not set")?;
        let timeout = match var("RANEDGE_LLM_TIMEOUT_S") {
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|t| *t > 0.0)
                .ok_or_else(|| format!("RANEDGE_LLM_TIMEOUT_S must be a positive number, got `{s}`"))?,
            None => 60.0,
        };
        Ok(Self::new(url, model, var("RANEDGE_LLM_API_KEY"), Duration::from_secs_f64(timeout)))
    }
}

fn is_timeout(e: &ureq::Error) -> bool {
    match e {
        ureq::Error::Timeout(_) => true,
        ureq::Error::Io(io) => io.kind() == std::io::ErrorKind::TimedOut,
        _ => false,
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.prompts.system},
                {"role": "user", "content": request.prompts.user},
            ],
        });
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let wrap = |e: ureq::Error| {
            if is_timeout(&e) {
                TransportError::Timeout(e.to_string())
            } else {
                TransportError::Transport(e.to_string())
            }
        };
        let mut resp = req.send_json(&body).map_err(wrap)?;
        let value: Value = resp.body_mut().read_json().map_err(wrap)?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| TransportError::Transport("response has no choices[0].message.content".into()))
    }
}

/// Always answers with the same text.
#[derive(Debug, Clone)]
pub struct FixedTransport(pub String);

impl ChatTransport for FixedTransport {
    fn complete(&self, _: &ChatRequest) -> Result<String, TransportError> {
        Ok(self.0.clone())
    }
}

/// Replays a queue of replies, repeating the last one when exhausted.
#[derive(Debug)]
pub struct ScriptedTransport {
    replies: Mutex<VecDeque<Result<String, TransportError>>>,
    calls: Mutex<usize>,
}

impl ScriptedTransport {
    pub fn new(replies: Vec<Result<String, TransportError>>) -> Self {
        assert!(!replies.is_empty(), "scripted transport needs at least one reply");
        Self {
            replies: Mutex::new(replies.into()),
            calls: Mutex::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().unwrap()
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, _: &ChatRequest) -> Result<String, TransportError> {
        *self.calls.lock().unwrap() += 1;
        let mut q = self.replies.lock().unwrap();
        if q.len() > 1 {
            q.pop_front().unwrap()
        } else {
            q.front().cloned().unwrap()
        }
    }
}

/// Answers with a rule-based policy, for exercising the external path
/// without a network.
#[derive(Debug)]
pub struct PolicyTransport(pub Mutex<RuleBasedAgent>);

impl ChatTransport for PolicyTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        Ok(self.0.lock().unwrap().deliberate(&request.context).serialize())
    }
}

pub struct ExternalAgent {
    objective: AgentObjective,
    params: NetParams,
    twin: DigitalTwin,
    transport: Arc<dyn ChatTransport>,
    /// Extra attempts after a timeout.
    timeout_retries: usize,
    /// Context builder and memory access.
    helper: RuleBasedAgent,
    notes: Vec<String>,
    trace: Vec<TraceEvent>,
}

impl ExternalAgent {
    pub fn new(role: Role, params: NetParams, trial_id: usize, transport: Arc<dyn ChatTransport>) -> Self {
        Self {
            objective: AgentObjective::new(role),
            twin: DigitalTwin::new(params.clone()),
            helper: RuleBasedAgent::new(role, params.clone(), trial_id),
            params,
            transport,
            timeout_retries: 2,
            notes: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn with_memory(mut self, shared: SharedMemory, rules: InferenceRules) -> Self {
        self.helper = self.helper.with_memory(shared, rules);
        self
    }

    pub fn with_timeout_retries(mut self, retries: usize) -> Self {
        self.timeout_retries = retries;
        self
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    fn call(&mut self, req: &ChatRequest) -> Result<Option<String>, AgentFault> {
        let mut timeouts = 0;
        loop {
            match self.transport.complete(req) {
                Ok(text) => return Ok(Some(text)),
                Err(TransportError::Timeout(e)) => {
                    timeouts += 1;
                    self.notes.push(format!("Reasoner timed out ({timeouts}): {e}"));
                    if timeouts > self.timeout_retries {
                        return Ok(None);
                    }
                }
                Err(TransportError::Transport(e)) => return Err(AgentFault::Transport(e)),
            }
        }
    }

    fn refuse(&mut self, why: &str) -> String {
        self.notes.push(format!("{why} Forcing NO_AGREEMENT_POSSIBLE."));
        let msg = A2AMessage::no_agreement(REFUSAL_TEXT);
        self.trace.push(TraceEvent::Emitted {
            intent: msg.intent,
            config: None,
        });
        msg.serialize()
    }
}

impl NegotiationAgent for ExternalAgent {
    fn role(&self) -> Role {
        self.objective.role
    }

    fn respond(&mut self, turn: &TurnContext<'_>) -> Result<String, AgentFault> {
        let ctx = self.helper.prepare(turn);
        self.notes.extend(self.helper.drain_notes());
        self.trace.push(TraceEvent::Deliberation { round: ctx.round });
        let mut req = ChatRequest {
            prompts: bundle(&self.objective, &ctx, &self.params),
            context: ctx.clone(),
            role: self.objective.role,
        };

        for _ in 0..ctx.twin_budget {
            let Some(raw) = self.call(&req)? else {
                return Ok(self.refuse("Reasoner timeout budget exhausted."));
            };
            let mut msg = match parse(&raw) {
                Ok(m) => m,
                // Left for the protocol to flag.
                Err(_) => return Ok(raw),
            };
            let Some(c) = msg.payload else {
                self.trace.push(TraceEvent::Emitted {
                    intent: msg.intent,
                    config: None,
                });
                return Ok(msg.serialize());
            };
            let pred = match self.twin.test_proposal(&ctx.observed, c.bandwidth_hz(), c.cpu_hz()) {
                Ok(p) => p,
                Err(e) => {
                    self.notes.push(format!("Digital Twin rejected proposal ({c}): {e}"));
                    req.prompts.user = format!("{}\nYour configuration ({c}) is outside the allowed range: {e}. Choose another.", req.prompts.user);
                    continue;
                }
            };
            self.trace.push(TraceEvent::TwinTest {
                config: c,
                prediction: pred,
            });
            if pred.passes_sla {
                if !msg.reason.contains("Predicted Latency:") {
                    msg.reason = format!("{}. {}", msg.reason, prediction_suffix(&pred));
                }
                self.trace.push(TraceEvent::Emitted {
                    intent: msg.intent,
                    config: Some(c),
                });
                return Ok(msg.serialize());
            }
            let verdict = format!(
                "Digital Twin test failed for proposal ({c}). Predicted Latency: {:.2}ms (SLA: {:.1}ms), Predicted CPU Conflicts: {}.",
                pred.predicted_latency * 1e3,
                self.params.sla_latency * 1e3,
                pred.predicted_cpu_conflicts
            );
            self.notes.push(verdict.clone());
            req.prompts.user = format!("{}\n{verdict} Adjust and answer again.", req.prompts.user);
        }
        Ok(self.refuse("No valid negotiation message was set after all attempts."))
    }

    fn drain_notes(&mut self) -> Vec<String> {
        std::mem::take(&mut self.notes)
    }
}
