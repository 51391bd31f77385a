//! Turn-based negotiation between the RAN and Edge agents.
//!
//! Each round both agents speak once, in a fixed order. Consensus is reached
//! when an agent accepts exactly the opponent's latest proposal, or when both
//! agents' latest proposals are identical at a round boundary.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::message::{parse, A2AMessage, Configuration, Intent};
use crate::environment::{Environment, NetworkState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Ran,
    Edge,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Ran => "RAN_AGENT",
            Role::Edge => "EDGE_AGENT",
        }
    }

    pub fn other(self) -> Role {
        match self {
            Role::Ran => Role::Edge,
            Role::Edge => Role::Ran,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Agreement,
    NoAgreement,
    Unresolved,
    ParseFailure,
}

/// Failure raised by an agent instead of producing text.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentFault {
    #[error("reasoner transport failed: {0}")]
    Transport(String),
    #[error("reasoner timed out: {0}")]
    Timeout(String),
    #[error("agent error: {0}")]
    Internal(String),
}

/// What an agent sees when asked to speak.
#[derive(Debug, Clone, Copy)]
pub struct TurnContext<'a> {
    pub observed: &'a NetworkState,
    /// 1-based.
    pub round: usize,
    pub max_rounds: usize,
    pub opponent_last: Option<&'a A2AMessage>,
    /// Latest configuration the opponent put on the table.
    pub opponent_proposal: Option<Configuration>,
    pub own_proposal: Option<Configuration>,
    pub transcript: &'a [Turn],
}

pub trait NegotiationAgent {
    fn role(&self) -> Role;

    /// Optional small talk before the first round; not counted as a round.
    fn greeting(&mut self) -> Option<String> {
        None
    }

    /// Produces one raw wire message.
    fn respond(&mut self, ctx: &TurnContext<'_>) -> Result<String, AgentFault>;

    /// Internal log lines produced while deliberating the last turn.
    fn drain_notes(&mut self) -> Vec<String> {
        Vec::new()
    }
}

impl<A: NegotiationAgent + ?Sized> NegotiationAgent for Box<A> {
    fn role(&self) -> Role {
        (**self).role()
    }
    fn greeting(&mut self) -> Option<String> {
        (**self).greeting()
    }
    fn respond(&mut self, ctx: &TurnContext<'_>) -> Result<String, AgentFault> {
        (**self).respond(ctx)
    }
    fn drain_notes(&mut self) -> Vec<String> {
        (**self).drain_notes()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub round: usize,
    pub speaker: Role,
    pub raw: String,
    pub message: Option<A2AMessage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationRecord {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preamble: Vec<(Role, String)>,
    pub rounds: Vec<Turn>,
    pub outcome: Outcome,
    pub agreed_config: Option<Configuration>,
    pub consensus_round: Option<usize>,
    /// Agent whose message closed the negotiation, if any.
    pub closed_by: Option<Role>,
    /// Cause of a parse failure or agent fault.
    pub failure: Option<String>,
    pub max_rounds: usize,
}

impl NegotiationRecord {
    pub fn is_agreement(&self) -> bool {
        self.outcome == Outcome::Agreement
    }

    /// Transcript of the exchange in the negotiation log layout.
    pub fn transcript(&self) -> String {
        let mut out = String::from("--- Starting A2A Negotiation ---\n\n");
        for (role, text) in &self.preamble {
            let _ = writeln!(out, "[{role}] Says: {text}");
        }
        if !self.preamble.is_empty() {
            out.push('\n');
        }
        let mut last: [Option<&A2AMessage>; 2] = [None, None];
        let idx = |r: Role| usize::from(r == Role::Edge);
        let mut current = 0;
        for turn in &self.rounds {
            if turn.round != current {
                current = turn.round;
                let _ = writeln!(out, "--- Negotiation Round {current}/{} ---", self.max_rounds);
                for role in [Role::Ran, Role::Edge] {
                    let shown = last[idx(role)]
                        .and_then(|m| m.payload.map(|c| (c, &m.reason)))
                        .map_or("None".to_string(), |(c, reason)| {
                            format!(
                                "{{'ran_bandwidth_mhz': {:.1}, 'edge_cpu_frequency_ghz': {:.1}, 'reason': {:?}}}",
                                c.ran_bandwidth_mhz, c.edge_cpu_frequency_ghz, reason
                            )
                        });
                    let _ = writeln!(out, "[{role}] Last proposed: {shown}");
                }
            }
            let _ = writeln!(out, "[{}] Thinking...", turn.speaker);
            for note in &turn.notes {
                let _ = writeln!(out, "[{}] {note}", turn.speaker);
            }
            let _ = writeln!(out, "[{}] Says: {}", turn.speaker, turn.raw);
            if let Some(m) = &turn.message {
                if m.payload.is_some() {
                    last[idx(turn.speaker)] = Some(m);
                }
            }
            out.push('\n');
        }
        match self.outcome {
            Outcome::Agreement => {
                let how = match self.closed_by {
                    Some(r) => format!("{} agent's ACCEPT_AGREEMENT", role_name(r)),
                    None => "identical proposals".to_string(),
                };
                let _ = writeln!(out, "Negotiation successful and actions enforced by {how}!");
            }
            Outcome::NoAgreement => {
                let _ = writeln!(out, "Negotiation ended: NO_AGREEMENT_POSSIBLE declared.");
            }
            Outcome::Unresolved => {
                let _ = writeln!(out, "Negotiation unresolved after {} rounds.", self.max_rounds);
            }
            Outcome::ParseFailure => {
                let cause = self.failure.as_deref().unwrap_or("unknown cause");
                let _ = writeln!(out, "Negotiation aborted: {cause}");
            }
        }
        out
    }
}

fn role_name(r: Role) -> &'static str {
    match r {
        Role::Ran => "RAN",
        Role::Edge => "Edge",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub max_rounds: usize,
    pub first_speaker: Role,
    pub preamble: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            max_rounds: 8,
            first_speaker: Role::Ran,
            preamble: true,
        }
    }
}

struct Closing {
    outcome: Outcome,
    agreed: Option<Configuration>,
    round: Option<usize>,
    closed_by: Option<Role>,
    failure: Option<String>,
}

impl Closing {
    fn fail(outcome: Outcome, by: Role, cause: String) -> Self {
        Self {
            outcome,
            agreed: None,
            round: None,
            closed_by: Some(by),
            failure: Some(cause),
        }
    }

    fn agree(cfg: Configuration, round: usize, by: Option<Role>) -> Self {
        Self {
            outcome: Outcome::Agreement,
            agreed: Some(cfg),
            round: Some(round),
            closed_by: by,
            failure: None,
        }
    }
}

/// Runs one negotiation. The environment is only touched on agreement, when
/// the agreed configuration is enforced into it.
pub fn run_negotiation<R, E>(
    ran: &mut R,
    edge: &mut E,
    env: &mut Environment,
    cfg: &ProtocolConfig,
) -> NegotiationRecord
where
    R: NegotiationAgent + ?Sized,
    E: NegotiationAgent + ?Sized,
{
    assert!(cfg.max_rounds >= 1, "max_rounds must be at least 1");
    let b_max_mhz = env.params().b_max / 1e6;
    let observed = env.state().clone();

    let mut preamble = Vec::new();
    if cfg.preamble {
        for role in [cfg.first_speaker, cfg.first_speaker.other()] {
            let text = match role {
                Role::Ran => ran.greeting(),
                Role::Edge => edge.greeting(),
            };
            if let Some(text) = text {
                preamble.push((role, text));
            }
        }
    }

    let mut turns: Vec<Turn> = Vec::new();
    // Index 0: RAN, 1: Edge.
    let mut proposals: [Option<Configuration>; 2] = [None, None];
    let mut last_msgs: [Option<A2AMessage>; 2] = [None, None];
    let idx = |r: Role| usize::from(r == Role::Edge);

    let identical = |p: &[Option<Configuration>; 2]| match p {
        [Some(a), Some(b)] if a == b => Some(*a),
        _ => None,
    };

    let mut closing = None;
    'rounds: for round in 1..=cfg.max_rounds {
        if round >= 2 {
            if let Some(c) = identical(&proposals) {
                closing = Some(Closing::agree(c, round, None));
                break;
            }
        }
        for speaker in [cfg.first_speaker, cfg.first_speaker.other()] {
            let me = idx(speaker);
            let them = 1 - me;
            let ctx = TurnContext {
                observed: &observed,
                round,
                max_rounds: cfg.max_rounds,
                opponent_last: last_msgs[them].as_ref(),
                opponent_proposal: proposals[them],
                own_proposal: proposals[me],
                transcript: &turns,
            };
            let (reply, notes) = match speaker {
                Role::Ran => (ran.respond(&ctx), ran.drain_notes()),
                Role::Edge => (edge.respond(&ctx), edge.drain_notes()),
            };
            let raw = match reply {
                Ok(raw) => raw,
                Err(fault) => {
                    turns.push(Turn {
                        round,
                        speaker,
                        raw: String::new(),
                        message: None,
                        notes,
                    });
                    closing = Some(Closing::fail(Outcome::ParseFailure, speaker, fault.to_string()));
                    break 'rounds;
                }
            };
            let parsed = parse(&raw);
            turns.push(Turn {
                round,
                speaker,
                raw,
                message: parsed.as_ref().ok().cloned(),
                notes,
            });
            let msg = match parsed {
                Ok(m) => m,
                Err(e) => {
                    closing = Some(Closing::fail(Outcome::ParseFailure, speaker, e.to_string()));
                    break 'rounds;
                }
            };

            if let Some(c) = msg.payload {
                if c.ran_bandwidth_mhz > b_max_mhz {
                    let cause = format!(
                        "configuration out of domain: ran_bandwidth_mhz {} exceeds {b_max_mhz}",
                        c.ran_bandwidth_mhz
                    );
                    closing = Some(Closing::fail(Outcome::ParseFailure, speaker, cause));
                    break 'rounds;
                }
            }

            match (msg.intent, msg.payload) {
                (Intent::NoAgreementPossible, _) => {
                    closing = Some(Closing {
                        outcome: Outcome::NoAgreement,
                        agreed: None,
                        round: None,
                        closed_by: Some(speaker),
                        failure: None,
                    });
                    break 'rounds;
                }
                (Intent::AcceptAgreement, Some(c)) if proposals[them] == Some(c) => {
                    closing = Some(Closing::agree(c, round, Some(speaker)));
                    break 'rounds;
                }
                (_, c) => proposals[me] = c,
            }
            last_msgs[me] = Some(msg);
        }
    }

    let closing = closing.unwrap_or_else(|| match identical(&proposals) {
        Some(c) => Closing::agree(c, cfg.max_rounds, None),
        None => Closing {
            outcome: Outcome::Unresolved,
            agreed: None,
            round: None,
            closed_by: None,
            failure: None,
        },
    });

    let mut record = NegotiationRecord {
        preamble,
        rounds: turns,
        outcome: closing.outcome,
        agreed_config: closing.agreed,
        consensus_round: closing.round,
        closed_by: closing.closed_by,
        failure: closing.failure,
        max_rounds: cfg.max_rounds,
    };
    if let Some(c) = record.agreed_config {
        if let Err(e) = env.enforce(c.bandwidth_hz(), c.cpu_hz()) {
            record.outcome = Outcome::ParseFailure;
            record.agreed_config = None;
            record.consensus_round = None;
            record.failure = Some(format!("enforcement rejected configuration: {e}"));
        }
    }
    record
}
