//! Agent-to-agent messaging: wire grammar and the turn-based negotiation loop.

pub mod message;
pub mod negotiation;

pub use message::{parse, A2AMessage, Configuration, Intent, ParseError, ParseErrorKind};
pub use negotiation::{
    run_negotiation, AgentFault, NegotiationAgent, NegotiationRecord, Outcome, ProtocolConfig,
    Role, Turn, TurnContext,
};
