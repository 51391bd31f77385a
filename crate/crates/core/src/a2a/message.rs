//! Wire grammar for agent-to-agent messages.
//!
//! ```text
//! message   := intent [ ":" body ]
//! intent    := "PROPOSE_ACTION" | "ACCEPT_AGREEMENT" | "NO_AGREEMENT_POSSIBLE"
//! body      := json-object          (PROPOSE_ACTION, ACCEPT_AGREEMENT; required)
//!            | plain-text           (NO_AGREEMENT_POSSIBLE; optional)
//! ```
//!
//! The JSON object carries exactly `ran_bandwidth_mhz`, `edge_cpu_frequency_ghz`
//! (positive numbers) and `reason` (a flat string). Double quotes inside the
//! reason use ordinary JSON backslash escapes.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Intent {
    ProposeAction,
    AcceptAgreement,
    NoAgreementPossible,
}

impl Intent {
    pub const ALL: [Intent; 3] = [
        Intent::ProposeAction,
        Intent::AcceptAgreement,
        Intent::NoAgreementPossible,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Intent::ProposeAction => "PROPOSE_ACTION",
            Intent::AcceptAgreement => "ACCEPT_AGREEMENT",
            Intent::NoAgreementPossible => "NO_AGREEMENT_POSSIBLE",
        }
    }

    fn from_token(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.token() == s)
    }

    pub fn carries_payload(self) -> bool {
        !matches!(self, Intent::NoAgreementPossible)
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A resource configuration in wire units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub ran_bandwidth_mhz: f64,
    pub edge_cpu_frequency_ghz: f64,
}

impl Configuration {
    pub fn new(ran_bandwidth_mhz: f64, edge_cpu_frequency_ghz: f64) -> Self {
        Self {
            ran_bandwidth_mhz,
            edge_cpu_frequency_ghz,
        }
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.ran_bandwidth_mhz * 1e6
    }

    pub fn cpu_hz(&self) -> f64 {
        self.edge_cpu_frequency_ghz * 1e9
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BW: {:.1}, CPU: {:.1}",
            self.ran_bandwidth_mhz, self.edge_cpu_frequency_ghz
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2AMessage {
    pub intent: Intent,
    pub payload: Option<Configuration>,
    pub reason: String,
}

impl A2AMessage {
    pub fn propose(config: Configuration, reason: impl Into<String>) -> Self {
        Self {
            intent: Intent::ProposeAction,
            payload: Some(config),
            reason: reason.into(),
        }
    }

    pub fn accept(config: Configuration, reason: impl Into<String>) -> Self {
        Self {
            intent: Intent::AcceptAgreement,
            payload: Some(config),
            reason: reason.into(),
        }
    }

    pub fn no_agreement(reason: impl Into<String>) -> Self {
        Self {
            intent: Intent::NoAgreementPossible,
            payload: None,
            reason: reason.into(),
        }
    }

    /// Checks the structural invariants the parser enforces.
    pub fn validate(&self) -> Result<(), ParseErrorKind> {
        match (self.intent.carries_payload(), &self.payload) {
            (true, None) => return Err(ParseErrorKind::MissingPayload),
            (false, Some(_)) => return Err(ParseErrorKind::UnexpectedPayload),
            (true, Some(c)) => {
                check_field("ran_bandwidth_mhz", c.ran_bandwidth_mhz)?;
                check_field("edge_cpu_frequency_ghz", c.edge_cpu_frequency_ghz)?;
            }
            (false, None) => {
                if self.reason != self.reason.trim() || self.reason.contains('\n') {
                    return Err(ParseErrorKind::Malformed(
                        "refusal reason must be a single trimmed line".into(),
                    ));
                }
                if self.reason.starts_with('{') {
                    return Err(ParseErrorKind::UnexpectedPayload);
                }
            }
        }
        if is_structured(&self.reason) {
            return Err(ParseErrorKind::NestedReason);
        }
        Ok(())
    }

    /// Renders the wire form.
    pub fn serialize(&self) -> String {
        match self.payload {
            Some(c) => format!(
                "{}: {{\"ran_bandwidth_mhz\": {}, \"edge_cpu_frequency_ghz\": {}, \"reason\": {}}}",
                self.intent,
                json_number(c.ran_bandwidth_mhz),
                json_number(c.edge_cpu_frequency_ghz),
                Value::String(self.reason.clone()),
            ),
            None if self.reason.is_empty() => self.intent.token().to_string(),
            None => format!("{}: {}", self.intent, self.reason),
        }
    }
}

impl fmt::Display for A2AMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn json_number(x: f64) -> String {
    let text = Value::from(x).to_string();
    if text.contains(['.', 'e', 'E']) {
        text
    } else {
        format!("{text}.0")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("empty message")]
    Empty,
    #[error("unknown intent `{0}`")]
    UnknownIntent(String),
    #[error("intent requires a JSON payload")]
    MissingPayload,
    #[error("NO_AGREEMENT_POSSIBLE carries no payload")]
    UnexpectedPayload,
    #[error("invalid JSON payload: {0}")]
    InvalidJson(String),
    #[error("payload must be a JSON object")]
    NotAnObject,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` must be {expected}")]
    InvalidField {
        field: &'static str,
        expected: &'static str,
    },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("reason must be plain text, not structured data")]
    NestedReason,
    #[error("{0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {position}: {cause}")]
pub struct ParseError {
    pub position: usize,
    pub cause: ParseErrorKind,
}

impl ParseError {
    fn at(position: usize, cause: ParseErrorKind) -> Self {
        Self { position, cause }
    }
}

const FIELDS: [&str; 3] = ["ran_bandwidth_mhz", "edge_cpu_frequency_ghz", "reason"];

fn check_field(field: &'static str, value: f64) -> Result<(), ParseErrorKind> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ParseErrorKind::InvalidField {
            field,
            expected: "a positive finite number",
        })
    }
}

fn is_structured(text: &str) -> bool {
    let t = text.trim();
    (t.starts_with('{') || t.starts_with('['))
        && matches!(
            serde_json::from_str::<Value>(t),
            Ok(Value::Object(_) | Value::Array(_))
        )
}

/// Byte offset of a serde_json (line, column) position inside `body`.
fn json_offset(body: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in body.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len();
    }
    body.len()
}

/// Parses one raw agent utterance.
pub fn parse(raw: &str) -> Result<A2AMessage, ParseError> {
    let lead = raw.len() - raw.trim_start().len();
    let text = raw.trim();
    if text.is_empty() {
        return Err(ParseError::at(0, ParseErrorKind::Empty));
    }

    let (token, rest, rest_offset) = match text.find(':') {
        Some(i) => (&text[..i], Some(&text[i + 1..]), lead + i + 1),
        None => (text, None, lead + text.len()),
    };
    let intent = Intent::from_token(token.trim_end())
        .ok_or_else(|| ParseError::at(lead, ParseErrorKind::UnknownIntent(token.to_string())))?;
    if token.trim_end() != token {
        return Err(ParseError::at(
            lead + token.trim_end().len(),
            ParseErrorKind::Malformed("whitespace before `:`".into()),
        ));
    }

    if !intent.carries_payload() {
        let reason = rest.map(str::trim).unwrap_or("");
        if reason.starts_with('{') {
            return Err(ParseError::at(rest_offset, ParseErrorKind::UnexpectedPayload));
        }
        if reason.contains('\n') {
            return Err(ParseError::at(
                rest_offset,
                ParseErrorKind::Malformed("refusal reason must be a single line".into()),
            ));
        }
        if is_structured(reason) {
            return Err(ParseError::at(rest_offset, ParseErrorKind::NestedReason));
        }
        return Ok(A2AMessage::no_agreement(reason));
    }

    let body = rest.ok_or_else(|| ParseError::at(rest_offset, ParseErrorKind::MissingPayload))?;
    let body_lead = body.len() - body.trim_start().len();
    let body_offset = rest_offset + body_lead;
    let body = body.trim();
    if body.is_empty() {
        return Err(ParseError::at(body_offset, ParseErrorKind::MissingPayload));
    }
    if !body.starts_with('{') {
        return Err(ParseError::at(body_offset, ParseErrorKind::NotAnObject));
    }

    let value: Value = serde_json::from_str(body).map_err(|e| {
        ParseError::at(
            body_offset + json_offset(body, e.line(), e.column()),
            ParseErrorKind::InvalidJson(e.to_string()),
        )
    })?;
    let Value::Object(map) = value else {
        return Err(ParseError::at(body_offset, ParseErrorKind::NotAnObject));
    };
    let field_pos = |name: &str| {
        body.find(&format!("\"{name}\""))
            .map_or(body_offset, |i| body_offset + i)
    };

    if let Some(unknown) = map.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(ParseError::at(
            field_pos(unknown),
            ParseErrorKind::UnknownField(unknown.clone()),
        ));
    }
    let number = |name: &'static str| -> Result<f64, ParseError> {
        let v = map
            .get(name)
            .ok_or_else(|| ParseError::at(body_offset, ParseErrorKind::MissingField(name)))?;
        let x = v.as_f64().ok_or_else(|| {
            ParseError::at(
                field_pos(name),
                ParseErrorKind::InvalidField {
                    field: name,
                    expected: "a number",
                },
            )
        })?;
        check_field(name, x).map_err(|k| ParseError::at(field_pos(name), k))?;
        Ok(x)
    };
    let bandwidth = number("ran_bandwidth_mhz")?;
    let cpu = number("edge_cpu_frequency_ghz")?;

    let reason = match map.get("reason") {
        None => return Err(ParseError::at(body_offset, ParseErrorKind::MissingField("reason"))),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Object(_) | Value::Array(_)) => {
            return Err(ParseError::at(field_pos("reason"), ParseErrorKind::NestedReason))
        }
        Some(_) => {
            return Err(ParseError::at(
                field_pos("reason"),
                ParseErrorKind::InvalidField {
                    field: "reason",
                    expected: "a string",
                },
            ))
        }
    };
    if is_structured(&reason) {
        return Err(ParseError::at(field_pos("reason"), ParseErrorKind::NestedReason));
    }

    Ok(A2AMessage {
        intent,
        payload: Some(Configuration::new(bandwidth, cpu)),
        reason,
    })
}
