//! Prompt templates for an external reasoner.
//!
//! Templates use `{name}` placeholders. Only known names are substituted, so
//! the JSON examples in the templates pass through untouched.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AgentObjective, DeliberationContext};
use crate::a2a::Role;
use crate::memory::TrafficLevel;
use crate::net_math::NetParams;

pub const RAN_GOAL: &str = include_str!("../../assets/prompts/ran_goal.txt");
pub const RAN_BASE: &str = include_str!("../../assets/prompts/ran_base.txt");
pub const EDGE_GOAL: &str = include_str!("../../assets/prompts/edge_goal.txt");
pub const EDGE_BASE: &str = include_str!("../../assets/prompts/edge_base.txt");
pub const TOOL_USAGE: &str = include_str!("../../assets/prompts/tool_usage.txt");
pub const TURN: &str = include_str!("../../assets/prompts/turn.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
}

/// Replaces each `{key}` in `template`.
pub fn fill(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn static_vars(obj: &AgentObjective, params: &NetParams, ran_opener_mhz: f64) -> Vec<(&'static str, String)> {
    vec![
        ("bw_min", format!("{:.1}", obj.bw_range.0)),
        ("bw_max", format!("{:.1}", obj.bw_range.1)),
        ("cpu_min", format!("{:.0}", obj.cpu_range.0)),
        ("cpu_max", format!("{:.0}", obj.cpu_range.1)),
        ("target_ms", format!("{:.2}", obj.latency_target * 1e3)),
        ("sla_ms", format!("{:.1}", params.sla_latency * 1e3)),
        ("window", obj.compromise_window.to_string()),
        ("eta_min", format!("{:.1}", params.eta_min)),
        ("eta_max", format!("{:.1}", params.eta_max)),
        ("f_max", format!("{:.0}", params.f_max / 1e9)),
        ("ran_opener_mhz", format!("{ran_opener_mhz:.1}")),
    ]
}

pub fn system_prompt(obj: &AgentObjective, params: &NetParams) -> String {
    let (goal, base) = match obj.role {
        Role::Ran => (RAN_GOAL, RAN_BASE),
        Role::Edge => (EDGE_GOAL, EDGE_BASE),
    };
    let vars = static_vars(obj, params, 20.0);
    format!(
        "{}\nGoal: {}\n{}",
        fill(base, &vars).trim_end(),
        fill(goal, &vars).trim_end(),
        fill(TOOL_USAGE, &vars).trim_end()
    )
}

pub fn turn_prompt(ctx: &DeliberationContext, params: &NetParams) -> String {
    let o = &ctx.observed;
    let level = TrafficLevel::classify(o.avg_arrival_rate, params);
    let mut retrieved = String::new();
    for c in &ctx.retrieved {
        let s = &c.strategy;
        let _ = writeln!(
            retrieved,
            "- trial {} ({} traffic): {:.1} MHz, {:.1} GHz -> {} [score {:.3}]",
            s.trial_id(),
            s.context.traffic_level,
            s.action.ran_bw_mhz,
            s.action.edge_cpu_ghz,
            s.description,
            c.phi_final
        );
    }
    if retrieved.is_empty() {
        retrieved.push_str("- none\n");
    }
    let vars = [
        ("round", ctx.round.to_string()),
        ("max_rounds", ctx.max_rounds.to_string()),
        ("traffic_level", level.to_string()),
        ("arrival_mbps", format!("{:.2}", o.avg_arrival_rate / 1e6)),
        ("current_mbps", format!("{:.2}", o.current_arrival_rate / 1e6)),
        ("eta", format!("{:.2}", o.eta_t)),
        ("alloc_bw", format!("{:.1}", o.allocated_b / 1e6)),
        ("alloc_cpu", format!("{:.1}", o.allocated_f / 1e9)),
        (
            "own_last",
            ctx.own_proposal.map_or("none".into(), |c| c.to_string()),
        ),
        (
            "opponent_last",
            ctx.opponent_last.as_ref().map_or("none".into(), |m| m.serialize()),
        ),
        (
            "suggestion",
            ctx.suggestion.map_or("none".into(), |c| c.to_string()),
        ),
        ("retrieved", retrieved.trim_end().to_string()),
    ];
    fill(TURN, &vars)
}

pub fn bundle(obj: &AgentObjective, ctx: &DeliberationContext, params: &NetParams) -> PromptBundle {
    PromptBundle {
        system: system_prompt(obj, params),
        user: turn_prompt(ctx, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::NetworkState;

    #[test]
    fn placeholders_are_filled() {
        let p = NetParams::default();
        for role in [Role::Ran, Role::Edge] {
            let s = system_prompt(&AgentObjective::new(role), &p);
            assert!(s.contains("9.00 ms"));
            assert!(s.contains("PROPOSE_ACTION: {\"ran_bandwidth_mhz\""));
            let leftover = ["{bw_", "{cpu_", "{target", "{sla", "{window}", "{eta_", "{f_max}"];
            assert!(leftover.iter().all(|k| !s.contains(k)), "{s}");
        }
        let ctx = DeliberationContext {
            trial_id: 0,
            observed: NetworkState::fresh(&p),
            metrics: None,
            opponent_last: None,
            opponent_proposal: None,
            own_proposal: None,
            round: 1,
            max_rounds: 8,
            retrieved: Vec::new(),
            suggestion: None,
            twin_budget: 4,
        };
        let u = turn_prompt(&ctx, &p);
        assert!(u.starts_with("Negotiation round 1 of 8."));
        assert!(!u.contains('{'));
    }
}
