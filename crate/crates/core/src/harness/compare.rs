//! Side-by-side comparison of scenario reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::stats::median;
use super::{MemoryMode, ScenarioReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: MemoryMode,
    pub trials: usize,
    pub agreements: usize,
    pub conflicts: usize,
    pub parse_failures: usize,
    pub sla_violations: usize,
    pub sla_violation_rate: f64,
    pub avg_latency_exceeding_sla_ms: f64,
    pub median_consensus_round: Option<f64>,
    pub mean_consensus_round: Option<f64>,
    pub median_latency_ms: Option<f64>,
    pub median_energy_saved_percent: Option<f64>,
    pub retrieval_age_mean: Option<f64>,
    pub retrieval_age_std: Option<f64>,
    pub success_failure_ratio: Option<f64>,
}

impl ComparisonRow {
    pub fn from_report(r: &ScenarioReport) -> Self {
        let a = &r.aggregate;
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Self {
            scenario: r.scenario,
            trials: a.trials,
            agreements: a.agreements,
            conflicts: a.conflict_count,
            parse_failures: a.parse_failure_count,
            sla_violations: a.sla_violations,
            sla_violation_rate: a.sla_violation_rate,
            avg_latency_exceeding_sla_ms: a.avg_latency_exceeding_sla * 1e3,
            median_consensus_round: median(&a.consensus_samples).ok(),
            mean_consensus_round: mean(&a.consensus_samples),
            median_latency_ms: median(&a.latency_samples).ok().map(|x| x * 1e3),
            median_energy_saved_percent: median(&a.energy_saved_samples).ok(),
            retrieval_age_mean: r.bias.map(|b| b.age_mean),
            retrieval_age_std: r.bias.map(|b| b.age_std),
            success_failure_ratio: r.bias.map(|b| b.success_failure_ratio.as_f64()),
        }
    }
}

/// Expected orderings between the three scenarios. A flag is `None` when a
/// scenario it needs is missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingFlags {
    /// conflicts: unbiased <= vanilla <= none.
    pub conflicts_ordered: Option<bool>,
    /// mean consensus round: unbiased <= vanilla <= none.
    pub consensus_ordered: Option<bool>,
    /// sla violation rate: unbiased <= vanilla.
    pub violations_ordered: Option<bool>,
    pub unbiased_zero_violations: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub ordering: OrderingFlags,
    /// Unbiased minus vanilla conflicts.
    pub conflict_delta_vs_vanilla: Option<i64>,
    /// Unbiased minus vanilla sla violation rate, percentage points.
    pub violation_delta_vs_vanilla: Option<f64>,
}

fn chain(vals: [Option<f64>; 3]) -> Option<bool> {
    let [u, v, n] = vals;
    Some(u? <= v? && v? <= n?)
}

pub fn compare_scenarios(reports: &[ScenarioReport]) -> ComparisonTable {
    let mut rows: Vec<ComparisonRow> = reports.iter().map(ComparisonRow::from_report).collect();
    rows.sort_by_key(|r| r.scenario);
    let get = |m: MemoryMode| rows.iter().find(|r| r.scenario == m);
    let (none, van, unb) = (get(MemoryMode::None), get(MemoryMode::Vanilla), get(MemoryMode::Unbiased));
    let conflicts = |r: Option<&ComparisonRow>| r.map(|r| r.conflicts as f64);
    // Without any agreement the consensus time is the round cap.
    let consensus = |r: Option<&ComparisonRow>| {
        r.map(|r| r.mean_consensus_round.unwrap_or(f64::INFINITY))
    };
    let ordering = OrderingFlags {
        conflicts_ordered: chain([conflicts(unb), conflicts(van), conflicts(none)]),
        consensus_ordered: chain([consensus(unb), consensus(van), consensus(none)]),
        violations_ordered: match (unb, van) {
            (Some(u), Some(v)) => Some(u.sla_violation_rate <= v.sla_violation_rate),
            _ => None,
        },
        unbiased_zero_violations: unb.map(|u| u.sla_violations == 0),
    };
    let (conflict_delta_vs_vanilla, violation_delta_vs_vanilla) = match (unb, van) {
        (Some(u), Some(v)) => (
            Some(u.conflicts as i64 - v.conflicts as i64),
            Some(u.sla_violation_rate - v.sla_violation_rate),
        ),
        _ => (None, None),
    };
    ComparisonTable {
        rows,
        ordering,
        conflict_delta_vs_vanilla,
        violation_delta_vs_vanilla,
    }
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.prec$}"))
}

impl ComparisonTable {
    pub const CSV_HEADER: &'static str = "scenario,trials,agreements,conflicts,parse_failures,sla_violations,sla_violation_rate_percent,avg_latency_exceeding_sla_ms,median_consensus_round,mean_consensus_round,median_latency_ms,median_energy_saved_percent,retrieval_age_mean,retrieval_age_std,success_failure_ratio";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.4},{:.4},{},{},{},{},{},{},{}",
                r.scenario,
                r.trials,
                r.agreements,
                r.conflicts,
                r.parse_failures,
                r.sla_violations,
                r.sla_violation_rate,
                r.avg_latency_exceeding_sla_ms,
                opt(r.median_consensus_round, 2),
                opt(r.mean_consensus_round, 4),
                opt(r.median_latency_ms, 4),
                opt(r.median_energy_saved_percent, 4),
                opt(r.retrieval_age_mean, 4),
                opt(r.retrieval_age_std, 4),
                opt(r.success_failure_ratio, 4),
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<9} {:>6} {:>6} {:>9} {:>7} {:>9} {:>10} {:>9} {:>10} {:>8} {:>8} {:>7}\n",
            "scenario", "trials", "agree", "conflicts", "parse", "sla_viol%", "exceed_ms", "cons_mean", "lat_med_ms", "saved%", "age", "s/f"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<9} {:>6} {:>6} {:>9} {:>7} {:>9.2} {:>10.3} {:>9} {:>10} {:>8} {:>8} {:>7}",
                r.scenario.as_str(),
                r.trials,
                r.agreements,
                r.conflicts,
                r.parse_failures,
                r.sla_violation_rate,
                r.avg_latency_exceeding_sla_ms,
                opt(r.mean_consensus_round, 2),
                opt(r.median_latency_ms, 3),
                opt(r.median_energy_saved_percent, 2),
                opt(r.retrieval_age_mean, 2),
                opt(r.success_failure_ratio, 2),
            );
        }
        let flag = |f: Option<bool>| match f {
            Some(true) => "yes",
            Some(false) => "no",
            None => "n/a",
        };
        let o = &self.ordering;
        let _ = writeln!(out, "conflicts unbiased <= vanilla <= none: {}", flag(o.conflicts_ordered));
        let _ = writeln!(out, "consensus unbiased <= vanilla <= none: {}", flag(o.consensus_ordered));
        let _ = writeln!(out, "violation rate unbiased <= vanilla: {}", flag(o.violations_ordered));
        let _ = writeln!(out, "unbiased without violations: {}", flag(o.unbiased_zero_violations));
        out
    }
}
