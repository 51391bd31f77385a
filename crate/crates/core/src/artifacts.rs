//! Files written by a run: per-trial records, CDF tables, the comparison
//! table, transcripts, memory dumps and the manifest.
//!
//! All names are relative to the output directory so that a manifest does
//! not depend on where the run was written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::config::{RunConfig, RunInfo};
use crate::harness::{cdf_with_bands, compare_scenarios, BootstrapSpec, ScenarioReport, StatsError};
use crate::memory::MemoryError;

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

fn write(dir: &Path, name: &str, contents: &str, names: &mut Vec<String>) -> Result<(), ArtifactError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    })?;
    names.push(name.to_string());
    Ok(())
}

/// `value,probability,band_low,band_high` rows; header only when there are
/// no samples.
pub fn cdf_csv(samples: &[f64], spec: &BootstrapSpec) -> String {
    let mut out = String::from("value,probability,band_low,band_high\n");
    match cdf_with_bands(samples, spec) {
        Ok(points) => {
            for p in points {
                let _ = writeln!(out, "{},{},{},{}", p.value, p.probability, p.band_low, p.band_high);
            }
        }
        Err(StatsError::InsufficientData | StatsError::NonFinite) => {}
    }
    out
}

pub fn trials_jsonl(report: &ScenarioReport) -> String {
    report
        .trials
        .iter()
        .map(|t| serde_json::to_string(t).expect("trial serializes") + "\n")
        .collect()
}

/// Writes every artifact of a run and then the manifest. Returns the names
/// written, manifest last.
pub fn write_run(dir: &Path, config: &RunConfig, reports: &[ScenarioReport]) -> Result<Vec<String>, ArtifactError> {
    fs::create_dir_all(dir).map_err(|source| ArtifactError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut names = Vec::new();
    for r in reports {
        let mode = r.scenario.as_str();
        let spec = BootstrapSpec {
            seed: r.config.seed,
            ..BootstrapSpec::default()
        };
        write(dir, &format!("{mode}_trials.jsonl"), &trials_jsonl(r), &mut names)?;
        let report_json = serde_json::to_string_pretty(r).expect("report serializes") + "\n";
        write(dir, &format!("{mode}_report.json"), &report_json, &mut names)?;
        let latency_ms: Vec<f64> = r.aggregate.latency_samples.iter().map(|l| l * 1e3).collect();
        write(dir, &format!("{mode}_latency_ms_cdf.csv"), &cdf_csv(&latency_ms, &spec), &mut names)?;
        write(
            dir,
            &format!("{mode}_energy_saved_cdf.csv"),
            &cdf_csv(&r.aggregate.energy_saved_samples, &spec),
            &mut names,
        )?;
        write(
            dir,
            &format!("{mode}_consensus_cdf.csv"),
            &cdf_csv(&r.aggregate.consensus_samples, &spec),
            &mut names,
        )?;
        write(dir, &format!("{mode}_transcripts.txt"), &r.transcripts(), &mut names)?;
        if let Some(store) = &r.memory {
            let name = format!("{mode}_memory_distilled.jsonl");
            store.save_distilled(&dir.join(&name))?;
            names.push(name);
            let name = format!("{mode}_memory_raw.txt");
            store.save_raw(&dir.join(&name))?;
            names.push(name);
        }
    }
    if reports.len() >= 2 {
        let table = compare_scenarios(reports);
        write(dir, "comparison.csv", &table.to_csv(), &mut names)?;
        write(dir, "comparison.txt", &table.to_text(), &mut names)?;
    }
    let mut manifest = config.clone();
    manifest.run = Some(RunInfo {
        version: env!("CARGO_PKG_VERSION").to_string(),
        artifacts: names.clone(),
    });
    write(dir, MANIFEST, &manifest.to_toml(), &mut names)?;
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_csv_rows() {
        let csv = cdf_csv(&[1.0, 2.0], &BootstrapSpec::default());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,0.5,"));
        assert!(lines[2].starts_with("2,1,1,1"));
        assert_eq!(cdf_csv(&[], &BootstrapSpec::default()).lines().count(), 1);
    }
}
