use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ranedge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ranedge")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn full_run_writes_reports_and_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("results");
    let o = ranedge(&["run", "--scenario", "all", "--trials", "50", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("conflicts unbiased <= vanilla <= none: yes"), "{text}");
    for mode in ["none", "vanilla", "unbiased"] {
        let trials = fs::read_to_string(out.join(format!("{mode}_trials.jsonl"))).unwrap();
        assert_eq!(trials.lines().count(), 50);
        let cdf = fs::read_to_string(out.join(format!("{mode}_latency_ms_cdf.csv"))).unwrap();
        assert!(cdf.starts_with("value,probability,band_low,band_high\n"));
    }
    assert!(out.join("comparison.csv").is_file() && out.join("comparison.txt").is_file());
    assert!(!out.join("none_memory_distilled.jsonl").exists());
    let transcripts = fs::read_to_string(out.join("unbiased_transcripts.txt")).unwrap();
    assert!(transcripts.starts_with("--- Scenario: unbiased memory - Trial 0 (Starting at time step 1) ---"));
    assert!(transcripts.contains("Trial 49 Summary: Consensus Time = "));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(ranedge(&["run", "--trials", "0", "--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(ranedge(&["run", "--scenario", "some"]).status.code(), Some(2));
    assert_eq!(ranedge(&["run", "--frobnicate"]).status.code(), Some(2));
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[scenario]\nscenario = \"unbiased\"\n[memory]\ndebiasing_enabled = false\n").unwrap();
    let o = ranedge(&["validate-config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("conflicts"));
    assert!(!out.exists());
}

#[test]
fn io_errors_exit_with_three() {
    assert_eq!(ranedge(&["run", "--config", "/nonexistent/c.toml"]).status.code(), Some(3));
    assert_eq!(ranedge(&["inspect-memory", "/nonexistent/m.jsonl"]).status.code(), Some(3));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[scenario]\ntrials = 3\nseed = 1\nscenario = \"vanilla\"\n[memory]\ntheta = 2.0\n").unwrap();
    let out = tmp.path().join("o");
    let o = ranedge(&["run", "--config", cfg.to_str().unwrap(), "--seed", "5", "--decay-form", "as-printed", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("trials = 3"));
    assert!(manifest.contains("seed = 5"));
    assert!(manifest.contains("theta = 2.0"));
    assert!(manifest.contains("decay_form = \"as-printed\""));
    assert_eq!(fs::read_to_string(out.join("vanilla_trials.jsonl")).unwrap().lines().count(), 3);
}

#[test]
fn replay_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let o = ranedge(&["run", "--trials", "10", "--seed", "3", "--queue-transfer", "as-printed", "--out", first.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let manifest = first.join("manifest.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = ranedge(&["replay", manifest.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(files(&a), files(&b));
    assert_eq!(files(&a), files(&first));
}

#[test]
fn inspect_prints_components_that_sum_to_base() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    ranedge(&["run", "--scenario", "unbiased", "--trials", "12", "--out", out.to_str().unwrap()]);
    let store = out.join("unbiased_memory_distilled.jsonl");
    let o = ranedge(&["inspect-memory", store.to_str().unwrap(), "--query", "traffic=high"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(2)
        .map(|l| l.split_whitespace().take(9).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5, "{text}");
    for r in rows {
        // rank trial age a*sem b*decay d*infl base g*div final
        assert!((r[3] + r[4] + r[5] - r[6]).abs() < 2e-6, "{r:?}");
        assert!((r[6] - r[7] - r[8]).abs() < 2e-6, "{r:?}");
    }
}

#[test]
fn inspect_empty_store() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("empty.jsonl");
    fs::write(&store, "").unwrap();
    let o = ranedge(&["inspect-memory", store.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no matching strategies"));
}

#[test]
fn external_reasoner_without_endpoint_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_ranedge"))
        .args(["run", "--reasoner", "external", "--trials", "1"])
        .env_remove("RANEDGE_LLM_URL")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
