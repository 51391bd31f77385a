use std::fs;
use std::path::Path;
use std::thread;

use proptest::prelude::*;

use ranedge_core::harness::{run_scenario, run_scenarios, MemoryMode, RuleFactory, ScenarioConfig};
use ranedge_core::memory::{
    jaccard, DistilledStrategy, KeywordBands, MemoryParams, MemoryStore, QueryContext, RawMeta, SharedMemory,
    StrategyAction, StrategyContext, StrategyOutcome, TrafficLevel,
};

/// Distilled-strategy fixture, read from paper.md at the workspace root.
fn excerpt() -> String {
    let paper = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../paper.md")).unwrap();
    let start = paper.find("  \"distilled_strategy_example\"").unwrap();
    let body: Vec<&str> = paper[start..].lines().take_while(|l| !l.starts_with("\\end")).collect();
    // The source drops the closing `%"` of the description.
    let mut text = format!("{{\n{}", body.join("\n"));
    text = text.replace("Energy savings: 33.33\n", "Energy savings: 33.33%\"\n");
    text
}

#[test]
fn excerpt_loads_and_answers_a_medium_query() {
    let s = DistilledStrategy::from_json(&excerpt(), &KeywordBands::default()).unwrap();
    assert_eq!(s.trial_id(), 15);
    assert_eq!(s.context.traffic_level, TrafficLevel::Medium);
    assert_eq!((s.action.ran_bw_mhz, s.action.edge_cpu_ghz), (40.0, 30.0));
    assert_eq!(s.outcome.energy_saved_percent, 33.33);
    assert!(!s.outcome.sla_violation);
    assert_eq!(s.description, "Success: Latency met. Energy savings: 33.33%");
    let store = MemoryStore::from_strategies(vec![s]);
    let medium = QueryContext {
        traffic_level: TrafficLevel::Medium,
        trial_id: 20,
    };
    let got = store.retrieve(&medium, &MemoryParams::default()).unwrap();
    assert_eq!(got.len(), 1);
    assert!(got[0].phi_semantic > 0.0);
    // recency retrieval needs a semantic match, and low traffic shares latency/sla
    let low = QueryContext {
        traffic_level: TrafficLevel::Low,
        trial_id: 20,
    };
    let vanilla = store.retrieve(&low, &MemoryParams::vanilla()).unwrap();
    assert!(vanilla[0].phi_semantic < got[0].phi_semantic);
}

fn arb_strategy() -> impl Strategy<Value = DistilledStrategy> {
    (0usize..40, 0u8..3, 5.0..40.0f64, 25.0..50.0f64, 0u8..4).prop_map(|(trial, lvl, bw, cpu, kind)| {
        let level = [TrafficLevel::Low, TrafficLevel::Medium, TrafficLevel::High][lvl as usize];
        DistilledStrategy::new(
            StrategyContext {
                traffic_level: level,
                arrival_rate_bps: 5e7,
                sla_latency_ms: 10.0,
                time_step: 1,
                trial_id: trial,
            },
            StrategyAction {
                ran_bw_mhz: bw,
                edge_cpu_ghz: cpu,
            },
            StrategyOutcome {
                latency_ms: 5.0,
                sla_violation: kind == 0,
                unresolved: kind == 1,
                energy_watts: bw / 2.0,
                energy_saved_percent: 0.0,
            },
            &KeywordBands::default(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // Vanilla oracle: filter by overlap, sort newest first with a plain stable sort.
    #[test]
    fn vanilla_is_newest_matching_first(store in prop::collection::vec(arb_strategy(), 0..50), lvl in 0u8..3) {
        let level = [TrafficLevel::Low, TrafficLevel::Medium, TrafficLevel::High][lvl as usize];
        let q = QueryContext { traffic_level: level, trial_id: 40 };
        let qk = q.keywords();
        let mut expect: Vec<usize> = (0..store.len()).filter(|&i| jaccard(&qk, &store[i].keywords) > 0.0).collect();
        expect.sort_by_key(|&i| std::cmp::Reverse(store[i].trial_id()));
        expect.truncate(5);
        let got: Vec<usize> = MemoryStore::from_strategies(store)
            .retrieve(&q, &MemoryParams::vanilla()).unwrap().iter().map(|c| c.index).collect();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn retrieval_has_no_duplicates_and_respects_n_top(store in prop::collection::vec(arb_strategy(), 0..60), n in 1usize..8) {
        let params = MemoryParams { n_top: n, ..MemoryParams::default() };
        let q = QueryContext { traffic_level: TrafficLevel::High, trial_id: 40 };
        let got = MemoryStore::from_strategies(store.clone()).retrieve(&q, &params).unwrap();
        prop_assert_eq!(got.len(), n.min(store.len()));
        let mut idx: Vec<usize> = got.iter().map(|c| c.index).collect();
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), got.len());
        for c in &got {
            prop_assert!((c.phi_final - (c.phi_base - c.phi_diversity)).abs() < 1e-12);
        }
    }

    #[test]
    fn distilled_file_round_trips(store in prop::collection::vec(arb_strategy(), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        MemoryStore::from_strategies(store.clone()).save_distilled(&path).unwrap();
        let back = MemoryStore::load_distilled(&path, &KeywordBands::default()).unwrap();
        prop_assert_eq!(back, store);
    }
}

#[test]
fn concurrent_writers_lose_nothing() {
    let shared = SharedMemory::new(MemoryParams::default());
    thread::scope(|s| {
        for w in 0..4 {
            let m = shared.clone();
            s.spawn(move || {
                for i in 0..25 {
                    m.append_raw(
                        format!("w{w} entry {i}"),
                        RawMeta {
                            trial_id: i,
                            time_step: 0,
                            label: format!("w{w}"),
                        },
                    );
                    let _ = m.retrieve(&QueryContext {
                        traffic_level: TrafficLevel::Low,
                        trial_id: 100,
                    });
                }
            });
        }
    });
    assert_eq!(shared.snapshot().raw().len(), 100);
    assert_eq!(shared.query_count(), 100);
}

#[test]
fn parallel_scenarios_do_not_share_memory() {
    let cfgs: Vec<ScenarioConfig> = [MemoryMode::Vanilla, MemoryMode::Unbiased]
        .iter()
        .map(|&m| ScenarioConfig {
            trials: 8,
            ..ScenarioConfig::default()
        }
        .for_mode(m))
        .collect();
    let parallel = run_scenarios(&cfgs, &RuleFactory);
    for (cfg, par) in cfgs.iter().zip(parallel) {
        let par = par.unwrap();
        let alone = run_scenario(cfg).unwrap();
        assert_eq!(par.memory.as_ref().unwrap().len(), 8);
        assert_eq!(serde_json::to_string(&par).unwrap(), serde_json::to_string(&alone).unwrap());
    }
}
