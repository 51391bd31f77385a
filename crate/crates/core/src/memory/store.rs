//! Two-layer memory: a chronological raw log and the distilled store that
//! retrieval ranks.

use std::cmp::Ordering;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scoring::{jaccard, score, MemoryParams, ScoredCandidate};
use super::strategy::{query_keywords, DistilledStrategy, KeywordBands, Keywords, TrafficLevel};
use super::MemoryError;

/// Simulated time stamp of a raw log entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMeta {
    pub trial_id: usize,
    pub time_step: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEntry {
    pub meta: RawMeta,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryContext {
    pub traffic_level: TrafficLevel,
    pub trial_id: usize,
}

impl QueryContext {
    pub fn keywords(&self) -> Keywords {
        query_keywords(self.traffic_level)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryStore {
    distilled: Vec<DistilledStrategy>,
    raw: Vec<RawEntry>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_strategies(distilled: Vec<DistilledStrategy>) -> Self {
        Self {
            distilled,
            raw: Vec::new(),
        }
    }

    pub fn insert(&mut self, s: DistilledStrategy) {
        self.distilled.push(s);
    }

    pub fn append_raw(&mut self, text: impl Into<String>, meta: RawMeta) {
        self.raw.push(RawEntry {
            meta,
            text: text.into(),
        });
    }

    pub fn strategies(&self) -> &[DistilledStrategy] {
        &self.distilled
    }

    pub fn raw(&self) -> &[RawEntry] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.distilled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distilled.is_empty()
    }

    pub fn clear(&mut self) {
        self.distilled.clear();
        self.raw.clear();
    }

    /// Ranks the distilled layer for a query. Never reads the raw layer.
    pub fn retrieve(
        &self,
        query: &QueryContext,
        params: &MemoryParams,
    ) -> Result<Vec<ScoredCandidate>, MemoryError> {
        let qk = query.keywords();
        if params.debiasing_enabled {
            greedy_retrieve(&self.distilled, &qk, query.trial_id, params)
        } else {
            recency_retrieve(&self.distilled, &qk, query.trial_id, params)
        }
    }

    pub fn save_distilled(&self, path: &Path) -> Result<(), MemoryError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for s in &self.distilled {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_distilled(path: &Path, bands: &KeywordBands) -> Result<Vec<DistilledStrategy>, MemoryError> {
        let r = BufReader::new(fs::File::open(path)?);
        let mut out = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s = DistilledStrategy::from_json(&line, bands).map_err(|e| MemoryError::Record {
                line: i + 1,
                cause: e.to_string(),
            })?;
            out.push(s);
        }
        Ok(out)
    }

    /// Raw layer as a plain-text log: one header line per entry followed by
    /// its text lines.
    pub fn save_raw(&self, path: &Path) -> Result<(), MemoryError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for e in &self.raw {
            let lines: Vec<&str> = e.text.lines().collect();
            writeln!(
                w,
                "#### trial={} step={} lines={} label={}",
                e.meta.trial_id,
                e.meta.time_step,
                lines.len(),
                e.meta.label
            )?;
            for l in lines {
                writeln!(w, "{l}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_raw(path: &Path) -> Result<Vec<RawEntry>, MemoryError> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let mut out = Vec::new();
        while let Some((i, header)) = lines.next() {
            let bad = |cause: &str| MemoryError::Record {
                line: i + 1,
                cause: cause.to_string(),
            };
            let rest = header.strip_prefix("#### ").ok_or_else(|| bad("expected entry header"))?;
            let field = |key: &str, rest: &mut &str| -> Result<String, MemoryError> {
                let body = rest
                    .strip_prefix(key)
                    .and_then(|r| r.strip_prefix('='))
                    .ok_or_else(|| bad("malformed header"))?;
                if key == "label" {
                    *rest = "";
                    return Ok(body.to_string());
                }
                let (v, tail) = body.split_once(' ').ok_or_else(|| bad("malformed header"))?;
                *rest = tail;
                Ok(v.to_string())
            };
            let mut rest = rest;
            let num = |s: String| s.parse::<usize>().map_err(|_| bad("non-numeric header field"));
            let trial_id = num(field("trial", &mut rest)?)?;
            let time_step = num(field("step", &mut rest)?)?;
            let count = num(field("lines", &mut rest)?)?;
            let label = field("label", &mut rest)?;
            let mut body = Vec::with_capacity(count);
            for _ in 0..count {
                let (_, l) = lines.next().ok_or_else(|| bad("truncated entry"))?;
                body.push(l);
            }
            out.push(RawEntry {
                meta: RawMeta {
                    trial_id,
                    time_step,
                    label,
                },
                text: body.join("\n"),
            });
        }
        Ok(out)
    }

    /// Restores both layers from files written by the save methods.
    pub fn load(distilled: &Path, raw: Option<&Path>, bands: &KeywordBands) -> Result<Self, MemoryError> {
        Ok(Self {
            distilled: Self::load_distilled(distilled, bands)?,
            raw: match raw {
                Some(p) => Self::load_raw(p)?,
                None => Vec::new(),
            },
        })
    }
}

/// Orders candidates best first: higher final score, then newer trial, then
/// earlier insertion.
pub fn rank_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.phi_final
        .total_cmp(&a.phi_final)
        .then_with(|| b.strategy.trial_id().cmp(&a.strategy.trial_id()))
        .then_with(|| a.index.cmp(&b.index))
}

fn best_of(
    store: &[DistilledStrategy],
    taken: &[bool],
    qk: &Keywords,
    query_trial: usize,
    selected: &Keywords,
    params: &MemoryParams,
    only_failures: bool,
) -> Result<Option<ScoredCandidate>, MemoryError> {
    let mut best: Option<ScoredCandidate> = None;
    for (i, s) in store.iter().enumerate() {
        if taken[i] || (only_failures && !s.is_failure()) {
            continue;
        }
        let c = score(s, i, qk, query_trial, selected, params)?;
        if best.as_ref().is_none_or(|b| rank_order(&c, b) == Ordering::Less) {
            best = Some(c);
        }
    }
    Ok(best)
}

/// Greedy top-N: each pick maximises the final score given the keywords of
/// the strategies already picked.
fn greedy_retrieve(
    store: &[DistilledStrategy],
    qk: &Keywords,
    query_trial: usize,
    params: &MemoryParams,
) -> Result<Vec<ScoredCandidate>, MemoryError> {
    let n = params.n_top.min(store.len());
    let mut taken = vec![false; store.len()];
    let mut selected = Keywords::new();
    let mut out = Vec::with_capacity(n);
    let failure_available = store.iter().any(DistilledStrategy::is_failure);
    for slot in 0..n {
        let last = slot + 1 == n;
        let need_failure = params.force_failure_slot
            && last
            && failure_available
            && !out.iter().any(|c: &ScoredCandidate| c.strategy.is_failure());
        let Some(c) = best_of(store, &taken, qk, query_trial, &selected, params, need_failure)? else {
            break;
        };
        taken[c.index] = true;
        selected.extend(c.strategy.keywords.iter().cloned());
        out.push(c);
    }
    Ok(out)
}

/// Debiasing disabled: newest semantically matching entries, no inflection
/// bonus and no diversity penalty.
fn recency_retrieve(
    store: &[DistilledStrategy],
    qk: &Keywords,
    query_trial: usize,
    params: &MemoryParams,
) -> Result<Vec<ScoredCandidate>, MemoryError> {
    let plain = MemoryParams {
        delta: 0.0,
        gamma: 0.0,
        ..*params
    };
    let empty = Keywords::new();
    let mut matches = Vec::new();
    for (i, s) in store.iter().enumerate() {
        if jaccard(qk, &s.keywords) > 0.0 {
            let mut c = score(s, i, qk, query_trial, &empty, &plain)?;
            c.phi_inflection = 0.0;
            matches.push(c);
        }
    }
    matches.sort_by(|a, b| {
        b.strategy
            .trial_id()
            .cmp(&a.strategy.trial_id())
            .then_with(|| a.index.cmp(&b.index))
    });
    matches.truncate(params.n_top);
    Ok(matches)
}
