//! Collective memory handle shared by both agents of a scenario.
//!
//! Single writer, many readers: retrievals take a read lock, inserts a write
//! lock. Every retrieval is counted and logged for the bias diagnostics.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use super::diagnostics::{bias_diagnostics, BiasDiagnostics, RetrievalEvent};
use super::scoring::{MemoryParams, ScoredCandidate};
use super::store::{MemoryStore, QueryContext, RawMeta};
use super::strategy::DistilledStrategy;
use super::MemoryError;

#[derive(Debug, Clone)]
pub struct SharedMemory {
    store: Arc<RwLock<MemoryStore>>,
    params: MemoryParams,
    queries: Arc<AtomicUsize>,
    log: Arc<Mutex<Vec<RetrievalEvent>>>,
}

impl SharedMemory {
    pub fn new(params: MemoryParams) -> Self {
        Self::with_store(MemoryStore::new(), params)
    }

    pub fn with_store(store: MemoryStore, params: MemoryParams) -> Self {
        Self {
            store: Arc::new(RwLock::new(store)),
            params,
            queries: Arc::new(AtomicUsize::new(0)),
            log: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn params(&self) -> &MemoryParams {
        &self.params
    }

    pub fn retrieve(&self, query: &QueryContext) -> Result<Vec<ScoredCandidate>, MemoryError> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        let got = self
            .store
            .read()
            .expect("memory lock poisoned")
            .retrieve(query, &self.params)?;
        self.log
            .lock()
            .expect("retrieval log poisoned")
            .push(RetrievalEvent::from_candidates(query.trial_id, &got));
        Ok(got)
    }

    pub fn insert(&self, s: DistilledStrategy) {
        self.store.write().expect("memory lock poisoned").insert(s);
    }

    pub fn append_raw(&self, text: impl Into<String>, meta: RawMeta) {
        self.store
            .write()
            .expect("memory lock poisoned")
            .append_raw(text, meta);
    }

    pub fn query_count(&self) -> usize {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn retrieval_log(&self) -> Vec<RetrievalEvent> {
        self.log.lock().expect("retrieval log poisoned").clone()
    }

    pub fn diagnostics(&self) -> Result<BiasDiagnostics, MemoryError> {
        bias_diagnostics(&self.retrieval_log())
    }

    pub fn snapshot(&self) -> MemoryStore {
        self.store.read().expect("memory lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.store.read().expect("memory lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
