//! Loop lifecycle: start → generate → review → close.
//!
//! The orchestrator owns the lease table and chunk numbering; everything
//! durable goes through the [`CorpusStore`]. Author calls are made without
//! holding any lock, so generation can overlap with reviewing.

pub mod adapter;
pub mod lease;
pub mod strategy;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{parse_generation, Diagnostic, DiagnosticKind, OPEN_HS};
use crate::label::TargetLabel;
use crate::metrics::report::{loop_report, LoopReport, ReportConfig};
use crate::metrics::{tokenize, MetricError};
use crate::record::{
    DatasetVersion, GenerationChunk, InvariantViolation, PairRecord, ReviewDecision, ReviewStatus,
};
use crate::store::{CorpusStore, StoreError};

use adapter::{check_response, AdapterError, AuthorAdapter, GenerateRequest};
use lease::{Clock, Lease, LeaseTable, SystemClock, DEFAULT_LEASE};
use strategy::{condition, Condition, ConditionPool, StrategyKind};

pub const DEFAULT_QUOTA: u32 = 500;
pub const DEFAULT_MAX_TOKENS: usize = 1024;
pub const NOTE_LOOP_CLOSED: &str = "loop closed";
pub const NOTE_DUPLICATE: &str = "duplicate";
pub const TRAINING_DIR: &str = "training";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Invalid(#[from] InvariantViolation),
    #[error("`{0}` is not an open loop")]
    NotOpenLoop(String),
    #[error("prior version `{0}` is still open")]
    OpenPriorLoop(String),
    #[error("invalid loop configuration: {0}")]
    InvalidConfig(String),
    #[error("no active lease on `{pair_id}` for annotator `{annotator}`")]
    StaleLease { pair_id: String, annotator: String },
    #[error("loop `{0}` already has its quota of accepted pairs")]
    QuotaReached(String),
    #[error("loop `{name}` already has its quota of accepted {target} pairs")]
    TargetQuotaReached { name: String, target: TargetLabel },
    #[error("loop `{name}` has {accepted} accepted pairs, quota is {quota}")]
    QuotaUnmet { name: String, accepted: usize, quota: u32 },
}

pub type Result<T, E = OrchestratorError> = std::result::Result<T, E>;

/// Loop settings, persisted with the version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub strategy: StrategyKind,
    pub quota: u32,
    /// Parsed pairs admitted per chunk; `None` admits all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_admit_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "ConditionPool::is_empty")]
    pub pool: ConditionPool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_target_quota: Option<BTreeMap<TargetLabel, u32>>,
    pub max_tokens: usize,
}

impl LoopConfig {
    pub fn new(strategy: StrategyKind) -> Self {
        LoopConfig {
            strategy,
            quota: DEFAULT_QUOTA,
            chunk_admit_limit: None,
            pool: ConditionPool::default(),
            per_target_quota: None,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(OrchestratorError::InvalidConfig(m.to_string()));
        if self.quota == 0 {
            return bad("quota must be positive");
        }
        if self.chunk_admit_limit == Some(0) {
            return bad("chunk admit limit must be positive");
        }
        if self.strategy.needs_pool() && self.pool.is_empty() {
            return bad(&format!("{} needs a condition pool", self.strategy));
        }
        if matches!(self.strategy, StrategyKind::Sbf | StrategyKind::Mix)
            && self.pool.0.iter().any(|e| e.target.is_none())
        {
            return bad(&format!("{} needs every pool entry mapped to a target", self.strategy));
        }
        Ok(())
    }
}

/// What a started loop hands to the author side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopHandle {
    pub version: DatasetVersion,
    pub config: LoopConfig,
    /// Pairs in the training export of the predecessors.
    pub training_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub record: PairRecord,
    pub lease: Lease,
}

type DedupKey = (Vec<String>, Vec<String>);

fn dedup_key(hs: &str, cn: &str) -> DedupKey {
    (tokenize(hs).tokens().to_vec(), tokenize(cn).tokens().to_vec())
}

#[derive(Default)]
struct Inner {
    leases: LeaseTable,
    next_seq: HashMap<String, u32>,
    seen: HashMap<String, HashSet<DedupKey>>,
}

pub struct Orchestrator {
    store: Arc<CorpusStore>,
    author: Arc<dyn AuthorAdapter>,
    clock: Arc<dyn Clock>,
    lease_duration: Duration,
    report_config: ReportConfig,
    inner: Mutex<Inner>,
}

impl Orchestrator {
    pub fn new(store: Arc<CorpusStore>, author: Arc<dyn AuthorAdapter>) -> Self {
        Orchestrator {
            store,
            author,
            clock: Arc::new(SystemClock),
            lease_duration: DEFAULT_LEASE,
            report_config: ReportConfig::default(),
            inner: Mutex::new(Inner::default()),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_lease_duration(mut self, d: Duration) -> Self {
        self.lease_duration = d;
        self
    }

    pub fn with_report_config(mut self, config: ReportConfig) -> Self {
        self.report_config = config;
        self
    }

    pub fn store(&self) -> &Arc<CorpusStore> {
        &self.store
    }

    /// Config of an unfrozen loop version.
    pub fn open_loop(&self, name: &str) -> Result<LoopConfig> {
        let not_open = || OrchestratorError::NotOpenLoop(name.to_string());
        let version = self.store.get_version(name).map_err(|_| not_open())?;
        if version.frozen {
            return Err(not_open());
        }
        let raw = self.store.loop_config(name).ok_or_else(not_open)?;
        serde_json::from_value(raw).map_err(|e| OrchestratorError::InvalidConfig(e.to_string()))
    }

    /// Opens a new loop. Its predecessors are `base` and everything before
    /// it, or every existing version when no base is given; all must be
    /// frozen.
    pub fn start_loop(&self, name: &str, config: LoopConfig, base: Option<&str>) -> Result<LoopHandle> {
        config.validate()?;
        let predecessors = match base {
            Some(b) => {
                let mut p = self.store.get_version(b)?.predecessors;
                p.push(b.to_string());
                p
            }
            None => self.store.versions().into_iter().map(|v| v.name).collect(),
        };
        for p in &predecessors {
            if !self.store.get_version(p)?.frozen {
                return Err(OrchestratorError::OpenPriorLoop(p.clone()));
            }
        }
        let lines = self.store.training_lines(&predecessors, config.strategy.format())?;
        let cfg_json = serde_json::to_value(&config).expect("config serializes");
        let version = self
            .store
            .create_version(name, predecessors, config.quota, Some(cfg_json))?;

        let training_file = match self.store.dir() {
            Some(dir) => {
                let dir = dir.join(TRAINING_DIR);
                fs::create_dir_all(&dir).map_err(StoreError::from)?;
                let path = dir.join(format!("{name}.txt"));
                let mut body = lines.join("\n");
                if !body.is_empty() {
                    body.push('\n');
                }
                fs::write(&path, body).map_err(StoreError::from)?;
                Some(path)
            }
            None => None,
        };
        Ok(LoopHandle { version, config, training_pairs: lines.len(), training_file })
    }

    fn reserve(&self, name: &str, n: u32) -> u32 {
        let mut inner = self.inner.lock();
        let next = inner.next_seq.entry(name.to_string()).or_insert_with(|| {
            self.store.chunks(name).iter().map(|c| c.sequence + 1).max().unwrap_or(0)
        });
        let start = *next;
        *next += n;
        start
    }

    /// Requests `n_chunks` chunks, parses them and admits candidates as
    /// pending records. Author failures mark the affected chunks failed.
    pub fn request_generation(&self, name: &str, n_chunks: usize) -> Result<Vec<GenerationChunk>> {
        let config = self.open_loop(name)?;
        let start = self.reserve(name, n_chunks as u32);
        let conditions: Vec<Condition> = (0..n_chunks as u32)
            .map(|i| condition(config.strategy, &config.pool, start + i))
            .collect();

        // One request per run of identical conditions.
        let mut outputs: Vec<Result<String, AdapterError>> = Vec::with_capacity(n_chunks);
        let mut i = 0;
        while i < conditions.len() {
            let run = conditions[i..].iter().take_while(|c| **c == conditions[i]).count();
            let request = GenerateRequest {
                condition: conditions[i].text.clone(),
                n_chunks: run,
                max_tokens: config.max_tokens,
            };
            match self
                .author
                .generate(&request)
                .and_then(|r| check_response(&request, &r).map(|_| r))
            {
                Ok(r) => outputs.extend(r.chunks.into_iter().map(Ok)),
                Err(e) => {
                    log::warn!("generation for {name} failed: {e}");
                    outputs.extend(std::iter::repeat_n(Err(e), run));
                }
            }
            i += run;
        }

        let mut inner = self.inner.lock();
        if !inner.seen.contains_key(name) {
            let keys = self
                .store
                .snapshot(name)?
                .records
                .iter()
                .map(|r| dedup_key(&r.hs_original, &r.cn_original))
                .collect();
            inner.seen.insert(name.to_string(), keys);
        }
        let seen = inner.seen.get_mut(name).expect("inserted above");

        let mut chunks = Vec::with_capacity(n_chunks);
        for (k, (cond, output)) in conditions.iter().zip(outputs).enumerate() {
            let seq = start + k as u32;
            let (chunk, records, duplicates) = admit(name, seq, &config, cond, output, seen);
            self.store.record_chunk(chunk.clone())?;
            self.store.add_pairs(name, records)?;
            self.store.append_decisions(
                duplicates.into_iter().map(|id| ReviewDecision::system_discard(id, NOTE_DUPLICATE)).collect(),
            )?;
            chunks.push(chunk);
        }
        Ok(chunks)
    }

    fn accepted_counts(&self, name: &str) -> Result<(usize, BTreeMap<TargetLabel, u32>)> {
        let snap = self.store.snapshot(name)?;
        let mut per_target = BTreeMap::new();
        let mut total = 0;
        for r in snap.accepted() {
            total += 1;
            if let Some(t) = r.target {
                *per_target.entry(t).or_insert(0) += 1;
            }
        }
        Ok((total, per_target))
    }

    /// Leases the oldest unleased pending pair of an open loop that still
    /// needs accepted pairs. Asking again while holding a lease returns the
    /// same pair.
    pub fn next_for_review(&self, annotator: &str, only_loop: Option<&str>) -> Result<Option<Assignment>> {
        if annotator.trim().is_empty() {
            return Err(InvariantViolation { field: "annotator", reason: "must not be empty".into() }.into());
        }
        let mut inner = self.inner.lock();
        let now = self.clock.now_ms();
        inner.leases.expire(now);
        if let Some(lease) = inner.leases.held_by(annotator).cloned() {
            let record = self.store.record(&lease.pair_id)?;
            if record.status == ReviewStatus::Pending {
                return Ok(Some(Assignment { record, lease }));
            }
            inner.leases.release(&lease.pair_id);
        }

        for version in self.store.versions() {
            if version.frozen || only_loop.is_some_and(|l| l != version.name) {
                continue;
            }
            let Ok(config) = self.open_loop(&version.name) else { continue };
            let snap = self.store.snapshot(&version.name)?;
            if snap.accepted().count() >= config.quota as usize {
                continue;
            }
            let candidate = snap
                .records
                .into_iter()
                .find(|r| r.status == ReviewStatus::Pending && !inner.leases.is_leased(&r.id));
            if let Some(record) = candidate {
                let lease = Lease {
                    pair_id: record.id.clone(),
                    version: version.name.clone(),
                    annotator: annotator.to_string(),
                    expires_at_ms: now + self.lease_duration.as_millis() as u64,
                };
                inner.leases.grant(lease.clone());
                return Ok(Some(Assignment { record, lease }));
            }
        }
        Ok(None)
    }

    /// Applies a reviewer verdict. The annotator must hold a live lease on
    /// the pair.
    pub fn submit_review(&self, decision: ReviewDecision) -> Result<PairRecord> {
        decision.validate_shape()?;
        let annotator = decision.annotator.clone().ok_or_else(|| InvariantViolation {
            field: "annotator",
            reason: "required for reviewer decisions".into(),
        })?;
        // Unknown pairs are reported as such, not as a missing lease.
        self.store.record(&decision.pair_id)?;
        let mut inner = self.inner.lock();
        inner.leases.expire(self.clock.now_ms());
        let stale = || OrchestratorError::StaleLease {
            pair_id: decision.pair_id.clone(),
            annotator: annotator.clone(),
        };
        let lease = inner.leases.get(&decision.pair_id).cloned().ok_or_else(stale)?;
        if lease.annotator != annotator {
            return Err(stale());
        }
        let config = self.open_loop(&lease.version)?;
        if decision.verdict != crate::record::Verdict::Discarded {
            let (accepted, per_target) = self.accepted_counts(&lease.version)?;
            if accepted >= config.quota as usize {
                return Err(OrchestratorError::QuotaReached(lease.version));
            }
            if let (Some(quotas), Some(t)) = (&config.per_target_quota, decision.target) {
                if let Some(&q) = quotas.get(&t) {
                    if per_target.get(&t).copied().unwrap_or(0) >= q {
                        return Err(OrchestratorError::TargetQuotaReached { name: lease.version, target: t });
                    }
                }
            }
        }
        let record = self.store.append_decision(decision)?;
        inner.leases.release(&record.id);
        Ok(record)
    }

    /// Freezes a loop that met its quota: leftover pending pairs are
    /// discarded by the system, and the report is computed and stored.
    pub fn close_loop(&self, name: &str) -> Result<(DatasetVersion, LoopReport)> {
        let mut inner = self.inner.lock();
        let config = self.open_loop(name)?;
        let snap = self.store.snapshot(name)?;
        let accepted = snap.accepted().count();
        if accepted != config.quota as usize {
            return Err(OrchestratorError::QuotaUnmet { name: name.to_string(), accepted, quota: config.quota });
        }
        let sweep = snap
            .records
            .iter()
            .filter(|r| r.status == ReviewStatus::Pending)
            .map(|r| ReviewDecision::system_discard(r.id.clone(), NOTE_LOOP_CLOSED))
            .collect();
        self.store.append_decisions(sweep)?;
        let version = self.store.freeze(name)?;
        inner.leases.release_version(name);
        inner.seen.remove(name);
        drop(inner);

        let report = self.compute_report(name)?;
        self.store.save_report(name, &report_json(&report))?;
        Ok((version, report))
    }

    /// Report of a frozen version, computed from the store.
    pub fn compute_report(&self, name: &str) -> Result<LoopReport> {
        let snapshot = self.store.snapshot(name)?;
        let history = self.store.history(name)?;
        Ok(loop_report(&snapshot, &history, &self.report_config)?)
    }

    /// Stored report JSON, or a freshly computed one for versions closed
    /// outside a loop (such as an imported seed).
    pub fn report_json(&self, name: &str) -> Result<String> {
        match self.store.report(name) {
            Some(json) => Ok(json),
            None => Ok(report_json(&self.compute_report(name)?)),
        }
    }
}

/// Canonical report serialization.
pub fn report_json(report: &LoopReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

/// Turns one author output into a chunk record, new pending records and
/// the ids among them to discard as duplicates.
fn admit(
    name: &str,
    seq: u32,
    config: &LoopConfig,
    cond: &Condition,
    output: Result<String, AdapterError>,
    seen: &mut HashSet<DedupKey>,
) -> (GenerationChunk, Vec<PairRecord>, Vec<String>) {
    let id = format!("{name}-c{seq:04}");
    let mut chunk = GenerationChunk {
        id: id.clone(),
        version: name.to_string(),
        sequence: seq,
        strategy: config.strategy.as_str().to_string(),
        condition: cond.text.clone(),
        raw_text: None,
        parsed: 0,
        admitted: 0,
        diagnostics: Vec::new(),
        failure: None,
    };
    let raw = match output {
        Ok(raw) => raw,
        Err(e) => {
            chunk.failure = Some(e.to_string());
            return (chunk, Vec::new(), Vec::new());
        }
    };
    // Authors may return only the continuation of the prompt.
    let text = if raw.trim_start().starts_with(&OPEN_HS[..OPEN_HS.len() - 2]) {
        raw
    } else {
        format!("{}{raw}", cond.text)
    };
    let outcome = parse_generation(&text, config.strategy.format());
    chunk.parsed = outcome.candidates.len();
    chunk.diagnostics = outcome.diagnostics;

    let limit = config.chunk_admit_limit.unwrap_or(usize::MAX);
    let mut records = Vec::new();
    let mut duplicates = Vec::new();
    for (index, c) in outcome.candidates.into_iter().take(limit).enumerate() {
        let mut r = PairRecord::pending(format!("{id}-{index}"), name, c.hs, c.cn);
        r.strategy = config.strategy.as_str().to_string();
        r.chunk_id = Some(id.clone());
        r.chunk_index = Some(index as u32);
        r.target = c.label.or(cond.target);
        if let Err(v) = r.validate() {
            chunk.diagnostics.push(Diagnostic {
                offset: 0,
                fragment: None,
                kind: DiagnosticKind::EmptyText,
                message: format!("candidate {index} not admitted: {v}"),
            });
            continue;
        }
        if !seen.insert(dedup_key(&r.hs_original, &r.cn_original)) {
            duplicates.push(r.id.clone());
        }
        records.push(r);
    }
    chunk.admitted = records.len();
    chunk.raw_text = Some(text);
    (chunk, records, duplicates)
}
