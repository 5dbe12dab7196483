//! Append-only corpus store.
//!
//! Every write is one JSON line in `events.jsonl`; the in-memory state is a
//! pure fold over those events, so reopening a store directory rebuilds the
//! exact same snapshots. Writers are serialized behind one lock; readers
//! clone what they need out of the latest committed state.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{format_pair, ExportFormat};
use crate::record::{
    DatasetVersion, GenerationChunk, InvariantViolation, PairRecord, ReviewDecision, ReviewStatus,
    VersionSnapshot,
};

pub const EVENT_LOG: &str = "events.jsonl";
pub const REPORT_DIR: &str = "reports";
/// Quota of an imported version that holds no accepted pairs.
pub const DEFAULT_QUOTA: u32 = 500;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {violation}")]
    InvalidRecord { line: usize, violation: InvariantViolation },
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
    #[error("event log line {line} is corrupt: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("unknown version `{0}`")]
    UnknownVersion(String),
    #[error("version `{0}` already exists")]
    VersionExists(String),
    #[error("unknown pair `{0}`")]
    UnknownPair(String),
    #[error("pair id `{0}` already exists")]
    DuplicatePair(String),
    #[error("version `{0}` is frozen")]
    Frozen(String),
    #[error("version `{0}` is not frozen")]
    NotFrozen(String),
    #[error("pair `{0}` has already been reviewed")]
    AlreadyReviewed(String),
    #[error("version `{name}` has {accepted} accepted pairs, quota is {quota}")]
    QuotaNotMet { name: String, accepted: usize, quota: u32 },
    #[error("version `{name}` still has {count} pending pairs")]
    PendingRecords { name: String, count: usize },
    #[error("quota must be positive")]
    ZeroQuota,
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// One line of the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    VersionCreated {
        name: String,
        predecessors: Vec<String>,
        quota: u32,
        /// Opaque loop settings, kept so a reopened store can resume a loop.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        loop_config: Option<serde_json::Value>,
    },
    PairAdded { record: PairRecord },
    Decision { decision: ReviewDecision },
    ChunkRecorded { chunk: GenerationChunk },
    Frozen { name: String },
}

#[derive(Default)]
struct State {
    order: Vec<String>,
    versions: HashMap<String, DatasetVersion>,
    loop_configs: HashMap<String, serde_json::Value>,
    records: HashMap<String, PairRecord>,
    chunks: BTreeMap<String, Vec<GenerationChunk>>,
    reports: HashMap<String, String>,
    log: Option<File>,
}

impl State {
    fn version(&self, name: &str) -> Result<&DatasetVersion> {
        self.versions
            .get(name)
            .ok_or_else(|| StoreError::UnknownVersion(name.to_string()))
    }

    fn open_version(&self, name: &str) -> Result<&DatasetVersion> {
        let v = self.version(name)?;
        if v.frozen {
            return Err(StoreError::Frozen(name.to_string()));
        }
        Ok(v)
    }

    fn snapshot(&self, name: &str) -> Result<VersionSnapshot> {
        let version = self.version(name)?.clone();
        let records = version.pair_ids.iter().map(|id| self.records[id].clone()).collect();
        Ok(VersionSnapshot { version, records })
    }

    fn check_new_version(&self, name: &str, predecessors: &[String], quota: u32) -> Result<()> {
        if self.versions.contains_key(name) {
            return Err(StoreError::VersionExists(name.to_string()));
        }
        if quota == 0 {
            return Err(StoreError::ZeroQuota);
        }
        for p in predecessors {
            self.version(p)?;
        }
        Ok(())
    }

    fn check_new_record(&self, record: &PairRecord) -> Result<()> {
        self.open_version(&record.version)?;
        if self.records.contains_key(&record.id) {
            return Err(StoreError::DuplicatePair(record.id.clone()));
        }
        record.validate()?;
        Ok(())
    }

    fn decided(&self, decision: &ReviewDecision) -> Result<PairRecord> {
        let current = self
            .records
            .get(&decision.pair_id)
            .ok_or_else(|| StoreError::UnknownPair(decision.pair_id.clone()))?;
        self.open_version(&current.version)?;
        if current.status != ReviewStatus::Pending {
            return Err(StoreError::AlreadyReviewed(decision.pair_id.clone()));
        }
        Ok(decision.apply_to(current)?)
    }

    fn check_freeze(&self, name: &str) -> Result<()> {
        let v = self.open_version(name)?;
        let records = v.pair_ids.iter().map(|id| &self.records[id]);
        let (mut accepted, mut pending) = (0, 0);
        for r in records {
            accepted += usize::from(r.is_accepted());
            pending += usize::from(r.status == ReviewStatus::Pending);
        }
        if pending > 0 {
            return Err(StoreError::PendingRecords { name: name.to_string(), count: pending });
        }
        if accepted != v.quota as usize {
            return Err(StoreError::QuotaNotMet { name: name.to_string(), accepted, quota: v.quota });
        }
        Ok(())
    }

    /// Checks an event against the current state without applying it.
    fn check(&self, event: &Event) -> Result<()> {
        match event {
            Event::VersionCreated { name, predecessors, quota, .. } => {
                self.check_new_version(name, predecessors, *quota)
            }
            Event::PairAdded { record } => self.check_new_record(record),
            Event::Decision { decision } => self.decided(decision).map(|_| ()),
            Event::ChunkRecorded { chunk } => self.open_version(&chunk.version).map(|_| ()),
            Event::Frozen { name } => self.check_freeze(name),
        }
    }

    /// Applies a checked event.
    fn apply(&mut self, event: Event) {
        match event {
            Event::VersionCreated { name, predecessors, quota, loop_config } => {
                if let Some(cfg) = loop_config {
                    self.loop_configs.insert(name.clone(), cfg);
                }
                self.order.push(name.clone());
                self.versions.insert(
                    name.clone(),
                    DatasetVersion { name, predecessors, pair_ids: Vec::new(), frozen: false, quota },
                );
            }
            Event::PairAdded { record } => {
                if let Some(v) = self.versions.get_mut(&record.version) {
                    v.pair_ids.push(record.id.clone());
                }
                self.records.insert(record.id.clone(), record);
            }
            Event::Decision { decision } => {
                let next = self.decided(&decision).expect("event checked before apply");
                self.records.insert(next.id.clone(), next);
            }
            Event::ChunkRecorded { chunk } => {
                self.chunks.entry(chunk.version.clone()).or_default().push(chunk);
            }
            Event::Frozen { name } => {
                if let Some(v) = self.versions.get_mut(&name) {
                    v.frozen = true;
                }
            }
        }
    }

    fn write(&mut self, events: &[Event]) -> Result<()> {
        if let Some(log) = self.log.as_mut() {
            let mut buf = String::new();
            for e in events {
                buf.push_str(&serde_json::to_string(e).expect("events serialize"));
                buf.push('\n');
            }
            log.write_all(buf.as_bytes())?;
            log.flush()?;
        }
        Ok(())
    }

    /// Check, log, then apply. Events in a batch are checked in sequence so
    /// later ones may depend on earlier ones; nothing is written unless all
    /// of them pass.
    fn commit(&mut self, events: Vec<Event>) -> Result<()> {
        if events.len() == 1 {
            self.check(&events[0])?;
        } else {
            let mut scratch = self.shadow();
            for e in &events {
                scratch.check(e)?;
                scratch.apply(e.clone());
            }
        }
        self.write(&events)?;
        for e in events {
            self.apply(e);
        }
        Ok(())
    }

    /// A copy of the logical state without the log handle.
    fn shadow(&self) -> State {
        State {
            order: self.order.clone(),
            versions: self.versions.clone(),
            loop_configs: HashMap::new(),
            records: self.records.clone(),
            chunks: BTreeMap::new(),
            reports: HashMap::new(),
            log: None,
        }
    }
}

pub struct CorpusStore {
    dir: Option<PathBuf>,
    state: RwLock<State>,
}

impl CorpusStore {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> Self {
        CorpusStore { dir: None, state: RwLock::new(State::default()) }
    }

    /// Opens (or creates) a store directory, replaying its event log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let path = dir.join(EVENT_LOG);
        let mut state = State::default();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |message: String| StoreError::CorruptLog { line: i + 1, message };
                let event: Event = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                state.check(&event).map_err(|e| corrupt(e.to_string()))?;
                state.apply(event);
            }
        }
        let reports = dir.join(REPORT_DIR);
        if reports.is_dir() {
            for entry in fs::read_dir(&reports)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                        state.reports.insert(stem.to_string(), fs::read_to_string(&path)?);
                    }
                }
            }
        }
        state.log = Some(OpenOptions::new().create(true).append(true).open(&path)?);
        Ok(CorpusStore { dir: Some(dir), state: RwLock::new(state) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn create_version(
        &self,
        name: &str,
        predecessors: Vec<String>,
        quota: u32,
        loop_config: Option<serde_json::Value>,
    ) -> Result<DatasetVersion> {
        let mut state = self.state.write();
        state.commit(vec![Event::VersionCreated {
            name: name.to_string(),
            predecessors,
            quota,
            loop_config,
        }])?;
        Ok(state.versions[name].clone())
    }

    /// Adds one record to an open version. The record's `version` field is
    /// overwritten with the target version.
    pub fn add_pair(&self, version: &str, mut record: PairRecord) -> Result<PairRecord> {
        record.version = version.to_string();
        self.state.write().commit(vec![Event::PairAdded { record: record.clone() }])?;
        Ok(record)
    }

    /// Adds several records atomically: either all are stored or none.
    pub fn add_pairs(&self, version: &str, records: Vec<PairRecord>) -> Result<()> {
        let events = records
            .into_iter()
            .map(|mut record| {
                record.version = version.to_string();
                Event::PairAdded { record }
            })
            .collect();
        self.state.write().commit(events)
    }

    /// Creates a version from a pair JSONL stream. The whole stream is
    /// validated before anything is written. `quota` defaults to the number
    /// of accepted records (or [`DEFAULT_QUOTA`] if there are none).
    pub fn import_pairs(
        &self,
        reader: impl BufRead,
        version: &str,
        predecessors: Vec<String>,
        quota: Option<u32>,
    ) -> Result<DatasetVersion> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut record: PairRecord = serde_json::from_str(&line)
                .map_err(|e| StoreError::Malformed { line: n, message: e.to_string() })?;
            record.version = version.to_string();
            record
                .validate()
                .map_err(|violation| StoreError::InvalidRecord { line: n, violation })?;
            if !seen.insert(record.id.clone()) {
                return Err(StoreError::Malformed {
                    line: n,
                    message: format!("duplicate pair id `{}`", record.id),
                });
            }
            records.push(record);
        }
        let accepted = records.iter().filter(|r| r.is_accepted()).count() as u32;
        let quota = quota.unwrap_or(if accepted == 0 { DEFAULT_QUOTA } else { accepted });

        let mut events = vec![Event::VersionCreated {
            name: version.to_string(),
            predecessors,
            quota,
            loop_config: None,
        }];
        events.extend(records.into_iter().map(|record| Event::PairAdded { record }));
        let mut state = self.state.write();
        state.commit(events)?;
        Ok(state.versions[version].clone())
    }

    /// Applies a verdict to a pending record.
    pub fn append_decision(&self, decision: ReviewDecision) -> Result<PairRecord> {
        let mut state = self.state.write();
        let id = decision.pair_id.clone();
        state.commit(vec![Event::Decision { decision }])?;
        Ok(state.records[&id].clone())
    }

    /// Applies several verdicts atomically.
    pub fn append_decisions(&self, decisions: Vec<ReviewDecision>) -> Result<()> {
        let events = decisions.into_iter().map(|decision| Event::Decision { decision }).collect();
        self.state.write().commit(events)
    }

    pub fn record_chunk(&self, chunk: GenerationChunk) -> Result<()> {
        self.state.write().commit(vec![Event::ChunkRecorded { chunk }])
    }

    /// Freezes a version whose accepted count equals its quota and that has
    /// no pending records left.
    pub fn freeze(&self, name: &str) -> Result<DatasetVersion> {
        let mut state = self.state.write();
        state.commit(vec![Event::Frozen { name: name.to_string() }])?;
        Ok(state.versions[name].clone())
    }

    pub fn get_version(&self, name: &str) -> Result<DatasetVersion> {
        self.state.read().version(name).cloned()
    }

    /// All versions in creation order.
    pub fn versions(&self) -> Vec<DatasetVersion> {
        let state = self.state.read();
        state.order.iter().map(|n| state.versions[n].clone()).collect()
    }

    pub fn loop_config(&self, name: &str) -> Option<serde_json::Value> {
        self.state.read().loop_configs.get(name).cloned()
    }

    pub fn record(&self, id: &str) -> Result<PairRecord> {
        self.state
            .read()
            .records
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownPair(id.to_string()))
    }

    pub fn snapshot(&self, name: &str) -> Result<VersionSnapshot> {
        self.state.read().snapshot(name)
    }

    /// Snapshots of the predecessors of `name`, in their listed order.
    pub fn history(&self, name: &str) -> Result<Vec<VersionSnapshot>> {
        let state = self.state.read();
        let v = state.version(name)?;
        v.predecessors.iter().map(|p| state.snapshot(p)).collect()
    }

    pub fn chunks(&self, version: &str) -> Vec<GenerationChunk> {
        self.state.read().chunks.get(version).cloned().unwrap_or_default()
    }

    /// Pending records of a version, oldest first.
    pub fn pending(&self, version: &str) -> Result<Vec<PairRecord>> {
        let snap = self.snapshot(version)?;
        Ok(snap.records.into_iter().filter(|r| r.status == ReviewStatus::Pending).collect())
    }

    /// Training lines for the given versions, each of which must be frozen:
    /// one line per accepted pair, final texts, version order then
    /// insertion order.
    pub fn training_lines(&self, versions: &[String], format: ExportFormat) -> Result<Vec<String>> {
        let state = self.state.read();
        let mut lines = Vec::new();
        for name in versions {
            let snap = state.snapshot(name)?;
            if !snap.version.frozen {
                return Err(StoreError::NotFrozen(name.clone()));
            }
            lines.extend(
                snap.accepted()
                    .map(|r| format_pair(r.hs_final(), r.cn_final(), r.target, format)),
            );
        }
        Ok(lines)
    }

    /// Training export of `upto` and everything before it.
    pub fn export_training(&self, upto: &str, format: ExportFormat, out: &mut impl Write) -> Result<()> {
        let v = self.get_version(upto)?;
        let mut range = v.predecessors;
        range.push(v.name);
        for line in self.training_lines(&range, format)? {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Writes the records of a version as pair JSONL.
    pub fn export_pairs(&self, name: &str, out: &mut impl Write) -> Result<()> {
        for r in self.snapshot(name)?.records {
            serde_json::to_writer(&mut *out, &r).map_err(io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Stores a rendered report; on disk it lands in `reports/{name}.json`.
    pub fn save_report(&self, name: &str, json: &str) -> Result<()> {
        let mut state = self.state.write();
        state.version(name)?;
        if let Some(dir) = &self.dir {
            let reports = dir.join(REPORT_DIR);
            fs::create_dir_all(&reports)?;
            fs::write(reports.join(format!("{name}.json")), json)?;
        }
        state.reports.insert(name.to_string(), json.to_string());
        Ok(())
    }

    pub fn report(&self, name: &str) -> Option<String> {
        self.state.read().reports.get(name).cloned()
    }
}

/// Deterministic serialization of a snapshot, for comparisons.
pub fn snapshot_json(snapshot: &VersionSnapshot) -> String {
    serde_json::to_string(snapshot).expect("snapshots serialize")
}
