//! Hermetic end-to-end loops: mock author, scripted reviewers, real store
//! and orchestrator.

pub mod mock_author;
pub mod reviewer;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{parse_generation, ExportFormat, OPEN_HS};
use crate::metrics::report::LoopReport;
use crate::orchestrator::lease::ManualClock;
use crate::orchestrator::strategy::{ConditionPool, StrategyKind};
use crate::orchestrator::{LoopConfig, Orchestrator, OrchestratorError};
use crate::record::{PairRecord, ReviewStatus, SEED_STRATEGY};
use crate::store::{CorpusStore, StoreError};

pub use mock_author::{MockAuthor, MockAuthorConfig};
pub use reviewer::{ScriptedReviewer, ScriptedReviewerConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("loop `{name}` stalled at {accepted}/{quota} accepted pairs")]
    QuotaStall { name: String, accepted: usize, quota: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub loops: usize,
    pub quota: u32,
    pub seed_pairs: usize,
    pub strategy: StrategyKind,
    pub pool: ConditionPool,
    pub chunk_admit_limit: Option<usize>,
    pub chunks_per_request: usize,
    pub annotators: Vec<String>,
    /// Generation rounds without a new acceptance before giving up.
    pub stall_rounds: usize,
    pub author: MockAuthorConfig,
    pub reviewer: ScriptedReviewerConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            loops: 3,
            quota: 50,
            seed_pairs: 60,
            strategy: StrategyKind::Plain,
            pool: ConditionPool::default(),
            chunk_admit_limit: None,
            chunks_per_request: 4,
            annotators: vec!["ann-1".into(), "ann-2".into()],
            stall_rounds: 25,
            author: MockAuthorConfig::default(),
            reviewer: ScriptedReviewerConfig::default(),
        }
    }
}

/// Version name of loop `i` (the seed is `V1`).
pub fn loop_name(i: usize) -> String {
    format!("V{}", i + 2)
}

/// Imports `n` mock pairs as the untouched, frozen seed version `V1`.
pub fn seed_version(store: &CorpusStore, author: &MockAuthor, reviewer: &ScriptedReviewer, n: usize) -> Result<(), SimError> {
    let mut records = Vec::with_capacity(n);
    while records.len() < n {
        let chunk = author.generate_chunks(OPEN_HS, 1).remove(0);
        for c in parse_generation(&chunk, ExportFormat::Plain).candidates {
            if records.len() == n {
                break;
            }
            let mut r = PairRecord::pending(format!("V1-{:04}", records.len()), "V1", c.hs, c.cn);
            r.status = ReviewStatus::Untouched;
            r.strategy = SEED_STRATEGY.to_string();
            r.target = Some(reviewer.label(&r));
            records.push(r);
        }
    }
    store.create_version("V1", Vec::new(), n as u32, None)?;
    store.add_pairs("V1", records)?;
    store.freeze("V1")?;
    Ok(())
}

/// Runs seed + `config.loops` sequential loops against `store`, which must
/// be empty. Returns the report of every closed loop.
pub fn run_simulation(store: Arc<CorpusStore>, config: &SimConfig) -> Result<Vec<LoopReport>, SimError> {
    if !store.versions().is_empty() {
        return Err(SimError::Config("store is not empty".into()));
    }
    if config.annotators.is_empty() || config.seed_pairs == 0 || config.chunks_per_request == 0 {
        return Err(SimError::Config("need annotators, seed pairs and chunks per request".into()));
    }
    let author = Arc::new(MockAuthor::new(config.author.clone()));
    let mut reviewer =
        ScriptedReviewer::new(config.reviewer.clone(), Arc::new(config.author.clone())).map_err(SimError::Config)?;
    seed_version(&store, &author, &reviewer, config.seed_pairs)?;

    let orchestrator = Orchestrator::new(store.clone(), author).with_clock(Arc::new(ManualClock::default()));
    let mut reports = Vec::with_capacity(config.loops);
    for i in 0..config.loops {
        let name = loop_name(i);
        let loop_config = LoopConfig {
            quota: config.quota,
            chunk_admit_limit: config.chunk_admit_limit,
            pool: config.pool.clone(),
            ..LoopConfig::new(config.strategy)
        };
        orchestrator.start_loop(&name, loop_config, None)?;
        let mut accepted = 0usize;
        let mut idle_rounds = 0usize;
        let mut turn = 0usize;
        while accepted < config.quota as usize {
            let annotator = &config.annotators[turn % config.annotators.len()];
            turn += 1;
            match orchestrator.next_for_review(annotator, Some(&name))? {
                Some(assignment) => {
                    let decision = reviewer.review(&assignment.record, annotator);
                    if orchestrator.submit_review(decision)?.is_accepted() {
                        accepted += 1;
                        idle_rounds = 0;
                    }
                }
                None => {
                    if idle_rounds >= config.stall_rounds {
                        return Err(SimError::QuotaStall { name, accepted, quota: config.quota });
                    }
                    idle_rounds += 1;
                    orchestrator.request_generation(&name, config.chunks_per_request)?;
                }
            }
        }
        let (_, report) = orchestrator.close_loop(&name)?;
        reports.push(report);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_edit_rate_gives_zero_hter() {
        let config = SimConfig {
            loops: 2,
            quota: 20,
            reviewer: ScriptedReviewerConfig { p_untouched: 0.6, p_modified: 0.0, ..Default::default() },
            ..Default::default()
        };
        let reports = run_simulation(Arc::new(CorpusStore::in_memory()), &config).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.units.pair.hter_all.micro, Some(0.0));
            assert_eq!(r.units.pair.hter_modified.micro, None);
        }
    }

    #[test]
    fn discarding_reviewer_stalls() {
        let config = SimConfig {
            loops: 1,
            quota: 5,
            stall_rounds: 3,
            reviewer: ScriptedReviewerConfig { p_untouched: 0.0, p_modified: 0.0, ..Default::default() },
            ..Default::default()
        };
        let err = run_simulation(Arc::new(CorpusStore::in_memory()), &config).unwrap_err();
        assert!(matches!(err, SimError::QuotaStall { accepted: 0, quota: 5, .. }));
    }
}
