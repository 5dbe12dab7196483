//! Network and command-line front ends for the hitloop workbench.

pub mod api;
pub mod client;
pub mod mock_server;

use std::collections::BTreeMap;

use hitloop_core::label::TargetLabel;
use hitloop_core::orchestrator::strategy::{ConditionPool, LabelMapping, PoolError, StrategyKind};
use hitloop_core::orchestrator::LoopConfig;
use serde::{Deserialize, Serialize};

/// Loop settings as clients send them: the condition pool is raw file text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopRequest {
    pub name: String,
    pub strategy: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_admit_limit: Option<usize>,
    /// Newline-delimited pool, optionally `label<TAB>text` per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<String>,
    /// External label → target; defaults to the bundled SBF mapping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_mapping: Option<BTreeMap<String, TargetLabel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_target_quota: Option<BTreeMap<TargetLabel, u32>>,
}

impl LoopRequest {
    pub fn config(&self) -> Result<LoopConfig, PoolError> {
        let mapping = match &self.label_mapping {
            Some(m) => LabelMapping(m.iter().map(|(k, v)| (k.trim().to_lowercase(), *v)).collect()),
            None => LabelMapping::sbf_default(),
        };
        let pool = match &self.pool {
            Some(text) => ConditionPool::parse(text, &mapping)?,
            None => ConditionPool::default(),
        };
        let defaults = LoopConfig::new(self.strategy);
        Ok(LoopConfig {
            quota: self.quota.unwrap_or(defaults.quota),
            chunk_admit_limit: self.chunk_admit_limit,
            pool,
            per_target_quota: self.per_target_quota.clone(),
            max_tokens: self.max_tokens.unwrap_or(defaults.max_tokens),
            ..defaults
        })
    }
}
