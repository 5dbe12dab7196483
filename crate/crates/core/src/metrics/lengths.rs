//! Mean token counts over record subsets.

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::{mean, MetricError};
use crate::record::{PairRecord, ReviewStatus, VersionSnapshot};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    /// Generated CN of modified pairs.
    pub cn_or_annotated: Option<f64>,
    /// Post-edited CN of modified pairs.
    pub cn_ed_annotated: Option<f64>,
    pub cn_or_untouched: Option<f64>,
    /// Generated CN of pairs a reviewer discarded.
    pub cn_or_discarded: Option<f64>,
    pub hs_or_untouched: Option<f64>,
}

fn mean_len<'a>(records: impl Iterator<Item = &'a PairRecord>, text: fn(&PairRecord) -> &str) -> Option<f64> {
    let lens: Vec<f64> = records.map(|r| tokenize(text(r)).len() as f64).collect();
    mean(&lens)
}

pub fn length_stats(snapshot: &VersionSnapshot) -> Result<LengthStats, MetricError> {
    if !snapshot.version.frozen {
        return Err(MetricError::NotFrozen(snapshot.name().to_string()));
    }
    let with = |status: ReviewStatus| {
        snapshot
            .records
            .iter()
            .filter(move |r| r.status == status && (status != ReviewStatus::Discarded || r.is_reviewer_discard()))
    };
    Ok(LengthStats {
        cn_or_annotated: mean_len(with(ReviewStatus::Modified), |r| &r.cn_original),
        cn_ed_annotated: mean_len(with(ReviewStatus::Modified), |r| r.cn_final()),
        cn_or_untouched: mean_len(with(ReviewStatus::Untouched), |r| &r.cn_original),
        cn_or_discarded: mean_len(with(ReviewStatus::Discarded), |r| &r.cn_original),
        hs_or_untouched: mean_len(with(ReviewStatus::Untouched), |r| &r.hs_original),
    })
}
