use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hate target of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TargetLabel {
    #[serde(rename = "DISABLED")]
    Disabled,
    #[serde(rename = "JEWS")]
    Jews,
    #[serde(rename = "LGBT+")]
    Lgbt,
    #[serde(rename = "MIGRANTS")]
    Migrants,
    #[serde(rename = "MUSLIMS")]
    Muslims,
    #[serde(rename = "POC")]
    Poc,
    #[serde(rename = "WOMEN")]
    Women,
    #[serde(rename = "OTHER")]
    Other,
}

impl TargetLabel {
    pub const ALL: [TargetLabel; 8] = [
        TargetLabel::Disabled,
        TargetLabel::Jews,
        TargetLabel::Lgbt,
        TargetLabel::Migrants,
        TargetLabel::Muslims,
        TargetLabel::Poc,
        TargetLabel::Women,
        TargetLabel::Other,
    ];

    /// Every label except `OTHER`.
    pub const MAIN: [TargetLabel; 7] = [
        TargetLabel::Disabled,
        TargetLabel::Jews,
        TargetLabel::Lgbt,
        TargetLabel::Migrants,
        TargetLabel::Muslims,
        TargetLabel::Poc,
        TargetLabel::Women,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetLabel::Disabled => "DISABLED",
            TargetLabel::Jews => "JEWS",
            TargetLabel::Lgbt => "LGBT+",
            TargetLabel::Migrants => "MIGRANTS",
            TargetLabel::Muslims => "MUSLIMS",
            TargetLabel::Poc => "POC",
            TargetLabel::Women => "WOMEN",
            TargetLabel::Other => "OTHER",
        }
    }

    pub fn is_main(self) -> bool {
        self != TargetLabel::Other
    }
}

impl fmt::Display for TargetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown target label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for TargetLabel {
    type Err = UnknownLabel;

    /// Canonical spellings only.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TargetLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}
