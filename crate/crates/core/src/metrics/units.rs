use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize, TokenSequence};
use crate::record::PairRecord;

/// Which text of a pair a metric looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum UnitSelector {
    Hs,
    Cn,
    /// HS tokens followed by CN tokens.
    Pair,
}

impl UnitSelector {
    pub const ALL: [UnitSelector; 3] = [UnitSelector::Pair, UnitSelector::Hs, UnitSelector::Cn];

    fn select(self, hs: &str, cn: &str) -> TokenSequence {
        match self {
            UnitSelector::Hs => tokenize(hs),
            UnitSelector::Cn => tokenize(cn),
            UnitSelector::Pair => tokenize(hs).concat(&tokenize(cn)),
        }
    }

    /// Tokens of the text as it was generated.
    pub fn original(self, record: &PairRecord) -> TokenSequence {
        self.select(&record.hs_original, &record.cn_original)
    }

    /// Tokens of the final (post-edited when present) text.
    pub fn final_text(self, record: &PairRecord) -> TokenSequence {
        self.select(record.hs_final(), record.cn_final())
    }
}

impl std::str::FromStr for UnitSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hs" => Ok(UnitSelector::Hs),
            "cn" => Ok(UnitSelector::Cn),
            "pair" => Ok(UnitSelector::Pair),
            other => Err(format!("unknown unit `{other}` (expected pair, hs or cn)")),
        }
    }
}

impl std::fmt::Display for UnitSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UnitSelector::Hs => "hs",
            UnitSelector::Cn => "cn",
            UnitSelector::Pair => "pair",
        })
    }
}
