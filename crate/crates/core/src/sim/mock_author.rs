//! A seeded stand-in for the generation model.
//!
//! Texts are templates filled from closed per-target word lists, so which
//! words can appear for which target is known in advance. Optional knobs
//! inject invented words, bias towards a few fixed phrasings, or break the
//! token grammar.

use std::collections::BTreeMap;

use parking_lot::Mutex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grammar::{self, END_CN, END_HS, OPEN_CN, OPEN_HS};
use crate::label::TargetLabel;
use crate::orchestrator::adapter::{AdapterError, AuthorAdapter, GenerateRequest, GenerateResponse};

/// Slot marker inside templates.
pub const SLOT: &str = "{w}";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetTemplates {
    pub hs: Vec<String>,
    pub cn: Vec<String>,
    pub vocabulary: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockAuthorConfig {
    pub seed: u64,
    pub templates: BTreeMap<TargetLabel, TargetTemplates>,
    /// Chance that a slot gets an invented word instead of a listed one.
    pub novel_word_rate: f64,
    /// Chance that a chunk loses one `<|endofcn|>`.
    pub malformed_rate: f64,
    /// Chance that a text uses the first template and the first few words.
    pub repetition_bias: f64,
    pub min_pairs_per_chunk: usize,
    pub max_pairs_per_chunk: usize,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn templates(hs: &[&str], cn: &[&str], vocabulary: &str) -> TargetTemplates {
    TargetTemplates {
        hs: hs.iter().map(|s| s.to_string()).collect(),
        cn: cn.iter().map(|s| s.to_string()).collect(),
        vocabulary: words(vocabulary),
    }
}

impl Default for MockAuthorConfig {
    fn default() -> Self {
        use TargetLabel::*;
        let hs = [
            "{w} are ruining our {w}",
            "all {w} want is {w}",
            "we should keep {w} away from {w}",
            "{w} cannot be trusted with {w}",
            "why do {w} always {w}",
        ];
        let cn = [
            "there is no evidence that {w} threaten {w}",
            "most {w} simply want {w} like everyone else",
            "blaming {w} for {w} ignores the real causes",
            "{w} contribute to {w} every day",
            "generalising about {w} only spreads {w}",
        ];
        let vocab = [
            (Disabled, "disabled wheelchair autism blind deaf carers benefits accessibility ramps therapy independence inclusion"),
            (Jews, "jews jewish synagogue rabbis holocaust israel bankers media sabbath kosher diaspora remembrance"),
            (Lgbt, "gays lesbians trans queer pride marriage adoption identity bisexual equality rainbow acceptance"),
            (Migrants, "migrants refugees asylum borders boats jobs integration welfare visas citizenship newcomers shelters"),
            (Muslims, "muslims islam mosques imams hijab sharia ramadan quran halal prayer faith peace"),
            (Poc, "blacks africans colour neighbourhoods policing slavery heritage diversity culture crime music history"),
            (Women, "women feminists mothers wages kitchen careers harassment leadership voting daughters sisters respect"),
        ];
        let templates = vocab
            .into_iter()
            .map(|(t, v)| (t, templates(&hs, &cn, v)))
            .collect();
        MockAuthorConfig {
            seed: 0,
            templates,
            novel_word_rate: 0.05,
            malformed_rate: 0.0,
            repetition_bias: 0.0,
            min_pairs_per_chunk: 3,
            max_pairs_per_chunk: 9,
        }
    }
}

impl MockAuthorConfig {
    pub fn targets(&self) -> Vec<TargetLabel> {
        self.templates.keys().copied().collect()
    }

    /// Target whose word list best covers `text`; ties and misses yield `None`.
    pub fn detect_target(&self, text: &str) -> Option<TargetLabel> {
        let tokens: Vec<String> = text.split_whitespace().map(|w| w.to_lowercase()).collect();
        let mut best: Option<(usize, TargetLabel)> = None;
        let mut tied = false;
        for (&t, tpl) in &self.templates {
            let hits = tokens.iter().filter(|w| tpl.vocabulary.contains(w)).count();
            match best {
                Some((b, _)) if hits < b => {}
                Some((b, _)) if hits == b => tied = true,
                _ if hits > 0 => {
                    best = Some((hits, t));
                    tied = false;
                }
                _ => {}
            }
        }
        if tied {
            None
        } else {
            best.map(|(_, t)| t)
        }
    }
}

/// Splits a condition into its opening tag label and any statement after it.
fn split_condition(condition: &str) -> (Option<TargetLabel>, Option<&str>, bool) {
    let labeled = condition.starts_with("<|startofhs:");
    let (label, rest) = match condition.find("|>") {
        Some(i) if condition.starts_with("<|startofhs") => {
            let tag = &condition[..i];
            let label = tag
                .strip_prefix("<|startofhs:")
                .and_then(|l| l.trim().parse::<TargetLabel>().ok());
            (label, &condition[i + 2..])
        }
        _ => (None, condition),
    };
    let rest = rest.trim();
    (label, (!rest.is_empty()).then_some(rest), labeled)
}

/// The opening tag a condition starts with, verbatim.
fn prompt_tag(condition: &str) -> Option<&str> {
    if !condition.starts_with("<|startofhs") {
        return None;
    }
    condition.find("|>").map(|i| &condition[..i + 2])
}

pub struct MockAuthor {
    config: MockAuthorConfig,
    rng: Mutex<ChaCha8Rng>,
}

impl MockAuthor {
    pub fn new(config: MockAuthorConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        MockAuthor { config, rng: Mutex::new(rng) }
    }

    pub fn config(&self) -> &MockAuthorConfig {
        &self.config
    }

    /// `n_chunks` chunks for `condition`. Each chunk starts with the
    /// condition itself, as a language model continuing its prompt would.
    pub fn generate_chunks(&self, condition: &str, n_chunks: usize) -> Vec<String> {
        let mut rng = self.rng.lock();
        (0..n_chunks).map(|_| self.chunk(&mut rng, condition)).collect()
    }

    fn novel_word(rng: &mut ChaCha8Rng) -> String {
        const CONS: &[u8] = b"bdfgklmnprstvz";
        const VOWELS: &[u8] = b"aeiou";
        let mut w = String::from("q");
        for _ in 0..rng.gen_range(2..=4) {
            w.push(*CONS.choose(rng).unwrap() as char);
            w.push(*VOWELS.choose(rng).unwrap() as char);
        }
        w
    }

    fn fill(&self, rng: &mut ChaCha8Rng, templates: &[String], vocabulary: &[String]) -> String {
        let biased = rng.gen_bool(self.config.repetition_bias);
        let template = if biased { &templates[0] } else { templates.choose(rng).unwrap() };
        let pool = if biased { &vocabulary[..vocabulary.len().min(3)] } else { vocabulary };
        let mut out = String::new();
        let mut rest = template.as_str();
        while let Some(i) = rest.find(SLOT) {
            out.push_str(&rest[..i]);
            if rng.gen_bool(self.config.novel_word_rate) {
                out.push_str(&Self::novel_word(rng));
            } else {
                out.push_str(pool.choose(rng).unwrap());
            }
            rest = &rest[i + SLOT.len()..];
        }
        out.push_str(rest);
        out
    }

    fn chunk(&self, rng: &mut ChaCha8Rng, condition: &str) -> String {
        let (label, statement, labeled) = split_condition(condition);
        let targets = self.config.targets();
        let target = label
            .or_else(|| statement.and_then(|s| self.config.detect_target(s)))
            .filter(|t| self.config.templates.contains_key(t))
            .unwrap_or_else(|| *targets.choose(rng).expect("at least one target"));
        let tpl = &self.config.templates[&target];
        let open = if labeled { grammar::open_tag(Some(target)) } else { OPEN_HS.to_string() };

        let lo = self.config.min_pairs_per_chunk.max(1);
        let n = rng.gen_range(lo..=self.config.max_pairs_per_chunk.max(lo));
        let mut pairs = Vec::with_capacity(n);
        for i in 0..n {
            let mut hs = self.fill(rng, &tpl.hs, &tpl.vocabulary);
            if i == 0 {
                if let Some(s) = statement {
                    hs = format!("{s} {hs}");
                }
            }
            let cn = self.fill(rng, &tpl.cn, &tpl.vocabulary);
            let head = if i == 0 { prompt_tag(condition).unwrap_or(&open) } else { &open };
            pairs.push(format!("{head} {hs} {END_HS} {OPEN_CN} {cn} {END_CN}"));
        }
        if rng.gen_bool(self.config.malformed_rate) {
            let k = rng.gen_range(0..pairs.len());
            let p = &mut pairs[k];
            let cut = p.rfind(END_CN).expect("pair ends with end tag");
            p.truncate(cut);
            p.truncate(p.trim_end().len());
        }
        pairs.join(" ")
    }
}

impl AuthorAdapter for MockAuthor {
    fn generate(&self, request: &GenerateRequest) -> Result<GenerateResponse, AdapterError> {
        Ok(GenerateResponse { chunks: self.generate_chunks(&request.condition, request.n_chunks) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_generation, ExportFormat};

    fn author(seed: u64, malformed: f64) -> MockAuthor {
        MockAuthor::new(MockAuthorConfig { seed, malformed_rate: malformed, ..Default::default() })
    }

    #[test]
    fn clean_chunks_parse() {
        let a = author(1, 0.0);
        for chunk in a.generate_chunks(OPEN_HS, 50) {
            let out = parse_generation(&chunk, ExportFormat::Plain);
            assert!(out.diagnostics.is_empty(), "{chunk}");
            assert!(out.candidates.len() >= 3);
        }
    }

    #[test]
    fn malformed_chunks_always_diagnosed() {
        let a = author(2, 1.0);
        for chunk in a.generate_chunks(OPEN_HS, 50) {
            assert!(!parse_generation(&chunk, ExportFormat::Plain).diagnostics.is_empty());
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        assert_eq!(author(7, 0.3).generate_chunks(OPEN_HS, 5), author(7, 0.3).generate_chunks(OPEN_HS, 5));
        assert_ne!(author(7, 0.3).generate_chunks(OPEN_HS, 5), author(8, 0.3).generate_chunks(OPEN_HS, 5));
    }

    #[test]
    fn labeled_condition_honored() {
        let a = author(3, 0.0);
        let chunk = &a.generate_chunks("<|startofhs: WOMEN|>", 1)[0];
        assert!(chunk.starts_with("<|startofhs: WOMEN|>"));
        let out = parse_generation(chunk, ExportFormat::Labeled);
        assert!(out.candidates.iter().all(|c| c.label == Some(TargetLabel::Women)));
    }

    #[test]
    fn statement_prompt_is_continued() {
        let a = author(4, 0.0);
        let chunk = &a.generate_chunks("<|startofhs|> mosques everywhere", 1)[0];
        assert!(chunk.starts_with("<|startofhs|> mosques everywhere "));
        let out = parse_generation(chunk, ExportFormat::Plain);
        assert!(out.candidates[0].hs.starts_with("mosques everywhere"));
    }

    #[test]
    fn detects_target_from_vocabulary() {
        let c = MockAuthorConfig::default();
        assert_eq!(c.detect_target("the mosques and imams"), Some(TargetLabel::Muslims));
        assert_eq!(c.detect_target("nothing here"), None);
    }
}
