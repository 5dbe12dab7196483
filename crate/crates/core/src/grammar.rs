//! Special-token pair grammar shared by training export and chunk parsing.
//!
//! A pair is `OPEN_HS text END_HS OPEN_CN text END_CN`, where the opening tag
//! is either `<|startofhs|>` or the labeled form `<|startofhs: LABEL|>`.
//! Texts are separated from tags by a single ASCII space on each side.

use serde::{Deserialize, Serialize};

use crate::label::TargetLabel;

pub const OPEN_HS: &str = "<|startofhs|>";
pub const END_HS: &str = "<|endofhs|>";
pub const OPEN_CN: &str = "<|startofcn|>";
pub const END_CN: &str = "<|endofcn|>";

const OPEN_HS_STEM: &str = "<|startofhs";
const TAG_START: &str = "<|";
const TAG_CLOSE: &str = "|>";
const MAX_LABEL_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ExportFormat {
    Plain,
    Labeled,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Ok(ExportFormat::Plain),
            "labeled" | "labelled" => Ok(ExportFormat::Labeled),
            other => Err(format!("unknown format `{other}` (expected plain or labeled)")),
        }
    }
}

/// Opening tag, labeled when a target is given.
pub fn open_tag(label: Option<TargetLabel>) -> String {
    match label {
        Some(l) => format!("<|startofhs: {l}|>"),
        None => OPEN_HS.to_string(),
    }
}

/// One training line (without the trailing newline).
pub fn format_pair(hs: &str, cn: &str, label: Option<TargetLabel>, format: ExportFormat) -> String {
    let open = match format {
        ExportFormat::Plain => open_tag(None),
        ExportFormat::Labeled => open_tag(label),
    };
    format!("{open} {hs} {END_HS} {OPEN_CN} {cn} {END_CN}")
}

/// First special token contained in `text`, if any.
pub fn find_special_token(text: &str) -> Option<&'static str> {
    [OPEN_HS_STEM, END_HS, OPEN_CN, END_CN]
        .into_iter()
        .find(|t| text.contains(t))
}

/// A pair recovered from generated text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub hs: String,
    pub cn: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<TargetLabel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MalformedOpenTag,
    UnknownLabel,
    UnexpectedLabel,
    MissingEndHs,
    MissingOpenCn,
    MissingEndCn,
    EmptyText,
    /// Text or tags outside any fragment; not tied to a fragment.
    StrayText,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Byte offset into the raw text.
    pub offset: usize,
    /// Index of the open-hs fragment this diagnostic rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment: Option<usize>,
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub candidates: Vec<Candidate>,
    pub diagnostics: Vec<Diagnostic>,
    /// Number of open-hs occurrences; each is either a candidate or skipped.
    pub fragments: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Lexeme<'a> {
    Text(&'a str),
    /// Well-formed opening tag with its raw label, if labeled.
    OpenHs(Option<&'a str>),
    MalformedOpenHs,
    EndHs,
    OpenCn,
    EndCn,
}

fn lex(raw: &str) -> Vec<(usize, Lexeme<'_>)> {
    let mut out = Vec::new();
    let mut text_start = 0;
    let mut pos = 0;
    while let Some(found) = raw[pos..].find(TAG_START) {
        let at = pos + found;
        let rest = &raw[at..];
        let (lexeme, len) = if rest.starts_with(OPEN_HS) {
            (Lexeme::OpenHs(None), OPEN_HS.len())
        } else if let Some(after_colon) = rest.strip_prefix("<|startofhs:") {
            let stem = "<|startofhs:".len();
            match after_colon.find(TAG_CLOSE) {
                Some(close)
                    if close <= MAX_LABEL_LEN && !after_colon[..close].contains(TAG_START) =>
                {
                    (Lexeme::OpenHs(Some(&after_colon[..close])), stem + close + TAG_CLOSE.len())
                }
                _ => (Lexeme::MalformedOpenHs, stem),
            }
        } else if rest.starts_with(OPEN_HS_STEM) {
            (Lexeme::MalformedOpenHs, OPEN_HS_STEM.len())
        } else if rest.starts_with(END_HS) {
            (Lexeme::EndHs, END_HS.len())
        } else if rest.starts_with(OPEN_CN) {
            (Lexeme::OpenCn, OPEN_CN.len())
        } else if rest.starts_with(END_CN) {
            (Lexeme::EndCn, END_CN.len())
        } else {
            // Not a tag; keep it as text and look again one byte later.
            pos = at + 1;
            continue;
        };
        if text_start < at {
            out.push((text_start, Lexeme::Text(&raw[text_start..at])));
        }
        out.push((at, lexeme));
        pos = at + len;
        text_start = pos;
    }
    if text_start < raw.len() {
        out.push((text_start, Lexeme::Text(&raw[text_start..])));
    }
    out
}

fn strip_pad(text: &str) -> &str {
    let text = text.strip_prefix(' ').unwrap_or(text);
    text.strip_suffix(' ').unwrap_or(text)
}

fn is_open(l: &Lexeme<'_>) -> bool {
    matches!(l, Lexeme::OpenHs(_) | Lexeme::MalformedOpenHs)
}

/// Extracts every well-formed pair from generated text. Never fails: each
/// problem becomes a diagnostic and scanning resumes at the next open-hs tag.
pub fn parse_generation(raw: &str, format: ExportFormat) -> ParseOutcome {
    let lexemes = lex(raw);
    let mut outcome = ParseOutcome::default();
    let mut i = 0;
    while i < lexemes.len() {
        let (offset, lexeme) = &lexemes[i];
        if !is_open(lexeme) {
            let stray = match lexeme {
                Lexeme::Text(t) => !t.trim().is_empty(),
                _ => true,
            };
            if stray {
                outcome.diagnostics.push(Diagnostic {
                    offset: *offset,
                    fragment: None,
                    kind: DiagnosticKind::StrayText,
                    message: "content outside any pair".into(),
                });
            }
            i += 1;
            continue;
        }

        let fragment = outcome.fragments;
        outcome.fragments += 1;
        match parse_fragment(&lexemes, i, format) {
            Ok((candidate, next)) => {
                outcome.candidates.push(candidate);
                i = next;
            }
            Err((at, kind, message)) => {
                outcome.skipped += 1;
                outcome.diagnostics.push(Diagnostic {
                    offset: lexemes.get(at).map_or(raw.len(), |(o, _)| *o),
                    fragment: Some(fragment),
                    kind,
                    message,
                });
                // Resynchronise at the next opening tag after this fragment's own.
                i += 1;
                while i < lexemes.len() && !is_open(&lexemes[i].1) {
                    i += 1;
                }
            }
        }
    }
    outcome
}

type FragmentError = (usize, DiagnosticKind, String);

fn parse_fragment(
    lexemes: &[(usize, Lexeme<'_>)],
    start: usize,
    format: ExportFormat,
) -> Result<(Candidate, usize), FragmentError> {
    let label = match &lexemes[start].1 {
        Lexeme::MalformedOpenHs => {
            return Err((start, DiagnosticKind::MalformedOpenTag, "malformed opening tag".into()))
        }
        Lexeme::OpenHs(None) => None,
        Lexeme::OpenHs(Some(raw_label)) => {
            if format == ExportFormat::Plain {
                return Err((
                    start,
                    DiagnosticKind::UnexpectedLabel,
                    "labeled opening tag in plain format".into(),
                ));
            }
            let name = raw_label.trim();
            match name.parse::<TargetLabel>() {
                Ok(l) => Some(l),
                Err(_) => {
                    return Err((
                        start,
                        DiagnosticKind::UnknownLabel,
                        format!("unknown target label `{name}`"),
                    ))
                }
            }
        }
        _ => unreachable!("fragments start at an opening tag"),
    };

    let mut i = start + 1;
    let take_text = |i: &mut usize| -> &str {
        match lexemes.get(*i) {
            Some((_, Lexeme::Text(t))) => {
                *i += 1;
                t
            }
            _ => "",
        }
    };

    let hs = take_text(&mut i);
    expect(lexemes, i, &Lexeme::EndHs, DiagnosticKind::MissingEndHs)?;
    i += 1;
    let between = take_text(&mut i);
    if !between.trim().is_empty() {
        return Err((i - 1, DiagnosticKind::MissingOpenCn, "text between end-hs and open-cn".into()));
    }
    expect(lexemes, i, &Lexeme::OpenCn, DiagnosticKind::MissingOpenCn)?;
    i += 1;
    let cn = take_text(&mut i);
    expect(lexemes, i, &Lexeme::EndCn, DiagnosticKind::MissingEndCn)?;
    i += 1;

    let (hs, cn) = (strip_pad(hs), strip_pad(cn));
    if hs.trim().is_empty() || cn.trim().is_empty() {
        return Err((start, DiagnosticKind::EmptyText, "empty hate speech or counter narrative".into()));
    }
    Ok((
        Candidate {
            hs: hs.to_string(),
            cn: cn.to_string(),
            label,
        },
        i,
    ))
}

fn expect(
    lexemes: &[(usize, Lexeme<'_>)],
    i: usize,
    want: &Lexeme<'_>,
    kind: DiagnosticKind,
) -> Result<(), FragmentError> {
    match lexemes.get(i) {
        Some((_, l)) if l == want => Ok(()),
        Some(_) => Err((i, kind, format!("expected {}", describe(want)))),
        None => Err((i, kind, format!("truncated before {}", describe(want)))),
    }
}

fn describe(l: &Lexeme<'_>) -> &'static str {
    match l {
        Lexeme::EndHs => END_HS,
        Lexeme::OpenCn => OPEN_CN,
        Lexeme::EndCn => END_CN,
        _ => "tag",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_line_byte_form() {
        assert_eq!(
            format_pair("h", "c", Some(TargetLabel::Muslims), ExportFormat::Plain),
            "<|startofhs|> h <|endofhs|> <|startofcn|> c <|endofcn|>"
        );
    }

    #[test]
    fn labeled_line_byte_form() {
        assert_eq!(
            format_pair("h", "c", Some(TargetLabel::Muslims), ExportFormat::Labeled),
            "<|startofhs: MUSLIMS|> h <|endofhs|> <|startofcn|> c <|endofcn|>"
        );
    }

    #[test]
    fn two_concatenated_pairs() {
        let raw = "<|startofhs|> a <|endofhs|> <|startofcn|> b <|endofcn|><|startofhs|> c <|endofhs|> <|startofcn|> d <|endofcn|>";
        let out = parse_generation(raw, ExportFormat::Plain);
        assert_eq!(out.candidates.len(), 2);
        assert!(out.diagnostics.is_empty());
        assert_eq!(out.candidates[1].hs, "c");
        assert_eq!(out.candidates[1].cn, "d");
    }

    #[test]
    fn missing_end_cn_recovers() {
        let raw = "<|startofhs|> a <|endofhs|> <|startofcn|> b \n<|startofhs|> c <|endofhs|> <|startofcn|> d <|endofcn|>";
        let out = parse_generation(raw, ExportFormat::Plain);
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.diagnostics.len(), 1);
        assert_eq!(out.diagnostics[0].kind, DiagnosticKind::MissingEndCn);
        assert_eq!(out.candidates[0].hs, "c");
        assert_eq!((out.fragments, out.skipped), (2, 1));
    }

    #[test]
    fn truncated_tail() {
        let raw = "<|startofhs|> a <|endofhs|> <|startofcn|> b <|endofcn|> <|startofhs|> half";
        let out = parse_generation(raw, ExportFormat::Plain);
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.diagnostics[0].kind, DiagnosticKind::MissingEndHs);
    }

    #[test]
    fn labeled_extraction() {
        let raw = "<|startofhs: MUSLIMS|> h <|endofhs|> <|startofcn|> c <|endofcn|>";
        let out = parse_generation(raw, ExportFormat::Labeled);
        assert_eq!(
            out.candidates,
            vec![Candidate {
                hs: "h".into(),
                cn: "c".into(),
                label: Some(TargetLabel::Muslims)
            }]
        );
    }

    #[test]
    fn unknown_label_rejected() {
        let raw = "<|startofhs: ROMANI|> h <|endofhs|> <|startofcn|> c <|endofcn|>";
        let out = parse_generation(raw, ExportFormat::Labeled);
        assert!(out.candidates.is_empty());
        assert_eq!(out.diagnostics[0].kind, DiagnosticKind::UnknownLabel);
    }

    #[test]
    fn labeled_tag_in_plain_mode_rejected() {
        let raw = "<|startofhs: JEWS|> h <|endofhs|> <|startofcn|> c <|endofcn|>";
        let out = parse_generation(raw, ExportFormat::Plain);
        assert_eq!(out.diagnostics[0].kind, DiagnosticKind::UnexpectedLabel);
    }

    #[test]
    fn stray_text_is_reported_without_a_fragment() {
        let raw = "junk <|startofhs|> a <|endofhs|> <|startofcn|> b <|endofcn|> <|endoftext|>";
        let out = parse_generation(raw, ExportFormat::Plain);
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.skipped, 0);
        assert!(out.diagnostics.iter().all(|d| d.fragment.is_none()));
    }

    #[test]
    fn malformed_open_tag_is_a_fragment() {
        let raw = "<|startofhsX a <|endofhs|> <|startofcn|> b <|endofcn|>";
        let out = parse_generation(raw, ExportFormat::Plain);
        assert_eq!((out.fragments, out.skipped), (1, 1));
        assert_eq!(out.diagnostics[0].kind, DiagnosticKind::MalformedOpenTag);
    }

    #[test]
    fn empty_texts_rejected() {
        let raw = "<|startofhs|>  <|endofhs|> <|startofcn|> b <|endofcn|>";
        let out = parse_generation(raw, ExportFormat::Plain);
        assert_eq!(out.diagnostics[0].kind, DiagnosticKind::EmptyText);
    }

    #[test]
    fn pipes_and_angles_inside_text_survive() {
        let raw = format_pair("a <| b |> c", "x < y | z >", None, ExportFormat::Plain);
        let out = parse_generation(&raw, ExportFormat::Plain);
        assert_eq!(out.candidates[0].hs, "a <| b |> c");
        assert_eq!(out.candidates[0].cn, "x < y | z >");
    }

    #[test]
    fn special_token_detection() {
        assert_eq!(find_special_token("a <|startofhs: X|> b"), Some("<|startofhs"));
        assert_eq!(find_special_token("a <|endofcn|>"), Some(END_CN));
        assert_eq!(find_special_token("a <| b"), None);
    }
}
