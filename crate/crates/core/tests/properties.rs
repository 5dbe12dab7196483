use std::io::Cursor;

use hitloop_core::grammar::{format_pair, parse_generation, ExportFormat};
use hitloop_core::label::TargetLabel;
use hitloop_core::metrics::{edit_distance, imbalance_degree, novelty, ter, tokenize, Distance, TokenSequence};
use hitloop_core::record::{PairRecord, ReviewStatus};
use hitloop_core::store::CorpusStore;
use proptest::prelude::*;

fn label() -> impl Strategy<Value = TargetLabel> {
    prop::sample::select(TargetLabel::ALL.to_vec())
}

fn text() -> impl Strategy<Value = String> {
    "[a-z<>|:' é]{0,12}[a-z]".prop_filter("no special tokens", |s| {
        hitloop_core::grammar::find_special_token(s).is_none()
    })
}

fn record(i: usize) -> impl Strategy<Value = PairRecord> {
    (text(), text(), prop::option::of((text(), text())), label(), any::<bool>()).prop_map(
        move |(hs, cn, edit, target, discard)| {
            let mut r = PairRecord::pending(format!("p{i}"), "X", hs, cn);
            match edit {
                _ if discard => {
                    r.status = ReviewStatus::Discarded;
                    r.annotator = Some("ann".into());
                }
                Some((h, c)) if h != r.hs_original || c != r.cn_original => {
                    r.status = ReviewStatus::Modified;
                    r.hs_edited = Some(h);
                    r.cn_edited = Some(c);
                    r.target = Some(target);
                }
                _ => {
                    r.status = ReviewStatus::Untouched;
                    r.target = Some(target);
                }
            }
            r
        },
    )
}

fn records() -> impl Strategy<Value = Vec<PairRecord>> {
    (1usize..12).prop_flat_map(|n| (0..n).map(record).collect::<Vec<_>>())
}

fn sentences(max: usize) -> impl Strategy<Value = Vec<TokenSequence>> {
    prop::collection::vec(prop::collection::vec(0u8..20, 1..8), 1..max).prop_map(|v| {
        v.into_iter()
            .map(|s| tokenize(&s.iter().map(|t| format!("t{t}")).collect::<Vec<_>>().join(" ")))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pair_jsonl_round_trips_through_the_store(recs in records()) {
        let store = CorpusStore::in_memory();
        store.create_version("X", vec![], 1, None).unwrap();
        store.add_pairs("X", recs.clone()).unwrap();
        let mut out = Vec::new();
        store.export_pairs("X", &mut out).unwrap();

        let copy = CorpusStore::in_memory();
        copy.import_pairs(Cursor::new(out), "X", vec![], None).unwrap();
        prop_assert_eq!(copy.snapshot("X").unwrap().records, recs);
    }

    #[test]
    fn on_disk_store_replays_identically(recs in records()) {
        let dir = tempfile::tempdir().unwrap();
        let accepted = recs.iter().filter(|r| r.is_accepted()).count() as u32;
        {
            let store = CorpusStore::open(dir.path()).unwrap();
            store.create_version("X", vec![], accepted.max(1), None).unwrap();
            store.add_pairs("X", recs.clone()).unwrap();
            if accepted > 0 {
                store.freeze("X").unwrap();
            }
        }
        let reopened = CorpusStore::open(dir.path()).unwrap();
        let snap = reopened.snapshot("X").unwrap();
        prop_assert_eq!(snap.version.frozen, accepted > 0);
        prop_assert_eq!(snap.records, recs);
    }

    #[test]
    fn training_line_parses_back(hs in text(), cn in text(), l in label()) {
        for format in [ExportFormat::Plain, ExportFormat::Labeled] {
            let out = parse_generation(&format_pair(&hs, &cn, Some(l), format), format);
            prop_assert!(out.diagnostics.is_empty());
            prop_assert_eq!(out.candidates.len(), 1);
            prop_assert_eq!(&out.candidates[0].hs, &hs);
            prop_assert_eq!(&out.candidates[0].cn, &cn);
        }
    }

    #[test]
    fn parser_accounts_for_every_fragment(raw in "(<\\|startofhs(: [A-Z]{0,6})?\\|>|<\\|endofhs\\|>|<\\|startofcn\\|>|<\\|endofcn\\|>| |x|<\\||\\|>){0,40}") {
        let out = parse_generation(&raw, ExportFormat::Labeled);
        prop_assert_eq!(out.fragments, raw.matches("<|startofhs").count());
        prop_assert_eq!(out.candidates.len() + out.skipped, out.fragments);
    }

    #[test]
    fn novelty_never_grows_with_the_reference(c in sentences(10), r in sentences(10), extra in sentences(10)) {
        let grown: Vec<_> = r.iter().chain(&extra).cloned().collect();
        let (before, after) = (novelty(&c, &r).unwrap(), novelty(&c, &grown).unwrap());
        prop_assert!(after <= before);
        prop_assert!((0.0..=1.0).contains(&before));
    }

    #[test]
    fn imbalance_degree_is_scale_invariant(counts in prop::collection::vec(0u64..500, 2..10), s in 1u64..1000) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let scaled: Vec<u64> = counts.iter().map(|c| c * s).collect();
        let id = imbalance_degree(&counts, Distance::Euclidean).unwrap();
        prop_assert_eq!(id, imbalance_degree(&scaled, Distance::Euclidean).unwrap());
        let minority = counts.iter().filter(|&&c| c * (counts.len() as u64) < counts.iter().sum::<u64>()).count();
        prop_assert!(id >= minority.saturating_sub(1) as f64 && id <= minority.max(1) as f64 + 1e-12);
    }

    #[test]
    fn ter_is_bounded_by_edit_distance(h in prop::collection::vec(0u8..4, 0..14), r in prop::collection::vec(0u8..4, 1..14)) {
        let seq = |v: &[u8]| tokenize(&v.iter().map(|t| format!("w{t}")).collect::<Vec<_>>().join(" "));
        let got = ter(&seq(&h), &seq(&r)).unwrap();
        let floor = h.len().abs_diff(r.len()) as f64 / r.len() as f64;
        prop_assert!(got >= floor);
        prop_assert!(got <= edit_distance(&h, &r) as f64 / r.len() as f64);
        prop_assert_eq!(ter(&seq(&r), &seq(&r)).unwrap(), 0.0);
    }
}
