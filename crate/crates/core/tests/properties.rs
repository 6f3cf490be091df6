#[path = "support/props.rs"]
mod props;

use proptest::prelude::*;

use carvr_core::evaluate::{score, ScoreOptions};
use carvr_core::graph::{are_equal, PathSegment};
use carvr_core::model::{join_path, parse_path, url_for, ApiSequence, Method};
use carvr_core::similarity::{key_tree, Payload, Similarity};
use carvr_core::specgen::{SpecDocument, UriTemplate};
use carvr_core::testsuite::{emit_suite, SplitMode, TestSuite};
use props::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn compare_responses_is_value_blind(input in value_blindness_input()) {
        check_value_blindness(input)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_recorded_uri_resolves_to_one_template(c in corpus(50)) {
        check_template_soundness(c)?;
    }

    #[test]
    fn filtering_is_idempotent(calls in filter_input()) {
        check_filter_idempotence(calls)?;
    }

    #[test]
    fn graph_grows_monotonically_in_any_order(input in monotonicity_input()) {
        check_graph_monotonicity(input)?;
    }

    #[test]
    fn are_equal_is_symmetric(
        a in (segment(), 0usize..3, prop::sample::select(vec!["", "/a", "/users"]), any::<bool>(), any::<u8>()),
        b in (segment(), 0usize..3, prop::sample::select(vec!["", "/a", "/users"]), any::<bool>(), any::<u8>()),
    ) {
        let make = |(name, index, parent, endpoint, shape): (String, usize, &str, bool, u8)| {
            let seg = PathSegment::new(&name, index, parent);
            if endpoint { seg.endpoint(Some(Payload::json(&shaped_body(shape, 0)))) } else { seg }
        };
        let (s1, s2) = (make(a), make(b));
        let sim = Similarity::default();
        prop_assert_eq!(are_equal(&s1, &s2, &sim), are_equal(&s2, &s1, &sim));
        prop_assert!(are_equal(&s1, &s1, &sim));
    }

    #[test]
    fn score_of_a_document_against_itself_is_one(
        items in prop::collection::btree_map(
            prop::collection::vec(prop_oneof![segment(), Just("{p}".to_string())], 0..4),
            prop::collection::btree_set(prop::sample::select(Method::ALL.to_vec()), 1..4),
            0..8,
        )
    ) {
        let mut doc = SpecDocument::new("t", "s");
        for (segs, methods) in &items {
            let t: UriTemplate = join_path(segs).parse().unwrap();
            let item = doc.item_for(&t);
            for m in methods {
                item.operations.entry(*m).or_default();
            }
        }
        let m = score(&doc, &doc, &ScoreOptions::default());
        for v in [m.path_precision, m.path_recall, m.path_f1, m.op_precision, m.op_recall, m.op_f1,
                  m.op_precision_star, m.op_recall_star, m.path_duplication, m.op_duplication] {
            prop_assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn scores_ignore_parameter_names(
        segs in prop::collection::vec(prop_oneof![segment(), Just("{p}".to_string())], 1..4),
        other in prop::collection::vec(prop_oneof![segment(), Just("{q}".to_string())], 1..4),
    ) {
        let doc = |paths: &[String]| {
            let mut d = SpecDocument::new("t", "s");
            for p in paths {
                d.item_for(&p.parse().unwrap()).operations.entry(Method::Get).or_default();
            }
            d
        };
        let gt = doc(&[join_path(&other)]);
        let renamed: Vec<String> = segs.iter().map(|s| if s == "{p}" { "{zz}".to_string() } else { s.clone() }).collect();
        let a = score(&doc(&[join_path(&segs)]), &gt, &ScoreOptions::default());
        let b = score(&doc(&[join_path(&renamed)]), &gt, &ScoreOptions::default());
        prop_assert_eq!(a.path_precision, b.path_precision);
        prop_assert_eq!(a.op_f1, b.op_f1);
    }

    #[test]
    fn suites_round_trip(calls in prop::collection::vec(random_call(), 0..20), split in any::<bool>()) {
        let seq = ApiSequence::new(BASE, calls);
        let mode = if split { SplitMode::PerCheckpoint } else { SplitMode::Single };
        let suite = emit_suite(&seq, mode);
        prop_assert_eq!(TestSuite::from_json(&suite.to_json()).unwrap(), suite.clone());
        prop_assert_eq!(suite.step_count(), seq.len());
        let back = suite.to_sequence().unwrap();
        prop_assert_eq!(back.len(), seq.len());
        for (x, y) in back.calls.iter().zip(&seq.calls) {
            prop_assert_eq!(&x.response, &y.response);
            prop_assert_eq!(x.request.method, y.request.method);
        }
    }

    #[test]
    fn parse_path_rejoins(segs in prop::collection::vec(segment(), 0..5), slash in any::<bool>(), query in any::<bool>()) {
        let mut url = url_for(BASE, &segs);
        if slash && !segs.is_empty() { url.push('/'); }
        if query { url.push_str("?sort=asc"); }
        prop_assert_eq!(parse_path(&url, BASE).unwrap(), segs);
    }

    #[test]
    fn sequences_are_sorted_by_index(calls in prop::collection::vec(random_call(), 0..20)) {
        let seq = ApiSequence::new(BASE, calls);
        let mut sorted = seq.calls.clone();
        sorted.sort_by_key(|c| c.sequence_index);
        prop_assert_eq!(sorted, seq.calls);
    }
}

#[test]
fn key_tree_is_order_independent() {
    let a = key_tree(br#"{"b":1,"a":{"y":1,"x":2}}"#, "application/json").unwrap();
    let b = key_tree(br#"{"a":{"x":0,"y":0},"b":"z"}"#, "application/json").unwrap();
    assert_eq!(a, b);
}
