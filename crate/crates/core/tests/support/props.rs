//! Generators and checks shared by the property tests and the acceptance run.

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use serde_json::{Map, Value};

use carvr_core::filter::{run_pipeline, FilterConfig};
use carvr_core::graph::{build_api_graph, complete_path_strings};
use carvr_core::model::{join_path, parse_path, url_for, ApiCall, ApiSequence, HttpRequest, HttpResponse, Method};
use carvr_core::similarity::{compare_responses, Payload, Similarity};
use carvr_core::specgen::{extract_openapi, SpecConfig, TemplateSegment, UriTemplate};

pub const BASE: &str = "http://h/api";

pub type Corpus = Vec<(Vec<String>, u8, Method)>;

pub fn scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i32>().prop_map(Value::from),
        "[a-z0-9 ]{0,8}".prop_map(Value::String),
    ]
}

pub fn json_value() -> impl Strategy<Value = Value> {
    scalar().prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-e]{1,3}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect::<Map<_, _>>())),
        ]
    })
}

/// Replaces every scalar, drawing replacements from `seed`.
pub fn mutate(v: &Value, seed: &mut impl Iterator<Item = u8>) -> Value {
    match v {
        Value::Array(items) => Value::Array(items.iter().map(|i| mutate(i, seed)).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), mutate(x, seed))).collect()),
        _ => match seed.next().unwrap_or(0) % 4 {
            0 => Value::Null,
            1 => Value::Bool(seed.next().unwrap_or(0) % 2 == 0),
            2 => Value::from(i64::from(seed.next().unwrap_or(0)) * 37 - 1000),
            _ => Value::String(format!("v{}", seed.next().unwrap_or(0))),
        },
    }
}

pub fn segment() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["users", "tags", "a", "b", "1", "2", "x y"]).prop_map(String::from)
}

pub fn shaped_body(shape: u8, i: usize) -> Value {
    match shape % 4 {
        0 => serde_json::json!({"id": i, "name": format!("n{i}")}),
        1 => serde_json::json!([{"id": i}]),
        2 => serde_json::json!({"ok": true, "items": [i]}),
        _ => serde_json::json!({"message": "m"}),
    }
}

pub fn corpus(max: usize) -> impl Strategy<Value = Corpus> {
    prop::collection::vec(
        (
            prop::collection::vec(segment(), 1..5),
            any::<u8>(),
            prop_oneof![Just(Method::Get), Just(Method::Post), Just(Method::Delete)],
        ),
        1..=max,
    )
}

pub fn calls_of(corpus: &Corpus) -> Vec<ApiCall> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, (segs, shape, method))| {
            ApiCall::new(
                HttpRequest::new(*method, url_for(BASE, segs)),
                HttpResponse::json(200, &shaped_body(*shape, i)),
            )
        })
        .collect()
}

pub fn random_call() -> impl Strategy<Value = ApiCall> {
    (
        prop::sample::select(Method::ALL.to_vec()),
        prop::sample::select(vec![200u16, 201, 204, 302, 400, 404, 500, 503]),
        prop::sample::select(vec![
            Some("application/json"),
            Some("text/html"),
            Some("image/png"),
            Some("text/xml"),
            None,
        ]),
        prop::collection::vec(segment(), 0..3),
    )
        .prop_map(|(m, status, mime, segs)| {
            let mut resp = HttpResponse::new(status);
            if let Some(mime) = mime {
                resp = resp.with_body("{}", mime);
            }
            ApiCall::new(HttpRequest::new(m, url_for(BASE, &segs)), resp)
        })
}

pub fn value_blindness_input() -> impl Strategy<Value = (Value, Vec<u8>)> {
    (json_value(), prop::collection::vec(any::<u8>(), 64))
}

pub fn check_value_blindness((v, seed): (Value, Vec<u8>)) -> Result<(), TestCaseError> {
    let mut it = seed.into_iter().cycle();
    let m = mutate(&v, &mut it);
    let (a, b) = (Payload::json(&v), Payload::json(&m));
    prop_assert_eq!(a.key_tree().unwrap(), b.key_tree().unwrap());
    prop_assert!(compare_responses(&a, &b));
    prop_assert!(compare_responses(&b, &a));
    prop_assert!(compare_responses(&a, &a));
    Ok(())
}

/// Every recorded URI resolves to one template, no two items share a shape,
/// and parameter examples are recorded segments.
pub fn check_template_soundness(corpus: Corpus) -> Result<(), TestCaseError> {
    let calls = calls_of(&corpus);
    let mut g = build_api_graph(&calls, None, BASE, Similarity::default()).unwrap();
    let doc = extract_openapi(&mut g, &SpecConfig::default());
    for (segs, _, _) in &corpus {
        let hits = doc.templates().filter(|t| t.matches(segs)).count();
        prop_assert!(hits >= 1, "{:?} unmatched in {:?}", segs, doc.path_items.keys());
        prop_assert!(doc.resolve(segs).is_some());
    }
    let shapes: BTreeSet<String> = doc.templates().map(UriTemplate::shape).collect();
    prop_assert_eq!(shapes.len(), doc.path_items.len());
    let recorded: BTreeSet<&String> = corpus.iter().flat_map(|(s, _, _)| s).collect();
    for t in doc.templates() {
        for seg in &t.segments {
            if let TemplateSegment::Parameter { examples, .. } = seg {
                for e in examples {
                    prop_assert!(recorded.contains(e), "example {} not recorded", e);
                }
            }
        }
    }
    Ok(())
}

pub fn filter_input() -> impl Strategy<Value = Vec<ApiCall>> {
    prop::collection::vec(random_call(), 0..40)
}

pub fn check_filter_idempotence(calls: Vec<ApiCall>) -> Result<(), TestCaseError> {
    let seq = ApiSequence::new(BASE, calls);
    let cfg = FilterConfig::default();
    let (once, report) = run_pipeline(&seq, &cfg);
    let (twice, again) = run_pipeline(&once, &cfg);
    prop_assert_eq!(&once, &twice);
    prop_assert_eq!(again.dropped(), 0);
    prop_assert_eq!(report.recorded_count, report.kept_count + report.dropped());
    Ok(())
}

pub fn monotonicity_input() -> impl Strategy<Value = (Corpus, Vec<u16>, usize)> {
    (corpus(20), prop::collection::vec(any::<u16>(), 20), 0usize..20)
}

/// Shuffles the corpus, splits it in two, and checks the second build only
/// adds to the first.
pub fn check_graph_monotonicity((corpus, order, cut): (Corpus, Vec<u16>, usize)) -> Result<(), TestCaseError> {
    let mut keyed: Vec<(u16, ApiCall)> = order.iter().copied().zip(calls_of(&corpus)).collect();
    keyed.sort_by_key(|(k, _)| *k);
    let calls: Vec<ApiCall> = keyed.into_iter().map(|(_, c)| c).collect();
    let cut = cut.min(calls.len());
    let before = build_api_graph(&calls[..cut], None, BASE, Similarity::default()).unwrap();
    let after = build_api_graph(&calls[cut..], Some(before.clone()), BASE, Similarity::default()).unwrap();
    prop_assert!(after.len() >= before.len());
    for id in before.node_ids() {
        prop_assert_eq!(&before.segment(id).name, &after.segment(id).name);
    }
    let edges_after: BTreeSet<_> = after.edges().into_iter().collect();
    for e in before.edges() {
        prop_assert!(edges_after.contains(&e));
    }
    let rendered = complete_path_strings(&after);
    for c in &calls {
        let segs = parse_path(&c.request.url, BASE).unwrap();
        prop_assert!(rendered.contains(&join_path(&segs)));
    }
    Ok(())
}
