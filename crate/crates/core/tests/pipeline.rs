use std::collections::BTreeSet;

use carvr_core::filter::{run_pipeline, FilterConfig};
use carvr_core::fixture::FixtureApp;
use carvr_core::graph::{are_equal, build_api_graph, NodeId};
use carvr_core::model::{ApiCall, ApiSequence, HttpRequest, Method, Origin};
use carvr_core::probe::{expand, ProbeBudget, ProbeTarget, Strategy};
use carvr_core::similarity::Similarity;
use carvr_core::specgen::{extract_openapi, SpecConfig, SpecDocument, TemplateSegment};
use carvr_core::evaluate::{score, ScoreOptions};

const BASE: &str = "http://fixture/api";

fn record(app: &mut FixtureApp, calls: &[(Method, &str)]) -> ApiSequence {
    let calls = calls
        .iter()
        .map(|(m, p)| {
            let req = HttpRequest::new(*m, format!("{BASE}{p}"));
            let resp = app.handle(&req);
            ApiCall::new(req, resp)
        })
        .collect();
    ApiSequence::new(BASE, calls)
}

fn running_example() -> ApiSequence {
    let mut app = FixtureApp::new();
    record(
        &mut app,
        &[
            (Method::Get, "/users/user1/info"),
            (Method::Get, "/users/user2/info"),
            (Method::Get, "/users/user2"),
            (Method::Post, "/users/user1/follow"),
            (Method::Get, "/tags"),
        ],
    )
}

fn shapes(doc: &SpecDocument) -> BTreeSet<String> {
    doc.templates().map(|t| t.shape().replace("{}", "{v}")).collect()
}

fn run(budget: &ProbeBudget) -> SpecDocument {
    let (seq, _) = run_pipeline(&running_example(), &FilterConfig::default());
    let g = build_api_graph(&seq.calls, None, BASE, Similarity::default()).unwrap();
    let mut app = FixtureApp::new();
    let mut target = ProbeTarget {
        transport: &mut app,
        base_url: BASE.into(),
        reset: Some(HttpRequest::new(Method::Post, "http://fixture/__reset")),
    };
    let mut out = expand(&seq, g, budget, &mut target).unwrap();
    extract_openapi(&mut out.graph, &SpecConfig::default())
}

#[test]
fn running_example_reaches_final_path_set() {
    let doc = run(&ProbeBudget::default());
    let expected: BTreeSet<String> = [
        "/users", "/users/{v}", "/users/{v}/info", "/users/{v}/follow", "/articles",
        "/articles/{v}", "/articles/{v}/comments", "/tags", "/tags/{v}",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    assert_eq!(shapes(&doc), expected);
    let gt = SpecDocument::from_openapi_str(carvr_core::fixture::GROUND_TRUTH).unwrap();
    let m = score(&doc, &gt, &ScoreOptions::default());
    assert_eq!(m.path_precision, 1.0, "{:?}", m.fp_paths);
    assert_eq!(m.op_precision_star, 1.0, "{:?}", m.fp_ops);
}

#[test]
fn carver_only_spec_is_the_recorded_shape() {
    let (seq, _) = run_pipeline(&running_example(), &FilterConfig::default());
    let mut g = build_api_graph(&seq.calls, None, BASE, Similarity::default()).unwrap();
    let doc = extract_openapi(&mut g, &SpecConfig::default());
    let got: BTreeSet<String> = doc.path_items.keys().cloned().collect();
    let want: BTreeSet<String> = ["/users/{var0}/info", "/users/user2", "/users/user1/follow", "/tags"]
        .into_iter()
        .map(String::from)
        .collect();
    assert_eq!(got, want);
}

#[test]
fn disabling_response_stage_loses_comments() {
    let budget = ProbeBudget {
        stages_enabled: [Strategy::Intermediate, Strategy::Bipartite, Strategy::Operation]
            .into_iter()
            .collect(),
        ..ProbeBudget::default()
    };
    let doc = run(&budget);
    assert!(!shapes(&doc).contains("/articles/{v}/comments"));
}

fn expansion(budget: &ProbeBudget) -> (carvr_core::graph::ApiGraph, carvr_core::probe::Expansion) {
    let (seq, _) = run_pipeline(&running_example(), &FilterConfig::default());
    let g = build_api_graph(&seq.calls, None, BASE, Similarity::default()).unwrap();
    let mut app = FixtureApp::new();
    let mut target = ProbeTarget {
        transport: &mut app,
        base_url: BASE.into(),
        reset: Some(HttpRequest::new(Method::Post, "http://fixture/__reset")),
    };
    let out = expand(&seq, g.clone(), budget, &mut target).unwrap();
    (g, out)
}

#[test]
fn expansion_is_deterministic_and_monotone() {
    let (before, a) = expansion(&ProbeBudget::default());
    let (_, b) = expansion(&ProbeBudget::default());
    assert_eq!(a.sequence, b.sequence);
    let edges: BTreeSet<_> = a.graph.edges().into_iter().collect();
    for e in before.edges() {
        assert!(edges.contains(&e));
    }
    for id in before.node_ids() {
        assert_eq!(before.segment(id).name, a.graph.segment(id).name);
    }
    for c in &a.sequence.calls {
        if c.origin == Origin::Probe {
            assert!(c.response.status < 400, "{} {}", c.request.method, c.request.url);
        }
    }
    assert!(!a.stats.budget_exhausted);
    for s in a.stats.per_strategy.values() {
        assert!(s.executed >= s.generated);
        assert!(s.succeeded <= s.generated);
    }
    for stage in &a.stages {
        assert!(stage.probes.iter().all(|p| !p.schedule_slots.is_empty()));
    }
}

#[test]
fn fixture_nodes_compare_transitively() {
    let (_, out) = expansion(&ProbeBudget::default());
    let g = &out.graph;
    let sim = g.similarity();
    let ids: Vec<_> = g.node_ids().filter(|id| *id != NodeId::ROOT).collect();
    let eq = |a, b| are_equal(g.segment(a), g.segment(b), &sim);
    for &a in &ids {
        for &b in &ids {
            assert_eq!(eq(a, b), eq(b, a));
            for &c in &ids {
                if eq(a, b) && eq(b, c) {
                    assert!(eq(a, c));
                }
            }
        }
    }
}

#[test]
fn fixture_spec_has_no_duplicate_items() {
    let doc = run(&ProbeBudget::default());
    let m = score(&doc, &doc, &ScoreOptions::default());
    assert_eq!(m.path_duplication, 1.0);
    let gt = SpecDocument::from_openapi_str(carvr_core::fixture::GROUND_TRUTH).unwrap();
    assert_eq!(score(&doc, &gt, &ScoreOptions::default()).path_duplication, 1.0);
}

#[test]
fn parameter_examples_come_from_observed_uris() {
    let (_, mut out) = expansion(&ProbeBudget::default());
    let observed: BTreeSet<String> = out
        .sequence
        .calls
        .iter()
        .flat_map(|c| out.sequence.segments(c).unwrap())
        .collect();
    let doc = extract_openapi(&mut out.graph, &SpecConfig::default());
    for t in doc.templates() {
        for seg in &t.segments {
            if let TemplateSegment::Parameter { examples, .. } = seg {
                assert!(!examples.is_empty());
                for e in examples {
                    assert!(observed.contains(e), "{e}");
                }
            }
        }
    }
}
