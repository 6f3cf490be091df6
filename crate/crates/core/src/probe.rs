//! Probe generation, scheduling around checkpoints, and graph expansion.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graph::{build_api_graph, intermediate_nodes, join_nodes, ApiGraph, NodeId};
use crate::model::{
    encode_segment, parse_path, url_for, ApiCall, ApiSequence, HttpRequest, HttpResponse, Method,
    ModelError, Origin,
};
use crate::similarity::{is_json_mime, is_xml_mime};
use crate::testsuite::Session;
use crate::transport::Transport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Intermediate,
    Bipartite,
    Response,
    Operation,
}

impl Strategy {
    /// Stage order.
    pub const ALL: [Strategy; 4] = [
        Strategy::Intermediate,
        Strategy::Bipartite,
        Strategy::Response,
        Strategy::Operation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Intermediate => "intermediate",
            Strategy::Bipartite => "bipartite",
            Strategy::Response => "response",
            Strategy::Operation => "operation",
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown probe stage `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    pub slot: usize,
    /// Transport failures carry their message.
    pub outcome: Result<HttpResponse, String>,
}

impl Attempt {
    pub fn succeeded(&self) -> bool {
        self.outcome.as_ref().is_ok_and(HttpResponse::is_success)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    /// Addressed under the recording's base URL.
    pub request: HttpRequest,
    pub strategy: Strategy,
    pub schedule_slots: Vec<usize>,
    pub attempts: Vec<Attempt>,
}

impl Probe {
    pub fn new(strategy: Strategy, request: HttpRequest) -> Self {
        Probe {
            request,
            strategy,
            schedule_slots: Vec::new(),
            attempts: Vec::new(),
        }
    }

    fn get(strategy: Strategy, url: String) -> Self {
        Probe::new(strategy, HttpRequest::new(Method::Get, url))
    }

    /// `METHOD url`, handy for logs and assertions.
    pub fn label(&self) -> String {
        format!("{} {}", self.request.method, self.request.url)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CheckpointKind {
    Cookie,
    Operation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub index: usize,
    pub kind: CheckpointKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeBudget {
    pub max_probes_executed: usize,
    pub max_wall_time: Duration,
    pub stages_enabled: BTreeSet<Strategy>,
    pub unsafe_methods: bool,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        ProbeBudget {
            max_probes_executed: 5_000,
            max_wall_time: Duration::from_secs(300),
            stages_enabled: Strategy::ALL.into_iter().collect(),
            unsafe_methods: true,
        }
    }
}

/// Cap on response-derived tokens per endpoint.
pub const MAX_RESPONSE_TOKENS: usize = 64;
/// Object nesting depth searched for response tokens.
pub const RESPONSE_TOKEN_DEPTH: usize = 2;

/// Methods covered by operation probes, in generation order.
pub const OPERATION_METHODS: [Method; 7] = [
    Method::Get,
    Method::Post,
    Method::Put,
    Method::Patch,
    Method::Options,
    Method::Head,
    Method::Delete,
];

pub fn find_checkpoints(seq: &ApiSequence) -> Vec<Checkpoint> {
    seq.calls
        .iter()
        .enumerate()
        .filter_map(|(index, call)| {
            if call.response.header("set-cookie").is_some() {
                Some(Checkpoint {
                    index,
                    kind: CheckpointKind::Cookie,
                })
            } else if call.request.method.is_mutating() {
                Some(Checkpoint {
                    index,
                    kind: CheckpointKind::Operation,
                })
            } else {
                None
            }
        })
        .collect()
}

fn dedup(probes: Vec<Probe>) -> Vec<Probe> {
    let mut seen = HashSet::new();
    probes
        .into_iter()
        .filter(|p| seen.insert((p.request.method, p.request.url.clone())))
        .collect()
}

/// One GET per node that has no response yet.
pub fn gen_intermediate(g: &ApiGraph) -> Vec<Probe> {
    let probes = intermediate_nodes(g)
        .into_iter()
        .map(|n| Probe::get(Strategy::Intermediate, url_for(g.base_url(), &g.canonical_path(n))))
        .collect();
    dedup(probes)
}

/// Probes for the edges that would make each join node's neighbourhood a
/// complete bipartite graph.
pub fn gen_bipartite(g: &ApiGraph) -> Vec<Probe> {
    let mut probes = Vec::new();
    for join in join_nodes(g) {
        let left = g.parents(join).to_vec();
        let mut right: Vec<NodeId> = Vec::new();
        for &l in &left {
            for &r in g.children(l) {
                if !right.contains(&r) {
                    right.push(r);
                }
            }
        }
        for &l in &left {
            for &r in &right {
                if g.children(l).contains(&r) {
                    continue;
                }
                let mut path = g.canonical_path(l);
                path.push(g.segment(r).name.clone());
                probes.push(Probe::get(Strategy::Bipartite, url_for(g.base_url(), &path)));
            }
        }
    }
    dedup(probes)
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Null | Value::Array(_) | Value::Object(_) => None,
    }
}

fn json_tokens(v: &Value, depth: usize, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            if depth >= RESPONSE_TOKEN_DEPTH {
                return;
            }
            for (k, child) in map {
                out.push(k.clone());
                json_tokens(child, depth + 1, out);
            }
        }
        Value::Array(items) => {
            for item in items {
                json_tokens(item, depth, out);
            }
        }
        scalar => out.extend(scalar_text(scalar)),
    }
}

fn xml_tokens(node: roxmltree::Node<'_, '_>, depth: usize, out: &mut Vec<String>) {
    for child in node.children() {
        if child.is_element() {
            if depth >= RESPONSE_TOKEN_DEPTH {
                continue;
            }
            out.push(child.tag_name().name().to_string());
            xml_tokens(child, depth + 1, out);
        } else if child.is_text() {
            let t = child.text().unwrap_or("").trim();
            if !t.is_empty() {
                out.push(t.to_string());
            }
        }
    }
}

/// Keys and scalar values of a structured body, in document order.
pub fn response_tokens(body: &[u8], mime: &str) -> Option<Vec<String>> {
    let mut out = Vec::new();
    if is_json_mime(mime) {
        let v: Value = serde_json::from_slice(body).ok()?;
        json_tokens(&v, 0, &mut out);
    } else if is_xml_mime(mime) {
        let text = std::str::from_utf8(body).ok()?;
        let doc = roxmltree::Document::parse(text).ok()?;
        xml_tokens(doc.root_element(), 0, &mut out);
    } else {
        return None;
    }
    Some(out)
}

/// Collection-valued top-level keys as root-relative paths: `/key`,
/// `/key/<scalar>` and `/key/<id>/<nested collection key>`.
fn root_relative_paths(v: &Value) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let Value::Object(map) = v else { return out };
    for (key, child) in map {
        let elements: Vec<&serde_json::Map<String, Value>> = match child {
            Value::Array(items) => items.iter().filter_map(Value::as_object).collect(),
            Value::Object(obj) => vec![obj],
            _ => continue,
        };
        if elements.is_empty() {
            continue;
        }
        out.push(vec![key.clone()]);
        for el in elements {
            let scalars: Vec<String> = el.values().filter_map(scalar_text).collect();
            for s in &scalars {
                out.push(vec![key.clone(), s.clone()]);
            }
            let Some(id) = scalars.first() else { continue };
            for (nested, value) in el {
                if matches!(value, Value::Array(_) | Value::Object(_)) {
                    out.push(vec![key.clone(), id.clone(), nested.clone()]);
                }
            }
        }
    }
    out
}

fn has_endpoint(g: &ApiGraph, segments: &[String]) -> bool {
    g.find(segments).is_some_and(|n| g.is_endpoint(n))
}

/// Probes built from the keys and values of each endpoint's response.
pub fn gen_response(g: &ApiGraph) -> Vec<Probe> {
    let mut probes = Vec::new();
    for node in g.endpoints() {
        let Some(payload) = g.segment(node).payload.as_ref() else { continue };
        let Some(tokens) = response_tokens(&payload.body, &payload.mime) else {
            continue;
        };
        let Some(call) = g
            .endpoint_calls(node)
            .iter()
            .find(|c| c.response.body.as_deref() == Some(&payload.body[..]))
        else {
            continue;
        };
        let Ok(base_path) = parse_path(&call.request.url, g.base_url()) else {
            continue;
        };
        let mut seen = HashSet::new();
        let mut taken = 0;
        for token in tokens {
            if taken == MAX_RESPONSE_TOKENS {
                break;
            }
            if token.is_empty() || !seen.insert(encode_segment(&token)) {
                continue;
            }
            taken += 1;
            let mut path = base_path.clone();
            path.push(token);
            if !has_endpoint(g, &path) {
                probes.push(Probe::get(Strategy::Response, url_for(g.base_url(), &path)));
            }
        }
        if is_json_mime(&payload.mime) {
            if let Ok(v) = serde_json::from_slice::<Value>(&payload.body) {
                let mut seen = HashSet::new();
                for path in root_relative_paths(&v)
                    .into_iter()
                    .filter(|p| seen.insert(p.clone()))
                    .take(MAX_RESPONSE_TOKENS)
                {
                    if !has_endpoint(g, &path) {
                        probes.push(Probe::get(Strategy::Response, url_for(g.base_url(), &path)));
                    }
                }
            }
        }
    }
    dedup(probes)
}

fn strip_query(url: &str) -> &str {
    url.split(['?', '#']).next().unwrap_or(url)
}

/// One probe per unobserved method on each concrete endpoint path.
pub fn gen_operation(g: &ApiGraph, calls: &[ApiCall], budget: &ProbeBudget) -> Vec<Probe> {
    let mut order: Vec<String> = Vec::new();
    let mut by_path: BTreeMap<String, Vec<&ApiCall>> = BTreeMap::new();
    for call in calls {
        let path = strip_query(&call.request.url).to_string();
        if parse_path(&path, g.base_url()).is_err() {
            continue;
        }
        if !by_path.contains_key(&path) {
            order.push(path.clone());
        }
        by_path.entry(path).or_default().push(call);
    }
    let mut probes = Vec::new();
    for path in order {
        let siblings = &by_path[&path];
        let observed: BTreeSet<Method> = siblings.iter().map(|c| c.request.method).collect();
        let payload = siblings
            .iter()
            .find_map(|c| c.request.body.as_ref().map(|b| (b.clone(), c.request.body_mime.clone())));
        for method in OPERATION_METHODS {
            if observed.contains(&method) || (method.is_mutating() && !budget.unsafe_methods) {
                continue;
            }
            let mut req = HttpRequest::new(method, path.clone());
            if matches!(method, Method::Post | Method::Put | Method::Patch) {
                req = match &payload {
                    Some((body, mime)) => {
                        req.with_body(body.clone(), mime.as_deref().unwrap_or("application/json"))
                    }
                    None => req.with_body("{}", "application/json"),
                };
            }
            probes.push(Probe::new(Strategy::Operation, req));
        }
    }
    dedup(probes)
}

/// Insertion slots for `probe` in `seq`; slot `k` runs right before call `k`.
pub fn schedule(probe: &Probe, seq: &ApiSequence, g: &ApiGraph, cps: &[Checkpoint]) -> Vec<usize> {
    if let Ok(segments) = parse_path(&probe.request.url, g.base_url()) {
        if g.find(&segments).is_some() {
            let last = seq.calls.iter().rposition(|c| {
                parse_path(&c.request.url, &seq.base_url)
                    .is_ok_and(|s| s.len() >= segments.len() && s[..segments.len()] == segments[..])
            });
            if let Some(k) = last {
                return vec![k];
            }
        }
    }
    let mut slots = vec![cps.first().map_or(0, |c| c.index)];
    for cp in cps {
        slots.push(cp.index + 1);
    }
    slots.sort_unstable();
    slots.dedup();
    slots
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub generated: usize,
    pub executed: usize,
    pub succeeded: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub per_strategy: BTreeMap<Strategy, StrategyStats>,
    pub passes: usize,
    pub checkpoints: usize,
    pub budget_exhausted: bool,
}

impl ProbeStats {
    pub fn totals(&self) -> StrategyStats {
        self.per_strategy.values().fold(StrategyStats::default(), |a, s| StrategyStats {
            generated: a.generated + s.generated,
            executed: a.executed + s.executed,
            succeeded: a.succeeded + s.succeeded,
        })
    }
}

/// Probe count and elapsed time shared across every stage of one run.
#[derive(Debug, Clone)]
pub struct BudgetClock {
    started: Instant,
    pub executed: usize,
}

impl BudgetClock {
    pub fn start() -> Self {
        BudgetClock {
            started: Instant::now(),
            executed: 0,
        }
    }

    pub fn exhausted(&self, budget: &ProbeBudget) -> bool {
        self.executed >= budget.max_probes_executed || self.started.elapsed() >= budget.max_wall_time
    }
}

/// The live server probes are sent to.
pub struct ProbeTarget<'t> {
    pub transport: &'t mut dyn Transport,
    pub base_url: String,
    /// Sent before every stage replay to restore a known server state.
    pub reset: Option<HttpRequest>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    /// Successful probes with the slot that was kept.
    pub successes: Vec<(usize, ApiCall)>,
    pub exhausted: bool,
}

/// Replays `seq` once, sending each probe at each of its slots.
pub fn execute_stage(
    seq: &ApiSequence,
    probes: &mut [Probe],
    budget: &ProbeBudget,
    clock: &mut BudgetClock,
    target: &mut ProbeTarget<'_>,
    stats: &mut ProbeStats,
) -> StageOutcome {
    let n = seq.len();
    let mut by_slot: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, p) in probes.iter().enumerate() {
        for &slot in &p.schedule_slots {
            by_slot.entry(slot.min(n)).or_default().push(i);
        }
    }
    if let Some(reset) = &target.reset {
        let _ = target.transport.send(reset);
    }
    let mut session = Session::new(&mut *target.transport, &seq.base_url, &target.base_url);
    let mut exhausted = false;
    'slots: for k in 0..=n {
        for &pi in by_slot.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
            if clock.exhausted(budget) {
                exhausted = true;
                break 'slots;
            }
            clock.executed += 1;
            let probe = &mut probes[pi];
            stats.per_strategy.entry(probe.strategy).or_default().executed += 1;
            let outcome = session.send(&probe.request).map_err(|e| e.to_string());
            probe.attempts.push(Attempt { slot: k, outcome });
        }
        if k < n {
            let _ = session.send(&seq.calls[k].request);
        }
    }
    let mut successes = Vec::new();
    for probe in probes.iter() {
        let Some(hit) = probe.attempts.iter().find(|a| a.succeeded()) else {
            continue;
        };
        let response = hit.outcome.clone().expect("success implies a response");
        stats.per_strategy.entry(probe.strategy).or_default().succeeded += 1;
        successes.push((
            hit.slot,
            ApiCall {
                request: probe.request.clone(),
                response,
                sequence_index: 0,
                origin: Origin::Probe,
            },
        ));
    }
    StageOutcome { successes, exhausted }
}

/// What one stage of one pass generated and kept.
#[derive(Debug, Clone)]
pub struct StageLog {
    pub pass: usize,
    pub strategy: Strategy,
    pub probes: Vec<Probe>,
    pub succeeded: usize,
}

#[derive(Debug, Clone)]
pub struct Expansion {
    pub graph: ApiGraph,
    pub sequence: ApiSequence,
    pub stats: ProbeStats,
    pub stages: Vec<StageLog>,
}

impl Expansion {
    /// Probes generated by `strategy` in pass `pass` (from 1).
    pub fn generated(&self, pass: usize, strategy: Strategy) -> Vec<&Probe> {
        self.stages
            .iter()
            .filter(|s| s.pass == pass && s.strategy == strategy)
            .flat_map(|s| &s.probes)
            .collect()
    }
}

pub fn generate(strategy: Strategy, g: &ApiGraph, seq: &ApiSequence, budget: &ProbeBudget) -> Vec<Probe> {
    match strategy {
        Strategy::Intermediate => gen_intermediate(g),
        Strategy::Bipartite => gen_bipartite(g),
        Strategy::Response => gen_response(g),
        Strategy::Operation => gen_operation(g, &seq.calls, budget),
    }
}

fn splice(seq: &ApiSequence, successes: Vec<(usize, ApiCall)>) -> ApiSequence {
    let mut at: BTreeMap<usize, Vec<ApiCall>> = BTreeMap::new();
    for (slot, call) in successes {
        at.entry(slot).or_default().push(call);
    }
    let mut calls = Vec::with_capacity(seq.len() + at.values().map(Vec::len).sum::<usize>());
    for k in 0..=seq.len() {
        if let Some(extra) = at.remove(&k) {
            calls.extend(extra);
        }
        if let Some(c) = seq.calls.get(k) {
            calls.push(c.clone());
        }
    }
    ApiSequence::new(seq.base_url.clone(), calls)
}

/// Runs the enabled stages in order, repeating full passes until one adds
/// nothing or the budget runs out.
pub fn expand(
    seq: &ApiSequence,
    graph: ApiGraph,
    budget: &ProbeBudget,
    target: &mut ProbeTarget<'_>,
) -> Result<Expansion, ModelError> {
    let mut g = graph;
    let mut seq = seq.clone();
    let mut stats = ProbeStats {
        checkpoints: find_checkpoints(&seq).len(),
        ..ProbeStats::default()
    };
    let mut stages = Vec::new();
    let mut attempted: HashSet<(Method, String)> = seq
        .calls
        .iter()
        .map(|c| (c.request.method, c.request.url.clone()))
        .collect();
    let mut clock = BudgetClock::start();
    'passes: loop {
        stats.passes += 1;
        let mut progress = false;
        for strategy in Strategy::ALL {
            if !budget.stages_enabled.contains(&strategy) {
                continue;
            }
            if clock.exhausted(budget) {
                stats.budget_exhausted = true;
                break 'passes;
            }
            let mut probes = generate(strategy, &g, &seq, budget);
            probes.retain(|p| attempted.insert((p.request.method, p.request.url.clone())));
            stats.per_strategy.entry(strategy).or_default().generated += probes.len();
            if probes.is_empty() {
                continue;
            }
            let cps = find_checkpoints(&seq);
            for p in probes.iter_mut() {
                p.schedule_slots = schedule(p, &seq, &g, &cps);
            }
            let outcome = execute_stage(&seq, &mut probes, budget, &mut clock, target, &mut stats);
            let succeeded = outcome.successes.len();
            stages.push(StageLog {
                pass: stats.passes,
                strategy,
                probes,
                succeeded,
            });
            if succeeded > 0 {
                progress = true;
                let calls: Vec<ApiCall> = outcome.successes.iter().map(|(_, c)| c.clone()).collect();
                g = build_api_graph(&calls, Some(g.clone()), &seq.base_url, g.similarity())?;
                seq = splice(&seq, outcome.successes);
            }
            if outcome.exhausted {
                stats.budget_exhausted = true;
                break 'passes;
            }
        }
        if !progress {
            break;
        }
    }
    Ok(Expansion {
        graph: g,
        sequence: seq,
        stats,
        stages,
    })
}
