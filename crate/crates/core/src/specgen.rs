//! URI template inference and OpenAPI document generation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::graph::{ApiGraph, NodeId};
use crate::model::{ApiCall, Method};
use crate::similarity::{is_json_mime, key_tree, KeyTree, ARRAY_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamType {
    Integer,
    String,
}

impl ParamType {
    pub fn infer<'a>(examples: impl IntoIterator<Item = &'a String>) -> Self {
        let mut any = false;
        for e in examples {
            any = true;
            if e.parse::<i64>().is_err() {
                return ParamType::String;
            }
        }
        if any {
            ParamType::Integer
        } else {
            ParamType::String
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::Integer => "integer",
            ParamType::String => "string",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TemplateSegment {
    Literal(String),
    Parameter {
        name: String,
        examples: Vec<String>,
        inferred_type: ParamType,
    },
}

impl TemplateSegment {
    pub fn parameter(name: &str, examples: Vec<String>) -> Self {
        let inferred_type = ParamType::infer(&examples);
        TemplateSegment::Parameter {
            name: name.to_string(),
            examples,
            inferred_type,
        }
    }

    pub fn is_parameter(&self) -> bool {
        matches!(self, TemplateSegment::Parameter { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct UriTemplate {
    pub segments: Vec<TemplateSegment>,
}

impl UriTemplate {
    /// Rendering with every parameter name erased, e.g. `/users/{}/info`.
    pub fn shape(&self) -> String {
        self.render_with(|_| String::new())
    }

    fn render_with(&self, param: impl Fn(&str) -> String) -> String {
        if self.segments.is_empty() {
            return "/".to_string();
        }
        let mut out = String::new();
        for s in &self.segments {
            out.push('/');
            match s {
                TemplateSegment::Literal(l) => out.push_str(l),
                TemplateSegment::Parameter { name, .. } => {
                    out.push('{');
                    out.push_str(&param(name));
                    out.push('}');
                }
            }
        }
        out
    }

    pub fn parameters(&self) -> impl Iterator<Item = (&str, &[String], ParamType)> {
        self.segments.iter().filter_map(|s| match s {
            TemplateSegment::Parameter {
                name,
                examples,
                inferred_type,
            } => Some((name.as_str(), examples.as_slice(), *inferred_type)),
            TemplateSegment::Literal(_) => None,
        })
    }

    pub fn matches(&self, segments: &[String]) -> bool {
        self.segments.len() == segments.len()
            && self.segments.iter().zip(segments).all(|(t, s)| match t {
                TemplateSegment::Literal(l) => l == s,
                TemplateSegment::Parameter { .. } => true,
            })
    }

    /// Literal positions as flags; larger means more specific when compared
    /// left to right.
    pub fn specificity(&self) -> Vec<bool> {
        self.segments.iter().map(|s| !s.is_parameter()).collect()
    }

    /// Unions parameter examples position-wise from a template of equal shape.
    fn absorb(&mut self, other: &UriTemplate) {
        for (mine, theirs) in self.segments.iter_mut().zip(&other.segments) {
            if let (
                TemplateSegment::Parameter {
                    examples,
                    inferred_type,
                    ..
                },
                TemplateSegment::Parameter { examples: more, .. },
            ) = (mine, theirs)
            {
                for e in more {
                    if !examples.contains(e) {
                        examples.push(e.clone());
                    }
                }
                *inferred_type = ParamType::infer(examples.iter());
            }
        }
    }
}

impl fmt::Display for UriTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_with(str::to_string))
    }
}

impl FromStr for UriTemplate {
    type Err = std::convert::Infallible;

    /// Parses `/a/{id}/b`; `{x}` becomes a parameter without examples.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let segments = s
            .split('/')
            .filter(|p| !p.is_empty())
            .map(|p| match p.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
                Some(name) => TemplateSegment::parameter(name, Vec::new()),
                None => TemplateSegment::Literal(p.to_string()),
            })
            .collect();
        Ok(UriTemplate { segments })
    }
}

/// One segment of a graph path as rendered for template extraction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RenderedSegment {
    pub concrete: String,
    pub var: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RenderedPath(pub Vec<RenderedSegment>);

impl fmt::Display for RenderedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for s in &self.0 {
            match &s.var {
                Some(v) => write!(f, "/{{{v}}}")?,
                None => write!(f, "/{}", s.concrete)?,
            }
        }
        Ok(())
    }
}

impl FromStr for RenderedPath {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(RenderedPath(
            s.split('/')
                .filter(|p| !p.is_empty())
                .map(|p| match p.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
                    Some(v) => RenderedSegment {
                        concrete: p.to_string(),
                        var: Some(v.to_string()),
                    },
                    None => RenderedSegment {
                        concrete: p.to_string(),
                        var: None,
                    },
                })
                .collect(),
        ))
    }
}

/// Hands out `var0`, `var1`, ... in request order.
#[derive(Debug, Clone, Default)]
pub struct VarAllocator {
    next: usize,
}

impl VarAllocator {
    pub fn starting_at(next: usize) -> Self {
        VarAllocator { next }
    }

    pub fn fresh(&mut self) -> String {
        let name = format!("var{}", self.next);
        self.next += 1;
        name
    }
}

/// Gives every class of endpoints with matching responses one shared
/// variable. Returns how many variables were assigned.
pub fn merge_leaf_nodes(g: &mut ApiGraph) -> usize {
    g.clear_vars();
    let endpoints: Vec<NodeId> = g
        .endpoints()
        .into_iter()
        .filter(|&id| id != NodeId::ROOT)
        .collect();
    let mut class: Vec<usize> = (0..endpoints.len()).collect();
    fn find(class: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while class[r] != r {
            r = class[r];
        }
        let mut cur = i;
        while class[cur] != r {
            let next = class[cur];
            class[cur] = r;
            cur = next;
        }
        r
    }
    for i in 0..endpoints.len() {
        for j in (i + 1)..endpoints.len() {
            if g.responses_match(endpoints[i], endpoints[j]) {
                let (a, b) = (find(&mut class, i), find(&mut class, j));
                if a != b {
                    class[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for i in 0..endpoints.len() {
        *sizes.entry(find(&mut class, i)).or_default() += 1;
    }
    let mut names: HashMap<usize, String> = HashMap::new();
    let mut alloc = VarAllocator::default();
    for i in 0..endpoints.len() {
        let root = find(&mut class, i);
        if sizes[&root] < 2 {
            continue;
        }
        let var = names.entry(root).or_insert_with(|| alloc.fresh()).clone();
        g.set_var(endpoints[i], Some(var));
    }
    alloc.next
}

/// Every root-to-`node` path with assigned variables substituted.
pub fn get_graph_paths(g: &ApiGraph, node: NodeId) -> Vec<RenderedPath> {
    g.paths_to(node)
        .into_iter()
        .map(|p| {
            RenderedPath(
                p.nodes
                    .iter()
                    .map(|&n| {
                        let seg = g.segment(n);
                        RenderedSegment {
                            concrete: seg.name.clone(),
                            var: seg.var.clone(),
                        }
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Index-wise template extraction over paths of equal length.
///
/// Positions carrying a variable keep it; remaining positions whose
/// concrete values disagree get a fresh variable.
pub fn get_uri_template(paths: &[RenderedPath], vars: &mut VarAllocator) -> UriTemplate {
    let Some(first) = paths.first() else {
        return UriTemplate::default();
    };
    let mut used: Vec<String> = Vec::new();
    let mut segments = Vec::with_capacity(first.0.len());
    for pos in 0..first.0.len() {
        let column: Vec<&RenderedSegment> = paths.iter().filter_map(|p| p.0.get(pos)).collect();
        let mut examples: Vec<String> = Vec::new();
        for s in &column {
            if !examples.contains(&s.concrete) {
                examples.push(s.concrete.clone());
            }
        }
        let existing_var = column.iter().find_map(|s| s.var.clone());
        let name = match existing_var {
            Some(v) => Some(v),
            None if examples.len() > 1 => Some(vars.fresh()),
            None => None,
        };
        match name {
            Some(mut n) => {
                if used.contains(&n) {
                    n = vars.fresh();
                }
                used.push(n.clone());
                // A string-rendered `{x}` path carries no concrete value.
                examples.retain(|e| !(e.starts_with('{') && e.ends_with('}')));
                segments.push(TemplateSegment::parameter(&n, examples));
            }
            None => segments.push(TemplateSegment::Literal(examples.remove(0))),
        }
    }
    UriTemplate { segments }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub param_type: ParamType,
    pub examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSpec {
    pub mime: Option<String>,
    pub schema: Option<KeyTree>,
    pub example: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OperationSpec {
    pub path_params: Vec<ParamSpec>,
    pub query_params: Vec<ParamSpec>,
    /// Header parameters documented by name only.
    pub header_params: Vec<String>,
    pub request_schema: Option<KeyTree>,
    pub request_mime: Option<String>,
    pub request_example: Option<Value>,
    pub responses: BTreeMap<u16, ResponseSpec>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathItem {
    pub template: UriTemplate,
    pub operations: BTreeMap<Method, OperationSpec>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecDocument {
    pub title: String,
    pub server_url: String,
    /// Keyed by template rendering.
    pub path_items: BTreeMap<String, PathItem>,
}

impl SpecDocument {
    pub fn new(title: &str, server_url: &str) -> Self {
        SpecDocument {
            title: title.to_string(),
            server_url: server_url.to_string(),
            path_items: BTreeMap::new(),
        }
    }

    /// The item for `template`, merged with any existing item of the same shape.
    pub fn item_for(&mut self, template: &UriTemplate) -> &mut PathItem {
        let shape = template.shape();
        let key = self
            .path_items
            .iter()
            .find(|(_, item)| item.template.shape() == shape)
            .map(|(k, _)| k.clone());
        match key {
            Some(k) => {
                let item = self.path_items.get_mut(&k).expect("key just found");
                item.template.absorb(template);
                item
            }
            None => self
                .path_items
                .entry(template.to_string())
                .or_insert_with(|| PathItem {
                    template: template.clone(),
                    operations: BTreeMap::new(),
                }),
        }
    }

    pub fn templates(&self) -> impl Iterator<Item = &UriTemplate> {
        self.path_items.values().map(|i| &i.template)
    }

    /// The most specific template matching concrete `segments`; `None` when
    /// nothing matches or two templates tie.
    pub fn resolve(&self, segments: &[String]) -> Option<&UriTemplate> {
        let mut matching: Vec<&UriTemplate> =
            self.templates().filter(|t| t.matches(segments)).collect();
        matching.sort_by_key(|t| std::cmp::Reverse(t.specificity()));
        match matching.as_slice() {
            [] => None,
            [only] => Some(only),
            [a, b, ..] if a.specificity() == b.specificity() => None,
            [a, ..] => Some(a),
        }
    }

    /// Reads the paths, methods and response codes of an OpenAPI 3.x or
    /// Swagger 2.0 document (JSON or YAML).
    pub fn from_openapi_str(text: &str) -> Result<Self, String> {
        let value: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(_) => serde_yaml::from_str(text).map_err(|e| e.to_string())?,
        };
        Self::from_openapi_value(&value)
    }

    pub fn from_openapi_value(value: &Value) -> Result<Self, String> {
        let paths = value
            .get("paths")
            .and_then(Value::as_object)
            .ok_or("document has no `paths` object")?;
        let title = value
            .pointer("/info/title")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string();
        let server_url = value
            .pointer("/servers/0/url")
            .and_then(Value::as_str)
            .or_else(|| value.get("basePath").and_then(Value::as_str))
            .unwrap_or("")
            .to_string();
        let mut doc = SpecDocument::new(&title, &server_url);
        for (path, item) in paths {
            let template: UriTemplate = path.parse().expect("infallible");
            let entry = doc.item_for(&template);
            let Some(ops) = item.as_object() else { continue };
            for (key, op) in ops {
                let Ok(method) = key.parse::<Method>() else { continue };
                let mut spec = OperationSpec::default();
                if let Some(responses) = op.get("responses").and_then(Value::as_object) {
                    for code in responses.keys() {
                        if let Ok(status) = code.parse::<u16>() {
                            spec.responses.insert(
                                status,
                                ResponseSpec {
                                    mime: None,
                                    schema: None,
                                    example: None,
                                },
                            );
                        }
                    }
                }
                entry.operations.insert(method, spec);
            }
        }
        doc.finalize();
        Ok(doc)
    }

    /// Copies each item's template parameters into its operations.
    fn finalize(&mut self) {
        for item in self.path_items.values_mut() {
            let params: Vec<ParamSpec> = item
                .template
                .parameters()
                .map(|(name, examples, t)| ParamSpec {
                    name: name.to_string(),
                    param_type: t,
                    examples: examples.to_vec(),
                })
                .collect();
            for op in item.operations.values_mut() {
                op.path_params = params.clone();
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpecConfig {
    pub title: String,
    /// Defaults to the graph's base URL.
    pub server_url: Option<String>,
}

impl Default for SpecConfig {
    fn default() -> Self {
        SpecConfig {
            title: "Inferred API".to_string(),
            server_url: None,
        }
    }
}

fn single_path_template(path: &RenderedPath) -> UriTemplate {
    UriTemplate {
        segments: path
            .0
            .iter()
            .map(|s| match &s.var {
                Some(v) => TemplateSegment::parameter(v, vec![s.concrete.clone()]),
                None => TemplateSegment::Literal(s.concrete.clone()),
            })
            .collect(),
    }
}

fn add_param(params: &mut Vec<ParamSpec>, name: &str, example: &str) {
    match params.iter_mut().find(|p| p.name == name) {
        Some(p) => {
            if !p.examples.iter().any(|e| e == example) {
                p.examples.push(example.to_string());
            }
            p.param_type = ParamType::infer(p.examples.iter());
        }
        None => params.push(ParamSpec {
            name: name.to_string(),
            param_type: ParamType::infer([&example.to_string()]),
            examples: vec![example.to_string()],
        }),
    }
}

fn body_example(body: &[u8], mime: &str) -> Option<Value> {
    if is_json_mime(mime) {
        serde_json::from_slice(body).ok()
    } else {
        std::str::from_utf8(body).ok().map(|s| Value::String(s.to_string()))
    }
}

fn record_call(op: &mut OperationSpec, call: &ApiCall) {
    for (k, v) in call.request.query_pairs() {
        add_param(&mut op.query_params, &k, &v);
    }
    if call.request.header("authorization").is_some()
        && !op.header_params.iter().any(|h| h == "Authorization")
    {
        op.header_params.push("Authorization".to_string());
    }
    if call.request.method.is_mutating() && op.request_schema.is_none() {
        if let (Some(body), Some(mime)) = (&call.request.body, &call.request.body_mime) {
            if let Ok(tree) = key_tree(body, mime) {
                op.request_schema = Some(tree);
                op.request_mime = Some(mime.clone());
                op.request_example = body_example(body, mime);
            }
        }
    }
    let resp = &call.response;
    op.responses.entry(resp.status).or_insert_with(|| {
        let (schema, example) = match (&resp.body, &resp.body_mime) {
            (Some(body), Some(mime)) if !body.is_empty() => {
                (key_tree(body, mime).ok(), body_example(body, mime))
            }
            _ => (None, None),
        };
        ResponseSpec {
            mime: resp.body_mime.clone().filter(|_| resp.has_body()),
            schema,
            example,
        }
    });
}

/// Runs leaf merging, derives one template per endpoint and collects the
/// observed operations into a document.
pub fn extract_openapi(g: &mut ApiGraph, cfg: &SpecConfig) -> SpecDocument {
    let assigned = merge_leaf_nodes(g);
    let mut vars = VarAllocator::starting_at(assigned);
    let server = cfg
        .server_url
        .clone()
        .unwrap_or_else(|| g.base_url().to_string());
    let mut doc = SpecDocument::new(&cfg.title, &server);
    for node in g.endpoints() {
        let paths = get_graph_paths(g, node);
        let template = if paths.len() > 1 {
            get_uri_template(&paths, &mut vars)
        } else {
            single_path_template(&paths[0])
        };
        let item = doc.item_for(&template);
        for call in g.endpoint_calls(node) {
            let op = item.operations.entry(call.request.method).or_default();
            record_call(op, call);
        }
    }
    doc.finalize();
    doc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecFormat {
    Json,
    Yaml,
}

impl FromStr for SpecFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(SpecFormat::Json),
            "yaml" | "yml" => Ok(SpecFormat::Yaml),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

const METHOD_ORDER: [Method; 9] = [
    Method::Get,
    Method::Post,
    Method::Put,
    Method::Patch,
    Method::Delete,
    Method::Options,
    Method::Head,
    Method::Trace,
    Method::Connect,
];

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        201 => "Created",
        202 => "Accepted",
        204 => "No Content",
        301 => "Moved Permanently",
        302 => "Found",
        304 => "Not Modified",
        _ => "Observed response",
    }
}

fn merge_schema(a: Value, b: Value) -> Value {
    match (a, b) {
        (Value::Object(mut x), Value::Object(y)) => {
            let both_objects = x.get("type") == Some(&json!("object"))
                && y.get("type") == Some(&json!("object"));
            if both_objects {
                let mut props = x
                    .remove("properties")
                    .and_then(|p| match p {
                        Value::Object(m) => Some(m),
                        _ => None,
                    })
                    .unwrap_or_default();
                if let Some(Value::Object(more)) = y.get("properties") {
                    for (k, v) in more {
                        let merged = match props.remove(k) {
                            Some(existing) => merge_schema(existing, v.clone()),
                            None => v.clone(),
                        };
                        props.insert(k.clone(), merged);
                    }
                }
                props.sort_keys();
                x.insert("properties".into(), Value::Object(props));
            } else if x.is_empty() {
                return Value::Object(y);
            }
            Value::Object(x)
        }
        (a, _) => a,
    }
}

/// Inline schema guessed from an example value.
pub fn schema_from_value(value: &Value) -> Value {
    match value {
        Value::Null => json!({"nullable": true}),
        Value::Bool(_) => json!({"type": "boolean"}),
        Value::Number(n) if n.is_i64() || n.is_u64() => json!({"type": "integer"}),
        Value::Number(_) => json!({"type": "number"}),
        Value::String(_) => json!({"type": "string"}),
        Value::Array(items) => {
            let merged = items
                .iter()
                .map(schema_from_value)
                .fold(json!({}), merge_schema);
            json!({"type": "array", "items": merged})
        }
        Value::Object(map) => {
            let mut props = Map::new();
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for k in keys {
                props.insert(k.clone(), schema_from_value(&map[k]));
            }
            json!({"type": "object", "properties": props})
        }
    }
}

/// Schema from structure alone, used when no JSON example is available.
pub fn schema_from_tree(tree: &KeyTree) -> Value {
    fn children(t: &KeyTree) -> Value {
        if t.children.is_empty() {
            return json!({"type": "string"});
        }
        if let [only] = t.children.as_slice() {
            if only.label == ARRAY_LABEL {
                return json!({"type": "array", "items": children(only)});
            }
        }
        let mut props = Map::new();
        for c in &t.children {
            props.insert(c.label.clone(), children(c));
        }
        json!({"type": "object", "properties": props})
    }
    children(tree)
}

fn param_example(p: &ParamSpec) -> Option<Value> {
    let e = p.examples.first()?;
    Some(match p.param_type {
        ParamType::Integer => e.parse::<i64>().map(Value::from).unwrap_or_else(|_| json!(e)),
        ParamType::String => json!(e),
    })
}

fn param_json(p: &ParamSpec, location: &str, required: bool) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), json!(p.name));
    m.insert("in".into(), json!(location));
    m.insert("required".into(), json!(required));
    m.insert("schema".into(), json!({"type": p.param_type.as_str()}));
    if let Some(e) = param_example(p) {
        m.insert("example".into(), e);
    }
    Value::Object(m)
}

fn content_json(mime: &str, schema: Option<&KeyTree>, example: Option<&Value>) -> Value {
    let schema = match (example, schema) {
        (Some(e), _) if is_json_mime(mime) => schema_from_value(e),
        (_, Some(t)) => schema_from_tree(t),
        _ => json!({}),
    };
    let mut media = Map::new();
    media.insert("schema".into(), schema);
    if let Some(e) = example {
        media.insert("example".into(), e.clone());
    }
    let mut content = Map::new();
    content.insert(mime.to_string(), Value::Object(media));
    Value::Object(content)
}

fn operation_json(op: &OperationSpec) -> Value {
    let mut m = Map::new();
    let mut params: Vec<Value> = op
        .path_params
        .iter()
        .map(|p| param_json(p, "path", true))
        .collect();
    params.extend(op.query_params.iter().map(|p| param_json(p, "query", false)));
    params.extend(op.header_params.iter().map(|h| {
        json!({"name": h, "in": "header", "required": false, "schema": {"type": "string"}})
    }));
    if !params.is_empty() {
        m.insert("parameters".into(), Value::Array(params));
    }
    if let (Some(tree), Some(mime)) = (&op.request_schema, &op.request_mime) {
        m.insert(
            "requestBody".into(),
            json!({"content": content_json(mime, Some(tree), op.request_example.as_ref())}),
        );
    }
    let mut responses = Map::new();
    for (status, r) in &op.responses {
        let mut entry = Map::new();
        entry.insert("description".into(), json!(reason(*status)));
        if let Some(mime) = &r.mime {
            entry.insert(
                "content".into(),
                content_json(mime, r.schema.as_ref(), r.example.as_ref()),
            );
        }
        responses.insert(status.to_string(), Value::Object(entry));
    }
    m.insert("responses".into(), Value::Object(responses));
    Value::Object(m)
}

/// The document as an OpenAPI 3.0.3 JSON value with a fixed key order.
pub fn openapi_value(doc: &SpecDocument) -> Value {
    let mut paths = Map::new();
    for (key, item) in &doc.path_items {
        let mut ops = Map::new();
        for method in METHOD_ORDER {
            if let Some(op) = item.operations.get(&method) {
                ops.insert(method.as_str().to_ascii_lowercase(), operation_json(op));
            }
        }
        paths.insert(key.clone(), Value::Object(ops));
    }
    let mut root = Map::new();
    root.insert("openapi".into(), json!("3.0.3"));
    root.insert("info".into(), json!({"title": doc.title, "version": "1.0.0"}));
    root.insert("servers".into(), json!([{"url": doc.server_url}]));
    root.insert("paths".into(), Value::Object(paths));
    Value::Object(root)
}

pub fn render_openapi(doc: &SpecDocument, format: SpecFormat) -> String {
    let value = openapi_value(doc);
    match format {
        SpecFormat::Json => {
            let mut s = serde_json::to_string_pretty(&value).expect("JSON values serialize");
            s.push('\n');
            s
        }
        SpecFormat::Yaml => serde_yaml::to_string(&value).expect("JSON values serialize as YAML"),
    }
}
