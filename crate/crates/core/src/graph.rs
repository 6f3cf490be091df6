//! The API graph: a rooted DAG of URI path segments.
//!
//! Every inserted call becomes a root-to-node path. Segments with the same
//! name, index and parent path share a node; segments that only differ in
//! their parent path share a node when both are endpoints with structurally
//! equal responses.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::filter::is_structured_mime;
use crate::model::{join_path, ApiCall, ModelError, Origin};
use crate::similarity::{KeyTree, Payload, Similarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);
}

/// One URI segment as a graph node candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSegment {
    /// Segment text.
    pub name: String,
    /// Position of the segment in its URI, from 0.
    pub index: usize,
    /// Segments before this one, rendered as `/a/b` (empty at index 0).
    pub parent_path: String,
    pub endpoint: bool,
    /// Representative response, set for endpoints.
    pub payload: Option<Payload>,
    /// Path variable assigned during template inference.
    pub var: Option<String>,
}

impl PathSegment {
    pub fn new(name: &str, index: usize, parent_path: &str) -> Self {
        PathSegment {
            name: name.to_string(),
            index,
            parent_path: parent_path.to_string(),
            endpoint: false,
            payload: None,
            var: None,
        }
    }

    pub fn endpoint(mut self, payload: Option<Payload>) -> Self {
        self.endpoint = true;
        self.payload = payload;
        self
    }
}

fn parent_path_of(segments: &[String]) -> String {
    if segments.is_empty() {
        String::new()
    } else {
        join_path(segments)
    }
}

/// Segment equivalence used during graph construction.
pub fn are_equal(s1: &PathSegment, s2: &PathSegment, similarity: &Similarity) -> bool {
    if s1.name != s2.name || s1.index != s2.index {
        return false;
    }
    if s1.parent_path == s2.parent_path {
        return true;
    }
    s1.endpoint
        && s2.endpoint
        && similarity.compare_responses(s1.payload.as_ref(), s2.payload.as_ref())
}

#[derive(Debug, Clone)]
struct Node {
    segment: PathSegment,
    tree: Option<KeyTree>,
    parents: Vec<NodeId>,
    children: Vec<NodeId>,
    /// Every concrete parent path under which this node was reached.
    aliases: Vec<String>,
}

/// Root-to-node sequence of nodes (the root excluded).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphPath {
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct ApiGraph {
    base_url: String,
    similarity: Similarity,
    nodes: Vec<Node>,
    endpoint_calls: BTreeMap<NodeId, Vec<ApiCall>>,
}

fn representative(call: &ApiCall) -> Option<Payload> {
    let body = call.response.body.as_ref().filter(|b| !b.is_empty())?;
    let mime = call.response.body_mime.as_deref()?;
    is_structured_mime(mime).then(|| Payload::new(body.clone(), mime))
}

impl ApiGraph {
    pub fn new(base_url: &str, similarity: Similarity) -> Self {
        let root = Node {
            segment: PathSegment::new("", 0, ""),
            tree: None,
            parents: Vec::new(),
            children: Vec::new(),
            aliases: Vec::new(),
        };
        ApiGraph {
            base_url: crate::model::normalize_base(base_url),
            similarity,
            nodes: vec![root],
            endpoint_calls: BTreeMap::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn similarity(&self) -> Similarity {
        self.similarity
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    /// All node ids in creation order, root first.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn segment(&self, id: NodeId) -> &PathSegment {
        &self.nodes[id.0].segment
    }

    pub fn key_tree(&self, id: NodeId) -> Option<&KeyTree> {
        self.nodes[id.0].tree.as_ref()
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].parents
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn aliases(&self, id: NodeId) -> &[String] {
        &self.nodes[id.0].aliases
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.node_ids()
            .flat_map(|p| self.children(p).iter().map(move |&c| (p, c)))
            .collect()
    }

    pub fn endpoint_calls(&self, id: NodeId) -> &[ApiCall] {
        self.endpoint_calls.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn set_var(&mut self, id: NodeId, var: Option<String>) {
        self.nodes[id.0].segment.var = var;
    }

    pub fn clear_vars(&mut self) {
        for n in &mut self.nodes {
            n.segment.var = None;
        }
    }

    pub fn is_endpoint(&self, id: NodeId) -> bool {
        self.nodes[id.0].segment.endpoint
    }

    /// Endpoint nodes in creation order.
    pub fn endpoints(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&id| self.is_endpoint(id)).collect()
    }

    /// Response comparison between two endpoint nodes using cached key trees.
    pub fn responses_match(&self, a: NodeId, b: NodeId) -> bool {
        match (self.key_tree(a), self.key_tree(b)) {
            (Some(t1), Some(t2)) => self.similarity.trees_match(t1, t2),
            _ => false,
        }
    }

    fn matches_candidate(&self, id: NodeId, cand: &PathSegment, cand_tree: Option<&KeyTree>) -> bool {
        let seg = self.segment(id);
        if seg.name != cand.name || seg.index != cand.index {
            return false;
        }
        if seg.parent_path == cand.parent_path {
            return true;
        }
        if !(seg.endpoint && cand.endpoint) {
            return false;
        }
        match (self.key_tree(id), cand_tree) {
            (Some(t1), Some(t2)) => self.similarity.trees_match(t1, t2),
            _ => false,
        }
    }

    fn add_edge(&mut self, parent: NodeId, child: NodeId) {
        if !self.nodes[parent.0].children.contains(&child) {
            self.nodes[parent.0].children.push(child);
            self.nodes[child.0].parents.push(parent);
        }
    }

    fn mark_endpoint(&mut self, id: NodeId, call: &ApiCall) {
        let node = &mut self.nodes[id.0];
        node.segment.endpoint = true;
        if node.segment.payload.is_none() {
            if let Some(p) = representative(call) {
                node.tree = p.key_tree().ok();
                node.segment.payload = Some(p);
            }
        }
        self.endpoint_calls.entry(id).or_default().push(call.clone());
    }

    /// Inserts one call; returns the node its URI ends at.
    pub fn insert(&mut self, call: &ApiCall) -> Result<NodeId, ModelError> {
        let segments = crate::model::parse_path(&call.request.url, &self.base_url)?;
        if segments.is_empty() {
            self.mark_endpoint(NodeId::ROOT, call);
            return Ok(NodeId::ROOT);
        }
        let last = segments.len() - 1;
        let mut parent = NodeId::ROOT;
        for (i, name) in segments.iter().enumerate() {
            let parent_path = parent_path_of(&segments[..i]);
            let mut cand = PathSegment::new(name, i, &parent_path);
            let mut cand_tree = None;
            if i == last {
                let payload = representative(call);
                cand_tree = payload.as_ref().and_then(|p| p.key_tree().ok());
                cand = cand.endpoint(payload);
            }
            let existing = (1..self.nodes.len())
                .map(NodeId)
                .find(|&id| self.matches_candidate(id, &cand, cand_tree.as_ref()));
            let id = match existing {
                Some(id) => id,
                None => {
                    let id = NodeId(self.nodes.len());
                    self.nodes.push(Node {
                        segment: PathSegment {
                            endpoint: false,
                            payload: None,
                            ..cand
                        },
                        tree: None,
                        parents: Vec::new(),
                        children: Vec::new(),
                        aliases: Vec::new(),
                    });
                    id
                }
            };
            self.add_edge(parent, id);
            if !self.nodes[id.0].aliases.contains(&parent_path) {
                self.nodes[id.0].aliases.push(parent_path);
            }
            if i == last {
                self.mark_endpoint(id, call);
            }
            parent = id;
        }
        Ok(parent)
    }

    /// Concrete segments along the first-parent chain to `id`.
    pub fn canonical_path(&self, id: NodeId) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = id;
        while cur != NodeId::ROOT {
            out.push(self.segment(cur).name.clone());
            cur = self.parents(cur)[0];
        }
        out.reverse();
        out
    }

    /// Follows edges by segment name; the first matching child wins.
    pub fn find(&self, segments: &[String]) -> Option<NodeId> {
        let mut cur = NodeId::ROOT;
        for s in segments {
            cur = *self
                .children(cur)
                .iter()
                .find(|&&c| self.segment(c).name == *s)?;
        }
        Some(cur)
    }

    /// All root-to-`target` paths, in child-insertion order.
    pub fn paths_to(&self, target: NodeId) -> Vec<GraphPath> {
        fn up(g: &ApiGraph, id: NodeId, suffix: &mut Vec<NodeId>, out: &mut Vec<GraphPath>) {
            if id == NodeId::ROOT {
                let mut nodes = suffix.clone();
                nodes.reverse();
                out.push(GraphPath { nodes });
                return;
            }
            suffix.push(id);
            for &p in g.parents(id) {
                up(g, p, suffix, out);
            }
            suffix.pop();
        }
        let mut out = Vec::new();
        up(self, target, &mut Vec::new(), &mut out);
        out.sort();
        out
    }

    pub fn render(&self, path: &GraphPath) -> Vec<String> {
        path.nodes.iter().map(|&n| self.segment(n).name.clone()).collect()
    }

    /// Non-root nodes ordered by depth, then name, then creation.
    fn ordered(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self.node_ids().skip(1).collect();
        ids.sort_by(|&a, &b| {
            let (sa, sb) = (self.segment(a), self.segment(b));
            (sa.index, &sa.name, a).cmp(&(sb.index, &sb.name, b))
        });
        ids
    }

    /// Dot source; node colour reflects where its responses came from.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph api {\n  node [shape=box, style=filled];\n");
        for id in self.node_ids() {
            let seg = self.segment(id);
            let label = if id == NodeId::ROOT {
                "root".to_string()
            } else {
                match &seg.var {
                    Some(v) => format!("{}\\n{{{}}}", seg.name, v),
                    None => seg.name.clone(),
                }
            };
            let calls = self.endpoint_calls(id);
            let color = match (calls.first(), calls.iter().any(|c| c.origin == Origin::Probe)) {
                (None, _) => "white",
                (Some(first), _) if first.origin == Origin::Probe => "palegreen",
                (Some(_), true) => "khaki",
                (Some(_), false) => "lightgray",
            };
            let label = label.replace('"', "\\\"");
            let _ = writeln!(out, "  n{} [label=\"{}\", fillcolor={}];", id.0, label, color);
        }
        for (p, c) in self.edges() {
            let _ = writeln!(out, "  n{} -> n{};", p.0, c.0);
        }
        out.push_str("}\n");
        out
    }
}

/// Builds a graph from calls, extending `existing` when given.
pub fn build_api_graph(
    apiset: &[ApiCall],
    existing: Option<ApiGraph>,
    base_url: &str,
    similarity: Similarity,
) -> Result<ApiGraph, ModelError> {
    let mut g = existing.unwrap_or_else(|| ApiGraph::new(base_url, similarity));
    for call in apiset {
        g.insert(call)?;
    }
    Ok(g)
}

/// Nodes with more than one predecessor.
pub fn join_nodes(g: &ApiGraph) -> Vec<NodeId> {
    g.ordered()
        .into_iter()
        .filter(|&id| g.parents(id).len() > 1)
        .collect()
}

/// Non-root nodes without a response.
pub fn intermediate_nodes(g: &ApiGraph) -> Vec<NodeId> {
    g.ordered()
        .into_iter()
        .filter(|&id| !g.is_endpoint(id))
        .collect()
}

/// Every root-to-endpoint path.
pub fn complete_paths(g: &ApiGraph) -> Vec<GraphPath> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(NodeId::ROOT, Vec::<NodeId>::new())]);
    while let Some((id, path)) = queue.pop_front() {
        if g.is_endpoint(id) {
            out.push(GraphPath { nodes: path.clone() });
        }
        for &c in g.children(id) {
            let mut next = path.clone();
            next.push(c);
            queue.push_back((c, next));
        }
    }
    out
}

/// Distinct rendered complete paths.
pub fn complete_path_strings(g: &ApiGraph) -> BTreeSet<String> {
    complete_paths(g)
        .iter()
        .map(|p| join_path(&g.render(p)))
        .collect()
}
