//! Structural similarity of response payloads.
//!
//! Payloads are reduced to key trees (values dropped, arrays collapsed to a
//! single `[]` child holding the union of their elements' keys) and compared
//! with the ordered tree edit distance under unit costs (Zhang-Shasha).

use std::fmt;

use thiserror::Error;

use crate::model::canonical_mime;

pub const ROOT_LABEL: &str = "$";
pub const ARRAY_LABEL: &str = "[]";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimilarityError {
    #[error("malformed {kind} payload: {message}")]
    Malformed { kind: &'static str, message: String },
    #[error("unsupported payload type `{0}`")]
    UnsupportedMime(String),
}

/// A response body together with its media type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    pub body: Vec<u8>,
    pub mime: String,
}

impl Payload {
    pub fn new(body: impl Into<Vec<u8>>, mime: &str) -> Self {
        Payload {
            body: body.into(),
            mime: canonical_mime(mime),
        }
    }

    pub fn json(value: &serde_json::Value) -> Self {
        Payload::new(value.to_string(), "application/json")
    }

    pub fn key_tree(&self) -> Result<KeyTree, SimilarityError> {
        key_tree(&self.body, &self.mime)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyTree {
    pub label: String,
    pub children: Vec<KeyTree>,
}

impl KeyTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        KeyTree {
            label: label.into(),
            children: Vec::new(),
        }
    }

    /// Builds a node, sorting children by label and merging equal labels.
    pub fn node(label: impl Into<String>, children: Vec<KeyTree>) -> Self {
        KeyTree {
            label: label.into(),
            children: merge_children(Vec::new(), children),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(KeyTree::size).sum::<usize>()
    }

    pub fn child(&self, label: &str) -> Option<&KeyTree> {
        self.children.iter().find(|c| c.label == label)
    }
}

/// Compact form: `$(id,name,role)`, `$([](author,id))`.
impl fmt::Display for KeyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Union of two sorted child lists, merging equal labels recursively.
fn merge_children(mut into: Vec<KeyTree>, from: Vec<KeyTree>) -> Vec<KeyTree> {
    for child in from {
        match into.binary_search_by(|c| c.label.cmp(&child.label)) {
            Ok(pos) => {
                let existing = std::mem::take(&mut into[pos].children);
                into[pos].children = merge_children(existing, child.children);
            }
            Err(pos) => {
                let KeyTree { label, children } = child;
                into.insert(pos, KeyTree::node(label, children));
            }
        }
    }
    into
}

fn json_children(value: &serde_json::Value) -> Vec<KeyTree> {
    match value {
        serde_json::Value::Object(map) => merge_children(
            Vec::new(),
            map.iter()
                .map(|(k, v)| KeyTree {
                    label: k.clone(),
                    children: json_children(v),
                })
                .collect(),
        ),
        serde_json::Value::Array(items) => {
            let union = items
                .iter()
                .fold(Vec::new(), |acc, item| merge_children(acc, json_children(item)));
            vec![KeyTree {
                label: ARRAY_LABEL.to_string(),
                children: union,
            }]
        }
        _ => Vec::new(),
    }
}

fn xml_element(node: roxmltree::Node<'_, '_>) -> KeyTree {
    let children = node
        .children()
        .filter(|c| c.is_element())
        .map(xml_element)
        .collect();
    KeyTree::node(node.tag_name().name(), children)
}

pub fn is_json_mime(mime: &str) -> bool {
    let m = canonical_mime(mime);
    m == "application/json" || m == "text/json" || m.ends_with("+json")
}

pub fn is_xml_mime(mime: &str) -> bool {
    let m = canonical_mime(mime);
    m == "application/xml" || m == "text/xml" || m.ends_with("+xml")
}

/// Key tree of a JSON or XML body.
pub fn key_tree(body: &[u8], mime: &str) -> Result<KeyTree, SimilarityError> {
    if is_json_mime(mime) {
        let value: serde_json::Value =
            serde_json::from_slice(body).map_err(|e| SimilarityError::Malformed {
                kind: "JSON",
                message: e.to_string(),
            })?;
        Ok(KeyTree {
            label: ROOT_LABEL.to_string(),
            children: json_children(&value),
        })
    } else if is_xml_mime(mime) {
        let text = std::str::from_utf8(body).map_err(|e| SimilarityError::Malformed {
            kind: "XML",
            message: e.to_string(),
        })?;
        let doc = roxmltree::Document::parse(text).map_err(|e| SimilarityError::Malformed {
            kind: "XML",
            message: e.to_string(),
        })?;
        Ok(KeyTree::node(ROOT_LABEL, vec![xml_element(doc.root_element())]))
    } else {
        Err(SimilarityError::UnsupportedMime(mime.to_string()))
    }
}

struct Postorder<'a> {
    labels: Vec<&'a str>,
    /// Leftmost leaf descendant of each node, by postorder index.
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(tree: &'a KeyTree) -> Self {
        fn walk<'a>(t: &'a KeyTree, labels: &mut Vec<&'a str>, leftmost: &mut Vec<usize>) -> usize {
            let mut first = None;
            for c in &t.children {
                let lm = walk(c, labels, leftmost);
                first.get_or_insert(lm);
            }
            let idx = labels.len();
            labels.push(&t.label);
            let lm = first.unwrap_or(idx);
            leftmost.push(lm);
            lm
        }
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        walk(tree, &mut labels, &mut leftmost);
        // A keyroot is the highest-numbered node for its leftmost leaf.
        let mut last_for_leaf = vec![None; labels.len()];
        for (i, &lm) in leftmost.iter().enumerate() {
            last_for_leaf[lm] = Some(i);
        }
        let mut keyroots: Vec<usize> = last_for_leaf.into_iter().flatten().collect();
        keyroots.sort_unstable();
        Postorder {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Ordered tree edit distance with unit insert, delete and rename costs.
pub fn tree_edit_distance(t1: &KeyTree, t2: &KeyTree) -> usize {
    let a = Postorder::new(t1);
    let b = Postorder::new(t2);
    let (n, m) = (a.labels.len(), b.labels.len());
    let mut tree_dist = vec![vec![0usize; m]; n];
    let mut forest = vec![vec![0usize; m + 1]; n + 1];
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            let (li, lj) = (a.leftmost[i], b.leftmost[j]);
            let rows = i - li + 1;
            let cols = j - lj + 1;
            forest[0][0] = 0;
            for x in 1..=rows {
                forest[x][0] = forest[x - 1][0] + 1;
            }
            for y in 1..=cols {
                forest[0][y] = forest[0][y - 1] + 1;
            }
            for x in 1..=rows {
                let ni = li + x - 1;
                for y in 1..=cols {
                    let nj = lj + y - 1;
                    let del = forest[x - 1][y] + 1;
                    let ins = forest[x][y - 1] + 1;
                    if a.leftmost[ni] == li && b.leftmost[nj] == lj {
                        let rename = usize::from(a.labels[ni] != b.labels[nj]);
                        let best = del.min(ins).min(forest[x - 1][y - 1] + rename);
                        forest[x][y] = best;
                        tree_dist[ni][nj] = best;
                    } else {
                        let px = a.leftmost[ni] - li;
                        let py = b.leftmost[nj] - lj;
                        forest[x][y] = del.min(ins).min(forest[px][py] + tree_dist[ni][nj]);
                    }
                }
            }
        }
    }
    tree_dist[n - 1][m - 1]
}

/// Threshold-based equivalence of two response payloads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    /// Allowed edit distance as a fraction of the larger tree, in `[0, 1]`.
    pub tau: f64,
}

impl Default for Similarity {
    fn default() -> Self {
        Similarity { tau: 0.0 }
    }
}

impl Similarity {
    pub fn new(tau: f64) -> Self {
        Similarity {
            tau: tau.clamp(0.0, 1.0),
        }
    }

    pub fn trees_match(&self, t1: &KeyTree, t2: &KeyTree) -> bool {
        if self.tau == 0.0 {
            return t1 == t2;
        }
        let allowed = self.tau * t1.size().max(t2.size()) as f64;
        tree_edit_distance(t1, t2) as f64 <= allowed
    }

    /// False whenever either payload is missing or does not parse.
    pub fn compare_responses(&self, l1: Option<&Payload>, l2: Option<&Payload>) -> bool {
        match (l1.map(Payload::key_tree), l2.map(Payload::key_tree)) {
            (Some(Ok(t1)), Some(Ok(t2))) => self.trees_match(&t1, &t2),
            _ => false,
        }
    }
}

pub fn compare_responses(l1: &Payload, l2: &Payload) -> bool {
    Similarity::default().compare_responses(Some(l1), Some(l2))
}
