//! Exhaustive edit-mapping oracle for tree edit distance.
//!
//! A unit-cost edit script corresponds to a one-to-one node mapping that
//! keeps ancestor and left-to-right order. Its cost is one per relabelled
//! pair plus one per unmapped node on either side.

use carvr_core::similarity::KeyTree;

struct Flat {
    labels: Vec<String>,
    /// `anc[a][b]`: a is a proper ancestor of b.
    anc: Vec<Vec<bool>>,
}

fn flatten(t: &KeyTree) -> Flat {
    fn walk(t: &KeyTree, parent: Option<usize>, labels: &mut Vec<String>, parents: &mut Vec<Option<usize>>) {
        let me = labels.len();
        labels.push(t.label.clone());
        parents.push(parent);
        for c in &t.children {
            walk(c, Some(me), labels, parents);
        }
    }
    let mut labels = Vec::new();
    let mut parents = Vec::new();
    walk(t, None, &mut labels, &mut parents);
    let n = labels.len();
    let mut anc = vec![vec![false; n]; n];
    for b in 0..n {
        let mut p = parents[b];
        while let Some(a) = p {
            anc[a][b] = true;
            p = parents[a];
        }
    }
    Flat { labels, anc }
}

/// Preorder-left-of: a comes before b and is not its ancestor.
fn left_of(f: &Flat, a: usize, b: usize) -> bool {
    a < b && !f.anc[a][b]
}

fn consistent(f1: &Flat, f2: &Flat, pairs: &[(usize, usize)], i: usize, j: usize) -> bool {
    pairs.iter().all(|&(a, b)| {
        f1.anc[a][i] == f2.anc[b][j]
            && f1.anc[i][a] == f2.anc[j][b]
            && left_of(f1, a, i) == left_of(f2, b, j)
            && left_of(f1, i, a) == left_of(f2, j, b)
    })
}

pub fn brute_force(t1: &KeyTree, t2: &KeyTree) -> usize {
    let (f1, f2) = (flatten(t1), flatten(t2));
    let (n, m) = (f1.labels.len(), f2.labels.len());
    let mut best = n + m;
    let mut used = vec![false; m];
    let mut pairs = Vec::new();
    fn go(
        i: usize,
        f1: &Flat,
        f2: &Flat,
        used: &mut [bool],
        pairs: &mut Vec<(usize, usize)>,
        renames: usize,
        best: &mut usize,
    ) {
        let (n, m) = (f1.labels.len(), f2.labels.len());
        if i == n {
            let cost = n + m - 2 * pairs.len() + renames;
            *best = (*best).min(cost);
            return;
        }
        go(i + 1, f1, f2, used, pairs, renames, best);
        for j in 0..m {
            if used[j] || !consistent(f1, f2, pairs, i, j) {
                continue;
            }
            used[j] = true;
            pairs.push((i, j));
            let r = usize::from(f1.labels[i] != f2.labels[j]);
            go(i + 1, f1, f2, used, pairs, renames + r, best);
            pairs.pop();
            used[j] = false;
        }
    }
    go(0, &f1, &f2, &mut used, &mut pairs, 0, &mut best);
    best
}

/// Every ordered tree shape with exactly `n` nodes, as child-count lists in
/// preorder.
pub fn shapes(n: usize) -> Vec<Vec<usize>> {
    fn forests(n: usize) -> Vec<Vec<usize>> {
        // Sequences of trees totalling n nodes, encoded as preorder arities
        // plus a leading count of roots.
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in 1..=n {
            for head in trees(first) {
                for tail in forests(n - first) {
                    let mut v = head.clone();
                    v.extend(tail);
                    out.push(v);
                }
            }
        }
        out
    }
    fn trees(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for below in forests(n - 1) {
            let roots = count_roots(&below);
            let mut v = vec![roots];
            v.extend(below);
            out.push(v);
        }
        out
    }
    fn count_roots(preorder: &[usize]) -> usize {
        let mut roots = 0;
        let mut i = 0;
        while i < preorder.len() {
            roots += 1;
            i += subtree_len(preorder, i);
        }
        roots
    }
    fn subtree_len(preorder: &[usize], start: usize) -> usize {
        let mut pending = 1;
        let mut i = start;
        while pending > 0 {
            pending += preorder[i];
            pending -= 1;
            i += 1;
        }
        i - start
    }
    trees(n)
}

fn build(arity: &[usize], labels: &[char]) -> KeyTree {
    fn rec(arity: &[usize], labels: &[char], pos: &mut usize) -> KeyTree {
        let me = *pos;
        *pos += 1;
        let children = (0..arity[me]).map(|_| rec(arity, labels, pos)).collect();
        KeyTree {
            label: labels[me].to_string(),
            children,
        }
    }
    rec(arity, labels, &mut 0)
}

pub fn all_trees(max_nodes: usize) -> Vec<KeyTree> {
    let mut out = Vec::new();
    for n in 1..=max_nodes {
        for shape in shapes(n) {
            for mask in 0..(1u32 << n) {
                let labels: Vec<char> = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { 'b' } else { 'a' })
                    .collect();
                out.push(build(&shape, &labels));
            }
        }
    }
    out
}

