//! Path and operation scoring of a generated document against ground truth.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::Method;
use crate::specgen::{SpecDocument, TemplateSegment, UriTemplate};

/// Segment-wise template comparison. Parameter names never matter; a
/// parameter meets a literal only in loose mode.
pub fn match_paths(gen: &UriTemplate, gt: &UriTemplate, loose: bool) -> bool {
    gen.segments.len() == gt.segments.len()
        && gen.segments.iter().zip(&gt.segments).all(|(a, b)| match (a, b) {
            (TemplateSegment::Literal(x), TemplateSegment::Literal(y)) => x == y,
            (TemplateSegment::Parameter { .. }, TemplateSegment::Parameter { .. }) => true,
            _ => loose,
        })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreOptions {
    pub loose: bool,
    /// Methods dropped from both sides for the starred operation scores.
    pub ignore_methods: BTreeSet<Method>,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            loose: false,
            ignore_methods: [Method::Options, Method::Head].into_iter().collect(),
        }
    }
}

/// Raw counts behind one precision/recall pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub gen_total: usize,
    pub gt_total: usize,
    /// Generated items that match some ground-truth item.
    pub gen_matched: usize,
    /// Ground-truth items matched by some generated item.
    pub gt_matched: usize,
}

fn ratio(num: usize, den: usize, other_side: usize) -> f64 {
    if den == 0 {
        if other_side == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.gen_matched, self.gen_total, self.gt_total)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.gt_matched, self.gt_total, self.gen_total)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }

    /// Distinct ground-truth items mapped per mapped generated item.
    pub fn duplication(&self) -> f64 {
        if self.gen_matched == 0 {
            1.0
        } else {
            self.gt_matched as f64 / self.gen_matched as f64
        }
    }

    fn add(self, o: Counts) -> Counts {
        Counts {
            gen_total: self.gen_total + o.gen_total,
            gt_total: self.gt_total + o.gt_total,
            gen_matched: self.gen_matched + o.gen_matched,
            gt_matched: self.gt_matched + o.gt_matched,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecMetrics {
    pub path_precision: f64,
    pub path_recall: f64,
    pub path_f1: f64,
    pub op_precision: f64,
    pub op_recall: f64,
    pub op_f1: f64,
    pub op_precision_star: f64,
    pub op_recall_star: f64,
    pub op_f1_star: f64,
    pub path_duplication: f64,
    pub op_duplication: f64,
    pub path_counts: Counts,
    pub op_counts: Counts,
    pub op_counts_star: Counts,
    pub tp_paths: Vec<String>,
    pub fp_paths: Vec<String>,
    pub fn_paths: Vec<String>,
    pub tp_ops: Vec<String>,
    pub fp_ops: Vec<String>,
    pub fn_ops: Vec<String>,
}

impl SpecMetrics {
    fn from_counts(path: Counts, op: Counts, star: Counts) -> Self {
        SpecMetrics {
            path_precision: path.precision(),
            path_recall: path.recall(),
            path_f1: path.f1(),
            op_precision: op.precision(),
            op_recall: op.recall(),
            op_f1: op.f1(),
            op_precision_star: star.precision(),
            op_recall_star: star.recall(),
            op_f1_star: star.f1(),
            path_duplication: path.duplication(),
            op_duplication: op.duplication(),
            path_counts: path,
            op_counts: op,
            op_counts_star: star,
            tp_paths: Vec::new(),
            fp_paths: Vec::new(),
            fn_paths: Vec::new(),
            tp_ops: Vec::new(),
            fp_ops: Vec::new(),
            fn_ops: Vec::new(),
        }
    }
}

struct Matching {
    counts: Counts,
    tp: Vec<usize>,
    fp: Vec<usize>,
    fns: Vec<usize>,
}

fn match_sets<G, T>(gen: &[G], gt: &[T], matches: impl Fn(&G, &T) -> bool) -> Matching {
    let mut gt_hit = vec![false; gt.len()];
    let (mut tp, mut fp) = (Vec::new(), Vec::new());
    for (i, g) in gen.iter().enumerate() {
        let mut any = false;
        for (j, t) in gt.iter().enumerate() {
            if matches(g, t) {
                any = true;
                gt_hit[j] = true;
            }
        }
        if any {
            tp.push(i);
        } else {
            fp.push(i);
        }
    }
    let fns: Vec<usize> = (0..gt.len()).filter(|&j| !gt_hit[j]).collect();
    Matching {
        counts: Counts {
            gen_total: gen.len(),
            gt_total: gt.len(),
            gen_matched: tp.len(),
            gt_matched: gt.len() - fns.len(),
        },
        tp,
        fp,
        fns,
    }
}

fn operations(doc: &SpecDocument) -> Vec<(&UriTemplate, Method)> {
    doc.path_items
        .values()
        .flat_map(|item| item.operations.keys().map(move |&m| (&item.template, m)))
        .collect()
}

fn op_label((t, m): &(&UriTemplate, Method)) -> String {
    format!("{m} {t}")
}

pub fn score(gen: &SpecDocument, gt: &SpecDocument, opts: &ScoreOptions) -> SpecMetrics {
    let gen_paths: Vec<&UriTemplate> = gen.templates().collect();
    let gt_paths: Vec<&UriTemplate> = gt.templates().collect();
    let paths = match_sets(&gen_paths, &gt_paths, |a, b| match_paths(a, b, opts.loose));

    let op_match = |a: &(&UriTemplate, Method), b: &(&UriTemplate, Method)| {
        a.1 == b.1 && match_paths(a.0, b.0, opts.loose)
    };
    let gen_ops = operations(gen);
    let gt_ops = operations(gt);
    let ops = match_sets(&gen_ops, &gt_ops, op_match);
    let kept = |v: &[(&UriTemplate, Method)]| -> Vec<(UriTemplate, Method)> {
        v.iter()
            .filter(|(_, m)| !opts.ignore_methods.contains(m))
            .map(|(t, m)| ((*t).clone(), *m))
            .collect()
    };
    let (gen_star, gt_star) = (kept(&gen_ops), kept(&gt_ops));
    let star = match_sets(&gen_star, &gt_star, |a, b| {
        a.1 == b.1 && match_paths(&a.0, &b.0, opts.loose)
    });

    let mut m = SpecMetrics::from_counts(paths.counts, ops.counts, star.counts);
    m.tp_paths = paths.tp.iter().map(|&i| gen_paths[i].to_string()).collect();
    m.fp_paths = paths.fp.iter().map(|&i| gen_paths[i].to_string()).collect();
    m.fn_paths = paths.fns.iter().map(|&j| gt_paths[j].to_string()).collect();
    m.tp_ops = ops.tp.iter().map(|&i| op_label(&gen_ops[i])).collect();
    m.fp_ops = ops.fp.iter().map(|&i| op_label(&gen_ops[i])).collect();
    m.fn_ops = ops.fns.iter().map(|&j| op_label(&gt_ops[j])).collect();
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Metrics over pooled counts.
    pub micro: SpecMetrics,
    /// Per-document metrics averaged.
    pub macro_avg: SpecMetrics,
}

pub fn aggregate(all: &[SpecMetrics]) -> Aggregate {
    let sum = |f: fn(&SpecMetrics) -> Counts| {
        all.iter().map(f).fold(Counts::default(), Counts::add)
    };
    let micro = SpecMetrics::from_counts(
        sum(|m| m.path_counts),
        sum(|m| m.op_counts),
        sum(|m| m.op_counts_star),
    );
    let n = all.len().max(1) as f64;
    let mean = |f: fn(&SpecMetrics) -> f64| all.iter().map(f).sum::<f64>() / n;
    let mut macro_avg = micro.clone();
    macro_avg.path_precision = mean(|m| m.path_precision);
    macro_avg.path_recall = mean(|m| m.path_recall);
    macro_avg.path_f1 = mean(|m| m.path_f1);
    macro_avg.op_precision = mean(|m| m.op_precision);
    macro_avg.op_recall = mean(|m| m.op_recall);
    macro_avg.op_f1 = mean(|m| m.op_f1);
    macro_avg.op_precision_star = mean(|m| m.op_precision_star);
    macro_avg.op_recall_star = mean(|m| m.op_recall_star);
    macro_avg.op_f1_star = mean(|m| m.op_f1_star);
    macro_avg.path_duplication = mean(|m| m.path_duplication);
    macro_avg.op_duplication = mean(|m| m.op_duplication);
    Aggregate { micro, macro_avg }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inconsistency {
    pub operation: String,
    pub statuses: Vec<u16>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    /// Generated operations that succeeded but are absent from ground truth.
    pub inconsistencies: Vec<Inconsistency>,
    pub false_positive_paths: Vec<String>,
    pub false_positive_ops: Vec<String>,
    pub missing_paths: Vec<String>,
    pub missing_ops: Vec<String>,
}

pub fn diff_report(gen: &SpecDocument, gt: &SpecDocument, opts: &ScoreOptions) -> DiffReport {
    let metrics = score(gen, gt, opts);
    let gt_ops = operations(gt);
    let mut inconsistencies = Vec::new();
    for item in gen.path_items.values() {
        for (method, op) in &item.operations {
            let documented = gt_ops
                .iter()
                .any(|(t, m)| m == method && match_paths(&item.template, t, opts.loose));
            if documented {
                continue;
            }
            let ok: Vec<u16> = op
                .responses
                .keys()
                .copied()
                .filter(|s| (200..300).contains(s))
                .collect();
            if !ok.is_empty() {
                inconsistencies.push(Inconsistency {
                    operation: format!("{method} {}", item.template),
                    statuses: ok,
                    note: "implemented-but-undocumented".to_string(),
                });
            }
        }
    }
    DiffReport {
        inconsistencies,
        false_positive_paths: metrics.fp_paths,
        false_positive_ops: metrics.fp_ops,
        missing_paths: metrics.fn_paths,
        missing_ops: metrics.fn_ops,
    }
}

impl DiffReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = |title: &str, rows: Vec<String>| {
            let _ = writeln!(out, "{title} ({})", rows.len());
            for r in rows {
                let _ = writeln!(out, "  {r}");
            }
        };
        section(
            "implemented but undocumented",
            self.inconsistencies
                .iter()
                .map(|i| format!("{}  {:?}", i.operation, i.statuses))
                .collect(),
        );
        section("false positive paths", self.false_positive_paths.clone());
        section("missing paths", self.missing_paths.clone());
        section("missing operations", self.missing_ops.clone());
        out
    }
}

impl SpecMetrics {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1");
        let _ = writeln!(
            out,
            "{:<12} {:>9.3} {:>9.3} {:>9.3}",
            "paths", self.path_precision, self.path_recall, self.path_f1
        );
        let _ = writeln!(
            out,
            "{:<12} {:>9.3} {:>9.3} {:>9.3}",
            "operations", self.op_precision, self.op_recall, self.op_f1
        );
        let _ = writeln!(
            out,
            "{:<12} {:>9.3} {:>9.3} {:>9.3}",
            "operations*", self.op_precision_star, self.op_recall_star, self.op_f1_star
        );
        let _ = writeln!(
            out,
            "duplication: paths {:.3}, operations {:.3}",
            self.path_duplication, self.op_duplication
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specgen::{OperationSpec, ResponseSpec};

    fn t(s: &str) -> UriTemplate {
        s.parse().unwrap()
    }

    fn doc(items: &[(&str, &[Method])]) -> SpecDocument {
        let mut d = SpecDocument::new("t", "s");
        for (path, methods) in items {
            let template = t(path);
            d.path_items.insert(
                template.to_string(),
                crate::specgen::PathItem {
                    template,
                    operations: methods.iter().map(|&m| (m, OperationSpec::default())).collect(),
                },
            );
        }
        d
    }

    #[test]
    fn path_matching_rules() {
        assert!(match_paths(&t("/users/{var0}/info"), &t("/users/{user}/info"), false));
        assert!(!match_paths(&t("/users/user1/info"), &t("/users/{user}/info"), false));
        assert!(match_paths(&t("/users/user1/info"), &t("/users/{user}/info"), true));
        assert!(!match_paths(&t("/tags"), &t("/tags/{tag}"), false));
        assert!(!match_paths(&t("/a"), &t("/b"), true));
    }

    #[test]
    fn identical_documents_score_one() {
        let d = doc(&[("/a", &[Method::Get]), ("/a/{x}", &[Method::Get, Method::Put])]);
        let m = score(&d, &d, &ScoreOptions::default());
        for v in [
            m.path_precision,
            m.path_recall,
            m.path_f1,
            m.op_precision,
            m.op_recall,
            m.op_f1,
            m.path_duplication,
            m.op_duplication,
        ] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn duplication_half() {
        let gen = doc(&[("/a/{x}", &[Method::Get]), ("/a/{y}", &[Method::Get])]);
        let gt = doc(&[("/a/{id}", &[Method::Get])]);
        // Keys differ, so both generated items survive.
        assert_eq!(gen.path_items.len(), 2);
        let m = score(&gen, &gt, &ScoreOptions::default());
        assert_eq!(m.path_duplication, 1.0 / 2.0);
        assert_eq!(m.path_precision, 1.0);
    }

    #[test]
    fn ignored_methods_leave_starred_precision_unchanged() {
        let gt = doc(&[("/a", &[Method::Get]), ("/b", &[Method::Get, Method::Post])]);
        let plain = doc(&[("/a", &[Method::Get]), ("/b", &[Method::Get])]);
        let extra = doc(&[
            ("/a", &[Method::Get, Method::Options]),
            ("/b", &[Method::Get, Method::Options, Method::Head]),
        ]);
        let o = ScoreOptions::default();
        let (p, e) = (score(&plain, &gt, &o), score(&extra, &gt, &o));
        assert_eq!(p.op_precision_star, e.op_precision_star);
        assert_eq!(e.op_precision_star, 1.0);
        assert!(e.op_precision < 1.0);
        assert_eq!(e.op_recall_star, 2.0 / 3.0);
    }

    #[test]
    fn empty_conventions() {
        let empty = doc(&[]);
        let one = doc(&[("/a", &[Method::Get])]);
        let o = ScoreOptions::default();
        let m = score(&empty, &empty, &o);
        assert_eq!((m.path_precision, m.path_recall), (1.0, 1.0));
        let m = score(&empty, &one, &o);
        assert_eq!((m.path_precision, m.path_recall, m.path_f1), (0.0, 0.0, 0.0));
        let m = score(&one, &empty, &o);
        assert_eq!((m.path_precision, m.path_recall), (0.0, 0.0));
    }

    #[test]
    fn diff_flags_successful_undocumented_operations() {
        let gt = doc(&[("/a", &[Method::Get])]);
        let mut gen = doc(&[("/a", &[Method::Get, Method::Options]), ("/health", &[Method::Get])]);
        for item in gen.path_items.values_mut() {
            for op in item.operations.values_mut() {
                op.responses.insert(
                    200,
                    ResponseSpec {
                        mime: None,
                        schema: None,
                        example: None,
                    },
                );
            }
        }
        let r = diff_report(&gen, &gt, &ScoreOptions::default());
        let ops: Vec<&str> = r.inconsistencies.iter().map(|i| i.operation.as_str()).collect();
        assert_eq!(ops, ["OPTIONS /a", "GET /health"]);
        assert_eq!(r.false_positive_paths, ["/health"]);
        assert!(r.missing_paths.is_empty());

        let clean = diff_report(&gt, &gt, &ScoreOptions::default());
        assert!(clean.inconsistencies.is_empty());

        let bigger = doc(&[("/a", &[Method::Get]), ("/only-gt", &[Method::Get])]);
        let fn_only = diff_report(&gt, &bigger, &ScoreOptions::default());
        assert_eq!(fn_only.missing_paths, ["/only-gt"]);
        assert!(fn_only.inconsistencies.is_empty());
    }

    #[test]
    fn micro_and_macro() {
        let gt = doc(&[("/a", &[Method::Get]), ("/b", &[Method::Get])]);
        let half = doc(&[("/a", &[Method::Get]), ("/z", &[Method::Get])]);
        let full = gt.clone();
        let o = ScoreOptions::default();
        let agg = aggregate(&[score(&half, &gt, &o), score(&full, &gt, &o)]);
        assert_eq!(agg.macro_avg.path_precision, 0.75);
        assert_eq!(agg.micro.path_precision, 3.0 / 4.0);
        assert_eq!(agg.micro.path_counts.gen_total, 4);
    }
}
