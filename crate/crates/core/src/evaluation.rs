//! Labeled precision, recall and F1 over edge yields.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, UccaGraph};
use crate::labels::base_label;
use crate::par::Execution;

/// The unit of comparison: what an edge's child covers and how it is labeled.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeRecord {
    pub yield_: BTreeSet<usize>,
    pub label: String,
    pub kind: EdgeKind,
}

/// One record per edge into a nonterminal, labels without recovery suffixes.
pub fn edge_records(graph: &UccaGraph) -> Vec<EdgeRecord> {
    let yields = graph.yields();
    let mut out: Vec<EdgeRecord> = graph
        .edges
        .iter()
        .filter(|e| !graph.is_terminal(e.child))
        .map(|e| EdgeRecord {
            yield_: yields.get(&e.child).cloned().unwrap_or_default(),
            label: base_label(&e.label).to_owned(),
            kind: e.kind,
        })
        .collect();
    out.sort();
    out
}

/// Matched, gold and predicted record counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub matched: usize,
    pub gold: usize,
    pub predicted: usize,
}

impl Counts {
    pub fn merge(self, other: Counts) -> Counts {
        Counts {
            matched: self.matched + other.matched,
            gold: self.gold + other.gold,
            predicted: self.predicted + other.predicted,
        }
    }

    pub fn scores(self) -> Prf {
        let (p, r) = if self.gold == 0 && self.predicted == 0 {
            (1.0, 1.0)
        } else {
            (
                ratio(self.matched, self.predicted),
                ratio(self.matched, self.gold),
            )
        };
        // 2PR / (P + R) written over the counts, which is exact for 2/3 recall.
        let f1 = if self.gold == 0 && self.predicted == 0 {
            1.0
        } else {
            ratio(2 * self.matched, self.gold + self.predicted)
        };
        Prf {
            precision: p,
            recall: r,
            f1,
            matched: self.matched,
            gold: self.gold,
            predicted: self.predicted,
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub gold: usize,
    pub predicted: usize,
}

/// Counts per edge kind; the averaged figures pool both kinds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub primary: Counts,
    pub remote: Counts,
}

impl EvalCounts {
    pub fn merge(self, other: EvalCounts) -> EvalCounts {
        EvalCounts {
            primary: self.primary.merge(other.primary),
            remote: self.remote.merge(other.remote),
        }
    }

    pub fn report(self) -> F1Report {
        F1Report {
            primary: self.primary.scores(),
            remote: self.remote.scores(),
            averaged: self.primary.merge(self.remote).scores(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub primary: Prf,
    pub remote: Prf,
    pub averaged: Prf,
}

impl F1Report {
    /// `primary_p primary_r primary_f1 remote_p ... averaged_f1`, tab separated.
    pub fn tsv(&self) -> String {
        [self.primary, self.remote, self.averaged]
            .iter()
            .flat_map(|s| [s.precision, s.recall, s.f1])
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join("\t")
    }

    pub fn tsv_header() -> &'static str {
        "primary_p\tprimary_r\tprimary_f1\tremote_p\tremote_r\tremote_f1\tavg_p\tavg_r\tavg_f1"
    }
}

impl fmt::Display for F1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "primary {:.4} remote {:.4} averaged {:.4}",
            self.primary.f1, self.remote.f1, self.averaged.f1
        )
    }
}

fn multiset(records: Vec<EdgeRecord>, kind: EdgeKind) -> BTreeMap<EdgeRecord, usize> {
    let mut out = BTreeMap::new();
    for r in records.into_iter().filter(|r| r.kind == kind) {
        *out.entry(r).or_insert(0) += 1;
    }
    out
}

fn compare(gold: &BTreeMap<EdgeRecord, usize>, pred: &BTreeMap<EdgeRecord, usize>) -> Counts {
    Counts {
        matched: gold
            .iter()
            .map(|(r, &g)| g.min(pred.get(r).copied().unwrap_or(0)))
            .sum(),
        gold: gold.values().sum(),
        predicted: pred.values().sum(),
    }
}

/// Record counts for one sentence pair.
pub fn count(gold: &UccaGraph, pred: &UccaGraph) -> Result<EvalCounts> {
    let forms = |g: &UccaGraph| g.tokens.iter().map(|t| t.form.clone()).collect::<Vec<_>>();
    if forms(gold) != forms(pred) {
        return Err(Error::TokenMismatch);
    }
    let (g, p) = (edge_records(gold), edge_records(pred));
    let mut out = EvalCounts::default();
    for (kind, slot) in [
        (EdgeKind::Primary, &mut out.primary),
        (EdgeKind::Remote, &mut out.remote),
    ] {
        *slot = compare(&multiset(g.clone(), kind), &multiset(p.clone(), kind));
    }
    Ok(out)
}

/// Scores of one sentence pair.
pub fn score(gold: &UccaGraph, pred: &UccaGraph) -> Result<F1Report> {
    Ok(count(gold, pred)?.report())
}

/// Micro-averaged scores over aligned corpora.
pub fn score_corpus(gold: &[UccaGraph], pred: &[UccaGraph], exec: Execution) -> Result<F1Report> {
    if gold.len() != pred.len() {
        return Err(Error::Config(format!(
            "{} gold graphs but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let pairs: Vec<(&UccaGraph, &UccaGraph)> = gold.iter().zip(pred).collect();
    let per_sentence = exec.map(&pairs, |(g, p)| count(g, p));
    let mut total = EvalCounts::default();
    for (idx, counts) in per_sentence.into_iter().enumerate() {
        total = total.merge(counts.map_err(|e| match e {
            Error::TokenMismatch => Error::Config(format!("sentence {}: token mismatch", idx + 1)),
            other => other,
        })?);
    }
    Ok(total.report())
}
