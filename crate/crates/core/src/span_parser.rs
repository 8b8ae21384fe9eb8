//! Greedy top-down span parsing and its margin loss.
//!
//! Every span gets a label (possibly the empty label, which adds no node) and
//! every span longer than one token gets a split point. n-ary nodes are
//! binarized implicitly: the pieces between a split and the node boundaries
//! are empty-labelled spans.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::graph::Token;
use crate::labels::{CHAIN_SEP, ROOT};
use crate::neural::{SentenceNet, Vocab};
use crate::tree::{ConstituentTree, TreeNode};

/// Source of label and split scores for the spans of one sentence.
///
/// The seeding hooks receive loss gradients; scorers that are not trained
/// ignore them.
pub trait SpanScorer {
    /// One score per label of the vocabulary.
    fn label_scores(&mut self, i: usize, j: usize) -> Result<Vec<f64>>;

    /// Scalar split score of span `(i, j)`.
    fn split_score(&mut self, i: usize, j: usize) -> Result<f64>;

    fn seed_label(&mut self, _i: usize, _j: usize, _label: usize, _g: f64) -> Result<()> {
        Ok(())
    }

    fn seed_split(&mut self, _i: usize, _j: usize, _g: f64) -> Result<()> {
        Ok(())
    }
}

impl SpanScorer for SentenceNet<'_> {
    fn label_scores(&mut self, i: usize, j: usize) -> Result<Vec<f64>> {
        let v = self.label_var(i, j)?;
        Ok(self.value(v).to_vec())
    }

    fn split_score(&mut self, i: usize, j: usize) -> Result<f64> {
        let v = self.split_var(i, j)?;
        Ok(self.value(v)[0])
    }

    fn seed_label(&mut self, i: usize, j: usize, label: usize, g: f64) -> Result<()> {
        let v = self.label_var(i, j)?;
        self.tape.seed(v, label, g);
        Ok(())
    }

    fn seed_split(&mut self, i: usize, j: usize, g: f64) -> Result<()> {
        let v = self.split_var(i, j)?;
        self.tape.seed(v, 0, g);
        Ok(())
    }
}

/// Whether a collapsed label starts with `ROOT`.
pub fn is_root_label(label: &str) -> bool {
    label == ROOT
        || label
            .strip_prefix(ROOT)
            .is_some_and(|rest| rest.starts_with(CHAIN_SEP))
}

/// Labels the full span may take are exactly the `ROOT`-prefixed ones.
fn allowed(labels: &Vocab, idx: usize, is_root: bool) -> bool {
    is_root_label(labels.item(idx)) == is_root
}

/// First index of the maximum among `candidates`.
fn argmax<I: IntoIterator<Item = (usize, f64)>>(candidates: I) -> Option<(usize, f64)> {
    candidates
        .into_iter()
        .fold(None, |best, (k, s)| match best {
            Some((_, b)) if s <= b => best,
            _ => Some((k, s)),
        })
}

/// Greedy top-down decoding of an `n`-token sentence.
pub fn parse_topdown<S: SpanScorer + ?Sized>(
    scorer: &mut S,
    labels: &Vocab,
    tokens: &[Token],
    lang: &str,
) -> Result<ConstituentTree> {
    let n = tokens.len();
    if n == 0 {
        return Err(Error::InvalidTree("cannot parse an empty sentence".into()));
    }

    fn decode<S: SpanScorer + ?Sized>(
        scorer: &mut S,
        labels: &Vocab,
        i: usize,
        j: usize,
        is_root: bool,
    ) -> Result<(String, Vec<TreeNode>)> {
        let scores = scorer.label_scores(i, j)?;
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} label scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        let (best, _) = argmax(
            scores
                .iter()
                .copied()
                .enumerate()
                .filter(|&(l, _)| allowed(labels, l, is_root)),
        )
        .ok_or_else(|| Error::Config("label vocabulary has no ROOT label".into()))?;
        let children = if j - i == 1 {
            vec![TreeNode::Leaf(j)]
        } else {
            let mut split_scores = Vec::with_capacity(j - i - 1);
            for k in i + 1..j {
                split_scores.push((k, scorer.split_score(i, k)? + scorer.split_score(k, j)?));
            }
            let (k, _) = argmax(split_scores).expect("span longer than one token");
            let mut out = wrap(decode(scorer, labels, i, k, false)?);
            out.extend(wrap(decode(scorer, labels, k, j, false)?));
            out
        };
        Ok((labels.item(best).to_owned(), children))
    }

    fn wrap((label, children): (String, Vec<TreeNode>)) -> Vec<TreeNode> {
        if label.is_empty() {
            children
        } else {
            vec![TreeNode::Internal { label, children }]
        }
    }

    let (label, children) = decode(scorer, labels, 0, n, true)?;
    let root = match label
        .strip_prefix(ROOT)
        .and_then(|r| r.strip_prefix(CHAIN_SEP))
    {
        Some(rest) => TreeNode::internal(ROOT, vec![TreeNode::internal(rest, children)]),
        None => TreeNode::internal(ROOT, children),
    };
    Ok(ConstituentTree::new(tokens.to_vec(), lang, root))
}

/// One decision point of the gold derivation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub span: (usize, usize),
    /// Collapsed label; empty for spans created by implicit binarization.
    pub label: String,
    /// Every split consistent with the gold tree, ascending.
    pub gold_splits: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldTrace {
    pub entries: Vec<TraceEntry>,
}

/// Collapse unary chains starting at `node`: the joined label and the
/// children of the lowest chain element. A leaf stands for itself with the
/// empty label.
fn collapse(node: &TreeNode) -> (String, &[TreeNode]) {
    match node {
        TreeNode::Leaf(_) => (String::new(), std::slice::from_ref(node)),
        TreeNode::Internal { label, children } => {
            let mut parts = vec![label.as_str()];
            let mut cur = children.as_slice();
            while let [only @ TreeNode::Internal { label, children }] = cur {
                if only.span() != node.span() {
                    break;
                }
                parts.push(label);
                cur = children;
            }
            (parts.join("+"), cur)
        }
    }
}

fn span_of(children: &[TreeNode]) -> (usize, usize) {
    (children[0].span().0, children[children.len() - 1].span().1)
}

/// Walk the gold derivation. `decide` sees every entry and returns the split
/// along which to continue (ignored for one-token spans).
fn walk<F>(label: String, children: &[TreeNode], is_root: bool, decide: &mut F) -> Result<()>
where
    F: FnMut(&TraceEntry, bool) -> Result<usize>,
{
    let span = span_of(children);
    let gold_splits: Vec<usize> = children[..children.len() - 1]
        .iter()
        .map(|c| c.span().1)
        .collect();
    if span.1 - span.0 > 1 && gold_splits.is_empty() {
        return Err(Error::InvalidTree("unary node survived collapsing".into()));
    }
    let entry = TraceEntry {
        span,
        label,
        gold_splits,
    };
    let k = decide(&entry, is_root)?;
    if span.1 - span.0 == 1 {
        return Ok(());
    }
    let cut = children
        .iter()
        .position(|c| c.span().0 == k)
        .ok_or_else(|| {
            Error::InvalidTree(format!("split {k} is not a child boundary of {span:?}"))
        })?;
    for side in [&children[..cut], &children[cut..]] {
        let (label, kids) = match side {
            [one] => collapse(one),
            _ => (String::new(), side),
        };
        walk(label, kids, false, decide)?;
    }
    Ok(())
}

/// The gold derivation with every n-ary node binarized at its leftmost
/// boundary.
pub fn gold_trace(tree: &ConstituentTree) -> Result<GoldTrace> {
    tree.validate()?;
    let mut entries = Vec::new();
    let (label, children) = collapse(&tree.root);
    walk(label, children, true, &mut |entry, _| {
        entries.push(entry.clone());
        Ok(entry.gold_splits.first().copied().unwrap_or(0))
    })?;
    Ok(GoldTrace { entries })
}

/// Sum of margin-1 hinge penalties along the gold derivation. Gradients of
/// the penalties are seeded into `scorer`. Descent continues along the
/// highest scoring gold split.
pub fn loss_topdown<S: SpanScorer + ?Sized>(
    scorer: &mut S,
    labels: &Vocab,
    tree: &ConstituentTree,
) -> Result<f64> {
    tree.validate()?;
    let mut total = 0.0;
    let (label, children) = collapse(&tree.root);
    walk(label, children, true, &mut |entry, is_root| {
        let (i, j) = entry.span;
        let gold = labels.get(&entry.label).ok_or_else(|| {
            Error::InvalidTree(format!("label {:?} is not in the vocabulary", entry.label))
        })?;
        if !allowed(labels, gold, is_root) {
            return Err(Error::InvalidTree(format!(
                "label {:?} cannot label span {:?}",
                entry.label, entry.span
            )));
        }
        let scores = scorer.label_scores(i, j)?;
        let wrong = argmax(
            scores
                .iter()
                .copied()
                .enumerate()
                .filter(|&(l, _)| l != gold && allowed(labels, l, is_root)),
        );
        if let Some((w, s)) = wrong {
            let penalty = 1.0 + s - scores[gold];
            if penalty > 0.0 {
                total += penalty;
                scorer.seed_label(i, j, w, 1.0)?;
                scorer.seed_label(i, j, gold, -1.0)?;
            }
        }
        if j - i == 1 {
            return Ok(0);
        }
        let mut split_scores = Vec::with_capacity(j - i - 1);
        for k in i + 1..j {
            split_scores.push((k, scorer.split_score(i, k)? + scorer.split_score(k, j)?));
        }
        let is_gold = |k: usize| entry.gold_splits.binary_search(&k).is_ok();
        let (best_gold, gold_score) =
            argmax(split_scores.iter().copied().filter(|&(k, _)| is_gold(k))).expect("gold split");
        if let Some((w, s)) = argmax(split_scores.iter().copied().filter(|&(k, _)| !is_gold(k))) {
            let penalty = 1.0 + s - gold_score;
            if penalty > 0.0 {
                total += penalty;
                scorer.seed_split(i, w, 1.0)?;
                scorer.seed_split(w, j, 1.0)?;
                scorer.seed_split(i, best_gold, -1.0)?;
                scorer.seed_split(best_gold, j, -1.0)?;
            }
        }
        Ok(best_gold)
    })?;
    Ok(total)
}

/// Scores that make the gold derivation of one tree the unique greedy
/// choice: label scores are one-hot on the gold label of every trace span
/// (the empty label elsewhere) and split scores are 1 on trace spans.
#[derive(Clone, Debug)]
pub struct GoldOracle {
    labels: HashMap<(usize, usize), usize>,
    spans: HashSet<(usize, usize)>,
    vocab_len: usize,
}

impl GoldOracle {
    pub fn new(tree: &ConstituentTree, vocab: &Vocab) -> Result<Self> {
        let trace = gold_trace(tree)?;
        let mut labels = HashMap::new();
        for entry in &trace.entries {
            let idx = vocab.get(&entry.label).ok_or_else(|| {
                Error::InvalidTree(format!("label {:?} is not in the vocabulary", entry.label))
            })?;
            labels.insert(entry.span, idx);
        }
        Ok(GoldOracle {
            spans: labels.keys().copied().collect(),
            labels,
            vocab_len: vocab.len(),
        })
    }
}

impl SpanScorer for GoldOracle {
    fn label_scores(&mut self, i: usize, j: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.vocab_len];
        out[self.labels.get(&(i, j)).copied().unwrap_or(0)] = 1.0;
        Ok(out)
    }

    fn split_score(&mut self, i: usize, j: usize) -> Result<f64> {
        Ok(if self.spans.contains(&(i, j)) {
            1.0
        } else {
            0.0
        })
    }
}

/// Collect every collapsed label of `tree` into `vocab`.
pub fn collect_labels(tree: &ConstituentTree, vocab: &mut Vocab) -> Result<()> {
    for entry in gold_trace(tree)?.entries {
        vocab.insert(&entry.label);
    }
    Ok(())
}
