//! Remote edge recovery: every node marked `-remote` in the tree is paired
//! with every other nonterminal and a biaffine classifier picks a remote
//! label or `NOT-PARENT` for each pair.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::graph::{reachable, Edge, NodeId, UccaGraph};
use crate::neural::{SentenceNet, Vocab};

/// A remote-marked node and one candidate parent, with the fencepost spans
/// `(min - 1, max)` of their yields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RemotePair {
    pub child: NodeId,
    pub parent: NodeId,
    pub child_span: (usize, usize),
    pub parent_span: (usize, usize),
}

/// Source of remote label scores.
pub trait RemoteScorer {
    /// One score per remote label, `NOT-PARENT` first.
    fn remote_scores(&mut self, child: (usize, usize), parent: (usize, usize)) -> Result<Vec<f64>>;

    fn seed_remote(
        &mut self,
        _child: (usize, usize),
        _parent: (usize, usize),
        _g: &[f64],
    ) -> Result<()> {
        Ok(())
    }
}

impl RemoteScorer for SentenceNet<'_> {
    fn remote_scores(&mut self, child: (usize, usize), parent: (usize, usize)) -> Result<Vec<f64>> {
        let v = self.remote_var(child, parent)?;
        Ok(self.value(v).to_vec())
    }

    fn seed_remote(
        &mut self,
        child: (usize, usize),
        parent: (usize, usize),
        g: &[f64],
    ) -> Result<()> {
        let v = self.remote_var(child, parent)?;
        self.tape.seed_all(v, g);
        Ok(())
    }
}

fn fence_span(yield_: &BTreeSet<usize>) -> (usize, usize) {
    let lo = *yield_.first().expect("nonterminals dominate a terminal");
    let hi = *yield_.last().expect("nonterminals dominate a terminal");
    (lo - 1, hi)
}

/// All (marked child, other nonterminal) pairs, children in the given order
/// and candidates in nonterminal order.
pub fn enumerate_pairs(graph: &UccaGraph, marked: &[NodeId]) -> Result<Vec<RemotePair>> {
    let yields = graph.yields();
    let mut pairs = Vec::with_capacity(marked.len() * graph.nonterminals.len().saturating_sub(1));
    for &child in marked {
        if graph.is_terminal(child) {
            return Err(Error::TerminalNode(child));
        }
        let child_yield = yields.get(&child).ok_or(Error::UnknownNode(child))?;
        for &parent in &graph.nonterminals {
            if parent == child {
                continue;
            }
            pairs.push(RemotePair {
                child,
                parent,
                child_span: fence_span(child_yield),
                parent_span: fence_span(&yields[&parent]),
            });
        }
    }
    Ok(pairs)
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// Target class of every pair: the label of the gold remote edge
/// `parent -> child`, else the label of a gold pair with the same two spans
/// (the classifier cannot tell such pairs apart), else `NOT-PARENT`.
pub fn pair_targets(pairs: &[RemotePair], gold: &[Edge], labels: &Vocab) -> Result<Vec<usize>> {
    let mut by_nodes = HashMap::new();
    for e in gold {
        let idx = labels.get(&e.label).filter(|&i| i > 0).ok_or_else(|| {
            Error::InvalidGraph(format!(
                "remote label {:?} is not in the vocabulary",
                e.label
            ))
        })?;
        by_nodes.insert((e.parent, e.child), idx);
    }
    let mut by_spans = HashMap::new();
    for pair in pairs {
        if let Some(&idx) = by_nodes.get(&(pair.parent, pair.child)) {
            by_spans
                .entry((pair.child_span, pair.parent_span))
                .or_insert(idx);
        }
    }
    Ok(pairs
        .iter()
        .map(|p| {
            by_nodes
                .get(&(p.parent, p.child))
                .or_else(|| by_spans.get(&(p.child_span, p.parent_span)))
                .copied()
                .unwrap_or(0)
        })
        .collect())
}

/// Summed cross-entropy over all pairs against [`pair_targets`]. Gradients
/// are seeded into `scorer`.
pub fn loss_remote<S: RemoteScorer + ?Sized>(
    scorer: &mut S,
    pairs: &[RemotePair],
    gold: &[Edge],
    labels: &Vocab,
) -> Result<f64> {
    let targets = pair_targets(pairs, gold, labels)?;
    let mut total = 0.0;
    for (pair, &target) in pairs.iter().zip(&targets) {
        let scores = scorer.remote_scores(pair.child_span, pair.parent_span)?;
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} remote scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        let lse = log_sum_exp(&scores);
        total += lse - scores[target];
        let mut g: Vec<f64> = scores.iter().map(|s| (s - lse).exp()).collect();
        g[target] -= 1.0;
        scorer.seed_remote(pair.child_span, pair.parent_span, &g)?;
    }
    Ok(total)
}

/// Predicted remote edges for `graph`. Pairs whose best label is not
/// `NOT-PARENT` are accepted by decreasing margin over `NOT-PARENT`, deeper
/// parents first on ties. A prediction is dropped if it repeats the primary
/// edge, closes a cycle, or has the same child and parent span as an
/// accepted one.
pub fn predict_remotes<S: RemoteScorer + ?Sized>(
    scorer: &mut S,
    graph: &UccaGraph,
    marked: &[NodeId],
    labels: &Vocab,
) -> Result<Vec<Edge>> {
    let pairs = enumerate_pairs(graph, marked)?;
    let mut candidates = Vec::new();
    for (order, pair) in pairs.iter().enumerate() {
        let scores = scorer.remote_scores(pair.child_span, pair.parent_span)?;
        let best = scores
            .iter()
            .enumerate()
            .fold(0, |b, (l, &s)| if s > scores[b] { l } else { b });
        if best != 0 {
            let depth = graph.depth(pair.parent)?;
            candidates.push((scores[best] - scores[0], depth, order, best));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));

    let mut edges = graph.edges.clone();
    let mut taken = HashSet::new();
    let mut out = Vec::new();
    for (_, _, order, label) in candidates {
        let pair = &pairs[order];
        if graph.primary_parent(pair.child) == Some(pair.parent)
            || taken.contains(&(pair.child, pair.parent_span))
            || reachable(&edges, pair.child, pair.parent)
        {
            continue;
        }
        let edge = Edge::remote(pair.parent, pair.child, labels.item(label));
        taken.insert((pair.child, pair.parent_span));
        edges.push(edge.clone());
        out.push(edge);
    }
    out.sort();
    Ok(out)
}

/// Map nodes of `from` to nodes of `to` that have the same yield, pairing
/// unary chains top-down. Nodes without a counterpart are left out.
pub fn align_nodes(from: &UccaGraph, to: &UccaGraph) -> Result<BTreeMap<NodeId, NodeId>> {
    fn groups(g: &UccaGraph) -> Result<BTreeMap<BTreeSet<usize>, Vec<NodeId>>> {
        let yields = g.yields();
        let mut out: BTreeMap<BTreeSet<usize>, Vec<(usize, NodeId)>> = BTreeMap::new();
        for &id in &g.nonterminals {
            if let Some(y) = yields.get(&id) {
                out.entry(y.clone()).or_default().push((g.depth(id)?, id));
            }
        }
        Ok(out
            .into_iter()
            .map(|(y, mut v)| {
                v.sort();
                (y, v.into_iter().map(|(_, id)| id).collect())
            })
            .collect())
    }
    let target = groups(to)?;
    let mut map = BTreeMap::new();
    for (y, nodes) in groups(from)? {
        if let Some(other) = target.get(&y) {
            map.extend(nodes.into_iter().zip(other.iter().copied()));
        }
    }
    Ok(map)
}

/// Remote edges of `gold` expressed over the nodes of `restored`. Edges
/// whose endpoints have no counterpart are dropped.
pub fn align_gold_remotes(gold: &UccaGraph, restored: &UccaGraph) -> Result<Vec<Edge>> {
    let map = align_nodes(gold, restored)?;
    let mut out: Vec<Edge> = gold
        .remote_edges()
        .filter_map(|e| {
            Some(Edge::remote(
                *map.get(&e.parent)?,
                *map.get(&e.child)?,
                e.label.clone(),
            ))
        })
        .collect();
    out.sort();
    Ok(out)
}

type Span = (usize, usize);

/// Scores that reproduce a fixed set of remote edges: a large score on the
/// gold label of listed pairs and on `NOT-PARENT` elsewhere.
#[derive(Clone, Debug)]
pub struct RemoteOracle {
    /// (child span, parent span) to gold class.
    targets: HashMap<(Span, Span), usize>,
    classes: usize,
}

impl RemoteOracle {
    pub fn new(graph: &UccaGraph, edges: &[Edge], labels: &Vocab) -> Result<Self> {
        let yields = graph.yields();
        let mut targets = HashMap::new();
        for e in edges {
            let span = |id: NodeId| {
                yields
                    .get(&id)
                    .map(fence_span)
                    .ok_or(Error::UnknownNode(id))
            };
            let idx = labels.get(&e.label).ok_or_else(|| {
                Error::InvalidGraph(format!("unknown remote label {:?}", e.label))
            })?;
            targets.insert((span(e.child)?, span(e.parent)?), idx);
        }
        Ok(RemoteOracle {
            targets,
            classes: labels.len(),
        })
    }
}

impl RemoteScorer for RemoteOracle {
    fn remote_scores(&mut self, child: (usize, usize), parent: (usize, usize)) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.classes];
        out[self.targets.get(&(child, parent)).copied().unwrap_or(0)] = 10.0;
        Ok(out)
    }
}
