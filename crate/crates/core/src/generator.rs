//! Seeded synthetic corpora: random labeled trees with remote edges and
//! injected one-level discontinuities that the conversion can undo exactly.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{reachable, Edge, NodeId, Token, UccaGraph};
use crate::labels::is_valid_category;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub sentences: usize,
    pub vocab_size: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Deepest nonterminal level below the root.
    pub max_depth: usize,
    pub min_branching: usize,
    pub max_branching: usize,
    /// Chance that a nonterminal gets a remote parent.
    pub p_remote: f64,
    /// Chance per sentence of one injected ancestor-1 discontinuity.
    pub p_discontinuity: f64,
    /// Chance that a multi-token span becomes one flat node over its tokens.
    pub p_flat: f64,
    pub labels: Vec<String>,
    pub remote_labels: Vec<String>,
    pub languages: Vec<String>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let strings = |xs: &[&str]| xs.iter().map(|s| (*s).to_owned()).collect();
        SyntheticSpec {
            sentences: 100,
            vocab_size: 50,
            min_tokens: 1,
            max_tokens: 20,
            max_depth: 5,
            min_branching: 1,
            max_branching: 4,
            p_remote: 0.3,
            p_discontinuity: 0.5,
            p_flat: 0.2,
            labels: strings(&["A", "P", "S", "D", "C", "E", "H", "L", "U", "F"]),
            remote_labels: strings(&["A", "C"]),
            languages: strings(&["en"]),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InfeasibleSpec(msg.to_owned()));
        for (name, p) in [
            ("p_remote", self.p_remote),
            ("p_discontinuity", self.p_discontinuity),
            ("p_flat", self.p_flat),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InfeasibleSpec(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad("token range must satisfy 1 <= min_tokens <= max_tokens");
        }
        if self.min_branching == 0 || self.min_branching > self.max_branching {
            return bad("branching range must satisfy 1 <= min_branching <= max_branching");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.vocab_size == 0 {
            return bad("vocab_size must be positive");
        }
        if self.labels.is_empty() || self.languages.is_empty() {
            return bad("label alphabet and language list must be non-empty");
        }
        if self.p_remote > 0.0 && self.remote_labels.is_empty() {
            return bad("remote edges requested without remote labels");
        }
        if let Some(l) = self
            .labels
            .iter()
            .chain(&self.remote_labels)
            .find(|l| !is_valid_category(l))
        {
            return Err(Error::InfeasibleSpec(format!(
                "{l:?} is not a valid category"
            )));
        }
        if self.p_discontinuity > 0.0 {
            // Root -> A -> three children, at least one of them a nonterminal
            // strictly inside A.
            if self.max_depth < 3 || self.max_branching < 3 || self.max_tokens < 3 {
                return bad(
                    "discontinuities need max_depth >= 3, max_branching >= 3 and max_tokens >= 3",
                );
            }
        }
        Ok(())
    }
}

struct Builder<'a> {
    spec: &'a SyntheticSpec,
    rng: &'a mut ChaCha8Rng,
    n: usize,
    next: u32,
    nonterminals: Vec<NodeId>,
    edges: Vec<Edge>,
}

impl Builder<'_> {
    fn fresh(&mut self) -> NodeId {
        let id = NodeId(self.next);
        self.next += 1;
        self.nonterminals.push(id);
        id
    }

    fn label(&mut self) -> String {
        self.spec.labels.choose(self.rng).expect("labels").clone()
    }

    /// Children of `node` covering tokens `lo..=hi`, at `depth` (of `node`).
    fn expand(&mut self, node: NodeId, lo: usize, hi: usize, depth: usize) {
        let len = hi - lo + 1;
        let flat = depth > 0
            && (len == 1 || depth == self.spec.max_depth || self.rng.gen_bool(self.spec.p_flat));
        if flat {
            for pos in lo..=hi {
                self.edges
                    .push(Edge::primary(node, UccaGraph::terminal(pos), ""));
            }
            return;
        }
        let max_b = self.spec.max_branching.min(len);
        let min_b = self.spec.min_branching.min(max_b);
        let b = self.rng.gen_range(min_b..=max_b);
        let mut cuts: Vec<usize> = if b > 1 {
            sample(self.rng, len - 1, b - 1)
                .into_iter()
                .map(|c| lo + c + 1)
                .collect()
        } else {
            Vec::new()
        };
        cuts.sort_unstable();
        let mut start = lo;
        for end in cuts.into_iter().chain(std::iter::once(hi + 1)) {
            let child = self.fresh();
            let label = self.label();
            self.edges.push(Edge::primary(node, child, label));
            self.expand(child, start, end - 1, depth + 1);
            start = end;
        }
    }

    fn children(&self, node: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|e| !e.is_remote() && e.parent == node)
            .map(|e| e.child)
            .collect()
    }

    fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.edges
            .iter()
            .find(|e| !e.is_remote() && e.child == node)
            .map(|e| e.parent)
    }

    fn is_terminal(&self, id: NodeId) -> bool {
        (id.0 as usize) <= self.n
    }

    /// Move a non-empty set of interior nonterminal children of some
    /// non-root node up to its parent. Returns whether anything moved.
    fn inject_discontinuity(&mut self, root: NodeId) -> bool {
        let candidates: Vec<(NodeId, Vec<NodeId>)> = self
            .nonterminals
            .iter()
            .filter(|&&a| a != root)
            .filter_map(|&a| {
                let kids = self.children(a);
                if kids.len() < 3 {
                    return None;
                }
                let inner: Vec<NodeId> = kids[1..kids.len() - 1]
                    .iter()
                    .copied()
                    .filter(|&k| !self.is_terminal(k))
                    .collect();
                (!inner.is_empty()).then_some((a, inner))
            })
            .collect();
        let Some((a, inner)) = candidates.choose(self.rng).cloned() else {
            return false;
        };
        let parent = self.parent(a).expect("non-root node has a parent");
        let count = self.rng.gen_range(1..=inner.len());
        for idx in sample(self.rng, inner.len(), count) {
            let moved = inner[idx];
            let edge = self
                .edges
                .iter_mut()
                .find(|e| !e.is_remote() && e.child == moved)
                .expect("primary edge");
            edge.parent = parent;
        }
        true
    }

    fn add_remotes(&mut self, root: NodeId) {
        let nodes = self.nonterminals.clone();
        for &child in &nodes {
            if child == root || !self.rng.gen_bool(self.spec.p_remote) {
                continue;
            }
            let primary = self.parent(child);
            let options: Vec<NodeId> = nodes
                .iter()
                .copied()
                .filter(|&p| {
                    p != child
                        && Some(p) != primary
                        && !self.edges.iter().any(|e| e.parent == p && e.child == child)
                        && !reachable(&self.edges, child, p)
                })
                .collect();
            if let Some(&p) = options.choose(self.rng) {
                let label = self
                    .spec
                    .remote_labels
                    .choose(self.rng)
                    .expect("remote labels")
                    .clone();
                self.edges.push(Edge::remote(p, child, label));
            }
        }
    }
}

/// Generate one graph.
fn generate_one(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> UccaGraph {
    let n = rng.gen_range(spec.min_tokens..=spec.max_tokens);
    let lang = spec.languages.choose(rng).expect("languages").clone();
    let tokens = (0..n)
        .map(|_| {
            let w = rng.gen_range(0..spec.vocab_size);
            Token {
                form: format!("w{w}"),
                pos: format!("T{}", w % 7),
                ner: if w % 11 == 0 {
                    "ENT".into()
                } else {
                    "O".into()
                },
                dep: format!("d{}", w % 5),
            }
        })
        .collect();
    let mut b = Builder {
        spec,
        rng,
        n,
        next: n as u32 + 1,
        nonterminals: Vec::new(),
        edges: Vec::new(),
    };
    let root = b.fresh();
    b.expand(root, 1, n, 0);
    if spec.p_discontinuity > 0.0 && b.rng.gen_bool(spec.p_discontinuity) {
        b.inject_discontinuity(root);
    }
    if spec.p_remote > 0.0 {
        b.add_remotes(root);
    }
    let graph = UccaGraph {
        tokens,
        lang,
        nonterminals: b.nonterminals,
        root,
        edges: b.edges,
    };
    graph.canonicalize().0
}

/// A corpus that depends only on `(spec, seed)`. Every graph validates.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<Vec<UccaGraph>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus: Vec<UccaGraph> = (0..spec.sentences)
        .map(|_| generate_one(spec, &mut rng))
        .collect();
    for g in &corpus {
        if let Some(v) = g.validate().into_iter().next() {
            return Err(Error::InvalidGraph(format!(
                "generator produced an invalid graph: {v}"
            )));
        }
    }
    Ok(corpus)
}
