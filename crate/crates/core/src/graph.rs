//! UCCA graphs: tokens, terminal and nonterminal nodes, primary and remote
//! edges.
//!
//! Terminal node ids are the 1-based token positions `1..=n`; nonterminal
//! ids are larger than `n`. Primary edges form a tree rooted at `root`,
//! remote edges add reentrancy while keeping the whole graph acyclic.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels;

/// Node identifier, unique within a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A token with its linguistic features.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    #[serde(default)]
    pub pos: String,
    #[serde(default)]
    pub ner: String,
    #[serde(default)]
    pub dep: String,
}

impl Token {
    pub fn new(form: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Primary,
    Remote,
}

/// A labeled edge `parent -> child`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "EdgeJson", into = "EdgeJson")]
pub struct Edge {
    pub parent: NodeId,
    pub child: NodeId,
    pub label: String,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn primary(parent: NodeId, child: NodeId, label: impl Into<String>) -> Self {
        Edge {
            parent,
            child,
            label: label.into(),
            kind: EdgeKind::Primary,
        }
    }

    pub fn remote(parent: NodeId, child: NodeId, label: impl Into<String>) -> Self {
        Edge {
            parent,
            child,
            label: label.into(),
            kind: EdgeKind::Remote,
        }
    }

    pub fn is_remote(&self) -> bool {
        self.kind == EdgeKind::Remote
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    parent: NodeId,
    child: NodeId,
    #[serde(default)]
    label: String,
    #[serde(default)]
    remote: bool,
}

impl From<EdgeJson> for Edge {
    fn from(e: EdgeJson) -> Self {
        Edge {
            parent: e.parent,
            child: e.child,
            label: e.label,
            kind: if e.remote {
                EdgeKind::Remote
            } else {
                EdgeKind::Primary
            },
        }
    }
}

impl From<Edge> for EdgeJson {
    fn from(e: Edge) -> Self {
        EdgeJson {
            remote: e.is_remote(),
            parent: e.parent,
            child: e.child,
            label: e.label,
        }
    }
}

/// A UCCA graph over one sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "GraphJson")]
pub struct UccaGraph {
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub lang: String,
    /// Nonterminal ids in document order.
    #[serde(rename = "nodes")]
    pub nonterminals: Vec<NodeId>,
    pub root: NodeId,
    pub edges: Vec<Edge>,
}

#[derive(Deserialize)]
struct GraphJson {
    tokens: Vec<Token>,
    #[serde(default)]
    lang: String,
    #[serde(default)]
    nodes: Vec<NodeId>,
    root: NodeId,
    #[serde(default)]
    edges: Vec<Edge>,
}

impl From<GraphJson> for UccaGraph {
    fn from(g: GraphJson) -> Self {
        // Terminal ids may or may not be listed; only nonterminals are kept.
        let n = g.tokens.len() as u32;
        let mut seen = HashSet::new();
        let nonterminals = g
            .nodes
            .into_iter()
            .filter(|id| id.0 > n && seen.insert(*id))
            .collect();
        UccaGraph {
            tokens: g.tokens,
            lang: g.lang,
            nonterminals,
            root: g.root,
            edges: g.edges,
        }
    }
}

/// One violated graph invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parent/children lookup over the primary edges of a graph.
#[derive(Clone, Debug, Default)]
pub struct PrimaryIndex {
    parent: HashMap<NodeId, NodeId>,
    children: HashMap<NodeId, Vec<NodeId>>,
}

impl PrimaryIndex {
    pub fn new(graph: &UccaGraph) -> Self {
        let mut index = PrimaryIndex::default();
        for edge in graph.edges.iter().filter(|e| !e.is_remote()) {
            index.parent.insert(edge.child, edge.parent);
            index
                .children
                .entry(edge.parent)
                .or_default()
                .push(edge.child);
        }
        index
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent.get(&node).copied()
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        self.children.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Ancestors of `node` from itself up to the root.
    pub fn path_to_root(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut seen = HashSet::from([node]);
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            if !seen.insert(p) {
                break;
            }
            path.push(p);
            cur = p;
        }
        path
    }
}

impl UccaGraph {
    /// Number of tokens (and terminal nodes).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_terminal(&self, node: NodeId) -> bool {
        node.0 >= 1 && (node.0 as usize) <= self.tokens.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.is_terminal(node) || self.nonterminals.contains(&node)
    }

    pub fn terminal(position: usize) -> NodeId {
        NodeId(position as u32)
    }

    /// All node ids: terminals first, then nonterminals in document order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..=self.tokens.len() as u32)
            .map(NodeId)
            .chain(self.nonterminals.iter().copied())
    }

    pub fn primary_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| !e.is_remote())
    }

    pub fn remote_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_remote())
    }

    pub fn primary_index(&self) -> PrimaryIndex {
        PrimaryIndex::new(self)
    }

    pub fn primary_parent(&self, node: NodeId) -> Option<NodeId> {
        self.primary_edges()
            .find(|e| e.child == node)
            .map(|e| e.parent)
    }

    /// The primary edge entering `node`, if any.
    pub fn primary_edge_into(&self, node: NodeId) -> Option<&Edge> {
        self.primary_edges().find(|e| e.child == node)
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(Error::UnknownNode(node))
        }
    }

    /// Terminal positions dominated by `node` through primary edges.
    pub fn yield_of(&self, node: NodeId) -> Result<BTreeSet<usize>> {
        self.check_node(node)?;
        Ok(collect_yield(self, &self.primary_index(), node))
    }

    /// Yields of every node, computed in one pass.
    pub fn yields(&self) -> HashMap<NodeId, BTreeSet<usize>> {
        let index = self.primary_index();
        let mut out = HashMap::new();
        fill_yields(self, &index, self.root, &mut out, &mut HashSet::new());
        for pos in 1..=self.len() {
            out.entry(Self::terminal(pos))
                .or_insert_with(|| BTreeSet::from([pos]));
        }
        out
    }

    /// Whether the yield of a nonterminal has a gap.
    pub fn is_discontinuous(&self, node: NodeId) -> Result<bool> {
        self.check_node(node)?;
        if self.is_terminal(node) {
            return Err(Error::TerminalNode(node));
        }
        Ok(!is_contiguous(&self.yield_of(node)?))
    }

    /// Lowest common ancestor under primary edges.
    pub fn lca(&self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_node(a)?;
        self.check_node(b)?;
        let index = self.primary_index();
        Ok(lca_with(&index, a, b).unwrap_or(self.root))
    }

    /// Number of primary edges between `node` and the root.
    pub fn depth(&self, node: NodeId) -> Result<usize> {
        self.check_node(node)?;
        Ok(self.primary_index().path_to_root(node).len() - 1)
    }

    /// Check all structural invariants. An empty list means the graph is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |msg: String| out.push(Violation(msg));
        let n = self.len();

        if n == 0 {
            push("graph has no tokens".into());
        }
        for (idx, token) in self.tokens.iter().enumerate() {
            if token.form.is_empty() {
                push(format!("token {} has an empty form", idx + 1));
            }
        }

        let mut nonterminals = HashSet::new();
        for &id in &self.nonterminals {
            if (id.0 as usize) <= n {
                push(format!(
                    "nonterminal id {id} collides with terminal ids 1..={n}"
                ));
            }
            if !nonterminals.insert(id) {
                push(format!("nonterminal id {id} listed twice"));
            }
        }
        if !nonterminals.contains(&self.root) {
            push(format!("root {} is not a nonterminal", self.root));
        }

        let exists = |id: NodeId| self.is_terminal(id) || nonterminals.contains(&id);
        let mut primary_parents: HashMap<NodeId, usize> = HashMap::new();
        let mut edge_keys = HashSet::new();
        for edge in &self.edges {
            let desc = format!("edge {}->{}", edge.parent, edge.child);
            if !exists(edge.parent) {
                push(format!("{desc}: unknown parent {}", edge.parent));
                continue;
            }
            if !exists(edge.child) {
                push(format!("{desc}: unknown child {}", edge.child));
                continue;
            }
            if self.is_terminal(edge.parent) {
                push(format!("{desc}: terminal {} has a child", edge.parent));
            }
            if edge.child == edge.parent {
                push(format!("{desc}: self loop"));
            }
            if !edge_keys.insert((edge.parent, edge.child)) {
                push(format!(
                    "{desc}: duplicates another edge between the same nodes"
                ));
            }
            if self.is_terminal(edge.child) {
                if edge.is_remote() {
                    push(format!("{desc}: remote edge into terminal {}", edge.child));
                } else if !edge.label.is_empty() {
                    push(format!(
                        "{desc}: terminal edge carries label {:?}",
                        edge.label
                    ));
                }
            } else if !labels::is_valid_category(&edge.label) {
                push(format!("{desc}: invalid category {:?}", edge.label));
            }
            if !edge.is_remote() {
                *primary_parents.entry(edge.child).or_default() += 1;
            }
        }

        for id in self.node_ids() {
            let count = primary_parents.get(&id).copied().unwrap_or(0);
            if id == self.root {
                if count != 0 {
                    push(format!("root {id} has a primary parent"));
                }
            } else if count != 1 {
                push(format!("node {id} has {count} primary parents, expected 1"));
            }
        }

        // Primary edges must reach every node from the root.
        let index = self.primary_index();
        let mut reached = HashSet::from([self.root]);
        let mut queue = VecDeque::from([self.root]);
        while let Some(node) = queue.pop_front() {
            for &child in index.children(node) {
                if reached.insert(child) {
                    queue.push_back(child);
                }
            }
        }
        for id in self.node_ids() {
            if !reached.contains(&id) {
                push(format!(
                    "node {id} is not reachable from root via primary edges"
                ));
            }
        }

        if let Some(node) = find_cycle_node(self) {
            push(format!("edge set has a cycle through node {node}"));
        }

        if out.is_empty() {
            let yields = self.yields();
            for &id in &self.nonterminals {
                if yields.get(&id).is_none_or(BTreeSet::is_empty) {
                    out.push(Violation(format!("nonterminal {id} dominates no terminal")));
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Renumber nonterminals in preorder over primary edges, visiting
    /// children by leftmost terminal. Two graphs with the same structure get
    /// identical ids. Returns the renumbered graph and the old-to-new map.
    pub fn canonicalize(&self) -> (UccaGraph, BTreeMap<NodeId, NodeId>) {
        let n = self.len() as u32;
        let index = self.primary_index();
        let yields = self.yields();
        let leftmost = |id: NodeId| yields.get(&id).and_then(|y| y.first().copied());

        let mut mapping = BTreeMap::new();
        for pos in 1..=n {
            mapping.insert(NodeId(pos), NodeId(pos));
        }
        let mut next = n + 1;
        let mut stack = vec![self.root];
        let mut order = Vec::new();
        while let Some(node) = stack.pop() {
            if self.is_terminal(node) || mapping.contains_key(&node) {
                continue;
            }
            mapping.insert(node, NodeId(next));
            order.push(NodeId(next));
            next += 1;
            let mut kids = index.children(node).to_vec();
            kids.sort_by_key(|&k| (leftmost(k), k));
            stack.extend(kids.into_iter().rev());
        }
        // Unreachable nonterminals keep a stable order after the reachable ones.
        for &id in &self.nonterminals {
            if let std::collections::btree_map::Entry::Vacant(e) = mapping.entry(id) {
                e.insert(NodeId(next));
                order.push(NodeId(next));
                next += 1;
            }
        }
        let map = |id: NodeId| mapping.get(&id).copied().unwrap_or(id);
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge {
                parent: map(e.parent),
                child: map(e.child),
                label: e.label.clone(),
                kind: e.kind,
            })
            .collect();
        edges.sort();
        let graph = UccaGraph {
            tokens: self.tokens.clone(),
            lang: self.lang.clone(),
            nonterminals: order,
            root: map(self.root),
            edges,
        };
        (graph, mapping)
    }

    /// Edge set as a sorted list, for structural comparison.
    pub fn edge_set(&self) -> BTreeSet<Edge> {
        self.edges.iter().cloned().collect()
    }

    /// Whether two graphs have the same tokens and the same edges up to
    /// renumbering of nonterminals.
    pub fn same_structure(&self, other: &UccaGraph) -> bool {
        self.tokens == other.tokens
            && self.canonicalize().0.edge_set() == other.canonicalize().0.edge_set()
    }
}

pub(crate) fn is_contiguous(positions: &BTreeSet<usize>) -> bool {
    match (positions.first(), positions.last()) {
        (Some(&lo), Some(&hi)) => hi - lo + 1 == positions.len(),
        _ => true,
    }
}

pub(crate) fn lca_with(index: &PrimaryIndex, a: NodeId, b: NodeId) -> Option<NodeId> {
    let ancestors: HashSet<NodeId> = index.path_to_root(a).into_iter().collect();
    index
        .path_to_root(b)
        .into_iter()
        .find(|n| ancestors.contains(n))
}

fn collect_yield(graph: &UccaGraph, index: &PrimaryIndex, node: NodeId) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut stack = vec![node];
    let mut seen = HashSet::new();
    while let Some(cur) = stack.pop() {
        if !seen.insert(cur) {
            continue;
        }
        if graph.is_terminal(cur) {
            out.insert(cur.0 as usize);
        }
        stack.extend(index.children(cur).iter().copied());
    }
    out
}

fn fill_yields(
    graph: &UccaGraph,
    index: &PrimaryIndex,
    node: NodeId,
    out: &mut HashMap<NodeId, BTreeSet<usize>>,
    visiting: &mut HashSet<NodeId>,
) {
    if !visiting.insert(node) {
        return;
    }
    let mut acc = BTreeSet::new();
    if graph.is_terminal(node) {
        acc.insert(node.0 as usize);
    }
    for &child in index.children(node) {
        fill_yields(graph, index, child, out, visiting);
        if let Some(y) = out.get(&child) {
            acc.extend(y.iter().copied());
        }
    }
    out.insert(node, acc);
}

/// Some node on a cycle of the full edge set, if there is one.
fn find_cycle_node(graph: &UccaGraph) -> Option<NodeId> {
    let mut indegree: HashMap<NodeId, usize> = graph.node_ids().map(|id| (id, 0)).collect();
    let mut out: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for edge in &graph.edges {
        if !indegree.contains_key(&edge.parent) || !indegree.contains_key(&edge.child) {
            continue;
        }
        *indegree.get_mut(&edge.child).unwrap() += 1;
        out.entry(edge.parent).or_default().push(edge.child);
    }
    let mut queue: VecDeque<NodeId> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut removed = 0;
    while let Some(node) = queue.pop_front() {
        removed += 1;
        for &child in out.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indegree.get_mut(&child).unwrap();
            *d -= 1;
            if *d == 0 {
                queue.push_back(child);
            }
        }
    }
    if removed == indegree.len() {
        None
    } else {
        indegree
            .into_iter()
            .filter(|(_, d)| *d > 0)
            .map(|(id, _)| id)
            .min()
    }
}

/// Whether `target` is reachable from `from` over all edges.
pub(crate) fn reachable(graph_edges: &[Edge], from: NodeId, target: NodeId) -> bool {
    let mut out: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for e in graph_edges {
        out.entry(e.parent).or_default().push(e.child);
    }
    let mut stack = vec![from];
    let mut seen = HashSet::new();
    while let Some(cur) = stack.pop() {
        if cur == target {
            return true;
        }
        if seen.insert(cur) {
            stack.extend(out.get(&cur).into_iter().flatten().copied());
        }
    }
    false
}
