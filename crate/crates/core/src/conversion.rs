//! Graph to constituent tree conversion and its inverse.
//!
//! Forward direction:
//! 1. remote edges are dropped and the primary edge of every node that had a
//!    remote parent gets a `-remote` suffix;
//! 2. discontinuous nodes are made continuous by moving subtrees under them,
//!    marking one-level moves from the lowest common ancestor `-ancestor1`;
//! 3. edge labels are pushed onto child nodes, unary chains collapse into
//!    `+`-joined labels and the top node becomes `ROOT`.
//!
//! The inverse expands chains, moves labels back onto edges and reattaches
//! every `-ancestor1` node to its grandparent. Remote edges themselves are
//! recovered by [`crate::remote`].

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::graph::{is_contiguous, Edge, NodeId, UccaGraph};
use crate::labels::{self, LabelPart, ANCESTOR1_SUFFIX, REMOTE_SUFFIX, ROOT};
use crate::tree::{ConstituentTree, TreeNode};

/// A remote edge removed during conversion.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RemoteEdge {
    pub parent: NodeId,
    pub child: NodeId,
    pub label: String,
}

/// How far the reattached node travelled, relative to its new parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveClass {
    /// The old parent was the lowest common ancestor, `k` primary edges above
    /// the new parent.
    Ancestor(usize),
    /// The walk-up stopped below a discontinuous node instead of the LCA.
    Discontinuous,
}

/// One subtree move performed while removing discontinuities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoveRecord {
    pub moved: NodeId,
    pub from_parent: NodeId,
    pub to_parent: NodeId,
    pub class: MoveClass,
}

impl MoveRecord {
    /// Primary edges between the old and the new parent, when the old parent
    /// is an ancestor of the new one.
    pub fn ancestor_distance(&self) -> Option<usize> {
        match self.class {
            MoveClass::Ancestor(k) => Some(k),
            MoveClass::Discontinuous => None,
        }
    }

    /// Whether the move is encoded in the tree and can be undone.
    pub fn is_recoverable(&self) -> bool {
        self.class == MoveClass::Ancestor(1)
    }
}

/// Output of [`graph_to_tree`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConversionResult {
    pub tree: ConstituentTree,
    pub dropped_remote_edges: Vec<RemoteEdge>,
    pub moves: Vec<MoveRecord>,
    pub lossy_moves: usize,
}

/// Mutable primary tree used while rewriting.
#[derive(Clone, Debug)]
struct Work {
    n: usize,
    root: NodeId,
    nonterminals: Vec<NodeId>,
    parent: BTreeMap<NodeId, NodeId>,
    label: BTreeMap<NodeId, String>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
}

impl Work {
    fn from_graph(graph: &UccaGraph) -> Self {
        let mut work = Work {
            n: graph.len(),
            root: graph.root,
            nonterminals: graph.nonterminals.clone(),
            parent: BTreeMap::new(),
            label: BTreeMap::new(),
            children: BTreeMap::new(),
        };
        for edge in graph.primary_edges() {
            work.attach(edge.child, edge.parent, edge.label.clone());
        }
        work
    }

    fn is_terminal(&self, id: NodeId) -> bool {
        id.0 >= 1 && (id.0 as usize) <= self.n
    }

    fn attach(&mut self, child: NodeId, parent: NodeId, label: String) {
        self.parent.insert(child, parent);
        self.label.insert(child, label);
        self.children.entry(parent).or_default().push(child);
    }

    fn detach(&mut self, child: NodeId) {
        if let Some(parent) = self.parent.remove(&child) {
            if let Some(kids) = self.children.get_mut(&parent) {
                kids.retain(|&k| k != child);
            }
        }
    }

    fn children(&self, id: NodeId) -> &[NodeId] {
        self.children.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    fn depth(&self, id: NodeId) -> usize {
        let mut depth = 0;
        let mut cur = id;
        while let Some(&p) = self.parent.get(&cur) {
            depth += 1;
            cur = p;
            if depth > self.parent.len() {
                break;
            }
        }
        depth
    }

    fn ancestors(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(&p) = self.parent.get(&cur) {
            if path.len() > self.parent.len() + 1 {
                break;
            }
            path.push(p);
            cur = p;
        }
        path
    }

    fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        let above: HashSet<NodeId> = self.ancestors(a).into_iter().collect();
        self.ancestors(b)
            .into_iter()
            .find(|x| above.contains(x))
            .unwrap_or(self.root)
    }

    fn yields(&self) -> BTreeMap<NodeId, BTreeSet<usize>> {
        let mut out = BTreeMap::new();
        self.fill_yield(self.root, &mut out);
        out
    }

    fn fill_yield(&self, node: NodeId, out: &mut BTreeMap<NodeId, BTreeSet<usize>>) {
        let mut acc = BTreeSet::new();
        if self.is_terminal(node) {
            acc.insert(node.0 as usize);
        }
        for &child in self.children(node) {
            self.fill_yield(child, out);
            acc.extend(out[&child].iter().copied());
        }
        out.insert(node, acc);
    }

    /// Children ordered by their leftmost terminal.
    fn sorted_children(
        &self,
        id: NodeId,
        yields: &BTreeMap<NodeId, BTreeSet<usize>>,
    ) -> Vec<NodeId> {
        let mut kids = self.children(id).to_vec();
        kids.sort_by_key(|k| (yields.get(k).and_then(|y| y.first().copied()), *k));
        kids
    }

    fn to_graph(&self, template: &UccaGraph) -> UccaGraph {
        let yields = self.yields();
        let mut edges = Vec::new();
        let mut stack = vec![self.root];
        while let Some(node) = stack.pop() {
            let kids = self.sorted_children(node, &yields);
            for &k in &kids {
                edges.push(Edge::primary(node, k, self.label[&k].clone()));
            }
            stack.extend(kids.into_iter().rev());
        }
        UccaGraph {
            tokens: template.tokens.clone(),
            lang: template.lang.clone(),
            nonterminals: self.nonterminals.clone(),
            root: self.root,
            edges,
        }
    }
}

/// Number of (node, non-descendant terminal inside the node's span) pairs.
/// Zero exactly when every node is continuous.
pub fn discontinuity_measure(graph: &UccaGraph) -> usize {
    graph
        .yields()
        .values()
        .filter_map(|y| match (y.first(), y.last()) {
            (Some(&lo), Some(&hi)) => Some(hi - lo + 1 - y.len()),
            _ => None,
        })
        .sum()
}

/// Drop all remote edges and suffix the primary edge of every node that had
/// a remote parent with `-remote`.
pub fn strip_remotes(graph: &UccaGraph) -> (UccaGraph, Vec<RemoteEdge>) {
    let remotes: Vec<RemoteEdge> = graph
        .remote_edges()
        .map(|e| RemoteEdge {
            parent: e.parent,
            child: e.child,
            label: e.label.clone(),
        })
        .collect();
    let marked: HashSet<NodeId> = remotes.iter().map(|r| r.child).collect();
    let edges = graph
        .primary_edges()
        .map(|e| {
            let mut e = e.clone();
            if marked.contains(&e.child) {
                e.label.push_str(REMOTE_SUFFIX);
            }
            e
        })
        .collect();
    let stripped = UccaGraph {
        edges,
        ..graph.clone()
    };
    (stripped, remotes)
}

/// Move subtrees until no nonterminal is discontinuous.
///
/// The discontinuous node with the smallest leftmost terminal is processed
/// first, deepest first on ties. `B` is the leftmost terminal inside its span
/// that it does not dominate; starting at `B` we climb until the parent is
/// the LCA or a discontinuous node, and move that subtree under the node.
pub fn remove_discontinuities(graph: &UccaGraph) -> Result<(UccaGraph, Vec<MoveRecord>)> {
    if graph.remote_edges().next().is_some() {
        return Err(Error::InvalidGraph(
            "remote edges must be stripped before removing discontinuities".into(),
        ));
    }
    let mut work = Work::from_graph(graph);
    let node_count = graph.len() + graph.nonterminals.len();
    let limit = (node_count * node_count).max(1);
    let mut moves = Vec::new();

    loop {
        let yields = work.yields();
        let discontinuous: HashSet<NodeId> = work
            .nonterminals
            .iter()
            .copied()
            .filter(|id| yields.get(id).is_some_and(|y| !is_contiguous(y)))
            .collect();
        let Some(target) = discontinuous.iter().copied().min_by_key(|&id| {
            (
                yields[&id].first().copied(),
                std::cmp::Reverse(work.depth(id)),
                id,
            )
        }) else {
            break;
        };
        if moves.len() >= limit {
            return Err(Error::NonTermination(moves.len()));
        }

        let span = &yields[&target];
        let (lo, hi) = (*span.first().unwrap(), *span.last().unwrap());
        let gap = (lo..=hi)
            .find(|p| !span.contains(p))
            .expect("discontinuous yield has a gap");
        let gap_node = NodeId(gap as u32);
        let lca = work.lca(target, gap_node);

        let mut climber = gap_node;
        let old_parent = loop {
            let parent = work.parent[&climber];
            if parent == lca || discontinuous.contains(&parent) {
                break parent;
            }
            climber = parent;
        };

        let class = if old_parent == lca {
            MoveClass::Ancestor(work.depth(target) - work.depth(old_parent))
        } else {
            MoveClass::Discontinuous
        };
        let mut label = work.label[&climber].clone();
        if class == MoveClass::Ancestor(1) && !label.ends_with(ANCESTOR1_SUFFIX) {
            label.push_str(ANCESTOR1_SUFFIX);
        }
        work.detach(climber);
        work.attach(climber, target, label);
        moves.push(MoveRecord {
            moved: climber,
            from_parent: old_parent,
            to_parent: target,
            class,
        });
    }
    Ok((work.to_graph(graph), moves))
}

/// Turn a continuous, remote-free graph into a constituent tree.
pub fn push_labels(graph: &UccaGraph) -> Result<ConstituentTree> {
    if graph.remote_edges().next().is_some() {
        return Err(Error::InvalidGraph("graph still has remote edges".into()));
    }
    let work = Work::from_graph(graph);
    let yields = work.yields();
    for id in &work.nonterminals {
        if let Some(y) = yields.get(id) {
            if !is_contiguous(y) {
                return Err(Error::InvalidGraph(format!("node {id} is discontinuous")));
            }
        }
    }

    fn subtree(work: &Work, yields: &BTreeMap<NodeId, BTreeSet<usize>>, node: NodeId) -> TreeNode {
        if work.is_terminal(node) {
            return TreeNode::Leaf(node.0 as usize);
        }
        let mut parts = vec![work.label[&node].clone()];
        let mut cur = node;
        while let [only] = work.children(cur) {
            if work.is_terminal(*only) {
                break;
            }
            parts.push(work.label[only].clone());
            cur = *only;
        }
        let children = work
            .sorted_children(cur, yields)
            .into_iter()
            .map(|c| subtree(work, yields, c))
            .collect();
        TreeNode::Internal {
            label: parts.join("+"),
            children,
        }
    }

    let children = work
        .sorted_children(work.root, &yields)
        .into_iter()
        .map(|c| subtree(&work, &yields, c))
        .collect();
    Ok(ConstituentTree::new(
        graph.tokens.clone(),
        graph.lang.clone(),
        TreeNode::Internal {
            label: ROOT.to_owned(),
            children,
        },
    ))
}

/// Full forward conversion of a valid graph.
pub fn graph_to_tree(graph: &UccaGraph) -> Result<ConversionResult> {
    if let Some(v) = graph.validate().into_iter().next() {
        return Err(Error::InvalidGraph(v.0));
    }
    let (stripped, dropped_remote_edges) = strip_remotes(graph);
    let (continuous, moves) = remove_discontinuities(&stripped)?;
    let tree = push_labels(&continuous)?;
    let lossy_moves = moves.iter().filter(|m| !m.is_recoverable()).count();
    Ok(ConversionResult {
        tree,
        dropped_remote_edges,
        moves,
        lossy_moves,
    })
}

/// Restore a primary graph from a tree. Returns the graph (canonically
/// numbered, no remote edges, suffixes stripped) and the nodes that carried a
/// `-remote` suffix.
///
/// An `-ancestor1` node directly under `ROOT` is an error.
pub fn tree_to_graph(tree: &ConstituentTree) -> Result<(UccaGraph, Vec<NodeId>)> {
    tree.validate()?;
    restore(tree, false)
}

/// Like [`tree_to_graph`], but an `-ancestor1` mark that cannot be applied
/// (parent is `ROOT`, or the move would leave the parent empty) is ignored.
/// Used on parser output, which is not guaranteed to be well formed.
pub fn tree_to_graph_lenient(tree: &ConstituentTree) -> Result<(UccaGraph, Vec<NodeId>)> {
    tree.validate()?;
    restore(tree, true)
}

fn restore(tree: &ConstituentTree, lenient: bool) -> Result<(UccaGraph, Vec<NodeId>)> {
    let n = tree.len();
    let mut work = Work {
        n,
        root: NodeId(n as u32 + 1),
        nonterminals: vec![NodeId(n as u32 + 1)],
        parent: BTreeMap::new(),
        label: BTreeMap::new(),
        children: BTreeMap::new(),
    };
    let mut next = n as u32 + 2;
    let mut remote_marked = Vec::new();
    let mut lowered = Vec::new();

    // Preorder expansion of chains; `lowered` ends up top-down, left-to-right.
    fn expand(
        node: &TreeNode,
        parent: NodeId,
        work: &mut Work,
        next: &mut u32,
        remote_marked: &mut Vec<NodeId>,
        lowered: &mut Vec<NodeId>,
    ) {
        match node {
            TreeNode::Leaf(pos) => work.attach(NodeId(*pos as u32), parent, String::new()),
            TreeNode::Internal { label, children } => {
                let mut attach_to = parent;
                for LabelPart {
                    base,
                    remote,
                    ancestor1,
                } in labels::split_chain(label)
                {
                    let id = NodeId(*next);
                    *next += 1;
                    work.nonterminals.push(id);
                    work.attach(id, attach_to, base);
                    if remote {
                        remote_marked.push(id);
                    }
                    if ancestor1 {
                        lowered.push(id);
                    }
                    attach_to = id;
                }
                for child in children {
                    expand(child, attach_to, work, next, remote_marked, lowered);
                }
            }
        }
    }

    let root = work.root;
    for child in tree.root.children() {
        expand(
            child,
            root,
            &mut work,
            &mut next,
            &mut remote_marked,
            &mut lowered,
        );
    }

    for node in lowered {
        let parent = work.parent[&node];
        let grandparent = work.parent.get(&parent).copied();
        let Some(grandparent) = grandparent else {
            if lenient {
                continue;
            }
            return Err(Error::InvalidTree(format!(
                "{ANCESTOR1_SUFFIX} node directly under {ROOT} has no grandparent"
            )));
        };
        if work.children(parent).len() < 2 {
            if lenient {
                continue;
            }
            return Err(Error::InvalidTree(format!(
                "moving {ANCESTOR1_SUFFIX} node would leave its parent without children"
            )));
        }
        let label = work.label[&node].clone();
        work.detach(node);
        work.attach(node, grandparent, label);
    }

    let template = UccaGraph {
        tokens: tree.tokens.clone(),
        lang: tree.lang.clone(),
        nonterminals: Vec::new(),
        root,
        edges: Vec::new(),
    };
    let (graph, mapping) = work.to_graph(&template).canonicalize();
    let mut marked: Vec<NodeId> = remote_marked.iter().map(|id| mapping[id]).collect();
    marked.sort();
    Ok((graph, marked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{sample_graph, sample_node};
    use crate::graph::Token;

    fn chain_graph() -> UccaGraph {
        // 1-token graph: root -> H -> A -> token
        UccaGraph {
            tokens: vec![Token::new("x")],
            lang: String::new(),
            nonterminals: vec![NodeId(2), NodeId(3), NodeId(4)],
            root: NodeId(2),
            edges: vec![
                Edge::primary(NodeId(2), NodeId(3), "H"),
                Edge::primary(NodeId(3), NodeId(4), "A"),
                Edge::primary(NodeId(4), NodeId(1), ""),
            ],
        }
    }

    #[test]
    fn strip_marks_remote_children() {
        let (stripped, remotes) = strip_remotes(&sample_graph());
        assert_eq!(
            remotes,
            vec![RemoteEdge {
                parent: sample_node(3),
                child: sample_node(5),
                label: "A".into()
            }]
        );
        assert_eq!(
            stripped.primary_edge_into(sample_node(5)).unwrap().label,
            "A-remote"
        );
        assert_eq!(stripped.remote_edges().count(), 0);
    }

    #[test]
    fn strip_without_remotes_is_identity() {
        let g = chain_graph();
        let (stripped, remotes) = strip_remotes(&g);
        assert_eq!(stripped, g);
        assert!(remotes.is_empty());
    }

    #[test]
    fn two_remote_parents_get_one_suffix() {
        let mut g = sample_graph();
        g.edges
            .push(Edge::remote(sample_node(6), sample_node(7), "A"));
        g.edges
            .push(Edge::remote(sample_node(9), sample_node(7), "D"));
        let (stripped, remotes) = strip_remotes(&g);
        assert_eq!(
            stripped.primary_edge_into(sample_node(7)).unwrap().label,
            "L-remote"
        );
        assert_eq!(
            remotes.iter().filter(|r| r.child == sample_node(7)).count(),
            2
        );
    }

    #[test]
    fn sample_moves_match_worked_example() {
        let (stripped, _) = strip_remotes(&sample_graph());
        let (moved, moves) = remove_discontinuities(&stripped).unwrap();
        assert_eq!(
            moves,
            vec![
                MoveRecord {
                    moved: sample_node(2),
                    from_parent: sample_node(1),
                    to_parent: sample_node(3),
                    class: MoveClass::Ancestor(1),
                },
                MoveRecord {
                    moved: sample_node(7),
                    from_parent: sample_node(1),
                    to_parent: sample_node(3),
                    class: MoveClass::Ancestor(1),
                },
            ]
        );
        assert_eq!(
            moved.primary_edge_into(sample_node(2)).unwrap().label,
            "H-ancestor1"
        );
        assert_eq!(
            moved.primary_edge_into(sample_node(7)).unwrap().label,
            "L-ancestor1"
        );
        assert_eq!(discontinuity_measure(&moved), 0);
    }

    #[test]
    fn continuous_graph_needs_no_moves() {
        let g = chain_graph();
        let (out, moves) = remove_discontinuities(&g).unwrap();
        assert!(moves.is_empty());
        assert_eq!(out.edge_set(), g.edge_set());
    }

    #[test]
    fn two_level_move_is_lossy() {
        // root 5 -> H 6 -> P 7 {a, c}; 6 -> d; root -> L 8 -> A 9 {b}.
        // P is discontinuous and b hangs two edges above it.
        let tokens: Vec<Token> = ["a", "b", "c", "d"]
            .iter()
            .map(|f| Token::new(*f))
            .collect();
        let g = UccaGraph {
            tokens,
            lang: String::new(),
            nonterminals: (5..=9).map(NodeId).collect(),
            root: NodeId(5),
            edges: vec![
                Edge::primary(NodeId(5), NodeId(6), "H"),
                Edge::primary(NodeId(6), NodeId(7), "P"),
                Edge::primary(NodeId(7), NodeId(1), ""),
                Edge::primary(NodeId(7), NodeId(3), ""),
                Edge::primary(NodeId(6), NodeId(4), ""),
                Edge::primary(NodeId(5), NodeId(8), "L"),
                Edge::primary(NodeId(8), NodeId(9), "A"),
                Edge::primary(NodeId(9), NodeId(2), ""),
            ],
        };
        assert!(g.is_valid(), "{:?}", g.validate());
        let result = graph_to_tree(&g).unwrap();
        assert_eq!(result.lossy_moves, 1);
        assert_eq!(result.moves[0].class, MoveClass::Ancestor(2));
        assert_eq!(result.moves[0].moved, NodeId(8));
        let labels = result.tree.labels();
        assert!(labels.iter().all(|l| !l.contains("ancestor")), "{labels:?}");
        result.tree.validate().unwrap();
    }

    #[test]
    fn push_labels_collapses_unary_chain() {
        let tree = push_labels(&chain_graph()).unwrap();
        assert_eq!(tree.to_sexpr(), "(ROOT (H+A x))");
    }

    #[test]
    fn push_labels_single_labeled_token() {
        let g = UccaGraph {
            tokens: vec![Token::new("x")],
            lang: String::new(),
            nonterminals: vec![NodeId(2), NodeId(3)],
            root: NodeId(2),
            edges: vec![
                Edge::primary(NodeId(2), NodeId(3), "H"),
                Edge::primary(NodeId(3), NodeId(1), ""),
            ],
        };
        assert_eq!(push_labels(&g).unwrap().to_sexpr(), "(ROOT (H x))");
    }

    #[test]
    fn push_labels_rejects_discontinuity() {
        let (stripped, _) = strip_remotes(&sample_graph());
        assert!(matches!(
            push_labels(&stripped),
            Err(Error::InvalidGraph(_))
        ));
    }

    #[test]
    fn ancestor1_under_root_is_malformed() {
        let tree = ConstituentTree::new(
            vec![Token::new("a"), Token::new("b")],
            "",
            TreeNode::internal(
                ROOT,
                vec![
                    TreeNode::internal("H-ancestor1", vec![TreeNode::Leaf(1)]),
                    TreeNode::internal("A", vec![TreeNode::Leaf(2)]),
                ],
            ),
        );
        assert!(matches!(tree_to_graph(&tree), Err(Error::InvalidTree(_))));
        let (lenient, _) = tree_to_graph_lenient(&tree).unwrap();
        assert!(lenient.is_valid());
    }

    #[test]
    fn tree_without_suffixes_round_trips() {
        let g = chain_graph();
        let tree = graph_to_tree(&g).unwrap().tree;
        let (back, marked) = tree_to_graph(&tree).unwrap();
        assert!(marked.is_empty());
        assert!(back.same_structure(&g));
    }

    #[test]
    fn measure_counts_gaps() {
        let (stripped, _) = strip_remotes(&sample_graph());
        // node 3 spans 1..7 and misses 4 terminals; root and others are contiguous.
        assert_eq!(discontinuity_measure(&stripped), 4);
    }
}
