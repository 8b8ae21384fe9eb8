//! Small hand-built graphs shared by tests, examples and benches.

use crate::graph::{Edge, NodeId, Token, UccaGraph};

/// Id of the `k`-th nonterminal (1-based) of [`sample_graph`].
pub fn sample_node(k: u32) -> NodeId {
    NodeId(7 + k)
}

/// German sentence "`` lch ging umher und tastete ." with nine nonterminals.
///
/// Node 3 is discontinuous (it spans ``, tastete and .) and node 5 has a
/// remote parent 3 with label `A`.
pub fn sample_graph() -> UccaGraph {
    let tok = |form: &str, pos: &str| Token {
        form: form.into(),
        pos: pos.into(),
        ner: "O".into(),
        dep: String::new(),
    };
    let tokens = vec![
        tok("``", "$("),
        tok("lch", "PPER"),
        tok("ging", "VVFIN"),
        tok("umher", "ADV"),
        tok("und", "KON"),
        tok("tastete", "VVFIN"),
        tok(".", "$."),
    ];
    let n = sample_node;
    let t = |p: u32| NodeId(p);
    UccaGraph {
        tokens,
        lang: "de".into(),
        nonterminals: (1..=9).map(n).collect(),
        root: n(1),
        edges: vec![
            Edge::primary(n(1), n(2), "H"),
            Edge::primary(n(1), n(3), "H"),
            Edge::primary(n(1), n(7), "L"),
            Edge::primary(n(2), n(5), "A"),
            Edge::primary(n(2), n(6), "P"),
            Edge::primary(n(3), n(4), "U"),
            Edge::primary(n(3), n(8), "P"),
            Edge::primary(n(3), n(9), "U"),
            Edge::remote(n(3), n(5), "A"),
            Edge::primary(n(4), t(1), ""),
            Edge::primary(n(5), t(2), ""),
            Edge::primary(n(6), t(3), ""),
            Edge::primary(n(6), t(4), ""),
            Edge::primary(n(7), t(5), ""),
            Edge::primary(n(8), t(6), ""),
            Edge::primary(n(9), t(7), ""),
        ],
    }
}

/// Bracketed form of the tree that [`sample_graph`] converts to.
pub const SAMPLE_TREE: &str =
    "(ROOT (H (U ``) (H-ancestor1 (A-remote lch) (P ging umher)) (L-ancestor1 und) (P tastete) (U .)))";
