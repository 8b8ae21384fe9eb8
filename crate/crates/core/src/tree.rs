//! Ordered constituent trees over a token sequence.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, Token};
use crate::labels::{self, ROOT};

/// A node of a constituent tree. Leaves hold 1-based token positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TreeNode {
    Leaf(usize),
    Internal {
        label: String,
        children: Vec<TreeNode>,
    },
}

impl TreeNode {
    pub fn internal(label: impl Into<String>, children: Vec<TreeNode>) -> Self {
        TreeNode::Internal {
            label: label.into(),
            children,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            TreeNode::Leaf(_) => None,
            TreeNode::Internal { label, .. } => Some(label),
        }
    }

    pub fn children(&self) -> &[TreeNode] {
        match self {
            TreeNode::Leaf(_) => &[],
            TreeNode::Internal { children, .. } => children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf(_))
    }

    /// Token positions under this node, left to right.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            TreeNode::Leaf(pos) => out.push(*pos),
            TreeNode::Internal { children, .. } => {
                for child in children {
                    child.collect_leaves(out);
                }
            }
        }
    }

    /// Fencepost span `(i, j)` covering tokens `i+1..=j`.
    pub fn span(&self) -> (usize, usize) {
        match self {
            TreeNode::Leaf(pos) => (pos - 1, *pos),
            TreeNode::Internal { children, .. } => {
                let first = children.first().map_or((0, 0), TreeNode::span);
                let last = children.last().map_or((0, 0), TreeNode::span);
                (first.0, last.1)
            }
        }
    }

    /// Number of internal nodes in this subtree.
    pub fn internal_count(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Internal { children, .. } => {
                1 + children.iter().map(TreeNode::internal_count).sum::<usize>()
            }
        }
    }

    fn write_sexpr(&self, tokens: &[Token], out: &mut String) {
        match self {
            TreeNode::Leaf(pos) => {
                let form = tokens.get(pos - 1).map_or("", |t| t.form.as_str());
                escape_into(form, out);
            }
            TreeNode::Internal { label, children } => {
                out.push('(');
                out.push_str(label);
                for child in children {
                    out.push(' ');
                    child.write_sexpr(tokens, out);
                }
                out.push(')');
            }
        }
    }
}

/// A constituent tree whose root is labeled `ROOT`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstituentTree {
    pub tokens: Vec<Token>,
    pub lang: String,
    pub root: TreeNode,
}

/// Flattened view of an internal tree node, numbered in preorder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatNode {
    pub id: NodeId,
    pub label: String,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl ConstituentTree {
    pub fn new(tokens: Vec<Token>, lang: impl Into<String>, root: TreeNode) -> Self {
        ConstituentTree {
            tokens,
            lang: lang.into(),
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Check the tree invariants: `ROOT` at the top and only there, leaves
    /// equal to `1..=n` in order, no empty internal nodes, well-formed labels.
    pub fn validate(&self) -> Result<()> {
        match &self.root {
            TreeNode::Internal { label, .. } if label == ROOT => {}
            _ => return Err(Error::InvalidTree("root must be labeled ROOT".into())),
        }
        let leaves = self.root.leaves();
        let expected: Vec<usize> = (1..=self.len()).collect();
        if leaves != expected {
            return Err(Error::InvalidTree(format!(
                "leaf sequence {leaves:?} does not match tokens 1..={}",
                self.len()
            )));
        }
        fn check(node: &TreeNode, is_root: bool) -> Result<()> {
            if let TreeNode::Internal { label, children } = node {
                if children.is_empty() {
                    return Err(Error::InvalidTree(format!(
                        "node {label:?} has no children"
                    )));
                }
                if !is_root && !labels::matches_grammar(label) {
                    return Err(Error::InvalidTree(format!("malformed label {label:?}")));
                }
                if !is_root && labels::split_chain(label)[0].base == ROOT {
                    return Err(Error::InvalidTree("ROOT below the top node".into()));
                }
                for child in children {
                    check(child, false)?;
                }
            }
            Ok(())
        }
        check(&self.root, true)
    }

    /// Bracketed form, e.g. `(ROOT (H (U ``) (P tastete)))`. Tokens escape
    /// parentheses, backslash and whitespace with a backslash.
    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        self.root.write_sexpr(&self.tokens, &mut out);
        out
    }

    /// Parse the bracketed form. Only token forms are recovered.
    pub fn from_sexpr(input: &str) -> Result<Self> {
        let atoms = tokenize_sexpr(input)?;
        let mut pos = 0;
        let mut tokens = Vec::new();
        let root = parse_node(&atoms, &mut pos, &mut tokens)?;
        if pos != atoms.len() {
            return Err(Error::Parse("trailing input after tree".into()));
        }
        if root.is_leaf() {
            return Err(Error::Parse("tree must start with '('".into()));
        }
        Ok(ConstituentTree::new(tokens, "", root))
    }

    /// Internal nodes in preorder, numbered from `n + 1`.
    pub fn flat_nodes(&self) -> Vec<FlatNode> {
        fn walk(
            node: &TreeNode,
            parent: Option<NodeId>,
            next: &mut u32,
            out: &mut Vec<FlatNode>,
        ) -> NodeId {
            match node {
                TreeNode::Leaf(pos) => NodeId(*pos as u32),
                TreeNode::Internal { label, children } => {
                    let id = NodeId(*next);
                    *next += 1;
                    let slot = out.len();
                    out.push(FlatNode {
                        id,
                        label: label.clone(),
                        parent,
                        children: Vec::new(),
                    });
                    let kids = children
                        .iter()
                        .map(|c| walk(c, Some(id), next, out))
                        .collect();
                    out[slot].children = kids;
                    id
                }
            }
        }
        let mut out = Vec::new();
        let mut next = self.len() as u32 + 1;
        walk(&self.root, None, &mut next, &mut out);
        out
    }

    /// Token positions under the node numbered `id` (see [`flat_nodes`]).
    ///
    /// [`flat_nodes`]: ConstituentTree::flat_nodes
    pub fn yield_of(&self, id: NodeId) -> Result<BTreeSet<usize>> {
        if id.0 >= 1 && (id.0 as usize) <= self.len() {
            return Ok(BTreeSet::from([id.0 as usize]));
        }
        let mut next = self.len() as u32 + 1;
        fn find(node: &TreeNode, id: NodeId, next: &mut u32) -> Option<Vec<usize>> {
            if let TreeNode::Internal { children, .. } = node {
                if *next == id.0 {
                    return Some(node.leaves());
                }
                *next += 1;
                for child in children {
                    if let Some(found) = find(child, id, next) {
                        return Some(found);
                    }
                }
            }
            None
        }
        find(&self.root, id, &mut next)
            .map(|leaves| leaves.into_iter().collect())
            .ok_or(Error::UnknownNode(id))
    }

    /// Labels of all internal nodes in preorder.
    pub fn labels(&self) -> Vec<String> {
        self.flat_nodes().into_iter().map(|n| n.label).collect()
    }

    pub fn to_json(&self) -> TreeJson {
        let flat = self.flat_nodes();
        TreeJson {
            tokens: self.tokens.clone(),
            lang: self.lang.clone(),
            nodes: flat
                .iter()
                .map(|n| TreeJsonNode {
                    id: n.id,
                    label: n.label.clone(),
                })
                .collect(),
            root: flat.first().map_or(NodeId(0), |n| n.id),
            edges: flat
                .iter()
                .flat_map(|n| {
                    n.children.iter().map(move |&c| TreeJsonEdge {
                        parent: n.id,
                        child: c,
                    })
                })
                .collect(),
        }
    }

    pub fn from_json(json: TreeJson) -> Result<Self> {
        use std::collections::HashMap;
        let n = json.tokens.len() as u32;
        let labels: HashMap<NodeId, String> =
            json.nodes.into_iter().map(|n| (n.id, n.label)).collect();
        let mut children: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for e in &json.edges {
            children.entry(e.parent).or_default().push(e.child);
        }
        fn build(
            id: NodeId,
            n: u32,
            labels: &HashMap<NodeId, String>,
            children: &HashMap<NodeId, Vec<NodeId>>,
            depth: usize,
        ) -> Result<TreeNode> {
            if depth > labels.len() + 1 {
                return Err(Error::InvalidTree("cycle in tree edges".into()));
            }
            if id.0 >= 1 && id.0 <= n {
                return Ok(TreeNode::Leaf(id.0 as usize));
            }
            let label = labels.get(&id).ok_or(Error::UnknownNode(id))?.clone();
            let mut kids = Vec::new();
            for &c in children.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                kids.push(build(c, n, labels, children, depth + 1)?);
            }
            kids.sort_by_key(TreeNode::span);
            Ok(TreeNode::Internal {
                label,
                children: kids,
            })
        }
        let root = build(json.root, n, &labels, &children, 0)?;
        Ok(ConstituentTree::new(json.tokens, json.lang, root))
    }
}

impl fmt::Display for ConstituentTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sexpr())
    }
}

/// JSONL form of a tree, mirroring the graph format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeJson {
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub lang: String,
    pub nodes: Vec<TreeJsonNode>,
    pub root: NodeId,
    pub edges: Vec<TreeJsonEdge>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeJsonNode {
    pub id: NodeId,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeJsonEdge {
    pub parent: NodeId,
    pub child: NodeId,
}

fn escape_into(form: &str, out: &mut String) {
    for c in form.chars() {
        if c == '(' || c == ')' || c == '\\' || c.is_whitespace() {
            out.push('\\');
        }
        out.push(c);
    }
}

#[derive(Debug, PartialEq)]
enum Atom {
    Open,
    Close,
    Word(String),
}

fn tokenize_sexpr(input: &str) -> Result<Vec<Atom>> {
    let mut atoms = Vec::new();
    let mut chars = input.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                atoms.push(Atom::Open);
            }
            ')' => {
                chars.next();
                atoms.push(Atom::Close);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '(' || c == ')' || c.is_whitespace() {
                        break;
                    }
                    chars.next();
                    if c == '\\' {
                        match chars.next() {
                            Some(escaped) => word.push(escaped),
                            None => return Err(Error::Parse("dangling escape".into())),
                        }
                    } else {
                        word.push(c);
                    }
                }
                atoms.push(Atom::Word(word));
            }
        }
    }
    Ok(atoms)
}

fn parse_node(atoms: &[Atom], pos: &mut usize, tokens: &mut Vec<Token>) -> Result<TreeNode> {
    match atoms.get(*pos) {
        Some(Atom::Open) => {
            *pos += 1;
            let label = match atoms.get(*pos) {
                Some(Atom::Word(w)) => w.clone(),
                _ => return Err(Error::Parse("expected label after '('".into())),
            };
            *pos += 1;
            let mut children = Vec::new();
            loop {
                match atoms.get(*pos) {
                    Some(Atom::Close) => {
                        *pos += 1;
                        break;
                    }
                    Some(_) => children.push(parse_node(atoms, pos, tokens)?),
                    None => return Err(Error::Parse("unbalanced parentheses".into())),
                }
            }
            Ok(TreeNode::Internal { label, children })
        }
        Some(Atom::Word(w)) => {
            *pos += 1;
            tokens.push(Token::new(w.clone()));
            Ok(TreeNode::Leaf(tokens.len()))
        }
        Some(Atom::Close) => Err(Error::Parse("unexpected ')'".into())),
        None => Err(Error::Parse("unexpected end of input".into())),
    }
}
