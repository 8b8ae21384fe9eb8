//! Tokens in, full graph out: encode, parse, restore, add remote edges.

use crate::conversion::tree_to_graph_lenient;
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::graph::{Token, UccaGraph};
use crate::neural::{Model, SentenceNet};
use crate::par::Execution;
use crate::remote::predict_remotes;
use crate::span_parser::parse_topdown;
use crate::tree::ConstituentTree;

/// The intermediate tree and the final graph of one sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parsed {
    pub tree: ConstituentTree,
    pub graph: UccaGraph,
}

pub fn parse_sentence(
    model: &Model,
    tokens: &[Token],
    lang: &str,
    external: Option<&[Vec<f64>]>,
) -> Result<Parsed> {
    if tokens.is_empty() {
        return Err(Error::InvalidGraph("cannot parse an empty sentence".into()));
    }
    let mut net = SentenceNet::new(model, tokens, lang, external)?;
    let tree = parse_topdown(&mut net, &model.vocabs.labels, tokens, lang)?;
    let graph = restore_in(&mut net, &tree)?;
    Ok(Parsed { tree, graph })
}

/// Restore a tree (leniently) and add remote edges predicted by `model`.
pub fn restore_with_remotes(
    model: &Model,
    tree: &ConstituentTree,
    external: Option<&[Vec<f64>]>,
) -> Result<UccaGraph> {
    if tree.tokens.is_empty() {
        return Err(Error::InvalidTree(
            "cannot restore an empty sentence".into(),
        ));
    }
    let mut net = SentenceNet::new(model, &tree.tokens, &tree.lang, external)?;
    restore_in(&mut net, tree)
}

fn restore_in(net: &mut SentenceNet<'_>, tree: &ConstituentTree) -> Result<UccaGraph> {
    let (mut graph, marked) = tree_to_graph_lenient(tree)?;
    let remotes = predict_remotes(net, &graph, &marked, &net.model.vocabs.remote_labels)?;
    graph.edges.extend(remotes);
    if let Some(v) = graph.validate().into_iter().next() {
        return Err(Error::InvalidGraph(format!(
            "pipeline produced an invalid graph: {v}"
        )));
    }
    Ok(graph)
}

/// Parse sentences in order. `external`, when given, is aligned with
/// `sentences`.
pub fn parse_corpus(
    model: &Model,
    sentences: &[Sentence],
    external: Option<&[Vec<Vec<f64>>]>,
    exec: Execution,
) -> Result<Vec<UccaGraph>> {
    if let Some(ext) = external {
        if ext.len() != sentences.len() {
            return Err(Error::Shape(format!(
                "{} feature lines for {} sentences",
                ext.len(),
                sentences.len()
            )));
        }
    }
    let indexed: Vec<usize> = (0..sentences.len()).collect();
    exec.map(&indexed, |&i| {
        let s = &sentences[i];
        parse_sentence(model, &s.tokens, &s.lang, external.map(|e| e[i].as_slice()))
            .map(|p| p.graph)
            .map_err(|e| Error::Parse(format!("sentence {}: {e}", i + 1)))
    })
    .into_iter()
    .collect()
}
