//! JSONL corpora: one graph, tree, sentence or feature record per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Token, UccaGraph};
use crate::tree::{ConstituentTree, TreeJson};

/// Tokens of one sentence to be parsed. Graph lines also deserialize into
/// this (extra fields are ignored).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub lang: String,
}

impl From<&UccaGraph> for Sentence {
    fn from(g: &UccaGraph) -> Self {
        Sentence {
            tokens: g.tokens.clone(),
            lang: g.lang.clone(),
        }
    }
}

/// Per-token external feature vectors of one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureLine {
    pub vectors: Vec<Vec<f64>>,
}

/// Parse JSONL from a reader. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| Error::Json {
            line: idx + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(File::open(path)?))
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|e| Error::Parse(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_jsonl(BufWriter::new(File::create(path)?), items)
}

/// Graphs from a JSONL file. Every graph must validate.
pub fn read_graphs(path: &Path) -> Result<Vec<UccaGraph>> {
    let graphs: Vec<UccaGraph> = read_jsonl_file(path)?;
    for (idx, g) in graphs.iter().enumerate() {
        if let Some(v) = g.validate().into_iter().next() {
            return Err(Error::InvalidGraph(format!("line {}: {v}", idx + 1)));
        }
    }
    Ok(graphs)
}

/// Trees, one per line, either bracketed or in the JSON tree form.
pub fn read_trees<R: BufRead>(reader: R) -> Result<Vec<ConstituentTree>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let tree = if text.starts_with('{') {
            let json: TreeJson = serde_json::from_str(text).map_err(|source| Error::Json {
                line: idx + 1,
                source,
            })?;
            ConstituentTree::from_json(json)
        } else {
            ConstituentTree::from_sexpr(text)
        };
        let at = |m: String| format!("line {}: {m}", idx + 1);
        out.push(tree.map_err(|e| match e {
            Error::Parse(m) => Error::Parse(at(m)),
            Error::InvalidTree(m) => Error::InvalidTree(at(m)),
            other => other,
        })?);
    }
    Ok(out)
}
