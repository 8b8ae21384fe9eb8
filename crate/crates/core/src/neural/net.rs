//! One sentence's computation graph with cached span quantities.

use std::collections::HashMap;

use crate::error::Result;
use crate::graph::Token;
use crate::neural::encoder::{self, Encoding};
use crate::neural::model::Model;
use crate::neural::params::Gradients;
use crate::neural::tape::{Tape, Var};

/// Embeds and encodes a sentence once; span representations and head
/// outputs are built lazily and shared between the parser and the remote
/// classifier.
pub struct SentenceNet<'p> {
    pub tape: Tape<'p>,
    pub model: &'p Model,
    pub enc: Encoding,
    reprs: HashMap<(usize, usize), Var>,
    labels: HashMap<(usize, usize), Var>,
    splits: HashMap<(usize, usize), Var>,
    children: HashMap<(usize, usize), Var>,
    parents: HashMap<(usize, usize), Var>,
}

impl<'p> SentenceNet<'p> {
    pub fn new(
        model: &'p Model,
        tokens: &[Token],
        lang: &str,
        external: Option<&[Vec<f64>]>,
    ) -> Result<Self> {
        let mut tape = Tape::new(&model.params);
        let xs = encoder::embed(&mut tape, model, tokens, lang, external)?;
        let enc = encoder::encode(&mut tape, model, &xs);
        Ok(SentenceNet {
            tape,
            model,
            enc,
            reprs: HashMap::new(),
            labels: HashMap::new(),
            splits: HashMap::new(),
            children: HashMap::new(),
            parents: HashMap::new(),
        })
    }

    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.enc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.enc.is_empty()
    }

    pub fn repr(&mut self, i: usize, j: usize) -> Result<Var> {
        if let Some(&v) = self.reprs.get(&(i, j)) {
            return Ok(v);
        }
        let v = encoder::span_repr(&mut self.tape, &self.enc, i, j)?;
        self.reprs.insert((i, j), v);
        Ok(v)
    }

    pub fn label_var(&mut self, i: usize, j: usize) -> Result<Var> {
        if let Some(&v) = self.labels.get(&(i, j)) {
            return Ok(v);
        }
        let r = self.repr(i, j)?;
        let v = encoder::mlp_label(&mut self.tape, self.model, r);
        self.labels.insert((i, j), v);
        Ok(v)
    }

    pub fn split_var(&mut self, i: usize, j: usize) -> Result<Var> {
        if let Some(&v) = self.splits.get(&(i, j)) {
            return Ok(v);
        }
        let r = self.repr(i, j)?;
        let v = encoder::mlp_span(&mut self.tape, self.model, r);
        self.splits.insert((i, j), v);
        Ok(v)
    }

    /// Remote label scores for a child span under a candidate parent span.
    pub fn remote_var(&mut self, child: (usize, usize), parent: (usize, usize)) -> Result<Var> {
        let c = match self.children.get(&child) {
            Some(&v) => v,
            None => {
                let r = self.repr(child.0, child.1)?;
                let v = encoder::remote_child(&mut self.tape, self.model, r);
                self.children.insert(child, v);
                v
            }
        };
        let p = match self.parents.get(&parent) {
            Some(&v) => v,
            None => {
                let r = self.repr(parent.0, parent.1)?;
                let v = encoder::remote_parent(&mut self.tape, self.model, r);
                self.parents.insert(parent, v);
                v
            }
        };
        Ok(encoder::biaffine(&mut self.tape, self.model, c, p))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        self.tape.value(v)
    }

    pub fn backward(&mut self, grads: &mut Gradients) {
        self.tape.backward(grads);
    }
}
