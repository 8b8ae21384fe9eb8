//! Token embedding, the stacked BiLSTM encoder, span representations and
//! the scoring heads built on top of them.

use crate::error::{Error, Result};
use crate::graph::Token;
use crate::neural::model::{LstmIds, MlpIds, Model};
use crate::neural::tape::{Tape, Var};

/// Top-layer LSTM outputs at every fencepost `0..=n`.
#[derive(Clone, Debug)]
pub struct Encoding {
    pub fwd: Vec<Var>,
    pub bwd: Vec<Var>,
}

impl Encoding {
    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.fwd.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.len() <= 1
    }
}

/// Per-token input vectors
/// `e_word ⊕ e_pos ⊕ e_ner ⊕ e_dep [⊕ e_pre] [⊕ ext] [⊕ e_lang]`.
pub fn embed(
    tape: &mut Tape<'_>,
    model: &Model,
    tokens: &[Token],
    lang: &str,
    external: Option<&[Vec<f64>]>,
) -> Result<Vec<Var>> {
    let config = &model.config;
    let ids = &model.ids;
    let vocabs = &model.vocabs;
    match external {
        Some(ext) if ext.len() != tokens.len() => {
            return Err(Error::Shape(format!(
                "{} external vectors for {} tokens",
                ext.len(),
                tokens.len()
            )))
        }
        Some(ext) => {
            if let Some(bad) = ext.iter().find(|v| v.len() != config.external_dim) {
                return Err(Error::Shape(format!(
                    "external feature width {} != configured {}",
                    bad.len(),
                    config.external_dim
                )));
            }
        }
        None if config.external_dim > 0 => {
            return Err(Error::Shape(format!(
                "model expects {}-wide external features",
                config.external_dim
            )))
        }
        None => {}
    }
    let lang_row = vocabs.langs.lookup(lang);
    let mut out = Vec::with_capacity(tokens.len());
    for (idx, token) in tokens.iter().enumerate() {
        let mut parts = Vec::new();
        if let Some(p) = ids.word {
            parts.push(tape.row(p, vocabs.words.lookup(&token.form)));
        }
        if let Some(p) = ids.pos {
            parts.push(tape.row(p, vocabs.pos.lookup(&token.pos)));
        }
        if let Some(p) = ids.ner {
            parts.push(tape.row(p, vocabs.ner.lookup(&token.ner)));
        }
        if let Some(p) = ids.dep {
            parts.push(tape.row(p, vocabs.dep.lookup(&token.dep)));
        }
        if let Some(p) = ids.pretrained {
            parts.push(tape.row(p, vocabs.pretrained.lookup(&token.form)));
        }
        if let Some(ext) = external {
            if config.external_dim > 0 {
                parts.push(tape.input(ext[idx].clone()));
            }
        }
        if let Some(p) = ids.lang {
            parts.push(tape.row(p, lang_row));
        }
        out.push(tape.concat(&parts));
    }
    Ok(out)
}

/// One LSTM step. Returns `(h, c)`.
fn lstm_step(
    tape: &mut Tape<'_>,
    cell: LstmIds,
    hidden: usize,
    x: Var,
    h: Var,
    c: Var,
) -> (Var, Var) {
    let input = tape.concat(&[x, h]);
    let gates = tape.affine(cell.w, Some(cell.b), input);
    let i_pre = tape.slice(gates, 0, hidden);
    let f_pre = tape.slice(gates, hidden, hidden);
    let g_pre = tape.slice(gates, 2 * hidden, hidden);
    let o_pre = tape.slice(gates, 3 * hidden, hidden);
    let i = tape.sigmoid(i_pre);
    let f = tape.sigmoid(f_pre);
    let g = tape.tanh(g_pre);
    let o = tape.sigmoid(o_pre);
    let keep = tape.mul(f, c);
    let write = tape.mul(i, g);
    let c_next = tape.add(keep, write);
    let squashed = tape.tanh(c_next);
    let h_next = tape.mul(o, squashed);
    (h_next, c_next)
}

/// Run one direction over `xs`, returning one output per input in input
/// order.
fn run_direction(
    tape: &mut Tape<'_>,
    cell: LstmIds,
    hidden: usize,
    xs: &[Var],
    reverse: bool,
) -> Vec<Var> {
    let mut h = tape.zeros(hidden);
    let mut c = tape.zeros(hidden);
    let mut out = vec![h; xs.len()];
    let order: Vec<usize> = if reverse {
        (0..xs.len()).rev().collect()
    } else {
        (0..xs.len()).collect()
    };
    for t in order {
        let (h_next, c_next) = lstm_step(tape, cell, hidden, xs[t], h, c);
        h = h_next;
        c = c_next;
        out[t] = h;
    }
    out
}

/// Stacked bidirectional LSTM. Fencepost outputs: `f_0` and `b_n` are the
/// zero initial states, `f_i` is the forward output after token `i` and
/// `b_i` the backward output after consuming tokens `n..=i+1`.
pub fn encode(tape: &mut Tape<'_>, model: &Model, xs: &[Var]) -> Encoding {
    assert!(!xs.is_empty(), "cannot encode an empty sentence");
    let hidden = model.config.lstm_hidden;
    let mut inputs = xs.to_vec();
    let mut fwd_out = Vec::new();
    let mut bwd_out = Vec::new();
    for (layer, [fwd, bwd]) in model.ids.lstm.iter().enumerate() {
        fwd_out = run_direction(tape, *fwd, hidden, &inputs, false);
        bwd_out = run_direction(tape, *bwd, hidden, &inputs, true);
        if layer + 1 < model.ids.lstm.len() {
            inputs = fwd_out
                .iter()
                .zip(&bwd_out)
                .map(|(&f, &b)| tape.concat(&[f, b]))
                .collect();
        }
    }
    let zero = tape.zeros(hidden);
    let mut fwd = vec![zero];
    fwd.extend(fwd_out);
    let mut bwd = bwd_out;
    bwd.push(zero);
    Encoding { fwd, bwd }
}

/// `(f_j - f_i) ⊕ (b_i - b_j)` for fenceposts `i < j`.
pub fn span_repr(tape: &mut Tape<'_>, enc: &Encoding, i: usize, j: usize) -> Result<Var> {
    if i >= j || j > enc.len() {
        return Err(Error::Shape(format!(
            "invalid span ({i}, {j}) for {} tokens",
            enc.len()
        )));
    }
    let f = tape.sub(enc.fwd[j], enc.fwd[i]);
    let b = tape.sub(enc.bwd[i], enc.bwd[j]);
    Ok(tape.concat(&[f, b]))
}

fn mlp(tape: &mut Tape<'_>, ids: MlpIds, x: Var) -> Var {
    let pre = tape.affine(ids.w1, Some(ids.b1), x);
    let hidden = tape.tanh(pre);
    tape.affine(ids.w2, Some(ids.b2), hidden)
}

/// Scores over the tree label vocabulary (index 0 is the empty label).
pub fn mlp_label(tape: &mut Tape<'_>, model: &Model, span: Var) -> Var {
    mlp(tape, model.ids.label, span)
}

/// Scalar split score of a span (a 1-element vector).
pub fn mlp_span(tape: &mut Tape<'_>, model: &Model, span: Var) -> Var {
    mlp(tape, model.ids.span, span)
}

/// Child-side projection for remote scoring.
pub fn remote_child(tape: &mut Tape<'_>, model: &Model, span: Var) -> Var {
    let (w, b) = model.ids.remote_child;
    let pre = tape.affine(w, Some(b), span);
    tape.tanh(pre)
}

/// Parent-side projection for remote scoring.
pub fn remote_parent(tape: &mut Tape<'_>, model: &Model, span: Var) -> Var {
    let (w, b) = model.ids.remote_parent;
    let pre = tape.affine(w, Some(b), span);
    tape.tanh(pre)
}

/// Biaffine remote label scores `[child; 1]^T W parent`.
pub fn biaffine(tape: &mut Tape<'_>, model: &Model, child: Var, parent: Var) -> Var {
    tape.biaffine(model.ids.biaffine, child, parent, model.remote_classes())
}
