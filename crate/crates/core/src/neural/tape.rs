//! Reverse-mode differentiation over vector-valued operations.
//!
//! A [`Tape`] records every operation of one forward pass against a read-only
//! [`ParamStore`]. Losses seed gradients on any recorded variable with
//! [`Tape::seed`]; [`Tape::backward`] then accumulates parameter gradients.

use crate::neural::params::{Gradients, ParamId, ParamStore};

/// Handle of a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Row {
        param: ParamId,
        row: usize,
    },
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Affine {
        w: ParamId,
        b: Option<ParamId>,
        x: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    /// `s[l] = [c; 1]^T W[:, l, :] p`, with `aux` holding `W p`.
    Biaffine {
        w: ParamId,
        child: Var,
        parent: Var,
        labels: usize,
    },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
    aux: Vec<f64>,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn dim(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        self.push_aux(op, value, Vec::new())
    }

    fn push_aux(&mut self, op: Op, value: Vec<f64>, aux: Vec<f64>) -> Var {
        self.nodes.push(Node { op, value, aux });
        Var(self.nodes.len() - 1)
    }

    /// A constant (no gradient flows into it).
    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Input, value)
    }

    pub fn zeros(&mut self, dim: usize) -> Var {
        self.input(vec![0.0; dim])
    }

    /// Row `row` of an embedding table.
    pub fn row(&mut self, param: ParamId, row: usize) -> Var {
        let value = self.params.get(param).row(row).to_vec();
        self.push(Op::Row { param, row }, value)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value = parts
            .iter()
            .flat_map(|p| self.nodes[p.0].value.iter().copied())
            .collect();
        self.push(Op::Concat(parts.to_vec()), value)
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let value = self.nodes[x.0].value[start..start + len].to_vec();
        self.push(Op::Slice { x, start }, value)
    }

    /// `W x + b`.
    pub fn affine(&mut self, w: ParamId, b: Option<ParamId>, x: Var) -> Var {
        let wt = self.params.get(w);
        let xv = &self.nodes[x.0].value;
        assert_eq!(
            wt.cols,
            xv.len(),
            "affine input width for {}",
            self.params.name(w)
        );
        let mut out = match b {
            Some(b) => self.params.get(b).data.clone(),
            None => vec![0.0; wt.rows],
        };
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(wt.row(r), xv);
        }
        self.push(Op::Affine { w, b, x }, out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x + y);
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x - y);
        self.push(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x * y);
        self.push(Op::Mul(a, b), value)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.iter().map(|&v| sigmoid(v)).collect();
        self.push(Op::Sigmoid(x), value)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        self.push(Op::Tanh(x), value)
    }

    /// Biaffine label scores. `w` has shape `((d_c + 1) * labels) x d_p`, row
    /// `a * labels + l` holding `W[a, l, :]`.
    pub fn biaffine(&mut self, w: ParamId, child: Var, parent: Var, labels: usize) -> Var {
        let wt = self.params.get(w);
        let c = &self.nodes[child.0].value;
        let p = &self.nodes[parent.0].value;
        assert_eq!(wt.cols, p.len(), "biaffine parent width");
        assert_eq!(wt.rows, (c.len() + 1) * labels, "biaffine child width");
        let projected: Vec<f64> = (0..wt.rows).map(|r| dot(wt.row(r), p)).collect();
        let mut scores = vec![0.0; labels];
        for (a, chunk) in projected.chunks(labels).enumerate() {
            let ca = c.get(a).copied().unwrap_or(1.0);
            for (s, u) in scores.iter_mut().zip(chunk) {
                *s += ca * u;
            }
        }
        self.push_aux(
            Op::Biaffine {
                w,
                child,
                parent,
                labels,
            },
            scores,
            projected,
        )
    }

    /// Add `g` to the gradient of component `idx` of `v`.
    pub fn seed(&mut self, v: Var, idx: usize, g: f64) {
        let dim = self.nodes[v.0].value.len();
        let slot = self.grad_slot(v, dim);
        slot[idx] += g;
    }

    /// Add a full gradient vector to `v`.
    pub fn seed_all(&mut self, v: Var, g: &[f64]) {
        let dim = self.nodes[v.0].value.len();
        let slot = self.grad_slot(v, dim);
        for (s, x) in slot.iter_mut().zip(g) {
            *s += x;
        }
    }

    fn grad_slot(&mut self, v: Var, dim: usize) -> &mut Vec<f64> {
        if self.grads.len() < self.nodes.len() {
            self.grads.resize(self.nodes.len(), Vec::new());
        }
        let slot = &mut self.grads[v.0];
        if slot.is_empty() {
            slot.resize(dim, 0.0);
        }
        slot
    }

    fn accumulate(&mut self, v: Var, g: &[f64]) {
        let dim = g.len();
        let slot = self.grad_slot(v, dim);
        for (s, x) in slot.iter_mut().zip(g) {
            *s += x;
        }
    }

    /// Propagate seeded gradients back to the parameters. Frozen parameters
    /// are skipped. Seeds are consumed.
    pub fn backward(&mut self, grads: &mut Gradients) {
        self.grads.resize(self.nodes.len(), Vec::new());
        for idx in (0..self.nodes.len()).rev() {
            let g = std::mem::take(&mut self.grads[idx]);
            if g.is_empty() || g.iter().all(|&x| x == 0.0) {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Input => {}
                Op::Row { param, row } => {
                    if !self.params.is_frozen(param) {
                        for (d, x) in grads.get_mut(param).row_mut(row).iter_mut().zip(&g) {
                            *d += x;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = self.dim(p);
                        let piece = g[offset..offset + len].to_vec();
                        self.accumulate(p, &piece);
                        offset += len;
                    }
                }
                Op::Slice { x, start } => {
                    let dim = self.dim(x);
                    let slot = self.grad_slot(x, dim);
                    for (k, gv) in g.iter().enumerate() {
                        slot[start + k] += gv;
                    }
                }
                Op::Affine { w, b, x } => {
                    let wt = self.params.get(w);
                    let xv = self.nodes[x.0].value.clone();
                    let mut dx = vec![0.0; wt.cols];
                    for (r, &gr) in g.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        for (d, wv) in dx.iter_mut().zip(wt.row(r)) {
                            *d += gr * wv;
                        }
                    }
                    if !self.params.is_frozen(w) {
                        let dw = grads.get_mut(w);
                        for (r, &gr) in g.iter().enumerate() {
                            if gr == 0.0 {
                                continue;
                            }
                            for (d, xv) in dw.row_mut(r).iter_mut().zip(&xv) {
                                *d += gr * xv;
                            }
                        }
                    }
                    if let Some(b) = b {
                        if !self.params.is_frozen(b) {
                            for (d, x) in grads.get_mut(b).data.iter_mut().zip(&g) {
                                *d += x;
                            }
                        }
                    }
                    self.accumulate(x, &dx);
                }
                Op::Add(a, b) => {
                    self.accumulate(a, &g);
                    self.accumulate(b, &g);
                }
                Op::Sub(a, b) => {
                    self.accumulate(a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    self.accumulate(b, &neg);
                }
                Op::Mul(a, b) => {
                    let da = zip_map(&g, &self.nodes[b.0].value, |x, y| x * y);
                    let db = zip_map(&g, &self.nodes[a.0].value, |x, y| x * y);
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::Sigmoid(x) => {
                    let dx = zip_map(&g, &self.nodes[idx].value, |gv, s| gv * s * (1.0 - s));
                    self.accumulate(x, &dx);
                }
                Op::Tanh(x) => {
                    let dx = zip_map(&g, &self.nodes[idx].value, |gv, t| gv * (1.0 - t * t));
                    self.accumulate(x, &dx);
                }
                Op::Biaffine {
                    w,
                    child,
                    parent,
                    labels,
                } => {
                    let wt = self.params.get(w);
                    let c = self.nodes[child.0].value.clone();
                    let p = self.nodes[parent.0].value.clone();
                    let projected = &self.nodes[idx].aux;
                    // d/dc[a] = sum_l g[l] * (W p)[a*L + l]
                    let dc: Vec<f64> = (0..c.len())
                        .map(|a| dot(&g, &projected[a * labels..(a + 1) * labels]))
                        .collect();
                    // d/d(W p)[a*L + l] = c1[a] * g[l]
                    let dproj: Vec<f64> = (0..wt.rows)
                        .map(|r| c.get(r / labels).copied().unwrap_or(1.0) * g[r % labels])
                        .collect();
                    let mut dp = vec![0.0; wt.cols];
                    for (r, &dr) in dproj.iter().enumerate() {
                        if dr == 0.0 {
                            continue;
                        }
                        for (d, wv) in dp.iter_mut().zip(wt.row(r)) {
                            *d += dr * wv;
                        }
                    }
                    if !self.params.is_frozen(w) {
                        let dw = grads.get_mut(w);
                        for (r, &dr) in dproj.iter().enumerate() {
                            if dr == 0.0 {
                                continue;
                            }
                            for (d, pv) in dw.row_mut(r).iter_mut().zip(&p) {
                                *d += dr * pv;
                            }
                        }
                    }
                    self.accumulate(child, &dc);
                    self.accumulate(parent, &dp);
                }
            }
        }
        self.grads.clear();
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}
