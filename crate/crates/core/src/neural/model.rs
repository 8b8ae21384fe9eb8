//! Model parameters, vocabularies and configuration.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::params::{ParamId, ParamStore, Tensor};

/// Width of the language embedding used in multilingual mode.
pub const LANG_DIM: usize = 50;

/// Label of the "no remote edge" class.
pub const NOT_PARENT: &str = "NOT-PARENT";

/// Reserved entry for unknown words, tags and languages.
pub const UNK: &str = "<unk>";

/// String-to-index map with one reserved entry at index 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(items: Vec<String>) -> Self {
        let index = items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Vocab { items, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.items
    }
}

impl Vocab {
    /// A vocabulary whose index 0 is `reserved`.
    pub fn with_reserved(reserved: &str) -> Self {
        Vocab::from(vec![reserved.to_owned()])
    }

    pub fn insert(&mut self, item: &str) -> usize {
        if let Some(&idx) = self.index.get(item) {
            return idx;
        }
        self.items.push(item.to_owned());
        self.index.insert(item.to_owned(), self.items.len() - 1);
        self.items.len() - 1
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    /// Index of `item`, falling back to the reserved entry.
    pub fn lookup(&self, item: &str) -> usize {
        self.get(item).unwrap_or(0)
    }

    pub fn item(&self, idx: usize) -> &str {
        &self.items[idx]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

/// All vocabularies a model needs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabs {
    pub words: Vocab,
    pub pos: Vocab,
    pub ner: Vocab,
    pub dep: Vocab,
    pub langs: Vocab,
    /// Collapsed tree labels; index 0 is the empty label.
    pub labels: Vocab,
    /// Remote edge labels; index 0 is `NOT-PARENT`.
    pub remote_labels: Vocab,
    /// Words of the pretrained table, if any.
    #[serde(default)]
    pub pretrained: Vocab,
}

impl Default for Vocabs {
    fn default() -> Self {
        let mut labels = Vocab::with_reserved("");
        labels.insert(crate::labels::ROOT);
        Vocabs {
            words: Vocab::with_reserved(UNK),
            pos: Vocab::with_reserved(UNK),
            ner: Vocab::with_reserved(UNK),
            dep: Vocab::with_reserved(UNK),
            langs: Vocab::with_reserved(UNK),
            labels,
            remote_labels: Vocab::with_reserved(NOT_PARENT),
            pretrained: Vocab::with_reserved(UNK),
        }
    }
}

/// Network dimensions and feature switches. A zero width disables a slice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub pos_dim: usize,
    pub ner_dim: usize,
    pub dep_dim: usize,
    pub multilingual: bool,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub mlp_hidden: usize,
    pub remote_dim: usize,
    /// Label and split heads share their hidden layer.
    pub share_span_hidden: bool,
    pub pretrained_dim: usize,
    pub freeze_pretrained: bool,
    pub external_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 100,
            pos_dim: 50,
            ner_dim: 50,
            dep_dim: 50,
            multilingual: false,
            lstm_hidden: 250,
            lstm_layers: 2,
            mlp_hidden: 250,
            remote_dim: 100,
            share_span_hidden: false,
            pretrained_dim: 0,
            freeze_pretrained: false,
            external_dim: 0,
        }
    }
}

impl ModelConfig {
    /// Width of the per-token input vector.
    pub fn input_dim(&self) -> usize {
        self.word_dim
            + self.pos_dim
            + self.ner_dim
            + self.dep_dim
            + self.pretrained_dim
            + self.external_dim
            + if self.multilingual { LANG_DIM } else { 0 }
    }

    /// Width of a span representation.
    pub fn span_dim(&self) -> usize {
        2 * self.lstm_hidden
    }

    pub fn validate(&self) -> Result<()> {
        if self.lstm_hidden == 0 || self.mlp_hidden == 0 || self.remote_dim == 0 {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.lstm_layers == 0 {
            return Err(Error::Config("at least one LSTM layer is required".into()));
        }
        if self.input_dim() == 0 {
            return Err(Error::Config("token input width is zero".into()));
        }
        Ok(())
    }
}

/// Weights of one LSTM direction. Gate rows are ordered input, forget,
/// candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmIds {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub struct MlpIds {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

#[derive(Clone, Debug)]
pub struct ModelIds {
    pub word: Option<ParamId>,
    pub pos: Option<ParamId>,
    pub ner: Option<ParamId>,
    pub dep: Option<ParamId>,
    pub lang: Option<ParamId>,
    pub pretrained: Option<ParamId>,
    /// `[forward, backward]` per layer.
    pub lstm: Vec<[LstmIds; 2]>,
    pub label: MlpIds,
    pub span: MlpIds,
    pub remote_child: (ParamId, ParamId),
    pub remote_parent: (ParamId, ParamId),
    pub biaffine: ParamId,
}

/// Pretrained word vectors in word2vec text format.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedEmbeddings {
    pub words: Vocab,
    pub table: Tensor,
}

impl PretrainedEmbeddings {
    /// Read `word v1 ... vk` lines. A leading `count dim` header line is
    /// skipped. Row 0 is a zero vector for unknown words.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = Vocab::with_reserved(UNK);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut dim = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values: std::result::Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
            let values =
                values.map_err(|e| Error::Parse(format!("embedding line {}: {e}", lineno + 1)))?;
            if lineno == 0 && values.len() == 1 && word.parse::<usize>().is_ok() {
                continue;
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::Parse(format!(
                        "embedding line {}: expected {d} values, found {}",
                        lineno + 1,
                        values.len()
                    )))
                }
                _ => {}
            }
            if words.get(word).is_some() {
                continue;
            }
            words.insert(word);
            rows.push(values);
        }
        let dim = dim.ok_or_else(|| Error::Parse("embedding file is empty".into()))?;
        let mut data = vec![0.0; dim];
        for row in rows {
            data.extend(row);
        }
        let table = Tensor::from_data(words.len(), dim, data)?;
        Ok(PretrainedEmbeddings { words, table })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn dim(&self) -> usize {
        self.table.cols
    }
}

/// Shared encoder plus the constituency and remote heads.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub vocabs: Vocabs,
    pub params: ParamStore,
    pub ids: ModelIds,
}

impl Model {
    /// Build a freshly initialized model.
    ///
    /// Matrices are Glorot-uniform, biases zero except the forget gate (+1),
    /// embeddings uniform in (-0.01, 0.01).
    pub fn new(
        mut config: ModelConfig,
        mut vocabs: Vocabs,
        pretrained: Option<PretrainedEmbeddings>,
        seed: u64,
    ) -> Result<Self> {
        if let Some(pre) = &pretrained {
            config.pretrained_dim = pre.dim();
            vocabs.pretrained = pre.words.clone();
        } else {
            config.pretrained_dim = 0;
        }
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();

        let embedding =
            |params: &mut ParamStore, name: &str, rows: usize, dim: usize, rng: &mut ChaCha8Rng| {
                (dim > 0).then(|| {
                    let mut t = Tensor::zeros(rows, dim);
                    t.fill_uniform(rng, 0.01);
                    params.add(name, t)
                })
            };
        let word = embedding(
            &mut params,
            "embed.word",
            vocabs.words.len(),
            config.word_dim,
            &mut rng,
        );
        let pos = embedding(
            &mut params,
            "embed.pos",
            vocabs.pos.len(),
            config.pos_dim,
            &mut rng,
        );
        let ner = embedding(
            &mut params,
            "embed.ner",
            vocabs.ner.len(),
            config.ner_dim,
            &mut rng,
        );
        let dep = embedding(
            &mut params,
            "embed.dep",
            vocabs.dep.len(),
            config.dep_dim,
            &mut rng,
        );
        let lang = if config.multilingual {
            embedding(
                &mut params,
                "embed.lang",
                vocabs.langs.len(),
                LANG_DIM,
                &mut rng,
            )
        } else {
            None
        };
        let pretrained = pretrained.map(|pre| {
            let id = params.add("embed.pretrained", pre.table);
            params.set_frozen(id, config.freeze_pretrained);
            id
        });

        let hidden = config.lstm_hidden;
        let mut lstm = Vec::new();
        let mut layer_in = config.input_dim();
        for layer in 0..config.lstm_layers {
            let mut dirs = Vec::new();
            for dir in ["fwd", "bwd"] {
                let mut w = Tensor::zeros(4 * hidden, layer_in + hidden);
                w.fill_glorot(&mut rng);
                let mut b = Tensor::zeros(4 * hidden, 1);
                b.data[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
                dirs.push(LstmIds {
                    w: params.add(format!("lstm.{layer}.{dir}.w"), w),
                    b: params.add(format!("lstm.{layer}.{dir}.b"), b),
                });
            }
            lstm.push([dirs[0], dirs[1]]);
            layer_in = 2 * hidden;
        }

        let span_dim = config.span_dim();
        let mlp = |params: &mut ParamStore,
                   name: &str,
                   hidden_ids: Option<(ParamId, ParamId)>,
                   out: usize,
                   rng: &mut ChaCha8Rng| {
            let (w1, b1) = hidden_ids.unwrap_or_else(|| {
                let mut w1 = Tensor::zeros(config.mlp_hidden, span_dim);
                w1.fill_glorot(rng);
                (
                    params.add(format!("{name}.w1"), w1),
                    params.add(format!("{name}.b1"), Tensor::zeros(config.mlp_hidden, 1)),
                )
            });
            let mut w2 = Tensor::zeros(out, config.mlp_hidden);
            w2.fill_glorot(rng);
            MlpIds {
                w1,
                b1,
                w2: params.add(format!("{name}.w2"), w2),
                b2: params.add(format!("{name}.b2"), Tensor::zeros(out, 1)),
            }
        };
        let label = mlp(&mut params, "label", None, vocabs.labels.len(), &mut rng);
        let shared = config.share_span_hidden.then_some((label.w1, label.b1));
        let span = mlp(&mut params, "span", shared, 1, &mut rng);

        let projection = |params: &mut ParamStore, name: &str, rng: &mut ChaCha8Rng| {
            let mut w = Tensor::zeros(config.remote_dim, span_dim);
            w.fill_glorot(rng);
            (
                params.add(format!("{name}.w"), w),
                params.add(format!("{name}.b"), Tensor::zeros(config.remote_dim, 1)),
            )
        };
        let remote_child = projection(&mut params, "remote.child", &mut rng);
        let remote_parent = projection(&mut params, "remote.parent", &mut rng);
        let mut w = Tensor::zeros(
            (config.remote_dim + 1) * vocabs.remote_labels.len(),
            config.remote_dim,
        );
        w.fill_glorot(&mut rng);
        let biaffine = params.add("remote.biaffine", w);

        Ok(Model {
            config,
            vocabs,
            params,
            ids: ModelIds {
                word,
                pos,
                ner,
                dep,
                lang,
                pretrained,
                lstm,
                label,
                span,
                remote_child,
                remote_parent,
                biaffine,
            },
        })
    }

    /// Rebuild a model around stored parameters, resolving ids by name.
    pub fn from_parts(config: ModelConfig, vocabs: Vocabs, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let need = |name: &str| {
            params
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
        };
        let opt = |name: &str, dim: usize| -> Result<Option<ParamId>> {
            if dim > 0 {
                need(name).map(Some)
            } else {
                Ok(None)
            }
        };
        let mut lstm = Vec::new();
        for layer in 0..config.lstm_layers {
            let dir = |d: &str| -> Result<LstmIds> {
                Ok(LstmIds {
                    w: need(&format!("lstm.{layer}.{d}.w"))?,
                    b: need(&format!("lstm.{layer}.{d}.b"))?,
                })
            };
            lstm.push([dir("fwd")?, dir("bwd")?]);
        }
        let mlp = |name: &str, shared: bool| -> Result<MlpIds> {
            let hidden = if shared { "label" } else { name };
            Ok(MlpIds {
                w1: need(&format!("{hidden}.w1"))?,
                b1: need(&format!("{hidden}.b1"))?,
                w2: need(&format!("{name}.w2"))?,
                b2: need(&format!("{name}.b2"))?,
            })
        };
        let ids = ModelIds {
            word: opt("embed.word", config.word_dim)?,
            pos: opt("embed.pos", config.pos_dim)?,
            ner: opt("embed.ner", config.ner_dim)?,
            dep: opt("embed.dep", config.dep_dim)?,
            lang: opt("embed.lang", if config.multilingual { LANG_DIM } else { 0 })?,
            pretrained: opt("embed.pretrained", config.pretrained_dim)?,
            lstm,
            label: mlp("label", false)?,
            span: mlp("span", config.share_span_hidden)?,
            remote_child: (need("remote.child.w")?, need("remote.child.b")?),
            remote_parent: (need("remote.parent.w")?, need("remote.parent.b")?),
            biaffine: need("remote.biaffine")?,
        };
        let mut params = params;
        if let Some(pre) = ids.pretrained {
            params.set_frozen(pre, config.freeze_pretrained);
        }
        let model = Model {
            config,
            vocabs,
            params,
            ids,
        };
        model.check_shapes()?;
        Ok(model)
    }

    /// Check that tensor shapes agree with the configuration and vocabularies.
    pub fn check_shapes(&self) -> Result<()> {
        let expect = |id: ParamId, rows: usize, cols: usize| {
            let t = self.params.get(id);
            if t.rows == rows && t.cols == cols {
                Ok(())
            } else {
                Err(Error::Shape(format!(
                    "{} is {}x{}, expected {rows}x{cols}",
                    self.params.name(id),
                    t.rows,
                    t.cols
                )))
            }
        };
        let c = &self.config;
        let v = &self.vocabs;
        for (id, rows, dim) in [
            (self.ids.word, v.words.len(), c.word_dim),
            (self.ids.pos, v.pos.len(), c.pos_dim),
            (self.ids.ner, v.ner.len(), c.ner_dim),
            (self.ids.dep, v.dep.len(), c.dep_dim),
            (self.ids.lang, v.langs.len(), LANG_DIM),
            (self.ids.pretrained, v.pretrained.len(), c.pretrained_dim),
        ] {
            if let Some(id) = id {
                expect(id, rows, dim)?;
            }
        }
        let h = c.lstm_hidden;
        let mut layer_in = c.input_dim();
        for layer in &self.ids.lstm {
            for dir in layer {
                expect(dir.w, 4 * h, layer_in + h)?;
                expect(dir.b, 4 * h, 1)?;
            }
            layer_in = 2 * h;
        }
        expect(self.ids.label.w1, c.mlp_hidden, c.span_dim())?;
        expect(self.ids.label.w2, v.labels.len(), c.mlp_hidden)?;
        expect(self.ids.span.w1, c.mlp_hidden, c.span_dim())?;
        expect(self.ids.span.w2, 1, c.mlp_hidden)?;
        expect(self.ids.remote_child.0, c.remote_dim, c.span_dim())?;
        expect(self.ids.remote_parent.0, c.remote_dim, c.span_dim())?;
        expect(
            self.ids.biaffine,
            (c.remote_dim + 1) * v.remote_labels.len(),
            c.remote_dim,
        )?;
        if !self.params.all_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    /// Number of remote classes, `NOT-PARENT` included.
    pub fn remote_classes(&self) -> usize {
        self.vocabs.remote_labels.len()
    }
}
