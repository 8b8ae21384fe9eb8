//! Joint training of the span parser and the remote classifier.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conversion::{graph_to_tree, tree_to_graph};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::evaluation::{score_corpus, F1Report};
use crate::graph::{Edge, NodeId, UccaGraph};
use crate::neural::{
    Gradients, Model, ModelConfig, Optimizer, OptimizerConfig, PretrainedEmbeddings, SentenceNet,
    Vocabs,
};
use crate::par::Execution;
use crate::pipeline::parse_corpus;
use crate::remote::{align_gold_remotes, enumerate_pairs, loss_remote};
use crate::span_parser::{collect_labels, loss_topdown};
use crate::tree::ConstituentTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs without a dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub model: ModelConfig,
    /// Word vectors in word2vec text format.
    pub pretrained: Option<PathBuf>,
    pub freeze_pretrained: bool,
    /// Per-token feature JSONL aligned with the (concatenated) training
    /// corpora, and one aligned with the dev corpus.
    pub train_features: Option<PathBuf>,
    pub dev_features: Option<PathBuf>,
    /// Rescale gradients whose global L2 norm exceeds this.
    pub clip_norm: Option<f64>,
    /// Stop as soon as dev averaged F1 reaches this value.
    pub target_f1: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 100,
            patience: 10,
            seed: 1,
            optimizer: OptimizerConfig::default(),
            model: ModelConfig::default(),
            pretrained: None,
            freeze_pretrained: false,
            train_features: None,
            dev_features: None,
            clip_norm: Some(5.0),
            target_f1: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "max_epochs and patience must be at least 1".into(),
            ));
        }
        if self.clip_norm.is_some_and(|c| c <= 0.0 || !c.is_finite()) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        self.model.validate()
    }
}

/// A gold graph with everything the losses need.
#[derive(Clone, Debug)]
pub struct Example {
    pub graph: UccaGraph,
    pub tree: ConstituentTree,
    /// Primary graph restored from `tree`; remote pairs refer to its nodes.
    pub restored: UccaGraph,
    pub marked: Vec<NodeId>,
    pub remotes: Vec<Edge>,
    pub external: Option<Vec<Vec<f64>>>,
}

impl Example {
    pub fn new(graph: &UccaGraph, external: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let tree = graph_to_tree(graph)?.tree;
        let (restored, marked) = tree_to_graph(&tree)?;
        let remotes = align_gold_remotes(graph, &restored)?;
        Ok(Example {
            graph: graph.clone(),
            tree,
            restored,
            marked,
            remotes,
            external,
        })
    }
}

/// Vocabularies collected from training examples.
pub fn build_vocabs(examples: &[Example], multilingual: bool) -> Result<Vocabs> {
    let mut v = Vocabs::default();
    for ex in examples {
        for t in &ex.graph.tokens {
            v.words.insert(&t.form);
            v.pos.insert(&t.pos);
            v.ner.insert(&t.ner);
            v.dep.insert(&t.dep);
        }
        if multilingual {
            if ex.graph.lang.is_empty() {
                return Err(Error::Config(
                    "multilingual training needs a language tag on every sentence".into(),
                ));
            }
            v.langs.insert(&ex.graph.lang);
        }
        collect_labels(&ex.tree, &mut v.labels)?;
        for e in ex.graph.remote_edges() {
            v.remote_labels.insert(&e.label);
        }
    }
    Ok(v)
}

/// The two loss terms of one sentence and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLosses {
    pub topdown: f64,
    pub remote: f64,
    pub joint: f64,
}

/// Which loss terms to backpropagate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTerms {
    Joint,
    TopdownOnly,
    RemoteOnly,
}

/// Losses of one example on one shared encoding; gradients of the selected
/// terms are added to `grads`.
pub fn example_loss(
    model: &Model,
    ex: &Example,
    terms: LossTerms,
    grads: &mut Gradients,
) -> Result<StepLosses> {
    let mut net = SentenceNet::new(
        model,
        &ex.graph.tokens,
        &ex.graph.lang,
        ex.external.as_deref(),
    )?;
    let topdown = if terms != LossTerms::RemoteOnly {
        loss_topdown(&mut net, &model.vocabs.labels, &ex.tree)?
    } else {
        0.0
    };
    let remote = if terms != LossTerms::TopdownOnly {
        let pairs = enumerate_pairs(&ex.restored, &ex.marked)?;
        loss_remote(&mut net, &pairs, &ex.remotes, &model.vocabs.remote_labels)?
    } else {
        0.0
    };
    let joint = topdown + remote;
    if !joint.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    net.backward(grads);
    Ok(StepLosses {
        topdown,
        remote,
        joint,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub topdown: f64,
    pub remote: f64,
    pub dev: F1Report,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best dev averaged F1.
    pub model: Model,
    pub best_epoch: usize,
    pub best_dev: F1Report,
    pub log: Vec<EpochLog>,
}

/// Read feature lines, if configured.
fn load_features(path: &Option<PathBuf>, count: usize) -> Result<Option<Vec<Vec<Vec<f64>>>>> {
    let Some(path) = path else { return Ok(None) };
    let lines: Vec<crate::corpus::FeatureLine> = crate::corpus::read_jsonl_file(path)?;
    if lines.len() != count {
        return Err(Error::Shape(format!(
            "{}: {} feature lines for {count} sentences",
            path.display(),
            lines.len()
        )));
    }
    Ok(Some(lines.into_iter().map(|l| l.vectors).collect()))
}

/// Train with per-sentence updates and dev-based model selection.
/// `on_epoch` sees every epoch's log entry as it is produced.
pub fn train(
    train: &[UccaGraph],
    dev: &[UccaGraph],
    config: &TrainConfig,
    exec: Execution,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let train_ext = load_features(&config.train_features, train.len())?;
    let dev_ext = load_features(&config.dev_features, dev.len())?;
    let mut model_config = config.model.clone();
    if train_ext.is_some() != (model_config.external_dim > 0) {
        return Err(Error::Config(
            "external_dim must be set exactly when training features are given".into(),
        ));
    }
    if let Some(ext) = train_ext
        .as_ref()
        .and_then(|e| e.first())
        .and_then(|s| s.first())
    {
        model_config.external_dim = ext.len();
    }
    model_config.freeze_pretrained = config.freeze_pretrained;

    let examples: Vec<Example> = train
        .iter()
        .enumerate()
        .map(|(i, g)| {
            Example::new(g, train_ext.as_ref().map(|e| e[i].clone()))
                .map_err(|e| Error::InvalidGraph(format!("training sentence {}: {e}", i + 1)))
        })
        .collect::<Result<_>>()?;
    let vocabs = build_vocabs(&examples, model_config.multilingual)?;
    let pretrained = config
        .pretrained
        .as_deref()
        .map(PretrainedEmbeddings::load)
        .transpose()?;
    let mut model = Model::new(model_config, vocabs, pretrained, config.seed)?;
    let mut optimizer = Optimizer::new(&config.optimizer, &model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let dev_sentences: Vec<Sentence> = dev.iter().map(Sentence::from).collect();

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grads = Gradients::zeros_like(&model.params);
    let mut best: Option<(Model, usize, F1Report)> = None;
    let mut stale = 0;
    let mut log = Vec::new();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut topdown, mut remote) = (0.0, 0.0, 0.0);
        for &i in &order {
            grads.zero();
            let step = example_loss(&model, &examples[i], LossTerms::Joint, &mut grads)?;
            debug_assert_eq!(step.joint, step.topdown + step.remote);
            loss += step.joint;
            topdown += step.topdown;
            remote += step.remote;
            if let Some(max) = config.clip_norm {
                let norm = grads.l2_norm();
                if norm > max {
                    grads.scale(max / norm);
                }
            }
            optimizer.step(&mut model.params, &grads)?;
        }
        let predicted = parse_corpus(&model, &dev_sentences, dev_ext.as_deref(), exec)?;
        let report = score_corpus(dev, &predicted, exec)?;
        let entry = EpochLog {
            epoch,
            loss,
            topdown,
            remote,
            dev: report,
        };
        on_epoch(&entry);
        log.push(entry);
        let improved = best
            .as_ref()
            .is_none_or(|(_, _, b)| report.averaged.f1 > b.averaged.f1);
        if improved {
            best = Some((model.clone(), epoch, report));
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= config.patience || config.target_f1.is_some_and(|t| report.averaged.f1 >= t) {
            break;
        }
    }
    let (model, best_epoch, best_dev) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_dev,
        log,
    })
}
