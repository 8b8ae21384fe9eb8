//! Differentiable building blocks: embeddings, the BiLSTM encoder, span
//! representations, MLP and biaffine scorers, optimizers and checkpoints.
//!
//! Everything runs in f64 on a per-sentence [`Tape`].

pub mod checkpoint;
pub mod encoder;
pub mod gradcheck;
pub mod model;
pub mod net;
pub mod optim;
pub mod params;
pub mod tape;


pub use checkpoint::{Checkpoint, TrainingSummary};
pub use encoder::{
    biaffine, embed, encode, mlp_label, mlp_span, remote_child, remote_parent, span_repr, Encoding,
};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use model::{
    Model, ModelConfig, PretrainedEmbeddings, Vocab, Vocabs, LANG_DIM, NOT_PARENT, UNK,
};
pub use net::SentenceNet;
pub use optim::{Optimizer, OptimizerConfig};
pub use params::{Gradients, ParamId, ParamStore, Tensor};
pub use tape::{Tape, Var};
