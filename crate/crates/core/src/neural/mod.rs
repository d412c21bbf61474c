//! Deterministic f64 tensor core with reverse-mode autodiff, and the two
//! transformer models built on it: an encoder-decoder decompiler and an
//! encoder-only classifier.

mod graph;
mod model;
mod params;
mod tensor;
mod train;

use thiserror::Error;

pub use graph::{Graph, Var};
pub use model::{
    attention_mask, classifier_logits, classifier_loss, cross_entropy_loss, decoder_forward, encoder_forward, gradient_check,
    multi_head_attention, positional_encoding, project_logits, seq2seq_loss, AttentionOutput, ClassifierModel, Dropout,
    GradCheckReport, Seq2SeqModel, TransformerConfig, GRAD_CHECK_FLOOR,
};
pub use params::{adam_step, AdamConfig, AdamState, Gradients, NamedTensor, ParamId, ParamStore};
pub use tensor::{softmax, Tensor};
pub use train::{
    classifier_dataset_loss, decode, decode_hypothesis, loss_csv, seq2seq_dataset_loss, train_classifier, train_seq2seq, Checkpoint,
    ClassExample, Hypothesis, LossPoint, ModelKind, Seq2SeqExample, StopReason, TrainReport, TrainSchedule,
};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence of {len} tokens exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("id {id} outside vocabulary of {vocab}")]
    IdOutOfRange { id: usize, vocab: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("no training examples")]
    EmptyDataset,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
