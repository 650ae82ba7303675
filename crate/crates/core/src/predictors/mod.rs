//! Sequence predictors: per-class discrete HMMs and a small LSTM.

pub mod hmm;
pub mod seqnet;

pub use hmm::{hmm_classify, hmm_fit, DiscreteHmm, HmmClassifier, HmmConfig, HmmFit};
pub use seqnet::{
    seqnet_train, BranchSpec, EpochLoss, Example, HeadKind, LossKind, ParamLayout, SeqInput, SeqNet,
    SeqNetCheckpoint, SeqNetSpec, TrainConfig, TrainOutcome,
};
