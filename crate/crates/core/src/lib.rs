//! Kinemes: a compact vocabulary of elementary head motions.
//!
//! Head-pose angle series are cut into short overlapping windows, factored
//! with non-negative matrix factorization and clustered with a Gaussian
//! mixture; each cluster becomes a kineme. Videos are then encoded as kineme
//! sequences, combined with dominant facial action units, and fed to HMM and
//! LSTM predictors of personality and interview traits.
//!
//! ```no_run
//! use kineme::{encode_series, learn_kinemes, HeadPoseSeries, KinemeConfig};
//!
//! # fn corpus() -> Vec<HeadPoseSeries> { unimplemented!() }
//! let videos = corpus();
//! let codebook = learn_kinemes(&videos, &KinemeConfig::default())?;
//! let seq = encode_series(&videos[0], &codebook)?;
//! println!("{:?}", seq.symbols);
//! # Ok::<(), kineme::Error>(())
//! ```

// NaN-rejecting guards read more plainly as `!(x > 0.0)`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action_units;
pub mod analytics;
pub mod codebook;
pub mod error;
pub mod factorization;
pub mod mixture;
pub mod pipeline;
pub mod pose;
pub mod predictors;

pub use action_units::{dominant_au_sequence, AUFrameTrack, AUSequence, AU_CODES, AU_COUNT};
pub use codebook::{encode_many, encode_series, kineme_trajectories, learn_kinemes, Codebook, KinemeConfig, KinemeSequence};
pub use error::{Error, ErrorClass, Result};
pub use factorization::{nmf_fit, nnls_project, FactorPair, NmfConfig};
pub use mixture::{gmm_fit, CovarianceType, GaussianMixture, GmmConfig};
pub use pose::{segment_series, stack_and_shift, ChannelOffsets, HeadPoseSeries, SegmentMatrix, WindowSpec};
