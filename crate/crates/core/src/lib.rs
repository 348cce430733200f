//! Hierarchical EEG feature learning for phonological category decoding.
//!
//! Trials are bandpassed and mean-centred ([`signal`]), summarised as channel
//! cross-covariance matrices ([`covariance`]), encoded by parallel CNN and
//! LSTM networks whose penultimate activations are fused and compressed by a
//! deep autoencoder ([`networks`], built on [`tensor`]), and finally
//! classified by second-order gradient-boosted trees ([`gbt`]).
//! [`pipeline`] runs the whole hierarchy under holdout or
//! leave-one-subject-out evaluation.

pub mod error;
pub mod rng;
pub mod signal;
pub mod covariance;
pub mod tensor;
pub mod networks;
pub mod gbt;
pub mod config;
pub mod pipeline;
pub mod container;
pub mod features;
pub mod synth;
pub mod plot;
pub mod fsutil;

pub use error::{Error, Result};
