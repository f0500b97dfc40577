//! Weakly supervised cross-platform teenager detection.
//!
//! A source platform with a small amount of labelled data is used to train a
//! sentence encoder and classifier; the encoder is then adapted to an
//! unlabelled target platform through a discriminator game plus a KL loss
//! that keeps the adapted encoder consistent with the source encoder. A
//! lexicon-guided concentrator aligns input lengths and vocabulary across
//! platforms before encoding.
//!
//! Start with the runnable programs under `examples/`, one per capability.

pub mod adaptation;
pub mod cli;
pub mod concentrator;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod heads;
pub mod nn;
pub mod synthetic;

pub use error::{Error, Result};
