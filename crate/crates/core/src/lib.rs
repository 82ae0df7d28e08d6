//! Linear brain decoding and representation analysis for sentence encoders.
//!
//! The crate maps brain-activation matrices onto model sentence
//! representations with cross-validated ridge decoders, compares
//! representation spaces with RSA, measures syntactic content with structural
//! probes, and generates the scrambled and part-of-speech cloze corpora used
//! to fine-tune the encoders.

pub mod error;
pub mod matrixio;
pub mod decoder;
pub mod pca;
pub mod rng;
pub mod rsa;
pub mod stats;
pub mod embed;
pub mod probe;
pub mod corpusgen;

pub use error::{Error, Result};
pub use matrixio::{Matrix, RunManifest, SequenceSet};
