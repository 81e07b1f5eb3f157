//! Printed text line OCR engine.
//!
//! A from-scratch bidirectional LSTM recognizer with a CTC output layer:
//! page-to-line segmentation, line height normalization, column features,
//! training with a momentum optimizer, beam-search decoding, Unicode label
//! coding and edit-distance scoring. A deterministic synthetic line
//! generator provides desk-scale corpora for end-to-end verification.

pub mod blstm;
pub mod codec;
pub mod ctc;
pub mod error;
pub mod eval;
pub mod image;
pub mod lstm;
pub mod modelio;
pub mod numeric;
pub mod preproc;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use blstm::{BlstmGrads, BlstmModel};
pub use codec::LabelAlphabet;
pub use ctc::{CtcResult, LabelSeq};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use image::GrayImage;
pub use lstm::{LstmParams, LstmState, LstmTape};
pub use numeric::{Matrix, Vector};
pub use preproc::{FeatureSequence, LineBox};
pub use rng::Rng;
pub use synth::{GlyphAtlas, LineRecord};
pub use trainer::{EpochReport, TrainConfig};
