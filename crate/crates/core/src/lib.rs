//! Text-as-image input pipeline for pixel-based language models.
//!
//! Text is rasterised with a compiled-in bitmap font ([`raster`]), cut into
//! 16x16 grayscale patches under one of four strategies ([`render`]), counted
//! ([`stats`]), span-masked ([`masking`]) and fed to a small masked patch
//! autoencoder ([`model`]) whose hidden states can be analysed for embedding
//! geometry ([`analysis`]).
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the two
//! precisions the toolkit uses.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod masking;
pub mod model;
pub mod raster;
pub mod render;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use raster::{load_builtin_font, measure_text, raster_line, AdvanceMode, FontAtlas, Glyph, LineImage};
pub use render::{render, segment_word_bigrams, word_patch_spans, Patch, PatchSequence, RenderConfig, Strategy, WordSpan};

pub use analysis::EmbeddingDump;
pub use model::{Model, ModelConfig, Params};

/// Single-precision model parameters, used for training.
pub type Params32 = Params<f32>;
/// Double-precision model parameters, used for gradient checks.
pub type Params64 = Params<f64>;
pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;
pub type EmbeddingDump32 = EmbeddingDump<f32>;
pub type EmbeddingDump64 = EmbeddingDump<f64>;
