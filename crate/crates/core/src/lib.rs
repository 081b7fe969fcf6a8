//! Weight codecs for post-training quantization of convolutional networks.
//!
//! The crate bundles three groups of functionality:
//!
//! * bit-exact codecs: [`posit`] (including the normalized variant whose
//!   every format spans `[-1, 1]`) and the `Q1.f` [`fixed`] point format,
//! * a minimal CNN inference engine in [`nn`] that computes in `f64` over
//!   weights decoded from a codec,
//! * [`io`] for model manifests, float32 weight blobs and MNIST IDX files,
//!   plus the [`sweep`] driver that measures top-1 accuracy per codec and
//!   bit width.

pub mod error;
pub mod fixed;
pub mod io;
pub mod nn;
pub mod posit;
pub mod quantizer;
pub mod sweep;

pub use error::{Error, Result};
pub use fixed::{dequantize_fixed, quantize_fixed, FixedCode, FixedFormat};
pub use nn::{evaluate_top1, forward, ImageSet, Layer, Model, Padding, Tensor};
pub use posit::{
    decode_normalized, decode_posit, encode_normalized, encode_posit, maxpos, minpos, useed,
    DecodedPosit, PositCode, PositFormat,
};
pub use quantizer::{memory_reduction, quantize_model, quantize_tensor, Codec, QuantizationReport};
