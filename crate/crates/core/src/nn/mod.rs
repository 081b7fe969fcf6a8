//! CNN inference over `f64` tensors in `[channels, height, width]` layout.

mod model;
mod ops;
mod tensor;

pub use model::{
    evaluate_top1, forward, infer_shapes, Baseline, ImageSet, Layer, Model, Preprocessing,
};
pub use ops::{conv2d, dense, flatten, maxpool2d, relu, softmax, Padding};
pub use tensor::Tensor;
