//! Model manifests, weight blobs and MNIST datasets.

pub mod manifest;
pub mod mnist;

pub use manifest::{load_manifest, save_model, BlobRef, ModelManifest, TensorRef, SCHEMA_VERSION};
pub use mnist::{load_mnist, MnistDataset};
