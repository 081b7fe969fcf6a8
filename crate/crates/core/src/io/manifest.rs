//! JSON model manifests with little-endian float32 weight blobs.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "lenet",
//!   "input_shape": [1, 28, 28],
//!   "class_count": 10,
//!   "preprocessing": { "pixel_divisor": 255.0 },
//!   "layers": [ { "kind": "conv2d", "weight": "conv1.weight", "bias": "conv1.bias",
//!                 "stride": 1, "padding": "valid" }, ... , { "kind": "softmax" } ],
//!   "blobs": [ { "file": "lenet.bin",
//!                "tensors": [ { "name": "conv1.weight", "shape": [20, 1, 5, 5], "offset": 0 } ] } ],
//!   "baseline": { "dataset": "mnist-t10k", "images": 10000, "top1": 0.99 }
//! }
//! ```
//!
//! Blob paths are relative to the manifest. Offsets are in bytes, and each
//! blob must be exactly `4 *` the element count of its tensors long.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Baseline, Layer, Model, Preprocessing, Tensor};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub schema_version: u32,
    pub name: String,
    pub input_shape: Vec<usize>,
    pub class_count: usize,
    pub preprocessing: Preprocessing,
    pub layers: Vec<Layer>,
    pub blobs: Vec<BlobRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Baseline>,
    /// Free-form export metadata, carried through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobRef {
    pub file: String,
    pub tensors: Vec<TensorRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRef {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: u64,
}

struct Ctx<'a> {
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, field: impl Into<String>, message: impl Into<String>) -> Error {
        Error::Load {
            path: self.path.to_path_buf(),
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Parses and validates a manifest and loads its weight blobs.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let manifest: ModelManifest = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let source = e.into_inner();
        if field == "." || source.is_syntax() || source.is_eof() {
            Error::Json {
                path: path.to_path_buf(),
                source,
            }
        } else {
            Error::Load {
                path: path.to_path_buf(),
                field,
                message: source.to_string(),
            }
        }
    })?;
    de.end().map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest_to_model(&manifest, path, |file| {
        let blob_path = base.join(file);
        fs::read(&blob_path).map_err(|e| Error::io(blob_path, e))
    })
}

/// Builds a model from an already parsed manifest. `read_blob` resolves a
/// blob file name to its bytes; `path` only labels errors.
pub fn manifest_to_model<F>(
    manifest: &ModelManifest,
    path: &Path,
    mut read_blob: F,
) -> Result<Model>
where
    F: FnMut(&str) -> Result<Vec<u8>>,
{
    let ctx = Ctx { path };
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(ctx.err(
            "schema_version",
            format!(
                "unsupported version {} (expected {SCHEMA_VERSION})",
                manifest.schema_version
            ),
        ));
    }
    if manifest.input_shape.is_empty() || manifest.input_shape.contains(&0) {
        return Err(ctx.err(
            "input_shape",
            format!("{:?} is not a valid shape", manifest.input_shape),
        ));
    }
    if manifest.class_count == 0 {
        return Err(ctx.err("class_count", "must be positive"));
    }
    let divisor = manifest.preprocessing.pixel_divisor;
    if !(divisor.is_finite() && divisor > 0.0) {
        return Err(ctx.err(
            "preprocessing.pixel_divisor",
            format!("{divisor} is not a positive number"),
        ));
    }
    if let Some(baseline) = &manifest.baseline {
        if !(0.0..=1.0).contains(&baseline.top1) {
            return Err(ctx.err(
                "baseline.top1",
                format!("{} is not a fraction", baseline.top1),
            ));
        }
    }

    let mut params = BTreeMap::new();
    for (b, blob) in manifest.blobs.iter().enumerate() {
        let bytes = read_blob(&blob.file)?;
        let declared: u64 = blob
            .tensors
            .iter()
            .map(|t| 4 * numel(&t.shape) as u64)
            .sum();
        if bytes.len() as u64 != declared {
            return Err(ctx.err(
                format!("blobs[{b}].file"),
                format!(
                    "`{}` is {} bytes but its tensors declare {declared}",
                    blob.file,
                    bytes.len()
                ),
            ));
        }
        let mut spans: Vec<(u64, u64, usize)> = Vec::with_capacity(blob.tensors.len());
        for (t, tensor) in blob.tensors.iter().enumerate() {
            let field = format!("blobs[{b}].tensors[{t}]");
            if tensor.shape.is_empty() || tensor.shape.contains(&0) {
                return Err(ctx.err(
                    format!("{field}.shape"),
                    format!(
                        "tensor `{}` has invalid shape {:?}",
                        tensor.name, tensor.shape
                    ),
                ));
            }
            let len = 4 * numel(&tensor.shape) as u64;
            if tensor.offset % 4 != 0 || tensor.offset + len > bytes.len() as u64 {
                return Err(ctx.err(
                    format!("{field}.offset"),
                    format!(
                        "tensor `{}` at byte {} with {len} bytes does not fit blob `{}`",
                        tensor.name, tensor.offset, blob.file
                    ),
                ));
            }
            spans.push((tensor.offset, tensor.offset + len, t));
            let start = tensor.offset as usize;
            let data = bytes[start..start + len as usize]
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect::<Vec<_>>();
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(ctx.err(
                    field,
                    format!("tensor `{}` element {i} is not finite", tensor.name),
                ));
            }
            let value = Tensor::new(tensor.shape.clone(), data)?;
            if params.insert(tensor.name.clone(), value).is_some() {
                return Err(ctx.err(
                    format!("{field}.name"),
                    format!("tensor `{}` is declared twice", tensor.name),
                ));
            }
        }
        spans.sort_unstable();
        for pair in spans.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(ctx.err(
                    format!("blobs[{b}].tensors[{}].offset", pair[1].2),
                    "tensor overlaps another tensor",
                ));
            }
        }
    }

    for (i, layer) in manifest.layers.iter().enumerate() {
        for name in layer.parameters() {
            if !params.contains_key(name) {
                return Err(ctx.err(
                    format!("layers[{i}]"),
                    format!("references tensor `{name}` which no blob declares"),
                ));
            }
        }
    }

    let mut model = Model::new(
        manifest.name.clone(),
        manifest.input_shape.clone(),
        manifest.class_count,
        manifest.layers.clone(),
        params,
    )
    .map_err(|e| ctx.err("layers", e.to_string()))?;
    model.preprocessing = manifest.preprocessing;
    model.baseline = manifest.baseline.clone();
    Ok(model)
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Manifest describing `model` with all parameters in one blob named `blob_file`.
pub fn model_to_manifest(model: &Model, blob_file: &str) -> Result<(ModelManifest, Vec<u8>)> {
    let mut blob = Vec::with_capacity(4 * model.parameter_count());
    let mut tensors = Vec::new();
    for (name, tensor) in model.params() {
        tensors.push(TensorRef {
            name: name.clone(),
            shape: tensor.shape().to_vec(),
            offset: blob.len() as u64,
        });
        for (i, &v) in tensor.data().iter().enumerate() {
            let narrow = v as f32;
            if f64::from(narrow) != v {
                return Err(Error::Data(format!(
                    "tensor `{name}` element {i} ({v}) is not representable as float32"
                )));
            }
            blob.extend_from_slice(&narrow.to_le_bytes());
        }
    }
    let manifest = ModelManifest {
        schema_version: SCHEMA_VERSION,
        name: model.name.clone(),
        input_shape: model.input_shape().to_vec(),
        class_count: model.class_count(),
        preprocessing: model.preprocessing,
        layers: model.layers().to_vec(),
        blobs: vec![BlobRef {
            file: blob_file.to_string(),
            tensors,
        }],
        baseline: model.baseline.clone(),
        training: None,
    };
    Ok((manifest, blob))
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.bin`, returning the manifest path.
///
/// Fails if a parameter is not exactly representable as float32, so that
/// loading the result always reproduces the model bit for bit.
pub fn save_model(model: &Model, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let blob_file = format!("{stem}.bin");
    let (manifest, blob) = model_to_manifest(model, &blob_file)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let blob_path = dir.join(&blob_file);
    fs::write(&blob_path, blob).map_err(|e| Error::io(&blob_path, e))?;
    let manifest_path = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
        path: manifest_path.clone(),
        source,
    })?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_manifest() -> (ModelManifest, Vec<u8>) {
        let layers = vec![
            Layer::Dense {
                weight: "fc.weight".into(),
                bias: Some("fc.bias".into()),
            },
            Layer::Softmax,
        ];
        let manifest = ModelManifest {
            schema_version: 1,
            name: "tiny".into(),
            input_shape: vec![3],
            class_count: 2,
            preprocessing: Preprocessing::default(),
            layers,
            blobs: vec![BlobRef {
                file: "tiny.bin".into(),
                tensors: vec![
                    TensorRef {
                        name: "fc.weight".into(),
                        shape: vec![2, 3],
                        offset: 0,
                    },
                    TensorRef {
                        name: "fc.bias".into(),
                        shape: vec![2],
                        offset: 24,
                    },
                ],
            }],
            baseline: None,
            training: None,
        };
        let blob = [0.5f32, -0.25, 1.0, 0.0, 2.0, -1.0, 0.1, 0.2]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        (manifest, blob)
    }

    fn build(manifest: &ModelManifest, blob: &[u8]) -> Result<Model> {
        manifest_to_model(manifest, Path::new("tiny.json"), |_| Ok(blob.to_vec()))
    }

    fn field_of(err: Error) -> String {
        match err {
            Error::Load { field, .. } => field,
            other => panic!("expected a load error, got {other}"),
        }
    }

    #[test]
    fn loads_valid_manifest() {
        let (m, blob) = tiny_manifest();
        let model = build(&m, &blob).unwrap();
        assert_eq!(
            model.param("fc.bias").unwrap().data(),
            &[f64::from(0.1f32), f64::from(0.2f32)]
        );
        assert_eq!(model.param("fc.weight").unwrap().shape(), &[2, 3]);
    }

    #[test]
    fn rejects_bad_version() {
        let (mut m, blob) = tiny_manifest();
        m.schema_version = 2;
        assert_eq!(field_of(build(&m, &blob).unwrap_err()), "schema_version");
    }

    #[test]
    fn rejects_wrong_blob_length() {
        let (m, mut blob) = tiny_manifest();
        blob.truncate(28);
        let err = build(&m, &blob).unwrap_err();
        assert!(err.to_string().contains("tiny.bin"), "{err}");
        assert_eq!(field_of(err), "blobs[0].file");
    }

    #[test]
    fn rejects_shape_mismatch() {
        let (mut m, blob) = tiny_manifest();
        m.blobs[0].tensors[0].shape = vec![3, 2];
        m.blobs[0].tensors[1].shape = vec![2];
        assert_eq!(field_of(build(&m, &blob).unwrap_err()), "layers");
    }

    #[test]
    fn rejects_overlap_and_misalignment() {
        let (mut m, blob) = tiny_manifest();
        m.blobs[0].tensors[1].offset = 20;
        assert_eq!(
            field_of(build(&m, &blob).unwrap_err()),
            "blobs[0].tensors[1].offset"
        );
        let (mut m, blob) = tiny_manifest();
        m.blobs[0].tensors[1].offset = 26;
        assert_eq!(
            field_of(build(&m, &blob).unwrap_err()),
            "blobs[0].tensors[1].offset"
        );
    }

    #[test]
    fn rejects_missing_tensor() {
        let (mut m, blob) = tiny_manifest();
        m.layers[0] = Layer::Dense {
            weight: "fc.weight".into(),
            bias: Some("other".into()),
        };
        assert_eq!(field_of(build(&m, &blob).unwrap_err()), "layers[0]");
    }

    #[test]
    fn rejects_non_finite_weights() {
        let (m, mut blob) = tiny_manifest();
        blob[4..8].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(
            field_of(build(&m, &blob).unwrap_err()),
            "blobs[0].tensors[0]"
        );
    }

    #[test]
    fn save_refuses_lossy_parameters() {
        let (m, blob) = tiny_manifest();
        let model = build(&m, &blob).unwrap();
        let widened = model
            .map_params(|_, t| {
                Tensor::new(
                    t.shape().to_vec(),
                    t.data().iter().map(|v| v + 1e-12).collect(),
                )
            })
            .unwrap();
        assert!(matches!(
            model_to_manifest(&widened, "x.bin"),
            Err(Error::Data(_))
        ));
    }
}
