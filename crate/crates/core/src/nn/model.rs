use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ops::{self, Padding};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// One step of a sequential network. Parameterized layers name their
/// tensors in the model's parameter store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layer {
    Conv2d {
        weight: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<String>,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default = "valid")]
        padding: Padding,
    },
    Maxpool2d {
        window: usize,
        stride: usize,
    },
    Relu,
    Flatten,
    Dense {
        weight: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<String>,
    },
    Softmax,
}

fn one() -> usize {
    1
}

fn valid() -> Padding {
    Padding::Valid
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "conv2d",
            Layer::Maxpool2d { .. } => "maxpool2d",
            Layer::Relu => "relu",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
            Layer::Softmax => "softmax",
        }
    }

    /// Names of the weight and optional bias tensor.
    pub fn parameters(&self) -> Vec<&str> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias } => {
                std::iter::once(weight.as_str())
                    .chain(bias.as_deref())
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn bias(&self) -> Option<&str> {
        match self {
            Layer::Conv2d { bias, .. } | Layer::Dense { bias, .. } => bias.as_deref(),
            _ => None,
        }
    }

    fn output_shape(
        &self,
        input: &[usize],
        params: &BTreeMap<String, Tensor>,
    ) -> Result<Vec<usize>> {
        let lookup = |name: &str| {
            params
                .get(name)
                .map(Tensor::shape)
                .ok_or_else(|| Error::Shape(format!("parameter `{name}` is missing")))
        };
        match self {
            Layer::Conv2d {
                weight,
                bias,
                stride,
                padding,
            } => ops::conv2d_shape(
                input,
                lookup(weight)?,
                bias.as_deref().map(lookup).transpose()?,
                *stride,
                *padding,
            ),
            Layer::Maxpool2d { window, stride } => ops::maxpool2d_shape(input, *window, *stride),
            Layer::Relu => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Dense { weight, bias } => ops::dense_shape(
                input,
                lookup(weight)?,
                bias.as_deref().map(lookup).transpose()?,
            ),
            Layer::Softmax => match input {
                [n] if *n > 0 => Ok(input.to_vec()),
                _ => Err(Error::Shape(format!(
                    "softmax expects a non-empty vector, got {input:?}"
                ))),
            },
        }
    }

    fn apply(&self, input: &Tensor, params: &BTreeMap<String, Tensor>) -> Result<Tensor> {
        let get = |name: &str| {
            params
                .get(name)
                .ok_or_else(|| Error::Shape(format!("parameter `{name}` is missing")))
        };
        match self {
            Layer::Conv2d {
                weight,
                bias,
                stride,
                padding,
            } => ops::conv2d(
                input,
                get(weight)?,
                bias.as_deref().map(get).transpose()?,
                *stride,
                *padding,
            ),
            Layer::Maxpool2d { window, stride } => ops::maxpool2d(input, *window, *stride),
            Layer::Relu => Ok(ops::relu(input)),
            Layer::Flatten => Ok(ops::flatten(input)),
            Layer::Dense { weight, bias } => {
                ops::dense(input, get(weight)?, bias.as_deref().map(get).transpose()?)
            }
            Layer::Softmax => ops::softmax(input),
        }
    }
}

/// Input scaling the weights were trained with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    /// Raw pixel bytes are divided by this value.
    pub pixel_divisor: f64,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Self {
            pixel_divisor: 255.0,
        }
    }
}

/// Accuracy recorded when the float weights were exported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub dataset: String,
    pub images: usize,
    pub top1: f64,
}

/// A validated sequential network. Every layer's output shape is checked
/// against its successor at construction, and the last layer is a softmax
/// over `class_count` outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub name: String,
    input_shape: Vec<usize>,
    class_count: usize,
    layers: Vec<Layer>,
    params: BTreeMap<String, Tensor>,
    pub preprocessing: Preprocessing,
    pub baseline: Option<Baseline>,
}

impl Model {
    pub fn new(
        name: impl Into<String>,
        input_shape: Vec<usize>,
        class_count: usize,
        layers: Vec<Layer>,
        params: BTreeMap<String, Tensor>,
    ) -> Result<Self> {
        let shapes = infer_shapes(&input_shape, &layers, &params)?;
        match layers.last() {
            Some(Layer::Softmax) => {}
            _ => {
                return Err(Error::Shape("the final layer must be softmax".into()));
            }
        }
        let output = shapes.last().expect("at least one layer");
        if output != &[class_count] {
            return Err(Error::Shape(format!(
                "model output {output:?} does not match class count {class_count}"
            )));
        }
        for name in params.keys() {
            if !layers
                .iter()
                .any(|l| l.parameters().contains(&name.as_str()))
            {
                return Err(Error::Shape(format!(
                    "parameter `{name}` is not used by any layer"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            input_shape,
            class_count,
            layers,
            params,
            preprocessing: Preprocessing::default(),
            baseline: None,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    /// Names of every tensor used as a bias.
    pub fn bias_names(&self) -> Vec<&str> {
        self.layers.iter().filter_map(Layer::bias).collect()
    }

    /// Copy of the model with each parameter replaced by `f(name, tensor)`.
    /// Replacements must keep their shape.
    pub fn map_params<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&str, &Tensor) -> Result<Tensor>,
    {
        let mut params = BTreeMap::new();
        for (name, tensor) in &self.params {
            let mapped = f(name, tensor)?;
            if mapped.shape() != tensor.shape() {
                return Err(Error::Shape(format!(
                    "replacement for `{name}` changed shape {:?} to {:?}",
                    tensor.shape(),
                    mapped.shape()
                )));
            }
            params.insert(name.clone(), mapped);
        }
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }
}

/// Output shape of every layer in turn. The error names the first layer
/// whose input does not fit.
pub fn infer_shapes(
    input_shape: &[usize],
    layers: &[Layer],
    params: &BTreeMap<String, Tensor>,
) -> Result<Vec<Vec<usize>>> {
    if layers.is_empty() {
        return Err(Error::Shape("model has no layers".into()));
    }
    let mut shapes = Vec::with_capacity(layers.len());
    let mut current = input_shape.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        current = layer.output_shape(&current, params).map_err(|e| {
            Error::Shape(format!(
                "layer {i} ({}): {}",
                layer.kind(),
                strip_prefix(&e)
            ))
        })?;
        shapes.push(current.clone());
    }
    Ok(shapes)
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Shape(msg) => msg.clone(),
        other => other.to_string(),
    }
}

/// Runs every layer in order and returns the final (softmax) output.
pub fn forward(model: &Model, input: &Tensor) -> Result<Tensor> {
    if input.shape() != model.input_shape() {
        return Err(Error::Shape(format!(
            "input {:?} does not match model input {:?}",
            input.shape(),
            model.input_shape()
        )));
    }
    let mut layers = model.layers.iter().enumerate();
    let (_, first) = layers.next().expect("validated model has layers");
    let mut current = first
        .apply(input, &model.params)
        .map_err(|e| Error::Shape(format!("layer 0 ({}): {}", first.kind(), strip_prefix(&e))))?;
    for (i, layer) in layers {
        current = layer.apply(&current, &model.params).map_err(|e| {
            Error::Shape(format!(
                "layer {i} ({}): {}",
                layer.kind(),
                strip_prefix(&e)
            ))
        })?;
    }
    if !current.all_finite() {
        return Err(Error::Data(format!(
            "model `{}` produced non-finite outputs",
            model.name
        )));
    }
    Ok(current)
}

/// Labelled images for classification.
pub trait ImageSet: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn image(&self, index: usize) -> Tensor;

    fn label(&self, index: usize) -> usize;
}

/// Fraction of the first `limit` images whose most probable class is the label.
///
/// Images are evaluated in parallel on the current rayon pool; the result is a
/// count, so it does not depend on scheduling.
pub fn evaluate_top1<D: ImageSet + ?Sized>(
    model: &Model,
    dataset: &D,
    limit: usize,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    if limit == 0 || limit > dataset.len() {
        return Err(Error::Data(format!(
            "limit {limit} is outside [1, {}]",
            dataset.len()
        )));
    }
    let correct = (0..limit)
        .into_par_iter()
        .map(|i| {
            let probs = forward(model, &dataset.image(i))?;
            Ok::<_, Error>(usize::from(probs.argmax() == Some(dataset.label(i))))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(correct as f64 / limit as f64)
}
