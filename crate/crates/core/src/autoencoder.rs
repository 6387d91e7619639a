//! Fully-connected autoencoder with a fixed 64-wide latent layer.
//!
//! The encoder maps a flattened image through `tanh` hidden layers to a linear
//! latent layer; the decoder mirrors it and ends in a sigmoid so outputs stay
//! in `(0, 1)`. Training minimizes squared reconstruction error with
//! mini-batch SGD + momentum.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{FaceImage, ImagingError};

/// Width of the latent code.
pub const LATENT_DIM: usize = 64;
pub const DEFAULT_HIDDEN: [usize; 2] = [512, 128];
pub const SUPPORTED_SIDES: [usize; 3] = [64, 128, 256];
pub const MOMENTUM: f64 = 0.9;
/// Largest model `gradient_check` will finite-difference.
pub const GRADIENT_CHECK_MAX_PARAMS: usize = 10_000;

const MODEL_MAGIC: &[u8; 4] = b"LF01";

#[derive(Error, Debug)]
pub enum AutoencoderError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("shape mismatch: expected {expected} inputs, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid latent vector: {0}")]
    InvalidLatent(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("model has {params} parameters, gradient check allows at most {GRADIENT_CHECK_MAX_PARAMS}")]
    TooLarge { params: usize },
    #[error("gradient check epsilon {0} outside [1e-6, 1e-3]")]
    Epsilon(f64),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Linear => {}
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activation output.
    fn backprop(self, grad: &mut Array2<f64>, output: &Array2<f64>) {
        match self {
            Activation::Linear => {}
            Activation::Tanh => grad.zip_mut_with(output, |g, &a| *g *= 1.0 - a * a),
            Activation::Sigmoid => grad.zip_mut_with(output, |g, &a| *g *= a * (1.0 - a)),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

/// One dense layer; `weights` is `output × input`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub activation: Activation,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            kind: LayerKind::Dense,
            input: self.weights.ncols(),
            output: self.weights.nrows(),
            activation: self.activation,
        }
    }

    fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        self.activation.apply(&mut z);
        z
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Serialized architecture header of a model file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureDescriptor {
    pub input_width: usize,
    pub input_height: usize,
    pub latent_dim: usize,
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    input_width: usize,
    input_height: usize,
    encoder: Vec<Dense>,
    decoder: Vec<Dense>,
}

/// A 64-value latent code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self, AutoencoderError> {
        if values.len() != LATENT_DIM {
            return Err(AutoencoderError::InvalidLatent(format!("expected {LATENT_DIM} values, got {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AutoencoderError::InvalidLatent("non-finite value".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 40, batch_size: 20, learning_rate: 0.001, seed: 7, validation_fraction: 0.0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), AutoencoderError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(AutoencoderError::InvalidConfig("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AutoencoderError::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(AutoencoderError::InvalidConfig(format!(
                "validation fraction {} outside [0, 0.5)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: AutoencoderModel,
    /// Mean per-pixel squared error over the training split, one entry per epoch.
    pub loss_history: Vec<f64>,
    /// Same metric on the held-out split (empty when `validation_fraction` is 0).
    pub validation_history: Vec<f64>,
}

/// Per-layer gradients, encoder layers first.
#[derive(Debug, Clone)]
struct Gradients {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Glorot-uniform initialized layer.
fn init_dense(rng: &mut ChaCha8Rng, input: usize, output: usize, activation: Activation) -> Dense {
    let limit = (6.0 / (input + output) as f64).sqrt();
    let weights = Array2::from_shape_simple_fn((output, input), || rng.random_range(-limit..=limit));
    Dense { activation, weights, bias: Array1::zeros(output) }
}

/// Builds the symmetric autoencoder for `input_side × input_side` images.
pub fn init_model(input_side: usize, hidden_sizes: &[usize], seed: u64) -> Result<AutoencoderModel, AutoencoderError> {
    if !SUPPORTED_SIDES.contains(&input_side) {
        return Err(AutoencoderError::InvalidArchitecture(format!(
            "input side {input_side} not one of {SUPPORTED_SIDES:?}"
        )));
    }
    let pixels = input_side * input_side;
    let mut sizes = vec![pixels];
    sizes.extend_from_slice(hidden_sizes);
    sizes.push(LATENT_DIM);
    if sizes.windows(2).any(|w| w[0] <= w[1]) {
        return Err(AutoencoderError::InvalidArchitecture(format!(
            "layer sizes {sizes:?} must strictly decrease toward {LATENT_DIM}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = sizes.len() - 1;
    let encoder = (0..depth)
        .map(|i| {
            let act = if i + 1 == depth { Activation::Linear } else { Activation::Tanh };
            init_dense(&mut rng, sizes[i], sizes[i + 1], act)
        })
        .collect();
    let decoder = (0..depth)
        .map(|i| {
            let (from, to) = (sizes[depth - i], sizes[depth - i - 1]);
            let act = if i + 1 == depth { Activation::Sigmoid } else { Activation::Tanh };
            init_dense(&mut rng, from, to, act)
        })
        .collect();
    AutoencoderModel::from_layers(input_side, input_side, encoder, decoder)
}

impl AutoencoderModel {
    /// Assembles a model from explicit layers, checking that the chain connects.
    pub fn from_layers(
        input_width: usize,
        input_height: usize,
        encoder: Vec<Dense>,
        decoder: Vec<Dense>,
    ) -> Result<Self, AutoencoderError> {
        let pixels = input_width * input_height;
        let bad = |msg: String| Err(AutoencoderError::InvalidArchitecture(msg));
        if encoder.is_empty() || decoder.is_empty() {
            return bad("encoder and decoder need at least one layer each".into());
        }
        let mut width = pixels;
        for (i, layer) in encoder.iter().chain(&decoder).enumerate() {
            if layer.weights.ncols() != width || layer.bias.len() != layer.weights.nrows() {
                return bad(format!("layer {i} expects {} inputs, receives {width}", layer.weights.ncols()));
            }
            if i + 1 == encoder.len() && layer.weights.nrows() != LATENT_DIM {
                return bad(format!("encoder output {} != latent dim {LATENT_DIM}", layer.weights.nrows()));
            }
            if layer.weights.iter().chain(layer.bias.iter()).any(|w| !w.is_finite()) {
                return bad(format!("layer {i} has non-finite weights"));
            }
            width = layer.weights.nrows();
        }
        if width != pixels {
            return bad(format!("decoder output {width} != input pixel count {pixels}"));
        }
        Ok(Self { input_width, input_height, encoder, decoder })
    }

    /// Data-dependent bias initialization: centers the first layer on the
    /// data mean and sets the output bias so an all-zero latent decodes to
    /// the mean image.
    pub fn init_biases_from_data(&mut self, data: &[&FaceImage]) -> Result<(), AutoencoderError> {
        if data.is_empty() {
            return Ok(());
        }
        let x = self.stack(data)?;
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let first = &mut self.encoder[0];
        first.bias = -first.weights.dot(&mean);
        let last = self.decoder.last_mut().expect("decoder layer");
        if last.activation == Activation::Sigmoid {
            last.bias = mean.mapv(|m| {
                let m = m.clamp(1e-3, 1.0 - 1e-3);
                (m / (1.0 - m)).ln()
            });
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn input_height(&self) -> usize {
        self.input_height
    }

    pub fn input_len(&self) -> usize {
        self.input_width * self.input_height
    }

    pub fn encoder(&self) -> &[Dense] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Dense] {
        &self.decoder
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Dense::param_count).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder.iter().chain(&self.decoder)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.encoder.iter_mut().chain(&mut self.decoder)
    }

    pub fn descriptor(&self) -> ArchitectureDescriptor {
        ArchitectureDescriptor {
            input_width: self.input_width,
            input_height: self.input_height,
            latent_dim: LATENT_DIM,
            encoder: self.encoder.iter().map(Dense::spec).collect(),
            decoder: self.decoder.iter().map(Dense::spec).collect(),
        }
    }

    fn check_pixels(&self, len: usize) -> Result<(), AutoencoderError> {
        if len != self.input_len() {
            return Err(AutoencoderError::Shape { expected: self.input_len(), actual: len });
        }
        Ok(())
    }

    /// Runs the encoder on a flattened pixel vector.
    pub fn encode_pixels(&self, pixels: &[f64]) -> Result<LatentVector, AutoencoderError> {
        self.check_pixels(pixels.len())?;
        let x = ArrayView2::from_shape((1, pixels.len()), pixels).expect("contiguous row");
        let z = run(&self.encoder, x);
        LatentVector::new(z.into_raw_vec_and_offset().0)
    }

    pub fn encode(&self, img: &FaceImage) -> Result<LatentVector, AutoencoderError> {
        self.encode_pixels(img.pixels())
    }

    /// Encodes many images in one batched pass.
    pub fn encode_batch(&self, images: &[&FaceImage]) -> Result<Vec<LatentVector>, AutoencoderError> {
        let x = self.stack(images)?;
        let z = run(&self.encoder, x.view());
        z.outer_iter().map(|row| LatentVector::new(row.to_vec())).collect()
    }

    /// Runs the decoder; returns raw output values.
    pub fn decode_values(&self, z: &LatentVector) -> Result<Vec<f64>, AutoencoderError> {
        if z.values().iter().any(|v| !v.is_finite()) {
            return Err(AutoencoderError::InvalidLatent("non-finite value".into()));
        }
        let x = ArrayView2::from_shape((1, LATENT_DIM), z.values()).expect("contiguous row");
        Ok(run(&self.decoder, x).into_raw_vec_and_offset().0)
    }

    pub fn decode(&self, z: &LatentVector) -> Result<FaceImage, AutoencoderError> {
        let values = self.decode_values(z)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AutoencoderError::InvalidLatent("decoder produced non-finite output".into()));
        }
        Ok(FaceImage::from_clamped(self.input_width, self.input_height, values)?)
    }

    /// `decode(encode(img))`.
    pub fn reconstruct(&self, img: &FaceImage) -> Result<FaceImage, AutoencoderError> {
        self.decode(&self.encode(img)?)
    }

    fn stack(&self, images: &[&FaceImage]) -> Result<Array2<f64>, AutoencoderError> {
        let mut x = Array2::zeros((images.len(), self.input_len()));
        for (mut row, img) in x.outer_iter_mut().zip(images) {
            self.check_pixels(img.pixels().len())?;
            row.assign(&ArrayView2::from_shape((1, img.pixels().len()), img.pixels()).expect("row").row(0));
        }
        Ok(x)
    }

    /// Objective `½·Σ‖y − x‖² / batch` and its gradient for a batch of rows.
    fn loss_and_gradients(&self, x: ArrayView2<f64>) -> (f64, Gradients) {
        let batch = x.nrows() as f64;
        let layers: Vec<&Dense> = self.layers().collect();
        let mut activations: Vec<Array2<f64>> = Vec::with_capacity(layers.len() + 1);
        activations.push(x.to_owned());
        for layer in &layers {
            let next = layer.forward(&activations.last().expect("input").view());
            activations.push(next);
        }
        let output = activations.last().expect("output");
        let diff = output - &x;
        let loss = 0.5 * diff.iter().map(|d| d * d).sum::<f64>() / batch;

        let mut grad = diff / batch;
        let mut weights = Vec::with_capacity(layers.len());
        let mut biases = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate().rev() {
            layer.activation.backprop(&mut grad, &activations[i + 1]);
            weights.push(grad.t().dot(&activations[i]));
            biases.push(grad.sum_axis(Axis(0)));
            if i > 0 {
                grad = grad.dot(&layer.weights);
            }
        }
        weights.reverse();
        biases.reverse();
        (loss, Gradients { weights, biases })
    }

    fn objective(&self, x: ArrayView2<f64>) -> f64 {
        let y = run(&self.decoder, run(&self.encoder, x).view());
        0.5 * (&y - &x).iter().map(|d| d * d).sum::<f64>() / x.nrows() as f64
    }

    /// Mean per-pixel squared reconstruction error over `images`.
    pub fn reconstruction_mse(&self, images: &[&FaceImage]) -> Result<f64, AutoencoderError> {
        if images.is_empty() {
            return Ok(0.0);
        }
        let x = self.stack(images)?;
        Ok(per_pixel_mse(self, x.view()))
    }

    /// Serializes to the `LF01` model format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let descriptor = serde_json::to_vec(&self.descriptor()).expect("descriptor serializes");
        let mut out = Vec::with_capacity(8 + descriptor.len() + 4 * self.param_count());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(descriptor.len() as u32).to_le_bytes());
        out.extend_from_slice(&descriptor);
        for layer in self.layers() {
            for w in layer.weights.iter().chain(layer.bias.iter()) {
                out.extend_from_slice(&(*w as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AutoencoderError> {
        let fmt = |m: &str| AutoencoderError::Format(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != MODEL_MAGIC {
            return Err(fmt("unknown magic"));
        }
        let desc_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let desc_bytes = bytes.get(8..8 + desc_len).ok_or_else(|| fmt("truncated descriptor"))?;
        let desc: ArchitectureDescriptor =
            serde_json::from_slice(desc_bytes).map_err(|e| AutoencoderError::Format(format!("descriptor: {e}")))?;
        if desc.latent_dim != LATENT_DIM {
            return Err(AutoencoderError::Format(format!("latent dim {} != {LATENT_DIM}", desc.latent_dim)));
        }
        let payload = &bytes[8 + desc_len..];
        let expected: usize =
            desc.encoder.iter().chain(&desc.decoder).map(|l| 4 * (l.input * l.output + l.output)).sum();
        if payload.len() != expected {
            return Err(AutoencoderError::Format(format!(
                "payload is {} bytes, descriptor implies {expected}",
                payload.len()
            )));
        }
        let mut floats = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        let mut read_layer = |spec: &LayerSpec| {
            let weights = Array2::from_shape_fn((spec.output, spec.input), |_| floats.next().expect("sized"));
            let bias = Array1::from_shape_fn(spec.output, |_| floats.next().expect("sized"));
            Dense { activation: spec.activation, weights, bias }
        };
        let encoder = desc.encoder.iter().map(&mut read_layer).collect();
        let decoder = desc.decoder.iter().map(&mut read_layer).collect();
        Self::from_layers(desc.input_width, desc.input_height, encoder, decoder)
    }
}

fn run(layers: &[Dense], x: ArrayView2<f64>) -> Array2<f64> {
    let mut iter = layers.iter();
    let first = iter.next().expect("non-empty layer stack");
    iter.fold(first.forward(&x), |acc, layer| layer.forward(&acc.view()))
}

fn per_pixel_mse(model: &AutoencoderModel, x: ArrayView2<f64>) -> f64 {
    // objective is ½ Σ d² per sample
    2.0 * model.objective(x) / x.ncols() as f64
}

/// Trains `model` on `data` and returns the trained copy with its loss history.
pub fn train(
    model: &AutoencoderModel,
    data: &[&FaceImage],
    cfg: &TrainConfig,
) -> Result<TrainReport, AutoencoderError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(AutoencoderError::InvalidConfig("empty training set".into()));
    }
    let all = model.stack(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let n_val = (cfg.validation_fraction * data.len() as f64).floor() as usize;
    let (train_idx, val_idx) = if n_val > 0 && n_val < data.len() {
        order.shuffle(&mut rng);
        let (v, t) = order.split_at(n_val);
        (t.to_vec(), v.to_vec())
    } else {
        (order, Vec::new())
    };
    let train_x = all.select(Axis(0), &train_idx);
    let val_x = all.select(Axis(0), &val_idx);

    let mut model = model.clone();
    let mut velocity_w: Vec<Array2<f64>> = model.layers().map(|l| Array2::zeros(l.weights.raw_dim())).collect();
    let mut velocity_b: Vec<Array1<f64>> = model.layers().map(|l| Array1::zeros(l.bias.raw_dim())).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut validation_history = Vec::new();
    let mut batch_order: Vec<usize> = (0..train_x.nrows()).collect();
    let pixels = model.input_len() as f64;

    for epoch in 1..=cfg.epochs {
        batch_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in batch_order.chunks(cfg.batch_size) {
            let batch = train_x.select(Axis(0), chunk);
            let (loss, grads) = model.loss_and_gradients(batch.view());
            if !loss.is_finite() {
                return Err(AutoencoderError::Divergence { epoch, loss });
            }
            epoch_loss += loss * chunk.len() as f64;
            for (((layer, gw), gb), (vw, vb)) in model
                .layers_mut()
                .zip(&grads.weights)
                .zip(&grads.biases)
                .zip(velocity_w.iter_mut().zip(velocity_b.iter_mut()))
            {
                vw.zip_mut_with(gw, |v, &g| *v = MOMENTUM * *v + g);
                vb.zip_mut_with(gb, |v, &g| *v = MOMENTUM * *v + g);
                layer.weights.scaled_add(-cfg.learning_rate, vw);
                layer.bias.scaled_add(-cfg.learning_rate, vb);
            }
        }
        let mse = 2.0 * epoch_loss / train_x.nrows() as f64 / pixels;
        if !mse.is_finite() {
            return Err(AutoencoderError::Divergence { epoch, loss: mse });
        }
        log::debug!("epoch {epoch}: train mse {mse:.6}");
        loss_history.push(mse);
        if val_x.nrows() > 0 {
            validation_history.push(per_pixel_mse(&model, val_x.view()));
        }
    }
    Ok(TrainReport { model, loss_history, validation_history })
}

/// Maximum relative error between analytic and central-difference gradients
/// of the reconstruction objective for one input vector.
pub fn gradient_check_pixels(model: &AutoencoderModel, pixels: &[f64], epsilon: f64) -> Result<f64, AutoencoderError> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(AutoencoderError::Epsilon(epsilon));
    }
    let params = model.param_count();
    if params > GRADIENT_CHECK_MAX_PARAMS {
        return Err(AutoencoderError::TooLarge { params });
    }
    model.check_pixels(pixels.len())?;
    let x = ArrayView2::from_shape((1, pixels.len()), pixels).expect("row");
    let (_, grads) = model.loss_and_gradients(x);

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut compare = |analytic: f64, numeric: f64| {
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    };
    let n_layers = model.encoder.len() + model.decoder.len();
    for li in 0..n_layers {
        let (rows, cols) = model.layers().nth(li).expect("layer").weights.dim();
        for r in 0..rows {
            for c in 0..cols {
                let numeric = central_difference(&mut probe, x, epsilon, |m| &mut m.layer_mut(li).weights[[r, c]]);
                compare(grads.weights[li][[r, c]], numeric);
            }
            let numeric = central_difference(&mut probe, x, epsilon, |m| &mut m.layer_mut(li).bias[r]);
            compare(grads.biases[li][r], numeric);
        }
    }
    Ok(worst)
}

/// [`gradient_check_pixels`] on an image.
pub fn gradient_check(model: &AutoencoderModel, img: &FaceImage, epsilon: f64) -> Result<f64, AutoencoderError> {
    gradient_check_pixels(model, img.pixels(), epsilon)
}

fn central_difference(
    model: &mut AutoencoderModel,
    x: ArrayView2<f64>,
    epsilon: f64,
    param: impl Fn(&mut AutoencoderModel) -> &mut f64,
) -> f64 {
    let original = *param(model);
    *param(model) = original + epsilon;
    let plus = model.objective(x);
    *param(model) = original - epsilon;
    let minus = model.objective(x);
    *param(model) = original;
    (plus - minus) / (2.0 * epsilon)
}

impl AutoencoderModel {
    fn layer_mut(&mut self, index: usize) -> &mut Dense {
        let n_enc = self.encoder.len();
        if index < n_enc {
            &mut self.encoder[index]
        } else {
            &mut self.decoder[index - n_enc]
        }
    }
}
