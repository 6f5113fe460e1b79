use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm, Conv2d, Dense, Dropout, Flatten, Layer, MaxPool2, Relu};
use super::loss::{softmax, softmax_cross_entropy_indices};
use super::{Mode, ModelRng, NnError, Tensor};

/// One `conv → batchnorm → relu → maxpool` stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub kernels: usize,
    pub size: usize,
}

/// Layer-stack hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
    pub blocks: Vec<ConvBlock>,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub classes: usize,
}

impl Architecture {
    pub const DROPOUT: f64 = 0.23;

    /// The 200×34 emotion classifier: conv blocks (32,7×7), (64,5×5),
    /// (128,3×3), (256,1×1), then dense 128 and 32 with dropout.
    pub fn standard(classes: usize) -> Self {
        Self {
            input_height: 200,
            input_width: 34,
            input_channels: 1,
            blocks: [(32, 7), (64, 5), (128, 3), (256, 1)]
                .into_iter()
                .map(|(kernels, size)| ConvBlock { kernels, size })
                .collect(),
            hidden: vec![128, 32],
            dropout: Self::DROPOUT,
            classes,
        }
    }

    /// A reduced 8×8×1 network with two conv blocks, for gradient checks.
    pub fn tiny(classes: usize) -> Self {
        Self {
            input_height: 8,
            input_width: 8,
            input_channels: 1,
            blocks: vec![
                ConvBlock {
                    kernels: 4,
                    size: 3,
                },
                ConvBlock {
                    kernels: 6,
                    size: 3,
                },
            ],
            hidden: vec![8],
            dropout: Self::DROPOUT,
            classes,
        }
    }

    /// Same layer structure as [`Architecture::standard`] on another input size.
    pub fn with_input(mut self, height: usize, width: usize) -> Self {
        self.input_height = height;
        self.input_width = width;
        self
    }

    /// Spatial size after every pooling stage.
    pub fn spatial_dims(&self) -> Result<Vec<(usize, usize)>, NnError> {
        let mut dims = vec![(self.input_height, self.input_width)];
        for _ in &self.blocks {
            let (h, w) = *dims.last().unwrap();
            dims.push(
                MaxPool2::output_dims(h, w).map_err(|e| NnError::Architecture(e.to_string()))?,
            );
        }
        Ok(dims)
    }

    pub fn flatten_len(&self) -> Result<usize, NnError> {
        let (h, w) = *self.spatial_dims()?.last().unwrap();
        let c = self
            .blocks
            .last()
            .map_or(self.input_channels, |b| b.kernels);
        Ok(h * w * c)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.classes < 2 {
            return Err(NnError::Architecture(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.input_height == 0 || self.input_width == 0 || self.input_channels == 0 {
            return Err(NnError::Architecture("empty input shape".into()));
        }
        if self.hidden.contains(&0) || self.blocks.iter().any(|b| b.kernels == 0) {
            return Err(NnError::Architecture("zero-width layer".into()));
        }
        Dropout::new(self.dropout)?;
        self.flatten_len().map(|_| ())
    }

    fn build(&self, rng: &mut ModelRng) -> Result<Vec<Layer>, NnError> {
        self.validate()?;
        let mut layers = Vec::new();
        let mut cin = self.input_channels;
        for b in &self.blocks {
            let mut conv = Conv2d::new(b.size, cin, b.kernels)?;
            conv.init(rng);
            layers.push(Layer::Conv(conv));
            layers.push(Layer::BatchNorm(BatchNorm::new(b.kernels)));
            layers.push(Layer::Relu(Relu::default()));
            layers.push(Layer::MaxPool(MaxPool2::default()));
            cin = b.kernels;
        }
        layers.push(Layer::Flatten(Flatten::default()));
        let mut width = self.flatten_len()?;
        for &h in &self.hidden {
            let mut d = Dense::new(width, h);
            d.init(rng);
            layers.push(Layer::Dense(d));
            layers.push(Layer::Relu(Relu::default()));
            layers.push(Layer::Dropout(Dropout::new(self.dropout)?));
            width = h;
        }
        let mut out = Dense::new(width, self.classes);
        out.init(rng);
        layers.push(Layer::Dense(out));
        Ok(layers)
    }
}

/// Derives the dropout stream from the model seed so it never overlaps initialization.
fn dropout_rng(seed: u64) -> ModelRng {
    let mut rng = ModelRng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// The classifier: a layer stack ending in logits; softmax is applied by the
/// loss and by the prediction helpers.
#[derive(Debug, Clone)]
pub struct CnnModel {
    arch: Architecture,
    layers: Vec<Layer>,
    seed: u64,
    rng: ModelRng,
}

/// One row of [`CnnModel::summary`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSummary {
    pub name: &'static str,
    pub output_shape: Vec<usize>,
    pub params: usize,
}

impl CnnModel {
    pub fn new(arch: Architecture, seed: u64) -> Result<Self, NnError> {
        let mut init = ModelRng::seed_from_u64(seed);
        let layers = arch.build(&mut init)?;
        Ok(Self {
            arch,
            layers,
            seed,
            rng: dropout_rng(seed),
        })
    }

    /// Rebuilds a model from stored layers (used by checkpoint loading).
    pub(crate) fn from_parts(arch: Architecture, layers: Vec<Layer>, seed: u64) -> Self {
        Self {
            arch,
            layers,
            seed,
            rng: dropout_rng(seed),
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn classes(&self) -> usize {
        self.arch.classes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Restart the dropout mask stream; identical seeds give identical masks.
    pub fn reseed_dropout(&mut self, seed: u64) {
        self.rng = dropout_rng(seed);
    }

    /// Number of trainable scalars (batchnorm running statistics excluded).
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_len).sum()
    }

    /// Round every stored value to the nearest `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for layer in &mut self.layers {
            for buf in layer.state_mut() {
                buf.iter_mut().for_each(|v| *v = *v as f32 as f64);
            }
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NnError> {
        let expected = [
            self.arch.input_height,
            self.arch.input_width,
            self.arch.input_channels,
        ];
        if x.shape().len() != 4 || x.shape()[1..] != expected {
            return Err(NnError::Shape(format!(
                "model expects [batch, {}, {}, {}], got {:?}",
                expected[0],
                expected[1],
                expected[2],
                x.shape()
            )));
        }
        Ok(())
    }

    /// Logits for a batch, caching activations for `backward` unless `mode` is `Infer`.
    pub fn forward(&mut self, x: Tensor, mode: Mode) -> Result<Tensor, NnError> {
        self.check_input(&x)?;
        let mut h = x;
        for layer in &mut self.layers {
            h = layer.forward(h, mode, &mut self.rng)?;
        }
        if !h.all_finite() {
            return Err(NnError::NonFinite("forward pass"));
        }
        Ok(h)
    }

    /// Back-propagates a logit gradient, leaving parameter gradients in the layers.
    pub fn backward(&mut self, dlogits: Tensor) -> Result<(), NnError> {
        let mut g = Some(dlogits);
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let upstream = g
                .take()
                .expect("input gradient requested for every inner layer");
            g = layer.backward(upstream, i > 0)?;
        }
        let finite = self.layers.iter_mut().all(|l| {
            l.params_mut()
                .iter()
                .all(|p| p.grad.iter().all(|v| v.is_finite()))
        });
        if !finite {
            return Err(NnError::NonFinite("backward pass"));
        }
        Ok(())
    }

    /// Forward, loss and backward in one call; returns the mean loss and the logits.
    pub fn loss_and_gradients(
        &mut self,
        x: Tensor,
        labels: &[usize],
        mode: Mode,
    ) -> Result<(f64, Tensor), NnError> {
        let logits = self.forward(x, mode)?;
        let (loss, grad) = softmax_cross_entropy_indices(&logits, labels)?;
        self.backward(grad)?;
        Ok((loss, logits))
    }

    /// Mean loss without touching gradients.
    pub fn loss(&mut self, x: Tensor, labels: &[usize], mode: Mode) -> Result<f64, NnError> {
        let logits = self.forward(x, mode)?;
        softmax_cross_entropy_indices(&logits, labels).map(|(l, _)| l)
    }

    /// Class probabilities with inference-mode layers; `&self`, so a trained
    /// model can be shared across threads.
    pub fn predict_proba(&self, x: Tensor) -> Result<Tensor, NnError> {
        self.check_input(&x)?;
        let mut h = x;
        for layer in &self.layers {
            h = layer.infer(h)?;
        }
        if !h.all_finite() {
            return Err(NnError::NonFinite("inference"));
        }
        softmax(&h)
    }

    /// Arg-max class per example; ties go to the lowest index.
    pub fn predict(&self, x: Tensor) -> Result<Vec<usize>, NnError> {
        let p = self.predict_proba(x)?;
        Ok(p.data()
            .chunks_exact(self.arch.classes)
            .map(argmax)
            .collect())
    }

    pub fn summary(&self) -> Result<Vec<LayerSummary>, NnError> {
        let mut shape = vec![
            1,
            self.arch.input_height,
            self.arch.input_width,
            self.arch.input_channels,
        ];
        let mut rows = Vec::new();
        for layer in &self.layers {
            let out = layer.infer(Tensor::zeros(shape.clone()))?;
            shape = out.shape().to_vec();
            rows.push(LayerSummary {
                name: layer.name(),
                output_shape: shape[1..].to_vec(),
                params: layer.param_len(),
            });
        }
        Ok(rows)
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
