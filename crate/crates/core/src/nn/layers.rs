//! Layer implementations. Every layer caches what its backward pass needs
//! during a non-inference forward pass; `backward` consumes that cache.

use rand::Rng;

use super::gemm::{gemm, row_major, transposed};
use super::{Mode, ModelRng, NnError, Tensor};

/// A trainable tensor and its most recent gradient.
pub struct ParamMut<'a> {
    pub name: &'static str,
    pub value: &'a mut [f64],
    pub grad: &'a [f64],
}

fn he_uniform(values: &mut [f64], fan_in: usize, rng: &mut ModelRng) {
    let limit = (6.0 / fan_in as f64).sqrt();
    for v in values {
        *v = rng.random_range(-limit..limit);
    }
}

fn expect_rank(x: &Tensor, rank: usize, who: &str) -> Result<(), NnError> {
    if x.shape().len() != rank {
        return Err(NnError::Shape(format!(
            "{who} expects a rank-{rank} input, got {:?}",
            x.shape()
        )));
    }
    Ok(())
}

/// Stride-1 convolution (cross-correlation) with zero "same" padding.
/// Kernels are laid out `[size, size, cin, cout]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub size: usize,
    pub cin: usize,
    pub cout: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new(size: usize, cin: usize, cout: usize) -> Result<Self, NnError> {
        if size.is_multiple_of(2) || cin == 0 || cout == 0 {
            return Err(NnError::Architecture(format!(
                "conv kernel must be odd-sized with non-empty channels, got {size}x{size} {cin}->{cout}"
            )));
        }
        let k = size * size * cin;
        Ok(Self {
            size,
            cin,
            cout,
            weight: vec![0.0; k * cout],
            bias: vec![0.0; cout],
            grad_weight: vec![0.0; k * cout],
            grad_bias: vec![0.0; cout],
            input: None,
        })
    }

    pub fn init(&mut self, rng: &mut ModelRng) {
        let fan_in = self.patch_len();
        he_uniform(&mut self.weight, fan_in, rng);
        self.bias.fill(0.0);
    }

    fn patch_len(&self) -> usize {
        self.size * self.size * self.cin
    }

    fn im2col(&self, x: &[f64], h: usize, w: usize, cols: &mut [f64]) {
        let (s, c, k) = (self.size, self.cin, self.patch_len());
        let pad = (s / 2) as isize;
        for y in 0..h {
            for xx in 0..w {
                let row = &mut cols[(y * w + xx) * k..(y * w + xx + 1) * k];
                for ky in 0..s {
                    let iy = y as isize + ky as isize - pad;
                    for kx in 0..s {
                        let ix = xx as isize + kx as isize - pad;
                        let dst = &mut row[(ky * s + kx) * c..(ky * s + kx + 1) * c];
                        if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                            dst.fill(0.0);
                        } else {
                            let src = (iy as usize * w + ix as usize) * c;
                            dst.copy_from_slice(&x[src..src + c]);
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], h: usize, w: usize, dx: &mut [f64]) {
        let (s, c, k) = (self.size, self.cin, self.patch_len());
        let pad = (s / 2) as isize;
        for y in 0..h {
            for xx in 0..w {
                let row = &cols[(y * w + xx) * k..(y * w + xx + 1) * k];
                for ky in 0..s {
                    let iy = y as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..s {
                        let ix = xx as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let dst = (iy as usize * w + ix as usize) * c;
                        let src = &row[(ky * s + kx) * c..(ky * s + kx + 1) * c];
                        for (d, v) in dx[dst..dst + c].iter_mut().zip(src) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize, usize), NnError> {
        expect_rank(x, 4, "conv2d")?;
        let s = x.shape();
        if s[3] != self.cin {
            return Err(NnError::Shape(format!(
                "conv2d expects {} input channels, got {}",
                self.cin, s[3]
            )));
        }
        Ok((s[0], s[1], s[2]))
    }

    pub fn forward(&mut self, x: Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let out = self.infer(&x)?;
        self.input = (mode != Mode::Infer).then_some(x);
        Ok(out)
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let (b, h, w) = self.dims(x)?;
        let (hw, k, cout) = (h * w, self.patch_len(), self.cout);
        let mut out = Tensor::zeros(vec![b, h, w, cout]);
        let mut cols = if self.size == 1 {
            Vec::new()
        } else {
            vec![0.0; hw * k]
        };
        for (xb, yb) in x
            .data()
            .chunks_exact(hw * self.cin)
            .zip(out.data_mut().chunks_exact_mut(hw * cout))
        {
            for row in yb.chunks_exact_mut(cout) {
                row.copy_from_slice(&self.bias);
            }
            if self.size == 1 {
                gemm(
                    hw,
                    k,
                    cout,
                    xb,
                    row_major(k),
                    &self.weight,
                    row_major(cout),
                    1.0,
                    yb,
                );
            } else {
                self.im2col(xb, h, w, &mut cols);
                gemm(
                    hw,
                    k,
                    cout,
                    &cols,
                    row_major(k),
                    &self.weight,
                    row_major(cout),
                    1.0,
                    yb,
                );
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, dy: Tensor, input_grad: bool) -> Result<Option<Tensor>, NnError> {
        let x = self.input.take().ok_or(NnError::NoForwardCache)?;
        let (b, h, w) = self.dims(&x)?;
        let (hw, k, cout) = (h * w, self.patch_len(), self.cout);
        if dy.shape() != [b, h, w, cout] {
            return Err(NnError::Shape(format!(
                "conv2d upstream gradient {:?} does not match output [{b}, {h}, {w}, {cout}]",
                dy.shape()
            )));
        }
        self.grad_weight.fill(0.0);
        self.grad_bias.fill(0.0);
        let mut dx = input_grad.then(|| Tensor::zeros(x.shape().to_vec()));
        let mut cols = if self.size == 1 {
            Vec::new()
        } else {
            vec![0.0; hw * k]
        };
        let mut dcols = if input_grad && self.size != 1 {
            vec![0.0; hw * k]
        } else {
            Vec::new()
        };
        for i in 0..b {
            let xb = &x.data()[i * hw * self.cin..(i + 1) * hw * self.cin];
            let dyb = &dy.data()[i * hw * cout..(i + 1) * hw * cout];
            for row in dyb.chunks_exact(cout) {
                for (g, d) in self.grad_bias.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let patches: &[f64] = if self.size == 1 {
                xb
            } else {
                self.im2col(xb, h, w, &mut cols);
                &cols
            };
            gemm(
                k,
                hw,
                cout,
                patches,
                transposed(k),
                dyb,
                row_major(cout),
                1.0,
                &mut self.grad_weight,
            );
            if let Some(dx) = dx.as_mut() {
                let dxb = &mut dx.data_mut()[i * hw * self.cin..(i + 1) * hw * self.cin];
                if self.size == 1 {
                    gemm(
                        hw,
                        cout,
                        k,
                        dyb,
                        row_major(cout),
                        &self.weight,
                        transposed(cout),
                        0.0,
                        dxb,
                    );
                } else {
                    gemm(
                        hw,
                        cout,
                        k,
                        dyb,
                        row_major(cout),
                        &self.weight,
                        transposed(cout),
                        0.0,
                        &mut dcols,
                    );
                    self.col2im(&dcols, h, w, dxb);
                }
            }
        }
        Ok(dx)
    }
}

#[derive(Clone)]
struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

/// Per-channel normalization over every axis but the last.
#[derive(Clone)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub grad_gamma: Vec<f64>,
    pub grad_beta: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache>,
}

impl std::fmt::Debug for BatchNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BatchNorm")
            .field("channels", &self.channels)
            .field("momentum", &self.momentum)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl BatchNorm {
    pub const MOMENTUM: f64 = 0.99;
    pub const EPS: f64 = 1e-5;

    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            grad_gamma: vec![0.0; channels],
            grad_beta: vec![0.0; channels],
            momentum: Self::MOMENTUM,
            eps: Self::EPS,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let c = self.channels;
        if x.shape().last() != Some(&c) {
            return Err(NnError::Shape(format!(
                "batchnorm expects {c} channels in the last axis, got {:?}",
                x.shape()
            )));
        }
        let n = x.len() / c;
        let (mean, var, batch_stats) = if mode == Mode::Train {
            if x.batch() < 2 {
                return Err(NnError::BatchTooSmall(x.batch()));
            }
            let mut mean = vec![0.0; c];
            for row in x.data().chunks_exact(c) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            let mut var = vec![0.0; c];
            for row in x.data().chunks_exact(c) {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s /= n as f64);
            for (r, m) in self.running_mean.iter_mut().zip(&mean) {
                *r = self.momentum * *r + (1.0 - self.momentum) * m;
            }
            for (r, v) in self.running_var.iter_mut().zip(&var) {
                *r = self.momentum * *r + (1.0 - self.momentum) * v;
            }
            (mean, var, true)
        } else {
            (self.running_mean.clone(), self.running_var.clone(), false)
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let shape = x.shape().to_vec();
        let mut xhat = x.into_data();
        for row in xhat.chunks_exact_mut(c) {
            for ((v, m), s) in row.iter_mut().zip(&mean).zip(&inv_std) {
                *v = (*v - m) * s;
            }
        }
        let mut out = xhat.clone();
        for row in out.chunks_exact_mut(c) {
            for ((v, g), b) in row.iter_mut().zip(&self.gamma).zip(&self.beta) {
                *v = g * *v + b;
            }
        }
        self.cache = (mode != Mode::Infer).then_some(BnCache {
            xhat,
            inv_std,
            batch_stats,
        });
        Tensor::new(shape, out)
    }

    /// Normalization with the running statistics.
    pub fn infer(&self, x: Tensor) -> Result<Tensor, NnError> {
        let c = self.channels;
        if x.shape().last() != Some(&c) {
            return Err(NnError::Shape(format!(
                "batchnorm expects {c} channels in the last axis, got {:?}",
                x.shape()
            )));
        }
        let scale: Vec<f64> = (0..c)
            .map(|ch| self.gamma[ch] / (self.running_var[ch] + self.eps).sqrt())
            .collect();
        let mut y = x;
        for row in y.data_mut().chunks_exact_mut(c) {
            for ch in 0..c {
                row[ch] = (row[ch] - self.running_mean[ch]) * scale[ch] + self.beta[ch];
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor, NnError> {
        let cache = self.cache.take().ok_or(NnError::NoForwardCache)?;
        let c = self.channels;
        if dy.len() != cache.xhat.len() {
            return Err(NnError::Shape(
                "batchnorm upstream gradient size mismatch".into(),
            ));
        }
        let n = (dy.len() / c) as f64;
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for (g, xh) in dy.data().chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for ch in 0..c {
                sum_dy[ch] += g[ch];
                sum_dy_xhat[ch] += g[ch] * xh[ch];
            }
        }
        self.grad_gamma.copy_from_slice(&sum_dy_xhat);
        self.grad_beta.copy_from_slice(&sum_dy);
        let shape = dy.shape().to_vec();
        let mut dx = dy.into_data();
        for (g, xh) in dx.chunks_exact_mut(c).zip(cache.xhat.chunks_exact(c)) {
            for ch in 0..c {
                let scale = self.gamma[ch] * cache.inv_std[ch];
                g[ch] = if cache.batch_stats {
                    scale * (g[ch] - sum_dy[ch] / n - xh[ch] * sum_dy_xhat[ch] / n)
                } else {
                    scale * g[ch]
                };
            }
        }
        Tensor::new(shape, dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn forward(&mut self, mut x: Tensor, mode: Mode) -> Tensor {
        let mut mask = Vec::new();
        let keep_mask = mode != Mode::Infer;
        if keep_mask {
            mask.reserve(x.len());
        }
        for v in x.data_mut() {
            let on = *v > 0.0;
            if !on {
                *v = 0.0;
            }
            if keep_mask {
                mask.push(on);
            }
        }
        self.mask = keep_mask.then_some(mask);
        x
    }

    pub fn backward(&mut self, mut dy: Tensor) -> Result<Tensor, NnError> {
        let mask = self.mask.take().ok_or(NnError::NoForwardCache)?;
        if mask.len() != dy.len() {
            return Err(NnError::Shape(
                "relu upstream gradient size mismatch".into(),
            ));
        }
        for (g, on) in dy.data_mut().iter_mut().zip(mask) {
            if !on {
                *g = 0.0;
            }
        }
        Ok(dy)
    }
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    cache: Option<(Vec<usize>, Vec<u32>)>,
}

impl MaxPool2 {
    pub fn output_dims(h: usize, w: usize) -> Result<(usize, usize), NnError> {
        if h < 2 || w < 2 {
            return Err(NnError::Shape(format!(
                "2x2 max pooling needs spatial dims >= 2, got {h}x{w}"
            )));
        }
        Ok((h / 2, w / 2))
    }

    pub fn forward(&mut self, x: Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let (out, argmax) = Self::pool(&x)?;
        self.cache = (mode != Mode::Infer).then(|| (x.shape().to_vec(), argmax));
        Ok(out)
    }

    /// Pooled output and, per output cell, the flat input index of its maximum.
    pub fn pool(x: &Tensor) -> Result<(Tensor, Vec<u32>), NnError> {
        expect_rank(x, 4, "maxpool")?;
        let [b, h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let (oh, ow) = Self::output_dims(h, w)?;
        let mut out = Tensor::zeros(vec![b, oh, ow, c]);
        let mut argmax = vec![0u32; out.len()];
        let data = x.data();
        let mut o = 0;
        for bi in 0..b {
            for y in 0..oh {
                for xx in 0..ow {
                    for ch in 0..c {
                        let base = |dy: usize, dx: usize| {
                            ((bi * h + 2 * y + dy) * w + 2 * xx + dx) * c + ch
                        };
                        let mut best = base(0, 0);
                        for idx in [base(0, 1), base(1, 0), base(1, 1)] {
                            if data[idx] > data[best] {
                                best = idx;
                            }
                        }
                        out.data_mut()[o] = data[best];
                        argmax[o] = best as u32;
                        o += 1;
                    }
                }
            }
        }
        Ok((out, argmax))
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor, NnError> {
        let (shape, argmax) = self.cache.take().ok_or(NnError::NoForwardCache)?;
        if argmax.len() != dy.len() {
            return Err(NnError::Shape(
                "maxpool upstream gradient size mismatch".into(),
            ));
        }
        let mut dx = Tensor::zeros(shape);
        for (g, &idx) in dy.data().iter().zip(&argmax) {
            dx.data_mut()[idx as usize] += g;
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Flatten {
    shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn forward(&mut self, x: Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let b = x.batch();
        let n = x.len() / b;
        if mode != Mode::Infer {
            self.shape = Some(x.shape().to_vec());
        }
        x.reshape(vec![b, n])
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor, NnError> {
        let shape = self.shape.take().ok_or(NnError::NoForwardCache)?;
        dy.reshape(shape)
    }
}

/// Fully connected layer, `y = x·W + b` with `W` laid out `[inputs, outputs]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            grad_weight: vec![0.0; inputs * outputs],
            grad_bias: vec![0.0; outputs],
            input: None,
        }
    }

    pub fn init(&mut self, rng: &mut ModelRng) {
        he_uniform(&mut self.weight, self.inputs, rng);
        self.bias.fill(0.0);
    }

    pub fn forward(&mut self, x: Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let out = self.infer(&x)?;
        self.input = (mode != Mode::Infer).then_some(x);
        Ok(out)
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        expect_rank(x, 2, "dense")?;
        if x.shape()[1] != self.inputs {
            return Err(NnError::Shape(format!(
                "dense expects {} inputs, got {}",
                self.inputs,
                x.shape()[1]
            )));
        }
        let b = x.batch();
        let mut out = Tensor::zeros(vec![b, self.outputs]);
        for row in out.data_mut().chunks_exact_mut(self.outputs) {
            row.copy_from_slice(&self.bias);
        }
        gemm(
            b,
            self.inputs,
            self.outputs,
            x.data(),
            row_major(self.inputs),
            &self.weight,
            row_major(self.outputs),
            1.0,
            out.data_mut(),
        );
        Ok(out)
    }

    pub fn backward(&mut self, dy: Tensor, input_grad: bool) -> Result<Option<Tensor>, NnError> {
        let x = self.input.take().ok_or(NnError::NoForwardCache)?;
        let b = x.batch();
        if dy.shape() != [b, self.outputs] {
            return Err(NnError::Shape(format!(
                "dense upstream gradient {:?} does not match [{b}, {}]",
                dy.shape(),
                self.outputs
            )));
        }
        gemm(
            self.inputs,
            b,
            self.outputs,
            x.data(),
            transposed(self.inputs),
            dy.data(),
            row_major(self.outputs),
            0.0,
            &mut self.grad_weight,
        );
        self.grad_bias.fill(0.0);
        for row in dy.data().chunks_exact(self.outputs) {
            for (g, d) in self.grad_bias.iter_mut().zip(row) {
                *g += d;
            }
        }
        if !input_grad {
            return Ok(None);
        }
        let mut dx = Tensor::zeros(vec![b, self.inputs]);
        gemm(
            b,
            self.outputs,
            self.inputs,
            dy.data(),
            row_major(self.outputs),
            &self.weight,
            transposed(self.outputs),
            0.0,
            dx.data_mut(),
        );
        Ok(Some(dx))
    }
}

/// Inverted dropout: survivors are scaled by `1/(1-p)` so inference is the identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub p: f64,
    mask: Option<Option<Vec<f64>>>,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&p) {
            return Err(NnError::InvalidDropout(p));
        }
        Ok(Self { p, mask: None })
    }

    pub fn forward(&mut self, mut x: Tensor, mode: Mode, rng: &mut ModelRng) -> Tensor {
        if !mode.dropout_active() || self.p == 0.0 {
            self.mask = (mode != Mode::Infer).then_some(None);
            return x;
        }
        let scale = 1.0 / (1.0 - self.p);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| {
                if rng.random::<f64>() < self.p {
                    0.0
                } else {
                    scale
                }
            })
            .collect();
        for (v, m) in x.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(Some(mask));
        x
    }

    pub fn backward(&mut self, mut dy: Tensor) -> Result<Tensor, NnError> {
        match self.mask.take().ok_or(NnError::NoForwardCache)? {
            None => Ok(dy),
            Some(mask) => {
                for (g, m) in dy.data_mut().iter_mut().zip(mask) {
                    *g *= m;
                }
                Ok(dy)
            }
        }
    }
}

/// Serializable description of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv {
        size: usize,
        cin: usize,
        cout: usize,
    },
    BatchNorm {
        channels: usize,
    },
    Relu,
    MaxPool,
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Dropout {
        p: f64,
    },
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(Conv2d),
    BatchNorm(BatchNorm),
    Relu(Relu),
    MaxPool(MaxPool2),
    Flatten(Flatten),
    Dense(Dense),
    Dropout(Dropout),
}

impl Layer {
    pub fn forward(
        &mut self,
        x: Tensor,
        mode: Mode,
        rng: &mut ModelRng,
    ) -> Result<Tensor, NnError> {
        match self {
            Layer::Conv(l) => l.forward(x, mode),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => Ok(l.forward(x, mode)),
            Layer::MaxPool(l) => l.forward(x, mode),
            Layer::Flatten(l) => l.forward(x, mode),
            Layer::Dense(l) => l.forward(x, mode),
            Layer::Dropout(l) => Ok(l.forward(x, mode, rng)),
        }
    }

    /// Inference-mode forward pass that leaves the layer untouched.
    pub fn infer(&self, x: Tensor) -> Result<Tensor, NnError> {
        match self {
            Layer::Conv(l) => l.infer(&x),
            Layer::BatchNorm(l) => l.infer(x),
            Layer::Relu(_) => {
                let mut x = x;
                x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                Ok(x)
            }
            Layer::MaxPool(_) => MaxPool2::pool(&x).map(|(y, _)| y),
            Layer::Flatten(_) => {
                let b = x.batch();
                let n = x.len() / b;
                x.reshape(vec![b, n])
            }
            Layer::Dense(l) => l.infer(&x),
            Layer::Dropout(_) => Ok(x),
        }
    }

    /// Gradient w.r.t. the layer input; `None` when `input_grad` is false and
    /// the layer could skip that work.
    pub fn backward(&mut self, dy: Tensor, input_grad: bool) -> Result<Option<Tensor>, NnError> {
        match self {
            Layer::Conv(l) => l.backward(dy, input_grad),
            Layer::Dense(l) => l.backward(dy, input_grad),
            Layer::BatchNorm(l) => l.backward(dy).map(Some),
            Layer::Relu(l) => l.backward(dy).map(Some),
            Layer::MaxPool(l) => l.backward(dy).map(Some),
            Layer::Flatten(l) => l.backward(dy).map(Some),
            Layer::Dropout(l) => l.backward(dy).map(Some),
        }
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        match self {
            Layer::Conv(l) => vec![
                ParamMut {
                    name: "conv.weight",
                    value: &mut l.weight,
                    grad: &l.grad_weight,
                },
                ParamMut {
                    name: "conv.bias",
                    value: &mut l.bias,
                    grad: &l.grad_bias,
                },
            ],
            Layer::BatchNorm(l) => vec![
                ParamMut {
                    name: "bn.gamma",
                    value: &mut l.gamma,
                    grad: &l.grad_gamma,
                },
                ParamMut {
                    name: "bn.beta",
                    value: &mut l.beta,
                    grad: &l.grad_beta,
                },
            ],
            Layer::Dense(l) => vec![
                ParamMut {
                    name: "dense.weight",
                    value: &mut l.weight,
                    grad: &l.grad_weight,
                },
                ParamMut {
                    name: "dense.bias",
                    value: &mut l.bias,
                    grad: &l.grad_bias,
                },
            ],
            _ => Vec::new(),
        }
    }

    /// Number of trainable scalars.
    pub fn param_len(&self) -> usize {
        match self {
            Layer::Conv(l) => l.weight.len() + l.bias.len(),
            Layer::BatchNorm(l) => l.gamma.len() + l.beta.len(),
            Layer::Dense(l) => l.weight.len() + l.bias.len(),
            _ => 0,
        }
    }

    /// Every persisted buffer in declaration order: parameters, then running statistics.
    pub fn state(&self) -> Vec<&[f64]> {
        match self {
            Layer::Conv(l) => vec![&l.weight, &l.bias],
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta, &l.running_mean, &l.running_var],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn state_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Conv(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm(l) => vec![
                &mut l.gamma,
                &mut l.beta,
                &mut l.running_mean,
                &mut l.running_var,
            ],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv(l) => LayerSpec::Conv {
                size: l.size,
                cin: l.cin,
                cout: l.cout,
            },
            Layer::BatchNorm(l) => LayerSpec::BatchNorm {
                channels: l.channels,
            },
            Layer::Relu(_) => LayerSpec::Relu,
            Layer::MaxPool(_) => LayerSpec::MaxPool,
            Layer::Flatten(_) => LayerSpec::Flatten,
            Layer::Dense(l) => LayerSpec::Dense {
                inputs: l.inputs,
                outputs: l.outputs,
            },
            Layer::Dropout(l) => LayerSpec::Dropout { p: l.p },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv2d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu(_) => "relu",
            Layer::MaxPool(_) => "maxpool2x2",
            Layer::Flatten(_) => "flatten",
            Layer::Dense(_) => "dense",
            Layer::Dropout(_) => "dropout",
        }
    }
}
