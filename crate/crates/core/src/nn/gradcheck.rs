//! Central finite-difference checks of analytic gradients.

use rand::{Rng, SeedableRng};
use serde::Serialize;

use super::layers::Layer;
use super::{CnnModel, Mode, ModelRng, NnError, Tensor};

/// Outcome for one gradient tensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub layer: usize,
    pub layer_name: &'static str,
    pub tensor: &'static str,
    pub checked: usize,
    pub rel_error: f64,
}

/// `‖a − n‖ / max(‖a‖, ‖n‖, 1e-7)` over the compared entries.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied())
        .max(norm(&mut numeric.iter().copied()))
        .max(1e-7);
    diff / scale
}

/// Indices to probe: all of them, or `max` evenly strided ones.
fn probe_indices(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        let stride = len.div_ceil(max);
        (0..len).step_by(stride).collect()
    }
}

/// Checks every parameter tensor of `model` under `mode`. Dropout masks are
/// frozen by restarting the mask stream from `dropout_seed` before each pass.
pub fn check_model(
    model: &CnnModel,
    x: &Tensor,
    labels: &[usize],
    mode: Mode,
    h: f64,
    dropout_seed: u64,
    max_per_tensor: usize,
) -> Result<Vec<TensorCheck>, NnError> {
    let mut m = model.clone();
    m.reseed_dropout(dropout_seed);
    m.loss_and_gradients(x.clone(), labels, mode)?;
    let analytic: Vec<Vec<Vec<f64>>> = m
        .layers_mut()
        .iter_mut()
        .map(|l| l.params_mut().iter().map(|p| p.grad.to_vec()).collect())
        .collect();

    let mut out = Vec::new();
    for (li, grads) in analytic.iter().enumerate() {
        for (pi, grad) in grads.iter().enumerate() {
            let idx = probe_indices(grad.len(), max_per_tensor);
            let mut numeric = Vec::with_capacity(idx.len());
            for &j in &idx {
                let eval = |delta: f64| -> Result<f64, NnError> {
                    let mut probe = m.clone();
                    probe.layers_mut()[li].params_mut()[pi].value[j] += delta;
                    probe.reseed_dropout(dropout_seed);
                    probe.loss(x.clone(), labels, mode)
                };
                numeric.push((eval(h)? - eval(-h)?) / (2.0 * h));
            }
            let picked: Vec<f64> = idx.iter().map(|&j| grad[j]).collect();
            let layer = &mut m.layers_mut()[li];
            out.push(TensorCheck {
                layer: li,
                layer_name: layer.name(),
                tensor: layer.params_mut()[pi].name,
                checked: idx.len(),
                rel_error: relative_error(&picked, &numeric),
            });
        }
    }
    Ok(out)
}

/// Checks one layer in isolation against the scalar loss `Σ wᵢ·yᵢ` with
/// fixed random weights `w`, covering its input gradient and parameters.
pub fn check_layer(
    layer: &Layer,
    x: &Tensor,
    mode: Mode,
    h: f64,
    seed: u64,
) -> Result<Vec<TensorCheck>, NnError> {
    let forward = |l: &mut Layer, input: Tensor| -> Result<Tensor, NnError> {
        let mut rng = ModelRng::seed_from_u64(seed);
        l.forward(input, mode, &mut rng)
    };
    let mut l = layer.clone();
    let y = forward(&mut l, x.clone())?;
    let mut wrng = ModelRng::seed_from_u64(seed ^ 0x5eed);
    let w: Vec<f64> = (0..y.len()).map(|_| wrng.random_range(-1.0..1.0)).collect();
    let objective = |y: &Tensor| -> f64 { y.data().iter().zip(&w).map(|(a, b)| a * b).sum() };
    let dy = Tensor::new(y.shape().to_vec(), w.clone())?;
    let dx = l.backward(dy, true)?.ok_or(NnError::NoForwardCache)?;

    let mut out = Vec::new();
    let mut numeric = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let eval = |delta: f64| -> Result<f64, NnError> {
            let mut xp = x.clone();
            xp.data_mut()[j] += delta;
            Ok(objective(&forward(&mut layer.clone(), xp)?))
        };
        numeric.push((eval(h)? - eval(-h)?) / (2.0 * h));
    }
    out.push(TensorCheck {
        layer: 0,
        layer_name: l.name(),
        tensor: "input",
        checked: x.len(),
        rel_error: relative_error(dx.data(), &numeric),
    });

    let grads: Vec<(&'static str, Vec<f64>)> = l
        .params_mut()
        .iter()
        .map(|p| (p.name, p.grad.to_vec()))
        .collect();
    for (pi, (name, grad)) in grads.iter().enumerate() {
        let mut numeric = Vec::with_capacity(grad.len());
        for j in 0..grad.len() {
            let eval = |delta: f64| -> Result<f64, NnError> {
                let mut probe = layer.clone();
                probe.params_mut()[pi].value[j] += delta;
                Ok(objective(&forward(&mut probe, x.clone())?))
            };
            numeric.push((eval(h)? - eval(-h)?) / (2.0 * h));
        }
        out.push(TensorCheck {
            layer: 0,
            layer_name: l.name(),
            tensor: name,
            checked: grad.len(),
            rel_error: relative_error(grad, &numeric),
        });
    }
    Ok(out)
}
