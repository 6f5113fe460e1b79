use super::{NnError, Tensor};

/// Row-wise softmax of `[batch, classes]` logits, max-subtracted.
pub fn softmax(logits: &Tensor) -> Result<Tensor, NnError> {
    if logits.shape().len() != 2 {
        return Err(NnError::Shape(format!(
            "softmax expects [batch, classes], got {:?}",
            logits.shape()
        )));
    }
    let c = logits.shape()[1];
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(out)
}

fn check_one_hot(targets: &Tensor, shape: &[usize]) -> Result<Vec<usize>, NnError> {
    if targets.shape() != shape {
        return Err(NnError::Shape(format!(
            "targets {:?} do not match logits {shape:?}",
            targets.shape()
        )));
    }
    targets
        .data()
        .chunks_exact(shape[1])
        .map(|row| {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(NnError::NotOneHot);
            }
            Ok(row.iter().position(|&v| v == 1.0).unwrap())
        })
        .collect()
}

/// Mean categorical cross-entropy and its gradient w.r.t. the logits,
/// `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &Tensor) -> Result<(f64, Tensor), NnError> {
    let labels = check_one_hot(targets, logits.shape())?;
    softmax_cross_entropy_indices(logits, &labels)
}

pub fn softmax_cross_entropy_indices(
    logits: &Tensor,
    labels: &[usize],
) -> Result<(f64, Tensor), NnError> {
    let probs = softmax(logits)?;
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != b {
        return Err(NnError::Shape(format!(
            "{} labels for a batch of {b}",
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l >= c) {
        return Err(NnError::NotOneHot);
    }
    let mut loss = 0.0;
    let mut grad = probs;
    for (i, (row, &label)) in logits.data().chunks_exact(c).zip(labels).enumerate() {
        // log-sum-exp form stays finite for extreme logits
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        let g = &mut grad.data_mut()[i * c..(i + 1) * c];
        g[label] -= 1.0;
        g.iter_mut().for_each(|v| *v /= b as f64);
    }
    if !loss.is_finite() {
        return Err(NnError::NonFinite("cross-entropy"));
    }
    Ok((loss / b as f64, grad))
}
