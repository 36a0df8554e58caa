use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

const CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy over all B*L cells.
/// Probabilities are clamped to [1e-7, 1-1e-7] before the logs.
pub fn bce_loss(p: &Tensor, y: &Tensor) -> Result<f64> {
    if p.shape() != y.shape() {
        return Err(Error::shape(format!(
            "bce_loss: predictions {:?} vs targets {:?}",
            p.shape(),
            y.shape()
        )));
    }
    let n = p.numel() as f64;
    let mut total = 0.0;
    for (&pv, &yv) in p.data().iter().zip(y.data().iter()) {
        let pc = pv.clamp(CLAMP, 1.0 - CLAMP);
        total -= yv * pc.ln() + (1.0 - yv) * (1.0 - pc).ln();
    }
    Ok(total / n)
}

/// dL/dp for [`bce_loss`]. Exact for p strictly inside the clamp interval.
pub fn bce_backward(p: &Tensor, y: &Tensor) -> Result<Tensor> {
    if p.shape() != y.shape() {
        return Err(Error::shape("bce_backward shape mismatch"));
    }
    let n = p.numel() as f64;
    let data: Vec<f64> = p
        .data()
        .iter()
        .zip(y.data().iter())
        .map(|(&pv, &yv)| {
            let pc = pv.clamp(CLAMP, 1.0 - CLAMP);
            ((1.0 - yv) / (1.0 - pc) - yv / pc) / n
        })
        .collect();
    Ok(Tensor::from_vec(p.shape(), data))
}
