use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::{matmul_bias, Tensor};

/// Forward/inference switch. Batch norm and dropout behave differently per mode;
/// everything else ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

/// y = xW + b for x `[B,in]`, W `[in,out]`, b `[out]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    matmul_bias(x, w, Some(b))
}

/// Gradients of a dense layer: returns (dx, dw, db).
pub fn dense_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (batch, d_in) = (x.shape()[0], x.shape()[1]);
    let d_out = w.shape()[1];
    dy.check_shape(&[batch, d_out], "dense_backward dy")?;

    // dx = dy W^T
    let mut dx = vec![0.0; batch * d_in];
    for i in 0..batch {
        let dyr = &dy.data()[i * d_out..(i + 1) * d_out];
        let dxr = &mut dx[i * d_in..(i + 1) * d_in];
        for k in 0..d_in {
            let wr = &w.data()[k * d_out..(k + 1) * d_out];
            let mut acc = 0.0;
            for (dyv, wv) in dyr.iter().zip(wr.iter()) {
                acc += dyv * wv;
            }
            dxr[k] = acc;
        }
    }

    // dw = x^T dy
    let mut dw = vec![0.0; d_in * d_out];
    for i in 0..batch {
        let xr = &x.data()[i * d_in..(i + 1) * d_in];
        let dyr = &dy.data()[i * d_out..(i + 1) * d_out];
        for (k, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let dwr = &mut dw[k * d_out..(k + 1) * d_out];
            for (dwv, &dyv) in dwr.iter_mut().zip(dyr.iter()) {
                *dwv += xv * dyv;
            }
        }
    }

    // db = sum over batch of dy
    let mut db = vec![0.0; d_out];
    for i in 0..batch {
        let dyr = &dy.data()[i * d_out..(i + 1) * d_out];
        for (dbv, &dyv) in db.iter_mut().zip(dyr.iter()) {
            *dbv += dyv;
        }
    }

    Ok((
        Tensor::from_vec(&[batch, d_in], dx),
        Tensor::from_vec(&[d_in, d_out], dw),
        Tensor::from_vec(&[d_out], db),
    ))
}

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

/// Valid (un-padded) temporal convolution.
///
/// x `[B,n,d]`, filters `[w,d,c]`, optional bias `[c]` -> `[B,n-w+1,c]`.
/// The filter spans the full depth axis; only the length axis slides.
pub fn conv1d_forward(x: &Tensor, filters: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    if x.rank() != 3 || filters.rank() != 3 {
        return Err(Error::shape("conv1d expects x [B,n,d], filters [w,d,c]"));
    }
    let (b, n, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (w, fd, c) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    if fd != d {
        return Err(Error::shape(format!("conv1d depth {d} vs filter depth {fd}")));
    }
    if n < w {
        return Err(Error::shape(format!(
            "conv1d input length {n} shorter than filter width {w}"
        )));
    }
    if let Some(bias) = bias {
        bias.check_shape(&[c], "conv1d bias")?;
    }
    let t_out = n - w + 1;
    let mut out = vec![0.0; b * t_out * c];
    for bi in 0..b {
        for t in 0..t_out {
            let or = &mut out[(bi * t_out + t) * c..(bi * t_out + t + 1) * c];
            if let Some(bias) = bias {
                or.copy_from_slice(bias.data());
            }
            for i in 0..w {
                let xr = &x.data()[(bi * n + t + i) * d..(bi * n + t + i + 1) * d];
                for (j, &xv) in xr.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    let fr = &filters.data()[(i * d + j) * c..(i * d + j + 1) * c];
                    for (ov, &fv) in or.iter_mut().zip(fr.iter()) {
                        *ov += xv * fv;
                    }
                }
            }
        }
    }
    Ok(Tensor::from_vec(&[b, t_out, c], out))
}

/// Gradients of conv1d: returns (dx, dfilters, dbias).
pub fn conv1d_backward(
    x: &Tensor,
    filters: &Tensor,
    dy: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (b, n, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (w, _, c) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    let t_out = n - w + 1;
    dy.check_shape(&[b, t_out, c], "conv1d_backward dy")?;

    let mut dx = vec![0.0; b * n * d];
    let mut df = vec![0.0; w * d * c];
    let mut db = vec![0.0; c];
    for bi in 0..b {
        for t in 0..t_out {
            let dyr = &dy.data()[(bi * t_out + t) * c..(bi * t_out + t + 1) * c];
            for (ch, &g) in dyr.iter().enumerate() {
                db[ch] += g;
            }
            for i in 0..w {
                let xr = &x.data()[(bi * n + t + i) * d..(bi * n + t + i + 1) * d];
                let dxr = &mut dx[(bi * n + t + i) * d..(bi * n + t + i + 1) * d];
                for j in 0..d {
                    let fr = &filters.data()[(i * d + j) * c..(i * d + j + 1) * c];
                    let dfr = &mut df[(i * d + j) * c..(i * d + j + 1) * c];
                    let xv = xr[j];
                    let mut acc = 0.0;
                    for ch in 0..c {
                        acc += dyr[ch] * fr[ch];
                        dfr[ch] += dyr[ch] * xv;
                    }
                    dxr[j] += acc;
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(&[b, n, d], dx),
        Tensor::from_vec(&[w, d, c], df),
        Tensor::from_vec(&[c], db),
    ))
}

// ---------------------------------------------------------------------------
// max over time
// ---------------------------------------------------------------------------

/// Per-channel max over the temporal axis: `[B,t,c]` -> `[B,c]`.
/// Ties break toward the smallest index. Also returns the argmax positions
/// needed by the backward pass.
pub fn max_over_time_forward(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    if x.rank() != 3 {
        return Err(Error::shape("max_over_time expects [B,t,c]"));
    }
    let (b, t, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if t == 0 {
        return Err(Error::invalid("max_over_time: empty temporal axis"));
    }
    let mut out = vec![f64::NEG_INFINITY; b * c];
    let mut arg = vec![0usize; b * c];
    for bi in 0..b {
        for ti in 0..t {
            let xr = &x.data()[(bi * t + ti) * c..(bi * t + ti + 1) * c];
            for ch in 0..c {
                if xr[ch] > out[bi * c + ch] {
                    out[bi * c + ch] = xr[ch];
                    arg[bi * c + ch] = ti;
                }
            }
        }
    }
    Ok((Tensor::from_vec(&[b, c], out), arg))
}

/// Routes the incoming gradient to the argmax positions only.
pub fn max_over_time_backward(x_shape: &[usize], argmax: &[usize], dy: &Tensor) -> Result<Tensor> {
    let (b, t, c) = (x_shape[0], x_shape[1], x_shape[2]);
    dy.check_shape(&[b, c], "max_over_time_backward dy")?;
    let mut dx = vec![0.0; b * t * c];
    for bi in 0..b {
        for ch in 0..c {
            let ti = argmax[bi * c + ch];
            dx[(bi * t + ti) * c + ch] += dy.data()[bi * c + ch];
        }
    }
    Ok(Tensor::from_vec(x_shape, dx))
}

// ---------------------------------------------------------------------------
// batch norm
// ---------------------------------------------------------------------------

/// Per-feature batch normalization over `[B,f]` inputs.
///
/// Train mode normalizes by batch statistics (biased variance, eps 1e-5) and
/// updates running statistics with momentum 0.9; infer mode uses the running
/// statistics only.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
}

/// Intermediates saved by the train-mode forward pass for the backward pass.
pub struct BatchNormCache {
    x_hat: Tensor,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gamma: Tensor::from_vec(&[features], vec![1.0; features]),
            beta: Tensor::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::from_vec(&[features], vec![1.0; features]),
            momentum: 0.9,
            eps: 1e-5,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.shape()[0]
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<(Tensor, Option<BatchNormCache>)> {
        if x.rank() != 2 || x.shape()[1] != self.features() {
            return Err(Error::shape(format!(
                "batch_norm: expected [B,{}], got {:?}",
                self.features(),
                x.shape()
            )));
        }
        let (b, f) = (x.shape()[0], x.shape()[1]);
        match mode {
            Mode::Train => {
                if b < 2 {
                    return Err(Error::invalid(
                        "batch_norm requires batch size >= 2 in train mode",
                    ));
                }
                let mut mean = vec![0.0; f];
                for i in 0..b {
                    for (m, &v) in mean.iter_mut().zip(x.row(i)) {
                        *m += v;
                    }
                }
                for m in mean.iter_mut() {
                    *m /= b as f64;
                }
                let mut var = vec![0.0; f];
                for i in 0..b {
                    for j in 0..f {
                        let d = x.row(i)[j] - mean[j];
                        var[j] += d * d;
                    }
                }
                for v in var.iter_mut() {
                    *v /= b as f64;
                }

                let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + self.eps).sqrt()).collect();
                let mut x_hat = vec![0.0; b * f];
                let mut y = vec![0.0; b * f];
                for i in 0..b {
                    for j in 0..f {
                        let xh = (x.row(i)[j] - mean[j]) * inv_std[j];
                        x_hat[i * f + j] = xh;
                        y[i * f + j] = self.gamma.data()[j] * xh + self.beta.data()[j];
                    }
                }
                for j in 0..f {
                    let rm = &mut self.running_mean.data_mut()[j];
                    *rm = self.momentum * *rm + (1.0 - self.momentum) * mean[j];
                    let rv = &mut self.running_var.data_mut()[j];
                    *rv = self.momentum * *rv + (1.0 - self.momentum) * var[j];
                }
                Ok((
                    Tensor::from_vec(&[b, f], y),
                    Some(BatchNormCache {
                        x_hat: Tensor::from_vec(&[b, f], x_hat),
                        inv_std,
                    }),
                ))
            }
            Mode::Infer => Ok((self.infer(x)?, None)),
        }
    }

    /// Infer-mode normalization using the running statistics; never mutates.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 || x.shape()[1] != self.features() {
            return Err(Error::shape(format!(
                "batch_norm: expected [B,{}], got {:?}",
                self.features(),
                x.shape()
            )));
        }
        let (b, f) = (x.shape()[0], x.shape()[1]);
        let mut y = vec![0.0; b * f];
        for i in 0..b {
            for j in 0..f {
                let inv = 1.0 / (self.running_var.data()[j] + self.eps).sqrt();
                let xh = (x.row(i)[j] - self.running_mean.data()[j]) * inv;
                y[i * f + j] = self.gamma.data()[j] * xh + self.beta.data()[j];
            }
        }
        Ok(Tensor::from_vec(&[b, f], y))
    }

    /// Train-mode backward: returns (dx, dgamma, dbeta).
    pub fn backward(&self, cache: &BatchNormCache, dy: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let (b, f) = (dy.shape()[0], dy.shape()[1]);
        cache.x_hat.check_shape(&[b, f], "batch_norm backward cache")?;

        let mut dgamma = vec![0.0; f];
        let mut dbeta = vec![0.0; f];
        for i in 0..b {
            for j in 0..f {
                let g = dy.data()[i * f + j];
                dgamma[j] += g * cache.x_hat.data()[i * f + j];
                dbeta[j] += g;
            }
        }

        // dx = (gamma * inv_std / B) * (B*dy - sum(dy) - x_hat * sum(dy*x_hat))
        let mut dx = vec![0.0; b * f];
        for j in 0..f {
            let sum_dy = dbeta[j];
            let sum_dy_xhat = dgamma[j];
            let coef = self.gamma.data()[j] * cache.inv_std[j] / b as f64;
            for i in 0..b {
                let g = dy.data()[i * f + j];
                let xh = cache.x_hat.data()[i * f + j];
                dx[i * f + j] = coef * (b as f64 * g - sum_dy - xh * sum_dy_xhat);
            }
        }
        Ok((
            Tensor::from_vec(&[b, f], dx),
            Tensor::from_vec(&[f], dgamma),
            Tensor::from_vec(&[f], dbeta),
        ))
    }
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

/// Inverted dropout. Kept units are scaled by 1/(1-rate) so that infer mode
/// is the identity. The mask is a pure function of the seed and the tensor
/// shape; values never influence it. Returns (output, mask).
pub fn dropout(x: &Tensor, rate: f64, seed: u64, mode: Mode) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} outside [0,1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        let mask = Tensor::from_vec(x.shape(), vec![1.0; x.numel()]);
        return Ok((x.clone(), mask));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (1.0 - rate);
    let mask_data: Vec<f64> = (0..x.numel())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { scale })
        .collect();
    let mask = Tensor::from_vec(x.shape(), mask_data);
    let y = x.zip(&mask, |a, m| a * m)?;
    Ok((y, mask))
}

/// Dropout gradient: dy masked by the same mask the forward pass produced.
pub fn dropout_backward(mask: &Tensor, dy: &Tensor) -> Result<Tensor> {
    dy.zip(mask, |g, m| g * m)
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Result<Tensor> {
    dy.zip(x, |g, v| if v > 0.0 { g } else { 0.0 })
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_forward(x: &Tensor) -> Tensor {
    x.map(sigmoid)
}

/// Backward through sigmoid given the forward *output* y.
pub fn sigmoid_backward(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    dy.zip(y, |g, s| g * s * (1.0 - s))
}

/// Row-wise softmax with max-subtraction, `[B,n]` -> `[B,n]`.
pub fn softmax_forward(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(Error::shape("softmax expects [B,n]"));
    }
    let (b, n) = (x.shape()[0], x.shape()[1]);
    let mut out = vec![0.0; b * n];
    for i in 0..b {
        let row = x.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..n {
            let e = (row[j] - m).exp();
            out[i * n + j] = e;
            sum += e;
        }
        for j in 0..n {
            out[i * n + j] /= sum;
        }
    }
    Ok(Tensor::from_vec(&[b, n], out))
}

/// Backward through softmax given the forward output y:
/// dx_j = y_j * (dy_j - sum_k dy_k y_k), applied per row.
pub fn softmax_backward(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    if y.shape() != dy.shape() {
        return Err(Error::shape("softmax_backward shape mismatch"));
    }
    let (b, n) = (y.shape()[0], y.shape()[1]);
    let mut dx = vec![0.0; b * n];
    for i in 0..b {
        let yr = y.row(i);
        let dyr = dy.row(i);
        let dot: f64 = yr.iter().zip(dyr.iter()).map(|(&a, &g)| a * g).sum();
        for j in 0..n {
            dx[i * n + j] = yr[j] * (dyr[j] - dot);
        }
    }
    Ok(Tensor::from_vec(&[b, n], dx))
}
