use crate::error::{Error, Result};

/// Dense n-dimensional array of f64 values in row-major order.
///
/// This is the common currency of every trainable model in the crate.
/// All math runs at 64-bit precision; checkpoints store float32 (see
/// [`crate::nn::checkpoint`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length must equal product of shape"
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::from_vec(&[1], vec![v])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 2);
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        debug_assert_eq!(self.rank(), 2);
        let cols = self.shape[1];
        &mut self.data[i * cols..(i + 1) * cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise binary op; shapes must agree exactly.
    pub fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "elementwise op on {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_shape(&self, expected: &[usize], what: &str) -> Result<()> {
        if self.shape != expected {
            return Err(Error::shape(format!(
                "{what}: expected {:?}, got {:?}",
                expected, self.shape
            )));
        }
        Ok(())
    }
}

/// `[B,in] x [in,out] + [out] -> [B,out]`; the workhorse behind every dense layer.
pub fn matmul_bias(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    if x.rank() != 2 || w.rank() != 2 {
        return Err(Error::shape("matmul expects rank-2 tensors".to_string()));
    }
    let (batch, d_in) = (x.shape[0], x.shape[1]);
    let (w_in, d_out) = (w.shape[0], w.shape[1]);
    if d_in != w_in {
        return Err(Error::shape(format!(
            "matmul inner dims {d_in} vs {w_in}"
        )));
    }
    if let Some(b) = b {
        if b.shape() != [d_out] {
            return Err(Error::shape(format!(
                "bias: expected [{d_out}], got {:?}",
                b.shape()
            )));
        }
    }
    let mut out = vec![0.0; batch * d_out];
    for i in 0..batch {
        let xr = &x.data[i * d_in..(i + 1) * d_in];
        let or = &mut out[i * d_out..(i + 1) * d_out];
        if let Some(b) = b {
            or.copy_from_slice(b.data());
        }
        for (k, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w.data[k * d_out..(k + 1) * d_out];
            for (o, &wv) in or.iter_mut().zip(wr.iter()) {
                *o += xv * wv;
            }
        }
    }
    Ok(Tensor::from_vec(&[batch, d_out], out))
}
