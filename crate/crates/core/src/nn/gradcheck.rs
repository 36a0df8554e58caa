use crate::nn::tensor::Tensor;

/// Central-difference gradient check.
///
/// `f` evaluates the scalar objective at the given parameter tensors;
/// `analytic` holds the gradients under test, one tensor per parameter.
/// Returns the max over all coordinates of |a - n| / max(|a|, |n|, 1e-8).
pub fn gradient_check<F>(f: F, params: &[Tensor], analytic: &[Tensor], eps: f64) -> f64
where
    F: FnMut(&[Tensor]) -> f64,
{
    gradient_check_coords(f, params, analytic, eps)
        .iter()
        .flat_map(|t| t.data().iter().copied())
        .fold(0.0, f64::max)
}

/// Per-coordinate relative errors, one tensor per parameter, same shapes.
pub fn gradient_check_coords<F>(
    mut f: F,
    params: &[Tensor],
    analytic: &[Tensor],
    eps: f64,
) -> Vec<Tensor>
where
    F: FnMut(&[Tensor]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    let mut work: Vec<Tensor> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        assert_eq!(params[pi].shape(), analytic[pi].shape());
        let mut errs = Tensor::zeros(params[pi].shape());
        for i in 0..params[pi].numel() {
            let orig = work[pi].data()[i];
            work[pi].data_mut()[i] = orig + eps;
            let plus = f(&work);
            work[pi].data_mut()[i] = orig - eps;
            let minus = f(&work);
            work[pi].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi].data()[i];
            errs.data_mut()[i] = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        }
        out.push(errs);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(w) = sum w_i^2, df/dw_i = 2 w_i
    fn quad(params: &[Tensor]) -> f64 {
        params[0].data().iter().map(|v| v * v).sum()
    }

    #[test]
    fn exact_on_quadratic() {
        let w = Tensor::from_vec(&[3], vec![0.5, -1.2, 2.0]);
        let grad = w.map(|v| 2.0 * v);
        let err = gradient_check(quad, &[w], &[grad], 1e-5);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn detects_doubled_backward() {
        let w = Tensor::from_vec(&[2], vec![1.0, -2.0]);
        let wrong = w.map(|v| 4.0 * v); // 2x the true gradient
        let err = gradient_check(quad, &[w], &[wrong], 1e-5);
        // |2g - g| / max(2g, g) = 0.5 under the max-denominator formula
        assert!((err - 0.5).abs() < 1e-6, "err {err}");
    }
}
