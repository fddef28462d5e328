use ndarray::{Array, ArrayView, Dimension, Zip};

/// Smallest distance a probability is kept from 0 and 1, so logs and
/// log-odds stay finite even for saturated logits.
pub const PROB_EPS: f64 = f64::EPSILON / 2.0;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn sigmoid_forward<D: Dimension>(x: ArrayView<'_, f64, D>) -> Array<f64, D> {
    x.mapv(sigmoid)
}

/// Backward through the sigmoid given its *output* `y`.
pub fn sigmoid_backward<D: Dimension>(
    y: ArrayView<'_, f64, D>,
    upstream: ArrayView<'_, f64, D>,
) -> Array<f64, D> {
    Zip::from(&y)
        .and(&upstream)
        .map_collect(|&y, &g| g * y * (1.0 - y))
}

pub fn relu_forward<D: Dimension>(x: ArrayView<'_, f64, D>) -> Array<f64, D> {
    x.mapv(relu)
}

/// Backward through ReLU given its *output*; the subgradient at 0 is 0.
pub fn relu_backward<D: Dimension>(
    y: ArrayView<'_, f64, D>,
    upstream: ArrayView<'_, f64, D>,
) -> Array<f64, D> {
    Zip::from(&y)
        .and(&upstream)
        .map_collect(|&y, &g| if y > 0.0 { g } else { 0.0 })
}

/// `log(sum(exp(xs)))` with the max shifted out.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Log-softmax of a slice, in place.
pub fn log_softmax_in_place(xs: &mut [f64]) {
    let lse = log_sum_exp(xs);
    for x in xs {
        *x -= lse;
    }
}
