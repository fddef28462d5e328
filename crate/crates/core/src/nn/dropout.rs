use ndarray::{Array1, Array2, ArrayView2};

use super::rng::Rng;
use crate::error::{NashError, Result};

pub fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NashError::Config(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut Rng) -> Array1<f64> {
    if rate == 0.0 {
        return Array1::ones(len);
    }
    let scale = 1.0 / (1.0 - rate);
    Array1::from_shape_simple_fn(len, || if rng.uniform() < rate { 0.0 } else { scale })
}

/// Applies dropout to every row of `x`. Returns the output and the mask
/// (scale factors, same shape as `x`). Inference mode is the identity.
pub fn dropout(
    x: ArrayView2<'_, f64>,
    rate: f64,
    rng: &mut Rng,
    training: bool,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((x.to_owned(), Array2::ones(x.raw_dim())));
    }
    let mut mask = Array2::zeros(x.raw_dim());
    let width = x.ncols();
    for mut row in mask.rows_mut() {
        row.assign(&dropout_mask(width, rate, rng));
    }
    Ok((&x * &mask, mask))
}
