use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::params::{TensorMut, TensorRef};
use super::rng::Rng;
use crate::error::{NashError, Result};

/// Sparse input row: `(feature index, value)` pairs.
pub type SparseRow<'a> = &'a [(u32, f64)];

/// Fully connected layer `y = x W + b`.
///
/// `weight` is stored input-major (`in × out`) so that a sparse input row
/// touches contiguous weight rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        DenseLayer {
            weight: Array2::zeros((input_dim, output_dim)),
            bias: Array1::zeros(output_dim),
        }
    }

    /// Uniform in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot(input_dim: usize, output_dim: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (input_dim + output_dim) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((input_dim, output_dim), || {
            rng.uniform_range(-limit, limit)
        });
        DenseLayer {
            weight,
            bias: Array1::zeros(output_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn zeros_like(&self) -> Self {
        DenseLayer::zeros(self.input_dim(), self.output_dim())
    }

    /// Batch forward: rows of `input` are examples.
    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.input_dim() {
            return Err(NashError::shape(
                "dense_forward",
                self.input_dim(),
                input.ncols(),
            ));
        }
        let mut out = input.dot(&self.weight);
        out += &self.bias;
        Ok(out)
    }

    pub fn forward_sparse(&self, rows: &[SparseRow<'_>]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((rows.len(), self.output_dim()));
        for (row, mut out_row) in rows.iter().zip(out.rows_mut()) {
            out_row.assign(&self.bias);
            for &(idx, value) in row.iter() {
                let idx = idx as usize;
                if idx >= self.input_dim() {
                    return Err(NashError::shape(
                        "dense_forward_sparse",
                        format!("index < {}", self.input_dim()),
                        idx,
                    ));
                }
                out_row.scaled_add(value, &self.weight.row(idx));
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and returns dL/d(input).
    pub fn backward(
        &self,
        input: ArrayView2<'_, f64>,
        upstream: ArrayView2<'_, f64>,
        grad: &mut DenseLayer,
    ) -> Result<Array2<f64>> {
        if upstream.ncols() != self.output_dim() || upstream.nrows() != input.nrows() {
            return Err(NashError::shape(
                "dense_backward",
                format!("{}x{}", input.nrows(), self.output_dim()),
                format!("{}x{}", upstream.nrows(), upstream.ncols()),
            ));
        }
        self.accumulate(input, upstream, grad);
        Ok(upstream.dot(&self.weight.t()))
    }

    /// Like [`backward`](Self::backward) but skips the input gradient.
    pub fn accumulate(
        &self,
        input: ArrayView2<'_, f64>,
        upstream: ArrayView2<'_, f64>,
        grad: &mut DenseLayer,
    ) {
        ndarray::linalg::general_mat_mul(1.0, &input.t(), &upstream, 1.0, &mut grad.weight);
        grad.bias += &upstream.sum_axis(Axis(0));
    }

    /// Gradient accumulation for a sparse input batch. Sparse inputs are
    /// never differentiated, so nothing is returned.
    pub fn backward_sparse(
        &self,
        rows: &[SparseRow<'_>],
        upstream: ArrayView2<'_, f64>,
        grad: &mut DenseLayer,
    ) {
        for (row, up) in rows.iter().zip(upstream.rows()) {
            for &(idx, value) in row.iter() {
                grad.weight.row_mut(idx as usize).scaled_add(value, &up);
            }
        }
        grad.bias += &upstream.sum_axis(Axis(0));
    }

    pub(crate) fn push_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        out.push(TensorRef {
            name: format!("{prefix}.weight"),
            shape: self.weight.shape().to_vec(),
            data: self.weight.as_slice().expect("standard layout"),
        });
        out.push(TensorRef {
            name: format!("{prefix}.bias"),
            shape: self.bias.shape().to_vec(),
            data: self.bias.as_slice().expect("standard layout"),
        });
    }

    pub(crate) fn push_tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        let wshape = self.weight.shape().to_vec();
        let bshape = self.bias.shape().to_vec();
        out.push(TensorMut {
            name: format!("{prefix}.weight"),
            shape: wshape,
            data: self.weight.as_slice_mut().expect("standard layout"),
        });
        out.push(TensorMut {
            name: format!("{prefix}.bias"),
            shape: bshape,
            data: self.bias.as_slice_mut().expect("standard layout"),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_forward_and_backward() {
        let layer = DenseLayer {
            weight: array![[1.0, 0.0], [0.0, 1.0]],
            bias: array![0.0, 0.0],
        };
        let x = array![[3.0, 4.0]];
        assert_eq!(layer.forward(x.view()).unwrap(), array![[3.0, 4.0]]);
        let mut grad = layer.zeros_like();
        let dx = layer
            .backward(x.view(), array![[1.0, 1.0]].view(), &mut grad)
            .unwrap();
        assert_eq!(dx, array![[1.0, 1.0]]);
        assert_eq!(grad.weight, array![[3.0, 3.0], [4.0, 4.0]]);
        assert_eq!(grad.bias, array![1.0, 1.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let layer = DenseLayer::zeros(3, 2);
        assert!(layer.forward(array![[1.0, 2.0]].view()).is_err());
        assert!(layer.forward_sparse(&[&[(5, 1.0)]]).is_err());
    }

    #[test]
    fn sparse_matches_dense() {
        let mut rng = Rng::new(3);
        let layer = DenseLayer::glorot(6, 4, &mut rng);
        let sparse: Vec<(u32, f64)> = vec![(1, 0.5), (4, -2.0)];
        let mut dense = Array2::zeros((1, 6));
        dense[[0, 1]] = 0.5;
        dense[[0, 4]] = -2.0;
        let a = layer.forward_sparse(&[&sparse]).unwrap();
        let b = layer.forward(dense.view()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
        let up = array![[0.3, -0.1, 0.7, 1.0]];
        let mut g1 = layer.zeros_like();
        let mut g2 = layer.zeros_like();
        layer.backward_sparse(&[&sparse], up.view(), &mut g1);
        layer.backward(dense.view(), up.view(), &mut g2).unwrap();
        for (x, y) in g1.weight.iter().zip(g2.weight.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn glorot_within_limit() {
        let mut rng = Rng::new(9);
        let layer = DenseLayer::glorot(10, 20, &mut rng);
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(layer.weight.iter().all(|w| w.abs() <= limit));
        assert!(layer.bias.iter().all(|&b| b == 0.0));
    }
}
