//! Dense layers with hand-derived forward and backward passes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Elementwise (or row-wise, for softmax) activation of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
    Softmax,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
            Activation::Softmax => "softmax",
        }
    }
}

/// Gradients of a loss with respect to one layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Fully connected layer: `activation(input · W + b)`.
///
/// Weights are `in x out`; every input row is one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(CoreError::Shape(format!(
                "bias length {} does not match {} output units",
                bias.len(),
                weights.cols()
            )));
        }
        if let Some(idx) = bias.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::Numeric(format!("non-finite bias entry {idx}")));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Uniform Glorot initialization scaled by fan-in and fan-out; zero bias.
    pub fn glorot(
        input_width: usize,
        output_width: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Self {
        let limit = libm::sqrt(6.0 / (input_width + output_width) as f64);
        let weights = Matrix::from_fn(input_width, output_width, |_, _| {
            rng.uniform_in(-limit, limit)
        });
        Self {
            weights,
            bias: vec![0.0; output_width],
            activation,
        }
    }

    pub fn input_width(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_width(&self) -> usize {
        self.weights.cols()
    }

    /// Pre-activation `input · W + b`.
    fn preactivation(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.input_width() {
            return Err(CoreError::Shape(format!(
                "layer expects {} input columns, got {}",
                self.input_width(),
                input.cols()
            )));
        }
        input.matmul(&self.weights)?.add_row_broadcast(&self.bias)
    }

    fn activate(&self, z: Matrix) -> Matrix {
        match self.activation {
            Activation::Linear => z,
            Activation::Relu => z.map(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::Sigmoid => z.map(sigmoid),
            Activation::Softmax => {
                let mut out = z;
                for i in 0..out.rows() {
                    let row = out.row_mut(i);
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for v in row.iter_mut() {
                        *v = libm::exp(*v - max);
                        sum += *v;
                    }
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                }
                out
            }
        }
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.activate(self.preactivation(input)?))
    }

    /// Backward pass given the cached forward output.
    ///
    /// `upstream` is the loss gradient with respect to this layer's output;
    /// returns the parameter gradients and the loss gradient with respect to
    /// the input. The activation derivative is reconstructed from `output`
    /// (valid for every supported activation).
    pub fn backward_with_output(
        &self,
        input: &Matrix,
        output: &Matrix,
        upstream: &Matrix,
    ) -> Result<(LayerGrads, Matrix)> {
        if upstream.shape() != (input.rows(), self.output_width()) {
            return Err(CoreError::Shape(format!(
                "upstream gradient is {}x{}, expected {}x{}",
                upstream.rows(),
                upstream.cols(),
                input.rows(),
                self.output_width()
            )));
        }
        let dz = match self.activation {
            Activation::Linear => upstream.clone(),
            Activation::Relu => {
                let mut dz = upstream.clone();
                for (d, &o) in dz.as_mut_slice().iter_mut().zip(output.as_slice()) {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                }
                dz
            }
            Activation::Sigmoid => {
                let mut dz = upstream.clone();
                for (d, &o) in dz.as_mut_slice().iter_mut().zip(output.as_slice()) {
                    *d *= o * (1.0 - o);
                }
                dz
            }
            Activation::Softmax => {
                // dL/dz_j = s_j * (u_j - u · s) per row.
                let mut dz = Matrix::zeros(upstream.rows(), upstream.cols());
                for i in 0..upstream.rows() {
                    let u = upstream.row(i);
                    let s = output.row(i);
                    let dot: f64 = u.iter().zip(s).map(|(a, b)| a * b).sum();
                    for (j, d) in dz.row_mut(i).iter_mut().enumerate() {
                        *d = s[j] * (u[j] - dot);
                    }
                }
                dz
            }
        };
        self.backward_from_preactivation(input, &dz)
    }

    /// Backward pass from a full forward recomputation.
    pub fn backward(&self, input: &Matrix, upstream: &Matrix) -> Result<(LayerGrads, Matrix)> {
        let output = self.forward(input)?;
        self.backward_with_output(input, &output, upstream)
    }

    /// Backward pass given the gradient with respect to the pre-activation.
    ///
    /// Used directly by the fused softmax/cross-entropy path, where the
    /// logit gradient is available in closed form.
    pub fn backward_from_preactivation(
        &self,
        input: &Matrix,
        dz: &Matrix,
    ) -> Result<(LayerGrads, Matrix)> {
        let weight_grad = input.t_matmul(dz)?;
        let bias_grad = dz.column_sums();
        let input_grad = dz.matmul_t(&self.weights)?;
        Ok((
            LayerGrads {
                weights: weight_grad,
                bias: bias_grad,
            },
            input_grad,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: Matrix, b: Vec<f64>, a: Activation) -> DenseLayer {
        DenseLayer::new(w, b, a).unwrap()
    }

    #[test]
    fn identity_linear_layer_passes_input_through() {
        let l = layer(Matrix::identity(3), vec![0.0; 3], Activation::Linear);
        let input = Matrix::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, -0.25]).unwrap();
        assert_eq!(l.forward(&input).unwrap(), input);
    }

    #[test]
    fn relu_clamps_negative_preactivation() {
        let l = layer(
            Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap(),
            vec![0.0],
            Activation::Relu,
        );
        let out = l
            .forward(&Matrix::from_vec(1, 2, vec![1.0, -3.0]).unwrap())
            .unwrap();
        assert_eq!(out.as_slice(), &[0.0]);
    }

    #[test]
    fn sigmoid_of_constant_five() {
        let l = layer(
            Matrix::from_vec(1, 1, vec![0.0]).unwrap(),
            vec![5.0],
            Activation::Sigmoid,
        );
        let out = l
            .forward(&Matrix::from_vec(1, 1, vec![7.0]).unwrap())
            .unwrap();
        assert!((out.get(0, 0) - 0.99331).abs() < 1e-5);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let l = layer(
            Matrix::from_vec(2, 3, vec![1.0, 0.0, -1.0, 0.5, 2.0, 0.0]).unwrap(),
            vec![0.1, -0.2, 0.3],
            Activation::Softmax,
        );
        let out = l
            .forward(&Matrix::from_vec(2, 2, vec![1.0, 2.0, -1.0, 0.5]).unwrap())
            .unwrap();
        for i in 0..2 {
            let sum: f64 = out.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = Rng::new(9);
        let l = DenseLayer::glorot(4, 3, Activation::Sigmoid, &mut rng);
        let input = Matrix::from_fn(5, 4, |i, j| (i * 4 + j) as f64 * 0.1 - 0.7);
        let a = l.forward(&input).unwrap();
        let b = l.forward(&input).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn linear_backward_zero_input_all_ones_upstream() {
        let l = layer(
            Matrix::from_vec(2, 2, vec![0.3, -0.1, 0.7, 0.2]).unwrap(),
            vec![0.0, 0.0],
            Activation::Linear,
        );
        let input = Matrix::zeros(3, 2);
        let upstream = Matrix::from_fn(3, 2, |_, _| 1.0);
        let (grads, _) = l.backward(&input, &upstream).unwrap();
        assert!(grads.weights.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(grads.bias, vec![3.0, 3.0]);
    }

    #[test]
    fn relu_backward_kills_dead_units() {
        // Second unit has a strictly negative pre-activation for this input.
        let l = layer(
            Matrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap(),
            vec![0.0, 0.0],
            Activation::Relu,
        );
        let input = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let upstream = Matrix::from_fn(1, 2, |_, _| 1.0);
        let (_, input_grad) = l.backward(&input, &upstream).unwrap();
        // Only the live unit contributes: relu'(2) = 1, relu'(-2) = 0.
        assert_eq!(input_grad.get(0, 0), 1.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let l = layer(Matrix::identity(3), vec![0.0; 3], Activation::Linear);
        let bad = Matrix::zeros(2, 4);
        assert!(matches!(l.forward(&bad), Err(CoreError::Shape(_))));
        let upstream = Matrix::zeros(2, 2);
        let good_in = Matrix::zeros(2, 3);
        assert!(matches!(
            l.backward(&good_in, &upstream),
            Err(CoreError::Shape(_))
        ));
    }

    /// Central-difference oracle for a linear functional of the layer output.
    fn fd_weight_grad(l: &DenseLayer, input: &Matrix, probe: &Matrix, i: usize, j: usize) -> f64 {
        let h = 1e-6;
        let mut plus = l.clone();
        plus.weights.set(i, j, plus.weights.get(i, j) + h);
        let mut minus = l.clone();
        minus.weights.set(i, j, minus.weights.get(i, j) - h);
        let f = |m: &DenseLayer| -> f64 {
            m.forward(input)
                .unwrap()
                .as_slice()
                .iter()
                .zip(probe.as_slice())
                .map(|(a, b)| a * b)
                .sum()
        };
        (f(&plus) - f(&minus)) / (2.0 * h)
    }

    #[test]
    fn analytic_gradients_match_finite_differences_for_all_activations() {
        for (idx, act) in [
            Activation::Linear,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Softmax,
        ]
        .into_iter()
        .enumerate()
        {
            let mut rng = Rng::new(100 + idx as u64);
            let l = DenseLayer::glorot(3, 4, act, &mut rng);
            let input = Matrix::from_fn(5, 3, |_, _| rng.uniform_in(-1.0, 1.0));
            // Probe matrix defines loss = sum(output .* probe), so upstream = probe.
            let probe = Matrix::from_fn(5, 4, |_, _| rng.uniform_in(-1.0, 1.0));
            let (grads, _) = l.backward(&input, &probe).unwrap();
            for i in 0..3 {
                for j in 0..4 {
                    let numeric = fd_weight_grad(&l, &input, &probe, i, j);
                    let analytic = grads.weights.get(i, j);
                    let rel =
                        (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-6);
                    assert!(
                        rel < 1e-4,
                        "{}: weight ({i},{j}) numeric={numeric} analytic={analytic}",
                        act.name()
                    );
                }
            }
        }
    }
}
