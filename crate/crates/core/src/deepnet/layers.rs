//! Layer primitives: valid 3D convolution, 2x2x2 max pooling, dense layers,
//! ReLU, softmax with clamped binary cross entropy. All passes are plain
//! nested loops in f64; backward passes return exact gradients of the cached
//! forward pass.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv3d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize, usize),
    /// weights[((o * in_c + i) * kx + u) ... ] laid out o, i, z, y, x with x
    /// fastest (same order as Tensor).
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Conv3d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: (usize, usize, usize)) -> Conv3d {
        let (kx, ky, kz) = kernel;
        Conv3d {
            in_channels,
            out_channels,
            kernel,
            weights: vec![0.0; out_channels * in_channels * kx * ky * kz],
            biases: vec![0.0; out_channels],
        }
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, x: usize, y: usize, z: usize) -> usize {
        let (kx, ky, _) = self.kernel;
        (((o * self.in_channels + i) * self.kernel.2 + z) * ky + y) * kx + x
    }

    pub fn out_dims(&self, dims: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let (kx, ky, kz) = self.kernel;
        if dims.0 < kx || dims.1 < ky || dims.2 < kz {
            return Err(Error::InvalidArgument(format!(
                "conv kernel {:?} larger than input {dims:?}",
                self.kernel
            )));
        }
        Ok((dims.0 - kx + 1, dims.1 - ky + 1, dims.2 - kz + 1))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        if input.channels != self.in_channels {
            return Err(Error::InvalidArgument(format!(
                "conv expects {} channels, got {}",
                self.in_channels, input.channels
            )));
        }
        let od = self.out_dims(input.dims)?;
        let (kx, ky, kz) = self.kernel;
        let mut out = Tensor::zeros(self.out_channels, od);
        for o in 0..self.out_channels {
            for z in 0..od.2 {
                for y in 0..od.1 {
                    for x in 0..od.0 {
                        let mut acc = self.biases[o];
                        for i in 0..self.in_channels {
                            for w in 0..kz {
                                for v in 0..ky {
                                    for u in 0..kx {
                                        acc += self.weights[self.widx(o, i, u, v, w)]
                                            * input.get(i, x + u, y + v, z + w);
                                    }
                                }
                            }
                        }
                        out.set(o, x, y, z, acc);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Gradients w.r.t. input, weights, biases given d(loss)/d(output).
    pub fn backward(
        &self,
        input: &Tensor,
        grad_out: &Tensor,
    ) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
        let od = self.out_dims(input.dims)?;
        debug_assert_eq!(grad_out.dims, od);
        let (kx, ky, kz) = self.kernel;
        let mut grad_in = Tensor::zeros(self.in_channels, input.dims);
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = vec![0.0; self.biases.len()];
        for o in 0..self.out_channels {
            for z in 0..od.2 {
                for y in 0..od.1 {
                    for x in 0..od.0 {
                        let g = grad_out.get(o, x, y, z);
                        if g == 0.0 {
                            continue;
                        }
                        grad_b[o] += g;
                        for i in 0..self.in_channels {
                            for w in 0..kz {
                                for v in 0..ky {
                                    for u in 0..kx {
                                        let wi = self.widx(o, i, u, v, w);
                                        grad_w[wi] += g * input.get(i, x + u, y + v, z + w);
                                        let gi = grad_in.idx(i, x + u, y + v, z + w);
                                        grad_in.data[gi] += g * self.weights[wi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok((grad_in, grad_w, grad_b))
    }
}

/// Max pooling with non-overlapping windows; partial windows at the far edge
/// are dropped (floor division).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPool {
    pub window: (usize, usize, usize),
}

impl MaxPool {
    pub fn out_dims(&self, dims: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let od = (
            dims.0 / self.window.0,
            dims.1 / self.window.1,
            dims.2 / self.window.2,
        );
        if od.0 == 0 || od.1 == 0 || od.2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "pool window {:?} larger than input {dims:?}",
                self.window
            )));
        }
        Ok(od)
    }

    /// Forward pass; also returns the flat input index of each window max
    /// (first occurrence on ties) for the backward pass.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        let od = self.out_dims(input.dims)?;
        let (px, py, pz) = self.window;
        let mut out = Tensor::zeros(input.channels, od);
        let mut argmax = vec![0usize; out.len()];
        for c in 0..input.channels {
            for z in 0..od.2 {
                for y in 0..od.1 {
                    for x in 0..od.0 {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_i = 0usize;
                        for w in 0..pz {
                            for v in 0..py {
                                for u in 0..px {
                                    let i =
                                        input.idx(c, x * px + u, y * py + v, z * pz + w);
                                    if input.data[i] > best {
                                        best = input.data[i];
                                        best_i = i;
                                    }
                                }
                            }
                        }
                        let oi = out.idx(c, x, y, z);
                        out.data[oi] = best;
                        argmax[oi] = best_i;
                    }
                }
            }
        }
        Ok((out, argmax))
    }

    pub fn backward(
        &self,
        input_dims: (usize, usize, usize),
        channels: usize,
        argmax: &[usize],
        grad_out: &Tensor,
    ) -> Tensor {
        let mut grad_in = Tensor::zeros(channels, input_dims);
        for (oi, &ii) in argmax.iter().enumerate() {
            grad_in.data[ii] += grad_out.data[oi];
        }
        grad_in
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major: weights[o * in_dim + i].
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Dense {
        Dense {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim {
            return Err(Error::InvalidArgument(format!(
                "dense expects {} inputs, got {}",
                self.in_dim,
                input.len()
            )));
        }
        Ok((0..self.out_dim)
            .map(|o| {
                self.biases[o]
                    + self.weights[o * self.in_dim..(o + 1) * self.in_dim]
                        .iter()
                        .zip(input)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn backward(&self, input: &[f64], grad_out: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut grad_in = vec![0.0; self.in_dim];
        let mut grad_w = vec![0.0; self.weights.len()];
        for (o, &g) in grad_out.iter().enumerate() {
            for i in 0..self.in_dim {
                grad_w[o * self.in_dim + i] = g * input[i];
                grad_in[i] += g * self.weights[o * self.in_dim + i];
            }
        }
        (grad_in, grad_w, grad_out.to_vec())
    }
}

pub fn relu(values: &mut [f64]) {
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// grad * 1[pre-activation > 0]; exactly zero for dead units.
pub fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

pub const PROB_CLAMP: (f64, f64) = (1e-7, 1.0 - 1e-7);

/// Binary cross entropy on the class-1 probability, clamped to
/// [1e-7, 1 - 1e-7].
pub fn bce_loss(p1: f64, label: u8) -> f64 {
    let p = p1.clamp(PROB_CLAMP.0, PROB_CLAMP.1);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Gradient of the clamped loss w.r.t. the two logits: softmax - onehot
/// inside the clamp range, zero where the clamp is active.
pub fn bce_softmax_grad(probs: [f64; 2], label: u8) -> [f64; 2] {
    if probs[1] <= PROB_CLAMP.0 || probs[1] >= PROB_CLAMP.1 {
        return [0.0, 0.0];
    }
    let onehot = if label == 1 { [0.0, 1.0] } else { [1.0, 0.0] };
    [probs[0] - onehot[0], probs[1] - onehot[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, c: usize, dims: (usize, usize, usize)) -> Tensor {
        let n = c * dims.0 * dims.1 * dims.2;
        Tensor::from_data(c, dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let dims = (6, 6, 4);
            let input = random_tensor(&mut rng, 2, dims);
            let mut conv = Conv3d::zeros(2, 3, (3, 3, 2));
            for w in conv.weights.iter_mut() {
                *w = rng.gen_range(-1.0..1.0);
            }
            for b in conv.biases.iter_mut() {
                *b = rng.gen_range(-0.5..0.5);
            }
            let out = conv.forward(&input).unwrap();
            assert_eq!(out.dims, (4, 4, 3));
            // independent direct evaluation
            for o in 0..3 {
                for z in 0..3 {
                    for y in 0..4 {
                        for x in 0..4 {
                            let mut expect = conv.biases[o];
                            for i in 0..2 {
                                for w in 0..2 {
                                    for v in 0..3 {
                                        for u in 0..3 {
                                            let widx = (((o * 2 + i) * 2 + w) * 3 + v) * 3 + u;
                                            expect += conv.weights[widx]
                                                * input.get(i, x + u, y + v, z + w);
                                        }
                                    }
                                }
                            }
                            assert_relative_eq!(
                                out.get(o, x, y, z),
                                expect,
                                epsilon = 1e-10
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pool_picks_window_maxima_and_routes_gradient() {
        let mut input = Tensor::zeros(1, (4, 2, 2));
        for (i, v) in input.data.iter_mut().enumerate() {
            *v = i as f64;
        }
        let pool = MaxPool { window: (2, 2, 2) };
        let (out, argmax) = pool.forward(&input).unwrap();
        assert_eq!(out.dims, (2, 1, 1));
        assert_eq!(out.data, vec![13.0, 15.0]);
        let grad_out = Tensor::from_data(1, (2, 1, 1), vec![2.0, 3.0]).unwrap();
        let grad_in = pool.backward((4, 2, 2), 1, &argmax, &grad_out);
        assert_eq!(grad_in.data[13], 2.0);
        assert_eq!(grad_in.data[15], 3.0);
        assert_eq!(grad_in.data.iter().sum::<f64>(), 5.0);
    }

    #[test]
    fn dense_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut layer = Dense::zeros(4, 3);
        for w in layer.weights.iter_mut() {
            *w = rng.gen_range(-1.0..1.0);
        }
        let input: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grad_out = vec![0.3, -0.7, 1.1];
        let (grad_in, grad_w, grad_b) = layer.backward(&input, &grad_out);
        // scalar objective sum(grad_out . output)
        let objective = |l: &Dense, x: &[f64]| -> f64 {
            l.forward(x)
                .unwrap()
                .iter()
                .zip(&grad_out)
                .map(|(o, g)| o * g)
                .sum()
        };
        let h = 1e-6;
        for i in 0..4 {
            let mut xp = input.clone();
            let mut xm = input.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (objective(&layer, &xp) - objective(&layer, &xm)) / (2.0 * h);
            assert_relative_eq!(grad_in[i], fd, epsilon = 1e-6);
        }
        for wi in 0..layer.weights.len() {
            let mut lp = layer.clone();
            let mut lm = layer.clone();
            lp.weights[wi] += h;
            lm.weights[wi] -= h;
            let fd = (objective(&lp, &input) - objective(&lm, &input)) / (2.0 * h);
            assert_relative_eq!(grad_w[wi], fd, epsilon = 1e-6);
        }
        assert_eq!(grad_b, grad_out);
    }

    #[test]
    fn loss_examples() {
        assert_relative_eq!(bce_loss(0.5, 0), 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(bce_loss(0.5, 1), 2f64.ln(), epsilon = 1e-12);
        assert!(bce_loss(1.0 - 1e-9, 1) < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let p: f64 = rng.gen_range(0.01..0.99);
            let y = u8::from(rng.gen_bool(0.5));
            let direct = -(y as f64) * p.ln() - (1.0 - y as f64) * (1.0 - p).ln();
            assert_eq!(bce_loss(p, y), direct);
        }
    }

    #[test]
    fn softmax_sums_to_one_and_symmetric_at_zero() {
        let p = softmax2([0.0, 0.0]);
        assert_eq!(p, [0.5, 0.5]);
        let q = softmax2([3.2, -1.4]);
        assert_relative_eq!(q[0] + q[1], 1.0, epsilon = 1e-12);
        assert!(q.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn relu_dead_unit_gradient_is_zero() {
        let pre = vec![-0.5, 0.0, 0.7];
        let mut grad = vec![1.0, 1.0, 1.0];
        relu_backward(&pre, &mut grad);
        assert_eq!(grad, vec![0.0, 0.0, 1.0]);
    }
}
