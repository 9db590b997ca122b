use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, RngCore};

/// Fully connected layer `y = x W + b`, with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Uniform initialisation in `±sqrt(6 / fan)`.
    pub fn init(inputs: usize, outputs: usize, fan: usize, rng: &mut dyn RngCore) -> Self {
        let bound = (6.0 / fan as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((inputs, outputs), || {
            rng.random_range(-bound..bound)
        });
        Self {
            weight,
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Returns the parameter gradient and, if requested, the input gradient.
    pub fn backward(
        &self,
        x: &Array2<f64>,
        dy: &Array2<f64>,
        need_input_grad: bool,
    ) -> (DenseGrad, Option<Array2<f64>>) {
        let grad = DenseGrad {
            weight: x.t().dot(dy),
            bias: dy.sum_axis(Axis(0)),
        };
        let dx = need_input_grad.then(|| dy.dot(&self.weight.t()));
        (grad, dx)
    }
}

/// Per-channel batch normalisation over the rows of a `rows × channels`
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub normalized: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrad {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize, momentum: f64, eps: f64) -> Self {
        Self {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum,
            eps,
        }
    }

    /// Normalises with the batch statistics (biased variance).
    pub fn forward_train(&self, x: &Array2<f64>) -> (Array2<f64>, BatchNormCache) {
        let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
        let centred = x - &mean;
        let var = centred.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty batch");
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let normalized = centred * &inv_std;
        let y = &normalized * &self.gamma + &self.beta;
        (
            y,
            BatchNormCache {
                normalized,
                inv_std,
                mean,
                var,
            },
        )
    }

    /// Affine map using the running statistics.
    pub fn forward_inference(&self, x: &Array2<f64>) -> Array2<f64> {
        let (scale, shift) = self.inference_affine();
        x * &scale + &shift
    }

    /// `(scale, shift)` such that inference output is `x * scale + shift`.
    pub fn inference_affine(&self) -> (Array1<f64>, Array1<f64>) {
        let scale = Zip::from(&self.gamma)
            .and(&self.running_var)
            .map_collect(|g, v| g / (v + self.eps).sqrt());
        let shift = &self.beta - &(&self.running_mean * &scale);
        (scale, shift)
    }

    pub fn update_running_stats(&mut self, cache: &BatchNormCache) {
        let m = self.momentum;
        self.running_mean = &self.running_mean * m + &cache.mean * (1.0 - m);
        self.running_var = &self.running_var * m + &cache.var * (1.0 - m);
    }

    pub fn backward(&self, cache: &BatchNormCache, dy: &Array2<f64>) -> (BatchNormGrad, Array2<f64>) {
        let rows = dy.nrows() as f64;
        let grad = BatchNormGrad {
            gamma: (dy * &cache.normalized).sum_axis(Axis(0)),
            beta: dy.sum_axis(Axis(0)),
        };
        let dxhat = dy * &self.gamma;
        let sum_dxhat = dxhat.sum_axis(Axis(0));
        let sum_dxhat_xhat = (&dxhat * &cache.normalized).sum_axis(Axis(0));
        let mut dx = dxhat * rows - &sum_dxhat - &(&cache.normalized * &sum_dxhat_xhat);
        dx *= &(&cache.inv_std / rows);
        (grad, dx)
    }
}

pub fn relu_inplace(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

/// Inverted-dropout mask: each entry is `0` with probability `p`, otherwise
/// `1 / (1 - p)`.
pub fn dropout_mask(shape: (usize, usize), p: f64, rng: &mut dyn RngCore) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < p { 0.0 } else { keep })
}

/// Channelwise max over consecutive groups of `points` rows. Ties resolve to
/// the lowest row index.
pub fn max_pool(x: &Array2<f64>, points: usize) -> (Array2<f64>, Array2<usize>) {
    let channels = x.ncols();
    let batch = x.nrows() / points;
    let mut pooled = Array2::from_elem((batch, channels), f64::NEG_INFINITY);
    let mut argmax = Array2::zeros((batch, channels));
    for b in 0..batch {
        let mut best = pooled.row_mut(b);
        let mut arg = argmax.row_mut(b);
        for n in 0..points {
            let row = x.row(b * points + n);
            for c in 0..channels {
                if row[c] > best[c] {
                    best[c] = row[c];
                    arg[c] = n;
                }
            }
        }
    }
    (pooled, argmax)
}

/// Routes each pooled gradient to its argmax row.
pub fn max_pool_backward(
    d_pooled: &Array2<f64>,
    argmax: &Array2<usize>,
    points: usize,
) -> Array2<f64> {
    let (batch, channels) = d_pooled.dim();
    let mut dx = Array2::zeros((batch * points, channels));
    for b in 0..batch {
        for c in 0..channels {
            dx[[b * points + argmax[[b, c]], c]] = d_pooled[[b, c]];
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    use super::*;
    use crate::seeding::rng_from_seed;

    #[test]
    fn max_pool_ties_pick_first_index() {
        let x = array![[1.0, 5.0], [3.0, 5.0], [3.0, 2.0], [0.0, 0.0], [-1.0, 4.0], [2.0, 4.0]];
        let (pooled, arg) = max_pool(&x, 3);
        assert_eq!(pooled, array![[3.0, 5.0], [2.0, 4.0]]);
        assert_eq!(arg, array![[1, 0], [2, 1]]);
        let dx = max_pool_backward(&array![[1.0, 2.0], [3.0, 4.0]], &arg, 3);
        assert_eq!(dx.column(0).to_vec(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 3.0]);
        assert_eq!(dx.column(1).to_vec(), vec![2.0, 0.0, 0.0, 0.0, 4.0, 0.0]);
    }

    #[test]
    fn batch_norm_standardises() {
        let bn = BatchNorm::new(2, 0.9, 1e-5);
        let x = array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [6.0, 0.0]];
        let (y, cache) = bn.forward_train(&x);
        for c in 0..2 {
            let col = y.column(c);
            assert_abs_diff_eq!(col.mean().unwrap(), 0.0, epsilon = 1e-12);
            let var = col.mapv(|v| v * v).mean().unwrap();
            assert_abs_diff_eq!(var, cache.var[c] / (cache.var[c] + 1e-5), epsilon = 1e-12);
        }
    }

    #[test]
    fn batch_norm_inference_is_affine() {
        let mut bn = BatchNorm::new(3, 0.9, 1e-5);
        bn.gamma = array![1.5, -0.5, 2.0];
        bn.beta = array![0.1, 0.2, -0.3];
        bn.running_mean = array![0.5, -1.0, 2.0];
        bn.running_var = array![4.0, 0.25, 1.0];
        let x = array![[1.0, 2.0, 3.0], [-1.0, 0.0, 5.0]];
        let y = bn.forward_inference(&x);
        for r in 0..2 {
            for c in 0..3 {
                let expected = bn.gamma[c] * (x[[r, c]] - bn.running_mean[c])
                    / (bn.running_var[c] + 1e-5).sqrt()
                    + bn.beta[c];
                assert_abs_diff_eq!(y[[r, c]], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNorm::new(1, 0.9, 1e-5);
        let (_, cache) = bn.forward_train(&array![[2.0], [4.0]]);
        bn.update_running_stats(&cache);
        assert_abs_diff_eq!(bn.running_mean[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(bn.running_var[0], 0.9 + 0.1, epsilon = 1e-15);
    }

    #[test]
    fn dropout_mask_values() {
        let mut rng = rng_from_seed(1);
        let m = dropout_mask((100, 100), 0.3, &mut rng);
        let zeros = m.iter().filter(|&&v| v == 0.0).count();
        assert!((2500..3500).contains(&zeros));
        assert!(m.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.7).abs() < 1e-15));
    }

    #[test]
    fn dense_backward_shapes() {
        let mut rng = rng_from_seed(2);
        let d = Dense::init(3, 4, 3, &mut rng);
        let x = Array2::from_elem((5, 3), 0.5);
        let dy = Array2::from_elem((5, 4), 1.0);
        let (g, dx) = d.backward(&x, &dy, true);
        assert_eq!(g.weight.dim(), (3, 4));
        assert_eq!(g.bias, Array1::from_elem(4, 5.0));
        assert_eq!(dx.unwrap().dim(), (5, 3));
        assert!(d.backward(&x, &dy, false).1.is_none());
    }
}
