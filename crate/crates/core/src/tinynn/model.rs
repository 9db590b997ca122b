//! PointNet-style regressor: a shared per-point encoder, channelwise max
//! pooling as the symmetric aggregator, and an MLP head with six raw
//! outputs.

use ndarray::{Array2, Array3, Axis};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::layers::{
    dropout_mask, max_pool, max_pool_backward, relu_inplace, BatchNorm, BatchNormCache, Dense,
};
use crate::error::{GraspError, Result};
use crate::geometry::{activate, Point3};

/// Width of the raw output vector.
pub const OUTPUT_WIDTH: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorConfig {
    pub encoder_widths: Vec<usize>,
    /// Hidden head widths followed by the output width, which must be 6.
    pub head_widths: Vec<usize>,
    /// Dropout probability on hidden head layers during training.
    pub dropout: f64,
    pub batch_norm: bool,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            encoder_widths: vec![64, 128, 256],
            head_widths: vec![128, 64, OUTPUT_WIDTH],
            dropout: 0.3,
            batch_norm: true,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
        }
    }
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GraspError::InvalidArgument(msg));
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return bad(format!("invalid encoder widths {:?}", self.encoder_widths));
        }
        if self.head_widths.last() != Some(&OUTPUT_WIDTH) || self.head_widths.contains(&0) {
            return bad(format!(
                "head widths {:?} must be positive and end in {OUTPUT_WIDTH}",
                self.head_widths
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || !(self.bn_eps > 0.0) {
            return bad("batch-norm momentum must be in [0, 1) and eps positive".into());
        }
        Ok(())
    }
}

/// Dense layer optionally followed by batch norm, then ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub dense: Dense,
    pub bn: Option<BatchNorm>,
}

#[derive(Debug, Clone)]
struct BlockCache {
    input: Array2<f64>,
    bn: Option<BatchNormCache>,
    /// Post-ReLU activation, before dropout.
    activated: Array2<f64>,
    dropout: Option<Array2<f64>>,
}

/// How a forward pass treats batch norm and dropout.
pub enum ForwardMode<'a> {
    /// Running batch-norm statistics, no dropout.
    Inference,
    /// Batch statistics; dropout only when an RNG is supplied.
    Training { dropout: Option<&'a mut dyn RngCore> },
}

impl ForwardMode<'_> {
    fn is_training(&self) -> bool {
        matches!(self, ForwardMode::Training { .. })
    }
}

impl Block {
    fn forward(
        &self,
        x: &Array2<f64>,
        training: bool,
        dropout: Option<(f64, &mut dyn RngCore)>,
    ) -> (Array2<f64>, BlockCache) {
        let mut z = self.dense.forward(x);
        let mut bn_cache = None;
        if let Some(bn) = &self.bn {
            z = if training {
                let (y, cache) = bn.forward_train(&z);
                bn_cache = Some(cache);
                y
            } else {
                bn.forward_inference(&z)
            };
        }
        relu_inplace(&mut z);
        let activated = z;
        let (out, mask) = match dropout {
            Some((p, rng)) if p > 0.0 => {
                let mask = dropout_mask(activated.dim(), p, rng);
                (&activated * &mask, Some(mask))
            }
            _ => (activated.clone(), None),
        };
        (
            out,
            BlockCache {
                input: x.clone(),
                bn: bn_cache,
                activated,
                dropout: mask,
            },
        )
    }

    fn backward(
        &self,
        cache: &BlockCache,
        mut dy: Array2<f64>,
        need_input_grad: bool,
        grads: &mut Vec<Vec<f64>>,
    ) -> Option<Array2<f64>> {
        if let Some(mask) = &cache.dropout {
            dy *= mask;
        }
        ndarray::Zip::from(&mut dy)
            .and(&cache.activated)
            .for_each(|d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
        let mut bn_grad = None;
        if let (Some(bn), Some(bc)) = (&self.bn, &cache.bn) {
            let (g, dz) = bn.backward(bc, &dy);
            bn_grad = Some(g);
            dy = dz;
        }
        let (dense_grad, dx) = self.dense.backward(&cache.input, &dy, need_input_grad);
        grads.push(dense_grad.weight.into_raw_vec_and_offset().0);
        grads.push(dense_grad.bias.into_raw_vec_and_offset().0);
        if let Some(g) = bn_grad {
            grads.push(g.gamma.into_raw_vec_and_offset().0);
            grads.push(g.beta.into_raw_vec_and_offset().0);
        }
        dx
    }
}

/// Intermediates retained by a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    points: usize,
    encoder: Vec<BlockCache>,
    argmax: Array2<usize>,
    head: Vec<BlockCache>,
    output_input: Array2<f64>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Index of the point that won the max pool, per batch item and channel.
    pub fn pool_argmax(&self) -> &Array2<usize> {
        &self.argmax
    }
}

/// Parameter gradients, one flat vector per parameter tensor in
/// [`RegressorModel::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    pub config: RegressorConfig,
    pub encoder: Vec<Block>,
    pub head: Vec<Block>,
    pub output: Dense,
}

impl RegressorModel {
    /// Randomly initialised model.
    pub fn new(config: RegressorConfig, rng: &mut dyn RngCore) -> Result<Self> {
        Self::build(config, |inputs, outputs, fan| Dense::init(inputs, outputs, fan, rng))
    }

    /// Model with all weights zero; used as a template when loading.
    pub fn zeros(config: RegressorConfig) -> Result<Self> {
        Self::build(config, |inputs, outputs, _| Dense::zeros(inputs, outputs))
    }

    fn build(
        config: RegressorConfig,
        mut make: impl FnMut(usize, usize, usize) -> Dense,
    ) -> Result<Self> {
        config.validate()?;
        let bn = |w: usize| {
            config
                .batch_norm
                .then(|| BatchNorm::new(w, config.bn_momentum, config.bn_eps))
        };
        let mut width = 3;
        let mut encoder = Vec::new();
        for &w in &config.encoder_widths {
            encoder.push(Block {
                dense: make(width, w, width),
                bn: bn(w),
            });
            width = w;
        }
        let (hidden, _) = config.head_widths.split_at(config.head_widths.len() - 1);
        let mut head = Vec::new();
        for &w in hidden {
            head.push(Block {
                dense: make(width, w, width),
                bn: bn(w),
            });
            width = w;
        }
        let output = make(width, OUTPUT_WIDTH, width + OUTPUT_WIDTH);
        Ok(Self {
            config,
            encoder,
            head,
            output,
        })
    }

    pub fn global_feature_width(&self) -> usize {
        self.encoder.last().map_or(3, |b| b.dense.outputs())
    }

    fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.encoder.iter().chain(&self.head)
    }

    /// Parameter tensors as flat slices: per block weight, bias and (with
    /// batch norm) gamma, beta; then the output weight and bias.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for block in self.blocks() {
            out.push(block.dense.weight.as_slice().expect("standard layout"));
            out.push(block.dense.bias.as_slice().expect("standard layout"));
            if let Some(bn) = &block.bn {
                out.push(bn.gamma.as_slice().expect("standard layout"));
                out.push(bn.beta.as_slice().expect("standard layout"));
            }
        }
        out.push(self.output.weight.as_slice().expect("standard layout"));
        out.push(self.output.bias.as_slice().expect("standard layout"));
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for block in self.encoder.iter_mut().chain(self.head.iter_mut()) {
            out.push(block.dense.weight.as_slice_mut().expect("standard layout"));
            out.push(block.dense.bias.as_slice_mut().expect("standard layout"));
            if let Some(bn) = block.bn.as_mut() {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out.push(self.output.weight.as_slice_mut().expect("standard layout"));
        out.push(self.output.bias.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Forward pass over a `B × N × 3` batch; returns `B × 6` raw outputs.
    pub fn forward(
        &self,
        batch: &Array3<f64>,
        mode: ForwardMode<'_>,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        let (b, n, d) = batch.dim();
        if b == 0 || n == 0 || d != 3 {
            return Err(GraspError::ShapeMismatch(format!(
                "expected a non-empty B x N x 3 batch, got {b} x {n} x {d}"
            )));
        }
        let training = mode.is_training();
        let mut rng = match mode {
            ForwardMode::Training { dropout } => dropout,
            ForwardMode::Inference => None,
        };
        let mut x = batch
            .to_shape((b * n, 3))
            .expect("contiguous reshape")
            .into_owned();
        let mut encoder = Vec::with_capacity(self.encoder.len());
        for block in &self.encoder {
            let (y, cache) = block.forward(&x, training, None);
            encoder.push(cache);
            x = y;
        }
        let (mut h, argmax) = max_pool(&x, n);
        let mut head = Vec::with_capacity(self.head.len());
        for block in &self.head {
            let dropout = match rng {
                Some(ref mut r) => Some((self.config.dropout, &mut **r as &mut dyn RngCore)),
                None => None,
            };
            let (y, cache) = block.forward(&h, training, dropout);
            head.push(cache);
            h = y;
        }
        let raw = self.output.forward(&h);
        Ok((
            raw,
            ForwardCache {
                batch: b,
                points: n,
                encoder,
                argmax,
                head,
                output_input: h,
            },
        ))
    }

    /// Inference-mode raw outputs.
    pub fn predict_raw(&self, batch: &Array3<f64>) -> Result<Array2<f64>> {
        self.forward(batch, ForwardMode::Inference).map(|(raw, _)| raw)
    }

    /// Backpropagates `d_raw` (gradient of the loss w.r.t. raw outputs).
    pub fn backward(&self, cache: &ForwardCache, d_raw: &Array2<f64>) -> Gradients {
        // Gradients are collected back-to-front and reversed per block group.
        let mut out_grads = Vec::new();
        let (og, dh) = self.output.backward(&cache.output_input, d_raw, true);
        let mut dh = dh.expect("requested");

        let mut head_grads: Vec<Vec<Vec<f64>>> = Vec::new();
        for (block, bc) in self.head.iter().zip(&cache.head).rev() {
            let mut g = Vec::new();
            dh = block.backward(bc, dh, true, &mut g).expect("requested");
            head_grads.push(g);
        }

        let mut dx = max_pool_backward(&dh, &cache.argmax, cache.points);
        let mut enc_grads: Vec<Vec<Vec<f64>>> = Vec::new();
        for (i, (block, bc)) in self.encoder.iter().zip(&cache.encoder).enumerate().rev() {
            let mut g = Vec::new();
            let need = i > 0;
            if let Some(d) = block.backward(bc, dx, need, &mut g) {
                dx = d;
            } else {
                dx = Array2::zeros((0, 0));
            }
            enc_grads.push(g);
        }

        for g in enc_grads.into_iter().rev().chain(head_grads.into_iter().rev()) {
            out_grads.extend(g);
        }
        out_grads.push(og.weight.into_raw_vec_and_offset().0);
        out_grads.push(og.bias.into_raw_vec_and_offset().0);
        Gradients(out_grads)
    }

    /// Squared-error loss on activated outputs, averaged over the batch,
    /// with its gradient w.r.t. the raw outputs.
    pub fn loss_from_raw(raw: &Array2<f64>, targets: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
        if raw.dim() != targets.dim() {
            return Err(GraspError::ShapeMismatch(format!(
                "outputs {:?} vs targets {:?}",
                raw.dim(),
                targets.dim()
            )));
        }
        let b = raw.nrows() as f64;
        let mut loss = 0.0;
        let mut d_raw = Array2::zeros(raw.dim());
        for (r, (out_row, t_row)) in raw.outer_iter().zip(targets.outer_iter()).enumerate() {
            let raw6: [f64; 6] = std::array::from_fn(|i| out_row[i]);
            let act = activate(raw6).to_array();
            for i in 0..OUTPUT_WIDTH {
                let diff = act[i] - t_row[i];
                loss += diff * diff;
                let dact = match i {
                    3 => act[3],
                    4 | 5 => 1.0 - act[i] * act[i],
                    _ => 1.0,
                };
                d_raw[[r, i]] = 2.0 * diff * dact / b;
            }
        }
        Ok((loss / b, d_raw))
    }

    /// Training-mode loss and exact gradients. Dropout is applied only when
    /// an RNG is supplied.
    pub fn loss_and_gradients(
        &self,
        batch: &Array3<f64>,
        targets: &Array2<f64>,
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<(f64, Gradients, ForwardCache)> {
        let (raw, cache) = self.forward(batch, ForwardMode::Training { dropout })?;
        let (loss, d_raw) = Self::loss_from_raw(&raw, targets)?;
        let grads = self.backward(&cache, &d_raw);
        Ok((loss, grads, cache))
    }

    /// Loss only, in the given mode.
    pub fn loss(
        &self,
        batch: &Array3<f64>,
        targets: &Array2<f64>,
        mode: ForwardMode<'_>,
    ) -> Result<f64> {
        let (raw, _) = self.forward(batch, mode)?;
        Self::loss_from_raw(&raw, targets).map(|(l, _)| l)
    }

    /// Folds the batch statistics of a training pass into the running
    /// statistics.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        let blocks = self.encoder.iter_mut().chain(self.head.iter_mut());
        let caches = cache.encoder.iter().chain(&cache.head);
        for (block, bc) in blocks.zip(caches) {
            if let (Some(bn), Some(stats)) = (block.bn.as_mut(), &bc.bn) {
                bn.update_running_stats(stats);
            }
        }
    }
}

/// Stacks equally sized clouds into a `B × N × 3` batch.
pub fn batch_from_clouds<C: AsRef<[Point3]>>(clouds: &[C]) -> Result<Array3<f64>> {
    let b = clouds.len();
    let n = clouds.first().map_or(0, |c| c.as_ref().len());
    if b == 0 || n == 0 {
        return Err(GraspError::ShapeMismatch("empty batch".into()));
    }
    let mut out = Array3::zeros((b, n, 3));
    for (i, cloud) in clouds.iter().enumerate() {
        let cloud = cloud.as_ref();
        if cloud.len() != n {
            return Err(GraspError::ShapeMismatch(format!(
                "cloud {i} has {} points, expected {n}",
                cloud.len()
            )));
        }
        for (j, p) in cloud.iter().enumerate() {
            for k in 0..3 {
                out[[i, j, k]] = p[k];
            }
        }
    }
    Ok(out)
}

/// Stacks 6-vectors into a `B × 6` matrix.
pub fn stack_targets(targets: &[[f64; 6]]) -> Array2<f64> {
    let mut out = Array2::zeros((targets.len(), OUTPUT_WIDTH));
    for (mut row, t) in out.axis_iter_mut(Axis(0)).zip(targets) {
        for i in 0..OUTPUT_WIDTH {
            row[i] = t[i];
        }
    }
    out
}
