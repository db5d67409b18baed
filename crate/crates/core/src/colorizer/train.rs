//! L1 training loop for the toy colorizers with an Adam optimizer.
//!
//! Deterministic for a fixed seed: sample order, initialization and the
//! optimizer state all derive from `TrainConfig::seed`, so repeated runs
//! produce bit-identical weights on one machine.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Architecture, Colorizer, MIN_INPUT_SIDE};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::image::{GrayscaleImage, RgbImage};
use crate::math::sign;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 2e-3,
            batch_size: 8,
            seed: 0,
        }
    }
}

/// Per-epoch mean L1 losses plus the constant-gray reference the model must
/// beat (predicting `R = G = B = input`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub baseline_l1: f64,
}

struct Adam {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    step: u64,
    lr: f32,
}

impl Adam {
    const BETA1: f32 = 0.9;
    const BETA2: f32 = 0.999;
    const EPS: f32 = 1e-8;

    fn new(shapes: &[usize], lr: f32) -> Self {
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut [&mut [f32]], grads: &[Vec<f32>]) {
        self.step += 1;
        let t = self.step as f32;
        let bc1 = 1.0 - libm::powf(Self::BETA1, t);
        let bc2 = 1.0 - libm::powf(Self::BETA2, t);
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads[i]);
            for j in 0..p.len() {
                m[j] = Self::BETA1 * m[j] + (1.0 - Self::BETA1) * g[j];
                v[j] = Self::BETA2 * v[j] + (1.0 - Self::BETA2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] -= self.lr * mh / (libm::sqrtf(vh) + Self::EPS);
            }
        }
    }
}

/// Mean L1 distance between each color target and its re-tripled grayscale
/// input: the loss of the do-nothing colorizer.
pub fn gray_baseline_l1(corpus: &[(GrayscaleImage, RgbImage)]) -> f64 {
    let mut total = 0.0;
    for (gray, color) in corpus {
        let mut acc = 0.0f64;
        for (px, &g) in color.data().chunks_exact(3).zip(gray.data()) {
            for &c in px {
                acc += (c as f64 - g as f64).abs();
            }
        }
        total += acc / color.data().len() as f64;
    }
    total / corpus.len() as f64
}

fn l1_loss_and_grad(pred: &Tensor<f32>, target: &Tensor<f32>) -> (f64, Tensor<f32>) {
    let n = pred.data.len();
    let mut grad = Tensor::zeros(pred.channels, pred.height, pred.width);
    let mut loss = 0.0f64;
    let inv = 1.0 / n as f32;
    for i in 0..n {
        let d = pred.data[i] - target.data[i];
        loss += d.abs() as f64;
        grad.data[i] = sign(d) * inv;
    }
    (loss / n as f64, grad)
}

fn target_tensor(img: &RgbImage) -> Tensor<f32> {
    let p = img.height() * img.width();
    let mut t = Tensor::zeros(3, img.height(), img.width());
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        for c in 0..3 {
            t.data[c * p + i] = px[c];
        }
    }
    t
}

/// Trains a fresh model of the given architecture on (grayscale, color)
/// pairs, minimizing per-pixel L1 error. Zero epochs returns the initialized
/// model unchanged.
pub fn train_colorizer(
    arch: Architecture,
    corpus: &[(GrayscaleImage, RgbImage)],
    cfg: &TrainConfig,
) -> Result<(Colorizer<f32>, TrainReport)> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("training corpus is empty"));
    }
    for (gray, color) in corpus {
        if (gray.height(), gray.width()) != (color.height(), color.width()) {
            return Err(Error::DimensionMismatch {
                expected: (gray.height(), gray.width()),
                got: (color.height(), color.width()),
            });
        }
        if gray.height() < MIN_INPUT_SIDE || gray.width() < MIN_INPUT_SIDE {
            return Err(Error::InvalidArgument(
                "training images must be at least 32x32",
            ));
        }
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1"));
    }

    let mut model = Colorizer::new(arch, cfg.seed);
    let shapes: Vec<usize> = model.param_slices().iter().map(|s| s.len()).collect();
    let mut adam = Adam::new(&shapes, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let inputs: Vec<Tensor<f32>> = corpus.iter().map(|(g, _)| Tensor::from_gray(g)).collect();
    let targets: Vec<Tensor<f32>> = corpus.iter().map(|(_, c)| target_tensor(c)).collect();

    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        baseline_l1: gray_baseline_l1(corpus),
    };

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let mut batch_grads: Vec<Vec<f32>> =
                shapes.iter().map(|&n| vec![0.0; n]).collect();
            for &idx in batch {
                let (cache, pred) = model.forward_with_cache(&inputs[idx]);
                let (loss, gout) = l1_loss_and_grad(&pred, &targets[idx]);
                epoch_loss += loss;
                let (_, grads) = model.backward(&cache, &gout);
                for (acc, g) in batch_grads.iter_mut().zip(&grads) {
                    for (a, &gv) in acc.iter_mut().zip(g) {
                        *a += gv;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f32;
            for g in &mut batch_grads {
                for v in g.iter_mut() {
                    *v *= scale;
                }
            }
            let mut params = model.param_slices_mut();
            adam.update(&mut params, &batch_grads);
        }
        report.epoch_losses.push(epoch_loss / corpus.len() as f64);
    }
    Ok((model, report))
}
