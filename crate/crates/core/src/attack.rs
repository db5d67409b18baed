//! The momentum-sign optimization loop that crafts uncolorable examples.
//!
//! One configurable loop covers the whole baseline lattice: `random` (no
//! optimization), `na` (no mask, no transforms), `na-mask` (mask only) and
//! `pachroma` (mask + block-wise input transforms). Each iteration averages
//! input-gradients of the colorfulness loss over transformed copies, updates
//! an L1-normalized momentum, steps in the descent direction scaled by the
//! edge mask, and projects back into the norm ball around the clean image.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorizer::Colorizer;
use crate::error::{Error, Result};
use crate::image::{GrayscaleImage, Perturbation};
use crate::mask::{laplacian_mask, EdgeMask};
use crate::math::{self, sign};
use crate::metrics;
use crate::transforms::{transform_batch, SiaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackType {
    Random,
    Na,
    NaMask,
    Pachroma,
}

impl AttackType {
    pub const ALL: [AttackType; 4] = [
        AttackType::Random,
        AttackType::Na,
        AttackType::NaMask,
        AttackType::Pachroma,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AttackType::Random => "random",
            AttackType::Na => "na",
            AttackType::NaMask => "na-mask",
            AttackType::Pachroma => "pachroma",
        }
    }

    pub fn uses_mask(&self) -> bool {
        matches!(self, AttackType::NaMask | AttackType::Pachroma)
    }

    pub fn uses_transforms(&self) -> bool {
        matches!(self, AttackType::Pachroma)
    }
}

impl core::str::FromStr for AttackType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower: String = s.chars().map(|c| c.to_ascii_lowercase()).collect();
        match lower.as_str() {
            "random" => Ok(AttackType::Random),
            "na" => Ok(AttackType::Na),
            "na-mask" | "na_mask" => Ok(AttackType::NaMask),
            "pachroma" => Ok(AttackType::Pachroma),
            _ => Err(Error::InvalidArgument(
                "unknown attack type (expected random, na, na-mask or pachroma)",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    LInf,
    L2,
}

/// One record per attack run.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Perturbation budget in `[0, 1]` pixel units (default 16/255).
    pub epsilon: f32,
    /// Step size; `None` means `epsilon / 10`.
    pub alpha: Option<f32>,
    pub iterations: usize,
    /// Momentum decay factor.
    pub mu: f32,
    /// Number of transformed copies per iteration.
    pub n_transforms: usize,
    /// Blocks per side for the structure-invariant transforms.
    pub split: usize,
    pub use_mask: bool,
    pub use_transforms: bool,
    pub norm: NormKind,
    pub seed: u64,
    pub sia: SiaParams,
}

impl AttackConfig {
    /// Default hyperparameters for a named attack type:
    /// `alpha = epsilon/10`, `T = 100`, `mu = 1`, `N = 20`, `s = 3`.
    pub fn preset(attack: AttackType, epsilon: f32, seed: u64) -> Self {
        Self {
            epsilon,
            alpha: None,
            iterations: 100,
            mu: 1.0,
            n_transforms: 20,
            split: 3,
            use_mask: attack.uses_mask(),
            use_transforms: attack.uses_transforms(),
            norm: NormKind::LInf,
            seed,
            sia: SiaParams::default(),
        }
    }

    pub fn alpha(&self) -> f32 {
        self.alpha.unwrap_or(self.epsilon / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument("epsilon must lie in [0, 1]"));
        }
        if self.alpha() > self.epsilon && self.epsilon > 0.0 {
            return Err(Error::InvalidArgument("alpha must not exceed epsilon"));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be at least 1"));
        }
        if self.n_transforms == 0 {
            return Err(Error::InvalidArgument("batch size N must be at least 1"));
        }
        if self.split == 0 {
            return Err(Error::InvalidArgument("block split must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub adversarial: GrayscaleImage,
    pub perturbation: Perturbation,
    /// Colorfulness of the crafting model's output after each iteration.
    pub cf_trace: Vec<f64>,
    pub iterations_run: usize,
    /// Zero-gradient colorfulness events (pure-gray model output).
    pub degenerate_events: usize,
}

/// Scales `delta` onto the L2 ball of the given radius if it lies outside;
/// leaves interior (and boundary) points unchanged.
pub fn l2_project(delta: &Perturbation, radius: f32) -> Perturbation {
    let norm = delta.l2_norm();
    if norm <= radius {
        return delta.clone();
    }
    let scale = radius / norm;
    Perturbation::new(
        delta.height(),
        delta.width(),
        delta.data().iter().map(|&v| v * scale).collect(),
    )
    .expect("dimensions preserved")
}

fn l2_project_slice(delta: &mut [f32], radius: f32) {
    let norm = math::sqrtf(delta.iter().map(|&v| v * v).sum());
    if norm > radius {
        let scale = radius / norm;
        for v in delta.iter_mut() {
            *v *= scale;
        }
    }
}

/// The full momentum-sign loop (Algorithm PAChroma when both the mask and
/// the transforms are enabled; `na` / `na-mask` under the other flag
/// settings).
pub fn pachroma(
    model: &Colorizer<f32>,
    x: &GrayscaleImage,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    pachroma_observed(model, x, cfg, &mut |_, _| {})
}

/// [`pachroma`] with a per-iteration observer: called after each iteration's
/// projection with the iteration index and the current adversarial image, so
/// invariants (budget, mask-zero pixels) can be checked at every step.
pub fn pachroma_observed(
    model: &Colorizer<f32>,
    x: &GrayscaleImage,
    cfg: &AttackConfig,
    observe: &mut dyn FnMut(usize, &GrayscaleImage),
) -> Result<AttackResult> {
    cfg.validate()?;
    let (h, w) = (x.height(), x.width());
    let n_pix = h * w;
    let mask = if cfg.use_mask {
        laplacian_mask(x)
    } else {
        EdgeMask::ones(h, w)
    };
    let alpha = cfg.alpha();
    let eps = cfg.epsilon;

    let mut adv = x.clone();
    let mut momentum = vec![0.0f32; n_pix];
    let mut cf_trace = Vec::with_capacity(cfg.iterations);
    let mut degenerate_events = 0usize;

    for t in 0..cfg.iterations {
        // Average the input-gradients over the transformed copies. Without
        // transforms all N copies are the shared image, so one evaluation
        // equals the average exactly.
        let mut avg = vec![0.0f32; n_pix];
        if cfg.use_transforms {
            let seed_t = math::mix_seed(cfg.seed, t as u64);
            let batch = transform_batch(&adv, cfg.n_transforms, cfg.split, seed_t, &cfg.sia)?;
            for copy in &batch {
                let ig = model
                    .input_gradient(copy)
                    .map_err(|_| Error::NanGradient { iteration: t })?;
                if ig.degenerate {
                    degenerate_events += 1;
                }
                for (a, g) in avg.iter_mut().zip(&ig.grad) {
                    *a += g;
                }
            }
            let inv = 1.0 / cfg.n_transforms as f32;
            for a in avg.iter_mut() {
                *a *= inv;
            }
        } else {
            let ig = model.input_gradient(&adv)?;
            if ig.degenerate {
                degenerate_events += 1;
            }
            avg.copy_from_slice(&ig.grad);
        }
        if avg.iter().any(|v| !v.is_finite()) {
            return Err(Error::NanGradient { iteration: t });
        }

        let l1: f32 = avg.iter().map(|v| v.abs()).sum();
        if l1 > 0.0 {
            for (m, a) in momentum.iter_mut().zip(&avg) {
                *m = cfg.mu * *m + a / l1;
            }
        } else {
            // Zero averaged gradient: decay-only momentum update.
            for m in momentum.iter_mut() {
                *m *= cfg.mu;
            }
        }

        // Descent step (the loss is minimized), masked, then projected onto
        // the norm ball around the clean image and the value range.
        let mut data = adv.data().to_vec();
        match cfg.norm {
            NormKind::LInf => {
                for i in 0..n_pix {
                    let stepped =
                        data[i] - alpha * mask.data()[i] * sign(momentum[i]);
                    let xi = x.data()[i];
                    data[i] = stepped.clamp(xi - eps, xi + eps).clamp(0.0, 1.0);
                }
            }
            NormKind::L2 => {
                let mut delta = vec![0.0f32; n_pix];
                for i in 0..n_pix {
                    let stepped =
                        data[i] - alpha * mask.data()[i] * sign(momentum[i]);
                    delta[i] = stepped - x.data()[i];
                }
                l2_project_slice(&mut delta, eps);
                for i in 0..n_pix {
                    data[i] = (x.data()[i] + delta[i]).clamp(0.0, 1.0);
                }
            }
        }
        adv = GrayscaleImage::new(h, w, data)?;
        observe(t, &adv);
        cf_trace.push(metrics::colorfulness(&model.forward(&adv)?));
    }

    let delta: Vec<f32> = adv
        .data()
        .iter()
        .zip(x.data())
        .map(|(a, b)| a - b)
        .collect();
    Ok(AttackResult {
        perturbation: Perturbation::new(h, w, delta)?,
        adversarial: adv,
        iterations_run: cfg.iterations,
        cf_trace,
        degenerate_events,
    })
}

/// The unmasked, untransformed baseline minimizing the same loss.
pub fn nullifying_attack(
    model: &Colorizer<f32>,
    x: &GrayscaleImage,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let cfg = AttackConfig {
        use_mask: false,
        use_transforms: false,
        ..cfg.clone()
    };
    pachroma(model, x, &cfg)
}

/// Uniform noise in `[-epsilon, +epsilon]`, no optimization.
pub fn random_baseline(x: &GrayscaleImage, cfg: &AttackConfig) -> Result<AttackResult> {
    if !(0.0..=1.0).contains(&cfg.epsilon) {
        return Err(Error::InvalidArgument("epsilon must lie in [0, 1]"));
    }
    let (h, w) = (x.height(), x.width());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data = x.data().to_vec();
    if cfg.epsilon > 0.0 {
        for v in data.iter_mut() {
            let d: f32 = rng.gen_range(-cfg.epsilon..=cfg.epsilon);
            *v = (*v + d).clamp(0.0, 1.0);
        }
    }
    let adv = GrayscaleImage::new(h, w, data)?;
    let delta: Vec<f32> = adv
        .data()
        .iter()
        .zip(x.data())
        .map(|(a, b)| a - b)
        .collect();
    Ok(AttackResult {
        perturbation: Perturbation::new(h, w, delta)?,
        adversarial: adv,
        cf_trace: Vec::new(),
        iterations_run: 0,
        degenerate_events: 0,
    })
}

/// Dispatches a named attack preset against one image.
pub fn run_attack(
    attack: AttackType,
    model: &Colorizer<f32>,
    x: &GrayscaleImage,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    match attack {
        AttackType::Random => random_baseline(x, cfg),
        _ => {
            let cfg = AttackConfig {
                use_mask: attack.uses_mask(),
                use_transforms: attack.uses_transforms(),
                ..cfg.clone()
            };
            pachroma(model, x, &cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorizer::Architecture;

    fn probe_gray(side: usize, seed: u64) -> GrayscaleImage {
        let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(5);
        let data = (0..side * side)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 40) & 0xff) as f32 / 255.0
            })
            .collect();
        GrayscaleImage::new(side, side, data).unwrap()
    }

    fn quick_cfg(attack: AttackType, seed: u64) -> AttackConfig {
        let mut cfg = AttackConfig::preset(attack, 16.0 / 255.0, seed);
        cfg.iterations = 4;
        cfg.n_transforms = 2;
        cfg.split = 2;
        cfg
    }

    #[test]
    fn budget_invariant_and_determinism() {
        let model = Colorizer::new(Architecture::SmallCnn, 11);
        let x = probe_gray(32, 0);
        let cfg = quick_cfg(AttackType::Pachroma, 3);
        let r1 = pachroma(&model, &x, &cfg).unwrap();
        let r2 = pachroma(&model, &x, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.perturbation.linf_norm() <= cfg.epsilon + 1e-7);
        assert_eq!(r1.cf_trace.len(), r1.iterations_run);
        // The stored adversarial image is exactly clip(x + delta).
        for i in 0..x.data().len() {
            let recon = (x.data()[i] + r1.perturbation.data()[i]).clamp(0.0, 1.0);
            assert_eq!(recon, r1.adversarial.data()[i]);
        }
    }

    #[test]
    fn mask_zero_pixels_untouched() {
        // Left half constant, right half textured: the Laplacian mask is
        // zero on the flat interior, so those pixels must stay bit-identical.
        let side = 32;
        let data: Vec<f32> = (0..side * side)
            .map(|i| {
                let (y, x) = (i / side, i % side);
                if x < side / 2 {
                    0.5
                } else {
                    ((y * 31 + x * 17) % 97) as f32 / 96.0
                }
            })
            .collect();
        let x = GrayscaleImage::new(side, side, data).unwrap();
        let mask = crate::mask::laplacian_mask(&x);
        assert!(mask.data().iter().any(|&m| m == 0.0), "probe needs flat pixels");

        let model = Colorizer::new(Architecture::SmallCnn, 2);
        let cfg = quick_cfg(AttackType::NaMask, 1);
        let r = pachroma(&model, &x, &cfg).unwrap();
        for i in 0..x.data().len() {
            if mask.data()[i] == 0.0 {
                assert_eq!(r.adversarial.data()[i], x.data()[i]);
            }
        }
    }

    #[test]
    fn single_step_is_signed_gradient_step() {
        let model = Colorizer::new(Architecture::SmallCnn, 4);
        let x = probe_gray(32, 7);
        let mut cfg = AttackConfig::preset(AttackType::Na, 16.0 / 255.0, 0);
        cfg.iterations = 1;
        cfg.n_transforms = 1;
        let r = pachroma(&model, &x, &cfg).unwrap();

        let ig = model.input_gradient(&x).unwrap();
        let alpha = cfg.alpha();
        for i in 0..x.data().len() {
            let expect = (x.data()[i] - alpha * sign(ig.grad[i]))
                .clamp(x.data()[i] - cfg.epsilon, x.data()[i] + cfg.epsilon)
                .clamp(0.0, 1.0);
            assert_eq!(r.adversarial.data()[i], expect);
        }
    }

    #[test]
    fn constant_output_model_leaves_input_unchanged() {
        let mut model = Colorizer::new(Architecture::SmallCnn, 0);
        for s in model.param_slices_mut() {
            s.fill(0.0);
        }
        let x = probe_gray(32, 9);
        let cfg = quick_cfg(AttackType::Na, 5);
        let r = pachroma(&model, &x, &cfg).unwrap();
        assert_eq!(r.adversarial, x);
        assert_eq!(r.degenerate_events, cfg.iterations);
        assert!(r.cf_trace.iter().all(|&c| c == r.cf_trace[0]));
    }

    #[test]
    fn random_baseline_cases() {
        let x = probe_gray(32, 1);
        let mut cfg = AttackConfig::preset(AttackType::Random, 0.0, 7);
        let r = random_baseline(&x, &cfg).unwrap();
        assert_eq!(r.adversarial, x);

        cfg.epsilon = 16.0 / 255.0;
        let r1 = random_baseline(&x, &cfg).unwrap();
        let r2 = random_baseline(&x, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.perturbation.linf_norm() <= cfg.epsilon + 1e-7);
        assert_ne!(r1.adversarial, x);
    }

    #[test]
    fn l2_projection_cases() {
        let inside = Perturbation::new(2, 2, alloc::vec![0.1, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(l2_project(&inside, 1.0), inside);

        let big = Perturbation::new(2, 2, alloc::vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        let proj = l2_project(&big, 1.0);
        assert!((proj.l2_norm() - 1.0).abs() < 1e-6);
        assert_eq!(proj.data()[0], 1.0);

        let unit = Perturbation::new(2, 2, alloc::vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(l2_project(&unit, 1.0), unit);
    }

    #[test]
    fn l2_norm_attack_respects_budget() {
        let model = Colorizer::new(Architecture::SmallCnn, 3);
        let x = probe_gray(32, 2);
        let mut cfg = quick_cfg(AttackType::Na, 2);
        cfg.norm = NormKind::L2;
        cfg.epsilon = 0.5;
        cfg.alpha = Some(0.05);
        let r = pachroma(&model, &x, &cfg).unwrap();
        assert!(r.perturbation.l2_norm() <= cfg.epsilon + 1e-5);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = AttackConfig::preset(AttackType::Na, 16.0 / 255.0, 0);
        cfg.alpha = Some(1.0);
        assert!(cfg.validate().is_err());
        let mut cfg = AttackConfig::preset(AttackType::Na, 2.0, 0);
        assert!(cfg.validate().is_err());
        cfg.epsilon = 0.1;
        cfg.iterations = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn attack_type_labels_parse_case_insensitively() {
        use core::str::FromStr;
        assert_eq!(AttackType::from_str("PAChroma").unwrap(), AttackType::Pachroma);
        assert_eq!(AttackType::from_str("NA-Mask").unwrap(), AttackType::NaMask);
        assert_eq!(AttackType::from_str("random").unwrap(), AttackType::Random);
        assert!(AttackType::from_str("pgd").is_err());
    }
}
