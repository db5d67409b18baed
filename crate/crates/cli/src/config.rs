//! TOML experiment configuration. Every tunable design parameter (attack
//! hyperparameters, transform family ranges, RRC crop ranges, robustness
//! toggles) appears here; `configs/example.toml` documents the schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uncolorable_core::attack::{AttackConfig, AttackType, NormKind};
use uncolorable_core::transforms::{RrcParams, SiaParams};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub models: Vec<ModelRef>,
    /// Attack presets to run: random, na, na-mask, pachroma.
    pub attacks: Vec<String>,
    pub seeds: Vec<u64>,
    pub attack: AttackParams,
    pub sia: SiaConfig,
    pub rrc: RrcConfig,
    pub robustness: RobustnessConfig,
    /// Worker cap for independent cells (cells are deterministic either way).
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            models: Vec::new(),
            attacks: vec![
                "random".into(),
                "na".into(),
                "na-mask".into(),
                "pachroma".into(),
            ],
            seeds: vec![0, 1, 2],
            attack: AttackParams::default(),
            sia: SiaConfig::default(),
            rrc: RrcConfig::default(),
            robustness: RobustnessConfig::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Directory of PNG/JPEG files; omit to use the built-in synthetic
    /// corpus.
    pub path: Option<PathBuf>,
    pub image_size: usize,
    pub n_images: usize,
    /// Sampling (or synthesis) seed, separate from the attack seeds.
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: None,
            image_size: 64,
            n_images: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRef {
    pub arch: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackParams {
    /// Budget in 1/255 units (16.0 means epsilon = 16/255).
    pub epsilon_255: f32,
    /// Step in 1/255 units; omitted means epsilon/10.
    pub alpha_255: Option<f32>,
    pub iterations: usize,
    pub mu: f32,
    pub n_transforms: usize,
    pub split: usize,
    /// "linf" or "l2".
    pub norm: String,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            epsilon_255: 16.0,
            alpha_255: None,
            iterations: 100,
            mu: 1.0,
            n_transforms: 20,
            split: 3,
            norm: "linf".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SiaConfig {
    pub shift_frac: f32,
    pub scale_lo: f32,
    pub scale_hi: f32,
    pub jitter: f32,
    pub noise_sigma: f32,
    pub dct_drop_frac: f32,
    pub dropout_p: f32,
}

impl Default for SiaConfig {
    fn default() -> Self {
        let p = SiaParams::default();
        Self {
            shift_frac: p.shift_frac,
            scale_lo: p.scale_lo,
            scale_hi: p.scale_hi,
            jitter: p.jitter,
            noise_sigma: p.noise_sigma,
            dct_drop_frac: p.dct_drop_frac,
            dropout_p: p.dropout_p,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RrcConfig {
    pub scale_lo: f32,
    pub scale_hi: f32,
    pub aspect_lo: f32,
    pub aspect_hi: f32,
}

impl Default for RrcConfig {
    fn default() -> Self {
        let p = RrcParams::default();
        Self {
            scale_lo: p.scale_lo,
            scale_hi: p.scale_hi,
            aspect_lo: p.aspect_lo,
            aspect_hi: p.aspect_hi,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessConfig {
    pub jpeg75: bool,
    pub jpeg50: bool,
    pub rrc: bool,
    /// RRC robustness is averaged over this many seeded draws.
    pub rrc_draws: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            jpeg75: true,
            jpeg50: true,
            rrc: true,
            rrc_draws: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        Ok((cfg, hash))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("at least one seed is required".into()));
        }
        if self.models.is_empty() {
            return Err(CliError::Config("at least one model is required".into()));
        }
        if self.attacks.is_empty() {
            return Err(CliError::Config("at least one attack is required".into()));
        }
        self.attack_types()?;
        self.norm_kind()?;
        for m in &self.models {
            m.arch
                .parse::<uncolorable_core::colorizer::Architecture>()
                .map_err(|e| CliError::Config(format!("model {:?}: {e}", m.path)))?;
        }
        if !(0.0..=255.0).contains(&self.attack.epsilon_255) {
            return Err(CliError::Config("epsilon_255 must lie in [0, 255]".into()));
        }
        if self.robustness.rrc && self.robustness.rrc_draws == 0 {
            return Err(CliError::Config("rrc_draws must be at least 1".into()));
        }
        Ok(())
    }

    pub fn attack_types(&self) -> Result<Vec<AttackType>> {
        self.attacks
            .iter()
            .map(|s| s.parse::<AttackType>().map_err(CliError::from))
            .collect()
    }

    fn norm_kind(&self) -> Result<NormKind> {
        match self.attack.norm.to_ascii_lowercase().as_str() {
            "linf" | "l_inf" => Ok(NormKind::LInf),
            "l2" | "l_2" => Ok(NormKind::L2),
            other => Err(CliError::Config(format!("unknown norm {other:?}"))),
        }
    }

    pub fn sia_params(&self) -> SiaParams {
        SiaParams {
            shift_frac: self.sia.shift_frac,
            scale_lo: self.sia.scale_lo,
            scale_hi: self.sia.scale_hi,
            jitter: self.sia.jitter,
            noise_sigma: self.sia.noise_sigma,
            dct_drop_frac: self.sia.dct_drop_frac,
            dropout_p: self.sia.dropout_p,
        }
    }

    pub fn rrc_params(&self) -> RrcParams {
        RrcParams {
            scale_lo: self.rrc.scale_lo,
            scale_hi: self.rrc.scale_hi,
            aspect_lo: self.rrc.aspect_lo,
            aspect_hi: self.rrc.aspect_hi,
        }
    }

    /// Materializes the core attack config for one preset and seed.
    pub fn attack_config(&self, attack: AttackType, seed: u64) -> Result<AttackConfig> {
        Ok(AttackConfig {
            epsilon: self.attack.epsilon_255 / 255.0,
            alpha: self.attack.alpha_255.map(|a| a / 255.0),
            iterations: self.attack.iterations,
            mu: self.attack.mu,
            n_transforms: self.attack.n_transforms,
            split: self.attack.split,
            use_mask: attack.uses_mask(),
            use_transforms: attack.uses_transforms(),
            norm: self.norm_kind()?,
            seed,
            sia: self.sia_params(),
        })
    }
}
