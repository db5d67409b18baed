//! The Source-model × Attack-model × Attack-type evaluation matrix:
//! effectiveness, imperceptibility and robustness columns per cell, CSV and
//! JSON reports, and a printed summary table.
//!
//! Perturbations are crafted once per (source, attack, seed) and reused for
//! every attack model; protected inputs pass through 8-bit quantization
//! (PNG-save semantics) before measurement, and robustness columns
//! post-process that quantized input before re-running the attack model.

use std::collections::HashMap;
use std::path::Path;

use serde::ser::Serializer;
use serde::Serialize;
use sha2::{Digest, Sha256};
use uncolorable_core::attack::{run_attack, AttackType};
use uncolorable_core::colorizer::Colorizer;
use uncolorable_core::math::mix_seed;
use uncolorable_core::transforms::random_resized_crop;
use uncolorable_core::{metrics, GrayscaleImage};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::io::jpeg_roundtrip;
use crate::model_io::load_model_expecting;

/// Serializes dB values so the +∞ sentinel prints as "inf" in both CSV and
/// JSON (serde_json rejects non-finite floats).
fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// One row of the report; averaged over images and seeds.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationRecord {
    pub source_model: String,
    pub attack_model: String,
    pub attack_type: String,
    pub cf_unprotected: f64,
    pub cf_protected: f64,
    pub cf_reduction_pct: f64,
    #[serde(serialize_with = "ser_db")]
    pub psnr_output_db: f64,
    #[serde(serialize_with = "ser_db")]
    pub psnr_input_db: f64,
    pub ssim_input: f64,
    pub cf_jpeg75: Option<f64>,
    pub cf_jpeg50: Option<f64>,
    pub cf_rrc: Option<f64>,
    pub n_images: usize,
    /// Base seed (first of the config's seed list); per-seed values live in
    /// the JSON report.
    pub seed: u64,
}

/// Per-seed column means, recorded in the JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct SeedStats {
    pub seed: u64,
    pub cf_unprotected: f64,
    pub cf_protected: f64,
    pub cf_reduction_pct: f64,
    #[serde(serialize_with = "ser_db")]
    pub psnr_output_db: f64,
    #[serde(serialize_with = "ser_db")]
    pub psnr_input_db: f64,
    pub ssim_input: f64,
    pub cf_jpeg75: Option<f64>,
    pub cf_jpeg50: Option<f64>,
    pub cf_rrc: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellOutcome {
    #[serde(flatten)]
    pub record: EvaluationRecord,
    pub per_seed: Vec<SeedStats>,
    /// Sample standard deviation of cf_reduction_pct across seeds.
    pub cf_reduction_pct_std: f64,
    /// True when cf_unprotected was 0 and the reduction was recorded as 0%.
    pub flagged_zero_cf: bool,
}

/// Protected (already 8-bit quantized) inputs for one crafting setting,
/// reusable across attack models.
pub struct CraftCache {
    map: HashMap<(String, AttackType, u64), Vec<GrayscaleImage>>,
}

impl CraftCache {
    pub fn new() -> Self {
        Self {
            map: HashMap::new(),
        }
    }

    fn get_or_craft(
        &mut self,
        source_name: &str,
        source: &Colorizer<f32>,
        attack: AttackType,
        seed: u64,
        images: &[GrayscaleImage],
        cfg: &ExperimentConfig,
    ) -> Result<&[GrayscaleImage]> {
        let key = (source_name.to_string(), attack, seed);
        if !self.map.contains_key(&key) {
            let mut protected = Vec::with_capacity(images.len());
            for (i, x) in images.iter().enumerate() {
                let acfg = cfg.attack_config(attack, mix_seed(seed, i as u64))?;
                let result = run_attack(attack, source, x, &acfg)?;
                protected.push(result.adversarial.quantized());
            }
            self.map.insert(key.clone(), protected);
        }
        Ok(&self.map[&key])
    }
}

impl Default for CraftCache {
    fn default() -> Self {
        Self::new()
    }
}

struct ColumnAcc {
    cf_un: f64,
    cf_pr: f64,
    psnr_out: f64,
    psnr_in: f64,
    ssim: f64,
    jpeg75: f64,
    jpeg50: f64,
    rrc: f64,
    n: usize,
}

impl ColumnAcc {
    fn new() -> Self {
        Self {
            cf_un: 0.0,
            cf_pr: 0.0,
            psnr_out: 0.0,
            psnr_in: 0.0,
            ssim: 0.0,
            jpeg75: 0.0,
            jpeg50: 0.0,
            rrc: 0.0,
            n: 0,
        }
    }
}

fn reduction_pct(cf_un: f64, cf_pr: f64) -> (f64, bool) {
    if cf_un > 0.0 {
        (100.0 * (cf_un - cf_pr) / cf_un, false)
    } else {
        (0.0, true)
    }
}

/// Evaluates one matrix cell, averaging all columns over images and seeds.
pub fn evaluate_cell(
    source_name: &str,
    source: &Colorizer<f32>,
    target_name: &str,
    target: &Colorizer<f32>,
    attack: AttackType,
    images: &[GrayscaleImage],
    cfg: &ExperimentConfig,
) -> Result<CellOutcome> {
    let mut cache = CraftCache::new();
    evaluate_cell_cached(
        source_name,
        source,
        target_name,
        target,
        attack,
        images,
        cfg,
        &mut cache,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate_cell_cached(
    source_name: &str,
    source: &Colorizer<f32>,
    target_name: &str,
    target: &Colorizer<f32>,
    attack: AttackType,
    images: &[GrayscaleImage],
    cfg: &ExperimentConfig,
    cache: &mut CraftCache,
) -> Result<CellOutcome> {
    if images.is_empty() {
        return Err(CliError::InvalidArgument(
            "evaluate_cell needs at least one image".into(),
        ));
    }
    let (h, w) = (images[0].height(), images[0].width());
    if images.iter().any(|x| (x.height(), x.width()) != (h, w)) {
        return Err(CliError::InvalidArgument(
            "all evaluation images must share one size".into(),
        ));
    }

    let rob = &cfg.robustness;
    let rrc_params = cfg.rrc_params();
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let protected =
            cache.get_or_craft(source_name, source, attack, seed, images, cfg)?;
        let mut acc = ColumnAcc::new();
        for (i, x) in images.iter().enumerate() {
            let xq = &protected[i];
            let y_un = target.forward(x)?;
            let y_pr = target.forward(xq)?;
            acc.cf_un += metrics::colorfulness(&y_un);
            acc.cf_pr += metrics::colorfulness(&y_pr);
            acc.psnr_out += metrics::psnr_rgb(&y_un, &y_pr)?;
            acc.psnr_in += metrics::psnr_gray(x, xq)?;
            acc.ssim += metrics::ssim(x, xq)?;
            if rob.jpeg75 {
                acc.jpeg75 += metrics::colorfulness(&target.forward(&jpeg_roundtrip(xq, 75)?)?);
            }
            if rob.jpeg50 {
                acc.jpeg50 += metrics::colorfulness(&target.forward(&jpeg_roundtrip(xq, 50)?)?);
            }
            if rob.rrc {
                let mut cf = 0.0;
                for d in 0..rob.rrc_draws {
                    let rseed = mix_seed(mix_seed(seed, i as u64), 0x5243 + d as u64);
                    let cropped = random_resized_crop(xq, rseed, &rrc_params);
                    cf += metrics::colorfulness(&target.forward(&cropped)?);
                }
                acc.rrc += cf / rob.rrc_draws as f64;
            }
            acc.n += 1;
        }
        let n = acc.n as f64;
        let (red, _) = reduction_pct(acc.cf_un / n, acc.cf_pr / n);
        per_seed.push(SeedStats {
            seed,
            cf_unprotected: acc.cf_un / n,
            cf_protected: acc.cf_pr / n,
            cf_reduction_pct: red,
            psnr_output_db: acc.psnr_out / n,
            psnr_input_db: acc.psnr_in / n,
            ssim_input: acc.ssim / n,
            cf_jpeg75: rob.jpeg75.then(|| acc.jpeg75 / n),
            cf_jpeg50: rob.jpeg50.then(|| acc.jpeg50 / n),
            cf_rrc: rob.rrc.then(|| acc.rrc / n),
        });
    }

    let ns = per_seed.len() as f64;
    let mean = |f: &dyn Fn(&SeedStats) -> f64| per_seed.iter().map(|s| f(s)).sum::<f64>() / ns;
    let cf_un = mean(&|s| s.cf_unprotected);
    let cf_pr = mean(&|s| s.cf_protected);
    let (red, flagged) = reduction_pct(cf_un, cf_pr);
    let red_std = if per_seed.len() > 1 {
        let var = per_seed
            .iter()
            .map(|s| (s.cf_reduction_pct - red) * (s.cf_reduction_pct - red))
            .sum::<f64>()
            / (ns - 1.0);
        var.sqrt()
    } else {
        0.0
    };
    let record = EvaluationRecord {
        source_model: source_name.to_string(),
        attack_model: target_name.to_string(),
        attack_type: attack.as_str().to_string(),
        cf_unprotected: cf_un,
        cf_protected: cf_pr,
        cf_reduction_pct: red,
        psnr_output_db: mean(&|s| s.psnr_output_db),
        psnr_input_db: mean(&|s| s.psnr_input_db),
        ssim_input: mean(&|s| s.ssim_input),
        cf_jpeg75: rob.jpeg75.then(|| mean(&|s| s.cf_jpeg75.unwrap())),
        cf_jpeg50: rob.jpeg50.then(|| mean(&|s| s.cf_jpeg50.unwrap())),
        cf_rrc: rob.rrc.then(|| mean(&|s| s.cf_rrc.unwrap())),
        n_images: images.len(),
        seed: cfg.seeds[0],
    };
    Ok(CellOutcome {
        record,
        per_seed,
        cf_reduction_pct_std: red_std,
        flagged_zero_cf: flagged,
    })
}

/// Canonical Table-1-style cell order: source-major, then attack type in
/// the fixed random → na → na-mask → pachroma order, then attack model.
/// The random baseline runs only on the diagonal.
pub fn matrix_cells(
    model_names: &[String],
    attacks: &[AttackType],
) -> Vec<(usize, usize, AttackType)> {
    const ORDER: [AttackType; 4] = [
        AttackType::Random,
        AttackType::Na,
        AttackType::NaMask,
        AttackType::Pachroma,
    ];
    let mut cells = Vec::new();
    for si in 0..model_names.len() {
        for attack in ORDER.iter().filter(|a| attacks.contains(a)) {
            for ti in 0..model_names.len() {
                if *attack == AttackType::Random && ti != si {
                    continue;
                }
                cells.push((si, ti, *attack));
            }
        }
    }
    cells
}

pub struct MatrixReport {
    pub outcomes: Vec<CellOutcome>,
    pub csv: String,
    pub json: String,
}

/// Runs the whole matrix over the given images and writes `results.csv` and
/// `results.json` under `out_dir`; returns everything in memory too.
pub fn run_matrix(
    cfg: &ExperimentConfig,
    cfg_hash: &str,
    images: &[GrayscaleImage],
    out_dir: &Path,
) -> Result<MatrixReport> {
    cfg.validate()?;
    // Fail fast: every model must load before any attack runs.
    let mut models = Vec::new();
    let mut model_hashes = serde_json::Map::new();
    for mref in &cfg.models {
        let arch = mref.arch.parse().map_err(CliError::from)?;
        let model = load_model_expecting(&mref.path, arch)?;
        let bytes = std::fs::read(&mref.path).map_err(|e| CliError::io(&mref.path, e))?;
        model_hashes.insert(
            mref.arch.clone(),
            serde_json::Value::String(hex::encode(Sha256::digest(&bytes))),
        );
        models.push(model);
    }
    let names: Vec<String> = cfg.models.iter().map(|m| m.arch.clone()).collect();
    let attacks = cfg.attack_types()?;

    let mut cache = CraftCache::new();
    let mut outcomes = Vec::new();
    for (si, ti, attack) in matrix_cells(&names, &attacks) {
        outcomes.push(evaluate_cell_cached(
            &names[si],
            &models[si],
            &names[ti],
            &models[ti],
            attack,
            images,
            cfg,
            &mut cache,
        )?);
    }

    let csv = records_to_csv(outcomes.iter().map(|o| &o.record))?;
    let json = report_json(cfg, cfg_hash, &model_hashes, &outcomes)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    std::fs::write(out_dir.join("results.csv"), &csv)
        .map_err(|e| CliError::io(out_dir.join("results.csv"), e))?;
    std::fs::write(out_dir.join("results.json"), &json)
        .map_err(|e| CliError::io(out_dir.join("results.json"), e))?;
    Ok(MatrixReport {
        outcomes,
        csv,
        json,
    })
}

pub fn records_to_csv<'a>(records: impl Iterator<Item = &'a EvaluationRecord>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)
            .map_err(|e| CliError::InvalidArgument(format!("csv serialization failed: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::InvalidArgument(format!("csv flush failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn report_json(
    cfg: &ExperimentConfig,
    cfg_hash: &str,
    model_hashes: &serde_json::Map<String, serde_json::Value>,
    outcomes: &[CellOutcome],
) -> Result<String> {
    let metadata = serde_json::json!({
        "config_hash": cfg_hash,
        "model_hashes": model_hashes,
        "codec": "image-rs jpeg/png (version pinned by Cargo.lock)",
        "seeds": cfg.seeds,
        "n_images": cfg.dataset.n_images,
        "rrc_draws": cfg.robustness.rrc_draws,
        "notes": [
            "protected inputs are quantized to 8-bit (PNG-save semantics) before all measurements",
            "robustness columns post-process the quantized protected input, then re-run the attack model",
            "cf_rrc is the mean over rrc_draws seeded crops",
        ],
    });
    let body = serde_json::json!({
        "metadata": metadata,
        "records": outcomes,
    });
    serde_json::to_string_pretty(&body)
        .map_err(|e| CliError::InvalidArgument(format!("json serialization failed: {e}")))
}

/// Prints the human-readable summary table in the same row order as the CSV.
pub fn print_summary(out: &mut dyn std::io::Write, outcomes: &[CellOutcome]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<12} {:<9} {:<12} {:>8} {:>8} {:>8} {:>9} {:>9} {:>7} {:>8} {:>8} {:>8}",
        "source", "attack", "attack_model", "cf_un", "cf_prot", "red_%", "psnr_out", "psnr_in",
        "ssim", "jpeg75", "jpeg50", "rrc"
    )?;
    let opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:8.2}"),
        None => format!("{:>8}", "-"),
    };
    for o in outcomes {
        let r = &o.record;
        writeln!(
            out,
            "{:<12} {:<9} {:<12} {:>8.2} {:>8.2} {:>8.2} {:>9.2} {:>9.2} {:>7.3} {} {} {}",
            r.source_model,
            r.attack_type,
            r.attack_model,
            r.cf_unprotected,
            r.cf_protected,
            r.cf_reduction_pct,
            r.psnr_output_db,
            r.psnr_input_db,
            r.ssim_input,
            opt(r.cf_jpeg75),
            opt(r.cf_jpeg50),
            opt(r.cf_rrc),
        )?;
    }
    Ok(())
}
