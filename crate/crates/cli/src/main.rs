//! `uncolorable`: train toy colorizers, craft uncolorable examples, export
//! Laplacian masks and run the full evaluation matrix.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uncolorable::config::ExperimentConfig;
use uncolorable::error::{CliError, Result};
use uncolorable::{dataset, eval, io, model_io, synth};
use uncolorable_core::attack::{run_attack, AttackConfig, AttackType};
use uncolorable_core::colorizer::{train_colorizer, Architecture, TrainConfig};
use uncolorable_core::mask::laplacian_mask;
use uncolorable_core::transforms::SiaParams;
use uncolorable_core::{metrics, GrayscaleImage, RgbImage};

#[derive(Parser)]
#[command(name = "uncolorable", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a toy colorizer on a directory of color images (or the
    /// built-in synthetic corpus when --data is omitted).
    Train(TrainArgs),
    /// Write the synthetic color corpus as PNG files.
    Synth(SynthArgs),
    /// Craft a protected (uncolorable) version of one image.
    Protect(ProtectArgs),
    /// Run the evaluation matrix from a config file.
    Evaluate(EvaluateArgs),
    /// Export the Laplacian edge mask of an image as a PNG heat map.
    Mask(MaskArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// small_cnn, dilated_cnn or attn_unet.
    #[arg(long)]
    arch: String,
    /// Directory of color images; omitted = synthetic corpus.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 2e-3)]
    lr: f32,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Square training resolution.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Corpus size (synthetic) or cap on ingested images.
    #[arg(long, default_value_t = 240)]
    n: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 240)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ProtectArgs {
    #[arg(long)]
    model: PathBuf,
    /// random, na, na-mask or pachroma.
    #[arg(long, default_value = "pachroma")]
    attack: String,
    /// Budget in 1/255 units (16 means epsilon = 16/255).
    #[arg(long, default_value_t = 16.0)]
    eps: f32,
    /// Step in 1/255 units; defaults to eps/10.
    #[arg(long)]
    alpha: Option<f32>,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 1.0)]
    mu: f32,
    #[arg(long, default_value_t = 20)]
    n_transforms: usize,
    #[arg(long, default_value_t = 3)]
    split: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Select robustness columns explicitly (any of these flags overrides
    /// the config's robustness table).
    #[arg(long)]
    jpeg75: bool,
    #[arg(long)]
    jpeg50: bool,
    #[arg(long)]
    rrc: bool,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Protect(a) => cmd_protect(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Mask(a) => cmd_mask(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_corpus(args: &TrainArgs) -> Result<Vec<(GrayscaleImage, RgbImage)>> {
    match &args.data {
        None => Ok(synth::generate_corpus(args.n, args.size, args.seed)),
        Some(dir) => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| CliError::io(dir, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("png" | "jpg" | "jpeg" | "PNG" | "JPG" | "JPEG")
                    )
                })
                .collect();
            files.sort();
            files.truncate(args.n);
            if files.is_empty() {
                return Err(CliError::InvalidArgument(format!(
                    "no images found in {}",
                    dir.display()
                )));
            }
            files
                .iter()
                .map(|p| {
                    let color = match io::load_image(p)? {
                        io::LoadedImage::Rgb(c) => c.resize(args.size, args.size)?,
                        io::LoadedImage::Gray(g) => {
                            g.resize(args.size, args.size)?.replicate_rgb()
                        }
                    };
                    let gray = uncolorable_core::image::to_grayscale(&color)?;
                    Ok((gray, color))
                })
                .collect()
        }
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let arch: Architecture = args.arch.parse().map_err(CliError::from)?;
    let corpus = load_corpus(&args)?;
    let corpus_hash = synth::corpus_sha256(&corpus);
    let cfg = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch,
        seed: args.seed,
    };
    let (model, report) = train_colorizer(arch, &corpus, &cfg)?;
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        println!("epoch {:>3}  l1 {loss:.5}", i + 1);
    }
    println!("gray-output baseline l1 {:.5}", report.baseline_l1);
    model_io::save_model(&args.out, &model, args.seed, &corpus_hash)?;
    println!(
        "saved {} ({} params) to {}",
        arch.as_str(),
        model.param_count(),
        args.out.display()
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    synth::write_corpus(&args.out, args.n, args.size, args.seed)?;
    println!(
        "wrote {} {}x{} images to {}",
        args.n,
        args.size,
        args.size,
        args.out.display()
    );
    Ok(())
}

fn cmd_protect(args: ProtectArgs) -> Result<()> {
    let attack: AttackType = args.attack.parse().map_err(CliError::from)?;
    let (model, _) = model_io::load_model(&args.model)?;
    let x = io::load_image(&args.input)?.into_gray()?;
    let cfg = AttackConfig {
        epsilon: args.eps / 255.0,
        alpha: args.alpha.map(|a| a / 255.0),
        iterations: args.iters,
        mu: args.mu,
        n_transforms: args.n_transforms,
        split: args.split,
        use_mask: attack.uses_mask(),
        use_transforms: attack.uses_transforms(),
        norm: uncolorable_core::attack::NormKind::LInf,
        seed: args.seed,
        sia: SiaParams::default(),
    };
    let result = run_attack(attack, &model, &x, &cfg)?;
    let cf_before = metrics::colorfulness(&model.forward(&x)?);
    let cf_after = metrics::colorfulness(&model.forward(&result.adversarial)?);
    io::save_gray(&result.adversarial, &args.out)?;
    println!(
        "{}: cf {cf_before:.2} -> {cf_after:.2}, linf {:.5}, wrote {}",
        attack.as_str(),
        result.perturbation.linf_norm(),
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (mut cfg, cfg_hash) = ExperimentConfig::load(&args.config)?;
    if args.jpeg75 || args.jpeg50 || args.rrc {
        cfg.robustness.jpeg75 = args.jpeg75;
        cfg.robustness.jpeg50 = args.jpeg50;
        cfg.robustness.rrc = args.rrc;
    }
    let images = match &cfg.dataset.path {
        Some(dir) => dataset::ingest_dataset(
            dir,
            cfg.dataset.image_size,
            cfg.dataset.n_images,
            cfg.dataset.seed,
        )?,
        None => synth::generate_corpus(cfg.dataset.n_images, cfg.dataset.image_size, cfg.dataset.seed)
            .into_iter()
            .map(|(g, _)| g)
            .collect(),
    };
    let report = eval::run_matrix(&cfg, &cfg_hash, &images, &args.out)?;
    eval::print_summary(&mut std::io::stdout(), &report.outcomes)
        .map_err(|e| CliError::io(&args.out, e))?;
    println!(
        "wrote {} and {}",
        args.out.join("results.csv").display(),
        args.out.join("results.json").display()
    );
    Ok(())
}

fn cmd_mask(args: MaskArgs) -> Result<()> {
    let x = io::load_image(&args.input)?.into_gray()?;
    let mask = laplacian_mask(&x);
    io::save_mask_heatmap(&mask, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
