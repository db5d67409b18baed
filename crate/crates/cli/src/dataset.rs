//! Dataset ingestion: a deterministic seeded sample of image files from a
//! directory, loaded, collapsed to grayscale and resized.

use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use uncolorable_core::{ChaCha8Rng, GrayscaleImage};

use crate::error::{CliError, Result};
use crate::io::load_image;

fn is_image_file(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
        Some(ref e) if e == "png" || e == "jpg" || e == "jpeg"
    )
}

/// Lists image files sorted by name, samples `n` of them with the seed,
/// then loads each as grayscale at `size`×`size`. The sampled subset keeps
/// name order, so the result is independent of sampling internals beyond
/// which files are chosen.
pub fn ingest_dataset(dir: &Path, size: usize, n: usize, seed: u64) -> Result<Vec<GrayscaleImage>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| is_image_file(p))
        .collect();
    files.sort();
    if files.len() < n {
        return Err(CliError::InvalidArgument(format!(
            "dataset {} holds {} images but {} were requested",
            dir.display(),
            files.len(),
            n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, files.len(), n).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| Ok(load_image(&files[i])?.into_gray()?.resize(size, size)?))
        .collect()
}
