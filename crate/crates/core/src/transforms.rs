//! Structure-invariant input transformations.
//!
//! The image is split into an `s x s` block grid and one randomly drawn
//! transformation family is applied independently per block. Every family
//! maps a block to a block of identical dimensions, so the image keeps its
//! size and the attack gradient stays aligned with the shared input. Random
//! resized cropping (a robustness post-process) also lives here.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{resize_raster, GrayscaleImage};
use crate::math;

/// Tunable parameter ranges for the per-block transformation families.
#[derive(Debug, Clone, PartialEq)]
pub struct SiaParams {
    /// Maximum shift as a fraction of the block side (reflect fill).
    pub shift_frac: f32,
    /// Intensity scale factor range.
    pub scale_lo: f32,
    pub scale_hi: f32,
    /// Additive brightness jitter bound (one draw per block).
    pub jitter: f32,
    /// Per-pixel Gaussian noise standard deviation.
    pub noise_sigma: f32,
    /// Fraction of highest-frequency DCT coefficients zeroed per block.
    pub dct_drop_frac: f32,
    /// Per-pixel dropout probability.
    pub dropout_p: f32,
}

impl Default for SiaParams {
    fn default() -> Self {
        Self {
            shift_frac: 0.25,
            scale_lo: 0.8,
            scale_hi: 1.2,
            jitter: 0.1,
            noise_sigma: 0.05,
            dct_drop_frac: 0.25,
            dropout_p: 0.1,
        }
    }
}

/// Crop sampling ranges for random resized cropping.
#[derive(Debug, Clone, PartialEq)]
pub struct RrcParams {
    /// Crop area as a fraction of the image area.
    pub scale_lo: f32,
    pub scale_hi: f32,
    /// Crop aspect ratio (width / height).
    pub aspect_lo: f32,
    pub aspect_hi: f32,
}

impl Default for RrcParams {
    fn default() -> Self {
        Self {
            scale_lo: 0.6,
            scale_hi: 1.0,
            aspect_lo: 0.75,
            aspect_hi: 4.0 / 3.0,
        }
    }
}

/// The transformation families drawn uniformly per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformFamily {
    Shift,
    Flip,
    Rotate,
    Scale,
    Jitter,
    Noise,
    DctFilter,
    Resize,
    Dropout,
}

impl TransformFamily {
    pub const ALL: [TransformFamily; 9] = [
        TransformFamily::Shift,
        TransformFamily::Flip,
        TransformFamily::Rotate,
        TransformFamily::Scale,
        TransformFamily::Jitter,
        TransformFamily::Noise,
        TransformFamily::DctFilter,
        TransformFamily::Resize,
        TransformFamily::Dropout,
    ];
}

/// One block of the `s x s` partition: half-open pixel ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub y0: usize,
    pub y1: usize,
    pub x0: usize,
    pub x1: usize,
}

/// An exact `s x s` partition of an image; remainder pixels are absorbed by
/// the last row/column of blocks.
#[derive(Debug, Clone)]
pub struct BlockGrid {
    height: usize,
    width: usize,
    split: usize,
}

impl BlockGrid {
    pub fn new(height: usize, width: usize, split: usize) -> Result<Self> {
        if split == 0 {
            return Err(Error::InvalidArgument("block split must be at least 1"));
        }
        if split > height.min(width) {
            return Err(Error::InvalidArgument(
                "block split exceeds the smaller image side",
            ));
        }
        Ok(Self {
            height,
            width,
            split,
        })
    }

    pub fn split(&self) -> usize {
        self.split
    }

    /// Blocks in row-major order.
    pub fn blocks(&self) -> impl Iterator<Item = Block> + '_ {
        let (h, w, s) = (self.height, self.width, self.split);
        let bh = h / s;
        let bw = w / s;
        (0..s).flat_map(move |by| {
            (0..s).map(move |bx| Block {
                y0: by * bh,
                y1: if by + 1 == s { h } else { (by + 1) * bh },
                x0: bx * bw,
                x1: if bx + 1 == s { w } else { (bx + 1) * bw },
            })
        })
    }
}

fn reflect(mut i: isize, n: isize) -> usize {
    // Symmetric reflection: -1 -> 0, n -> n-1.
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f32, f32) {
    // Box-Muller.
    let u1: f32 = rng.gen_range(f32::MIN_POSITIVE..=1.0f32);
    let u2: f32 = rng.gen::<f32>();
    let r = math::sqrtf(-2.0 * libm::logf(u1));
    let theta = 2.0 * core::f32::consts::PI * u2;
    (r * math::cosf(theta), r * libm::sinf(theta))
}

fn dct1d(input: &[f32], inverse: bool) -> Vec<f32> {
    let n = input.len();
    let nf = n as f32;
    let mut out = vec![0.0f32; n];
    let a0 = math::sqrtf(1.0 / nf);
    let au = math::sqrtf(2.0 / nf);
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0f32;
        if inverse {
            // DCT-III with orthonormal scaling.
            for (u, &xu) in input.iter().enumerate() {
                let a = if u == 0 { a0 } else { au };
                acc += a * xu * math::cosf(core::f32::consts::PI * (2.0 * k as f32 + 1.0) * u as f32 / (2.0 * nf));
            }
            *o = acc;
        } else {
            for (i, &xi) in input.iter().enumerate() {
                acc += xi * math::cosf(core::f32::consts::PI * (2.0 * i as f32 + 1.0) * k as f32 / (2.0 * nf));
            }
            *o = acc * if k == 0 { a0 } else { au };
        }
    }
    out
}

fn dct2d(block: &mut [f32], bh: usize, bw: usize, inverse: bool) {
    for y in 0..bh {
        let row = dct1d(&block[y * bw..(y + 1) * bw], inverse);
        block[y * bw..(y + 1) * bw].copy_from_slice(&row);
    }
    let mut col = vec![0.0f32; bh];
    for x in 0..bw {
        for y in 0..bh {
            col[y] = block[y * bw + x];
        }
        let t = dct1d(&col, inverse);
        for y in 0..bh {
            block[y * bw + x] = t[y];
        }
    }
}

fn apply_family(
    block: &mut Vec<f32>,
    bh: usize,
    bw: usize,
    family: TransformFamily,
    rng: &mut ChaCha8Rng,
    params: &SiaParams,
) {
    match family {
        TransformFamily::Shift => {
            let max_dy = math::floorf(params.shift_frac * bh as f32) as isize;
            let max_dx = math::floorf(params.shift_frac * bw as f32) as isize;
            let dy = rng.gen_range(-max_dy..=max_dy);
            let dx = rng.gen_range(-max_dx..=max_dx);
            let src = block.clone();
            for y in 0..bh as isize {
                for x in 0..bw as isize {
                    let sy = reflect(y - dy, bh as isize);
                    let sx = reflect(x - dx, bw as isize);
                    block[y as usize * bw + x as usize] = src[sy * bw + sx];
                }
            }
        }
        TransformFamily::Flip => {
            let horizontal = rng.gen_range(0..2u8) == 0;
            let src = block.clone();
            for y in 0..bh {
                for x in 0..bw {
                    let (sy, sx) = if horizontal {
                        (y, bw - 1 - x)
                    } else {
                        (bh - 1 - y, x)
                    };
                    block[y * bw + x] = src[sy * bw + sx];
                }
            }
        }
        TransformFamily::Rotate => {
            // Square blocks rotate by 90/180/270; non-square blocks can only
            // keep their dimensions under a 180 degree rotation.
            let quarter = if bh == bw { rng.gen_range(1..=3u8) } else { 2 };
            let src = block.clone();
            for y in 0..bh {
                for x in 0..bw {
                    let (sy, sx) = match quarter {
                        1 => (bw - 1 - x, y),
                        2 => (bh - 1 - y, bw - 1 - x),
                        _ => (x, bh - 1 - y),
                    };
                    block[y * bw + x] = src[sy * bw + sx];
                }
            }
        }
        TransformFamily::Scale => {
            let f = rng.gen_range(params.scale_lo..=params.scale_hi);
            for v in block.iter_mut() {
                *v = (*v * f).clamp(0.0, 1.0);
            }
        }
        TransformFamily::Jitter => {
            let off = rng.gen_range(-params.jitter..=params.jitter);
            for v in block.iter_mut() {
                *v = (*v + off).clamp(0.0, 1.0);
            }
        }
        TransformFamily::Noise => {
            let mut pending: Option<f32> = None;
            for v in block.iter_mut() {
                let z = match pending.take() {
                    Some(z) => z,
                    None => {
                        let (z0, z1) = gaussian_pair(rng);
                        pending = Some(z1);
                        z0
                    }
                };
                *v = (*v + params.noise_sigma * z).clamp(0.0, 1.0);
            }
        }
        TransformFamily::DctFilter => {
            dct2d(block, bh, bw, false);
            // Rank coefficients by normalized frequency and zero the highest.
            let mut order: Vec<usize> = (0..bh * bw).collect();
            order.sort_unstable_by(|&a, &b| {
                let ka = (a / bw) as f32 / bh as f32 + (a % bw) as f32 / bw as f32;
                let kb = (b / bw) as f32 / bh as f32 + (b % bw) as f32 / bw as f32;
                kb.partial_cmp(&ka).unwrap().then(a.cmp(&b))
            });
            let drop = math::floorf(bh as f32 * bw as f32 * params.dct_drop_frac) as usize;
            for &i in order.iter().take(drop) {
                block[i] = 0.0;
            }
            dct2d(block, bh, bw, true);
            for v in block.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        TransformFamily::Resize => {
            let (hh, hw) = ((bh / 2).max(1), (bw / 2).max(1));
            let down = resize_raster(block, bh, bw, 1, hh, hw);
            let up = resize_raster(&down, hh, hw, 1, bh, bw);
            block.copy_from_slice(&up);
            for v in block.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        TransformFamily::Dropout => {
            for v in block.iter_mut() {
                if rng.gen::<f32>() < params.dropout_p {
                    *v = 0.0;
                }
            }
        }
    }
}

/// Applies one independently drawn transformation family to every block of
/// the `s x s` partition. Deterministic for a fixed seed; output keeps the
/// input's dimensions and stays in `[0, 1]`.
pub fn sia_transform(
    x: &GrayscaleImage,
    split: usize,
    seed: u64,
    params: &SiaParams,
) -> Result<GrayscaleImage> {
    let grid = BlockGrid::new(x.height(), x.width(), split)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = x.data().to_vec();
    let w = x.width();
    for block in grid.blocks() {
        let (bh, bw) = (block.y1 - block.y0, block.x1 - block.x0);
        let mut buf = Vec::with_capacity(bh * bw);
        for y in block.y0..block.y1 {
            buf.extend_from_slice(&data[y * w + block.x0..y * w + block.x1]);
        }
        let family = TransformFamily::ALL[rng.gen_range(0..TransformFamily::ALL.len())];
        apply_family(&mut buf, bh, bw, family, &mut rng, params);
        for (i, y) in (block.y0..block.y1).enumerate() {
            data[y * w + block.x0..y * w + block.x1]
                .copy_from_slice(&buf[i * bw..(i + 1) * bw]);
        }
    }
    GrayscaleImage::from_raw_clamped(x.height(), x.width(), data)
}

/// `n` independent draws of [`sia_transform`] with per-copy seeds
/// `seed + copy index`, so parallel and serial generation agree.
pub fn transform_batch(
    x: &GrayscaleImage,
    n: usize,
    split: usize,
    seed: u64,
    params: &SiaParams,
) -> Result<Vec<GrayscaleImage>> {
    if n == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1"));
    }
    (0..n)
        .map(|i| sia_transform(x, split, seed.wrapping_add(i as u64), params))
        .collect()
}

/// Samples a crop (area fraction and aspect ratio from `params`) and
/// bilinearly resizes it back to the original dimensions.
pub fn random_resized_crop(
    x: &GrayscaleImage,
    seed: u64,
    params: &RrcParams,
) -> GrayscaleImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (x.height(), x.width());
    let area = (h * w) as f32 * rng.gen_range(params.scale_lo..=params.scale_hi);
    let aspect = rng.gen_range(params.aspect_lo..=params.aspect_hi);
    let cw = (math::roundf(math::sqrtf(area * aspect)) as usize).clamp(1, w);
    let ch = (math::roundf(math::sqrtf(area / aspect)) as usize).clamp(1, h);
    let y0 = rng.gen_range(0..=h - ch);
    let x0 = rng.gen_range(0..=w - cw);

    let mut crop = Vec::with_capacity(ch * cw);
    for y in y0..y0 + ch {
        crop.extend_from_slice(&x.data()[y * w + x0..y * w + x0 + cw]);
    }
    let out = resize_raster(&crop, ch, cw, 1, h, w);
    GrayscaleImage::from_raw_clamped(h, w, out).expect("dimensions preserved")
}
