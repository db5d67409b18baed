//! Scalar quality measures: Hasler–Süsstrunk colorfulness (the attack loss
//! and the primary effectiveness metric), PSNR and SSIM.
//!
//! Colorfulness is computed on the 0–255 scale so values are comparable with
//! the literature; PSNR/SSIM use the internal `[0, 1]` scale with a dynamic
//! range of 1.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{GrayscaleImage, RgbImage};
use crate::math::{self, Scalar};

/// Opponent-channel statistics of an RGB raster on the 0–255 scale.
/// `rg = R - G`, `yb = (R + G)/2 - B`; standard deviations are population
/// (divide by pixel count).
struct CfStats {
    n: f64,
    mu_rg: f64,
    mu_yb: f64,
    var_rg: f64,
    var_yb: f64,
}

fn cf_stats(pixels: impl Iterator<Item = (f64, f64, f64)> + Clone, n: usize) -> CfStats {
    let nf = n as f64;
    let mut sum_rg = 0.0;
    let mut sum_yb = 0.0;
    for (r, g, b) in pixels.clone() {
        sum_rg += r - g;
        sum_yb += 0.5 * (r + g) - b;
    }
    let mu_rg = sum_rg / nf;
    let mu_yb = sum_yb / nf;
    let mut var_rg = 0.0;
    let mut var_yb = 0.0;
    for (r, g, b) in pixels {
        let drg = (r - g) - mu_rg;
        let dyb = (0.5 * (r + g) - b) - mu_yb;
        var_rg += drg * drg;
        var_yb += dyb * dyb;
    }
    CfStats {
        n: nf,
        mu_rg,
        mu_yb,
        var_rg: var_rg / nf,
        var_yb: var_yb / nf,
    }
}

fn cf_value(s: &CfStats) -> f64 {
    libm::sqrt(s.var_rg + s.var_yb) + 0.3 * libm::sqrt(s.mu_rg * s.mu_rg + s.mu_yb * s.mu_yb)
}

/// Hasler–Süsstrunk colorfulness. Exactly zero for pure-gray images
/// (`R = G` and `(R + G)/2 = B` everywhere).
pub fn colorfulness(img: &RgbImage) -> f64 {
    let px = img.data().chunks_exact(3).map(|p| {
        (
            p[0] as f64 * 255.0,
            p[1] as f64 * 255.0,
            p[2] as f64 * 255.0,
        )
    });
    let n = img.height() * img.width();
    cf_value(&cf_stats(px, n))
}

/// Colorfulness and its exact gradient with respect to `[0, 1]`-scale channel
/// values (planar `r`, `g`, `b` slices of equal length).
pub struct CfGrad<T> {
    pub value: f64,
    pub grad_r: Vec<T>,
    pub grad_g: Vec<T>,
    pub grad_b: Vec<T>,
    /// Both opponent-channel standard deviations were exactly zero; the
    /// square-root term is non-differentiable there and its gradient
    /// contribution is taken as zero.
    pub degenerate: bool,
}

pub fn colorfulness_grad<T: Scalar>(r: &[T], g: &[T], b: &[T]) -> CfGrad<T> {
    assert_eq!(r.len(), g.len());
    assert_eq!(g.len(), b.len());
    let n = r.len();
    let px = (0..n).map(|i| {
        (
            r[i].to_f64() * 255.0,
            g[i].to_f64() * 255.0,
            b[i].to_f64() * 255.0,
        )
    });
    let s = cf_stats(px.clone(), n);
    let value = cf_value(&s);

    let sigma = libm::sqrt(s.var_rg + s.var_yb);
    let mu_norm = libm::sqrt(s.mu_rg * s.mu_rg + s.mu_yb * s.mu_yb);
    let degenerate = sigma == 0.0;

    // d value / d mu terms; zero where the respective sqrt is flat-degenerate.
    let (mu_coef_rg, mu_coef_yb) = if mu_norm > 0.0 {
        (
            0.3 * s.mu_rg / (s.n * mu_norm),
            0.3 * s.mu_yb / (s.n * mu_norm),
        )
    } else {
        (0.0, 0.0)
    };

    let mut grad_r = Vec::with_capacity(n);
    let mut grad_g = Vec::with_capacity(n);
    let mut grad_b = Vec::with_capacity(n);
    for (i, (rv, gv, bv)) in px.enumerate() {
        let _ = i;
        let rg = rv - gv;
        let yb = 0.5 * (rv + gv) - bv;
        let (sig_rg, sig_yb) = if sigma > 0.0 {
            (
                (rg - s.mu_rg) / (s.n * sigma),
                (yb - s.mu_yb) / (s.n * sigma),
            )
        } else {
            (0.0, 0.0)
        };
        let d_rg = sig_rg + mu_coef_rg;
        let d_yb = sig_yb + mu_coef_yb;
        // Chain rule through rg/yb and the 255x scaling of [0,1] pixels.
        grad_r.push(T::from_f64(255.0 * (d_rg + 0.5 * d_yb)));
        grad_g.push(T::from_f64(255.0 * (-d_rg + 0.5 * d_yb)));
        grad_b.push(T::from_f64(255.0 * -d_yb));
    }

    CfGrad {
        value,
        grad_r,
        grad_g,
        grad_b,
        degenerate,
    }
}

fn psnr_slices(a: &[f32], b: &[f32]) -> f64 {
    let mse = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * math::log10(1.0 / mse)
    }
}

/// PSNR in dB with `MAX = 1`. Identical images yield `f64::INFINITY`.
pub fn psnr_gray(a: &GrayscaleImage, b: &GrayscaleImage) -> Result<f64> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::DimensionMismatch {
            expected: (a.height(), a.width()),
            got: (b.height(), b.width()),
        });
    }
    Ok(psnr_slices(a.data(), b.data()))
}

pub fn psnr_rgb(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::DimensionMismatch {
            expected: (a.height(), a.width()),
            got: (b.height(), b.width()),
        });
    }
    Ok(psnr_slices(a.data(), b.data()))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (k, wk) in w.iter_mut().enumerate() {
        let d = k as f64 - c;
        *wk = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
        sum += *wk;
    }
    for wk in w.iter_mut() {
        *wk /= sum;
    }
    w
}

/// Mean local SSIM over all fully-interior 11x11 Gaussian windows
/// (sigma = 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1). Result in [-1, 1];
/// exactly 1 for identical images.
pub fn ssim(a: &GrayscaleImage, b: &GrayscaleImage) -> Result<f64> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::DimensionMismatch {
            expected: (a.height(), a.width()),
            got: (b.height(), b.width()),
        });
    }
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidArgument(
            "ssim needs images at least 11x11 for the Gaussian window",
        ));
    }
    let win = ssim_window();
    let half = SSIM_WINDOW / 2;
    let c1 = (SSIM_K1 * SSIM_K1) as f64;
    let c2 = (SSIM_K2 * SSIM_K2) as f64;
    let (ad, bd) = (a.data(), b.data());

    let mut total = 0.0;
    let mut count = 0usize;
    for cy in half..h - half {
        for cx in half..w - half {
            let mut mu_x = 0.0;
            let mut mu_y = 0.0;
            let mut xx = 0.0;
            let mut yy = 0.0;
            let mut xy = 0.0;
            for ky in 0..SSIM_WINDOW {
                let row = (cy + ky - half) * w + cx - half;
                for kx in 0..SSIM_WINDOW {
                    let wgt = win[ky] * win[kx];
                    let xv = ad[row + kx] as f64;
                    let yv = bd[row + kx] as f64;
                    mu_x += wgt * xv;
                    mu_y += wgt * yv;
                    xx += wgt * xv * xv;
                    yy += wgt * yv * yv;
                    xy += wgt * xv * yv;
                }
            }
            let var_x = xx - mu_x * mu_x;
            let var_y = yy - mu_y * mu_y;
            let cov = xy - mu_x * mu_y;
            let num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
            let den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}
