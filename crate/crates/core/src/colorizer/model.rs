//! The three toy colorization architectures and their exact reverse-mode
//! gradients.
//!
//! All three map a 1-channel grayscale tensor to a 3-channel RGB tensor of
//! the same spatial size, squashed into `[0, 1]` by a final sigmoid. They are
//! deliberately distinct in inductive bias (plain conv stack, dilated convs,
//! attention bottleneck) so black-box transfer cells are meaningful at toy
//! scale.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{
    attention_backward, attention_forward, avgpool2_backward, avgpool2_forward, concat_channels,
    conv2d_backward, conv2d_forward, relu_backward, relu_forward, sigmoid_backward,
    sigmoid_forward, split_channels_grad, upsample2_backward, upsample2_forward, AttentionCache,
    AttentionWeights,
};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::image::{GrayscaleImage, RgbImage};
use crate::math::Scalar;
use crate::metrics;

/// Minimum input side accepted by the models.
pub const MIN_INPUT_SIDE: usize = 32;

// Channel widths, sized for single-core attack loops.
const SMALL_C: [usize; 3] = [8, 16, 8];
const DILATED_C: [usize; 4] = [8, 12, 12, 8];
const UNET_ENC: [usize; 3] = [8, 16, 24];
const UNET_DEC: [usize; 2] = [12, 8];
const UNET_KEY_DIM: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    SmallCnn,
    DilatedCnn,
    AttnUnet,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::SmallCnn,
        Architecture::DilatedCnn,
        Architecture::AttnUnet,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::SmallCnn => "small_cnn",
            Architecture::DilatedCnn => "dilated_cnn",
            Architecture::AttnUnet => "attn_unet",
        }
    }
}

impl core::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower: String = s.chars().map(|c| c.to_ascii_lowercase()).collect();
        match lower.as_str() {
            "small_cnn" => Ok(Architecture::SmallCnn),
            "dilated_cnn" => Ok(Architecture::DilatedCnn),
            "attn_unet" => Ok(Architecture::AttnUnet),
            _ => Err(Error::InvalidArgument(
                "unknown architecture (expected small_cnn, dilated_cnn or attn_unet)",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub w: Vec<T>,
    pub b: Vec<T>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub dilation: usize,
}

impl<T: Scalar> Conv2d<T> {
    fn init(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, dilation: usize) -> Self {
        let fan_in = in_ch * 9;
        let limit = libm::sqrtf(6.0 / fan_in as f32);
        let w = (0..out_ch * in_ch * 9)
            .map(|_| T::from_f32(rng.gen_range(-limit..=limit)))
            .collect();
        Self {
            w,
            b: vec![T::ZERO; out_ch],
            in_ch,
            out_ch,
            dilation,
        }
    }

    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        conv2d_forward(x, &self.w, &self.b, self.out_ch, self.dilation)
    }

    fn backward(&self, x: &Tensor<T>, gout: &Tensor<T>) -> (Tensor<T>, Vec<T>, Vec<T>) {
        conv2d_backward(x, &self.w, self.out_ch, self.dilation, gout)
    }
}

fn init_matrix<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<T> {
    let limit = libm::sqrtf(6.0 / cols as f32);
    (0..rows * cols)
        .map(|_| T::from_f32(rng.gen_range(-limit..=limit)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallCnn<T> {
    convs: [Conv2d<T>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilatedCnn<T> {
    convs: [Conv2d<T>; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttnUnet<T> {
    enc: [Conv2d<T>; 3],
    attn: AttentionWeights<T>,
    dec: [Conv2d<T>; 2],
    out: Conv2d<T>,
}

/// A toy differentiable colorization model `G`.
#[derive(Debug, Clone, PartialEq)]
pub enum Colorizer<T> {
    Small(SmallCnn<T>),
    Dilated(DilatedCnn<T>),
    Unet(AttnUnet<T>),
}

pub struct SmallCache<T> {
    x: Tensor<T>,
    acts: Vec<Tensor<T>>, // relu outputs, then the sigmoid output last
}

pub struct UnetCache<T> {
    x: Tensor<T>,
    x1: Tensor<T>,
    p1: Tensor<T>,
    x2: Tensor<T>,
    p2: Tensor<T>,
    x3: Tensor<T>,
    attn: AttentionCache<T>,
    a_out: Tensor<T>,
    cat2: Tensor<T>,
    d2: Tensor<T>,
    cat1: Tensor<T>,
    d1: Tensor<T>,
    y: Tensor<T>,
}

pub enum Cache<T> {
    Stack(SmallCache<T>),
    Unet(UnetCache<T>),
}

impl<T: Scalar> Colorizer<T> {
    /// Fresh model with seeded initialization; `new(arch, seed)` is
    /// bit-reproducible.
    pub fn new(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match arch {
            Architecture::SmallCnn => {
                let dims = [1, SMALL_C[0], SMALL_C[1], SMALL_C[2], 3];
                let convs = core::array::from_fn(|i| {
                    Conv2d::init(&mut rng, dims[i], dims[i + 1], 1)
                });
                Colorizer::Small(SmallCnn { convs })
            }
            Architecture::DilatedCnn => {
                let dims = [1, DILATED_C[0], DILATED_C[1], DILATED_C[2], DILATED_C[3], 3];
                let dils = [1, 2, 4, 2, 1];
                let convs = core::array::from_fn(|i| {
                    Conv2d::init(&mut rng, dims[i], dims[i + 1], dils[i])
                });
                Colorizer::Dilated(DilatedCnn { convs })
            }
            Architecture::AttnUnet => {
                let enc_dims = [1, UNET_ENC[0], UNET_ENC[1], UNET_ENC[2]];
                let enc = core::array::from_fn(|i| {
                    Conv2d::init(&mut rng, enc_dims[i], enc_dims[i + 1], 1)
                });
                let c = UNET_ENC[2];
                let attn = AttentionWeights {
                    wq: init_matrix(&mut rng, UNET_KEY_DIM, c),
                    bq: vec![T::ZERO; UNET_KEY_DIM],
                    wk: init_matrix(&mut rng, UNET_KEY_DIM, c),
                    bk: vec![T::ZERO; UNET_KEY_DIM],
                    wv: init_matrix(&mut rng, c, c),
                    bv: vec![T::ZERO; c],
                    wo: init_matrix(&mut rng, c, c),
                    bo: vec![T::ZERO; c],
                    channels: c,
                    key_dim: UNET_KEY_DIM,
                };
                let dec = [
                    Conv2d::init(&mut rng, UNET_ENC[2] + UNET_ENC[1], UNET_DEC[0], 1),
                    Conv2d::init(&mut rng, UNET_DEC[0] + UNET_ENC[0], UNET_DEC[1], 1),
                ];
                let out = Conv2d::init(&mut rng, UNET_DEC[1], 3, 1);
                Colorizer::Unet(AttnUnet {
                    enc,
                    attn,
                    dec,
                    out,
                })
            }
        }
    }

    pub fn arch(&self) -> Architecture {
        match self {
            Colorizer::Small(_) => Architecture::SmallCnn,
            Colorizer::Dilated(_) => Architecture::DilatedCnn,
            Colorizer::Unet(_) => Architecture::AttnUnet,
        }
    }

    pub fn forward_with_cache(&self, x: &Tensor<T>) -> (Cache<T>, Tensor<T>) {
        match self {
            Colorizer::Small(m) => stack_forward(&m.convs, x),
            Colorizer::Dilated(m) => stack_forward(&m.convs, x),
            Colorizer::Unet(m) => unet_forward(m, x),
        }
    }

    pub fn forward_tensor(&self, x: &Tensor<T>) -> Tensor<T> {
        self.forward_with_cache(x).1
    }

    /// Gradients of a scalar loss with respect to the input and, in parameter
    /// order, every weight slice.
    pub fn backward(&self, cache: &Cache<T>, gout: &Tensor<T>) -> (Tensor<T>, Vec<Vec<T>>) {
        match (self, cache) {
            (Colorizer::Small(m), Cache::Stack(c)) => stack_backward(&m.convs, c, gout),
            (Colorizer::Dilated(m), Cache::Stack(c)) => stack_backward(&m.convs, c, gout),
            (Colorizer::Unet(m), Cache::Unet(c)) => unet_backward(m, c, gout),
            _ => panic!("cache does not match architecture"),
        }
    }

    /// Parameter slices in the canonical (serialization and gradient) order.
    pub fn param_slices(&self) -> Vec<&[T]> {
        match self {
            Colorizer::Small(m) => conv_params(&m.convs),
            Colorizer::Dilated(m) => conv_params(&m.convs),
            Colorizer::Unet(m) => {
                let mut p = conv_params(&m.enc);
                p.extend_from_slice(&[
                    m.attn.wq.as_slice(),
                    m.attn.bq.as_slice(),
                    m.attn.wk.as_slice(),
                    m.attn.bk.as_slice(),
                    m.attn.wv.as_slice(),
                    m.attn.bv.as_slice(),
                    m.attn.wo.as_slice(),
                    m.attn.bo.as_slice(),
                ]);
                p.extend(conv_params(&m.dec));
                p.extend(conv_params(core::slice::from_ref(&m.out)));
                p
            }
        }
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Colorizer::Small(m) => conv_params_mut(&mut m.convs),
            Colorizer::Dilated(m) => conv_params_mut(&mut m.convs),
            Colorizer::Unet(m) => {
                let mut p = conv_params_mut(&mut m.enc);
                p.push(m.attn.wq.as_mut_slice());
                p.push(m.attn.bq.as_mut_slice());
                p.push(m.attn.wk.as_mut_slice());
                p.push(m.attn.bk.as_mut_slice());
                p.push(m.attn.wv.as_mut_slice());
                p.push(m.attn.bv.as_mut_slice());
                p.push(m.attn.wo.as_mut_slice());
                p.push(m.attn.bo.as_mut_slice());
                p.extend(conv_params_mut(&mut m.dec));
                p.extend(conv_params_mut(core::slice::from_mut(&mut m.out)));
                p
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}

fn conv_params<T: Scalar>(convs: &[Conv2d<T>]) -> Vec<&[T]> {
    let mut p = Vec::with_capacity(convs.len() * 2);
    for c in convs {
        p.push(c.w.as_slice());
        p.push(c.b.as_slice());
    }
    p
}

fn conv_params_mut<T: Scalar>(convs: &mut [Conv2d<T>]) -> Vec<&mut [T]> {
    let mut p = Vec::with_capacity(convs.len() * 2);
    for c in convs {
        p.push(c.w.as_mut_slice());
        p.push(c.b.as_mut_slice());
    }
    p
}

fn stack_forward<T: Scalar>(convs: &[Conv2d<T>], x: &Tensor<T>) -> (Cache<T>, Tensor<T>) {
    let mut acts = Vec::with_capacity(convs.len());
    let mut cur = x.clone();
    for (i, conv) in convs.iter().enumerate() {
        let z = conv.forward(&cur);
        cur = if i + 1 == convs.len() {
            sigmoid_forward(&z)
        } else {
            relu_forward(&z)
        };
        acts.push(cur.clone());
    }
    (
        Cache::Stack(SmallCache {
            x: x.clone(),
            acts,
        }),
        cur,
    )
}

fn stack_backward<T: Scalar>(
    convs: &[Conv2d<T>],
    cache: &SmallCache<T>,
    gout: &Tensor<T>,
) -> (Tensor<T>, Vec<Vec<T>>) {
    let n = convs.len();
    let mut grads: Vec<Vec<T>> = vec![Vec::new(); n * 2];
    let mut g = sigmoid_backward(&cache.acts[n - 1], gout);
    for i in (0..n).rev() {
        let input = if i == 0 { &cache.x } else { &cache.acts[i - 1] };
        let (gin, gw, gb) = convs[i].backward(input, &g);
        grads[2 * i] = gw;
        grads[2 * i + 1] = gb;
        g = if i == 0 {
            gin
        } else {
            relu_backward(&cache.acts[i - 1], &gin)
        };
    }
    (g, grads)
}

fn unet_forward<T: Scalar>(m: &AttnUnet<T>, x: &Tensor<T>) -> (Cache<T>, Tensor<T>) {
    let x1 = relu_forward(&m.enc[0].forward(x));
    let p1 = avgpool2_forward(&x1);
    let x2 = relu_forward(&m.enc[1].forward(&p1));
    let p2 = avgpool2_forward(&x2);
    let x3 = relu_forward(&m.enc[2].forward(&p2));
    let (attn, a_out) = attention_forward(&x3, &m.attn);
    let u2 = upsample2_forward(&a_out, x2.height, x2.width);
    let cat2 = concat_channels(&u2, &x2);
    let d2 = relu_forward(&m.dec[0].forward(&cat2));
    let u1 = upsample2_forward(&d2, x1.height, x1.width);
    let cat1 = concat_channels(&u1, &x1);
    let d1 = relu_forward(&m.dec[1].forward(&cat1));
    let y = sigmoid_forward(&m.out.forward(&d1));
    let out = y.clone();
    (
        Cache::Unet(UnetCache {
            x: x.clone(),
            x1,
            p1,
            x2,
            p2,
            x3,
            attn,
            a_out,
            cat2,
            d2,
            cat1,
            d1,
            y,
        }),
        out,
    )
}

fn unet_backward<T: Scalar>(
    m: &AttnUnet<T>,
    c: &UnetCache<T>,
    gout: &Tensor<T>,
) -> (Tensor<T>, Vec<Vec<T>>) {
    let g = sigmoid_backward(&c.y, gout);
    let (g_d1, gw_out, gb_out) = m.out.backward(&c.d1, &g);
    let g = relu_backward(&c.d1, &g_d1);
    let (g_cat1, gw_dec1, gb_dec1) = m.dec[1].backward(&c.cat1, &g);
    let (g_u1, g_x1a) = split_channels_grad(&g_cat1, UNET_DEC[0]);
    let g_d2_up = upsample2_backward(c.d2.height, c.d2.width, &g_u1);
    let g = relu_backward(&c.d2, &g_d2_up);
    let (g_cat2, gw_dec0, gb_dec0) = m.dec[0].backward(&c.cat2, &g);
    let (g_u2, g_x2a) = split_channels_grad(&g_cat2, UNET_ENC[2]);
    let g_a = upsample2_backward(c.a_out.height, c.a_out.width, &g_u2);
    let (g_x3, attn_grads) = attention_backward(&c.x3, &m.attn, &c.attn, &g_a);
    let g = relu_backward(&c.x3, &g_x3);
    let (g_p2, gw_enc2, gb_enc2) = m.enc[2].backward(&c.p2, &g);
    let mut g_x2 = avgpool2_backward(c.x2.height, c.x2.width, &g_p2);
    for (a, b) in g_x2.data.iter_mut().zip(&g_x2a.data) {
        *a += *b;
    }
    let g = relu_backward(&c.x2, &g_x2);
    let (g_p1, gw_enc1, gb_enc1) = m.enc[1].backward(&c.p1, &g);
    let mut g_x1 = avgpool2_backward(c.x1.height, c.x1.width, &g_p1);
    for (a, b) in g_x1.data.iter_mut().zip(&g_x1a.data) {
        *a += *b;
    }
    let g = relu_backward(&c.x1, &g_x1);
    let (g_x, gw_enc0, gb_enc0) = m.enc[0].backward(&c.x, &g);

    let grads = vec![
        gw_enc0,
        gb_enc0,
        gw_enc1,
        gb_enc1,
        gw_enc2,
        gb_enc2,
        attn_grads.gwq,
        attn_grads.gbq,
        attn_grads.gwk,
        attn_grads.gbk,
        attn_grads.gwv,
        attn_grads.gbv,
        attn_grads.gwo,
        attn_grads.gbo,
        gw_dec0,
        gb_dec0,
        gw_dec1,
        gb_dec1,
        gw_out,
        gb_out,
    ];
    (g_x, grads)
}

/// Exact gradient of the colorfulness loss with respect to each input pixel.
pub struct InputGradient {
    /// `d CF / d x`, row-major, the input's dimensions.
    pub grad: Vec<f32>,
    /// Colorfulness of the model output at `x` (0-255 scale).
    pub cf: f64,
    /// The CF gradient was evaluated at its non-differentiable minimum (both
    /// opponent-channel standard deviations exactly zero); `grad` is zero.
    pub degenerate: bool,
}

impl Colorizer<f32> {
    fn check_input(x: &GrayscaleImage) -> Result<()> {
        if x.height() < MIN_INPUT_SIDE || x.width() < MIN_INPUT_SIDE {
            return Err(Error::InvalidArgument(
                "colorizer input must be at least 32x32",
            ));
        }
        Ok(())
    }

    /// Colorizes a grayscale image. Deterministic; output values in `[0, 1]`
    /// with the input's spatial size.
    pub fn forward(&self, x: &GrayscaleImage) -> Result<RgbImage> {
        Self::check_input(x)?;
        self.forward_tensor(&Tensor::from_gray(x)).to_rgb()
    }

    /// Gradient of `colorfulness(forward(x))` with respect to the input,
    /// by reverse-mode differentiation through the network and the CF
    /// formula.
    pub fn input_gradient(&self, x: &GrayscaleImage) -> Result<InputGradient> {
        Self::check_input(x)?;
        let xt = Tensor::from_gray(x);
        let (cache, y) = self.forward_with_cache(&xt);
        let cf = metrics::colorfulness_grad::<f32>(y.channel(0), y.channel(1), y.channel(2));
        if cf.degenerate {
            return Ok(InputGradient {
                grad: vec![0.0; x.height() * x.width()],
                cf: cf.value,
                degenerate: true,
            });
        }
        let mut gout = Tensor::zeros(3, y.height, y.width);
        gout.channel_mut(0).copy_from_slice(&cf.grad_r);
        gout.channel_mut(1).copy_from_slice(&cf.grad_g);
        gout.channel_mut(2).copy_from_slice(&cf.grad_b);
        let (gin, _) = self.backward(&cache, &gout);
        Ok(InputGradient {
            grad: gin.data,
            cf: cf.value,
            degenerate: false,
        })
    }

    /// `f64` twin with identical weights, for high-precision oracles.
    pub fn to_f64(&self) -> Colorizer<f64> {
        fn conv64(c: &Conv2d<f32>) -> Conv2d<f64> {
            Conv2d {
                w: c.w.iter().map(|&v| v as f64).collect(),
                b: c.b.iter().map(|&v| v as f64).collect(),
                in_ch: c.in_ch,
                out_ch: c.out_ch,
                dilation: c.dilation,
            }
        }
        fn vec64(v: &[f32]) -> Vec<f64> {
            v.iter().map(|&x| x as f64).collect()
        }
        match self {
            Colorizer::Small(m) => Colorizer::Small(SmallCnn {
                convs: core::array::from_fn(|i| conv64(&m.convs[i])),
            }),
            Colorizer::Dilated(m) => Colorizer::Dilated(DilatedCnn {
                convs: core::array::from_fn(|i| conv64(&m.convs[i])),
            }),
            Colorizer::Unet(m) => Colorizer::Unet(AttnUnet {
                enc: core::array::from_fn(|i| conv64(&m.enc[i])),
                attn: AttentionWeights {
                    wq: vec64(&m.attn.wq),
                    bq: vec64(&m.attn.bq),
                    wk: vec64(&m.attn.wk),
                    bk: vec64(&m.attn.bk),
                    wv: vec64(&m.attn.wv),
                    bv: vec64(&m.attn.bv),
                    wo: vec64(&m.attn.wo),
                    bo: vec64(&m.attn.bo),
                    channels: m.attn.channels,
                    key_dim: m.attn.key_dim,
                },
                dec: core::array::from_fn(|i| conv64(&m.dec[i])),
                out: conv64(&m.out),
            }),
        }
    }
}
