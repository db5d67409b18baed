//! Differentiable primitives for the colorizer networks: 3x3 (optionally
//! dilated) convolution, pointwise nonlinearities, 2x average pooling,
//! nearest-neighbor upsampling, channel concatenation and single-head
//! self-attention. Each op has an explicit reverse-mode backward.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::math::Scalar;

/// Same-size 3x3 convolution with zero padding and dilation `dil`.
/// Weight layout: `w[((o * in_ch + i) * 3 + ky) * 3 + kx]`.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &[T],
    b: &[T],
    out_ch: usize,
    dil: usize,
) -> Tensor<T> {
    let (ic, h, wd) = (x.channels, x.height, x.width);
    debug_assert_eq!(w.len(), out_ch * ic * 9);
    let mut out = Tensor::zeros(out_ch, h, wd);
    let d = dil as isize;
    for o in 0..out_ch {
        out.channel_mut(o).fill(b[o]);
    }
    for o in 0..out_ch {
        for i in 0..ic {
            let xin = x.channel(i);
            for ky in 0..3isize {
                let dy = (ky - 1) * d;
                let (y0, y1) = row_range(h, dy);
                for kx in 0..3isize {
                    let dx = (kx - 1) * d;
                    let (x0, x1) = row_range(wd, dx);
                    if y0 >= y1 || x0 >= x1 {
                        continue;
                    }
                    let wv = w[((o * ic + i) * 3 + ky as usize) * 3 + kx as usize];
                    let oc = out.channel_mut(o);
                    for y in y0..y1 {
                        let src = ((y as isize + dy) as usize) * wd;
                        let sx = (x0 as isize + dx) as usize;
                        let dst = y * wd;
                        let (orow, irow) = (
                            &mut oc[dst + x0..dst + x1],
                            &xin[src + sx..src + sx + (x1 - x0)],
                        );
                        for (ov, &iv) in orow.iter_mut().zip(irow) {
                            *ov += wv * iv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &[T],
    out_ch: usize,
    dil: usize,
    gout: &Tensor<T>,
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let (ic, h, wd) = (x.channels, x.height, x.width);
    let d = dil as isize;
    let mut gin = Tensor::zeros(ic, h, wd);
    let mut gw = vec![T::ZERO; w.len()];
    let mut gb = vec![T::ZERO; out_ch];

    for o in 0..out_ch {
        let go = gout.channel(o);
        let mut acc = T::ZERO;
        for &v in go {
            acc += v;
        }
        gb[o] = acc;
        for i in 0..ic {
            let xin = x.channel(i);
            for ky in 0..3isize {
                let dy = (ky - 1) * d;
                let (y0, y1) = row_range(h, dy);
                for kx in 0..3isize {
                    let dx = (kx - 1) * d;
                    let (x0, x1) = row_range(wd, dx);
                    if y0 >= y1 || x0 >= x1 {
                        continue;
                    }
                    let widx = ((o * ic + i) * 3 + ky as usize) * 3 + kx as usize;
                    let wv = w[widx];
                    let gi = gin.channel_mut(i);
                    let mut wacc = T::ZERO;
                    for y in y0..y1 {
                        let src = ((y as isize + dy) as usize) * wd;
                        let sx = (x0 as isize + dx) as usize;
                        let dst = y * wd;
                        let grow = &go[dst + x0..dst + x1];
                        let irow = &xin[src + sx..src + sx + (x1 - x0)];
                        let gi_row = &mut gi[src + sx..src + sx + (x1 - x0)];
                        for k in 0..grow.len() {
                            let g = grow[k];
                            wacc += g * irow[k];
                            gi_row[k] += wv * g;
                        }
                    }
                    gw[widx] += wacc;
                }
            }
        }
    }
    (gin, gw, gb)
}

fn row_range(n: usize, off: isize) -> (usize, usize) {
    // Output positions p with 0 <= p + off < n.
    let lo = if off < 0 { (-off) as usize } else { 0 };
    let hi = if off > 0 {
        n.saturating_sub(off as usize)
    } else {
        n
    };
    (lo.min(n), hi)
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    for v in &mut out.data {
        if *v < T::ZERO {
            *v = T::ZERO;
        }
    }
    out
}

/// Backward through ReLU given the forward *output*.
pub fn relu_backward<T: Scalar>(out: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let mut gin = gout.clone();
    for (g, &o) in gin.data.iter_mut().zip(&out.data) {
        if o <= T::ZERO {
            *g = T::ZERO;
        }
    }
    gin
}

pub fn sigmoid_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    for v in &mut out.data {
        *v = T::ONE / (T::ONE + (-*v).exp());
    }
    out
}

pub fn sigmoid_backward<T: Scalar>(out: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let mut gin = gout.clone();
    for (g, &o) in gin.data.iter_mut().zip(&out.data) {
        *g *= o * (T::ONE - o);
    }
    gin
}

/// 2x average pooling with ceil semantics: odd trailing rows/columns form
/// smaller windows, so any input size is accepted.
pub fn avgpool2_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = (x.channels, x.height, x.width);
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Tensor::zeros(c, oh, ow);
    for ch in 0..c {
        let xin = x.channel(ch);
        let oc = out.channel_mut(ch);
        for oy in 0..oh {
            for ox in 0..ow {
                let y1 = (2 * oy + 2).min(h);
                let x1 = (2 * ox + 2).min(w);
                let mut acc = T::ZERO;
                let mut cnt = 0usize;
                for y in 2 * oy..y1 {
                    for xx in 2 * ox..x1 {
                        acc += xin[y * w + xx];
                        cnt += 1;
                    }
                }
                oc[oy * ow + ox] = acc / T::from_usize(cnt);
            }
        }
    }
    out
}

pub fn avgpool2_backward<T: Scalar>(in_h: usize, in_w: usize, gout: &Tensor<T>) -> Tensor<T> {
    let c = gout.channels;
    let (oh, ow) = (gout.height, gout.width);
    let mut gin = Tensor::zeros(c, in_h, in_w);
    for ch in 0..c {
        let go = gout.channel(ch);
        let gi = gin.channel_mut(ch);
        for oy in 0..oh {
            for ox in 0..ow {
                let y1 = (2 * oy + 2).min(in_h);
                let x1 = (2 * ox + 2).min(in_w);
                let cnt = (y1 - 2 * oy) * (x1 - 2 * ox);
                let g = go[oy * ow + ox] / T::from_usize(cnt);
                for y in 2 * oy..y1 {
                    for xx in 2 * ox..x1 {
                        gi[y * in_w + xx] += g;
                    }
                }
            }
        }
    }
    gin
}

/// Nearest-neighbor upsampling to the given target size (at most 2x per axis,
/// matching the pooling it undoes).
pub fn upsample2_forward<T: Scalar>(x: &Tensor<T>, th: usize, tw: usize) -> Tensor<T> {
    let (c, h, w) = (x.channels, x.height, x.width);
    let mut out = Tensor::zeros(c, th, tw);
    for ch in 0..c {
        let xin = x.channel(ch);
        let oc = out.channel_mut(ch);
        for y in 0..th {
            let sy = (y / 2).min(h - 1);
            for xx in 0..tw {
                let sx = (xx / 2).min(w - 1);
                oc[y * tw + xx] = xin[sy * w + sx];
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Scalar>(in_h: usize, in_w: usize, gout: &Tensor<T>) -> Tensor<T> {
    let c = gout.channels;
    let (th, tw) = (gout.height, gout.width);
    let mut gin = Tensor::zeros(c, in_h, in_w);
    for ch in 0..c {
        let go = gout.channel(ch);
        let gi = gin.channel_mut(ch);
        for y in 0..th {
            let sy = (y / 2).min(in_h - 1);
            for xx in 0..tw {
                let sx = (xx / 2).min(in_w - 1);
                gi[sy * in_w + sx] += go[y * tw + xx];
            }
        }
    }
    gin
}

pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!((a.height, a.width), (b.height, b.width));
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor::from_data(a.channels + b.channels, a.height, a.width, data)
}

pub fn split_channels_grad<T: Scalar>(g: &Tensor<T>, first: usize) -> (Tensor<T>, Tensor<T>) {
    let p = g.plane();
    let ga = Tensor::from_data(first, g.height, g.width, g.data[..first * p].to_vec());
    let gb = Tensor::from_data(
        g.channels - first,
        g.height,
        g.width,
        g.data[first * p..].to_vec(),
    );
    (ga, gb)
}

/// Weights of single-head self-attention over the spatial positions of a
/// CHW tensor. Projections are 1x1 convolutions stored as row-major
/// `rows x cols` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<T> {
    pub wq: Vec<T>,
    pub bq: Vec<T>,
    pub wk: Vec<T>,
    pub bk: Vec<T>,
    pub wv: Vec<T>,
    pub bv: Vec<T>,
    pub wo: Vec<T>,
    pub bo: Vec<T>,
    pub channels: usize,
    pub key_dim: usize,
}

pub struct AttentionCache<T> {
    pub q: Vec<T>,
    pub k: Vec<T>,
    pub v: Vec<T>,
    /// Softmax weights, row-major `[query][key]`.
    pub alpha: Vec<T>,
    pub mixed: Vec<T>,
}

/// Gradients for [`AttentionWeights`] in declaration order.
pub struct AttentionGrads<T> {
    pub gwq: Vec<T>,
    pub gbq: Vec<T>,
    pub gwk: Vec<T>,
    pub gbk: Vec<T>,
    pub gwv: Vec<T>,
    pub gbv: Vec<T>,
    pub gwo: Vec<T>,
    pub gbo: Vec<T>,
}

/// `out[r][l] = sum_c m[r][c] x[c][l] + b[r]` with `x` as `cols x len`.
fn project<T: Scalar>(m: &[T], b: &[T], x: &[T], rows: usize, cols: usize, len: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; rows * len];
    for r in 0..rows {
        let orow = &mut out[r * len..(r + 1) * len];
        orow.fill(b[r]);
        for c in 0..cols {
            let w = m[r * cols + c];
            let xrow = &x[c * len..(c + 1) * len];
            for (o, &xv) in orow.iter_mut().zip(xrow) {
                *o += w * xv;
            }
        }
    }
    out
}

/// Self-attention with a residual connection: `y = x + Wo * attn(x) + bo`.
pub fn attention_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &AttentionWeights<T>,
) -> (AttentionCache<T>, Tensor<T>) {
    let c = w.channels;
    let dk = w.key_dim;
    let len = x.plane();
    debug_assert_eq!(x.channels, c);

    let q = project(&w.wq, &w.bq, &x.data, dk, c, len);
    let k = project(&w.wk, &w.bk, &x.data, dk, c, len);
    let v = project(&w.wv, &w.bv, &x.data, c, c, len);

    let scale = T::ONE / T::from_usize(dk).sqrt();
    let mut alpha = vec![T::ZERO; len * len];
    for lq in 0..len {
        let row = &mut alpha[lq * len..(lq + 1) * len];
        let mut maxv = T::from_f64(f64::NEG_INFINITY);
        for (lk, slot) in row.iter_mut().enumerate() {
            let mut s = T::ZERO;
            for d in 0..dk {
                s += q[d * len + lq] * k[d * len + lk];
            }
            let s = s * scale;
            *slot = s;
            if s > maxv {
                maxv = s;
            }
        }
        let mut sum = T::ZERO;
        for slot in row.iter_mut() {
            *slot = (*slot - maxv).exp();
            sum += *slot;
        }
        for slot in row.iter_mut() {
            *slot = *slot / sum;
        }
    }

    // mixed[c][lq] = sum_k alpha[lq][k] v[c][k]
    let mut mixed = vec![T::ZERO; c * len];
    for ch in 0..c {
        let vrow = &v[ch * len..(ch + 1) * len];
        let mrow = &mut mixed[ch * len..(ch + 1) * len];
        for lq in 0..len {
            let arow = &alpha[lq * len..(lq + 1) * len];
            let mut acc = T::ZERO;
            for (a, vv) in arow.iter().zip(vrow) {
                acc += *a * *vv;
            }
            mrow[lq] = acc;
        }
    }

    let proj = project(&w.wo, &w.bo, &mixed, c, c, len);
    let mut out = x.clone();
    for (o, p) in out.data.iter_mut().zip(&proj) {
        *o += *p;
    }
    (
        AttentionCache {
            q,
            k,
            v,
            alpha,
            mixed,
        },
        out,
    )
}

pub fn attention_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &AttentionWeights<T>,
    cache: &AttentionCache<T>,
    gout: &Tensor<T>,
) -> (Tensor<T>, AttentionGrads<T>) {
    let c = w.channels;
    let dk = w.key_dim;
    let len = x.plane();
    let scale = T::ONE / T::from_usize(dk).sqrt();

    // Through the output projection (residual passes gout straight through).
    let mut gwo = vec![T::ZERO; c * c];
    let mut gbo = vec![T::ZERO; c];
    let mut gmixed = vec![T::ZERO; c * len];
    for r in 0..c {
        let grow = gout.channel(r);
        let mut bacc = T::ZERO;
        for &g in grow {
            bacc += g;
        }
        gbo[r] = bacc;
        for ch in 0..c {
            let mrow = &cache.mixed[ch * len..(ch + 1) * len];
            let mut acc = T::ZERO;
            for (g, m) in grow.iter().zip(mrow) {
                acc += *g * *m;
            }
            gwo[r * c + ch] = acc;
            let wv = w.wo[r * c + ch];
            let gm = &mut gmixed[ch * len..(ch + 1) * len];
            for (gmv, &g) in gm.iter_mut().zip(grow) {
                *gmv += wv * g;
            }
        }
    }

    // Through the mixing: galpha[lq][k] = sum_c gmixed[c][lq] v[c][k];
    // gv[c][k] = sum_q alpha[q][k] gmixed[c][q].
    let mut galpha = vec![T::ZERO; len * len];
    for lq in 0..len {
        let arow = &mut galpha[lq * len..(lq + 1) * len];
        for ch in 0..c {
            let g = gmixed[ch * len + lq];
            let vrow = &cache.v[ch * len..(ch + 1) * len];
            for (a, &vv) in arow.iter_mut().zip(vrow) {
                *a += g * vv;
            }
        }
    }
    let mut gv = vec![T::ZERO; c * len];
    for ch in 0..c {
        let gvrow = &mut gv[ch * len..(ch + 1) * len];
        for lq in 0..len {
            let g = gmixed[ch * len + lq];
            let arow = &cache.alpha[lq * len..(lq + 1) * len];
            for (gvv, &a) in gvrow.iter_mut().zip(arow) {
                *gvv += g * a;
            }
        }
    }

    // Softmax rows.
    let mut gscores = vec![T::ZERO; len * len];
    for lq in 0..len {
        let arow = &cache.alpha[lq * len..(lq + 1) * len];
        let garow = &galpha[lq * len..(lq + 1) * len];
        let mut dot = T::ZERO;
        for (a, g) in arow.iter().zip(garow) {
            dot += *a * *g;
        }
        let srow = &mut gscores[lq * len..(lq + 1) * len];
        for i in 0..len {
            srow[i] = arow[i] * (garow[i] - dot);
        }
    }

    // Scores = scale * Q^T K.
    let mut gq = vec![T::ZERO; dk * len];
    let mut gk = vec![T::ZERO; dk * len];
    for d in 0..dk {
        let qrow = &cache.q[d * len..(d + 1) * len];
        let krow = &cache.k[d * len..(d + 1) * len];
        let gqrow = &mut gq[d * len..(d + 1) * len];
        for lq in 0..len {
            let srow = &gscores[lq * len..(lq + 1) * len];
            let mut acc = T::ZERO;
            for (s, &kv) in srow.iter().zip(krow) {
                acc += *s * kv;
            }
            gqrow[lq] = acc * scale;
        }
        let gkrow = &mut gk[d * len..(d + 1) * len];
        for lq in 0..len {
            let g = qrow[lq] * scale;
            let srow = &gscores[lq * len..(lq + 1) * len];
            for (gkv, &s) in gkrow.iter_mut().zip(srow) {
                *gkv += g * s;
            }
        }
    }

    // Through the three input projections back to x.
    let mut gin = gout.clone(); // residual path
    let mut grads = AttentionGrads {
        gwq: vec![T::ZERO; dk * c],
        gbq: vec![T::ZERO; dk],
        gwk: vec![T::ZERO; dk * c],
        gbk: vec![T::ZERO; dk],
        gwv: vec![T::ZERO; c * c],
        gbv: vec![T::ZERO; c],
        gwo,
        gbo,
    };
    project_backward(&w.wq, &x.data, &gq, dk, c, len, &mut grads.gwq, &mut grads.gbq, &mut gin.data);
    project_backward(&w.wk, &x.data, &gk, dk, c, len, &mut grads.gwk, &mut grads.gbk, &mut gin.data);
    project_backward(&w.wv, &x.data, &gv, c, c, len, &mut grads.gwv, &mut grads.gbv, &mut gin.data);
    (gin, grads)
}

#[allow(clippy::too_many_arguments)]
fn project_backward<T: Scalar>(
    m: &[T],
    x: &[T],
    gout: &[T],
    rows: usize,
    cols: usize,
    len: usize,
    gm: &mut [T],
    gb: &mut [T],
    gx: &mut [T],
) {
    for r in 0..rows {
        let grow = &gout[r * len..(r + 1) * len];
        let mut bacc = T::ZERO;
        for &g in grow {
            bacc += g;
        }
        gb[r] += bacc;
        for c in 0..cols {
            let xrow = &x[c * len..(c + 1) * len];
            let mut acc = T::ZERO;
            for (g, &xv) in grow.iter().zip(xrow) {
                acc += *g * xv;
            }
            gm[r * cols + c] += acc;
            let wv = m[r * cols + c];
            let gxrow = &mut gx[c * len..(c + 1) * len];
            for (gxv, &g) in gxrow.iter_mut().zip(grow) {
                *gxv += wv * g;
            }
        }
    }
}
