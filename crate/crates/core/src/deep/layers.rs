//! Forward and backward passes for the network layers. Every backward
//! consumes the cache produced by the matching forward.

use super::tensor::{gemm, Real, Tensor4};
use crate::error::{Error, Result};

/// Geometry shared by convolution forward and backward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.pad, w + 2 * self.pad);
        if self.stride == 0 || self.kernel == 0 || hp < self.kernel || wp < self.kernel {
            return Err(Error::invalid(format!(
                "convolution {}x{} stride {} pad {} does not fit a {h}x{w} input",
                self.kernel, self.kernel, self.stride, self.pad
            )));
        }
        Ok(((hp - self.kernel) / self.stride + 1, (wp - self.kernel) / self.stride + 1))
    }

    pub fn weight_len(&self) -> usize {
        self.filters * self.in_channels * self.kernel * self.kernel
    }
}

pub struct ConvCache<T> {
    col: Vec<T>,
    in_dims: [usize; 4],
    out_hw: (usize, usize),
}

/// Batched im2col: rows are `(c, ki, kj)`, columns are `(b, oh, ow)`.
fn im2col<T: Real>(x: &Tensor4<T>, g: &ConvGeom, oh: usize, ow: usize) -> Vec<T> {
    let [nb, c, h, w] = x.dims;
    let k = g.kernel;
    let ncols = nb * oh * ow;
    let mut col = vec![T::zero(); c * k * k * ncols];
    for ch in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let dst = &mut col[row * ncols..(row + 1) * ncols];
                for b in 0..nb {
                    let plane = &x.data[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                    for oy in 0..oh {
                        let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                        let base = (b * oh + oy) * ow;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..ow {
                            let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[base + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    col
}

fn col2im<T: Real>(col: &[T], dims: [usize; 4], g: &ConvGeom, oh: usize, ow: usize) -> Tensor4<T> {
    let [nb, c, h, w] = dims;
    let k = g.kernel;
    let ncols = nb * oh * ow;
    let mut out = Tensor4::zeros(dims);
    for ch in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let src = &col[row * ncols..(row + 1) * ncols];
                for b in 0..nb {
                    let plane = &mut out.data[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                    for oy in 0..oh {
                        let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = (b * oh + oy) * ow;
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..ow {
                            let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += src[base + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Cross-correlation. `weight` is `(filters, in_channels, k, k)`.
pub fn conv2d_forward<T: Real>(x: &Tensor4<T>, weight: &[T], bias: &[T], g: &ConvGeom) -> Result<(Tensor4<T>, ConvCache<T>)> {
    let [nb, c, h, w] = x.dims;
    if c != g.in_channels {
        return Err(Error::shape("conv2d_forward", format!("{c} input channels"), format!("{} expected", g.in_channels)));
    }
    if weight.len() != g.weight_len() || bias.len() != g.filters {
        return Err(Error::shape(
            "conv2d_forward",
            format!("weight {} bias {}", weight.len(), bias.len()),
            format!("weight {} bias {}", g.weight_len(), g.filters),
        ));
    }
    let (oh, ow) = g.output_hw(h, w)?;
    let col = im2col(x, g, oh, ow);
    let ckk = c * g.kernel * g.kernel;
    let ncols = nb * oh * ow;
    let mut tmp = vec![T::zero(); g.filters * ncols];
    gemm(false, false, g.filters, ckk, ncols, weight, &col, T::zero(), &mut tmp);
    let plane = oh * ow;
    let mut out = Tensor4::zeros([nb, g.filters, oh, ow]);
    for f in 0..g.filters {
        let src = &tmp[f * ncols..(f + 1) * ncols];
        for b in 0..nb {
            let dst = &mut out.data[(b * g.filters + f) * plane..(b * g.filters + f + 1) * plane];
            for (d, &s) in dst.iter_mut().zip(&src[b * plane..(b + 1) * plane]) {
                *d = s + bias[f];
            }
        }
    }
    Ok((out, ConvCache { col, in_dims: x.dims, out_hw: (oh, ow) }))
}

pub struct ConvGrads<T> {
    pub input: Tensor4<T>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

pub fn conv2d_backward<T: Real>(dout: &Tensor4<T>, weight: &[T], cache: &ConvCache<T>, g: &ConvGeom) -> Result<ConvGrads<T>> {
    let nb = cache.in_dims[0];
    let (oh, ow) = cache.out_hw;
    if dout.dims != [nb, g.filters, oh, ow] {
        return Err(Error::shape("conv2d_backward", format!("{:?}", dout.dims), format!("{:?}", [nb, g.filters, oh, ow])));
    }
    let plane = oh * ow;
    let ncols = nb * plane;
    let mut d = vec![T::zero(); g.filters * ncols];
    let mut bias = vec![T::zero(); g.filters];
    for f in 0..g.filters {
        let dst = &mut d[f * ncols..(f + 1) * ncols];
        for b in 0..nb {
            let src = &dout.data[(b * g.filters + f) * plane..(b * g.filters + f + 1) * plane];
            dst[b * plane..(b + 1) * plane].copy_from_slice(src);
        }
        bias[f] = dst.iter().copied().sum();
    }
    let ckk = g.in_channels * g.kernel * g.kernel;
    let mut dw = vec![T::zero(); g.filters * ckk];
    gemm(false, true, g.filters, ncols, ckk, &d, &cache.col, T::zero(), &mut dw);
    let mut dcol = vec![T::zero(); ckk * ncols];
    gemm(true, false, ckk, g.filters, ncols, weight, &d, T::zero(), &mut dcol);
    let input = col2im(&dcol, cache.in_dims, g, oh, ow);
    Ok(ConvGrads { input, weight: dw, bias })
}

pub struct PoolCache {
    argmax: Vec<u32>,
    in_dims: [usize; 4],
}

impl PoolCache {
    /// Flat input index of each output's maximum.
    pub fn argmax(&self) -> &[u32] {
        &self.argmax
    }
}

/// Max pooling over `size x size` windows. Trailing rows or columns that do
/// not fill a window are dropped. Ties go to the first maximum in scan order.
pub fn maxpool_forward<T: Real>(x: &Tensor4<T>, size: usize, stride: usize) -> Result<(Tensor4<T>, PoolCache)> {
    let [nb, c, h, w] = x.dims;
    if size == 0 || stride == 0 || h < size || w < size {
        return Err(Error::invalid(format!("pooling {size}x{size} stride {stride} does not fit a {h}x{w} input")));
    }
    let (oh, ow) = ((h - size) / stride + 1, (w - size) / stride + 1);
    let mut out = Tensor4::zeros([nb, c, oh, ow]);
    let mut argmax = vec![0u32; out.data.len()];
    for p in 0..nb * c {
        let plane = &x.data[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = oy * stride * w + ox * stride;
                for dy in 0..size {
                    for dx in 0..size {
                        let i = (oy * stride + dy) * w + ox * stride + dx;
                        if plane[i] > plane[best] {
                            best = i;
                        }
                    }
                }
                let o = (p * oh + oy) * ow + ox;
                out.data[o] = plane[best];
                argmax[o] = (p * h * w + best) as u32;
            }
        }
    }
    Ok((out, PoolCache { argmax, in_dims: x.dims }))
}

pub fn maxpool_backward<T: Real>(dout: &Tensor4<T>, cache: &PoolCache) -> Result<Tensor4<T>> {
    if dout.data.len() != cache.argmax.len() {
        return Err(Error::shape("maxpool_backward", format!("{:?}", dout.dims), format!("{} outputs", cache.argmax.len())));
    }
    let mut dx = Tensor4::zeros(cache.in_dims);
    for (&g, &i) in dout.data.iter().zip(&cache.argmax) {
        dx.data[i as usize] += g;
    }
    Ok(dx)
}

pub fn relu_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        dims: x.dims,
        data: x.data.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect(),
    }
}

/// `output` is the forward result; the gradient passes where it is positive.
pub fn relu_backward<T: Real>(dout: &Tensor4<T>, output: &Tensor4<T>) -> Result<Tensor4<T>> {
    same_dims("relu_backward", dout, output)?;
    Ok(Tensor4 {
        dims: dout.dims,
        data: dout
            .data
            .iter()
            .zip(&output.data)
            .map(|(&g, &y)| if y > T::zero() { g } else { T::zero() })
            .collect(),
    })
}

/// Fully connected: `y = x · Wᵀ + b`, with `weight` stored `(units, inputs)`.
/// The input is flattened per batch item.
pub fn fc_forward<T: Real>(x: &Tensor4<T>, weight: &[T], bias: &[T], units: usize) -> Result<Tensor4<T>> {
    let (nb, d) = (x.batch(), x.item_len());
    if weight.len() != units * d || bias.len() != units {
        return Err(Error::shape(
            "fc_forward",
            format!("weight {} bias {}", weight.len(), bias.len()),
            format!("{units}x{d} and {units}"),
        ));
    }
    let mut out = Tensor4::zeros([nb, units, 1, 1]);
    for row in out.data.chunks_exact_mut(units) {
        row.copy_from_slice(bias);
    }
    gemm(false, true, nb, d, units, &x.data, weight, T::one(), &mut out.data);
    Ok(out)
}

pub struct FcGrads<T> {
    pub input: Tensor4<T>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

pub fn fc_backward<T: Real>(dout: &Tensor4<T>, input: &Tensor4<T>, weight: &[T], units: usize) -> Result<FcGrads<T>> {
    let (nb, d) = (input.batch(), input.item_len());
    if dout.dims != [nb, units, 1, 1] || weight.len() != units * d {
        return Err(Error::shape("fc_backward", format!("{:?}", dout.dims), format!("{:?}", [nb, units, 1, 1])));
    }
    let mut dw = vec![T::zero(); units * d];
    gemm(true, false, units, nb, d, &dout.data, &input.data, T::zero(), &mut dw);
    let mut db = vec![T::zero(); units];
    for row in dout.data.chunks_exact(units) {
        for (a, &g) in db.iter_mut().zip(row) {
            *a += g;
        }
    }
    let mut dx = Tensor4::zeros(input.dims);
    gemm(false, false, nb, units, d, &dout.data, weight, T::zero(), &mut dx.data);
    Ok(FcGrads { input: dx, weight: dw, bias: db })
}

/// Logistic function clamped to the open interval `(0, 1)`, so saturated
/// units never report exactly 0 or 1.
pub fn sigmoid<T: Real>(v: T) -> T {
    let lo = T::min_positive_value();
    let hi = T::one() - T::epsilon() / T::of(2.0);
    (T::one() / (T::one() + (-v).exp())).max(lo).min(hi)
}

pub fn sigmoid_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        dims: x.dims,
        data: x.data.iter().map(|&v| sigmoid(v)).collect(),
    }
}

pub fn sigmoid_backward<T: Real>(dout: &Tensor4<T>, output: &Tensor4<T>) -> Result<Tensor4<T>> {
    same_dims("sigmoid_backward", dout, output)?;
    Ok(Tensor4 {
        dims: dout.dims,
        data: dout.data.iter().zip(&output.data).map(|(&g, &y)| g * y * (T::one() - y)).collect(),
    })
}

/// Mean cross-entropy of softmax(logits) against `labels`, and the gradient
/// `(p - onehot) / batch` with respect to the logits.
pub fn softmax_xent<T: Real>(logits: &Tensor4<T>, labels: &[u8]) -> Result<(T, Tensor4<T>, Vec<usize>)> {
    let (nb, k) = (logits.batch(), logits.item_len());
    if labels.len() != nb {
        return Err(Error::shape("softmax_xent", format!("{nb} logits rows"), format!("{} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| usize::from(l) >= k) {
        return Err(Error::invalid(format!("label {bad} outside 0..{k}")));
    }
    let scale = T::one() / T::of(nb as f64);
    let mut grad = Tensor4::zeros(logits.dims);
    let mut loss = 0.0f64;
    let mut predicted = Vec::with_capacity(nb);
    for (b, &label) in labels.iter().enumerate() {
        let row = logits.item(b);
        let mut arg = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[arg] {
                arg = j;
            }
        }
        predicted.push(arg);
        let mx = row[arg];
        let z: T = row.iter().map(|&v| (v - mx).exp()).sum();
        let y = usize::from(label);
        loss += (z.ln() - (row[y] - mx)).f64();
        let g = &mut grad.data[b * k..(b + 1) * k];
        for (j, gj) in g.iter_mut().enumerate() {
            let p = (row[j] - mx).exp() / z;
            let onehot = if j == y { T::one() } else { T::zero() };
            *gj = (p - onehot) * scale;
        }
    }
    Ok((T::of(loss / nb.max(1) as f64), grad, predicted))
}

fn same_dims<T>(op: &'static str, a: &Tensor4<T>, b: &Tensor4<T>) -> Result<()> {
    if a.dims != b.dims {
        return Err(Error::shape(op, format!("{:?}", a.dims), format!("{:?}", b.dims)));
    }
    Ok(())
}
