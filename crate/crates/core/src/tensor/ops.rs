//! Forward kernels. Every kernel computes each output element in a fixed
//! summation order, so results are bit-identical for any thread count.

use rayon::prelude::*;

use super::{shape_err, Element, Tensor, TensorError};

/// Planes smaller than this are computed on the calling thread.
const PAR_MIN_WORK: usize = 1 << 14;

pub fn add<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    a.zip_map(b, "add", |x, y| x + y)
}

pub fn sub<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    a.zip_map(b, "sub", |x, y| x - y)
}

pub fn mul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    a.zip_map(b, "mul", |x, y| x * y)
}

pub fn scale<T: Element>(a: &Tensor<T>, c: f64) -> Tensor<T> {
    let c = T::lit(c);
    a.map(|x| x * c)
}

pub fn add_scalar<T: Element>(a: &Tensor<T>, c: f64) -> Tensor<T> {
    let c = T::lit(c);
    a.map(|x| x + c)
}

pub fn powf<T: Element>(a: &Tensor<T>, p: f64) -> Tensor<T> {
    let p = T::lit(p);
    a.map(|x| x.powf(p))
}

pub fn sigmoid<T: Element>(a: &Tensor<T>) -> Tensor<T> {
    a.map(sigmoid_scalar)
}

#[inline]
pub fn sigmoid_scalar<T: Element>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// ln(1 + e^x), evaluated without overflow.
#[inline]
pub fn softplus_scalar<T: Element>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

pub fn softplus<T: Element>(a: &Tensor<T>) -> Tensor<T> {
    a.map(softplus_scalar)
}

pub fn leaky_relu<T: Element>(x: &Tensor<T>, alpha: f64) -> Tensor<T> {
    let alpha = T::lit(alpha);
    x.map(|v| if v >= T::zero() { v } else { alpha * v })
}

/// `g` masked by the leaky-relu slope at `x`.
pub fn leaky_relu_grad<T: Element>(
    g: &Tensor<T>,
    x: &Tensor<T>,
    alpha: f64,
) -> Result<Tensor<T>, TensorError> {
    let alpha = T::lit(alpha);
    g.zip_map(x, "leaky_relu_grad", |gv, xv| {
        if xv >= T::zero() {
            gv
        } else {
            alpha * gv
        }
    })
}

/// `c[m×n] += a[m×k] · b[k×n]`, all row-major.
fn gemm_acc<T: Element>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = *cv + av * bv;
            }
        }
    }
}

pub fn matmul<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    if a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0] {
        return Err(shape_err("matmul", &a.shape, &b.shape));
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = vec![T::zero(); m * n];
    if m * k * n >= PAR_MIN_WORK && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            gemm_acc(1, k, n, &a.data[i * k..(i + 1) * k], &b.data, row);
        });
    } else {
        gemm_acc(m, k, n, &a.data, &b.data, &mut out);
    }
    Ok(Tensor::from_parts(vec![m, n], out))
}

pub fn transpose2d<T: Element>(a: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    if a.rank() != 2 {
        return Err(TensorError::Contract(format!(
            "transpose2d expects rank 2, got {:?}",
            a.shape
        )));
    }
    let (m, n) = (a.shape[0], a.shape[1]);
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data[i * n + j];
        }
    }
    Ok(Tensor::from_parts(vec![n, m], out))
}

/// Fully connected layer: `y = x·W + b`.
pub fn dense<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    if b.rank() != 1 || w.rank() != 2 || b.shape[0] != w.shape[1] {
        return Err(shape_err("dense bias", &w.shape, &b.shape));
    }
    let mut y = matmul(x, w)?;
    let m = b.shape[0];
    for row in y.data.chunks_mut(m) {
        for (v, &bv) in row.iter_mut().zip(&b.data) {
            *v = *v + bv;
        }
    }
    Ok(y)
}

fn check_kernel<T: Element>(x: &Tensor<T>, k: &Tensor<T>) -> Result<usize, TensorError> {
    if x.rank() != 4 || k.rank() != 4 {
        return Err(shape_err("conv2d", &x.shape, &k.shape));
    }
    let ks = k.shape[2];
    if k.shape[3] != ks || ks.is_multiple_of(2) {
        return Err(TensorError::InvalidShape {
            shape: k.shape.clone(),
            reason: "kernel must be square with odd size".into(),
        });
    }
    if k.shape[1] != x.shape[1] {
        return Err(shape_err("conv2d channels", &x.shape, &k.shape));
    }
    Ok(ks)
}

/// Column matrix `[c·ks·ks, h·w]` for one sample, zero padded by `ks/2`.
fn im2col<T: Element>(img: &[T], c: usize, h: usize, w: usize, ks: usize, cols: &mut [T]) {
    let pad = ks / 2;
    let hw = h * w;
    for ci in 0..c {
        let plane = &img[ci * hw..(ci + 1) * hw];
        for a in 0..ks {
            for b in 0..ks {
                let row = ((ci * ks + a) * ks + b) * hw;
                let dst = &mut cols[row..row + hw];
                for y in 0..h {
                    let sy = y as isize + a as isize - pad as isize;
                    let drow = &mut dst[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        drow.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let srow = &plane[sy as usize * w..(sy as usize + 1) * w];
                    for (xo, d) in drow.iter_mut().enumerate() {
                        let sx = xo as isize + b as isize - pad as isize;
                        *d = if sx < 0 || sx >= w as isize {
                            T::zero()
                        } else {
                            srow[sx as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Same-size cross-correlation, stride 1, zero padding `ks/2`, no bias.
pub fn conv2d_nobias<T: Element>(x: &Tensor<T>, k: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let ks = check_kernel(x, k)?;
    let (n, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let co = k.shape[0];
    let hw = h * w;
    let kk = c * ks * ks;
    let mut out = vec![T::zero(); n * co * hw];
    let run = |(s, dst): (usize, &mut [T])| {
        let img = &x.data[s * c * hw..(s + 1) * c * hw];
        if ks == 1 {
            gemm_acc(co, c, hw, &k.data, img, dst);
        } else {
            let mut cols = vec![T::zero(); kk * hw];
            im2col(img, c, h, w, ks, &mut cols);
            gemm_acc(co, kk, hw, &k.data, &cols, dst);
        }
    };
    if n > 1 && co * kk * hw >= PAR_MIN_WORK {
        out.par_chunks_mut(co * hw).enumerate().for_each(run);
    } else {
        out.chunks_mut(co * hw).enumerate().for_each(run);
    }
    Ok(Tensor::from_parts(vec![n, co, h, w], out))
}

/// Convolution with per-output-channel bias.
pub fn conv2d<T: Element>(
    x: &Tensor<T>,
    k: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    if bias.rank() != 1 || bias.shape[0] != k.shape[0] {
        return Err(shape_err("conv2d bias", &k.shape, &bias.shape));
    }
    let mut y = conv2d_nobias(x, k)?;
    let hw = y.shape[2] * y.shape[3];
    for (i, plane) in y.data.chunks_mut(hw).enumerate() {
        let b = bias.data[i % bias.shape[0]];
        plane.iter_mut().for_each(|v| *v = *v + b);
    }
    Ok(y)
}

/// Gradient of `conv2d_nobias(x, k)` with respect to `k`, given the output
/// gradient `g`: `dk[o,c,a,b] = Σ g[n,o,y,x]·x[n,c,y+a-p,x+b-p]`.
pub fn conv2d_weight_grad<T: Element>(
    x: &Tensor<T>,
    g: &Tensor<T>,
    ks: usize,
) -> Result<Tensor<T>, TensorError> {
    if x.rank() != 4
        || g.rank() != 4
        || x.shape[0] != g.shape[0]
        || x.shape[2..] != g.shape[2..]
        || ks.is_multiple_of(2)
    {
        return Err(shape_err("conv2d_weight_grad", &x.shape, &g.shape));
    }
    let (n, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let co = g.shape[1];
    let hw = h * w;
    let kk = c * ks * ks;
    let mut out = vec![T::zero(); co * kk];
    let mut cols = vec![T::zero(); kk * hw];
    let mut cols_t = vec![T::zero(); hw * kk];
    for s in 0..n {
        let img = &x.data[s * c * hw..(s + 1) * c * hw];
        let gs = &g.data[s * co * hw..(s + 1) * co * hw];
        let src: &[T] = if ks == 1 {
            img
        } else {
            im2col(img, c, h, w, ks, &mut cols);
            &cols
        };
        for r in 0..kk {
            for j in 0..hw {
                cols_t[j * kk + r] = src[r * hw + j];
            }
        }
        gemm_acc(co, hw, kk, gs, &cols_t, &mut out);
    }
    Ok(Tensor::from_parts(vec![co, c, ks, ks], out))
}

/// `k[o,c,a,b] -> k'[c,o,ks-1-a,ks-1-b]`; the kernel of the input-gradient convolution.
pub fn flip_transpose_kernel<T: Element>(k: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    if k.rank() != 4 || k.shape[2] != k.shape[3] {
        return Err(TensorError::InvalidShape {
            shape: k.shape.clone(),
            reason: "expected square [o,c,k,k] kernel".into(),
        });
    }
    let (o, c, ks) = (k.shape[0], k.shape[1], k.shape[2]);
    let mut out = vec![T::zero(); k.len()];
    for oi in 0..o {
        for ci in 0..c {
            for a in 0..ks {
                for b in 0..ks {
                    let src = ((oi * c + ci) * ks + a) * ks + b;
                    let dst = ((ci * o + oi) * ks + (ks - 1 - a)) * ks + (ks - 1 - b);
                    out[dst] = k.data[src];
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![c, o, ks, ks], out))
}

fn check_image(x: &Tensor<impl Element>, op: &'static str) -> Result<(), TensorError> {
    if x.rank() != 4 {
        return Err(TensorError::Contract(format!(
            "{op} expects [n,c,h,w], got {:?}",
            x.shape
        )));
    }
    Ok(())
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2x<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    check_image(x, "upsample2x")?;
    let (n, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); n * c * h2 * w2];
    for (src, dst) in x.data.chunks(h * w).zip(out.chunks_mut(h2 * w2)) {
        for y in 0..h2 {
            let srow = &src[(y / 2) * w..(y / 2 + 1) * w];
            let drow = &mut dst[y * w2..(y + 1) * w2];
            for (xo, d) in drow.iter_mut().enumerate() {
                *d = srow[xo / 2];
            }
        }
    }
    Ok(Tensor::from_parts(vec![n, c, h2, w2], out))
}

/// Sum over non-overlapping 2×2 blocks; the adjoint of [`upsample2x`].
pub fn sum_pool2x<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    check_image(x, "sum_pool2x")?;
    let (n, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(TensorError::InvalidShape {
            shape: x.shape.clone(),
            reason: "spatial extents must be even to pool".into(),
        });
    }
    let (h2, w2) = (h / 2, w / 2);
    let mut out = vec![T::zero(); n * c * h2 * w2];
    for (src, dst) in x.data.chunks(h * w).zip(out.chunks_mut(h2 * w2)) {
        for y in 0..h2 {
            for xo in 0..w2 {
                let i = 2 * y * w + 2 * xo;
                dst[y * w2 + xo] = src[i] + src[i + 1] + src[i + w] + src[i + w + 1];
            }
        }
    }
    Ok(Tensor::from_parts(vec![n, c, h2, w2], out))
}

pub fn avg_pool2x<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    Ok(scale(&sum_pool2x(x)?, 0.25))
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

fn check_broadcast(small: &[usize], big: &[usize], op: &'static str) -> Result<(), TensorError> {
    if small.len() != big.len()
        || small
            .iter()
            .zip(big)
            .any(|(&s, &b)| s != b && s != 1)
    {
        return Err(shape_err(op, small, big));
    }
    Ok(())
}

/// Walks every index of `big`, calling `f(big_offset, small_offset)` where the
/// small offset ignores broadcast (extent-1) axes.
fn walk_broadcast(small: &[usize], big: &[usize], mut f: impl FnMut(usize, usize)) {
    let rank = big.len();
    let sstr: Vec<usize> = strides(small)
        .into_iter()
        .zip(small)
        .map(|(st, &e)| if e == 1 { 0 } else { st })
        .collect();
    let inner = big[rank - 1];
    let inner_stride = sstr[rank - 1];
    let outer: usize = big[..rank - 1].iter().product();
    let mut idx = vec![0usize; rank - 1];
    let mut big_off = 0;
    for _ in 0..outer {
        let base: usize = idx.iter().zip(&sstr).map(|(i, s)| i * s).sum();
        for j in 0..inner {
            f(big_off + j, base + j * inner_stride);
        }
        big_off += inner;
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            if idx[d] < big[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Replicates `x` along its extent-1 axes to `shape` (same rank).
pub fn broadcast_to<T: Element>(x: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>, TensorError> {
    check_broadcast(&x.shape, shape, "broadcast_to")?;
    if x.shape == shape {
        return Ok(x.clone());
    }
    let numel: usize = shape.iter().product();
    let mut out = vec![T::zero(); numel];
    walk_broadcast(&x.shape, shape, |b, s| out[b] = x.data[s]);
    Ok(Tensor::from_parts(shape.to_vec(), out))
}

/// Sums `x` down to `shape` (same rank, extent-1 axes are reduced); adjoint of [`broadcast_to`].
pub fn sum_to<T: Element>(x: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>, TensorError> {
    check_broadcast(shape, &x.shape, "sum_to")?;
    if x.shape == shape {
        return Ok(x.clone());
    }
    let numel: usize = shape.iter().product();
    let mut out = vec![T::zero(); numel];
    walk_broadcast(shape, &x.shape, |b, s| out[s] = out[s] + x.data[b]);
    Ok(Tensor::from_parts(shape.to_vec(), out))
}
