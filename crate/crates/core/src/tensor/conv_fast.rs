//! Register-tiled stride-1 convolution kernels for f32.
//!
//! The input is copied into an explicitly zero-padded buffer so the hot
//! loops carry no border branches; output channels are processed four at
//! a time against 16-column tiles so each input row load feeds eight
//! fused multiply-adds. Per output element the accumulation order is
//! channel, kernel row, kernel column — the same order as the generic
//! path — so the tiling changes scheduling, not the reduction order.

use super::{Scalar, Shape, Tensor};
use rayon::prelude::*;
use std::any::TypeId;

const OCB: usize = 4; // output channels per tile
const XT: usize = 16; // output columns per tile

fn is_f32<T: 'static>() -> bool {
    TypeId::of::<T>() == TypeId::of::<f32>()
}

/// Caller must have verified `T == f32` via `is_f32`.
fn as_f32<T>(s: &[T]) -> &[f32] {
    unsafe { std::slice::from_raw_parts(s.as_ptr() as *const f32, s.len()) }
}

fn vec_into<T>(v: Vec<f32>) -> Vec<T> {
    let mut v = std::mem::ManuallyDrop::new(v);
    unsafe { Vec::from_raw_parts(v.as_mut_ptr() as *mut T, v.len(), v.capacity()) }
}

fn have_fma() -> bool {
    use std::sync::OnceLock;
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| {
        #[cfg(target_arch = "x86_64")]
        {
            std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        }
        #[cfg(not(target_arch = "x86_64"))]
        {
            false
        }
    })
}

/// Zero-padded copy of all planes: (n, c, h + 2p, w + 2p).
fn pad_planes(data: &[f32], n: usize, c: usize, h: usize, w: usize, p: usize) -> Vec<f32> {
    let (ph, pw) = (h + 2 * p, w + 2 * p);
    let mut out = vec![0f32; n * c * ph * pw];
    for plane in 0..n * c {
        let src = &data[plane * h * w..(plane + 1) * h * w];
        let dst = &mut out[plane * ph * pw..(plane + 1) * ph * pw];
        for y in 0..h {
            dst[(y + p) * pw + p..(y + p) * pw + p + w].copy_from_slice(&src[y * w..(y + 1) * w]);
        }
    }
    out
}

/// Weights regrouped as (block, in_c, ky, kx, OCB); missing tail channels
/// are zero-filled.
fn pack_weights(w: &[f32], oc: usize, ic: usize, k: usize) -> Vec<f32> {
    let nblk = oc.div_ceil(OCB);
    let mut wp = vec![0f32; nblk * ic * k * k * OCB];
    for o in 0..oc {
        let (blk, j) = (o / OCB, o % OCB);
        for ci in 0..ic {
            for ky in 0..k {
                for kx in 0..k {
                    wp[(((blk * ic + ci) * k + ky) * k + kx) * OCB + j] =
                        w[((o * ic + ci) * k + ky) * k + kx];
                }
            }
        }
    }
    wp
}

macro_rules! define_block_kernel {
    ($name:ident $(, #[$attr:meta])?) => {
        /// One output-channel block over one padded image: writes OCB
        /// planes of (oh x ow) into `out4`.
        $(#[$attr])?
        unsafe fn $name(
            padded: &[f32],
            ic: usize,
            ph: usize,
            pw: usize,
            wblk: &[f32],
            k: usize,
            bias4: [f32; OCB],
            out4: &mut [f32],
            oh: usize,
            ow: usize,
        ) {
            let plane = oh * ow;
            for oy in 0..oh {
                let mut ox = 0;
                while ox + XT <= ow {
                    let mut acc = [[0f32; XT]; OCB];
                    for (j, a) in acc.iter_mut().enumerate() {
                        for v in a.iter_mut() {
                            *v = bias4[j];
                        }
                    }
                    for ci in 0..ic {
                        let pplane = &padded[ci * ph * pw..(ci + 1) * ph * pw];
                        for ky in 0..k {
                            let row = &pplane[(oy + ky) * pw + ox..(oy + ky) * pw + ox + XT + k - 1];
                            for kx in 0..k {
                                let w4 = &wblk[(((ci * k) + ky) * k + kx) * OCB..][..OCB];
                                let r = &row[kx..kx + XT];
                                for j in 0..OCB {
                                    let wj = w4[j];
                                    for l in 0..XT {
                                        acc[j][l] = r[l].mul_add(wj, acc[j][l]);
                                    }
                                }
                            }
                        }
                    }
                    for j in 0..OCB {
                        out4[j * plane + oy * ow + ox..j * plane + oy * ow + ox + XT]
                            .copy_from_slice(&acc[j]);
                    }
                    ox += XT;
                }
                // narrow remainder: one column at a time, same accumulation order
                while ox < ow {
                    let mut acc = bias4;
                    for ci in 0..ic {
                        let pplane = &padded[ci * ph * pw..(ci + 1) * ph * pw];
                        for ky in 0..k {
                            let row = &pplane[(oy + ky) * pw + ox..(oy + ky) * pw + ox + k];
                            for kx in 0..k {
                                let w4 = &wblk[(((ci * k) + ky) * k + kx) * OCB..][..OCB];
                                for j in 0..OCB {
                                    acc[j] = row[kx].mul_add(w4[j], acc[j]);
                                }
                            }
                        }
                    }
                    for j in 0..OCB {
                        out4[j * plane + oy * ow + ox] = acc[j];
                    }
                    ox += 1;
                }
            }
        }
    };
}

define_block_kernel!(block_kernel_portable);
#[cfg(target_arch = "x86_64")]
define_block_kernel!(block_kernel_avx2, #[target_feature(enable = "avx2,fma")]);

#[allow(clippy::too_many_arguments)]
fn run_block_kernel(
    padded: &[f32],
    ic: usize,
    ph: usize,
    pw: usize,
    wblk: &[f32],
    k: usize,
    bias4: [f32; OCB],
    out4: &mut [f32],
    oh: usize,
    ow: usize,
) {
    #[cfg(target_arch = "x86_64")]
    if have_fma() {
        // Safety: feature presence checked at runtime.
        unsafe { block_kernel_avx2(padded, ic, ph, pw, wblk, k, bias4, out4, oh, ow) };
        return;
    }
    unsafe { block_kernel_portable(padded, ic, ph, pw, wblk, k, bias4, out4, oh, ow) };
}

/// Stride-1 convolution fast path. Returns `None` when `T` is not f32 so
/// the caller falls back to the generic kernel.
#[allow(clippy::too_many_arguments)]
pub(super) fn try_conv2d<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
    padding: usize,
    oh: usize,
    ow: usize,
) -> Option<Tensor<T>> {
    if !is_f32::<T>() {
        return None;
    }
    let is = input.shape();
    let ws = weights.shape();
    let out = conv2d_f32(
        as_f32(input.data()),
        is.n,
        is.c,
        is.h,
        is.w,
        as_f32(weights.data()),
        ws.n,
        ws.h,
        as_f32(bias),
        padding,
        oh,
        ow,
    );
    Some(Tensor::new(Shape::new(is.n, ws.n, oh, ow), vec_into(out)).expect("shape computed here"))
}

#[allow(clippy::too_many_arguments)]
fn conv2d_f32(
    input: &[f32],
    n: usize,
    ic: usize,
    h: usize,
    w: usize,
    weights: &[f32],
    oc: usize,
    k: usize,
    bias: &[f32],
    padding: usize,
    oh: usize,
    ow: usize,
) -> Vec<f32> {
    let (ph, pw) = (h + 2 * padding, w + 2 * padding);
    let padded = pad_planes(input, n, ic, h, w, padding);
    let wblk = pack_weights(weights, oc, ic, k);
    let nblk = oc.div_ceil(OCB);
    let plane = oh * ow;

    let mut out = vec![0f32; n * oc * plane];
    out.par_chunks_mut(oc * plane).enumerate().for_each(|(ni, out_n)| {
        let padded_n = &padded[ni * ic * ph * pw..(ni + 1) * ic * ph * pw];
        let mut scratch = vec![0f32; OCB * plane];
        for blk in 0..nblk {
            let obase = blk * OCB;
            let live = OCB.min(oc - obase);
            let mut bias4 = [0f32; OCB];
            bias4[..live].copy_from_slice(&bias[obase..obase + live]);
            let wb = &wblk[blk * ic * k * k * OCB..(blk + 1) * ic * k * k * OCB];
            if live == OCB {
                run_block_kernel(
                    padded_n,
                    ic,
                    ph,
                    pw,
                    wb,
                    k,
                    bias4,
                    &mut out_n[obase * plane..(obase + OCB) * plane],
                    oh,
                    ow,
                );
            } else {
                run_block_kernel(padded_n, ic, ph, pw, wb, k, bias4, &mut scratch, oh, ow);
                out_n[obase * plane..(obase + live) * plane]
                    .copy_from_slice(&scratch[..live * plane]);
            }
        }
    });
    out
}

/// Stride-1 input gradient as a convolution of the padded output gradient
/// with channel-transposed, spatially flipped weights.
pub(super) fn try_grad_input<T: Scalar>(
    weights: &Tensor<T>,
    padding: usize,
    grad_out: &Tensor<T>,
    in_shape: Shape,
) -> Option<Tensor<T>> {
    if !is_f32::<T>() {
        return None;
    }
    let ws = weights.shape();
    let (oc, ic, k) = (ws.n, ws.c, ws.h);
    if padding + 1 > k {
        return None; // flipped-kernel padding would go negative
    }
    let w = as_f32(weights.data());
    let mut flipped = vec![0f32; w.len()];
    for o in 0..oc {
        for i in 0..ic {
            for ky in 0..k {
                for kx in 0..k {
                    flipped[((i * oc + o) * k + (k - 1 - ky)) * k + (k - 1 - kx)] =
                        w[((o * ic + i) * k + ky) * k + kx];
                }
            }
        }
    }
    let gs = grad_out.shape();
    let zero_bias = vec![0f32; ic];
    let gi = conv2d_f32(
        as_f32(grad_out.data()),
        gs.n,
        oc,
        gs.h,
        gs.w,
        &flipped,
        ic,
        k,
        &zero_bias,
        k - 1 - padding,
        in_shape.h,
        in_shape.w,
    );
    Some(Tensor::new(in_shape, vec_into(gi)).expect("shape computed here"))
}

macro_rules! define_wgrad_kernel {
    ($name:ident $(, #[$attr:meta])?) => {
        /// Accumulates the k*k weight gradients for one (out_c, in_c)
        /// pair across every image and output row.
        $(#[$attr])?
        unsafe fn $name(
            gout: &[f32],      // n * oc * oh * ow
            padded: &[f32],    // n * ic * ph * pw
            n: usize,
            oc: usize,
            ic: usize,
            o: usize,
            i: usize,
            k: usize,
            ph: usize,
            pw: usize,
            oh: usize,
            ow: usize,
            out: &mut [f32], // k * k
        ) {
            const L: usize = 8;
            let chunks = ow / L;
            let mut accv = vec![[0f32; L]; k * k];
            let mut acct = vec![0f32; k * k];
            for ni in 0..n {
                let gplane = &gout[(ni * oc + o) * oh * ow..(ni * oc + o + 1) * oh * ow];
                let pplane = &padded[(ni * ic + i) * ph * pw..(ni * ic + i + 1) * ph * pw];
                for oy in 0..oh {
                    let grow = &gplane[oy * ow..(oy + 1) * ow];
                    for ky in 0..k {
                        let prow = &pplane[(oy + ky) * pw..(oy + ky) * pw + ow + k - 1];
                        for kx in 0..k {
                            let acc = &mut accv[ky * k + kx];
                            let p = &prow[kx..kx + ow];
                            for ch in 0..chunks {
                                let g8 = &grow[ch * L..(ch + 1) * L];
                                let p8 = &p[ch * L..(ch + 1) * L];
                                for l in 0..L {
                                    acc[l] = g8[l].mul_add(p8[l], acc[l]);
                                }
                            }
                            let mut t = acct[ky * k + kx];
                            for x in chunks * L..ow {
                                t = grow[x].mul_add(p[x], t);
                            }
                            acct[ky * k + kx] = t;
                        }
                    }
                }
            }
            for idx in 0..k * k {
                let a = &accv[idx];
                out[idx] = ((a[0] + a[4]) + (a[1] + a[5]))
                    + ((a[2] + a[6]) + (a[3] + a[7]))
                    + acct[idx];
            }
        }
    };
}

define_wgrad_kernel!(wgrad_kernel_portable);
#[cfg(target_arch = "x86_64")]
define_wgrad_kernel!(wgrad_kernel_avx2, #[target_feature(enable = "avx2,fma")]);

/// Stride-1 weight gradient fast path.
pub(super) fn try_grad_weights<T: Scalar>(
    input: &Tensor<T>,
    weights_shape: Shape,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Option<Tensor<T>> {
    if !is_f32::<T>() {
        return None;
    }
    let is = input.shape();
    let gs = grad_out.shape();
    let (oc, ic, k) = (weights_shape.n, weights_shape.c, weights_shape.h);
    let (ph, pw) = (is.h + 2 * padding, is.w + 2 * padding);
    let padded = pad_planes(as_f32(input.data()), is.n, ic, is.h, is.w, padding);
    let gout = as_f32(grad_out.data());

    let mut gw = vec![0f32; oc * ic * k * k];
    gw.par_chunks_mut(k * k).enumerate().for_each(|(pair, block)| {
        let (o, i) = (pair / ic, pair % ic);
        #[cfg(target_arch = "x86_64")]
        if have_fma() {
            // Safety: feature presence checked at runtime.
            unsafe {
                wgrad_kernel_avx2(gout, &padded, is.n, oc, ic, o, i, k, ph, pw, gs.h, gs.w, block)
            };
            return;
        }
        unsafe {
            wgrad_kernel_portable(gout, &padded, is.n, oc, ic, o, i, k, ph, pw, gs.h, gs.w, block)
        };
    });
    Some(Tensor::new(weights_shape, vec_into(gw)).expect("shape computed here"))
}

#[cfg(test)]
mod tests {
    use super::super::ops;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(shape: Shape, rng: &mut ChaCha8Rng) -> (Tensor<f32>, Tensor<f64>) {
        let data32: Vec<f32> = (0..shape.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data64: Vec<f64> = data32.iter().map(|&v| v as f64).collect();
        (
            Tensor::new(shape, data32).unwrap(),
            Tensor::new(shape, data64).unwrap(),
        )
    }

    /// The f32 tiled kernels must agree with the generic f64 path on
    /// identical data; shapes cover uneven tiles and partial oc blocks.
    #[test]
    fn fast_paths_match_generic_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(n, ic, oc, hw, k, p) in &[
            (2usize, 3usize, 5usize, 11usize, 3usize, 1usize),
            (1, 4, 4, 16, 3, 1),
            (1, 2, 1, 9, 3, 1),
            (1, 9, 7, 48, 7, 0),
            (2, 1, 8, 8, 1, 0),
        ] {
            let (in32, in64) = pair(Shape::new(n, ic, hw, hw), &mut rng);
            let (w32, w64) = pair(Shape::new(oc, ic, k, k), &mut rng);
            let bias32: Vec<f32> = (0..oc).map(|_| rng.random_range(-0.5..0.5)).collect();
            let bias64: Vec<f64> = bias32.iter().map(|&v| v as f64).collect();

            let out32 = ops::conv2d_raw(&in32, &w32, &bias32, 1, p).unwrap();
            let out64 = ops::conv2d_raw(&in64, &w64, &bias64, 1, p).unwrap();
            assert_eq!(out32.shape(), out64.shape());
            for (a, b) in out32.data().iter().zip(out64.data()) {
                assert!((*a as f64 - b).abs() < 1e-4, "fwd {n}x{ic}->{oc} k{k}: {a} vs {b}");
            }

            let (g32, g64) = pair(out32.shape(), &mut rng);
            let gr32 = ops::conv2d_backward(&in32, &w32, 1, p, &g32, true);
            let gr64 = ops::conv2d_backward(&in64, &w64, 1, p, &g64, true);
            for (a, b) in gr32.input.unwrap().data().iter().zip(gr64.input.unwrap().data()) {
                assert!((*a as f64 - b).abs() < 1e-3, "grad_in: {a} vs {b}");
            }
            for (a, b) in gr32.weights.data().iter().zip(gr64.weights.data()) {
                assert!((*a as f64 - b).abs() < 1e-3, "grad_w: {a} vs {b}");
            }
            for (a, b) in gr32.bias.iter().zip(&gr64.bias) {
                assert!((*a as f64 - b).abs() < 1e-3, "grad_b: {a} vs {b}");
            }
        }
    }
}
