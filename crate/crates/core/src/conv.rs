//! Same-padded, optionally dilated and masked 2-D convolution.
//!
//! Both passes lower to GEMM through an im2col buffer that holds only the
//! *unmasked* taps. Masked taps therefore never touch the input at all, which
//! makes blind-spot exclusion exact in floating point rather than merely
//! "multiplied by zero".

use rand::Rng;
use rayon::prelude::*;

use crate::error::{mismatch, Error, Result};
use crate::mask::{KernelMask, Offset};
use crate::tensor::{Shape4, Tensor4};

/// Weights of one convolution layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    /// (out_channels, in_channels, k, k)
    pub weight: Tensor4,
    pub bias: Vec<f64>,
    pub dilation: usize,
    pub mask: Option<KernelMask>,
}

/// Gradients matching a [`ConvParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub weight: Tensor4,
    pub bias: Vec<f64>,
}

impl ConvGrads {
    pub fn zeros_like(p: &ConvParams) -> Self {
        Self {
            weight: Tensor4::zeros(p.weight.shape()),
            bias: vec![0.0; p.bias.len()],
        }
    }
}

impl ConvParams {
    /// Zero-initialized layer.
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        k: usize,
        dilation: usize,
        mask: Option<KernelMask>,
    ) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd, got {k}"
            )));
        }
        if dilation == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidArgument(
                "dilation and channel counts must be >= 1".into(),
            ));
        }
        if let Some(m) = &mask {
            if m.k() != k {
                return Err(mismatch("ConvParams::new mask", k, m.k()));
            }
        }
        Ok(Self {
            weight: Tensor4::zeros(Shape4::new(out_channels, in_channels, k, k)),
            bias: vec![0.0; out_channels],
            dilation,
            mask,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.channels()
    }

    pub fn out_channels(&self) -> usize {
        self.weight.batch()
    }

    pub fn k(&self) -> usize {
        self.weight.height()
    }

    /// Stored scalars, masked positions included.
    pub fn num_params(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }

    /// Taps that participate in the convolution, row-major.
    pub fn active_taps(&self) -> Vec<Offset> {
        match &self.mask {
            Some(m) => m.unmasked(),
            None => {
                let r = (self.k() as i32 - 1) / 2;
                (-r..=r)
                    .flat_map(|a| (-r..=r).map(move |b| (a, b)))
                    .collect()
            }
        }
    }

    fn tap_index(&self, (a, b): Offset) -> usize {
        let r = (self.k() as i32 - 1) / 2;
        ((a + r) as usize) * self.k() + (b + r) as usize
    }

    /// Zeroes every weight sitting on a masked tap.
    pub fn apply_mask(&mut self) {
        let Some(mask) = &self.mask else { return };
        let kk = self.k() * self.k();
        let idx: Vec<usize> = mask
            .masked()
            .iter()
            .map(|&o| self.tap_index(o))
            .collect();
        for chunk in self.weight.data_mut().chunks_mut(kk) {
            for &i in &idx {
                chunk[i] = 0.0;
            }
        }
    }

    /// Kaiming-uniform over the effective fan-in (unmasked taps only); bias zero.
    pub fn kaiming_init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let fan_in = (self.in_channels() * self.active_taps().len()).max(1);
        let bound = (6.0 / fan_in as f64).sqrt();
        for w in self.weight.data_mut() {
            *w = rng.random_range(-bound..bound);
        }
        self.bias.iter_mut().for_each(|b| *b = 0.0);
        self.apply_mask();
    }

    /// Strictly positive weights averaging to one over the fan-in, and small
    /// positive biases. Non-negative inputs then keep every ReLU active.
    pub fn positive_init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let fan_in = (self.in_channels() * self.active_taps().len()).max(1) as f64;
        for w in self.weight.data_mut() {
            *w = rng.random_range(0.5..1.5) / fan_in;
        }
        for b in &mut self.bias {
            *b = rng.random_range(0.01..0.1);
        }
        self.apply_mask();
    }

    /// Weight matrix restricted to active taps: (out, in * taps), column
    /// index `i * taps + t`.
    fn packed_weight(&self, taps: &[Offset]) -> Vec<f64> {
        let (oc, ic, kk) = (self.out_channels(), self.in_channels(), self.k() * self.k());
        let nt = taps.len();
        let tap_idx: Vec<usize> = taps.iter().map(|&o| self.tap_index(o)).collect();
        let w = self.weight.data();
        let mut out = vec![0.0; oc * ic * nt];
        for o in 0..oc {
            for i in 0..ic {
                let src = &w[(o * ic + i) * kk..(o * ic + i + 1) * kk];
                let dst = &mut out[(o * ic + i) * nt..(o * ic + i + 1) * nt];
                for (d, &ti) in dst.iter_mut().zip(&tap_idx) {
                    *d = src[ti];
                }
            }
        }
        out
    }

    fn scatter_weight_grad(&self, taps: &[Offset], packed: &[f64], grad: &mut Tensor4) {
        let (oc, ic, kk) = (self.out_channels(), self.in_channels(), self.k() * self.k());
        let nt = taps.len();
        let tap_idx: Vec<usize> = taps.iter().map(|&o| self.tap_index(o)).collect();
        let g = grad.data_mut();
        for o in 0..oc {
            for i in 0..ic {
                let src = &packed[(o * ic + i) * nt..(o * ic + i + 1) * nt];
                let dst = &mut g[(o * ic + i) * kk..(o * ic + i + 1) * kk];
                for (&s, &ti) in src.iter().zip(&tap_idx) {
                    dst[ti] += s;
                }
            }
        }
    }
}

/// Valid destination columns `[lo, hi)` for a horizontal shift `dx`.
#[inline]
fn span(width: usize, dx: isize) -> (usize, usize) {
    let lo = (-dx).max(0) as usize;
    let hi = (width as isize - dx).clamp(0, width as isize) as usize;
    (lo, hi.max(lo))
}

fn im2col(item: &[f64], ic: usize, h: usize, w: usize, taps: &[Offset], dil: usize) -> Vec<f64> {
    let plane = h * w;
    let nt = taps.len();
    let mut cols = vec![0.0; ic * nt * plane];
    for i in 0..ic {
        let src = &item[i * plane..(i + 1) * plane];
        for (t, &(a, b)) in taps.iter().enumerate() {
            let dy = a as isize * dil as isize;
            let dx = b as isize * dil as isize;
            let (x0, x1) = span(w, dx);
            let dst = &mut cols[(i * nt + t) * plane..(i * nt + t + 1) * plane];
            for y in 0..h {
                let sy = y as isize + dy;
                if sy < 0 || sy >= h as isize || x0 >= x1 {
                    continue;
                }
                let srow = sy as usize * w;
                let sx0 = (x0 as isize + dx) as usize;
                dst[y * w + x0..y * w + x1].copy_from_slice(&src[srow + sx0..srow + sx0 + (x1 - x0)]);
            }
        }
    }
    cols
}

fn col2im_add(cols: &[f64], out: &mut [f64], ic: usize, h: usize, w: usize, taps: &[Offset], dil: usize) {
    let plane = h * w;
    let nt = taps.len();
    for i in 0..ic {
        let dst = &mut out[i * plane..(i + 1) * plane];
        for (t, &(a, b)) in taps.iter().enumerate() {
            let dy = a as isize * dil as isize;
            let dx = b as isize * dil as isize;
            let (x0, x1) = span(w, dx);
            let src = &cols[(i * nt + t) * plane..(i * nt + t + 1) * plane];
            for y in 0..h {
                let sy = y as isize + dy;
                if sy < 0 || sy >= h as isize || x0 >= x1 {
                    continue;
                }
                let drow = sy as usize * w;
                let sx0 = (x0 as isize + dx) as usize;
                let d = &mut dst[drow + sx0..drow + sx0 + (x1 - x0)];
                for (dv, sv) in d.iter_mut().zip(&src[y * w + x0..y * w + x1]) {
                    *dv += sv;
                }
            }
        }
    }
}

/// `c (m x n) = a (m x k) * b (k x n) + beta * c`, with explicit strides for `a` and `b`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: every (row, col) index reached through the given strides lies
    // inside the slices; callers size buffers from the same m/k/n.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_input(input: &Tensor4, params: &ConvParams) -> Result<()> {
    if input.channels() != params.in_channels() {
        return Err(mismatch(
            "conv2d input channels",
            params.in_channels(),
            input.channels(),
        ));
    }
    Ok(())
}

/// Same-size convolution with zero padding of `(k-1)/2 * dilation`.
pub fn conv2d(input: &Tensor4, params: &ConvParams) -> Result<Tensor4> {
    check_input(input, params)?;
    let s = input.shape();
    let (ic, oc, plane) = (s.channels, params.out_channels(), s.plane());
    let taps = params.active_taps();
    let kdim = ic * taps.len();
    let wm = params.packed_weight(&taps);
    let pointwise = taps == [(0, 0)];

    let out_shape = Shape4::new(s.batch, oc, s.height, s.width);
    let mut out = Tensor4::zeros(out_shape);
    out.data_mut()
        .par_chunks_mut(oc * plane)
        .enumerate()
        .for_each(|(b, dst)| {
            for (o, row) in dst.chunks_mut(plane).enumerate() {
                row.fill(params.bias[o]);
            }
            if kdim == 0 {
                return;
            }
            let item = input.item(b);
            if pointwise {
                gemm(oc, kdim, plane, &wm, kdim, 1, item, plane, 1, 1.0, dst);
            } else {
                let cols = im2col(item, ic, s.height, s.width, &taps, params.dilation);
                gemm(oc, kdim, plane, &wm, kdim, 1, &cols, plane, 1, 1.0, dst);
            }
        });
    Ok(out)
}

/// Gradients of `sum(grad_out * conv2d(input, params))`.
pub fn conv2d_backward(
    grad_out: &Tensor4,
    input: &Tensor4,
    params: &ConvParams,
) -> Result<(Tensor4, ConvGrads)> {
    check_input(input, params)?;
    let s = input.shape();
    let expected = Shape4::new(s.batch, params.out_channels(), s.height, s.width);
    if grad_out.shape() != expected {
        return Err(mismatch("conv2d_backward grad_out", expected, grad_out.shape()));
    }
    let (ic, oc, plane) = (s.channels, params.out_channels(), s.plane());
    let taps = params.active_taps();
    let kdim = ic * taps.len();
    let wm = params.packed_weight(&taps);
    let pointwise = taps == [(0, 0)];

    let mut grad_input = Tensor4::zeros(s);
    // Per-item partial weight/bias gradients, reduced below in batch order so
    // the result does not depend on the thread count.
    let partials: Vec<(Vec<f64>, Vec<f64>)> = grad_input
        .data_mut()
        .par_chunks_mut(ic * plane)
        .enumerate()
        .map(|(b, gin)| {
            let g = grad_out.item(b);
            let gb: Vec<f64> = g.chunks(plane).map(|r| r.iter().sum()).collect();
            let mut gw = vec![0.0; oc * kdim];
            if kdim == 0 {
                return (gw, gb);
            }
            let item = input.item(b);
            if pointwise {
                gemm(oc, plane, kdim, g, plane, 1, item, 1, plane, 0.0, &mut gw);
                gemm(kdim, oc, plane, &wm, 1, kdim, g, plane, 1, 0.0, gin);
            } else {
                let cols = im2col(item, ic, s.height, s.width, &taps, params.dilation);
                gemm(oc, plane, kdim, g, plane, 1, &cols, 1, plane, 0.0, &mut gw);
                let mut gcols = vec![0.0; kdim * plane];
                gemm(kdim, oc, plane, &wm, 1, kdim, g, plane, 1, 0.0, &mut gcols);
                col2im_add(&gcols, gin, ic, s.height, s.width, &taps, params.dilation);
            }
            (gw, gb)
        })
        .collect();

    let mut gw_packed = vec![0.0; oc * kdim];
    let mut grad_bias = vec![0.0; oc];
    for (gw, gb) in &partials {
        for (a, v) in gw_packed.iter_mut().zip(gw) {
            *a += v;
        }
        for (a, v) in grad_bias.iter_mut().zip(gb) {
            *a += v;
        }
    }
    let mut grad_weight = Tensor4::zeros(params.weight.shape());
    params.scatter_weight_grad(&taps, &gw_packed, &mut grad_weight);
    Ok((
        grad_input,
        ConvGrads {
            weight: grad_weight,
            bias: grad_bias,
        },
    ))
}
