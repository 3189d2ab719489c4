//! Pixel-shuffle downsampling and its inverse.
//!
//! `pd` rearranges an image into an `s x s` mosaic of sub-images, where
//! sub-image `(i, j)` holds the pixels `(i + s*y, j + s*x)`. The mosaic keeps
//! the original tensor shape, so the networks see a single image.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::tensor::{Shape4, Tensor4};

/// Pixel-shuffle stride, always at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct PdStride(usize);

impl PdStride {
    pub fn new(s: usize) -> Result<Self> {
        if s < 1 {
            return Err(Error::InvalidArgument("PD stride must be >= 1".into()));
        }
        Ok(Self(s))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for PdStride {
    type Error = Error;
    fn try_from(s: usize) -> Result<Self> {
        Self::new(s)
    }
}

impl From<PdStride> for usize {
    fn from(s: PdStride) -> usize {
        s.0
    }
}

fn check_divisible(t: &Tensor4, s: usize, op: &'static str) -> Result<()> {
    if t.height() % s != 0 || t.width() % s != 0 {
        return Err(mismatch(
            op,
            format!("height and width divisible by {s}"),
            format!("{}x{}", t.height(), t.width()),
        ));
    }
    Ok(())
}

/// Image -> mosaic.
pub fn pd(image: &Tensor4, stride: PdStride) -> Result<Tensor4> {
    let s = stride.get();
    if s == 1 {
        return Ok(image.clone());
    }
    check_divisible(image, s, "pd")?;
    let sh = image.shape();
    let (h, w) = (sh.height, sh.width);
    let (bh, bw) = (h / s, w / s);
    let mut out = Tensor4::zeros(sh);
    for (src, dst) in image
        .data()
        .chunks(h * w)
        .zip(out.data_mut().chunks_mut(h * w))
    {
        for i in 0..s {
            for y in 0..bh {
                let src_row = &src[(i + s * y) * w..(i + s * y + 1) * w];
                let dst_row = (i * bh + y) * w;
                for j in 0..s {
                    for x in 0..bw {
                        dst[dst_row + j * bw + x] = src_row[j + s * x];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Mosaic -> image; the exact inverse permutation of [`pd`].
pub fn pd_inv(mosaic: &Tensor4, stride: PdStride) -> Result<Tensor4> {
    let s = stride.get();
    if s == 1 {
        return Ok(mosaic.clone());
    }
    check_divisible(mosaic, s, "pd_inv")?;
    let sh = mosaic.shape();
    let (h, w) = (sh.height, sh.width);
    let (bh, bw) = (h / s, w / s);
    let mut out = Tensor4::zeros(sh);
    for (src, dst) in mosaic
        .data()
        .chunks(h * w)
        .zip(out.data_mut().chunks_mut(h * w))
    {
        for i in 0..s {
            for y in 0..bh {
                let src_row = (i * bh + y) * w;
                let dst_row = &mut dst[(i + s * y) * w..(i + s * y + 1) * w];
                for j in 0..s {
                    for x in 0..bw {
                        dst_row[j + s * x] = src[src_row + j * bw + x];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Mirror index into `[0, n)` without repeating the edge sample.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// Reflect-pads bottom/right up to the next multiple of `s`.
pub fn pad_to_multiple(image: &Tensor4, s: usize) -> Tensor4 {
    let sh = image.shape();
    let h = sh.height.div_ceil(s) * s;
    let w = sh.width.div_ceil(s) * s;
    if h == sh.height && w == sh.width {
        return image.clone();
    }
    Tensor4::from_fn(Shape4::new(sh.batch, sh.channels, h, w), |b, c, y, x| {
        image.get(
            b,
            c,
            reflect(y as isize, sh.height),
            reflect(x as isize, sh.width),
        )
    })
}

/// Top-left `height x width` window.
pub fn crop(image: &Tensor4, height: usize, width: usize) -> Tensor4 {
    let sh = image.shape();
    if sh.height == height && sh.width == width {
        return image.clone();
    }
    Tensor4::from_fn(
        Shape4::new(sh.batch, sh.channels, height, width),
        |b, c, y, x| image.get(b, c, y, x),
    )
}

/// Defaults for [`random_replace_refine`].
pub const REFINE_P: f64 = 0.16;
pub const REFINE_T: usize = 8;

/// Averages `passes` re-denoisings of `denoised`, where before each pass every
/// pixel (all channels together) is swapped back to its `noisy` value with
/// probability `p`.
pub fn random_replace_refine<F>(
    denoised: &Tensor4,
    noisy: &Tensor4,
    p: f64,
    passes: usize,
    seed: u64,
    mut redenoise: F,
) -> Result<Tensor4>
where
    F: FnMut(&Tensor4) -> Result<Tensor4>,
{
    denoised.check_same(noisy, "random_replace_refine")?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "replacement probability must be in [0,1], got {p}"
        )));
    }
    if passes == 0 {
        return Err(Error::InvalidArgument("refinement needs T >= 1".into()));
    }
    let sh = denoised.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = Tensor4::zeros(sh);
    let mut lo = Tensor4::filled(sh, f64::INFINITY);
    let mut hi = Tensor4::filled(sh, f64::NEG_INFINITY);
    for _ in 0..passes {
        let mut tmp = denoised.clone();
        for b in 0..sh.batch {
            for y in 0..sh.height {
                for x in 0..sh.width {
                    if rng.random::<f64>() < p {
                        for c in 0..sh.channels {
                            tmp.set(b, c, y, x, noisy.get(b, c, y, x));
                        }
                    }
                }
            }
        }
        let out = redenoise(&tmp)?;
        out.check_same(denoised, "random_replace_refine pass")?;
        for (((s, l), h), &v) in sum
            .data_mut()
            .iter_mut()
            .zip(lo.data_mut())
            .zip(hi.data_mut())
            .zip(out.data())
        {
            *s += v;
            *l = l.min(v);
            *h = h.max(v);
        }
    }
    let n = passes as f64;
    let data = sum
        .data()
        .iter()
        .zip(lo.data().iter().zip(hi.data()))
        .map(|(&s, (&l, &h))| (s / n).clamp(l, h))
        .collect();
    Tensor4::from_vec(sh, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stride(s: usize) -> PdStride {
        PdStride::new(s).unwrap()
    }

    fn counting(h: usize, w: usize) -> Tensor4 {
        Tensor4::from_fn(Shape4::new(1, 1, h, w), |_, _, y, x| (y * w + x) as f64)
    }

    #[test]
    fn stride_zero_rejected() {
        assert!(PdStride::new(0).is_err());
    }

    #[test]
    fn stride_one_is_identity() {
        let x = counting(5, 7);
        assert_eq!(pd(&x, stride(1)).unwrap(), x);
        assert_eq!(pd_inv(&x, stride(1)).unwrap(), x);
    }

    #[test]
    fn top_left_subimage_of_4x4() {
        let m = pd(&counting(4, 4), stride(2)).unwrap();
        let tl = [m.get(0, 0, 0, 0), m.get(0, 0, 0, 1), m.get(0, 0, 1, 0), m.get(0, 0, 1, 1)];
        assert_eq!(tl, [0.0, 2.0, 8.0, 10.0]);
    }

    #[test]
    fn mosaic_origin_maps_to_image_origin() {
        let mut m = Tensor4::zeros(Shape4::new(1, 1, 4, 4));
        m.set(0, 0, 0, 0, 1.0);
        let img = pd_inv(&m, stride(2)).unwrap();
        assert_eq!(img.get(0, 0, 0, 0), 1.0);
        assert_eq!(img.data().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn non_divisible_rejected() {
        assert!(pd(&counting(5, 4), stride(2)).is_err());
    }

    #[test]
    fn pad_then_crop() {
        let x = counting(5, 7);
        let p = pad_to_multiple(&x, 2);
        assert_eq!((p.height(), p.width()), (6, 8));
        // reflected without repeating the edge
        assert_eq!(p.get(0, 0, 5, 0), x.get(0, 0, 3, 0));
        assert_eq!(p.get(0, 0, 0, 7), x.get(0, 0, 0, 5));
        assert_eq!(crop(&p, 5, 7), x);
    }

    #[test]
    fn refine_p0_averages_identical_passes() {
        let d = counting(4, 4);
        let n = d.map(|v| v + 100.0);
        let out = random_replace_refine(&d, &n, 0.0, 3, 7, |t| Ok(t.map(|v| v * 0.5))).unwrap();
        assert_eq!(out, d.map(|v| v * 0.5));
    }

    #[test]
    fn refine_p1_single_pass_is_denoise_of_noisy() {
        let d = counting(4, 4);
        let n = d.map(|v| v + 100.0);
        let out = random_replace_refine(&d, &n, 1.0, 1, 7, |t| Ok(t.map(|v| v - 1.0))).unwrap();
        assert_eq!(out, n.map(|v| v - 1.0));
    }

    #[test]
    fn refine_is_deterministic() {
        let d = counting(6, 6);
        let n = d.map(|v| (v * 1.7).sin());
        let f = |t: &Tensor4| Ok(t.map(|v| v * 0.9 + 0.01));
        let a = random_replace_refine(&d, &n, 0.3, 4, 11, f).unwrap();
        let b = random_replace_refine(&d, &n, 0.3, 4, 11, f).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn refine_rejects_bad_arguments() {
        let d = counting(4, 4);
        let ok = |t: &Tensor4| Ok(t.clone());
        assert!(random_replace_refine(&d, &d, 1.5, 1, 0, ok).is_err());
        assert!(random_replace_refine(&d, &d, 0.5, 0, 0, ok).is_err());
        assert!(random_replace_refine(&d, &counting(4, 5), 0.5, 1, 0, ok).is_err());
    }
}
