//! Full-reference image quality metrics.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse(a: &Tensor4, b: &Tensor4) -> Result<f64> {
    a.check_same(b, "mse")?;
    let n = a.data().len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n)
}

/// Peak signal-to-noise ratio in dB, capped at 99 dB for near-identical
/// inputs.
pub fn psnr(a: &Tensor4, b: &Tensor4, peak: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m < 1e-12 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / m).log10()).min(PSNR_CAP))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
fn gaussian_taps() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM over every fully-contained 11x11 window of every (item,
/// channel) plane, data range 1.
pub fn ssim(a: &Tensor4, b: &Tensor4) -> Result<f64> {
    a.check_same(b, "ssim")?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let g = gaussian_taps();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut total = 0.0;
    let mut planes = 0;
    for (pa, pb) in a.data().chunks_exact(h * w).zip(b.data().chunks_exact(h * w)) {
        // Separable filtering: rows first, then columns.
        let fields: [Vec<f64>; 5] = [
            pa.to_vec(),
            pb.to_vec(),
            pa.iter().map(|v| v * v).collect(),
            pb.iter().map(|v| v * v).collect(),
            pa.iter().zip(pb).map(|(x, y)| x * y).collect(),
        ];
        let filtered: Vec<Vec<f64>> = fields
            .iter()
            .map(|f| {
                let mut rows = vec![0.0; h * ow];
                for y in 0..h {
                    for x in 0..ow {
                        rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| g[i] * f[y * w + x + i]).sum();
                    }
                }
                let mut out = vec![0.0; oh * ow];
                for y in 0..oh {
                    for x in 0..ow {
                        out[y * ow + x] =
                            (0..SSIM_WINDOW).map(|i| g[i] * rows[(y + i) * ow + x]).sum();
                    }
                }
                out
            })
            .collect();
        let mut acc = 0.0;
        for i in 0..oh * ow {
            let (mx, my) = (filtered[0][i], filtered[1][i]);
            let vx = filtered[2][i] - mx * mx;
            let vy = filtered[3][i] - my * my;
            let cxy = filtered[4][i] - mx * my;
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
        total += acc / (oh * ow) as f64;
        planes += 1;
    }
    Ok(total / planes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;

    fn ramp() -> Tensor4 {
        Tensor4::from_fn(Shape4::new(1, 3, 16, 16), |_, c, y, x| {
            ((y * 16 + x + c) as f64 / 300.0).min(0.9)
        })
    }

    #[test]
    fn identical_images() {
        let a = ramp();
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), 99.0);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offset_of_a_tenth_is_20_db() {
        let a = ramp();
        let b = a.map(|v| v + 0.1);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn small_images_rejected_by_ssim() {
        let a = Tensor4::zeros(Shape4::new(1, 1, 8, 8));
        assert!(ssim(&a, &a).is_err());
        assert!(psnr(&a, &Tensor4::zeros(Shape4::new(1, 1, 8, 9)), 1.0).is_err());
    }
}
