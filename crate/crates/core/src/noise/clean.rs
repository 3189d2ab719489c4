//! Procedural clean images.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CleanPattern {
    Stripes,
    Checker,
    Gradient,
    Disks,
}

impl CleanPattern {
    pub const ALL: [CleanPattern; 4] = [
        CleanPattern::Stripes,
        CleanPattern::Checker,
        CleanPattern::Gradient,
        CleanPattern::Disks,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CleanPattern::Stripes => "stripes",
            CleanPattern::Checker => "checker",
            CleanPattern::Gradient => "gradient",
            CleanPattern::Disks => "disks",
        }
    }
}

impl fmt::Display for CleanPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CleanPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        CleanPattern::ALL
            .into_iter()
            .find(|p| p.tag() == lower)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown pattern '{s}' (expected stripes, checker, gradient or disks)"
                ))
            })
    }
}

/// Binary checkerboard with square cells of side `period`, one channel
/// replicated to RGB. Cell (0,0) is dark.
pub fn gen_checker(size: usize, period: usize) -> Tensor4 {
    let period = period.max(1);
    Tensor4::from_fn(Shape4::new(1, 3, size, size), |_, _, y, x| {
        ((y / period + x / period) % 2) as f64
    })
}

fn colour(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 3] {
    [
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
    ]
}

/// A 1x3xsize x size image in [0,1]. Geometry and colours are drawn from
/// `seed`; the same seed always gives the same image.
pub fn gen_clean(pattern: CleanPattern, size: usize, seed: u64) -> Result<Tensor4> {
    if size < 16 {
        return Err(Error::InvalidArgument(format!(
            "clean image size must be at least 16, got {size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape4::new(1, 3, size, size);
    let n = size as f64;
    let img = match pattern {
        CleanPattern::Checker => {
            let period = rng.random_range(4..=12usize);
            let (a, b) = (colour(&mut rng, 0.05, 0.45), colour(&mut rng, 0.55, 0.95));
            Tensor4::from_fn(shape, |_, c, y, x| {
                if (y / period + x / period) % 2 == 0 {
                    a[c]
                } else {
                    b[c]
                }
            })
        }
        CleanPattern::Stripes => {
            let period = rng.random_range(6.0..20.0);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let (dy, dx) = theta.sin_cos();
            let (a, b) = (colour(&mut rng, 0.05, 0.45), colour(&mut rng, 0.55, 0.95));
            Tensor4::from_fn(shape, |_, c, y, x| {
                let t = (y as f64 * dy + x as f64 * dx) / period;
                let w = 0.5 + 0.5 * (2.0 * std::f64::consts::PI * t).sin();
                a[c] + (b[c] - a[c]) * w
            })
        }
        CleanPattern::Gradient => {
            let lo = colour(&mut rng, 0.0, 0.3);
            let hi = colour(&mut rng, 0.7, 1.0);
            let vert = colour(&mut rng, -0.1, 0.1);
            Tensor4::from_fn(shape, |_, c, y, x| {
                let t = x as f64 / (n - 1.0);
                (lo[c] + (hi[c] - lo[c]) * t + vert[c] * (y as f64 / (n - 1.0))).clamp(0.0, 1.0)
            })
        }
        CleanPattern::Disks => {
            let bg_lo = colour(&mut rng, 0.1, 0.4);
            let bg_hi = colour(&mut rng, 0.5, 0.8);
            let count = rng.random_range(6..=14usize);
            let disks: Vec<(f64, f64, f64, [f64; 3])> = (0..count)
                .map(|_| {
                    let cy = rng.random_range(0.0..n);
                    let cx = rng.random_range(0.0..n);
                    let r = rng.random_range(n / 16.0..n / 5.0);
                    (cy, cx, r, colour(&mut rng, 0.0, 1.0))
                })
                .collect();
            let mut img = Tensor4::from_fn(shape, |_, c, y, x| {
                bg_lo[c] + (bg_hi[c] - bg_lo[c]) * ((x + y) as f64 / (2.0 * n - 2.0))
            });
            for &(cy, cx, r, col) in &disks {
                for y in 0..size {
                    for x in 0..size {
                        let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                        if d2 <= r * r {
                            for (c, &v) in col.iter().enumerate() {
                                img.set(0, c, y, x, v);
                            }
                        }
                    }
                }
            }
            img
        }
    };
    Ok(img)
}
