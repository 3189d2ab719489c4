//! Spatially correlated Gaussian noise: white fields convolved with a
//! shaping kernel of unit L2 norm.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{render_mask, MaskShape, Offset};
use crate::tensor::{Shape4, Tensor4};

/// Footprint of the shaping kernel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKernel {
    /// Equal weights on the offsets of a mask shape.
    Shape(MaskShape),
    /// Gaussian bump over the full support, std = support / 4.
    Isotropic,
}

impl fmt::Display for NoiseKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKernel::Shape(s) => write!(f, "{s}"),
            NoiseKernel::Isotropic => f.write_str("iso"),
        }
    }
}

impl FromStr for NoiseKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iso" | "isotropic" | "gaussian" => Ok(NoiseKernel::Isotropic),
            other => Ok(NoiseKernel::Shape(other.parse()?)),
        }
    }
}

/// Parses `slash+backslash`, `iso`, `o` and the like.
pub fn parse_noise_kernels(s: &str) -> Result<Vec<NoiseKernel>> {
    let ks = s
        .split('+')
        .filter(|t| !t.trim().is_empty())
        .map(NoiseKernel::from_str)
        .collect::<Result<Vec<_>>>()?;
    if ks.is_empty() {
        return Err(Error::InvalidArgument("empty noise kernel list".into()));
    }
    Ok(ks)
}

/// Noise model. Several kernels give a sum of independent fields, each with
/// variance `sigma^2 / n`, so `sigma` is always the total std.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub kernels: Vec<NoiseKernel>,
    /// Odd side length of the kernel support.
    pub support: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, kernel: NoiseKernel, support: usize, seed: u64) -> Self {
        Self {
            sigma,
            kernels: vec![kernel],
            support,
            seed,
        }
    }

    pub fn white(sigma: f64, seed: u64) -> Self {
        Self::new(sigma, NoiseKernel::Shape(MaskShape::O), 1, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if self.kernels.is_empty() {
            return Err(Error::InvalidArgument("noise needs at least one kernel".into()));
        }
        if self.support % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "noise support must be odd, got {}",
                self.support
            )));
        }
        for k in &self.kernels {
            shaping_kernel(k, self.support)?;
        }
        Ok(())
    }
}

/// Taps and weights of the kernel, normalized to unit L2 norm.
pub fn shaping_kernel(kernel: &NoiseKernel, support: usize) -> Result<Vec<(Offset, f64)>> {
    let r = (support as i32 - 1) / 2;
    let mut taps: Vec<(Offset, f64)> = match kernel {
        NoiseKernel::Shape(shape) => render_mask(shape, support)?
            .masked()
            .iter()
            .map(|&o| (o, 1.0))
            .collect(),
        NoiseKernel::Isotropic => {
            let s = (support as f64 / 4.0).max(0.25);
            (-r..=r)
                .flat_map(|a| (-r..=r).map(move |b| (a, b)))
                .map(|(a, b)| ((a, b), (-((a * a + b * b) as f64) / (2.0 * s * s)).exp()))
                .collect()
        }
    };
    let norm = taps.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    for (_, w) in &mut taps {
        *w /= norm;
    }
    Ok(taps)
}

/// A 1x3xsize x size noise field.
pub fn gen_correlated_noise(spec: &NoiseSpec, size: usize) -> Result<Tensor4> {
    gen_correlated_noise_shaped(spec, Shape4::new(1, 3, size, size))
}

/// Noise of an arbitrary shape; every (item, channel) plane is independent.
/// The white field is drawn with a border so the output has no edge effects.
pub fn gen_correlated_noise_shaped(spec: &NoiseSpec, shape: Shape4) -> Result<Tensor4> {
    spec.validate()?;
    let mut out = Tensor4::zeros(shape);
    if spec.sigma == 0.0 {
        return Ok(out);
    }
    let r = (spec.support - 1) / 2;
    let (h, w) = (shape.height, shape.width);
    let (ph, pw) = (h + 2 * r, w + 2 * r);
    let amp = spec.sigma / (spec.kernels.len() as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut field = vec![0.0; ph * pw];
    for kernel in &spec.kernels {
        let taps = shaping_kernel(kernel, spec.support)?;
        for plane in out.data_mut().chunks_exact_mut(h * w) {
            for v in field.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for &((a, b), wt) in &taps {
                        let fy = (y + r) as i32 + a;
                        let fx = (x + r) as i32 + b;
                        acc += wt * field[fy as usize * pw + fx as usize];
                    }
                    plane[y * w + x] += amp * acc;
                }
            }
        }
    }
    Ok(out)
}
