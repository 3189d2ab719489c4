//! Numerical blind-spot verification by input perturbation.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{mismatch, Error, Result};
use crate::model::ModelGraph;
use crate::tensor::{Shape4, Tensor4};

use super::exclusion::{window, ExclusionSet};

/// Knobs for [`empirical_exclusion`].
#[derive(Clone, Debug)]
pub struct ProbeConfig {
    /// Independent weight draws; at least 3.
    pub trials: usize,
    /// Perturbed input positions per trial.
    pub positions: usize,
    pub magnitude: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            trials: 3,
            positions: 5,
            magnitude: 1.0,
            seed: 0x5eed,
        }
    }
}

/// Border (in pixels) that keeps every probe, every output pixel within
/// `radius` of it, and every intermediate position on their dependency
/// paths inside the image, so zero padding never cuts a path.
fn probe_margin(model: &ModelGraph, radius: i32) -> usize {
    let reach = model
        .receptive_offsets()
        .into_iter()
        .map(|(a, b)| a.abs().max(b.abs()))
        .max()
        .unwrap_or(0);
    (radius + reach + 1) as usize
}

/// Offsets whose perturbation never changes the output, over `trials`
/// random positive weight draws and random probe positions. Outputs are
/// compared bit for bit.
pub fn empirical_exclusion(model: &ModelGraph, radius: i32, trials: usize) -> Result<ExclusionSet> {
    empirical_exclusion_with(
        model,
        radius,
        &ProbeConfig {
            trials,
            ..ProbeConfig::default()
        },
    )
}

pub fn empirical_exclusion_with(
    model: &ModelGraph,
    radius: i32,
    cfg: &ProbeConfig,
) -> Result<ExclusionSet> {
    if cfg.trials < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 weight draws, got {}",
            cfg.trials
        )));
    }
    if radius < 0 || cfg.positions == 0 {
        return Err(Error::InvalidArgument("radius >= 0 and positions >= 1 required".into()));
    }
    let margin = probe_margin(model, radius);
    let size = 2 * margin + 8;
    let ch = model.config().in_channels;
    let shape = Shape4::new(1, ch, size, size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dependent: BTreeSet<(i32, i32)> = BTreeSet::new();

    for _ in 0..cfg.trials {
        let mut m = model.clone();
        m.init_probe_weights(rng.random());
        let base_in = Tensor4::from_fn(shape, |_, _, _, _| rng.random::<f64>());
        let base_out = m.forward(&base_in)?;
        if base_out.height() != size || base_out.width() != size {
            return Err(mismatch(
                "empirical_exclusion output",
                format!("{size}x{size}"),
                format!("{}x{}", base_out.height(), base_out.width()),
            ));
        }
        let out_ch = base_out.channels();
        for _ in 0..cfg.positions {
            let py = rng.random_range(margin..size - margin) as i32;
            let px = rng.random_range(margin..size - margin) as i32;
            let mut input = base_in.clone();
            for c in 0..ch {
                let v = input.get(0, c, py as usize, px as usize);
                input.set(0, c, py as usize, px as usize, v + cfg.magnitude);
            }
            let out = m.forward(&input)?;
            for (a, b) in window(radius) {
                if dependent.contains(&(a, b)) {
                    continue;
                }
                // Output pixel whose offset (a, b) lands on the probe.
                let (y, x) = ((py - a) as usize, (px - b) as usize);
                let changed = (0..out_ch)
                    .any(|c| out.get(0, c, y, x).to_bits() != base_out.get(0, c, y, x).to_bits());
                if changed {
                    dependent.insert((a, b));
                }
            }
        }
    }
    let offsets = window(radius).filter(|o| !dependent.contains(o)).collect();
    Ok(ExclusionSet::new(radius, offsets))
}
