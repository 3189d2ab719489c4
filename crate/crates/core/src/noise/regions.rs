//! Connected-component analysis of thresholded residual maps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Components strictly larger than this many pixels count as large noise.
pub const LARGE_AREA: usize = 25;

/// Inclusive upper bounds of the first three area buckets; the fourth is
/// open-ended.
pub const BUCKET_BOUNDS: [usize; 3] = [9, 25, 100];
pub const BUCKET_LABELS: [&str; 4] = ["1-9", "10-25", "26-100", ">100"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRegionStats {
    pub threshold: f64,
    /// Area of every component, in labeling order.
    pub areas: Vec<usize>,
    /// Share of above-threshold pixels falling in each area bucket.
    pub proportions: [f64; 4],
    /// Share of above-threshold pixels in components larger than 25.
    pub large_fraction: f64,
}

impl NoiseRegionStats {
    pub fn noisy_pixels(&self) -> usize {
        self.areas.iter().sum()
    }

    /// Component count per area, ascending.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for &a in &self.areas {
            *h.entry(a).or_insert(0) += 1;
        }
        h
    }

    /// `component_area,count` rows followed by `large_fraction=<value>`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("component_area,count\n");
        for (a, n) in self.histogram() {
            s.push_str(&format!("{a},{n}\n"));
        }
        s.push_str(&format!("large_fraction={}\n", self.large_fraction));
        s
    }
}

pub fn bucket_of(area: usize) -> usize {
    BUCKET_BOUNDS
        .iter()
        .position(|&b| area <= b)
        .unwrap_or(BUCKET_BOUNDS.len())
}

/// Collapses a single-image residual to one plane by averaging channels.
fn reduce_channels(residual: &Tensor4) -> Result<Vec<f64>> {
    if residual.batch() != 1 {
        return Err(Error::InvalidArgument(format!(
            "region analysis takes a single image, got batch {}",
            residual.batch()
        )));
    }
    let plane = residual.height() * residual.width();
    let c = residual.channels() as f64;
    let mut out = vec![0.0; plane];
    for ch in residual.data().chunks_exact(plane) {
        for (o, v) in out.iter_mut().zip(ch) {
            *o += v / c;
        }
    }
    Ok(out)
}

/// Robust noise std of the channel-averaged residual: 1.4826 * MAD.
pub fn mad_sigma(residual: &Tensor4) -> Result<f64> {
    let mut v = reduce_channels(residual)?;
    let med = median(&mut v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    Ok(1.4826 * median(&mut dev))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Default threshold: twice the MAD-estimated residual std.
pub fn default_threshold(residual: &Tensor4) -> Result<f64> {
    Ok(2.0 * mad_sigma(residual)?)
}

/// Binarizes `|residual| > threshold` (channels averaged first) and labels
/// 8-connected components.
pub fn analyze_regions(residual: &Tensor4, threshold: f64) -> Result<NoiseRegionStats> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let (h, w) = (residual.height(), residual.width());
    let plane = reduce_channels(residual)?;
    let mut on: Vec<bool> = plane.iter().map(|v| v.abs() > threshold).collect();
    let mut areas = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !on[start] {
            continue;
        }
        on[start] = false;
        stack.push(start);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            area += 1;
            let (y, x) = ((i / w) as isize, (i % w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (ny, nx) = (y + dy, x + dx);
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if on[j] {
                        on[j] = false;
                        stack.push(j);
                    }
                }
            }
        }
        areas.push(area);
    }
    let total: usize = areas.iter().sum();
    let mut proportions = [0.0; 4];
    let mut large = 0;
    for &a in &areas {
        proportions[bucket_of(a)] += a as f64;
        if a > LARGE_AREA {
            large += a;
        }
    }
    let large_fraction = if total == 0 {
        0.0
    } else {
        for p in &mut proportions {
            *p /= total as f64;
        }
        large as f64 / total as f64
    };
    Ok(NoiseRegionStats {
        threshold,
        areas,
        proportions,
        large_fraction,
    })
}
