use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::MaskShape;

/// Which of the three network families to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    /// Centre-masked baseline: one path per kernel size.
    Apbsn,
    /// Naive stack: one full baseline path per mask.
    Smmbsn,
    /// Multi-mask network with CDCL skips and per-size fusion.
    Mmbsn,
}

impl ArchKind {
    pub fn tag(self) -> &'static str {
        match self {
            ArchKind::Apbsn => "apbsn",
            ArchKind::Smmbsn => "smmbsn",
            ArchKind::Mmbsn => "mmbsn",
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ArchKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "apbsn" | "ap-bsn" => Ok(ArchKind::Apbsn),
            "smmbsn" | "smm-bsn" => Ok(ArchKind::Smmbsn),
            "mmbsn" | "mm-bsn" => Ok(ArchKind::Mmbsn),
            other => Err(Error::InvalidArgument(format!(
                "unknown architecture '{other}' (expected apbsn, smmbsn or mmbsn)"
            ))),
        }
    }
}

/// Width, depth and mask layout shared by all three builders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchitectureConfig {
    pub base_channels: usize,
    pub masks: Vec<MaskShape>,
    /// DCL blocks inside each branch's CDCL.
    pub cdcl_depth: usize,
    /// DCL blocks after the per-size fusion.
    pub trunk_depth: usize,
    pub kernel_sizes: Vec<usize>,
    /// One dilation per kernel size.
    pub dilations: Vec<usize>,
    pub in_channels: usize,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            base_channels: 128,
            masks: vec![MaskShape::Slash, MaskShape::Backslash],
            cdcl_depth: 2,
            trunk_depth: 7,
            kernel_sizes: vec![3, 5],
            dilations: vec![2, 3],
            in_channels: 3,
        }
    }
}

impl ArchitectureConfig {
    /// Small network used for desk-scale experiments and tests.
    pub fn toy(base_channels: usize, masks: Vec<MaskShape>) -> Self {
        Self {
            base_channels,
            masks,
            cdcl_depth: 1,
            trunk_depth: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.masks.is_empty() {
            return bad("at least one mask is required");
        }
        if self.kernel_sizes.is_empty() {
            return bad("at least one kernel size is required");
        }
        if self.kernel_sizes.len() != self.dilations.len() {
            return bad("kernel_sizes and dilations must have the same length");
        }
        if self.base_channels < 1 || self.in_channels < 1 {
            return bad("channel counts must be >= 1");
        }
        if self.cdcl_depth < 1 || self.trunk_depth < 1 {
            return bad("cdcl_depth and trunk_depth must be >= 1");
        }
        if let Some(k) = self.kernel_sizes.iter().find(|&&k| k % 2 == 0 || k < 3) {
            return Err(Error::InvalidConfig(format!(
                "masked kernel sizes must be odd and >= 3, got {k}"
            )));
        }
        if self.dilations.contains(&0) {
            return bad("dilations must be >= 1");
        }
        Ok(())
    }

    /// Width of the second tail layer.
    pub(crate) fn half_channels(&self) -> usize {
        (self.base_channels / 2).max(1)
    }
}
