//! Blind-spot mask shapes, their rendering onto odd kernels, and the
//! receptive-field exclusion analysis built on top of them.

mod exclusion;
mod probe;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exclusion::{exclusion_set, intersect_all, ExclusionSet};
pub use probe::{empirical_exclusion, empirical_exclusion_with, ProbeConfig};

/// A (row, col) kernel or image offset; row grows downwards.
pub type Offset = (i32, i32);

/// Named blind-spot geometries. Each one names the set of kernel taps that
/// are forced to zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskShape {
    /// Single central blind spot.
    O,
    /// Full centre row.
    Hbar,
    /// Full centre column.
    Vbar,
    Plus,
    /// Anti-diagonal, running bottom-left to top-right.
    Slash,
    /// Main diagonal.
    Backslash,
    Cross,
    /// The central 3x3 block, independent of kernel size.
    Square,
    Squareplus,
    Star,
    /// Arbitrary point-symmetric offset set containing the origin.
    Custom(BTreeSet<Offset>),
}

impl MaskShape {
    pub const NAMED: [MaskShape; 10] = [
        MaskShape::O,
        MaskShape::Hbar,
        MaskShape::Vbar,
        MaskShape::Plus,
        MaskShape::Slash,
        MaskShape::Backslash,
        MaskShape::Cross,
        MaskShape::Square,
        MaskShape::Squareplus,
        MaskShape::Star,
    ];

    /// Validates and wraps a custom offset set.
    pub fn custom(offsets: impl IntoIterator<Item = Offset>) -> Result<Self> {
        let set: BTreeSet<Offset> = offsets.into_iter().collect();
        if !set.contains(&(0, 0)) {
            return Err(Error::InvalidArgument(
                "custom mask must contain the centre offset (0,0)".into(),
            ));
        }
        if let Some(&(r, c)) = set.iter().find(|&&(r, c)| !set.contains(&(-r, -c))) {
            return Err(Error::InvalidArgument(format!(
                "custom mask is not point-symmetric: ({r},{c}) has no mirror"
            )));
        }
        Ok(MaskShape::Custom(set))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            MaskShape::O => "o",
            MaskShape::Hbar => "hbar",
            MaskShape::Vbar => "vbar",
            MaskShape::Plus => "plus",
            MaskShape::Slash => "slash",
            MaskShape::Backslash => "backslash",
            MaskShape::Cross => "cross",
            MaskShape::Square => "square",
            MaskShape::Squareplus => "squareplus",
            MaskShape::Star => "star",
            MaskShape::Custom(_) => "custom",
        }
    }

    /// Masked offsets for a kernel of half-width `r`.
    fn offsets(&self, r: i32) -> BTreeSet<Offset> {
        let span = -r..=r;
        let mut set = BTreeSet::new();
        match self {
            MaskShape::O => {
                set.insert((0, 0));
            }
            MaskShape::Hbar => set.extend(span.map(|c| (0, c))),
            MaskShape::Vbar => set.extend(span.map(|row| (row, 0))),
            MaskShape::Plus => {
                set.extend(MaskShape::Hbar.offsets(r));
                set.extend(MaskShape::Vbar.offsets(r));
            }
            MaskShape::Slash => set.extend(span.map(|t| (t, -t))),
            MaskShape::Backslash => set.extend(span.map(|t| (t, t))),
            MaskShape::Cross => {
                set.extend(MaskShape::Slash.offsets(r));
                set.extend(MaskShape::Backslash.offsets(r));
            }
            MaskShape::Square => {
                let q = r.min(1);
                for row in -q..=q {
                    set.extend((-q..=q).map(|c| (row, c)));
                }
            }
            MaskShape::Squareplus => {
                set.extend(MaskShape::Square.offsets(r));
                set.extend(MaskShape::Plus.offsets(r));
            }
            MaskShape::Star => {
                set.extend(MaskShape::Plus.offsets(r));
                set.extend(MaskShape::Cross.offsets(r));
            }
            MaskShape::Custom(s) => set.extend(s.iter().copied()),
        }
        set
    }
}

impl fmt::Display for MaskShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskShape::Custom(s) => {
                write!(f, "custom{{")?;
                for (i, (r, c)) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{r},{c}")?;
                }
                write!(f, "}}")
            }
            other => f.write_str(other.tag()),
        }
    }
}

impl FromStr for MaskShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        MaskShape::NAMED
            .iter()
            .find(|m| m.tag() == lower)
            .cloned()
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown mask shape '{s}' (expected one of o, hbar, vbar, plus, slash, \
                     backslash, cross, square, squareplus, star)"
                ))
            })
    }
}

/// Parses a comma separated list of mask tags, e.g. `slash,backslash`.
pub fn parse_mask_list(s: &str) -> Result<Vec<MaskShape>> {
    let masks = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(MaskShape::from_str)
        .collect::<Result<Vec<_>>>()?;
    if masks.is_empty() {
        return Err(Error::InvalidArgument("empty mask list".into()));
    }
    Ok(masks)
}

/// A binary mask over a k x k kernel; `masked` taps are held at zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelMask {
    k: usize,
    masked: BTreeSet<Offset>,
}

impl KernelMask {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn radius(&self) -> i32 {
        (self.k as i32 - 1) / 2
    }

    pub fn masked(&self) -> &BTreeSet<Offset> {
        &self.masked
    }

    pub fn is_masked(&self, off: Offset) -> bool {
        self.masked.contains(&off)
    }

    /// Unmasked taps in row-major kernel order.
    pub fn unmasked(&self) -> Vec<Offset> {
        let r = self.radius();
        (-r..=r)
            .flat_map(|row| (-r..=r).map(move |c| (row, c)))
            .filter(|o| !self.masked.contains(o))
            .collect()
    }

    /// Row-major flags, `true` where the tap is masked.
    pub fn grid(&self) -> Vec<bool> {
        let r = self.radius();
        (-r..=r)
            .flat_map(|row| (-r..=r).map(move |c| (row, c)))
            .map(|o| self.masked.contains(&o))
            .collect()
    }

    /// Removes a tap from the masked set. Only used for negative controls.
    pub fn unmask(&mut self, off: Offset) {
        self.masked.remove(&off);
    }
}

impl fmt::Display for KernelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.grid().iter().enumerate() {
            f.write_str(if *m { "x" } else { "." })?;
            if (i + 1) % self.k == 0 && i + 1 < self.k * self.k {
                f.write_str("\n")?;
            }
        }
        Ok(())
    }
}

/// Realizes `shape` on a `k` x `k` kernel.
pub fn render_mask(shape: &MaskShape, k: usize) -> Result<KernelMask> {
    if k % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "kernel size must be odd, got {k}"
        )));
    }
    if k == 1 && *shape != MaskShape::O {
        return Err(Error::InvalidArgument(format!(
            "mask '{shape}' needs a kernel of at least 3x3"
        )));
    }
    let r = (k as i32 - 1) / 2;
    let masked = shape.offsets(r);
    if let Some(&(row, c)) = masked.iter().find(|(row, c)| row.abs() > r || c.abs() > r) {
        return Err(Error::InvalidArgument(format!(
            "mask offset ({row},{c}) lies outside a {k}x{k} kernel"
        )));
    }
    Ok(KernelMask { k, masked })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_counts_on_5x5() {
        let count = |s: MaskShape| render_mask(&s, 5).unwrap().masked().len();
        assert_eq!(count(MaskShape::O), 1);
        assert_eq!(count(MaskShape::Plus), 9);
        assert_eq!(count(MaskShape::Star), 17);
        assert_eq!(count(MaskShape::Square), 9);
        assert_eq!(count(MaskShape::Squareplus), 13);
        assert_eq!(count(MaskShape::Cross), 9);
        assert_eq!(count(MaskShape::Hbar), 5);
    }

    #[test]
    fn o_on_5x5_leaves_24_taps() {
        let m = render_mask(&MaskShape::O, 5).unwrap();
        assert_eq!(m.unmasked().len(), 24);
    }

    #[test]
    fn plus_is_row_and_column() {
        let m = render_mask(&MaskShape::Plus, 5).unwrap();
        assert!(m.masked().iter().all(|&(r, c)| r == 0 || c == 0));
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(render_mask(&MaskShape::O, 4).is_err());
    }

    #[test]
    fn one_by_one_only_for_o() {
        assert!(render_mask(&MaskShape::O, 1).is_ok());
        assert!(render_mask(&MaskShape::Plus, 1).is_err());
    }

    #[test]
    fn tags_roundtrip() {
        for s in MaskShape::NAMED {
            assert_eq!(s.tag().parse::<MaskShape>().unwrap(), s);
        }
        assert!("diamond".parse::<MaskShape>().is_err());
        assert_eq!(
            parse_mask_list("slash,backslash").unwrap(),
            vec![MaskShape::Slash, MaskShape::Backslash]
        );
    }

    #[test]
    fn custom_requires_centre_and_symmetry() {
        assert!(MaskShape::custom([(0, 1), (0, -1)]).is_err());
        assert!(MaskShape::custom([(0, 0), (1, 2)]).is_err());
        let m = MaskShape::custom([(0, 0), (1, 2), (-1, -2)]).unwrap();
        assert_eq!(render_mask(&m, 5).unwrap().masked().len(), 3);
        assert!(render_mask(&m, 3).is_err());
    }

    #[test]
    fn shape_invariants_hold_for_3_and_5() {
        for k in [3usize, 5] {
            for s in MaskShape::NAMED {
                let m = render_mask(&s, k).unwrap();
                assert!(m.is_masked((0, 0)), "{s} k={k}");
                for &(r, c) in m.masked() {
                    assert!(m.is_masked((-r, -c)), "{s} k={k} not symmetric");
                }
            }
        }
    }

    #[test]
    fn display_draws_grid() {
        let m = render_mask(&MaskShape::Slash, 3).unwrap();
        assert_eq!(m.to_string(), "..x\n.x.\nx..");
    }
}
