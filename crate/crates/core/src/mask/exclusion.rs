use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{KernelMask, Offset};

/// Input offsets, within a square window of half-width `radius`, that an
/// output pixel cannot depend on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionSet {
    pub radius: i32,
    pub offsets: BTreeSet<Offset>,
}

impl ExclusionSet {
    pub fn new(radius: i32, offsets: BTreeSet<Offset>) -> Self {
        Self { radius, offsets }
    }

    /// Every offset in the window.
    pub fn full(radius: i32) -> Self {
        let offsets = window(radius).collect();
        Self { radius, offsets }
    }

    pub fn contains(&self, off: Offset) -> bool {
        self.offsets.contains(&off)
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn intersection(&self, other: &ExclusionSet) -> ExclusionSet {
        assert_eq!(self.radius, other.radius, "radius mismatch");
        ExclusionSet {
            radius: self.radius,
            offsets: self.offsets.intersection(&other.offsets).copied().collect(),
        }
    }

    pub fn is_subset(&self, other: &ExclusionSet) -> bool {
        self.offsets.is_subset(&other.offsets)
    }

    /// Offsets present in exactly one of the two sets.
    pub fn symmetric_difference(&self, other: &ExclusionSet) -> Vec<Offset> {
        self.offsets
            .symmetric_difference(&other.offsets)
            .copied()
            .collect()
    }
}

impl fmt::Display for ExclusionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (r, c)) in self.offsets.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({r},{c})")?;
        }
        f.write_str("}")
    }
}

pub(crate) fn window(radius: i32) -> impl Iterator<Item = Offset> {
    (-radius..=radius).flat_map(move |a| (-radius..=radius).map(move |b| (a, b)))
}

/// Offsets unreachable through one masked conv followed by an unbounded
/// stack of convolutions at `dilation`.
///
/// `(a, b)` is reachable iff `(d*p + rho, d*q + c) == (a, b)` for some
/// integers `p, q` and some unmasked tap `(rho, c)`. Any `p` beyond
/// `(radius + r) / d` cannot land inside the window, so the search is finite.
pub fn exclusion_set(mask: &KernelMask, dilation: usize, radius: i32) -> ExclusionSet {
    assert!(dilation >= 1, "dilation must be positive");
    let d = dilation as i32;
    let reach = (radius + mask.radius()) / d + 1;
    let taps = mask.unmasked();
    let mut reachable = BTreeSet::new();
    for p in -reach..=reach {
        for q in -reach..=reach {
            for &(rho, c) in &taps {
                let a = d * p + rho;
                let b = d * q + c;
                if a.abs() <= radius && b.abs() <= radius {
                    reachable.insert((a, b));
                }
            }
        }
    }
    let offsets = window(radius).filter(|o| !reachable.contains(o)).collect();
    ExclusionSet { radius, offsets }
}

/// Intersection of a non-empty family of sets sharing one radius.
pub fn intersect_all<'a>(sets: impl IntoIterator<Item = &'a ExclusionSet>) -> Option<ExclusionSet> {
    let mut iter = sets.into_iter();
    let first = iter.next()?.clone();
    Some(iter.fold(first, |acc, s| acc.intersection(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{render_mask, MaskShape};

    fn ex(shape: MaskShape, k: usize, d: usize) -> ExclusionSet {
        exclusion_set(&render_mask(&shape, k).unwrap(), d, 6)
    }

    #[test]
    fn centre_mask_excludes_the_dilation_lattice() {
        // Only the centre tap is congruent to (0,0) mod 2 on a 3x3 kernel.
        let e = ex(MaskShape::O, 3, 2);
        let lattice: BTreeSet<_> = window(6).filter(|&(a, b)| a % 2 == 0 && b % 2 == 0).collect();
        assert_eq!(e.offsets, lattice);
        assert!(!e.contains((1, 0)) && !e.contains((1, 1)));
    }

    #[test]
    fn hbar_excludes_rows_on_the_lattice() {
        let e = ex(MaskShape::Hbar, 5, 3);
        let rows: BTreeSet<_> = window(6).filter(|&(a, _)| a % 3 == 0).collect();
        assert_eq!(e.offsets, rows);
        assert!((-6..=6).all(|c| e.contains((0, c))));
    }

    #[test]
    fn slash_reaches_its_own_diagonal_through_dilation() {
        let e = ex(MaskShape::Slash, 5, 3);
        assert!(e.contains((0, 0)));
        assert!(!e.contains((1, -1)));
    }

    #[test]
    fn fully_masked_kernel_excludes_everything() {
        let e = ex(MaskShape::Square, 3, 2);
        assert_eq!(e, ExclusionSet::full(6));
    }

    #[test]
    fn intersection_of_family() {
        let a = ex(MaskShape::Hbar, 5, 3);
        let b = ex(MaskShape::Vbar, 5, 3);
        let i = intersect_all([&a, &b]).unwrap();
        let lattice: BTreeSet<_> = window(6).filter(|&(a, b)| a % 3 == 0 && b % 3 == 0).collect();
        assert_eq!(i.offsets, lattice);
        assert!(intersect_all(std::iter::empty()).is_none());
    }

    #[test]
    fn display_lists_offsets() {
        assert_eq!(exclusion_set(&render_mask(&MaskShape::O, 3).unwrap(), 2, 1).to_string(), "{(0,0)}");
    }
}
