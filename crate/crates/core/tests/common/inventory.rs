//! Closed-form parameter inventory, written without reference to the graph
//! builders.

use mmbsn::model::{ArchKind, ArchitectureConfig};

pub fn conv(cin: usize, cout: usize, k: usize) -> usize {
    cin * cout * k * k + cout
}

pub fn dcl(c: usize) -> usize {
    conv(c, c, 3) + conv(c, c, 1)
}

pub fn tail(paths: usize, c: usize, out: usize) -> usize {
    let half = (c / 2).max(1);
    conv(paths * c, c, 1) + conv(c, half, 1) + conv(half, out, 1)
}

/// One mask's worth of baseline paths, head included.
pub fn baseline_body(cfg: &ArchitectureConfig) -> usize {
    let c = cfg.base_channels;
    let depth = cfg.cdcl_depth + cfg.trunk_depth;
    let per_size: usize = cfg
        .kernel_sizes
        .iter()
        .map(|&k| conv(c, c, k) + 3 * conv(c, c, 1) + depth * dcl(c))
        .sum();
    conv(cfg.in_channels, c, 1) + per_size
}

pub fn inventory(kind: ArchKind, cfg: &ArchitectureConfig) -> usize {
    let c = cfg.base_channels;
    let n_sizes = cfg.kernel_sizes.len();
    let n_masks = cfg.masks.len();
    match kind {
        ArchKind::Apbsn => baseline_body(cfg) + tail(n_sizes, c, cfg.in_channels),
        ArchKind::Smmbsn => n_masks * baseline_body(cfg) + tail(n_masks * n_sizes, c, cfg.in_channels),
        ArchKind::Mmbsn => {
            let per_size: usize = cfg
                .kernel_sizes
                .iter()
                .map(|&k| {
                    let branch = conv(c, c, k) + 2 * conv(c, c, 1) + cfg.cdcl_depth * dcl(c) + conv(2 * c, c, 1);
                    n_masks * branch + conv(n_masks * c, c, 1) + cfg.trunk_depth * dcl(c)
                })
                .sum();
            conv(cfg.in_channels, c, 1) + per_size + tail(n_sizes, c, cfg.in_channels)
        }
    }
}
