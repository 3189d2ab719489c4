//! Parameter counts against the closed-form inventory in `common`.

mod common;

use common::inventory::inventory;
use mmbsn::conv::ConvParams;
use mmbsn::mask::MaskShape;
use mmbsn::model::{build, count_params, ArchKind, ArchitectureConfig};

#[test]
fn closed_form_single_layers() {
    assert_eq!(ConvParams::new(3, 128, 1, 1, None).unwrap().num_params(), 512);
    assert_eq!(ConvParams::new(128, 128, 5, 1, None).unwrap().num_params(), 409_728);
}

#[test]
fn builders_match_inventory() {
    let configs = [
        ArchitectureConfig::default(),
        ArchitectureConfig::toy(16, vec![MaskShape::O]),
        ArchitectureConfig {
            base_channels: 7,
            masks: vec![MaskShape::Plus, MaskShape::Cross, MaskShape::Star],
            cdcl_depth: 3,
            trunk_depth: 1,
            kernel_sizes: vec![3, 5, 7],
            dilations: vec![2, 3, 4],
            in_channels: 1,
        },
    ];
    for cfg in &configs {
        for kind in [ArchKind::Apbsn, ArchKind::Smmbsn, ArchKind::Mmbsn] {
            let m = build(kind, cfg).unwrap();
            assert_eq!(count_params(&m), inventory(kind, cfg), "{kind}");
        }
    }
}

#[test]
fn table_targets_within_ten_percent() {
    let cfg = ArchitectureConfig::default();
    for (kind, target) in [
        (ArchKind::Apbsn, 3.7e6),
        (ArchKind::Mmbsn, 5.3e6),
        (ArchKind::Smmbsn, 7.3e6),
    ] {
        let n = inventory(kind, &cfg) as f64;
        assert!((n / target - 1.0).abs() <= 0.10, "{kind}: {n}");
    }
}

#[test]
fn halving_width_quarters_the_count() {
    for kind in [ArchKind::Apbsn, ArchKind::Smmbsn, ArchKind::Mmbsn] {
        let full = count_params(&build(kind, &ArchitectureConfig::default()).unwrap()) as f64;
        let half_cfg = ArchitectureConfig {
            base_channels: 64,
            ..ArchitectureConfig::default()
        };
        let half = count_params(&build(kind, &half_cfg).unwrap()) as f64;
        let ratio = full / half;
        assert!(ratio > 3.5 && ratio < 4.5, "{kind}: {ratio}");
    }
}

#[test]
fn masked_taps_are_counted() {
    let cfg = ArchitectureConfig::toy(4, vec![MaskShape::Star]);
    let m = build(ArchKind::Mmbsn, &cfg).unwrap();
    let stored: usize = m.params().iter().map(|p| p.weight.data().len() + p.bias.len()).sum();
    assert_eq!(count_params(&m), stored);
}
