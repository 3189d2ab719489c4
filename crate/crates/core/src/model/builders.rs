//! The three network families.
//!
//! Shared vocabulary:
//! - head: 1x1 conv from the image channels to `C`, ReLU.
//! - DCL block at dilation `d`: `x + pw(relu(conv3x3_d(x)))`.
//! - tail: concat, then 1x1 convs `n*C -> C -> C/2 -> in_channels`, the last one linear.

use crate::error::Result;
use crate::mask::{render_mask, MaskShape};

use super::config::{ArchKind, ArchitectureConfig};
use super::graph::{BranchSpec, GraphBuilder, ModelGraph, NodeId};

fn relu_conv(
    g: &mut GraphBuilder,
    name: String,
    src: NodeId,
    out: usize,
) -> Result<NodeId> {
    let c = g.pointwise(name, src, out)?;
    Ok(g.relu(c))
}

fn dcl_block(g: &mut GraphBuilder, name: &str, src: NodeId, c: usize, d: usize) -> Result<NodeId> {
    let dil = g.conv(format!("{name}.dil"), src, c, 3, d, None)?;
    let act = g.relu(dil);
    let pw = g.pointwise(format!("{name}.pw"), act, c)?;
    Ok(g.add(src, pw))
}

fn dcl_stack(
    g: &mut GraphBuilder,
    prefix: &str,
    mut x: NodeId,
    c: usize,
    d: usize,
    depth: usize,
) -> Result<NodeId> {
    for i in 0..depth {
        x = dcl_block(g, &format!("{prefix}{i}"), x, c, d)?;
    }
    Ok(x)
}

fn masked_conv(
    g: &mut GraphBuilder,
    name: String,
    src: NodeId,
    c: usize,
    mask: &MaskShape,
    k: usize,
) -> Result<NodeId> {
    let m = render_mask(mask, k)?;
    let conv = g.conv(name, src, c, k, 1, Some(m))?;
    Ok(g.relu(conv))
}

fn tail(g: &mut GraphBuilder, paths: Vec<NodeId>, cfg: &ArchitectureConfig) -> Result<NodeId> {
    let c = cfg.base_channels;
    let cat = g.concat(paths);
    let t0 = relu_conv(g, "tail0".into(), cat, c)?;
    let t1 = relu_conv(g, "tail1".into(), t0, cfg.half_channels())?;
    g.pointwise("tail2".into(), t1, cfg.in_channels)
}

/// Baseline-style path for one mask: for every kernel size, a masked conv,
/// two 1x1 convs, `cdcl_depth + trunk_depth` DCL blocks and a closing 1x1.
fn baseline_paths(
    g: &mut GraphBuilder,
    prefix: &str,
    head: NodeId,
    mask: &MaskShape,
    cfg: &ArchitectureConfig,
    branches: &mut Vec<BranchSpec>,
) -> Result<Vec<NodeId>> {
    let c = cfg.base_channels;
    let depth = cfg.cdcl_depth + cfg.trunk_depth;
    let mut outs = Vec::new();
    for (&k, &d) in cfg.kernel_sizes.iter().zip(&cfg.dilations) {
        let p = format!("{prefix}k{k}.{}", mask.tag());
        let m = masked_conv(g, format!("{p}.masked"), head, c, mask, k)?;
        let x = relu_conv(g, format!("{p}.pw0"), m, c)?;
        let x = relu_conv(g, format!("{p}.pw1"), x, c)?;
        let x = dcl_stack(g, &format!("{p}.dcl"), x, c, d, depth)?;
        outs.push(relu_conv(g, format!("{p}.out"), x, c)?);
        branches.push(BranchSpec {
            label: p,
            mask: mask.clone(),
            kernel: k,
            dilation: d,
        });
    }
    Ok(outs)
}

/// Centre-masked baseline. `config.masks` is ignored: the baseline always
/// uses the single-spot `o` mask.
pub fn build_apbsn(config: &ArchitectureConfig) -> Result<ModelGraph> {
    config.validate()?;
    let cfg = ArchitectureConfig {
        masks: vec![MaskShape::O],
        ..config.clone()
    };
    let mut g = GraphBuilder::new(cfg.in_channels);
    let input = g.input();
    let head = relu_conv(&mut g, "head".into(), input, cfg.base_channels)?;
    let mut branches = Vec::new();
    let paths = baseline_paths(&mut g, "", head, &MaskShape::O, &cfg, &mut branches)?;
    let out = tail(&mut g, paths, &cfg)?;
    let model = g.finish(ArchKind::Apbsn, cfg, branches, out);
    model.validate()?;
    Ok(model)
}

/// Naive multi-mask stack: an independent baseline (own head included) per
/// mask, all joined only at the tail.
pub fn build_smmbsn(config: &ArchitectureConfig) -> Result<ModelGraph> {
    config.validate()?;
    let mut g = GraphBuilder::new(config.in_channels);
    let mut branches = Vec::new();
    let mut paths = Vec::new();
    for (i, mask) in config.masks.iter().enumerate() {
        let input = g.input();
        let head = relu_conv(&mut g, format!("p{i}.head"), input, config.base_channels)?;
        paths.extend(baseline_paths(
            &mut g,
            &format!("p{i}."),
            head,
            mask,
            config,
            &mut branches,
        )?);
    }
    let out = tail(&mut g, paths, config)?;
    let model = g.finish(ArchKind::Smmbsn, config.clone(), branches, out);
    model.validate()?;
    Ok(model)
}

/// Multi-mask network.
///
/// Per (mask, kernel size): masked conv, then in parallel a 1x1 skip and a
/// 1x1 feeding the CDCL; CDCL output and skip are concatenated and fused back
/// to `C`. Branches of one kernel size are concatenated, fused, and run
/// through the trunk DCLs. The size paths meet at the tail.
pub fn build_mmbsn(config: &ArchitectureConfig) -> Result<ModelGraph> {
    config.validate()?;
    let cfg = config;
    let c = cfg.base_channels;
    let mut g = GraphBuilder::new(cfg.in_channels);
    let input = g.input();
    let head = relu_conv(&mut g, "head".into(), input, c)?;
    let mut branches = Vec::new();
    let mut size_paths = Vec::new();
    for (&k, &d) in cfg.kernel_sizes.iter().zip(&cfg.dilations) {
        let mut outs = Vec::new();
        for mask in &cfg.masks {
            let p = format!("k{k}.{}", mask.tag());
            let m = masked_conv(&mut g, format!("{p}.masked"), head, c, mask, k)?;
            let skip = relu_conv(&mut g, format!("{p}.skip"), m, c)?;
            let pre = relu_conv(&mut g, format!("{p}.pre"), m, c)?;
            let cdcl = dcl_stack(&mut g, &format!("{p}.cdcl"), pre, c, d, cfg.cdcl_depth)?;
            let cat = g.concat(vec![cdcl, skip]);
            outs.push(relu_conv(&mut g, format!("{p}.fuse"), cat, c)?);
            branches.push(BranchSpec {
                label: p,
                mask: mask.clone(),
                kernel: k,
                dilation: d,
            });
        }
        let cat = g.concat(outs);
        let fused = relu_conv(&mut g, format!("k{k}.fuse"), cat, c)?;
        size_paths.push(dcl_stack(
            &mut g,
            &format!("k{k}.trunk"),
            fused,
            c,
            d,
            cfg.trunk_depth,
        )?);
    }
    let out = tail(&mut g, size_paths, cfg)?;
    let model = g.finish(ArchKind::Mmbsn, cfg.clone(), branches, out);
    model.validate()?;
    Ok(model)
}

/// Dispatches on `kind`; weights are left at zero.
pub fn build(kind: ArchKind, config: &ArchitectureConfig) -> Result<ModelGraph> {
    match kind {
        ArchKind::Apbsn => build_apbsn(config),
        ArchKind::Smmbsn => build_smmbsn(config),
        ArchKind::Mmbsn => build_mmbsn(config),
    }
}
