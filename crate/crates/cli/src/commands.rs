use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use mmbsn::io::{load_png, quantize, save_png};
use mmbsn::mask::{
    empirical_exclusion_with, exclusion_set, intersect_all, render_mask, ExclusionSet, ProbeConfig,
};
use mmbsn::model::{build, ArchitectureConfig, Checkpoint, ModelGraph};
use mmbsn::noise::{analyze_regions, default_threshold, gen_clean, gen_correlated_noise, psnr, ssim, NoiseSpec};
use mmbsn::train::{denoise as run_denoise, init_checkpoint, train_step, train_with, NoisyDataset, RefineOptions, TrainingConfig};
use mmbsn::{conv2d, tensor, ConvParams, PdStride, Shape4, Tensor4};

use crate::error::CliError;
use crate::{AnalyzeArgs, BenchArgs, CountArgs, DenoiseArgs, GenArgs, TrainArgs, VerifyArgs};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<Tensor4, CliError> {
    load_png(path).map_err(|e| io_err(path, e))
}

fn save(path: &Path, img: &Tensor4) -> Result<(), CliError> {
    save_png(path, img).map_err(|e| io_err(path, e))
}

fn resolved_train_config(a: &TrainArgs) -> Result<TrainingConfig, CliError> {
    let mut cfg = match (&a.config, a.full) {
        (Some(path), _) => TrainingConfig::load(path).map_err(|e| match e {
            mmbsn::Error::Io(e) => io_err(path, e),
            other => CliError::from(other),
        })?,
        (None, true) => TrainingConfig::default(),
        (None, false) => {
            let base = TrainingConfig::default();
            TrainingConfig::toy(base.arch, base.architecture.masks)
        }
    };
    if let Some(v) = a.arch {
        cfg.arch = v;
    }
    if let Some(v) = &a.masks {
        cfg.architecture.masks = v.clone();
    }
    if let Some(v) = a.channels {
        cfg.architecture.base_channels = v;
    }
    macro_rules! set {
        ($($f:ident),*) => {$(if let Some(v) = a.$f { cfg.$f = v; })*};
    }
    set!(epochs, steps_per_epoch, batch, lr, crop, pd_train, pd_test, seed);
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let cfg = resolved_train_config(&a)?;
    eprintln!("# resolved config\n{}", cfg.to_toml());
    eprintln!("seed = {}", cfg.seed);
    let data = NoisyDataset::from_dir(&a.data).map_err(|e| match e {
        mmbsn::Error::EmptyDataset => CliError::Usage(format!("{}: no PNG files", a.data.display())),
        other => io_err(&a.data, other),
    })?;
    eprintln!("{} training images from {}", data.len(), a.data.display());
    println!("epoch,lr,mean_loss");
    let out = a.out.clone();
    let started = Instant::now();
    let outcome = train_with(&cfg, &data, |r, ck| {
        println!("{},{:e},{:.6}", r.epoch, r.lr, r.mean_loss);
        ck.save(&out)
    })?;
    if cfg.epochs == 0 {
        outcome.checkpoint.save(&out)?;
    }
    eprintln!(
        "trained {} steps in {:.1}s, checkpoint {}",
        outcome.losses.len(),
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

pub fn denoise(a: DenoiseArgs) -> Result<(), CliError> {
    let ck = Checkpoint::load(&a.model).map_err(|e| io_err(&a.model, e))?;
    let s = PdStride::new(a.pd_test)?;
    let refine = !a.no_refine;
    if !(0.0..=1.0).contains(&a.refine_p) {
        return Err(CliError::Usage(format!("--refine-p must be in [0,1], got {}", a.refine_p)));
    }
    eprintln!(
        "arch={} masks={} pd_test={} refine={} refine_p={} refine_T={} seed={}",
        ck.model.kind(),
        mask_tags(ck.model.config()),
        a.pd_test,
        refine,
        a.refine_p,
        a.refine_t,
        a.seed
    );
    let noisy = load(&a.input)?;
    let opts = refine.then_some(RefineOptions {
        p: a.refine_p,
        passes: a.refine_t,
        seed: a.seed,
    });
    let out = run_denoise(&ck.model, &noisy, s, opts)?;
    save(&a.output, &out)?;
    let saved = quantize(&out);
    println!("metric,value");
    println!("psnr_vs_input,{:.4}", psnr(&saved, &noisy, 1.0)?);
    if let Some(path) = &a.clean {
        let clean = load(path)?;
        println!("psnr_noisy,{:.4}", psnr(&noisy, &clean, 1.0)?);
        println!("psnr,{:.4}", psnr(&saved, &clean, 1.0)?);
        if clean.height() >= 11 && clean.width() >= 11 {
            println!("ssim,{:.6}", ssim(&saved, &clean)?);
        }
    }
    eprintln!("wrote {}", a.output.display());
    Ok(())
}

fn mask_tags(cfg: &ArchitectureConfig) -> String {
    cfg.masks.iter().map(|m| m.tag()).collect::<Vec<_>>().join(",")
}

fn unmask_center(model: &mut ModelGraph) {
    for p in model.params_mut() {
        if let Some(m) = p.mask.as_mut() {
            m.unmask((0, 0));
        }
    }
}

fn diff_line(theory: &ExclusionSet, measured: &ExclusionSet) -> String {
    let d = theory.symmetric_difference(measured);
    let mut s = String::new();
    for (i, (r, c)) in d.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let side = if theory.contains((*r, *c)) { "theory-only" } else { "measured-only" };
        let _ = write!(s, "({r},{c}) {side}");
    }
    s
}

pub fn verify(a: VerifyArgs) -> Result<(), CliError> {
    let cfg = a.arch.config(8);
    eprintln!(
        "arch={} masks={} channels={} kernel_sizes={:?} dilations={:?} radius={} trials={} seed={}",
        a.arch.arch,
        mask_tags(&cfg),
        cfg.base_channels,
        cfg.kernel_sizes,
        cfg.dilations,
        a.radius,
        a.trials,
        a.seed
    );
    if a.radius < 0 {
        return Err(CliError::Usage("--radius must be non-negative".into()));
    }
    let probe = ProbeConfig {
        trials: a.trials,
        seed: a.seed,
        ..ProbeConfig::default()
    };
    let mut model = build(a.arch.arch, &cfg)?;
    if a.unmask_center {
        unmask_center(&mut model);
    }
    let mut mismatches = Vec::new();
    let mut per_branch = Vec::new();
    for b in model.branches() {
        let theory = exclusion_set(&render_mask(&b.mask, b.kernel)?, b.dilation, a.radius);
        let single_cfg = ArchitectureConfig {
            masks: vec![b.mask.clone()],
            kernel_sizes: vec![b.kernel],
            dilations: vec![b.dilation],
            ..cfg.clone()
        };
        let mut single = build(a.arch.arch, &single_cfg)?;
        if a.unmask_center {
            unmask_center(&mut single);
        }
        let measured = empirical_exclusion_with(&single, a.radius, &probe)?;
        println!("branch {}", b.label);
        println!("  theoretical: {theory}");
        println!("  empirical:   {measured}");
        if theory != measured {
            mismatches.push(format!("branch {}: {}", b.label, diff_line(&theory, &measured)));
        }
        per_branch.push(theory);
    }
    let theory = intersect_all(&per_branch)
        .ok_or_else(|| CliError::Usage("model has no masked branches".into()))?;
    let measured = empirical_exclusion_with(&model, a.radius, &probe)?;
    println!("combined");
    println!("  theoretical: {theory}");
    println!("  empirical:   {measured}");
    println!("excluded: {measured}");
    if theory != measured {
        mismatches.push(format!("combined: {}", diff_line(&theory, &measured)));
    }
    if mismatches.is_empty() {
        eprintln!("blind spot verified: {} offsets excluded", measured.len());
        Ok(())
    } else {
        Err(CliError::Verify(format!(
            "exclusion mismatch\n{}",
            mismatches.join("\n")
        )))
    }
}

pub fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let x = load(&a.input)?;
    let y = load(&a.reference)?;
    let residual = tensor::sub(&x, &y)?;
    let threshold = match a.threshold {
        Some(t) => t,
        None => default_threshold(&residual)?,
    };
    eprintln!(
        "input={} reference={} threshold={threshold:.6}{}",
        a.input.display(),
        a.reference.display(),
        if a.threshold.is_none() { " (robust default)" } else { "" }
    );
    let stats = analyze_regions(&residual, threshold)?;
    let csv = stats.to_csv();
    match &a.output {
        Some(path) => fs::write(path, &csv).map_err(|e| io_err(path, e))?,
        None => print!("{csv}"),
    }
    eprintln!(
        "{} components over {} noisy pixels; large (>25 px) fraction {:.4}",
        stats.areas.len(),
        stats.noisy_pixels(),
        stats.large_fraction
    );
    Ok(())
}

pub fn count(a: CountArgs) -> Result<(), CliError> {
    let cfg = a.arch.config(128);
    eprintln!(
        "arch={} masks={} channels={} cdcl_depth={} trunk_depth={} kernel_sizes={:?} dilations={:?}",
        a.arch.arch,
        mask_tags(&cfg),
        cfg.base_channels,
        cfg.cdcl_depth,
        cfg.trunk_depth,
        cfg.kernel_sizes,
        cfg.dilations
    );
    let model = build(a.arch.arch, &cfg)?;
    println!("layer,params");
    for (name, p) in model.layer_names().iter().zip(model.params()) {
        println!("{name},{}", p.num_params());
    }
    let total = model.count_params();
    println!("total,{total}");
    if let Some(expect) = a.expect {
        let rel = (total as f64 - expect).abs() / expect;
        let verdict = if rel <= a.tol { "within" } else { "outside" };
        eprintln!(
            "total {total} vs expected {expect:.0}: {:+.2}% ({verdict} {:.0}%)",
            100.0 * (total as f64 / expect - 1.0),
            100.0 * a.tol
        );
        if rel > a.tol {
            return Err(CliError::Verify(format!("parameter count {total} outside tolerance")));
        }
    }
    Ok(())
}

pub fn gen(a: GenArgs) -> Result<(), CliError> {
    eprintln!(
        "pattern={} noise={} support={} sigma={} size={} count={} seed={}",
        a.pattern.tag(),
        a.noise.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("+"),
        a.support,
        a.sigma,
        a.size,
        a.count,
        a.seed
    );
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let dirs = if a.count == 1 {
        (a.out_dir.clone(), a.out_dir.clone())
    } else {
        (a.out_dir.join("clean"), a.out_dir.join("noisy"))
    };
    for d in [&dirs.0, &dirs.1] {
        fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    println!("file,psnr");
    for i in 0..a.count as u64 {
        let seed = a.seed.wrapping_add(i);
        let clean = gen_clean(a.pattern, a.size, seed)?;
        let spec = NoiseSpec {
            sigma: a.sigma,
            kernels: a.noise.clone(),
            support: a.support,
            seed: seed ^ 0x6e6f_6973_65,
        };
        let noise = gen_correlated_noise(&spec, a.size)?;
        let noisy = tensor::add(&clean, &noise)?.clamp(0.0, 1.0);
        let (cname, nname) = if a.count == 1 {
            ("clean.png".to_string(), "noisy.png".to_string())
        } else {
            (format!("{i:04}.png"), format!("{i:04}.png"))
        };
        let (cp, np) = (dirs.0.join(cname), dirs.1.join(nname));
        save(&cp, &clean)?;
        save(&np, &noisy)?;
        let value = psnr(&quantize(&noisy), &quantize(&clean), 1.0)?;
        println!("{},{value:.4}", np.display());
    }
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    eprintln!(
        "size={} channels={} iters={} seed={} threads={}",
        a.size,
        a.channels,
        a.iters,
        a.seed,
        rayon::current_num_threads()
    );
    if a.iters == 0 || a.size < 8 || a.channels < 2 {
        return Err(CliError::Usage("need --iters >= 1, --size >= 8, --channels >= 2".into()));
    }
    let c = a.channels;
    let x = Tensor4::from_fn(Shape4::new(1, c, a.size, a.size), |_, ch, y, x| {
        ((ch * 31 + y * 7 + x * 13) % 17) as f64 / 17.0
    });
    println!("kernel,dilation,seconds_per_call,mpixel_tap_per_s,gmac_per_s");
    for (k, d) in [(3, 1), (3, 2), (5, 3)] {
        let mut p = ConvParams::new(c, c, k, d, None)?;
        for (i, w) in p.weight.data_mut().iter_mut().enumerate() {
            *w = ((i % 7) as f64 - 3.0) * 0.01;
        }
        conv2d(&x, &p)?;
        let t = Instant::now();
        for _ in 0..a.iters {
            std::hint::black_box(conv2d(&x, &p)?);
        }
        let secs = t.elapsed().as_secs_f64() / a.iters as f64;
        let pixel_taps = (a.size * a.size * k * k) as f64;
        let macs = pixel_taps * (c * c) as f64;
        println!(
            "{k},{d},{secs:.6},{:.2},{:.3}",
            pixel_taps / secs / 1e6,
            macs / secs / 1e9
        );
    }

    let mut cfg = TrainingConfig::toy(mmbsn::model::ArchKind::Mmbsn, TrainingConfig::default().architecture.masks);
    cfg.architecture.base_channels = c;
    cfg.seed = a.seed;
    let mut ck = init_checkpoint(&cfg)?;
    let mut opt = ck.optimizer.take().expect("fresh optimizer");
    let batch = Tensor4::from_fn(Shape4::new(cfg.batch, 3, cfg.crop, cfg.crop), |b, ch, y, x| {
        ((b * 5 + ch * 3 + y * 11 + x * 7) % 23) as f64 / 23.0
    });
    let s = PdStride::new(cfg.pd_train)?;
    train_step(&mut ck.model, &mut opt, &batch, s)?;
    let t = Instant::now();
    for _ in 0..a.iters {
        train_step(&mut ck.model, &mut opt, &batch, s)?;
    }
    let secs = t.elapsed().as_secs_f64() / a.iters as f64;
    println!();
    println!("arch,batch,crop,pd,seconds_per_step");
    println!("mmbsn,{},{},{},{secs:.6}", cfg.batch, cfg.crop, cfg.pd_train);
    Ok(())
}
