use std::path::Path;
use std::process::{Command, Output};

fn mmbsn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmbsn"))
        .args(args)
        .env("MMBSN_THREADS", "1")
        .output()
        .expect("spawn mmbsn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_documents_every_subcommand_and_flag() {
    let top = mmbsn(&["--help"]);
    assert!(top.status.success());
    let text = stdout(&top);
    let subs = [
        ("train", &["--data", "--out", "--config", "--full", "--pd-train", "--pd-test", "--seed"][..]),
        ("denoise", &["--pd-test", "--refine", "--no-refine", "--refine-p", "--refine-T", "--seed"]),
        ("verify-blindspot", &["--arch", "--masks", "--radius", "--trials", "--seed"]),
        ("analyze-noise", &["--input", "--reference", "--threshold", "--output"]),
        ("count-params", &["--arch", "--masks", "--expect", "--tol"]),
        ("gen-synthetic", &["--pattern", "--noise", "--sigma", "--support", "--seed"]),
        ("bench", &["--size", "--channels", "--iters"]),
    ];
    for (sub, flags) in subs {
        assert!(text.contains(sub), "{sub} missing from top-level help");
        let h = mmbsn(&[sub, "--help"]);
        assert!(h.status.success());
        let ht = stdout(&h);
        for f in flags {
            assert!(ht.contains(f), "{sub} --help lacks {f}");
        }
    }
    let h = stdout(&mmbsn(&["count-params", "--help"]));
    assert!(h.contains("[default: 0.1]") && h.contains("[default: mmbsn]"));
    assert!(!stdout(&mmbsn(&["verify-blindspot", "--help"])).contains("unmask"));
}

#[test]
fn unknown_flags_and_values_are_usage_errors() {
    assert_eq!(mmbsn(&["count-params", "--bogus"]).status.code(), Some(2));
    assert_eq!(mmbsn(&["count-params", "--masks", "triangle"]).status.code(), Some(2));
    assert_eq!(mmbsn(&["count-params", "--arch", "unet"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_mmbsn"))
        .args(["count-params"])
        .env("MMBSN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn count_params_against_targets() {
    let o = mmbsn(&["count-params", "--arch", "mmbsn", "--masks", "slash,backslash", "--expect", "5.3e6", "--tol", "0.10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("layer,params\n"));
    let total: usize = out
        .lines()
        .find_map(|l| l.strip_prefix("total,"))
        .unwrap()
        .parse()
        .unwrap();
    let per_layer: usize = out
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with("total,"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(per_layer, total);

    let o = mmbsn(&["count-params", "--arch", "apbsn", "--expect", "5.3e6", "--tol", "0.10"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mmbsn(&["count-params", "--arch", "apbsn", "--expect", "3.7e6"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn verify_blindspot_reports_and_fails_on_leaks() {
    let o = mmbsn(&["verify-blindspot", "--masks", "o", "--radius", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("excluded: {"));
    assert!(out.contains("(0,0)"));

    let o = mmbsn(&["verify-blindspot", "--masks", "hbar", "--kernel-sizes", "5", "--dilations", "3", "--radius", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let excluded = stdout(&o).lines().find(|l| l.starts_with("excluded:")).unwrap().to_string();
    for c in -6..=6 {
        assert!(excluded.contains(&format!("(0,{c})")), "row 0 column {c} missing");
    }

    let o = mmbsn(&["verify-blindspot", "--masks", "o", "--unmask-center"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(0,0) theory-only"));
}

#[test]
fn gen_synthetic_writes_pair_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let d = dir.path().join(sub);
        let o = mmbsn(&[
            "gen-synthetic", "--pattern", "checker", "--noise", "slash", "--sigma", "0.2", "--seed", "4",
            "--out-dir", p(&d),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (d, stdout(&o))
    };
    let (a, out) = run("a");
    let (b, _) = run("b");
    let psnr: f64 = out.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((10.0..20.0).contains(&psnr), "{psnr}");
    for f in ["clean.png", "noisy.png"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let clean = mmbsn::io::load_png(a.join("clean.png")).unwrap();
    let noisy = mmbsn::io::load_png(a.join("noisy.png")).unwrap();
    let measured = mmbsn::noise::psnr(&noisy, &clean, 1.0).unwrap();
    assert!((measured - psnr).abs() < 1e-3);
}

#[test]
fn train_denoise_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("set");
    let o = mmbsn(&["gen-synthetic", "--count", "3", "--size", "32", "--pattern", "gradient", "--out-dir", p(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let train = |name: &str| {
        let ck = dir.path().join(name);
        let o = mmbsn(&[
            "train", "--data", p(&data.join("noisy")), "--out", p(&ck), "--channels", "4", "--epochs", "2",
            "--steps-per-epoch", "2", "--batch", "2", "--crop", "16", "--pd-train", "2", "--seed", "9",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stderr(&o).contains("seed = 9"));
        assert_eq!(stdout(&o).lines().count(), 3);
        ck
    };
    let (a, b) = (train("a.ckpt"), train("b.ckpt"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let out = dir.path().join("out.png");
    let o = mmbsn(&[
        "denoise", "--model", p(&a), "--input", p(&data.join("noisy/0000.png")), "--clean",
        p(&data.join("clean/0000.png")), "--output", p(&out), "--no-refine",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.contains("psnr_vs_input,") && report.contains("psnr,") && report.contains("ssim,"));
    assert!(out.exists());

    let csv = dir.path().join("regions.csv");
    let o = mmbsn(&[
        "analyze-noise", "--input", p(&data.join("noisy/0000.png")), "--reference",
        p(&data.join("clean/0000.png")), "--threshold", "0.2", "--output", p(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("component_area,count\n"));
    assert!(text.contains("large_fraction="));
}

#[test]
fn missing_files_exit_with_io_code() {
    let o = mmbsn(&["denoise", "--model", "/nonexistent/m.ckpt", "--input", "/nonexistent/x.png"]);
    assert_eq!(o.status.code(), Some(3));
    let o = mmbsn(&["analyze-noise", "--input", "/nonexistent/a.png", "--reference", "/nonexistent/b.png"]);
    assert_eq!(o.status.code(), Some(3));
}
