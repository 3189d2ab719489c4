use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mmbsn::mask::{render_mask, MaskShape};
use mmbsn::model::ArchKind;
use mmbsn::pd::{pd, pd_inv, PdStride};
use mmbsn::train::{init_checkpoint, train_step, TrainingConfig};
use mmbsn::{conv2d, conv2d_backward};
use mmbsn_bench::{conv, feature_map};

fn conv_forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv2d");
    let x = feature_map(1, 16, 64);
    for (k, d) in [(1, 1), (3, 1), (3, 2), (5, 3)] {
        let p = conv(16, k, d);
        // pixel-taps per call
        group.throughput(Throughput::Elements((64 * 64 * k * k) as u64));
        group.bench_with_input(BenchmarkId::new("k_d", format!("{k}_{d}")), &p, |b, p| {
            b.iter(|| conv2d(&x, p).unwrap())
        });
    }
    let mut masked = conv(16, 5, 1);
    masked.mask = Some(render_mask(&MaskShape::Square, 5).unwrap());
    masked.apply_mask();
    group.throughput(Throughput::Elements((64 * 64 * 16) as u64));
    group.bench_function("masked_square_k5", |b| b.iter(|| conv2d(&x, &masked).unwrap()));
    group.finish();
}

fn conv_backward(c: &mut Criterion) {
    let x = feature_map(1, 16, 64);
    let p = conv(16, 3, 2);
    let g = conv2d(&x, &p).unwrap();
    c.bench_function("conv2d_backward/k3_d2", |b| {
        b.iter(|| conv2d_backward(&g, &x, &p).unwrap())
    });
}

fn pixel_shuffle(c: &mut Criterion) {
    let mut group = c.benchmark_group("pd");
    let x = feature_map(1, 3, 240);
    for s in [2, 5] {
        let st = PdStride::new(s).unwrap();
        group.bench_with_input(BenchmarkId::new("roundtrip", s), &st, |b, &st| {
            b.iter(|| pd_inv(&pd(&x, st).unwrap(), st).unwrap())
        });
    }
    group.finish();
}

fn training_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_step");
    group.sample_size(10);
    for arch in [ArchKind::Apbsn, ArchKind::Mmbsn] {
        let cfg = TrainingConfig {
            pd_train: 2,
            ..TrainingConfig::toy(arch, vec![MaskShape::Slash, MaskShape::Backslash])
        };
        let mut ck = init_checkpoint(&cfg).unwrap();
        let mut opt = ck.optimizer.take().unwrap();
        let batch = feature_map(cfg.batch, 3, cfg.crop);
        let s = PdStride::new(cfg.pd_train).unwrap();
        group.bench_function(arch.tag(), |b| {
            b.iter(|| train_step(&mut ck.model, &mut opt, &batch, s).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, conv_forward, conv_backward, pixel_shuffle, training_step);
criterion_main!(benches);
