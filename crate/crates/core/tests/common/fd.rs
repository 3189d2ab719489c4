//! Finite-difference helpers and a small fully-featured model.

use mmbsn::mask::MaskShape;
use mmbsn::model::{build, ArchKind, ArchitectureConfig, ModelGraph};
use mmbsn::{Shape4, Tensor4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

pub fn random(shape: Shape4, rng: &mut ChaCha8Rng) -> Tensor4 {
    Tensor4::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
}

pub fn dot(a: &Tensor4, b: &Tensor4) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Relative error with a small absolute floor so exact zeros compare sanely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Central difference of `f` in coordinate `i` of `x`.
pub fn central(x: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + H;
    let up = f(x);
    x[i] = orig - H;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * H)
}

pub fn sample(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= count {
        (0..n).collect()
    } else {
        (0..count).map(|_| rng.random_range(0..n)).collect()
    }
}

pub fn toy_model(kind: ArchKind, seed: u64) -> ModelGraph {
    let cfg = ArchitectureConfig {
        base_channels: 3,
        masks: vec![MaskShape::Slash, MaskShape::Backslash],
        cdcl_depth: 1,
        trunk_depth: 1,
        ..ArchitectureConfig::default()
    };
    let mut m = build(kind, &cfg).unwrap();
    m.init_weights(seed);
    // Biases bounded away from zero: a zero bias over an all-zero input
    // column puts the next ReLU exactly on its kink.
    for (i, p) in m.params_mut().iter_mut().enumerate() {
        for (j, b) in p.bias.iter_mut().enumerate() {
            *b = 0.05 * (((i * 7 + j * 3) % 5) as f64 - 1.5);
        }
    }
    m
}

/// Worst relative error of a model's input and parameter gradients over 40
/// input and 80 parameter samples, with the number of components checked.
/// Masked taps must have an exactly zero gradient.
pub fn model_fd(m: &ModelGraph, rng: &mut ChaCha8Rng) -> (f64, usize) {
    let x = random(Shape4::new(1, 3, 9, 9), rng);
    let g = random(Shape4::new(1, 3, 9, 9), rng);
    let (_, tape) = m.forward_with_tape(&x).unwrap();
    let grads = m.backward(&tape, &g).unwrap();
    let objective = |mm: &ModelGraph, xx: &Tensor4| dot(&mm.forward(xx).unwrap(), &g);

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut xd = x.data().to_vec();
    for i in sample(xd.len(), 40, rng) {
        let num = central(&mut xd, i, |v| {
            objective(m, &Tensor4::from_vec(x.shape(), v.to_vec()).unwrap())
        });
        worst = worst.max(rel_err(grads.input.data()[i], num));
        checked += 1;
    }
    for _ in 0..80 {
        let l = rng.random_range(0..m.params().len());
        let n = m.params()[l].num_params();
        let i = rng.random_range(0..n);
        let wlen = m.params()[l].weight.data().len();
        let analytic = if i < wlen {
            grads.params[l].weight.data()[i]
        } else {
            grads.params[l].bias[i - wlen]
        };
        let perturbed = |delta: f64| {
            let mut mm = m.clone();
            let p = &mut mm.params_mut()[l];
            if i < wlen {
                p.weight.data_mut()[i] += delta;
            } else {
                p.bias[i - wlen] += delta;
            }
            objective(&mm, &x)
        };
        let num = (perturbed(H) - perturbed(-H)) / (2.0 * H);
        let masked = m.params()[l]
            .mask
            .as_ref()
            .is_some_and(|_| i < wlen && m.params()[l].weight.data()[i] == 0.0);
        if masked {
            assert_eq!(analytic, 0.0);
        } else {
            worst = worst.max(rel_err(analytic, num));
        }
        checked += 1;
    }
    (worst, checked)
}
