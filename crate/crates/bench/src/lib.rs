//! Deterministic fixtures shared by the benchmarks in `benches/`.

pub use mmbsn::{ConvParams, Shape4, Tensor4};

/// Smooth-ish deterministic feature map, values in [0, 1).
pub fn feature_map(batch: usize, channels: usize, size: usize) -> Tensor4 {
    Tensor4::from_fn(Shape4::new(batch, channels, size, size), |b, c, y, x| {
        ((b * 5 + c * 31 + y * 7 + x * 13) % 17) as f64 / 17.0
    })
}

/// A `c -> c` convolution with small fixed weights.
pub fn conv(c: usize, k: usize, dilation: usize) -> ConvParams {
    let mut p = ConvParams::new(c, c, k, dilation, None).expect("valid conv shape");
    for (i, w) in p.weight.data_mut().iter_mut().enumerate() {
        *w = ((i % 7) as f64 - 3.0) * 0.01;
    }
    p
}
