use mmbsn::pd::{crop, pad_to_multiple, pd, pd_inv, random_replace_refine, PdStride};
use mmbsn::{Shape4, Tensor4};
use proptest::prelude::*;

fn stride(s: usize) -> PdStride {
    PdStride::new(s).unwrap()
}

/// Index-arithmetic oracle: mosaic coordinates of image pixel (y, x).
fn mosaic_pos(y: usize, x: usize, h: usize, w: usize, s: usize) -> (usize, usize) {
    ((y % s) * (h / s) + y / s, (x % s) * (w / s) + x / s)
}

#[test]
fn four_by_four_top_left_subimage() {
    let x = Tensor4::from_fn(Shape4::new(1, 1, 4, 4), |_, _, y, x| (y * 4 + x) as f64);
    let m = pd(&x, stride(2)).unwrap();
    let tl: Vec<f64> = [(0, 0), (0, 1), (1, 0), (1, 1)]
        .iter()
        .map(|&(y, x)| m.get(0, 0, y, x))
        .collect();
    assert_eq!(tl, vec![0.0, 2.0, 8.0, 10.0]);
}

#[test]
fn mosaic_origin_maps_to_image_origin() {
    let mut m = Tensor4::zeros(Shape4::new(1, 1, 6, 6));
    m.set(0, 0, 0, 0, 1.0);
    let img = pd_inv(&m, stride(2)).unwrap();
    assert_eq!(img.get(0, 0, 0, 0), 1.0);
    assert_eq!(img.data().iter().filter(|&&v| v != 0.0).count(), 1);
}

#[test]
fn non_divisible_sizes_are_rejected_but_padding_fixes_them() {
    let x = Tensor4::zeros(Shape4::new(1, 1, 7, 9));
    assert!(pd(&x, stride(2)).is_err());
    let p = pad_to_multiple(&x, 5);
    assert_eq!((p.height(), p.width()), (10, 10));
    assert_eq!(crop(&pd_inv(&pd(&p, stride(5)).unwrap(), stride(5)).unwrap(), 7, 9), x);
    assert!(PdStride::new(0).is_err());
}

fn image_strategy() -> impl Strategy<Value = (Tensor4, usize)> {
    (prop::sample::select(vec![1usize, 2, 5]), 1usize..4, 1usize..5, 1usize..5, 1usize..3).prop_flat_map(
        |(s, c, hq, wq, b)| {
            let shape = Shape4::new(b, c, hq * s, wq * s);
            proptest::collection::vec(-1.0f64..1.0, shape.len())
                .prop_map(move |data| (Tensor4::from_vec(shape, data).unwrap(), s))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn roundtrip_is_exact((x, s) in image_strategy()) {
        let back = pd_inv(&pd(&x, stride(s)).unwrap(), stride(s)).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn pd_is_a_permutation((x, s) in image_strategy()) {
        let mut a = x.data().to_vec();
        let mut b = pd(&x, stride(s)).unwrap().into_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn matches_index_oracle(hq in 1usize..6, wq in 1usize..6, s in 1usize..5, y in 0usize..100, x in 0usize..100) {
        let (h, w) = (hq * s, wq * s);
        let (y, x) = (y % h, x % w);
        let mut img = Tensor4::zeros(Shape4::new(1, 1, h, w));
        img.set(0, 0, y, x, 1.0);
        let m = pd(&img, stride(s)).unwrap();
        let (my, mx) = mosaic_pos(y, x, h, w, s);
        prop_assert_eq!(m.get(0, 0, my, mx), 1.0);
    }

    #[test]
    fn stride_two_neighbours_land_apart(hq in 2usize..8, wq in 2usize..8, y in 0usize..100, x in 0usize..100) {
        let (h, w) = (2 * hq, 2 * wq);
        let (y, x) = (y % (h - 1), x % w);
        // Vertically adjacent pixels end up in different sub-images.
        let a = mosaic_pos(y, x, h, w, 2);
        let b = mosaic_pos(y + 1, x, h, w, 2);
        prop_assert_ne!(a.0 / hq, b.0 / hq);
        prop_assert_eq!(a.1, b.1);
    }

    #[test]
    fn refine_stays_in_pass_hull(seed in any::<u64>(), p in 0.0f64..1.0) {
        let shape = Shape4::new(1, 2, 5, 5);
        let den = Tensor4::from_fn(shape, |_, c, y, x| ((c + y * x) % 3) as f64 / 3.0);
        let noisy = Tensor4::from_fn(shape, |_, c, y, x| ((c * 7 + y + x) % 5) as f64 / 5.0);
        let mut passes = Vec::new();
        let out = random_replace_refine(&den, &noisy, p, 4, seed, |t| {
            let o = t.map(|v| 0.5 * v + 0.1);
            passes.push(o.clone());
            Ok(o)
        }).unwrap();
        for i in 0..out.data().len() {
            let lo = passes.iter().map(|t| t.data()[i]).fold(f64::INFINITY, f64::min);
            let hi = passes.iter().map(|t| t.data()[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out.data()[i] >= lo && out.data()[i] <= hi);
        }
    }
}
