//! Property tests for cross-cutting invariants.

use proptest::prelude::*;

use hardnet_core::dataio::split_folds;
use hardnet_core::loss::{composite_loss, LossFlags, LossInputs, LossMap};
use hardnet_core::ops::{avg_pool, bilinear_resize, conv2d, gelu, lawin_attention, LawinParams};
use hardnet_core::postproc::{compress, dice, BinaryMask, CompressMethod};
use hardnet_core::Tensor;

fn finite_tensor(shape: Vec<usize>) -> impl Strategy<Value = Tensor> {
    let numel: usize = shape.iter().product();
    proptest::collection::vec(-8.0f32..8.0, numel)
        .prop_map(move |data| Tensor::new(shape.clone(), data).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_keeps_finite_inputs_finite(
        x in finite_tensor(vec![1, 3, 9, 9]),
        w in finite_tensor(vec![4, 3, 3, 3]),
        stride in 1usize..3,
        pad in 0usize..2,
    ) {
        let y = conv2d(&x, &w, None, stride, pad, 1).unwrap();
        prop_assert!(y.is_finite());
    }

    #[test]
    fn resize_and_pool_stay_finite_and_bounded(
        x in finite_tensor(vec![1, 2, 6, 6]),
        oh in 1usize..15,
        ow in 1usize..15,
    ) {
        let y = bilinear_resize(&x, oh, ow).unwrap();
        prop_assert!(y.is_finite());
        // Interpolation cannot escape the input range.
        let lo = x.data().iter().cloned().fold(f32::MAX, f32::min);
        let hi = x.data().iter().cloned().fold(f32::MIN, f32::max);
        prop_assert!(y.data().iter().all(|&v| v >= lo - 1e-4 && v <= hi + 1e-4));
        let p = avg_pool(&x, 3, 1, 1).unwrap();
        prop_assert!(p.is_finite());
        prop_assert!(gelu(&x).is_finite());
    }

    #[test]
    fn attention_stays_finite(
        x in finite_tensor(vec![1, 4, 8, 8]),
        ratio in 1usize..4,
    ) {
        let params = LawinParams::identity(4, 4);
        let y = lawin_attention(&x, &x, 4, ratio, 2, &params).unwrap();
        prop_assert!(y.is_finite());
    }

    #[test]
    fn flip_equivariance_of_1x1_convs_is_exact(
        x in finite_tensor(vec![1, 3, 5, 7]),
        w in finite_tensor(vec![2, 3, 1, 1]),
    ) {
        // Per-pixel convs commute with spatial flips bit-for-bit; this is
        // what makes un-flipping TTA logits sound.
        let a = conv2d(&x.flip_h(), &w, None, 1, 0, 1).unwrap();
        let b = conv2d(&x, &w, None, 1, 0, 1).unwrap().flip_h();
        prop_assert_eq!(a.data(), b.data());
        let a = conv2d(&x.flip_v(), &w, None, 1, 0, 1).unwrap();
        let b = conv2d(&x, &w, None, 1, 0, 1).unwrap().flip_v();
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn compress_always_lands_in_unit_interval(
        logits in finite_tensor(vec![1, 1, 5, 5]),
    ) {
        for method in [CompressMethod::Sigmoid, CompressMethod::Tanh] {
            let p = compress(&logits, method).unwrap();
            prop_assert!(p.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn dice_is_symmetric_and_reflexive(
        a in proptest::collection::vec(0u8..2, 36),
        b in proptest::collection::vec(0u8..2, 36),
    ) {
        let ma = BinaryMask::new(6, 6, a).unwrap();
        let mb = BinaryMask::new(6, 6, b).unwrap();
        let ab = dice(&ma, &mb).unwrap();
        let ba = dice(&mb, &ma).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(dice(&ma, &ma).unwrap(), 1.0);
    }

    #[test]
    fn fold_assignment_partitions_ids(
        n in 2usize..200,
        k in 2usize..9,
        seed in any::<u64>(),
    ) {
        prop_assume!(k <= n);
        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        let fa = split_folds(&ids, k, seed).unwrap();
        prop_assert_eq!(fa.assignments.len(), n);
        let sizes = fa.fold_sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        let lo = sizes.iter().min().unwrap();
        let hi = sizes.iter().max().unwrap();
        prop_assert!(hi - lo <= 1);
        prop_assert!(fa.assignments.values().all(|&f| f < k));
    }

    #[test]
    fn mutated_netpbm_headers_never_crash_the_reader(
        header in "[P0-9#\\s]{0,12}",
        dims in proptest::collection::vec(0usize..70000, 3),
        payload_len in 0usize..64,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fuzz.pgm");
        let mut bytes = header.into_bytes();
        bytes.extend(format!("{} {}\n{}\n", dims[0], dims[1], dims[2]).into_bytes());
        bytes.extend(std::iter::repeat_n(0x7Fu8, payload_len));
        std::fs::write(&path, &bytes).unwrap();
        // Must return, never panic; almost every case is an error.
        let _ = hardnet_core::dataio::read_mask(&path);
        let _ = hardnet_core::dataio::read_image(&path);
    }
}

#[test]
fn loss_terms_are_invariant_under_quarter_rotations() {
    // On square maps a 90° rotation commutes with the symmetric mean pool,
    // so every loss term is unchanged when all inputs rotate together.
    let side = 12;
    let g = LossMap::from_fn(side, side, |y, x| ((3 * y + x) % 5 == 0) as u8 as f64);
    let o = LossMap::from_fn(side, side, |y, x| ((y * 7 + x * 11) % 13) as f64 * 0.25 - 1.5);
    let b = LossMap::from_fn(side, side, |y, x| ((y * 5 + x * 3) % 9) as f64 * 0.3 - 1.2);
    let rot = |m: &LossMap| {
        LossMap::from_fn(side, side, |y, x| m.data()[(side - 1 - x) * side + y])
    };
    let flags = LossFlags { deep1: true, deep2: false, boundary: true };
    let base = composite_loss(
        &LossInputs {
            main: o.clone(),
            deep1: Some(o.clone()),
            deep2: None,
            boundary: Some(b.clone()),
            gt: g.clone(),
            gt_boundary: None,
        },
        flags,
    )
    .unwrap();
    let rotated = composite_loss(
        &LossInputs {
            main: rot(&o),
            deep1: Some(rot(&o)),
            deep2: None,
            boundary: Some(rot(&b)),
            gt: rot(&g),
            gt_boundary: None,
        },
        flags,
    )
    .unwrap();
    assert!((base.total - rotated.total).abs() < 1e-9);
    assert!((base.main_wbce - rotated.main_wbce).abs() < 1e-9);
    assert!((base.main_wiou - rotated.main_wiou).abs() < 1e-9);
    assert!(
        (base.boundary_bce.unwrap() - rotated.boundary_bce.unwrap()).abs() < 1e-9
    );
}
