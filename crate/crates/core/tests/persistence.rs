use std::fs;

use proptest::prelude::*;
use rdcnn::persistence::{
    read_features, read_model, read_raw_images, write_features, write_model, write_raw_images, RawImages,
};
use rdcnn::{Error, FeatureMatrix, SvmModel};
use tempfile::tempdir;

fn finite_f32() -> impl Strategy<Value = f32> {
    prop_oneof![
        -1.0f32..=1.0,
        Just(-0.0f32),
        Just(f32::MIN_POSITIVE / 4.0),
        Just(f32::MAX),
    ]
}

fn feature_matrix() -> impl Strategy<Value = FeatureMatrix> {
    (0usize..6, 1usize..9, any::<bool>()).prop_flat_map(|(n, m, labeled)| {
        (
            prop::collection::vec(finite_f32(), n * m),
            prop::collection::vec(0u32..1000, n),
        )
            .prop_map(move |(values, labels)| {
                FeatureMatrix::new(n, m, values, labeled.then_some(labels)).unwrap()
            })
    })
}

fn bits(fm: &FeatureMatrix) -> Vec<u32> {
    fm.values().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_round_trip(fm in feature_matrix()) {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.rdcf");
        write_features(&fm, &path).unwrap();
        let back = read_features(&path).unwrap();
        prop_assert_eq!(back.n_samples(), fm.n_samples());
        prop_assert_eq!(back.n_features(), fm.n_features());
        prop_assert_eq!(bits(&back), bits(&fm));
        prop_assert_eq!(back.labels(), fm.labels());
        let expected = 32 + 4 * fm.values().len() + fm.labels().map_or(0, |l| 4 * l.len());
        prop_assert_eq!(fs::metadata(&path).unwrap().len() as usize, expected);
    }

    #[test]
    fn model_round_trip(
        (classes, m, weights) in (1usize..5, 1usize..6).prop_flat_map(|(c, m)| (
            prop::collection::btree_set(0u32..50, c).prop_map(|s| s.into_iter().collect::<Vec<_>>()),
            Just(m),
            prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), c * (m + 1)),
        )),
        bias in prop_oneof![Just(1.0f64), 0.0f64..10.0],
    ) {
        let c = classes.len();
        let weights = weights[..c * (m + 1)].to_vec();
        let model = SvmModel::new(classes, m, bias, weights).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.rdsm");
        write_model(&model, &path).unwrap();
        let back = read_model(&path).unwrap();
        prop_assert_eq!(back.classes(), model.classes());
        prop_assert_eq!(back.bias().to_bits(), model.bias().to_bits());
        let wb: Vec<u64> = back.weights().iter().map(|v| v.to_bits()).collect();
        let wm: Vec<u64> = model.weights().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(wb, wm);
    }

    #[test]
    fn raw_images_round_trip(
        (count, c, h, w) in (0usize..4, 1usize..4, 1usize..6, 1usize..6),
        seed in any::<u8>(),
        labeled in any::<bool>(),
    ) {
        let len = count * c * h * w;
        let images = RawImages {
            channels: c,
            height: h,
            width: w,
            pixels: (0..len).map(|i| (i as u8).wrapping_mul(seed | 1)).collect(),
            labels: labeled.then(|| (0..count as u32).collect()),
        };
        let dir = tempdir().unwrap();
        let path = dir.path().join("i.rdim");
        write_raw_images(&images, &path).unwrap();
        prop_assert_eq!(read_raw_images(&path).unwrap(), images);
    }
}

#[test]
fn empty_and_single_sample_files() {
    let dir = tempdir().unwrap();
    for n in [0, 1] {
        let fm = FeatureMatrix::new(n, 3, vec![0.5; n * 3], Some(vec![2; n])).unwrap();
        let path = dir.path().join(format!("{n}.rdcf"));
        write_features(&fm, &path).unwrap();
        assert_eq!(read_features(&path).unwrap(), fm);
    }
}

#[test]
fn damaged_files_are_rejected() {
    let dir = tempdir().unwrap();
    let fm = FeatureMatrix::new(2, 2, vec![0.1, 0.2, 0.3, 0.4], Some(vec![0, 1])).unwrap();
    let path = dir.path().join("f.rdcf");
    write_features(&fm, &path).unwrap();
    let good = fs::read(&path).unwrap();

    let mut bad = good.clone();
    bad[0] = b'X';
    fs::write(&path, &bad).unwrap();
    assert!(matches!(read_features(&path), Err(Error::CorruptHeader { .. })));

    let mut bad = good.clone();
    bad[4] = 9;
    fs::write(&path, &bad).unwrap();
    assert!(matches!(read_features(&path), Err(Error::UnsupportedVersion { version: 9, .. })));

    fs::write(&path, &good[..good.len() - 1]).unwrap();
    assert!(matches!(read_features(&path), Err(Error::SizeMismatch { .. })));

    fs::write(&path, &good[..10]).unwrap();
    assert!(read_features(&path).is_err());

    let mut bad = good.clone();
    let n = bad.len();
    bad[n - 1] = 0x80;
    fs::write(&path, &bad).unwrap();
    assert!(matches!(read_features(&path), Err(Error::Decode { .. })));

    assert!(matches!(read_features(&dir.path().join("missing")), Err(Error::Io { .. })));
}
