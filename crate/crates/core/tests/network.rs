mod common;

use common::{naive_feature, random_image, rng};
use proptest::prelude::*;
use rdcnn::{
    extract_feature, extract_features, extract_features_with_stacks, generate_kernel_stacks, Error,
    ImageTensor, Kernel, KernelStack, NetworkConfig, Normalization,
};

#[test]
fn hand_unrolled_single_block() {
    #[rustfmt::skip]
    let pixels = [
        3.0, 1.0, 4.0, 1.0, 5.0, 9.0,
        2.0, 6.0, 5.0, 3.0, 5.0, 8.0,
        9.0, 7.0, 9.0, 3.0, 2.0, 3.0,
        8.0, 4.0, 6.0, 2.0, 6.0, 4.0,
        3.0, 3.0, 8.0, 3.0, 2.0, 7.0,
        9.0, 5.0, 0.0, 2.0, 8.0, 8.0,
    ];
    #[rustfmt::skip]
    let weights = [
        1.0, 0.0, -1.0,
        0.5, -2.0, 0.5,
        -1.0, 0.0, 1.0,
    ];
    let image = ImageTensor::new(1, 6, 6, pixels.to_vec()).unwrap();
    let stack = KernelStack::new(Kernel::new(1, 3, weights.to_vec()).unwrap(), vec![], None).unwrap();
    let config = NetworkConfig::new(3, 1, 1, 1).with_normalization(Normalization::None);

    let mut signs = [[0.0f64; 4]; 4];
    for (oy, row) in signs.iter_mut().enumerate() {
        for (ox, s) in row.iter_mut().enumerate() {
            let mut sum = 0.0;
            for dy in 0..3 {
                for dx in 0..3 {
                    sum += weights[dy * 3 + dx] as f64 * pixels[(oy + dy) * 6 + ox + dx] as f64;
                }
            }
            *s = if sum >= 0.0 { 1.0 } else { -1.0 };
        }
    }
    let mut gap = 0.0;
    for py in 0..2 {
        for px in 0..2 {
            let pool = (signs[2 * py][2 * px]
                + signs[2 * py][2 * px + 1]
                + signs[2 * py + 1][2 * px]
                + signs[2 * py + 1][2 * px + 1])
                / 4.0;
            gap += pool / 4.0;
        }
    }
    let value = extract_feature(&image, &stack, &config).unwrap();
    assert_eq!(value as f64, gap);
    assert_eq!(naive_feature(&image, &stack, &config), gap);
}

#[test]
fn matches_naive_pipeline_across_configs() {
    let mut r = rng(17);
    for (c, h, w, k, b, bias) in [
        (1, 28, 28, 7, 1, false),
        (3, 32, 32, 5, 2, false),
        (3, 32, 30, 3, 3, true),
        (2, 17, 23, 3, 2, false),
        (1, 9, 9, 1, 3, true),
    ] {
        let config = NetworkConfig::new(k, b, 70, c).with_seed(c as u64 + 10 * k as u64).with_bias(bias);
        let stacks = generate_kernel_stacks(&config).unwrap();
        let images: Vec<_> = (0..3).map(|_| random_image(&mut r, c, h, w)).collect();
        let fm = extract_features_with_stacks(&images, None, &config, &stacks).unwrap();
        for (i, img) in images.iter().enumerate() {
            for (j, stack) in stacks.iter().enumerate() {
                let diff = (fm.get(i, j) as f64 - naive_feature(img, stack, &config)).abs();
                assert!(diff <= 1e-6, "config {k}/{b} image {i} feature {j}: {diff}");
            }
        }
    }
}

#[test]
fn normal_weight_statistics() {
    let config = NetworkConfig::new(7, 3, 7000, 3).with_seed(2024);
    let stacks = generate_kernel_stacks(&config).unwrap();
    let weights: Vec<f64> = stacks.iter().flat_map(|s| s.all_weights()).map(f64::from).collect();
    assert!(weights.len() >= 1_000_000);
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() <= 0.01, "mean {mean}");
    assert!((0.98..=1.02).contains(&var), "variance {var}");
}

#[test]
fn adjacent_seeds_differ() {
    let a = generate_kernel_stacks(&NetworkConfig::new(3, 1, 8, 1).with_seed(41)).unwrap();
    let b = generate_kernel_stacks(&NetworkConfig::new(3, 1, 8, 1).with_seed(42)).unwrap();
    assert!(a.iter().zip(&b).any(|(x, y)| x.all_weights().zip(y.all_weights()).any(|(p, q)| p != q)));
}

#[test]
fn column_independence() {
    let mut r = rng(3);
    let config = NetworkConfig::new(5, 2, 100, 3).with_seed(9);
    let mut stacks = generate_kernel_stacks(&config).unwrap();
    let images: Vec<_> = (0..4).map(|_| random_image(&mut r, 3, 24, 24)).collect();
    let before = extract_features_with_stacks(&images, None, &config, &stacks).unwrap();
    let other = KernelStack::generate(&config.clone().with_seed(1000), 0);
    for j in [0, 63, 64, 99] {
        stacks[j] = other.clone();
    }
    let after = extract_features_with_stacks(&images, None, &config, &stacks).unwrap();
    for j in (0..100).filter(|j| ![0, 63, 64, 99].contains(j)) {
        assert_eq!(before.column(j), after.column(j));
    }
}

#[test]
fn single_kernel_matrix_matches_extract_feature() {
    let mut r = rng(5);
    let config = NetworkConfig::new(3, 2, 1, 1).with_seed(77);
    let stacks = generate_kernel_stacks(&config).unwrap();
    let images: Vec<_> = (0..5).map(|_| random_image(&mut r, 1, 16, 16)).collect();
    let labels = [0, 1, 2, 1, 0];
    let fm = extract_features(&images, Some(&labels), &config).unwrap();
    assert_eq!(fm.n_features(), 1);
    assert_eq!(fm.labels().unwrap(), &labels);
    for (i, img) in images.iter().enumerate() {
        assert_eq!(fm.get(i, 0), extract_feature(img, &stacks[0], &config).unwrap());
    }
}

#[test]
fn thread_count_does_not_change_features() {
    let mut r = rng(8);
    let config = NetworkConfig::new(5, 2, 150, 3).with_seed(4);
    let images: Vec<_> = (0..6).map(|_| random_image(&mut r, 3, 32, 32)).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| extract_features(&images, None, &config).unwrap())
    };
    let one = run(1);
    let eight = run(8);
    let bits = |fm: &rdcnn::FeatureMatrix| fm.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one), bits(&eight));
}

#[test]
fn mnist_shaped_run_is_bounded() {
    let mut r = rng(28);
    let config = NetworkConfig::new(7, 1, 256, 1).with_seed(1);
    let images: Vec<_> = (0..8).map(|_| random_image(&mut r, 1, 28, 28)).collect();
    let fm = extract_features(&images, None, &config).unwrap();
    assert!(fm.values().iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v)));
    // mean over the 22x22 sign map pooled to 11x11, a multiple of 1/484
    for &v in fm.values() {
        let scaled = v as f64 * 484.0;
        assert!((scaled - scaled.round()).abs() < 1e-4, "{v}");
    }
}

#[test]
fn errors_name_the_problem() {
    let config = NetworkConfig::new(7, 3, 4, 1);
    let img = ImageTensor::zeros(1, 28, 28).unwrap();
    match extract_features(std::slice::from_ref(&img), None, &config) {
        Err(Error::ImageTooSmall { max_blocks, .. }) => assert_eq!(max_blocks, 2),
        other => panic!("{other:?}"),
    }
    let ok = NetworkConfig::new(3, 1, 4, 1);
    let odd = ImageTensor::zeros(1, 28, 27).unwrap();
    let err = extract_features(&[img.clone(), img, odd], None, &ok).unwrap_err();
    assert!(err.to_string().contains("image 2"), "{err}");
    let rgb = ImageTensor::zeros(3, 28, 28).unwrap();
    assert!(matches!(
        extract_features(&[rgb], None, &ok),
        Err(Error::DimensionMismatch { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn positive_scaling_leaves_features_unchanged(
        seed in any::<u64>(),
        data in prop::collection::vec(0u8..=255, 3 * 20 * 20),
        factor in prop::sample::select(vec![0.25f32, 0.5, 2.0, 4.0, 1024.0]),
    ) {
        let config = NetworkConfig::new(3, 2, 40, 3).with_seed(seed);
        let img = ImageTensor::new(3, 20, 20, data.iter().map(|&p| p as f32).collect()).unwrap();
        let scaled = img.scaled(factor).unwrap();
        let a = extract_features(&[img], None, &config).unwrap();
        let b = extract_features(&[scaled], None, &config).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn integer_scaling_of_raw_pixels(
        seed in any::<u64>(),
        data in prop::collection::vec(0u8..=255, 20 * 20),
        factor in 1u8..=6,
    ) {
        let config = NetworkConfig::new(5, 1, 40, 1).with_seed(seed).with_normalization(Normalization::None);
        let img = ImageTensor::new(1, 20, 20, data.iter().map(|&p| p as f32).collect()).unwrap();
        let scaled = img.scaled(factor as f32).unwrap();
        let a = extract_features(&[img], None, &config).unwrap();
        let b = extract_features(&[scaled], None, &config).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }
}
