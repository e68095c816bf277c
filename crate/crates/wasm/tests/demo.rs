use rdcnn::{extract_features, NetworkConfig};
use rdcnn_wasm::demo::{augmentation_cosines, histograms, image, trace};

fn digit(width: usize, height: usize) -> Vec<u8> {
    (0..width * height)
        .map(|i| {
            let (y, x) = (i / width, i % width);
            if (x as isize - 10).abs() < 3 && y > 4 && y < 22 { 255 } else { (x * y % 7) as u8 }
        })
        .collect()
}

#[test]
fn trace_matches_the_extracted_feature() {
    let px = digit(28, 28);
    for (k, b, index) in [(7, 1, 0), (5, 2, 3), (3, 3, 9)] {
        let t = trace(&px, 28, 28, k, b, 11, index).unwrap();
        assert_eq!(t.count(), 1 + 3 * b);
        assert_eq!(t.name(0), "input");
        assert_eq!((t.width(0), t.height(0)), (28, 28));
        for i in (2..t.count()).step_by(3) {
            assert!(t.data(i).iter().all(|&v| v == 1.0 || v == -1.0), "{}", t.name(i));
        }
        let config = NetworkConfig::new(k, b, index + 1, 1).with_seed(11);
        let fm = extract_features(&[image(&px, 28, 28).unwrap()], None, &config).unwrap();
        assert!((t.feature() - fm.get(0, index) as f64).abs() < 1e-6);
    }
}

#[test]
fn histograms_are_distributions() {
    let flat = vec![128u8; 20 * 20];
    let h = histograms(&flat, 20, 20, 3, 1, 50, 2, 16).unwrap();
    assert_eq!(h.pixel().len(), 16);
    assert_eq!(h.pixel().iter().filter(|&&m| m > 0.0).count(), 1);
    // every 3x3 patch is the same, so each feature is exactly +1 or -1
    let f = h.feature();
    assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((f[0] + f[15] - 1.0).abs() < 1e-12);
}

#[test]
fn augmentation_cosines_are_deterministic() {
    let px = digit(28, 28);
    let a = augmentation_cosines(&px, 28, 28, 7, 1, 200, 4, 10).unwrap();
    assert_eq!(a.len(), 10);
    assert!(a.iter().all(|c| (-1.0..=1.0).contains(c)));
    assert_eq!(a, augmentation_cosines(&px, 28, 28, 7, 1, 200, 4, 10).unwrap());
    assert!(augmentation_cosines(&px, 28, 28, 7, 1, 200, 4, 0).is_err());
}

#[test]
fn bad_input_is_reported() {
    let px = digit(28, 28);
    assert!(trace(&px, 27, 28, 7, 1, 0, 0).is_err());
    assert!(trace(&px, 28, 28, 7, 3, 0, 0).is_err());
    assert!(histograms(&px, 28, 28, 4, 1, 10, 0, 8).is_err());
    assert!(histograms(&px, 28, 28, 3, 1, 10, 0, 0).is_err());
}
