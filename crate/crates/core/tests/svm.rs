mod common;

use common::{brute_force_svm, rng, svm_objective};
use rand::Rng;
use rdcnn::svm::{self, predict_topk, topk_accuracy, Discriminants};
use rdcnn::{FeatureMatrix, SvmConfig};

/// Random separable-ish binary problem with labels 0 and 1.
fn tiny_problem(seed: u64) -> (FeatureMatrix, Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.random_range(2..=6);
    let d = r.random_range(1..=3);
    let mut labels: Vec<u32> = (0..n).map(|_| r.random_range(0..2)).collect();
    labels[0] = 0;
    labels[1] = 1;
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..d).map(|_| r.random_range(-1.0f32..1.0)).collect())
        .collect();
    let aug: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().map(|&v| v as f64).chain([1.0]).collect())
        .collect();
    let targets = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    (FeatureMatrix::from_rows(&rows, Some(labels)).unwrap(), aug, targets)
}

#[test]
fn solver_reaches_brute_force_optimum() {
    for seed in 0..20 {
        let (fm, x, y) = tiny_problem(seed);
        let c = [0.01, 0.5, 1.0, 10.0][seed as usize % 4];
        let mut config = SvmConfig::new(c);
        config.tolerance = 1e-6;
        let fit = svm::train(&fm, &config).unwrap();
        assert!(fit.converged());
        let idx = fit.model.classes().iter().position(|&l| l == 1).unwrap();
        let w = fit.model.class_weights(idx);
        let best = brute_force_svm(&x, &y, c);
        let (got, want) = (svm_objective(&x, &y, w, c), svm_objective(&x, &y, &best, c));
        assert!((got - want).abs() <= 1e-3 * want.abs().max(1e-12), "seed {seed}: {got} vs {want}");
        assert!((fit.fits[idx].objective - got).abs() <= 1e-9 * got.max(1.0));
    }
}

#[test]
fn solution_is_a_local_minimum() {
    let mut r = rng(99);
    for seed in 100..110 {
        let (fm, x, y) = tiny_problem(seed);
        let fit = svm::train(&fm, &SvmConfig::new(1.0)).unwrap();
        let w = fit.model.class_weights(1).to_vec();
        let f0 = svm_objective(&x, &y, &w, 1.0);
        for _ in 0..50 {
            let moved: Vec<f64> = w.iter().map(|v| v + r.random_range(-1e-2..1e-2)).collect();
            assert!(svm_objective(&x, &y, &moved, 1.0) >= f0 - 1e-4 * f0);
        }
    }
}

#[test]
fn duplicated_data_with_half_c_is_equivalent() {
    let (fm, _, _) = tiny_problem(7);
    let n = fm.n_samples();
    let doubled = fm.select_rows(&(0..2 * n).map(|i| i % n).collect::<Vec<_>>()).unwrap();
    let mut tight = SvmConfig::new(2.0);
    tight.tolerance = 1e-8;
    let a = svm::train(&fm, &tight).unwrap();
    tight.c = 1.0;
    let b = svm::train(&doubled, &tight).unwrap();
    for (u, v) in a.model.weights().iter().zip(b.model.weights()) {
        assert!((u - v).abs() < 1e-6, "{u} vs {v}");
    }
}

#[test]
fn multiclass_separable_blobs() {
    let mut r = rng(1);
    let centers = [[2.0, 0.0], [-2.0, 0.0], [0.0, 2.0], [0.0, -2.0]];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..40 {
            rows.push(vec![c[0] + r.random_range(-0.5f32..0.5), c[1] + r.random_range(-0.5f32..0.5)]);
            labels.push(label as u32 * 3);
        }
    }
    let fm = FeatureMatrix::from_rows(&rows, Some(labels.clone())).unwrap();
    let fit = svm::train(&fm, &SvmConfig::new(1.0)).unwrap();
    assert_eq!(fit.model.classes(), &[0, 3, 6, 9]);
    assert_eq!(fit.model.predict(&fm).unwrap(), labels);
}

#[test]
fn topk_rules_on_random_discriminants() {
    let mut r = rng(12);
    for trial in 0..200 {
        let n_classes = r.random_range(1..=8);
        let n = r.random_range(1..=30);
        let classes: Vec<u32> = (0..n_classes as u32).map(|c| c * 2 + trial % 3).collect();
        // a small value set forces frequent ties
        let values: Vec<f64> = (0..n * n_classes).map(|_| r.random_range(-2..=2) as f64).collect();
        let labels: Vec<u32> = (0..n).map(|_| classes[r.random_range(0..n_classes)]).collect();
        let d = Discriminants::new(classes.clone(), n, values).unwrap();
        let mut last = 0.0;
        for k in 1..=n_classes {
            let acc = topk_accuracy(&d, &labels, k).unwrap();
            assert!(acc >= last);
            last = acc;
            let top = predict_topk(&d, k).unwrap();
            for (i, predicted) in top.iter().enumerate() {
                let mut order: Vec<usize> = (0..n_classes).collect();
                order.sort_by(|&a, &b| d.row(i)[b].total_cmp(&d.row(i)[a]).then(classes[a].cmp(&classes[b])));
                let expected: Vec<u32> = order[..k].iter().map(|&j| classes[j]).collect();
                assert_eq!(predicted, &expected);
            }
        }
        assert_eq!(last, 1.0);
        assert!(predict_topk(&d, 0).is_err());
        assert!(predict_topk(&d, n_classes + 1).is_err());
    }
}

#[test]
fn rejects_bad_input() {
    let fm = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0]], Some(vec![0, 0])).unwrap();
    assert!(svm::train(&fm, &SvmConfig::new(1.0)).is_err());
    let unlabeled = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0]], None).unwrap();
    assert!(svm::train(&unlabeled, &SvmConfig::new(1.0)).is_err());
    let good = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0]], Some(vec![0, 1])).unwrap();
    assert!(svm::train(&good, &SvmConfig::new(0.0)).is_err());
    assert!(svm::train(&good, &SvmConfig::new(-1.0)).is_err());
}
