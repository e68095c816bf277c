mod common;

use std::path::Path;

use common::{exhaustive_knn, rng};
use rand::Rng;
use rdcnn::retrieval::{
    intersection_score_sum, knn_query, parse_ground_truth, precision_at_k, result_as_truth, write_results,
    Gallery, Metric,
};
use rdcnn::FeatureMatrix;

fn random_features(seed: u64, n: usize, m: usize, levels: i32) -> FeatureMatrix {
    let mut r = rng(seed);
    let values = (0..n * m)
        .map(|_| loop {
            // coarse values make exact ties common
            let v = r.random_range(-levels..=levels) as f32 / levels as f32;
            if v != 0.0 {
                break v;
            }
        })
        .collect();
    FeatureMatrix::new(n, m, values, None).unwrap()
}

#[test]
fn matches_exhaustive_oracle_on_large_gallery() {
    for (seed, levels) in [(1, 1), (2, 3), (3, 1000)] {
        let fm = random_features(seed, 1000, 16, levels);
        let ids: Vec<String> = (0..1000).map(|i| format!("img{:04}", (i * 7919) % 1000)).collect();
        let gallery = Gallery::new(&fm, Some(ids.clone())).unwrap();
        let queries = random_features(seed + 100, 10, 16, levels);
        for (qi, q) in queries.rows().enumerate() {
            for k in [1, 5, 50, 1000] {
                let got = gallery.query(&qi.to_string(), q, k, Metric::Cosine).unwrap();
                let want = exhaustive_knn(&fm, &ids, q, k);
                let got: Vec<(String, f64)> =
                    got.neighbors.into_iter().map(|n| (n.item_id, n.similarity)).collect();
                assert_eq!(got, want, "seed {seed} query {qi} k {k}");
            }
        }
    }
}

#[test]
fn self_query_ranks_itself_first() {
    let fm = random_features(4, 200, 32, 1000);
    let gallery = Gallery::new(&fm, None).unwrap();
    for i in 0..fm.n_samples() {
        let result = gallery.query("q", fm.row(i), 10, Metric::Cosine).unwrap();
        assert_eq!(result.neighbors[0].item_id, i.to_string());
        assert_eq!(result.neighbors[0].similarity, 1.0);
        let truth = result_as_truth(&result).unwrap();
        assert_eq!(precision_at_k(&result, &truth, 10).unwrap(), 1.0);
        assert_eq!(intersection_score_sum(&result, &truth, 10).unwrap(), 55.0);
    }
}

#[test]
fn euclidean_ranks_by_distance() {
    let fm = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 0.0]], None).unwrap();
    let gallery = Gallery::new(&fm, None).unwrap();
    let r = gallery.query("q", &[0.0, 0.0], 3, Metric::Euclidean).unwrap();
    let ids: Vec<&str> = r.neighbors.iter().map(|n| n.item_id.as_str()).collect();
    assert_eq!(ids, ["0", "2", "1"]);
    assert_eq!(r.neighbors[2].similarity, -5.0);
}

#[test]
fn toy_ground_truth_fixture() {
    let csv = "query_id,item_id,score\n\
               q1,a,3\nq1,b,9\nq1,c,1\nq1,d,9\n\
               q2,a,0\nq2,c,2\n";
    let truth = parse_ground_truth(csv.as_bytes(), Path::new("fixture.csv")).unwrap();
    assert_eq!(truth.len(), 2);
    let order: Vec<&str> = truth[0].entries().iter().map(|(id, _)| id.as_str()).collect();
    assert_eq!(order, ["b", "d", "a", "c"]);

    let fm = FeatureMatrix::from_rows(
        &[vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.6, 0.8]],
        None,
    )
    .unwrap();
    let ids = ["a", "b", "c", "d"].map(String::from).to_vec();
    let gallery = Gallery::new(&fm, Some(ids)).unwrap();
    let result = gallery.query("q1", &[1.0, 0.05], 4, Metric::Cosine).unwrap();
    let got: Vec<&str> = result.neighbors.iter().map(|n| n.item_id.as_str()).collect();
    assert_eq!(got, ["a", "b", "d", "c"]);
    // top-2 {a, b} vs truth {b, d}
    assert_eq!(precision_at_k(&result, &truth[0], 2).unwrap(), 0.5);
    assert_eq!(intersection_score_sum(&result, &truth[0], 2).unwrap(), 9.0);
    assert_eq!(precision_at_k(&result, &truth[0], 4).unwrap(), 1.0);
    assert!(precision_at_k(&result, &truth[1], 3).is_err());

    let mut out = Vec::new();
    write_results(&mut out, &[result], Path::new("out.csv")).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("query_id,rank,item_id,similarity\nq1,1,a,"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn ground_truth_errors() {
    let p = Path::new("gt.csv");
    assert!(parse_ground_truth("q,item,score\n".as_bytes(), p).is_err());
    assert!(parse_ground_truth("query_id,item_id,score\nq,a,x\n".as_bytes(), p).is_err());
    assert!(parse_ground_truth("query_id,item_id,score\nq,a,-1\n".as_bytes(), p).is_err());
    assert!(parse_ground_truth("query_id,item_id,score\nq,a,1\nr,a,1\nq,b,1\n".as_bytes(), p).is_err());
    assert!(parse_ground_truth("query_id,item_id,score\nq,a,1\nq,a,2\n".as_bytes(), p).is_err());
}

#[test]
fn query_errors() {
    let fm = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]], None).unwrap();
    assert!(knn_query(&fm, &[1.0, 0.0], 1).is_err());
    let fm = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], None).unwrap();
    assert!(knn_query(&fm, &[0.0, 0.0], 1).is_err());
    assert!(knn_query(&fm, &[1.0], 1).is_err());
    assert!(knn_query(&fm, &[1.0, 1.0], 0).is_err());
    assert!(knn_query(&fm, &[1.0, 1.0], 3).is_err());
    assert!(Gallery::new(&fm, Some(vec!["x".into(), "x".into()])).is_err());
}
