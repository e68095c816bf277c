//! Value histograms, Jensen-Shannon divergence and class-separability ratios.
//!
//! Divergences use natural logarithms, so they lie in `[0, ln 2]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::retrieval::cosine_similarity;

/// Added to every bin probability before renormalizing.
pub const DEFAULT_SMOOTHING: f64 = 1e-10;
/// Bins for 8-bit pixel data.
pub const PIXEL_BINS: usize = 256;
pub const FEATURE_BINS: usize = 64;
pub const PIXEL_RANGE: (f64, f64) = (0.0, 1.0);
pub const FEATURE_RANGE: (f64, f64) = (-1.0, 1.0);

/// A normalized histogram over equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueHistogram {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

impl ValueHistogram {
    pub fn new(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() || edges.len() != masses.len() + 1 {
            return Err(Error::DimensionMismatch {
                what: "histogram edges",
                expected: masses.len() + 1,
                actual: edges.len(),
            });
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("histogram edges must be strictly increasing"));
        }
        if masses.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::invalid("histogram masses must be finite and nonnegative"));
        }
        let total = neumaier_sum(masses.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("histogram masses sum to {total}, not 1")));
        }
        Ok(ValueHistogram { edges, masses })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }
}

/// Histogram of `values` over `bins` equal-width bins spanning `range`.
/// Values outside the range are clamped into the end bins.
pub fn image_histogram(
    values: &[f32],
    bins: usize,
    range: (f64, f64),
    smoothing: f64,
) -> Result<ValueHistogram> {
    let (lo, hi) = range;
    if values.is_empty() {
        return Err(Error::invalid("histogram of no values"));
    }
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("invalid histogram range [{lo}, {hi}]")));
    }
    if !(smoothing >= 0.0) {
        return Err(Error::invalid("smoothing must be nonnegative"));
    }
    let width = hi - lo;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let v = (v as f64).clamp(lo, hi);
        let idx = (((v - lo) / width) * bins as f64) as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let total = values.len() as f64;
    let norm = 1.0 + bins as f64 * smoothing;
    let masses = counts
        .iter()
        .map(|&c| (c as f64 / total + smoothing) / norm)
        .collect();
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64 / bins as f64).collect();
    edges.push(hi);
    ValueHistogram::new(edges, masses)
}

/// Jensen-Shannon divergence `KL(P|M)/2 + KL(Q|M)/2` with `M = (P + Q)/2`.
pub fn js_divergence(p: &ValueHistogram, q: &ValueHistogram) -> Result<f64> {
    if p.edges != q.edges {
        return Err(Error::invalid("histograms use different bins"));
    }
    let mut total = 0.0;
    for (&a, &b) in p.masses.iter().zip(&q.masses) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).ln();
        }
    }
    Ok(total.clamp(0.0, std::f64::consts::LN_2))
}

/// Compensated sum; the result does not depend on how terms were produced.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Average divergences across and within two classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsRatioReport {
    pub avg_js_across: f64,
    pub avg_js_within_a: f64,
    pub avg_js_within_b: f64,
    /// `across / (within_a + within_b)`.
    pub ratio: f64,
}

impl JsRatioReport {
    pub fn from_averages(across: f64, within_a: f64, within_b: f64) -> Result<Self> {
        let denom = within_a + within_b;
        if !(denom > 0.0) {
            return Err(Error::invalid(
                "within-class divergences sum to zero; the ratio is undefined",
            ));
        }
        Ok(JsRatioReport {
            avg_js_across: across,
            avg_js_within_a: within_a,
            avg_js_within_b: within_b,
            ratio: across / denom,
        })
    }

    pub fn metrics(&self) -> [(&'static str, f64); 4] {
        [
            ("avg_js_across", self.avg_js_across),
            ("avg_js_within_a", self.avg_js_within_a),
            ("avg_js_within_b", self.avg_js_within_b),
            ("ratio", self.ratio),
        ]
    }
}

fn mean_divergence(pairs: &[(&ValueHistogram, &ValueHistogram)]) -> Result<f64> {
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|(p, q)| js_divergence(p, q))
        .collect::<Result<_>>()?;
    Ok(neumaier_sum(values) / pairs.len() as f64)
}

/// Mean JSD over all cross-class pairs divided by the sum of the mean JSDs
/// over distinct within-class pairs.
pub fn avg_js_ratio(class_a: &[ValueHistogram], class_b: &[ValueHistogram]) -> Result<JsRatioReport> {
    if class_a.len() < 2 || class_b.len() < 2 {
        return Err(Error::invalid(format!(
            "each class needs at least two histograms, got {} and {}",
            class_a.len(),
            class_b.len()
        )));
    }
    let within = |class: &[ValueHistogram]| -> Result<f64> {
        let pairs: Vec<_> = (0..class.len())
            .flat_map(|i| (i + 1..class.len()).map(move |j| (i, j)))
            .map(|(i, j)| (&class[i], &class[j]))
            .collect();
        mean_divergence(&pairs)
    };
    let across: Vec<_> = class_a
        .iter()
        .flat_map(|p| class_b.iter().map(move |q| (p, q)))
        .collect();
    JsRatioReport::from_averages(mean_divergence(&across)?, within(class_a)?, within(class_b)?)
}

/// Cosine similarity of each augmented row to the original row it came from.
pub fn augmentation_cosine_distribution(
    original: &FeatureMatrix,
    augmented: &FeatureMatrix,
    pairing: &[usize],
) -> Result<Vec<f64>> {
    if original.n_features() != augmented.n_features() {
        return Err(Error::DimensionMismatch {
            what: "augmented feature width",
            expected: original.n_features(),
            actual: augmented.n_features(),
        });
    }
    if pairing.len() != augmented.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "pairing length",
            expected: augmented.n_samples(),
            actual: pairing.len(),
        });
    }
    if let Some((i, &p)) = pairing.iter().enumerate().find(|(_, &p)| p >= original.n_samples()) {
        return Err(Error::invalid(format!(
            "augmented row {i} pairs with original row {p}, but there are {} originals",
            original.n_samples()
        )));
    }
    pairing
        .par_iter()
        .enumerate()
        .map(|(i, &p)| cosine_similarity(augmented.row(i), original.row(p)))
        .collect()
}

/// Pairing for augmented rows stored in groups: rows `g*i .. g*(i+1)` all
/// derive from original `i`, where `g = n_augmented / n_original`.
pub fn grouped_pairing(n_original: usize, n_augmented: usize) -> Result<Vec<usize>> {
    if n_original == 0 || !n_augmented.is_multiple_of(n_original) {
        return Err(Error::invalid(format!(
            "{n_augmented} augmented rows are not a whole multiple of {n_original} originals"
        )));
    }
    let per = n_augmented / n_original;
    Ok((0..n_augmented).map(|i| i / per).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values_fill_one_bin() {
        let h = image_histogram(&[0.3; 50], 10, (0.0, 1.0), DEFAULT_SMOOTHING).unwrap();
        let (idx, max) = h
            .masses()
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
        assert_eq!(idx, 3);
        assert!((max - 1.0).abs() < 1e-8);
        assert_eq!(h.edges().len(), 11);
        assert_eq!(h.edges()[10], 1.0);
    }

    #[test]
    fn uniform_grid_is_uniform() {
        let values: Vec<f32> = (0..100).map(|i| (i as f32 + 0.5) / 100.0).collect();
        let h = image_histogram(&values, 4, (0.0, 1.0), 0.0).unwrap();
        assert_eq!(h.masses(), &[0.25; 4]);
    }

    #[test]
    fn out_of_range_values_are_clamped() {
        let h = image_histogram(&[-5.0, 5.0, 1.0], 2, (0.0, 1.0), 0.0).unwrap();
        assert_eq!(h.masses(), &[1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn histogram_errors() {
        assert!(image_histogram(&[], 4, (0.0, 1.0), 0.0).is_err());
        assert!(image_histogram(&[0.5], 0, (0.0, 1.0), 0.0).is_err());
        assert!(image_histogram(&[0.5], 4, (1.0, 1.0), 0.0).is_err());
        assert!(ValueHistogram::new(vec![0.0, 1.0], vec![0.5]).is_err());
        assert!(ValueHistogram::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn jsd_known_values() {
        let p = ValueHistogram::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.0]).unwrap();
        let q = ValueHistogram::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        assert!((js_divergence(&p, &q).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let other = ValueHistogram::new(vec![0.0, 0.4, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(js_divergence(&p, &other).is_err());
    }

    #[test]
    fn ratio_from_injected_averages() {
        let r = JsRatioReport::from_averages(0.25, 0.3, 0.18).unwrap();
        assert!((r.ratio - 0.25 / 0.48).abs() < 1e-15);
        assert_eq!((r.ratio * 100.0).round() / 100.0, 0.52);
        assert!(JsRatioReport::from_averages(0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn ratio_needs_two_per_class() {
        let h = image_histogram(&[0.1, 0.9], 4, (0.0, 1.0), DEFAULT_SMOOTHING).unwrap();
        assert!(avg_js_ratio(std::slice::from_ref(&h), &[h.clone(), h.clone()]).is_err());
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        assert_eq!(neumaier_sum([1e16, 1.0, -1e16]), 1.0);
    }

    #[test]
    fn augmentation_cosines() {
        let orig = FeatureMatrix::from_rows(&[vec![1.0, 0.5], vec![-0.25, 1.0]], None).unwrap();
        let copy = augmentation_cosine_distribution(&orig, &orig, &[0, 1]).unwrap();
        assert_eq!(copy, vec![1.0, 1.0]);
        let neg = FeatureMatrix::from_rows(&[vec![-1.0, -0.5], vec![0.25, -1.0]], None).unwrap();
        assert_eq!(augmentation_cosine_distribution(&orig, &neg, &[0, 1]).unwrap(), vec![-1.0, -1.0]);
        assert!(augmentation_cosine_distribution(&orig, &neg, &[0, 2]).is_err());
        assert!(augmentation_cosine_distribution(&orig, &neg, &[0]).is_err());
    }

    #[test]
    fn grouped_pairing_layout() {
        assert_eq!(grouped_pairing(2, 6).unwrap(), vec![0, 0, 0, 1, 1, 1]);
        assert!(grouped_pairing(4, 6).is_err());
        assert!(grouped_pairing(0, 0).is_err());
    }
}
