//! One-vs-rest L2-regularized L2-loss linear SVM.
//!
//! For each class the solver minimizes, over bias-augmented examples
//! `x_i' = [x_i; B]` with `y_i = +1` for the class and `-1` otherwise,
//!
//! ```text
//! f(w) = 1/2 |w|^2 + C * sum_i max(0, 1 - y_i w.x_i')^2
//! ```
//!
//! with a trust-region Newton method whose inner solves are conjugate
//! gradient iterations on the generalized Hessian. Training stops once
//! `|grad f(w)| <= tol * max(min(#pos, #neg), 1) / n * |grad f(0)|`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::tensor::kernels::{axpy_f32_f64, dot_f32_f64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    /// Regularization `C`.
    pub c: f64,
    /// Value `B` of the constant feature appended to every example.
    pub bias: f64,
    /// Relative gradient-norm stopping tolerance.
    pub tolerance: f64,
    /// Maximum accepted Newton steps per class.
    pub max_iterations: usize,
}

impl SvmConfig {
    pub fn new(c: f64) -> Self {
        SvmConfig {
            c,
            bias: 1.0,
            tolerance: 1e-2,
            max_iterations: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !self.bias.is_finite() {
            return Err(Error::invalid("bias value must be finite"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        Ok(())
    }
}

/// Per-class weight vectors of length `n_features + 1`, bias weight last.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    classes: Vec<u32>,
    n_features: usize,
    bias: f64,
    weights: Vec<f64>,
}

impl SvmModel {
    pub fn new(classes: Vec<u32>, n_features: usize, bias: f64, weights: Vec<f64>) -> Result<Self> {
        let expected = classes.len() * (n_features + 1);
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "model weights",
                expected,
                actual: weights.len(),
            });
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !bias.is_finite() {
            return Err(Error::invalid("bias value must be finite"));
        }
        Ok(SvmModel {
            classes,
            n_features,
            bias,
            weights,
        })
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight vector of the class in column `index`.
    pub fn class_weights(&self, index: usize) -> &[f64] {
        let width = self.n_features + 1;
        &self.weights[index * width..(index + 1) * width]
    }

    fn score(&self, index: usize, x: &[f32]) -> f64 {
        let w = self.class_weights(index);
        dot_f32_f64(x, &w[..self.n_features]) + self.bias * w[self.n_features]
    }

    /// Discriminant `w_c . [x_i; B]` for every sample and class.
    pub fn discriminants(&self, features: &FeatureMatrix) -> Result<Discriminants> {
        if features.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                what: "feature width",
                expected: self.n_features,
                actual: features.n_features(),
            });
        }
        let c = self.classes.len();
        let mut values = vec![0.0; features.n_samples() * c];
        if c > 0 {
            values
                .par_chunks_mut(c)
                .zip(features.values().par_chunks(self.n_features))
                .for_each(|(out, x)| {
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = self.score(j, x);
                    }
                });
        }
        Discriminants::new(self.classes.clone(), features.n_samples(), values)
    }

    /// Top-1 class per sample.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<u32>> {
        let d = self.discriminants(features)?;
        Ok(predict_topk(&d, 1)?.into_iter().map(|v| v[0]).collect())
    }
}

/// `n_samples x n_classes` discriminant scores, columns labelled by class.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminants {
    classes: Vec<u32>,
    n_samples: usize,
    values: Vec<f64>,
}

impl Discriminants {
    pub fn new(classes: Vec<u32>, n_samples: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_samples * classes.len() {
            return Err(Error::DimensionMismatch {
                what: "discriminant values",
                expected: n_samples * classes.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Discriminants {
            classes,
            n_samples,
            values,
        })
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.classes.len();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The `k` highest-scoring classes per sample, best first; equal scores are
/// ordered by ascending class label.
pub fn predict_topk(d: &Discriminants, k: usize) -> Result<Vec<Vec<u32>>> {
    let n_classes = d.classes.len();
    if k == 0 || k > n_classes {
        return Err(Error::invalid(format!(
            "top-k needs 1 <= k <= {n_classes} classes, got k = {k}"
        )));
    }
    let mut order: Vec<usize> = (0..n_classes).collect();
    Ok((0..d.n_samples)
        .map(|i| {
            let row = d.row(i);
            order.sort_by(|&a, &b| {
                row[b]
                    .total_cmp(&row[a])
                    .then(d.classes[a].cmp(&d.classes[b]))
            });
            order[..k].iter().map(|&j| d.classes[j]).collect()
        })
        .collect())
}

/// Fraction of samples whose label is among their top `k` classes.
pub fn topk_accuracy(d: &Discriminants, labels: &[u32], k: usize) -> Result<f64> {
    if labels.len() != d.n_samples {
        return Err(Error::DimensionMismatch {
            what: "label count",
            expected: d.n_samples,
            actual: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::invalid("top-k accuracy of zero samples is undefined"));
    }
    let top = predict_topk(d, k)?;
    let hits = top
        .iter()
        .zip(labels)
        .filter(|(t, l)| t.contains(l))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `f(w)` for one binary subproblem with targets `y_i` in `{-1, +1}`.
pub fn primal_objective(features: &FeatureMatrix, targets: &[f64], w: &[f64], c: f64, bias: f64) -> f64 {
    let n = features.n_features();
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = features
        .rows()
        .zip(targets)
        .map(|(x, &y)| {
            let d = 1.0 - y * (dot_f32_f64(x, &w[..n]) + bias * w[n]);
            if d > 0.0 {
                d * d
            } else {
                0.0
            }
        })
        .sum();
    reg + c * loss
}

/// Outcome of one binary subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFit {
    pub class: u32,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: SvmModel,
    pub fits: Vec<ClassFit>,
}

impl SvmFit {
    pub fn converged(&self) -> bool {
        self.fits.iter().all(|f| f.converged)
    }
}

/// Trains one classifier per distinct label.
pub fn train(features: &FeatureMatrix, config: &SvmConfig) -> Result<SvmFit> {
    config.validate()?;
    let labels = features
        .labels()
        .ok_or_else(|| Error::invalid("training features have no labels"))?;
    if features.n_samples() < 2 {
        return Err(Error::invalid("training needs at least two samples"));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid(format!(
            "training needs at least two classes, found only {}",
            classes[0]
        )));
    }
    let results: Vec<(Vec<f64>, ClassFit)> = classes
        .par_iter()
        .map(|&class| {
            let targets: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            let (w, mut fit) = train_binary(features, &targets, config);
            fit.class = class;
            (w, fit)
        })
        .collect();
    let mut weights = Vec::with_capacity(classes.len() * (features.n_features() + 1));
    let mut fits = Vec::with_capacity(classes.len());
    for (w, fit) in results {
        weights.extend(w);
        fits.push(fit);
    }
    let model = SvmModel::new(classes, features.n_features(), config.bias, weights)?;
    Ok(SvmFit { model, fits })
}

struct L2LossProblem<'a> {
    features: &'a FeatureMatrix,
    targets: &'a [f64],
    c: f64,
    bias: f64,
    /// `y_i w.x_i` at the last evaluated point.
    margins: Vec<f64>,
    /// Margin violators at the last point passed to `gradient`; a rejected
    /// trial step re-evaluates `margins` but leaves this alone.
    active: Vec<usize>,
}

impl L2LossProblem<'_> {
    fn dim(&self) -> usize {
        self.features.n_features() + 1
    }

    fn dot(&self, i: usize, v: &[f64]) -> f64 {
        let n = self.features.n_features();
        dot_f32_f64(self.features.row(i), &v[..n]) + self.bias * v[n]
    }

    fn add_scaled(&self, i: usize, alpha: f64, out: &mut [f64]) {
        let n = self.features.n_features();
        axpy_f32_f64(alpha, self.features.row(i), &mut out[..n]);
        out[n] += alpha * self.bias;
    }

    fn objective(&mut self, w: &[f64]) -> f64 {
        let mut loss = 0.0;
        for i in 0..self.targets.len() {
            let z = self.targets[i] * self.dot(i, w);
            self.margins[i] = z;
            let d = 1.0 - z;
            if d > 0.0 {
                loss += d * d;
            }
        }
        0.5 * dot(w, w) + self.c * loss
    }

    /// Gradient at the point last passed to `objective`.
    fn gradient(&mut self, w: &[f64], g: &mut [f64]) {
        g.copy_from_slice(w);
        self.active.clear();
        for i in 0..self.targets.len() {
            let z = self.margins[i];
            if z < 1.0 {
                self.active.push(i);
                self.add_scaled(i, 2.0 * self.c * self.targets[i] * (z - 1.0), g);
            }
        }
    }

    fn hessian_vec(&self, s: &[f64], hs: &mut [f64]) {
        hs.copy_from_slice(s);
        for &i in &self.active {
            let t = self.dot(i, s);
            self.add_scaled(i, 2.0 * self.c * t, hs);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Trust-region Newton solve of one binary subproblem from `w = 0`.
fn train_binary(features: &FeatureMatrix, targets: &[f64], config: &SvmConfig) -> (Vec<f64>, ClassFit) {
    const ETA0: f64 = 1e-4;
    const ETA1: f64 = 0.25;
    const ETA2: f64 = 0.75;
    const SIGMA1: f64 = 0.25;
    const SIGMA2: f64 = 0.5;
    const SIGMA3: f64 = 4.0;

    let n = targets.len();
    let pos = targets.iter().filter(|&&y| y > 0.0).count();
    let eps = config.tolerance * (pos.min(n - pos).max(1) as f64) / n as f64;

    let mut problem = L2LossProblem {
        features,
        targets,
        c: config.c,
        bias: config.bias,
        margins: vec![0.0; n],
        active: Vec::with_capacity(n),
    };
    let dim = problem.dim();
    let mut w = vec![0.0; dim];
    let mut w_new = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut s = vec![0.0; dim];
    let mut r = vec![0.0; dim];

    let mut f = problem.objective(&w);
    problem.gradient(&w, &mut g);
    let gnorm0 = norm(&g);
    let mut gnorm = gnorm0;
    let mut delta = gnorm;
    let mut iterations = 0;
    let mut converged = gnorm <= eps * gnorm0;

    while !converged && iterations < config.max_iterations {
        truncated_cg(&problem, delta, &g, &mut s, &mut r);
        for ((wn, wi), si) in w_new.iter_mut().zip(&w).zip(&s) {
            *wn = wi + si;
        }
        let gs = dot(&g, &s);
        let prered = -0.5 * (gs - dot(&s, &r));
        let f_new = problem.objective(&w_new);
        let actred = f - f_new;
        let snorm = norm(&s);
        if iterations == 0 {
            delta = delta.min(snorm);
        }
        let alpha = if f_new - f - gs <= 0.0 {
            SIGMA3
        } else {
            SIGMA1.max(-0.5 * (gs / (f_new - f - gs)))
        };
        delta = if actred < ETA0 * prered {
            (alpha.max(SIGMA1) * snorm).min(SIGMA2 * delta)
        } else if actred < ETA1 * prered {
            (SIGMA1 * delta).max((alpha * snorm).min(SIGMA2 * delta))
        } else if actred < ETA2 * prered {
            (SIGMA1 * delta).max((alpha * snorm).min(SIGMA3 * delta))
        } else {
            delta.max((alpha * snorm).min(SIGMA3 * delta))
        };

        if actred > ETA0 * prered {
            iterations += 1;
            std::mem::swap(&mut w, &mut w_new);
            f = f_new;
            problem.gradient(&w, &mut g);
            gnorm = norm(&g);
            if gnorm <= eps * gnorm0 {
                converged = true;
                break;
            }
        }
        if actred.abs() <= 0.0 && prered <= 0.0 {
            break;
        }
        if actred.abs() <= 1e-12 * f.abs() && prered.abs() <= 1e-12 * f.abs() {
            break;
        }
    }

    let fit = ClassFit {
        class: 0,
        iterations,
        converged,
        objective: f,
        gradient_norm: gnorm,
    };
    (w, fit)
}

/// Approximately solves `H s = -g` inside `|s| <= delta`; leaves the final
/// residual `-g - H s` in `r`.
fn truncated_cg(problem: &L2LossProblem<'_>, delta: f64, g: &[f64], s: &mut [f64], r: &mut [f64]) {
    let dim = g.len();
    let mut d = vec![0.0; dim];
    let mut hd = vec![0.0; dim];
    s.fill(0.0);
    for i in 0..dim {
        r[i] = -g[i];
        d[i] = r[i];
    }
    let cg_tol = 0.1 * norm(g);
    let mut rtr = dot(r, r);
    for _ in 0..2 * (dim + 1) {
        if rtr.sqrt() <= cg_tol {
            break;
        }
        problem.hessian_vec(&d, &mut hd);
        let dhd = dot(&d, &hd);
        let mut alpha = rtr / dhd;
        for i in 0..dim {
            s[i] += alpha * d[i];
        }
        if norm(s) > delta {
            // step back and move to the trust-region boundary along d
            for i in 0..dim {
                s[i] -= alpha * d[i];
            }
            let std = dot(s, &d);
            let sts = dot(s, s);
            let dtd = dot(&d, &d);
            let dsq = delta * delta;
            let rad = (std * std + dtd * (dsq - sts)).sqrt();
            alpha = if std >= 0.0 {
                (dsq - sts) / (std + rad)
            } else {
                (rad - std) / dtd
            };
            for i in 0..dim {
                s[i] += alpha * d[i];
                r[i] -= alpha * hd[i];
            }
            break;
        }
        for i in 0..dim {
            r[i] -= alpha * hd[i];
        }
        let rnew = dot(r, r);
        let beta = rnew / rtr;
        for i in 0..dim {
            d[i] = r[i] + beta * d[i];
        }
        rtr = rnew;
    }
}
