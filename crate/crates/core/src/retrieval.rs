//! Exact k-nearest-neighbor retrieval over feature rows and its quality metrics.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// Cosine similarity, higher is closer.
    #[default]
    Cosine,
    /// Negated Euclidean distance, so higher is still closer.
    Euclidean,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::invalid(format!(
                "unknown metric {other:?} (expected cosine or euclidean)"
            ))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        })
    }
}

fn sum_squares(a: &[f32]) -> f64 {
    a.iter().map(|&v| v as f64 * v as f64).sum()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn cosine_from_parts(dot: f64, aa: f64, bb: f64) -> f64 {
    // sqrt(x * x) == x, so identical vectors give exactly 1
    (dot / (aa * bb).sqrt()).clamp(-1.0, 1.0)
}

/// `a.b / (|a| |b|)`.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "cosine operand length",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (aa, bb) = (sum_squares(a), sum_squares(b));
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector is undefined"));
    }
    Ok(cosine_from_parts(dot(a, b), aa, bb))
}

fn euclidean_score(a: &[f32], b: &[f32]) -> f64 {
    -a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub item_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub query_id: String,
    /// Best first; equal similarities ordered by ascending item id.
    pub neighbors: Vec<Neighbor>,
}

/// Highest similarity first, then ascending id.
fn rank_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// A feature matrix indexed for repeated queries.
pub struct Gallery<'a> {
    features: &'a FeatureMatrix,
    ids: Vec<String>,
    sum_squares: Vec<f64>,
}

impl<'a> Gallery<'a> {
    /// `ids` default to the row numbers.
    pub fn new(features: &'a FeatureMatrix, ids: Option<Vec<String>>) -> Result<Self> {
        let ids = ids.unwrap_or_else(|| (0..features.n_samples()).map(|i| i.to_string()).collect());
        if ids.len() != features.n_samples() {
            return Err(Error::DimensionMismatch {
                what: "gallery ids",
                expected: features.n_samples(),
                actual: ids.len(),
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid(format!("duplicate gallery id {dup:?}")));
        }
        let sum_squares = features.rows().map(sum_squares).collect();
        Ok(Gallery {
            features,
            ids,
            sum_squares,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Similarity of `query` to every gallery row.
    pub fn scores(&self, query: &[f32], metric: Metric) -> Result<Vec<f64>> {
        if query.len() != self.features.n_features() {
            return Err(Error::DimensionMismatch {
                what: "query width",
                expected: self.features.n_features(),
                actual: query.len(),
            });
        }
        match metric {
            Metric::Cosine => {
                let qq = sum_squares(query);
                if qq == 0.0 {
                    return Err(Error::invalid("cosine similarity of a zero query is undefined"));
                }
                if let Some(i) = self.sum_squares.iter().position(|&s| s == 0.0) {
                    return Err(Error::invalid(format!(
                        "gallery row {} is a zero vector; cosine similarity is undefined",
                        self.ids[i]
                    )));
                }
                Ok(self
                    .features
                    .values()
                    .par_chunks(self.features.n_features())
                    .zip(self.sum_squares.par_iter())
                    .map(|(row, &rr)| cosine_from_parts(dot(query, row), qq, rr))
                    .collect())
            }
            Metric::Euclidean => Ok(self
                .features
                .values()
                .par_chunks(self.features.n_features())
                .map(|row| euclidean_score(query, row))
                .collect()),
        }
    }

    pub fn query(&self, query_id: &str, query: &[f32], k: usize, metric: Metric) -> Result<RetrievalResult> {
        if k == 0 || k > self.len() {
            return Err(Error::invalid(format!(
                "k = {k} must be between 1 and the gallery size {}",
                self.len()
            )));
        }
        let scores = self.scores(query, metric)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        let cmp = |&a: &usize, &b: &usize| {
            rank_order((scores[a], &self.ids[a]), (scores[b], &self.ids[b]))
        };
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_unstable_by(cmp);
        Ok(RetrievalResult {
            query_id: query_id.to_string(),
            neighbors: order
                .into_iter()
                .map(|i| Neighbor {
                    item_id: self.ids[i].clone(),
                    similarity: scores[i],
                })
                .collect(),
        })
    }
}

/// Cosine k-NN of `query` among the rows of `gallery`, ids being row numbers.
pub fn knn_query(gallery: &FeatureMatrix, query: &[f32], k: usize) -> Result<RetrievalResult> {
    Gallery::new(gallery, None)?.query("query", query, k, Metric::Cosine)
}

/// Human-scored reference ranking for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRanking {
    query_id: String,
    entries: Vec<(String, f64)>,
}

impl GroundTruthRanking {
    /// Sorts `entries` by descending score, ties by ascending id.
    pub fn new(query_id: impl Into<String>, mut entries: Vec<(String, f64)>) -> Result<Self> {
        let query_id = query_id.into();
        if let Some((id, s)) = entries.iter().find(|(_, s)| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid(format!(
                "query {query_id}: item {id} has invalid score {s}"
            )));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        if let Some((dup, _)) = entries.iter().find(|(id, _)| !seen.insert(id.clone())) {
            return Err(Error::invalid(format!("query {query_id}: duplicate item {dup}")));
        }
        entries.sort_by(|a, b| rank_order((a.1, &a.0), (b.1, &b.0)));
        Ok(GroundTruthRanking { query_id, entries })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }
}

fn check_k(result: &RetrievalResult, truth: &GroundTruthRanking, k: usize) -> Result<()> {
    if k == 0 || k > result.neighbors.len() || k > truth.entries.len() {
        return Err(Error::invalid(format!(
            "k = {k} must be between 1 and min({}, {})",
            result.neighbors.len(),
            truth.entries.len()
        )));
    }
    Ok(())
}

/// Items in both top-k lists, with their ground-truth scores.
fn intersection<'t>(
    result: &RetrievalResult,
    truth: &'t GroundTruthRanking,
    k: usize,
) -> Result<Vec<(&'t str, f64)>> {
    check_k(result, truth, k)?;
    let retrieved: HashSet<&str> = result.neighbors[..k].iter().map(|n| n.item_id.as_str()).collect();
    Ok(truth.entries[..k]
        .iter()
        .filter(|(id, _)| retrieved.contains(id.as_str()))
        .map(|(id, s)| (id.as_str(), *s))
        .collect())
}

/// `|top-k(result) & top-k(truth)| / k`.
pub fn precision_at_k(result: &RetrievalResult, truth: &GroundTruthRanking, k: usize) -> Result<f64> {
    Ok(intersection(result, truth, k)?.len() as f64 / k as f64)
}

/// Sum of ground-truth scores over `top-k(result) & top-k(truth)`.
pub fn intersection_score_sum(result: &RetrievalResult, truth: &GroundTruthRanking, k: usize) -> Result<f64> {
    Ok(intersection(result, truth, k)?.iter().map(|(_, s)| s).sum())
}

/// Treats a retrieval result as a ground-truth ranking; rank `r` of `n` scores `n - r`.
pub fn result_as_truth(result: &RetrievalResult) -> Result<GroundTruthRanking> {
    let n = result.neighbors.len();
    GroundTruthRanking::new(
        result.query_id.clone(),
        result
            .neighbors
            .iter()
            .enumerate()
            .map(|(rank, nb)| (nb.item_id.clone(), (n - rank) as f64))
            .collect(),
    )
}

/// Parses `query_id,item_id,score` CSV with a header row. Each query's rows
/// must be contiguous.
pub fn parse_ground_truth<R: Read>(reader: R, source: &Path) -> Result<Vec<GroundTruthRanking>> {
    let csv_err = |e| Error::Csv {
        path: source.to_path_buf(),
        source: e,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["query_id", "item_id", "score"] {
        return Err(Error::invalid(format!(
            "{}: expected header query_id,item_id,score, got {}",
            source.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut groups: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    let mut closed: HashMap<String, usize> = HashMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let (q, item, score) = (&record[0], &record[1], &record[2]);
        let score: f64 = score.parse().map_err(|_| {
            Error::invalid(format!(
                "{}: row {}: score {score:?} is not a number",
                source.display(),
                line + 2
            ))
        })?;
        match groups.last_mut() {
            Some((current, entries)) if current == q => entries.push((item.to_string(), score)),
            _ => {
                if closed.contains_key(q) {
                    return Err(Error::invalid(format!(
                        "{}: row {}: rows of query {q} are not contiguous",
                        source.display(),
                        line + 2
                    )));
                }
                closed.insert(q.to_string(), groups.len());
                groups.push((q.to_string(), vec![(item.to_string(), score)]));
            }
        }
    }
    groups
        .into_iter()
        .map(|(q, entries)| GroundTruthRanking::new(q, entries))
        .collect()
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRanking>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(std::io::BufReader::new(file), path)
}

/// Writes `query_id,rank,item_id,similarity` rows, ranks starting at 1.
pub fn write_results<W: Write>(writer: W, results: &[RetrievalResult], dest: &Path) -> Result<()> {
    let csv_err = |e| Error::Csv {
        path: dest.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["query_id", "rank", "item_id", "similarity"])
        .map_err(csv_err)?;
    for r in results {
        for (rank, nb) in r.neighbors.iter().enumerate() {
            w.write_record([
                r.query_id.as_str(),
                &(rank + 1).to_string(),
                nb.item_id.as_str(),
                &nb.similarity.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(dest, e))
}
