use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|Y ∩ Ŷ| / |Y ∪ Ŷ|`; two empty sets score 1.
pub fn jaccard(truth: &[usize], pred: &[usize]) -> f64 {
    let (inter, union) = overlap(truth, pred);
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// `2|Y ∩ Ŷ| / (|Y| + |Ŷ|)`; two empty sets score 1.
pub fn sample_f1(truth: &[usize], pred: &[usize]) -> f64 {
    let (inter, _) = overlap(truth, pred);
    let total = distinct(truth) + distinct(pred);
    if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    }
}

fn distinct(s: &[usize]) -> usize {
    let mut v = s.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

fn overlap(a: &[usize], b: &[usize]) -> (usize, usize) {
    let mut a = a.to_vec();
    a.sort_unstable();
    a.dedup();
    let mut b = b.to_vec();
    b.sort_unstable();
    b.dedup();
    let inter = a.iter().filter(|x| b.binary_search(x).is_ok()).count();
    (inter, a.len() + b.len() - inter)
}

/// Genres whose probability reaches `threshold`, per row of `probs` (`[N, G]`
/// flattened).
pub fn threshold_predictions(probs: &[f64], num_genres: usize, threshold: f64) -> Vec<Vec<usize>> {
    probs
        .chunks(num_genres.max(1))
        .map(|row| (0..row.len()).filter(|&k| row[k] >= threshold).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenreMetrics {
    pub genre: String,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Sample-averaged Jaccard.
    pub accuracy: f64,
    /// Sample-averaged F1.
    pub f_measure: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_genre: Vec<GenreMetrics>,
    pub threshold: f64,
    pub num_samples: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn compute(truth: &[Vec<usize>], pred: &[Vec<usize>], genres: &[String], threshold: f64) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::shape("metrics", &[truth.len()], &[pred.len()]));
        }
        if truth.is_empty() {
            return Err(Error::Input("cannot score an empty split".into()));
        }
        let g = genres.len();
        if let Some(bad) = truth.iter().chain(pred).flatten().find(|&&k| k >= g) {
            return Err(Error::Input(format!("genre id {bad} out of range for {g} genres")));
        }
        let n = truth.len() as f64;
        let accuracy = truth.iter().zip(pred).map(|(t, p)| jaccard(t, p)).sum::<f64>() / n;
        let f_measure = truth.iter().zip(pred).map(|(t, p)| sample_f1(t, p)).sum::<f64>() / n;

        let (mut tp, mut fp, mut fn_) = (vec![0usize; g], vec![0usize; g], vec![0usize; g]);
        for (t, p) in truth.iter().zip(pred) {
            for k in 0..g {
                match (t.contains(&k), p.contains(&k)) {
                    (true, true) => tp[k] += 1,
                    (false, true) => fp[k] += 1,
                    (true, false) => fn_[k] += 1,
                    (false, false) => {}
                }
            }
        }
        let f1 = |tp: usize, fp: usize, fn_: usize| ratio(2 * tp, 2 * tp + fp + fn_);
        let per_genre = (0..g)
            .map(|k| GenreMetrics {
                genre: genres[k].clone(),
                precision: ratio(tp[k], tp[k] + fp[k]),
                recall: ratio(tp[k], tp[k] + fn_[k]),
                support: tp[k] + fn_[k],
            })
            .collect();
        let sum = |v: &[usize]| v.iter().sum::<usize>();
        Ok(MetricsReport {
            accuracy,
            f_measure,
            micro_f1: f1(sum(&tp), sum(&fp), sum(&fn_)),
            macro_f1: (0..g).map(|k| f1(tp[k], fp[k], fn_[k])).sum::<f64>() / g.max(1) as f64,
            per_genre,
            threshold,
            num_samples: truth.len(),
        })
    }
}
