//! Genre correlation graph and the GCN classifier head.
//!
//! Two genre-by-genre matrices are averaged into the correlation matrix:
//!
//! * `A1[i][j]`, the empirical conditional probability that a track carries
//!   genre `j` given it carries genre `i`, from training-split co-occurrence
//!   counts;
//! * `A2[i][j]`, the cosine similarity of the frozen genre-name embeddings.
//!
//! After clamping negatives to zero and row-normalizing, the result `Â`
//! drives a stack of graph convolutions `H ← ReLU(Â·H·W)` over the name
//! embeddings. The final node embeddings act as per-genre classifier
//! weights: `logit_k = fused · Z_k`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::nn::{Linear, NamedParams, ParamInit};
use crate::tensor::{Float, Tensor};

pub type Matrix = Vec<Vec<f64>>;

/// Per-genre occurrence counts `N` and pairwise co-occurrence counts `M`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceCounts {
    pub num_samples: u64,
    pub occurrences: Vec<u64>,
    pub joint: Vec<Vec<u64>>,
}

impl CooccurrenceCounts {
    pub fn num_genres(&self) -> usize {
        self.occurrences.len()
    }
}

/// Counts over label sets; repeated ids within one set count once.
pub fn count_cooccurrence(label_sets: &[Vec<usize>], num_genres: usize) -> Result<CooccurrenceCounts> {
    let mut occurrences = vec![0u64; num_genres];
    let mut joint = vec![vec![0u64; num_genres]; num_genres];
    for (s, set) in label_sets.iter().enumerate() {
        let unique: BTreeSet<usize> = set.iter().copied().collect();
        if let Some(&bad) = unique.iter().find(|&&g| g >= num_genres) {
            return Err(Error::Input(format!(
                "sample {s}: genre id {bad} out of range for {num_genres} genres"
            )));
        }
        for &i in &unique {
            occurrences[i] += 1;
            for &j in &unique {
                joint[i][j] += 1;
            }
        }
    }
    Ok(CooccurrenceCounts {
        num_samples: label_sets.len() as u64,
        occurrences,
        joint,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenominatorMode {
    /// `M[i][j] / N[i]`, i.e. P(j | i).
    #[default]
    Row,
    /// `M[i][j] / N[j]`.
    AsWritten,
}

/// Conditional co-occurrence probabilities. Entries with a zero denominator
/// are zero, so genres never seen keep an all-zero row.
pub fn conditional_probability_matrix(counts: &CooccurrenceCounts, mode: DenominatorMode) -> Matrix {
    let g = counts.num_genres();
    (0..g)
        .map(|i| {
            (0..g)
                .map(|j| {
                    let denom = match mode {
                        DenominatorMode::Row => counts.occurrences[i],
                        DenominatorMode::AsWritten => counts.occurrences[j],
                    };
                    if denom == 0 {
                        0.0
                    } else {
                        counts.joint[i][j] as f64 / denom as f64
                    }
                })
                .collect()
        })
        .collect()
}

/// Pairwise cosine similarity between feature rows. Exactly symmetric.
pub fn similarity_matrix(features: &[Vec<f64>]) -> Result<Matrix> {
    let norms: Vec<f64> = features
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0 || !n.is_finite()) {
        return Err(Error::Config(format!("genre {i} has a zero-norm embedding")));
    }
    let g = features.len();
    let mut out = vec![vec![0.0; g]; g];
    for i in 0..g {
        if features[i].len() != features[0].len() {
            return Err(Error::shape("similarity_matrix", &[features[0].len()], &[features[i].len()]));
        }
        for j in i..g {
            let dot: f64 = features[i].iter().zip(&features[j]).map(|(a, b)| a * b).sum();
            let c = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            out[i][j] = c;
            out[j][i] = c;
        }
    }
    Ok(out)
}

/// Elementwise average.
pub fn combine(a1: &Matrix, a2: &Matrix) -> Result<Matrix> {
    let shape = |m: &Matrix| vec![m.len(), m.first().map_or(0, Vec::len)];
    if a1.len() != a2.len() || a1.iter().zip(a2).any(|(r, s)| r.len() != s.len()) {
        return Err(Error::shape("combine", &shape(a1), &shape(a2)));
    }
    Ok(a1
        .iter()
        .zip(a2)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| 0.5 * (x + y)).collect())
        .collect())
}

/// Clamps negatives to zero then row-normalizes; an all-zero row becomes
/// the self-loop `e_i`.
pub fn normalize_adjacency(a: &Matrix) -> Matrix {
    a.iter()
        .enumerate()
        .map(|(i, row)| {
            let clamped: Vec<f64> = row.iter().map(|&v| v.max(0.0)).collect();
            let total: f64 = clamped.iter().sum();
            if total > 0.0 {
                clamped.iter().map(|v| v / total).collect()
            } else {
                (0..row.len()).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrices {
    pub a1: Matrix,
    pub a2: Matrix,
    pub a: Matrix,
}

/// Genre vocabulary, node features and every derived matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GenreGraph {
    pub genres: Vec<String>,
    pub node_features: Matrix,
    pub counts: CooccurrenceCounts,
    pub matrices: CorrelationMatrices,
    pub adjacency: Matrix,
}

impl GenreGraph {
    pub fn build(
        genres: Vec<String>,
        node_features: Matrix,
        counts: CooccurrenceCounts,
        mode: DenominatorMode,
    ) -> Result<Self> {
        if genres.len() != node_features.len() || genres.len() != counts.num_genres() {
            return Err(Error::shape(
                "genre_graph",
                &[genres.len(), node_features.len()],
                &[counts.num_genres()],
            ));
        }
        let a1 = conditional_probability_matrix(&counts, mode);
        let a2 = similarity_matrix(&node_features)?;
        let a = combine(&a1, &a2)?;
        let adjacency = normalize_adjacency(&a);
        Ok(GenreGraph {
            genres,
            node_features,
            counts,
            matrices: CorrelationMatrices { a1, a2, a },
            adjacency,
        })
    }

    pub fn num_genres(&self) -> usize {
        self.genres.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "genres": self.genres,
            "N": self.counts.occurrences,
            "A1": self.matrices.a1,
            "A2": self.matrices.a2,
            "A": self.matrices.a,
            "A_hat": self.adjacency,
        })
    }
}

pub fn matrix_tensor<T: Float>(m: &Matrix) -> Result<Tensor<T>> {
    Tensor::from_rows(&m.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect::<Vec<_>>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcnConfig {
    pub hidden: usize,
    pub layers: usize,
    pub denominator: DenominatorMode,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            hidden: 64,
            layers: 2,
            denominator: DenominatorMode::Row,
        }
    }
}

/// `H⁽ˡ⁺¹⁾ = ReLU(Â·H⁽ˡ⁾·W⁽ˡ⁾)`, no ReLU after the last layer.
pub fn gcn_forward<T: Float>(features: &Tensor<T>, adjacency: &Tensor<T>, weights: &[Tensor<T>]) -> Result<Tensor<T>> {
    let g = features.shape()[0];
    if adjacency.shape() != [g, g] {
        return Err(Error::shape("gcn_forward", adjacency.shape(), features.shape()));
    }
    let mut h = features.clone();
    for (l, w) in weights.iter().enumerate() {
        h = adjacency.matmul(&h)?.matmul(w)?;
        if l + 1 < weights.len() {
            h = h.relu()?;
        }
    }
    Ok(h)
}

/// `logits[b][k] = fused[b] · nodes[k]`.
pub fn classify<T: Float>(fused: &Tensor<T>, node_embeddings: &Tensor<T>) -> Result<Tensor<T>> {
    let d = *fused.shape().last().unwrap_or(&0);
    if node_embeddings.ndim() != 2 || node_embeddings.shape()[1] != d {
        return Err(Error::shape("classify", fused.shape(), node_embeddings.shape()));
    }
    fused.matmul(&node_embeddings.t()?)
}

/// GCN head: fixed node features and adjacency, trainable layer weights, and
/// a per-genre logit offset.
pub struct GcnHead<T: Float> {
    pub node_features: Tensor<T>,
    pub adjacency: Tensor<T>,
    pub weights: Vec<Tensor<T>>,
    pub bias: Tensor<T>,
}

impl<T: Float> GcnHead<T> {
    /// Hidden layers are Glorot-uniform; the output layer starts at zero so
    /// the untrained head predicts `sigmoid(bias)` for every track.
    pub fn new(
        config: &GcnConfig,
        graph: &GenreGraph,
        out_dim: usize,
        bias_init: &[f64],
        init: &ParamInit,
    ) -> Result<Self> {
        if config.layers == 0 {
            return Err(Error::Config("GCN needs at least one layer".into()));
        }
        let g = graph.num_genres();
        if bias_init.len() != g {
            return Err(Error::shape("gcn_head", &[bias_init.len()], &[g]));
        }
        let in_dim = graph.node_features.first().map_or(0, Vec::len);
        let mut dims = vec![in_dim];
        dims.extend(std::iter::repeat_n(config.hidden, config.layers - 1));
        dims.push(out_dim);
        let weights = dims
            .windows(2)
            .enumerate()
            .map(|(l, d)| {
                if l + 2 == dims.len() {
                    init.constant(&[d[0], d[1]], 0.0)
                } else {
                    let bound = (6.0 / (d[0] + d[1]) as f64).sqrt();
                    init.uniform(&format!("gcn.layer{l}.weight"), &[d[0], d[1]], bound)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GcnHead {
            node_features: matrix_tensor(&graph.node_features)?,
            adjacency: matrix_tensor(&graph.adjacency)?,
            weights,
            bias: Tensor::parameter(bias_init.iter().map(|&b| T::lit(b)).collect(), &[g])?,
        })
    }

    pub fn node_embeddings(&self) -> Result<Tensor<T>> {
        gcn_forward(&self.node_features, &self.adjacency, &self.weights)
    }

    pub fn forward(&self, fused: &Tensor<T>) -> Result<Tensor<T>> {
        classify(fused, &self.node_embeddings()?)?.add_bias(&self.bias)
    }

    pub fn push_params(&self, out: &mut NamedParams<T>) {
        for (l, w) in self.weights.iter().enumerate() {
            out.push((format!("gcn.layer{l}.weight"), w.clone()));
        }
        out.push(("head.bias".into(), self.bias.clone()));
    }

    pub fn push_buffers(&self, out: &mut NamedParams<T>) {
        out.push(("graph.node_features".into(), self.node_features.clone()));
        out.push(("graph.adjacency".into(), self.adjacency.clone()));
    }
}

/// Ablation baseline: one linear layer from the fused vector to the logits.
pub struct LinearHead<T: Float> {
    pub linear: Linear<T>,
}

impl<T: Float> LinearHead<T> {
    /// Zero weights; bias starts at `bias_init`.
    pub fn new(in_dim: usize, bias_init: &[f64], init: &ParamInit) -> Result<Self> {
        let linear = Linear {
            weight: init.constant(&[in_dim, bias_init.len()], 0.0)?,
            bias: Some(Tensor::parameter(
                bias_init.iter().map(|&b| T::lit(b)).collect(),
                &[bias_init.len()],
            )?),
        };
        Ok(LinearHead { linear })
    }

    pub fn forward(&self, fused: &Tensor<T>) -> Result<Tensor<T>> {
        self.linear.forward(fused)
    }

    pub fn push_params(&self, out: &mut NamedParams<T>) {
        self.linear.push_params("head.linear", out);
    }
}
