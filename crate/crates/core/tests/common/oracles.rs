//! Formula checks against direct scalar re-derivations. Each function
//! panics on a mismatch; the `oracles` and `acceptance` targets both run them.

use genrefuse::fusion::CrossModalAttention;
use genrefuse::graph::{
    classify, combine, conditional_probability_matrix, count_cooccurrence, gcn_forward, matrix_tensor, normalize_adjacency,
    similarity_matrix, DenominatorMode,
};
use genrefuse::losses::{bce_loss, contrastive_loss_fixed, directional_losses, total_loss};
use genrefuse::nn::ParamInit;
use genrefuse::Tensor;
use rand::Rng;

use super::{constant, rng, values};

fn rows(t: &Tensor<f64>, width: usize) -> Vec<Vec<f64>> {
    t.to_vec().chunks(width).map(<[f64]>::to_vec).collect()
}

/// `x·W + b` by loops, from a layer's stored parameters.
fn affine(x: &[f64], w: &Tensor<f64>, b: Option<&Tensor<f64>>) -> Vec<f64> {
    let (k, n) = (w.shape()[0], w.shape()[1]);
    let w = w.to_vec();
    (0..n)
        .map(|j| (0..k).map(|i| x[i] * w[i * n + j]).sum::<f64>() + b.map_or(0.0, |b| b.to_vec()[j]))
        .collect()
}

fn attention_oracle(att: &CrossModalAttention<f64>, q_rows: &[Vec<f64>], kv_rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let proj = |rows: &[Vec<f64>], l: &genrefuse::nn::Linear<f64>| -> Vec<Vec<f64>> {
        rows.iter().map(|r| affine(r, &l.weight, l.bias.as_ref())).collect()
    };
    let (q, k, v) = (proj(q_rows, &att.query), proj(kv_rows, &att.key), proj(kv_rows, &att.value));
    let d = q[0].len();
    let dh = d / att.heads;
    q.iter()
        .map(|qi| {
            let mut out = vec![0.0; d];
            for h in 0..att.heads {
                let span = h * dh..(h + 1) * dh;
                let scores: Vec<f64> = k
                    .iter()
                    .map(|kj| span.clone().map(|c| qi[c] * kj[c]).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
                for (j, s) in scores.iter().enumerate() {
                    let w = (s - max).exp() / z;
                    for c in span.clone() {
                        out[c] += w * v[j][c];
                    }
                }
            }
            out
        })
        .collect()
}

pub fn attention_matches_loops() {
    for seed in 0..10 {
        for heads in [1, 2, 4] {
            let att = CrossModalAttention::<f64>::new(&ParamInit::new(seed), "t", 5, 3, 8, heads).unwrap();
            let mut r = rng(seed);
            let (m, n) = (r.gen_range(1..6), r.gen_range(1..7));
            let q = constant(&mut r, &[m, 5]);
            let kv = constant(&mut r, &[n, 3]);
            let got = rows(&att.forward(&q, &kv).unwrap(), 8);
            let want = attention_oracle(&att, &rows(&q, 5), &rows(&kv, 3));
            for (g, w) in got.iter().flatten().zip(want.iter().flatten()) {
                assert!((g - w).abs() < 1e-5, "seed {seed} heads {heads}: {g} vs {w}");
            }
        }
    }
}

pub fn cooccurrence_worked_example() {
    let c = count_cooccurrence(&[vec![0, 1], vec![0], vec![1, 2]], 3).unwrap();
    assert_eq!(c.occurrences, vec![2, 2, 1]);
    assert_eq!((c.joint[0][1], c.joint[1][2], c.joint[0][2]), (1, 1, 0));

    let row = conditional_probability_matrix(&c, DenominatorMode::Row);
    assert_eq!((row[0][1], row[1][2], row[2][1]), (0.5, 0.5, 1.0));
    let literal = conditional_probability_matrix(&c, DenominatorMode::AsWritten);
    assert_eq!((literal[0][1], literal[2][1], literal[1][2]), (0.5, 0.5, 1.0));
}

pub fn conditional_probabilities_are_exact_ratios() {
    // IEEE division of two exactly representable integers is the correctly
    // rounded rational, so equality here is equality with the exact ratio.
    for seed in 0..50 {
        let mut r = rng(seed);
        let g = r.gen_range(1..7);
        let sets: Vec<Vec<usize>> = (0..r.gen_range(0..40))
            .map(|_| (0..r.gen_range(1..4)).map(|_| r.gen_range(0..g)).collect())
            .collect();
        let c = count_cooccurrence(&sets, g).unwrap();
        let count = |pred: &dyn Fn(&Vec<usize>) -> bool| sets.iter().filter(|s| pred(s)).count() as u64;
        for mode in [DenominatorMode::Row, DenominatorMode::AsWritten] {
            let a1 = conditional_probability_matrix(&c, mode);
            for i in 0..g {
                for j in 0..g {
                    let both = count(&|s| s.contains(&i) && s.contains(&j));
                    let den = count(&|s| s.contains(&if mode == DenominatorMode::Row { i } else { j }));
                    let want = if den == 0 { 0.0 } else { both as f64 / den as f64 };
                    assert_eq!(a1[i][j], want, "seed {seed} {mode:?} [{i}][{j}]");
                }
            }
        }
    }
}

pub fn cosine_matches_scalar_oracle() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let f: Vec<Vec<f64>> = (0..5).map(|_| values(&mut r, 8, -1.0, 1.0)).collect();
        let a2 = similarity_matrix(&f).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = (0..8).map(|k| f[i][k] * f[j][k]).sum();
                let ni = (0..8).map(|k| f[i][k] * f[i][k]).sum::<f64>().sqrt();
                let nj = (0..8).map(|k| f[j][k] * f[j][k]).sum::<f64>().sqrt();
                assert!((a2[i][j] - dot / (ni * nj)).abs() < 1e-6);
            }
        }
        let scaled: Vec<Vec<f64>> = f.iter().map(|r| r.iter().map(|v| v * 3.5).collect()).collect();
        let again = similarity_matrix(&scaled).unwrap();
        assert!(a2.iter().flatten().zip(again.iter().flatten()).all(|(a, b)| (a - b).abs() < 1e-6));
    }
    let orthogonal = similarity_matrix(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
    assert_eq!(orthogonal[0][1], 0.0);
    assert!(similarity_matrix(&[vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
}

pub fn combine_and_normalize_oracles() {
    let zeros = vec![vec![0.0; 3]; 3];
    let eye: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| f64::from(i == j)).collect()).collect();
    let half = combine(&zeros, &eye).unwrap();
    assert_eq!(half, eye.iter().map(|r| r.iter().map(|v| v * 0.5).collect()).collect::<Vec<Vec<f64>>>());
    assert_eq!(normalize_adjacency(&eye), eye);
    assert_eq!(normalize_adjacency(&zeros), eye);
    let uniform = normalize_adjacency(&vec![vec![2.0; 4]; 4]);
    assert!(uniform.iter().flatten().all(|&v| v == 0.25));
    let clamped = normalize_adjacency(&vec![vec![1.0, -1.0], vec![3.0, 1.0]]);
    assert_eq!(clamped, vec![vec![1.0, 0.0], vec![0.75, 0.25]]);
}

pub fn gcn_and_classifier_match_loops() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let (g, e, h, d) = (4, 5, 6, 3);
        let f = constant(&mut r, &[g, e]);
        let adj_rows = normalize_adjacency(&(0..g).map(|_| values(&mut r, g, 0.0, 1.0)).collect::<Vec<_>>());
        let adj = matrix_tensor::<f64>(&adj_rows).unwrap();
        let w = vec![constant(&mut r, &[e, h]), constant(&mut r, &[h, d])];
        let got = rows(&gcn_forward(&f, &adj, &w).unwrap(), d);

        let layer = |x: &[Vec<f64>], w: &Tensor<f64>, relu: bool| -> Vec<Vec<f64>> {
            let mixed: Vec<Vec<f64>> = (0..g)
                .map(|i| (0..x[0].len()).map(|c| (0..g).map(|k| adj_rows[i][k] * x[k][c]).sum()).collect())
                .collect();
            mixed
                .iter()
                .map(|row| affine(row, w, None).into_iter().map(|v| if relu { v.max(0.0) } else { v }).collect())
                .collect()
        };
        let want = layer(&layer(&rows(&f, e), &w[0], true), &w[1], false);
        for (a, b) in got.iter().flatten().zip(want.iter().flatten()) {
            assert!((a - b).abs() < 1e-5);
        }

        let fused = constant(&mut r, &[2, d]);
        let nodes = Tensor::from_vec(got.concat(), &[g, d]).unwrap();
        let logits = rows(&classify(&fused, &nodes).unwrap(), g);
        let fr = rows(&fused, d);
        for b in 0..2 {
            for k in 0..g {
                let dot: f64 = (0..d).map(|c| fr[b][c] * got[k][c]).sum();
                assert!((logits[b][k] - dot).abs() < 1e-12);
            }
        }
    }
    // identity adjacency, one square identity layer: the output is the input
    let f = Tensor::from_vec(vec![1.0, -2.0, 3.0, -4.0], &[2, 2]).unwrap();
    let eye = Tensor::from_vec(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
    assert_eq!(gcn_forward(&f, &eye, &[eye.clone()]).unwrap().to_vec(), f.to_vec());
}

/// Symmetric InfoNCE by loops over the `B×B` logit matrix.
fn info_nce_oracle(a: &[Vec<f64>], l: &[Vec<f64>], tau: f64) -> f64 {
    let b = a.len();
    let s: Vec<Vec<f64>> = (0..b)
        .map(|i| (0..b).map(|j| a[i].iter().zip(&l[j]).map(|(x, y)| x * y).sum::<f64>() / tau).collect())
        .collect();
    let nll = |row: &dyn Fn(usize) -> f64, i: usize| -> f64 {
        let z: f64 = (0..b).map(|j| row(j).exp()).sum();
        -(row(i).exp() / z).ln()
    };
    let a2l: f64 = (0..b).map(|i| nll(&|j| s[i][j], i)).sum::<f64>() / b as f64;
    let l2a: f64 = (0..b).map(|i| nll(&|j| s[j][i], i)).sum::<f64>() / b as f64;
    0.5 * (a2l + l2a)
}

pub fn contrastive_loss_matches_loops() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let b = r.gen_range(2..7);
        let a = constant(&mut r, &[b, 4]).l2_normalize().unwrap();
        let l = constant(&mut r, &[b, 4]).l2_normalize().unwrap();
        let tau = r.gen_range(0.05..1.0);
        let got = contrastive_loss_fixed(&a, &l, tau).unwrap().item().unwrap();
        let want = info_nce_oracle(&rows(&a, 4), &rows(&l, 4), tau);
        assert!((got - want).abs() < 1e-9, "seed {seed}: {got} vs {want}");
    }
}

pub fn contrastive_edge_cases_are_exact() {
    let a = Tensor::from_vec(vec![0.6, 0.8], &[1, 2]).unwrap();
    let l = Tensor::from_vec(vec![-0.8, 0.6], &[1, 2]).unwrap();
    assert_eq!(contrastive_loss_fixed(&a, &l, 0.07).unwrap().item().unwrap(), 0.0);

    let mut r = rng(3);
    let half = values(&mut r, 16, -2.0, 2.0);
    let sym: Vec<f64> = (0..16).map(|k| half[(k / 4) * 4 + k % 4] + half[(k % 4) * 4 + k / 4]).collect();
    let logits = Tensor::from_vec(sym, &[4, 4]).unwrap();
    let (a2l, l2a) = directional_losses(&logits).unwrap();
    assert_eq!(a2l.item().unwrap(), l2a.item().unwrap());
}

pub fn lambda_zero_is_bit_exact_bce() {
    let mut r = rng(4);
    let logits = constant(&mut r, &[5, 3]);
    let y = Tensor::from_vec((0..15).map(|k| f64::from(k % 3 == 0)).collect(), &[5, 3]).unwrap();
    let bce = bce_loss(&logits, &y).unwrap();
    let align = Tensor::scalar(123.0);
    let total = total_loss(Some(&align), &bce, 0.0).unwrap();
    assert_eq!(total.item().unwrap().to_bits(), bce.item().unwrap().to_bits());
    assert_eq!(total_loss(None, &bce, 0.0).unwrap().item().unwrap().to_bits(), bce.item().unwrap().to_bits());
    assert_eq!(total_loss(Some(&align), &bce, 1.0).unwrap().item().unwrap(), 123.0);
}

pub fn bce_matches_scalar_formula() {
    let mut r = rng(5);
    let x = values(&mut r, 12, -8.0, 8.0);
    let y: Vec<f64> = (0..12).map(|k| f64::from(k % 2 == 0)).collect();
    let got = bce_loss(&Tensor::from_vec(x.clone(), &[3, 4]).unwrap(), &Tensor::from_vec(y.clone(), &[3, 4]).unwrap())
        .unwrap()
        .item()
        .unwrap();
    let want = x
        .iter()
        .zip(&y)
        .map(|(&x, &t)| {
            let p = 1.0 / (1.0 + (-x).exp());
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / 12.0;
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
}

pub const ALL: [(&str, fn()); 10] = [
    ("attention_matches_loops", attention_matches_loops),
    ("cooccurrence_worked_example", cooccurrence_worked_example),
    ("conditional_probabilities_are_exact_ratios", conditional_probabilities_are_exact_ratios),
    ("cosine_matches_scalar_oracle", cosine_matches_scalar_oracle),
    ("combine_and_normalize_oracles", combine_and_normalize_oracles),
    ("gcn_and_classifier_match_loops", gcn_and_classifier_match_loops),
    ("contrastive_loss_matches_loops", contrastive_loss_matches_loops),
    ("contrastive_edge_cases_are_exact", contrastive_edge_cases_are_exact),
    ("lambda_zero_is_bit_exact_bce", lambda_zero_is_bit_exact_bce),
    ("bce_matches_scalar_formula", bce_matches_scalar_formula),
];
