//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod oracles;

use genrefuse::data::{Dataset, SyntheticSpec, synth_dataset};
use genrefuse::graph::{classify, count_cooccurrence, gcn_forward};
use genrefuse::losses::{contrastive_loss, total_loss};
use genrefuse::tensor::gradcheck::{GradCheck, GradCheckReport};
use genrefuse::text::Vocab;
use genrefuse::train::{Model, RunConfig};
use genrefuse::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_TOL: f64 = 1e-5;
pub const GRAD_SEEDS: u64 = 20;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn values(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn param(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::parameter(values(rng, shape.iter().product(), -1.0, 1.0), shape).unwrap()
}

pub fn constant(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_vec(values(rng, shape.iter().product(), -1.0, 1.0), shape).unwrap()
}

/// Reduces any output to a scalar with fixed random weights, so every
/// output component contributes a distinct gradient.
pub fn probe(out: &Tensor<f64>, weights: &Tensor<f64>) -> Result<Tensor<f64>> {
    out.mul(weights)?.sum_all()
}

/// One gradient-check case: name and a function from seed to report.
pub type Case = (&'static str, fn(u64) -> GradCheckReport);

fn check(inputs: &[Tensor<f64>], loss: impl Fn() -> Result<Tensor<f64>>) -> GradCheckReport {
    GradCheck::default().run(inputs, loss).unwrap()
}

/// Checks a unary op on a `[3, 4]` input against a weighted-sum probe.
fn unary(seed: u64, lo: f64, hi: f64, op: impl Fn(&Tensor<f64>) -> Result<Tensor<f64>>) -> GradCheckReport {
    let mut r = rng(seed);
    let x = Tensor::parameter(values(&mut r, 12, lo, hi), &[3, 4]).unwrap();
    let out_shape = op(&x).unwrap().shape().to_vec();
    let w = constant(&mut r, &out_shape);
    check(&[x.clone()], || probe(&op(&x)?, &w))
}

fn binary(seed: u64, a_shape: &[usize], b_shape: &[usize], op: impl Fn(&Tensor<f64>, &Tensor<f64>) -> Result<Tensor<f64>>) -> GradCheckReport {
    let mut r = rng(seed);
    let a = param(&mut r, a_shape);
    let b = param(&mut r, b_shape);
    let out_shape = op(&a, &b).unwrap().shape().to_vec();
    let w = constant(&mut r, &out_shape);
    check(&[a.clone(), b.clone()], || probe(&op(&a, &b)?, &w))
}

/// Values bounded away from zero so kinks (ReLU, |x|) are never straddled.
fn away_from_zero(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    values(r, n, 0.1, 1.0)
        .into_iter()
        .map(|v| if r.gen_bool(0.5) { v } else { -v })
        .collect()
}

pub fn op_cases() -> Vec<Case> {
    vec![
        ("add", |s| binary(s, &[3, 4], &[3, 4], |a, b| a.add(b))),
        ("sub", |s| binary(s, &[3, 4], &[3, 4], |a, b| a.sub(b))),
        ("mul", |s| binary(s, &[3, 4], &[3, 4], |a, b| a.mul(b))),
        ("add_bias", |s| binary(s, &[2, 3, 4], &[4], |a, b| a.add_bias(b))),
        ("mul_scalar", |s| binary(s, &[3, 4], &[1], |a, b| a.mul_scalar(b))),
        ("matmul", |s| binary(s, &[2, 3, 4], &[4, 5], |a, b| a.matmul(b))),
        ("bmm", |s| binary(s, &[2, 3, 4], &[2, 4, 5], |a, b| a.bmm(b))),
        ("concat", |s| binary(s, &[2, 3, 4], &[2, 1, 4], |a, b| Tensor::concat(&[a.clone(), b.clone()], 1))),
        ("scale", |s| unary(s, -2.0, 2.0, |x| x.scale(-1.7))),
        ("neg", |s| unary(s, -2.0, 2.0, |x| x.neg())),
        ("exp", |s| unary(s, -2.0, 2.0, |x| x.exp())),
        ("sigmoid", |s| unary(s, -4.0, 4.0, |x| x.sigmoid())),
        ("clamp", |s| {
            let mut r = rng(s);
            // keep every coordinate at least 0.1 from either bound
            let data = away_from_zero(&mut r, 12).into_iter().map(|v| v * 2.0).collect::<Vec<_>>();
            let data: Vec<f64> = data.into_iter().filter(|v| (v.abs() - 1.0).abs() > 0.1).collect();
            let n = data.len();
            let x = Tensor::parameter(data, &[n]).unwrap();
            let w = constant(&mut r, &[n]);
            check(&[x.clone()], || probe(&x.clamp(-1.0, 1.0)?, &w))
        }),
        ("relu", |s| {
            let mut r = rng(s);
            let x = Tensor::parameter(away_from_zero(&mut r, 12), &[3, 4]).unwrap();
            let w = constant(&mut r, &[3, 4]);
            check(&[x.clone()], || probe(&x.relu()?, &w))
        }),
        ("sum_all", |s| unary(s, -2.0, 2.0, |x| x.sum_all()?.scale(1.3))),
        ("mean_all", |s| unary(s, -2.0, 2.0, |x| x.mean_all()?.scale(1.3))),
        ("sum_axis", |s| unary(s, -2.0, 2.0, |x| x.reshape(&[3, 2, 2])?.sum_axis(1))),
        ("mean_axis", |s| unary(s, -2.0, 2.0, |x| x.reshape(&[3, 2, 2])?.mean_axis(0))),
        ("reshape", |s| unary(s, -2.0, 2.0, |x| x.reshape(&[2, 6]))),
        ("permute", |s| unary(s, -2.0, 2.0, |x| x.reshape(&[3, 2, 2])?.permute(&[2, 0, 1]))),
        ("transpose", |s| unary(s, -2.0, 2.0, |x| x.transpose(0, 1))),
        ("softmax_rows", |s| unary(s, -3.0, 3.0, |x| x.softmax_rows())),
        ("log_softmax_rows", |s| unary(s, -3.0, 3.0, |x| x.log_softmax_rows())),
        ("select_per_row", |s| unary(s, -2.0, 2.0, |x| x.select_per_row(&[3, 0, 2]))),
        ("l2_normalize", |s| unary(s, -2.0, 2.0, |x| x.l2_normalize())),
        ("bce_with_logits", |s| {
            let mut r = rng(s);
            let x = param(&mut r, &[3, 4]);
            let y = Tensor::from_vec((0..12).map(|_| if r.gen_bool(0.5) { 1.0 } else { 0.0 }).collect(), &[3, 4]).unwrap();
            check(&[x.clone()], || x.scale(3.0)?.bce_with_logits(&y))
        }),
        ("conv2d_3x3", |s| {
            let mut r = rng(s);
            let x = param(&mut r, &[2, 2, 5, 4]);
            let k = param(&mut r, &[3, 2, 3, 3]);
            let b = param(&mut r, &[3]);
            let w = constant(&mut r, &[2, 3, 5, 4]);
            check(&[x.clone(), k.clone(), b.clone()], || probe(&x.conv2d_3x3(&k, &b)?, &w))
        }),
        ("max_pool2x2", |s| {
            let mut r = rng(s);
            // distinct values on a coarse grid: no ties within a pooling window
            let mut data: Vec<f64> = (0..2 * 5 * 4).map(|i| i as f64 * 0.1).collect();
            use rand::seq::SliceRandom;
            data.shuffle(&mut r);
            let x = Tensor::parameter(data, &[1, 2, 5, 4]).unwrap();
            let w = constant(&mut r, &[1, 2, 3, 2]);
            check(&[x.clone()], || probe(&x.max_pool2x2()?, &w))
        }),
        ("contrastive_loss", |s| {
            let mut r = rng(s);
            let a = param(&mut r, &[4, 3]);
            let l = param(&mut r, &[4, 3]);
            let t = Tensor::parameter(vec![r.gen_range(-3.0..-0.5)], &[1]).unwrap();
            check(&[a.clone(), l.clone(), t.clone()], || {
                contrastive_loss(&a.l2_normalize()?, &l.l2_normalize()?, &t)
            })
        }),
        ("total_loss", |s| {
            let mut r = rng(s);
            let a = param(&mut r, &[4, 3]);
            let l = param(&mut r, &[4, 3]);
            let x = param(&mut r, &[4, 2]);
            let y = Tensor::from_vec(vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0], &[4, 2]).unwrap();
            let t = Tensor::parameter(vec![-1.0], &[1]).unwrap();
            check(&[a.clone(), l.clone(), x.clone(), t.clone()], || {
                let align = contrastive_loss(&a, &l, &t)?;
                total_loss(Some(&align), &x.bce_with_logits(&y)?, 0.3)
            })
        }),
        ("gcn_classify", |s| {
            let mut r = rng(s);
            let features = param(&mut r, &[4, 5]);
            let adjacency = Tensor::from_vec(values(&mut r, 16, 0.0, 0.5), &[4, 4]).unwrap();
            let weights = vec![param(&mut r, &[5, 6]), param(&mut r, &[6, 3])];
            let fused = param(&mut r, &[2, 3]);
            let w = constant(&mut r, &[2, 4]);
            let mut inputs = vec![features.clone(), fused.clone()];
            inputs.extend(weights.iter().cloned());
            check(&inputs, || {
                let nodes = gcn_forward(&features, &adjacency, &weights)?;
                probe(&classify(&fused, &nodes)?, &w)
            })
        }),
    ]
}

/// A model with every width small enough to finite-difference in full.
pub fn tiny_config() -> RunConfig {
    let mut config = RunConfig::default();
    config.audio.channels = vec![2, 3];
    config.text.embed_dim = 4;
    config.text.out_dim = 3;
    config.fusion.attn_dim = 4;
    config.fusion.heads = 2;
    config.fusion.out_dim = 3;
    config.graph.hidden = 5;
    config.loss.proj_dim = 2;
    config
}

/// Full composite graph: encoders → fusion → head → composite loss, with
/// every parameter moved off its initial value so no path is inert.
pub fn composite_case(seed: u64, config: &RunConfig) -> GradCheckReport {
    let mut r = rng(seed);
    let genres: Vec<String> = ["rock", "pop", "jazz"].iter().map(|s| s.to_string()).collect();
    let vocab = Vocab::build(["rock pop jazz la la di da"]);
    let labels = vec![vec![0], vec![0, 1], vec![2]];
    let counts = count_cooccurrence(&labels, 3).unwrap();
    let model = Model::<f64>::new(config, &genres, &vocab, counts).unwrap();
    let params: Vec<Tensor<f64>> = model.parameters().into_iter().map(|(_, t)| t).collect();
    for p in &params {
        let n = p.numel();
        p.data_mut().copy_from_slice(&values(&mut r, n, -0.8, 0.8));
    }
    let mel = Tensor::from_vec(values(&mut r, 3 * 8 * 6, 0.0, 1.0), &[3, 1, 8, 6]).unwrap();
    let tokens = vec![vec![4, 5, 6, 7, 0], vec![2, 3, 7, 0, 0], vec![6, 4, 2, 5, 6]];
    let y = Tensor::from_vec(vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0], &[3, 3]).unwrap();
    check(&params, || {
        let out = model.forward(&mel, &tokens)?;
        Ok(model.loss(&out, &y)?.total)
    })
}

/// Writes a synthetic dataset to `dir` and opens it.
pub fn synthetic(dir: &std::path::Path, spec: &SyntheticSpec, config: &mut RunConfig) -> Dataset {
    synth_dataset(spec, dir).unwrap();
    config.data.dir = dir.to_path_buf();
    Dataset::open(&config.data).unwrap()
}
