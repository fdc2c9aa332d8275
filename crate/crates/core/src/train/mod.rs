//! Training, evaluation, checkpoints and the λ sweep.

mod checkpoint;
mod config;
mod metrics;
mod model;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use checkpoint::{BestMetric, Checkpoint, CheckpointHeader, TensorEntry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Ablation, EvalConfig, OptimConfig, RunConfig, TextConfig};
pub use metrics::{jaccard, sample_f1, threshold_predictions, GenreMetrics, MetricsReport};
pub use model::{prior_logits, Fusion, Head, Losses, Model, Outputs};

use crate::data::{epoch_order, Dataset, DatasetSplit};
use crate::error::{Error, Result};
use crate::graph::{count_cooccurrence, GenreGraph};
use crate::tensor::{no_grad, Optimizer, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_bce: f64,
    pub train_align: Option<f64>,
    pub val_accuracy: f64,
    pub val_f: f64,
    pub seconds: f64,
}

pub struct TrainOutcome {
    /// The model restored to its best validation epoch.
    pub model: Model<f32>,
    pub checkpoint: Checkpoint,
    pub split: DatasetSplit<usize>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub test: MetricsReport,
}

pub struct Evaluation {
    pub report: MetricsReport,
    /// `[N, G]` sigmoid outputs, row-major.
    pub probs: Vec<f64>,
}

fn check_genres(model: &Model<f32>, dataset: &Dataset) -> Result<()> {
    if model.genres() != dataset.genres.as_slice() {
        return Err(Error::Config(format!(
            "genre vocabulary {:?} does not match the model's {:?}",
            dataset.genres,
            model.genres()
        )));
    }
    Ok(())
}

/// Scores `indices` of `dataset` at `threshold`, without recording gradients.
pub fn evaluate(model: &Model<f32>, dataset: &Dataset, indices: &[usize], threshold: f64) -> Result<Evaluation> {
    check_genres(model, dataset)?;
    if indices.is_empty() {
        return Err(Error::Input("cannot evaluate an empty split".into()));
    }
    let mut probs = Vec::with_capacity(indices.len() * dataset.num_genres());
    no_grad(|| -> Result<()> {
        for chunk in indices.chunks(model.config.eval.batch_size.max(1)) {
            let batch = dataset.batch::<f32>(chunk)?;
            let logits = model.forward(&batch.mel, &batch.tokens)?.logits.sigmoid()?;
            probs.extend(logits.to_vec().into_iter().map(|p| p as f64));
        }
        Ok(())
    })?;
    let pred = threshold_predictions(&probs, dataset.num_genres(), threshold);
    let report = MetricsReport::compute(&dataset.label_sets(indices), &pred, &dataset.genres, threshold)?;
    Ok(Evaluation { report, probs })
}

/// Scores the constant predictor that outputs every genre whose
/// training-split frequency reaches `threshold`.
pub fn label_prior_baseline(dataset: &Dataset, split: &DatasetSplit<usize>, threshold: f64) -> Result<MetricsReport> {
    let counts = count_cooccurrence(&dataset.label_sets(&split.train), dataset.num_genres())?;
    let n = counts.num_samples.max(1) as f64;
    let prior: Vec<usize> = (0..dataset.num_genres())
        .filter(|&k| counts.occurrences[k] as f64 / n >= threshold)
        .collect();
    let pred = vec![prior; split.test.len()];
    MetricsReport::compute(&dataset.label_sets(&split.test), &pred, &dataset.genres, threshold)
}

/// The genre graph a run with `config` would build on `dataset`.
pub fn build_graph(config: &RunConfig, dataset: &Dataset) -> Result<GenreGraph> {
    let split = dataset.split(config.data.split, config.split_seed)?;
    let counts = count_cooccurrence(&dataset.label_sets(&split.train), dataset.num_genres())?;
    let model = Model::<f32>::new(config, &dataset.genres, &dataset.vocab, counts)?;
    Ok(model.graph)
}

fn snapshot(model: &Model<f32>) -> Vec<Vec<f32>> {
    model.state().iter().map(|(_, t)| t.to_vec()).collect()
}

fn restore(model: &Model<f32>, snap: &[Vec<f32>]) {
    for ((_, t), values) in model.state().iter().zip(snap) {
        t.data_mut().copy_from_slice(values);
    }
}

/// Full training run: seeded split, epochs of Adam/SGD steps, best-val-F
/// model selection, then a test-split evaluation of the selected model.
pub fn train(config: &RunConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    train_with(config, dataset, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(config: &RunConfig, dataset: &Dataset, mut on_epoch: impl FnMut(&EpochLog)) -> Result<TrainOutcome> {
    config.validate()?;
    let split = dataset.split(config.data.split, config.split_seed)?;
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(Error::Input(format!(
            "dataset of {} tracks leaves an empty split ({}/{}/{})",
            dataset.len(),
            split.train.len(),
            split.val.len(),
            split.test.len()
        )));
    }
    let counts = count_cooccurrence(&dataset.label_sets(&split.train), dataset.num_genres())?;
    let model = Model::<f32>::new(config, &dataset.genres, &dataset.vocab, counts)?;
    let params: Vec<Tensor<f32>> = model.parameters().into_iter().map(|(_, t)| t).collect();
    let mut optimizer = Optimizer::new(config.optim.optimizer, config.optim.schedule())?;
    let lambda = config.effective_lambda();

    let mut log = Vec::with_capacity(config.optim.epochs);
    let mut best: Option<(usize, f64, Vec<Vec<f32>>)> = None;
    for epoch in 0..config.optim.epochs {
        let started = Instant::now();
        let lr = config.optim.schedule().lr_at(epoch);
        let (mut loss_sum, mut bce_sum, mut align_sum, mut seen) = (0.0, 0.0, 0.0, 0usize);
        let batches = epoch_order(&split.train, config.optim.batch_size, config.seed, epoch)?;
        for (step, indices) in batches.iter().enumerate() {
            let diverged = |reason: String| Error::Diverged {
                epoch,
                step,
                lr,
                lambda,
                reason,
            };
            let result = (|| -> Result<Losses<f32>> {
                let batch = dataset.batch::<f32>(indices)?;
                params.iter().for_each(Tensor::zero_grad);
                let outputs = model.forward(&batch.mel, &batch.tokens)?;
                let losses = model.loss(&outputs, &batch.labels)?;
                losses.total.backward()?;
                optimizer.step(&params, epoch)?;
                Ok(losses)
            })();
            let losses = match result {
                Ok(l) => l,
                Err(Error::NonFinite { op }) => return Err(diverged(format!("non-finite value in {op}"))),
                Err(e) => return Err(e),
            };
            let total = losses.total.item()? as f64;
            if !total.is_finite() {
                return Err(diverged(format!("loss is {total}")));
            }
            let b = indices.len() as f64;
            loss_sum += total * b;
            bce_sum += losses.bce * b;
            align_sum += losses.align.unwrap_or(0.0) * b;
            seen += indices.len();
        }
        params.iter().for_each(Tensor::clear_grad);
        let val = evaluate(&model, dataset, &split.val, config.eval.threshold)?.report;
        let entry = EpochLog {
            epoch,
            lr,
            train_loss: loss_sum / seen as f64,
            train_bce: bce_sum / seen as f64,
            train_align: (lambda > 0.0).then(|| align_sum / seen as f64),
            val_accuracy: val.accuracy,
            val_f: val.f_measure,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.5} bce {:.5} val acc {:.4} val F {:.4} ({:.1}s)",
            entry.train_loss,
            entry.train_bce,
            entry.val_accuracy,
            entry.val_f,
            entry.seconds
        );
        on_epoch(&entry);
        if best.as_ref().is_none_or(|(_, f, _)| val.f_measure > *f) {
            best = Some((epoch, val.f_measure, snapshot(&model)));
        }
        log.push(entry);
    }
    let (best_epoch, best_f) = match &best {
        Some((e, f, snap)) => {
            restore(&model, snap);
            (*e, *f)
        }
        None => (0, 0.0),
    };
    let test = evaluate(&model, dataset, &split.test, config.eval.threshold)?.report;
    let checkpoint = Checkpoint::from_model(
        &model,
        dataset.vocab.len(),
        best_epoch,
        BestMetric {
            metric: "val_f_measure".into(),
            value: best_f,
        },
    );
    Ok(TrainOutcome {
        model,
        checkpoint,
        split,
        log,
        best_epoch,
        test,
    })
}

pub fn epoch_log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,lr,train_loss,train_bce,train_align,val_accuracy,val_f,seconds\n");
    for e in log {
        let align = e.train_align.map_or(String::new(), |a| format!("{a}"));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.3}",
            e.epoch, e.lr, e.train_loss, e.train_bce, align, e.val_accuracy, e.val_f, e.seconds
        );
    }
    s
}

/// Writes `checkpoint.mgck`, `metrics.json`, `epochs.csv` and `config.json`.
pub fn write_run(out_dir: impl AsRef<Path>, outcome: &TrainOutcome) -> Result<()> {
    let out = out_dir.as_ref();
    fs::create_dir_all(out)?;
    outcome.checkpoint.save(out.join("checkpoint.mgck"))?;
    outcome.checkpoint.header.config.save(out.join("config.json"))?;
    fs::write(out.join("epochs.csv"), epoch_log_csv(&outcome.log))?;
    let metrics = serde_json::json!({
        "best_epoch": outcome.best_epoch,
        "best_val_f_measure": outcome.checkpoint.header.best.value,
        "test": outcome.test,
        "epochs": outcome.log,
    });
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub accuracy: f64,
    pub f_measure: f64,
}

/// One training run per λ; reports test accuracy and F of each.
pub fn lambda_sweep(config: &RunConfig, dataset: &Dataset, values: &[f64]) -> Result<Vec<SweepRow>> {
    if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Config(format!("sweep value {bad} outside [0, 1]")));
    }
    values
        .iter()
        .map(|&lambda| {
            let mut c = config.clone();
            c.loss.lambda = lambda;
            c.ablation.use_al_loss = true;
            let outcome = train(&c, dataset)?;
            Ok(SweepRow {
                lambda,
                accuracy: outcome.test.accuracy,
                f_measure: outcome.test.f_measure,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("lambda,accuracy,f_measure\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.lambda, r.accuracy, r.f_measure);
    }
    s
}
