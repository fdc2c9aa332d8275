//! Dataset ingestion, splits, batching and the synthetic generator.

mod manifest;
mod split;
mod synth;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use manifest::{load_genres, load_manifest, read_records, save_genres, write_records, TrackRecord, TrackSample};
pub use split::{split, DatasetSplit, SplitRatios};
pub use synth::{synth_dataset, GenrePair, SynthSummary, SyntheticSpec, GENRES_FILE, MANIFEST_FILE, VOCAB_FILE};

use crate::dsp::{preprocess_clip, read_mel, read_wav, write_mel, MelConfig, MelSpectrogram};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};
use crate::text::{Vocab, PAD_ID};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Directory holding the manifest and vocabularies.
    pub dir: PathBuf,
    pub manifest: String,
    pub genres: String,
    pub vocab: String,
    pub max_tokens: usize,
    pub split: SplitRatios,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: PathBuf::from("data"),
            manifest: MANIFEST_FILE.into(),
            genres: GENRES_FILE.into(),
            vocab: VOCAB_FILE.into(),
            max_tokens: 128,
            split: SplitRatios::default(),
        }
    }
}

/// Right-truncates or pads with [`PAD_ID`] to exactly `len` tokens.
pub fn fit_tokens(tokens: &[u32], len: usize) -> Vec<u32> {
    let mut out: Vec<u32> = tokens.iter().copied().take(len).collect();
    out.resize(len, PAD_ID);
    out
}

/// Tracks with their mels held in memory.
pub struct Dataset {
    pub genres: Vec<String>,
    pub vocab: Vocab,
    pub samples: Vec<TrackSample>,
    pub mels: Vec<MelSpectrogram>,
    pub max_tokens: usize,
}

/// One training batch.
pub struct Batch<T: Float> {
    pub indices: Vec<usize>,
    /// `[B, 1, mels, frames]`
    pub mel: Tensor<T>,
    /// `B` sequences of exactly `max_tokens` ids.
    pub tokens: Vec<Vec<u32>>,
    /// `[B, G]`, entries 0 or 1.
    pub labels: Tensor<T>,
}

impl Dataset {
    pub fn open(config: &DataConfig) -> Result<Self> {
        let genres = load_genres(config.dir.join(&config.genres))?;
        let vocab = Vocab::load(config.dir.join(&config.vocab))?;
        let samples = load_manifest(config.dir.join(&config.manifest), &genres, &vocab)?;
        Self::from_samples(genres, vocab, samples, config.max_tokens)
    }

    pub fn from_samples(genres: Vec<String>, vocab: Vocab, samples: Vec<TrackSample>, max_tokens: usize) -> Result<Self> {
        if max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        let mels = samples.iter().map(|s| read_mel(&s.mel_path)).collect::<Result<Vec<_>>>()?;
        if let Some(first) = mels.first() {
            if let Some((i, m)) = mels
                .iter()
                .enumerate()
                .find(|(_, m)| (m.rows, m.cols) != (first.rows, first.cols))
            {
                return Err(Error::Input(format!(
                    "mel for {} is {}x{}, expected {}x{} like the rest",
                    samples[i].id, m.rows, m.cols, first.rows, first.cols
                )));
            }
        }
        Ok(Dataset {
            genres,
            vocab,
            samples,
            mels,
            max_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_genres(&self) -> usize {
        self.genres.len()
    }

    pub fn mel_shape(&self) -> Option<(usize, usize)> {
        self.mels.first().map(|m| (m.rows, m.cols))
    }

    pub fn label_sets(&self, indices: &[usize]) -> Vec<Vec<usize>> {
        indices.iter().map(|&i| self.samples[i].genres.clone()).collect()
    }

    /// Seeded split over sample indices.
    pub fn split(&self, ratios: SplitRatios, seed: u64) -> Result<DatasetSplit<usize>> {
        split(&(0..self.len()).collect::<Vec<_>>(), ratios, seed)
    }

    pub fn batch<T: Float>(&self, indices: &[usize]) -> Result<Batch<T>> {
        let (rows, cols) = self.mel_shape().ok_or_else(|| Error::Input("empty dataset".into()))?;
        let g = self.num_genres();
        let mut mel = Vec::with_capacity(indices.len() * rows * cols);
        let mut labels = vec![T::zero(); indices.len() * g];
        let mut tokens = Vec::with_capacity(indices.len());
        for (b, &i) in indices.iter().enumerate() {
            mel.extend(self.mels[i].values.iter().map(|&v| T::lit(v as f64)));
            tokens.push(fit_tokens(&self.samples[i].lyric_tokens, self.max_tokens));
            for &k in &self.samples[i].genres {
                labels[b * g + k] = T::one();
            }
        }
        Ok(Batch {
            indices: indices.to_vec(),
            mel: Tensor::from_vec(mel, &[indices.len(), 1, rows, cols])?,
            tokens,
            labels: Tensor::from_vec(labels, &[indices.len(), g])?,
        })
    }

    /// Sample order for one epoch, chunked into batches.
    pub fn epoch_batches(&self, indices: &[usize], batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
        epoch_order(indices, batch_size, seed, epoch)
    }
}

/// Per-epoch seeded shuffle, then consecutive chunks of `batch_size` (the
/// last one may be short).
pub fn epoch_order(indices: &[usize], batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if indices.is_empty() {
        return Err(Error::Input("cannot batch an empty split".into()));
    }
    let mut order = indices.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    order.shuffle(&mut rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Converts every record's `audio` WAV into a mel cache under `out_dir`, at
/// the record's `mel` path. A copy of the manifest is written beside the
/// caches with audio paths rebased onto the source directory, and the genre
/// and token vocabularies are copied when present, so `out_dir` loads as a
/// data directory. Returns the number of tracks converted.
pub fn preprocess_manifest(manifest: impl AsRef<Path>, out_dir: impl AsRef<Path>, config: &MelConfig) -> Result<usize> {
    config.validate()?;
    let manifest = manifest.as_ref();
    let out_dir = out_dir.as_ref();
    let base = manifest.parent().unwrap_or(Path::new(""));
    let mut records = read_records(manifest)?;
    std::fs::create_dir_all(out_dir)?;
    for (line, r) in records.iter_mut().enumerate() {
        let Some(audio) = &r.audio else {
            return Err(Error::Manifest {
                path: manifest.to_path_buf(),
                line: line + 1,
                reason: format!("track {:?} has no audio path to preprocess", r.id),
            });
        };
        let source = base.join(audio);
        let mel = preprocess_clip(&read_wav(&source)?, config)?;
        let target = out_dir.join(&r.mel);
        if let Some(dir) = target.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_mel(target, &mel)?;
        r.audio = Some(std::path::absolute(&source)?.to_string_lossy().into_owned());
    }
    write_records(out_dir.join(MANIFEST_FILE), &records)?;
    for name in [GENRES_FILE, VOCAB_FILE] {
        let from = base.join(name);
        if from.is_file() && std::path::absolute(&from)? != std::path::absolute(out_dir.join(name))? {
            std::fs::copy(&from, out_dir.join(name))?;
        }
    }
    Ok(records.len())
}
