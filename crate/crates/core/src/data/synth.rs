//! Synthetic dataset with planted genre co-occurrence, genre-specific tones
//! in the audio and genre-specific words in the lyrics.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::manifest::{save_genres, write_records, TrackRecord};
use crate::dsp::{mel_spectrogram, write_mel, write_wav, AudioClip, MelConfig};
use crate::error::{Error, Result};
use crate::graph::{count_cooccurrence, CooccurrenceCounts};
use crate::text::Vocab;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const GENRES_FILE: &str = "genres.json";
pub const VOCAB_FILE: &str = "vocab.json";

const GENRE_NAMES: [&str; 16] = [
    "rock", "pop", "jazz", "blues", "metal", "folk", "soul", "reggae", "country", "punk", "disco", "funk", "techno",
    "gospel", "ambient", "house",
];

const STOP_WORDS: [&str; 32] = [
    "the", "a", "and", "i", "you", "me", "we", "my", "your", "in", "on", "of", "to", "is", "it", "oh", "yeah", "baby",
    "love", "night", "day", "heart", "down", "up", "all", "now", "so", "be", "with", "for", "never", "again",
];

/// Genres `a` and `b` co-occur in a `joint` fraction of tracks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenrePair {
    pub a: usize,
    pub b: usize,
    pub joint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_tracks: usize,
    pub num_genres: usize,
    pub seed: u64,
    pub mel: MelConfig,
    pub genre_names: Vec<String>,
    /// Target fraction of tracks carrying each genre.
    pub marginals: Vec<f64>,
    /// Vertex-disjoint correlated pairs.
    pub pairs: Vec<GenrePair>,
    /// Sinusoid frequencies (Hz) per genre.
    pub signatures: Vec<Vec<f64>>,
    pub vocabularies: Vec<Vec<String>>,
    pub stop_words: Vec<String>,
    pub lyric_len: (usize, usize),
    /// Fraction of lyric tokens drawn from the track's genre words.
    pub genre_word_fraction: f64,
    pub tone_amplitude: f64,
    pub snr_db: f64,
    /// Also write the raw audio as WAV next to the mel cache.
    pub write_audio: bool,
    pub max_rejections: usize,
}

impl SyntheticSpec {
    pub fn new(num_tracks: usize, num_genres: usize, seed: u64) -> Self {
        let genre_names: Vec<String> = (0..num_genres)
            .map(|g| match GENRE_NAMES.get(g) {
                Some(n) => n.to_string(),
                None => format!("genre{g}"),
            })
            .collect();
        let marginals = (0..num_genres)
            .map(|g| match g {
                0 => 0.6,
                1 => 0.45,
                _ => 0.25,
            })
            .collect();
        let pairs = [(0, 1, 0.4), (2, 3, 0.15), (4, 5, 0.15)]
            .into_iter()
            .filter(|&(_, b, _)| b < num_genres)
            .map(|(a, b, joint)| GenrePair { a, b, joint })
            .collect();
        // log-spaced tones, interleaved so every genre spans the range
        let (lo, hi) = (150.0f64, 6000.0f64);
        let n = 3 * num_genres;
        let freq = |k: usize| lo * (hi / lo).powf(k as f64 / (n.max(2) - 1) as f64);
        let signatures = (0..num_genres)
            .map(|g| (0..3).map(|j| freq(j * num_genres + g)).collect())
            .collect();
        let vocabularies = genre_names
            .iter()
            .map(|name| (0..24).map(|k| format!("{name}{k}")).collect())
            .collect();
        SyntheticSpec {
            num_tracks,
            num_genres,
            seed,
            mel: MelConfig::default(),
            genre_names,
            marginals,
            pairs,
            signatures,
            vocabularies,
            stop_words: STOP_WORDS.iter().map(|s| s.to_string()).collect(),
            lyric_len: (50, 200),
            genre_word_fraction: 0.7,
            tone_amplitude: 0.1,
            snr_db: 10.0,
            write_audio: false,
            max_rejections: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.num_genres;
        if g == 0 || self.num_tracks == 0 {
            return Err(Error::Config("synthetic dataset needs tracks and genres".into()));
        }
        self.mel.validate()?;
        if self.genre_names.len() != g || self.marginals.len() != g || self.signatures.len() != g || self.vocabularies.len() != g {
            return Err(Error::Config("per-genre spec lists must have one entry per genre".into()));
        }
        if let Some(p) = self.marginals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("marginal {p} outside [0, 1]")));
        }
        let nyquist = self.mel.sample_rate as f64 / 2.0;
        if let Some(f) = self.signatures.iter().flatten().find(|&&f| !(f > 0.0 && f < nyquist)) {
            return Err(Error::Config(format!("tone {f} Hz not below Nyquist {nyquist} Hz")));
        }
        let mut seen = BTreeSet::new();
        for w in self.vocabularies.iter().flatten() {
            if !seen.insert(w) || self.stop_words.contains(w) {
                return Err(Error::Config(format!("word {w:?} appears in more than one vocabulary")));
            }
        }
        if self.vocabularies.iter().any(Vec::is_empty) || self.stop_words.is_empty() {
            return Err(Error::Config("vocabularies must be non-empty".into()));
        }
        let (lo, hi) = self.lyric_len;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("bad lyric length range {lo}..={hi}")));
        }
        let mut used = BTreeSet::new();
        for p in &self.pairs {
            if p.a >= g || p.b >= g || p.a == p.b || !used.insert(p.a) || !used.insert(p.b) {
                return Err(Error::Config(format!("pair ({}, {}) must name two distinct unused genres", p.a, p.b)));
            }
            let (ma, mb) = (self.marginals[p.a], self.marginals[p.b]);
            if p.joint < 0.0 || p.joint > ma.min(mb) || ma + mb - p.joint > 1.0 + 1e-12 {
                return Err(Error::Config(format!(
                    "pair ({}, {}) joint {} unreachable with marginals {ma} and {mb}",
                    p.a, p.b, p.joint
                )));
            }
        }
        Ok(())
    }

    /// Draws one non-empty genre set. Each correlated pair is sampled from
    /// its 2×2 joint table, other genres independently; empty draws are
    /// rejected.
    pub fn sample_genres(&self, rng: &mut impl Rng) -> Result<Vec<usize>> {
        let paired: BTreeSet<usize> = self.pairs.iter().flat_map(|p| [p.a, p.b]).collect();
        for _ in 0..self.max_rejections.max(1) {
            let mut set = Vec::new();
            for p in &self.pairs {
                let (ma, mb) = (self.marginals[p.a], self.marginals[p.b]);
                let u: f64 = rng.gen();
                if u < p.joint {
                    set.extend([p.a, p.b]);
                } else if u < ma {
                    set.push(p.a);
                } else if u < ma + mb - p.joint {
                    set.push(p.b);
                }
            }
            for g in (0..self.num_genres).filter(|g| !paired.contains(g)) {
                if rng.gen::<f64>() < self.marginals[g] {
                    set.push(g);
                }
            }
            if !set.is_empty() {
                set.sort_unstable();
                return Ok(set);
            }
        }
        Err(Error::Config(format!(
            "no non-empty genre set after {} draws; marginals too small",
            self.max_rejections
        )))
    }

    pub fn render_audio(&self, genres: &[usize], rng: &mut impl Rng) -> AudioClip {
        let sr = self.mel.sample_rate as f64;
        let n = self.mel.num_samples();
        let tones: Vec<(f64, f64)> = genres
            .iter()
            .flat_map(|&g| self.signatures[g].iter())
            .map(|&f| (f, rng.gen::<f64>() * std::f64::consts::TAU))
            .collect();
        let signal_power = tones.len() as f64 * self.tone_amplitude * self.tone_amplitude / 2.0;
        let noise_std = (signal_power / 10f64.powf(self.snr_db / 10.0)).sqrt();
        // each tone advances as a unit phasor rotated once per sample
        let mut phasors: Vec<(f64, f64, f64, f64)> = tones
            .iter()
            .map(|&(f, ph)| {
                let w = std::f64::consts::TAU * f / sr;
                (ph.cos(), ph.sin(), w.cos(), w.sin())
            })
            .collect();
        let samples = (0..n)
            .map(|_| {
                let mut s = 0.0;
                for (c, si, wc, ws) in phasors.iter_mut() {
                    s += self.tone_amplitude * *si;
                    let next = (*c * *wc - *si * *ws, *si * *wc + *c * *ws);
                    (*c, *si) = next;
                }
                let noise: f64 = rng.sample(StandardNormal);
                (s + noise_std * noise).clamp(-1.0, 1.0) as f32
            })
            .collect();
        AudioClip::new(samples, self.mel.sample_rate)
    }

    pub fn render_lyrics(&self, genres: &[usize], rng: &mut impl Rng) -> String {
        let len = rng.gen_range(self.lyric_len.0..=self.lyric_len.1);
        let words: Vec<&str> = (0..len)
            .map(|_| {
                if rng.gen::<f64>() < self.genre_word_fraction {
                    let vocab = &self.vocabularies[genres[rng.gen_range(0..genres.len())]];
                    vocab[rng.gen_range(0..vocab.len())].as_str()
                } else {
                    self.stop_words[Uniform::new(0, self.stop_words.len()).sample(rng)].as_str()
                }
            })
            .collect();
        words.join(" ")
    }

    /// Genre names first, then every genre word, then the shared pool.
    pub fn vocab(&self) -> Vocab {
        let mut v = Vocab::new();
        for w in self
            .genre_names
            .iter()
            .chain(self.vocabularies.iter().flatten())
            .chain(&self.stop_words)
        {
            v.insert(w);
        }
        v
    }

    fn track_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

#[derive(Clone, Debug)]
pub struct SynthSummary {
    pub records: Vec<TrackRecord>,
    pub counts: CooccurrenceCounts,
}

/// Writes `manifest.jsonl`, `genres.json`, `vocab.json` and `mels/` (plus
/// `audio/` when requested) under `out_dir`.
pub fn synth_dataset(spec: &SyntheticSpec, out_dir: impl AsRef<Path>) -> Result<SynthSummary> {
    spec.validate()?;
    let out = out_dir.as_ref();
    fs::create_dir_all(out.join("mels"))?;
    if spec.write_audio {
        fs::create_dir_all(out.join("audio"))?;
    }
    let mut records = Vec::with_capacity(spec.num_tracks);
    let mut label_sets = Vec::with_capacity(spec.num_tracks);
    for i in 0..spec.num_tracks {
        let mut rng = spec.track_rng(i);
        let genres = spec.sample_genres(&mut rng)?;
        let lyrics = spec.render_lyrics(&genres, &mut rng);
        let audio = spec.render_audio(&genres, &mut rng);
        let id = format!("track{i:05}");
        let mel_rel = format!("mels/{id}.mel");
        write_mel(out.join(&mel_rel), &mel_spectrogram(&audio, &spec.mel)?)?;
        let audio_rel = if spec.write_audio {
            let rel = format!("audio/{id}.wav");
            write_wav(out.join(&rel), &audio)?;
            Some(rel)
        } else {
            None
        };
        records.push(TrackRecord {
            id,
            mel: mel_rel,
            lyrics: Some(lyrics),
            lyric_ids: None,
            genres: genres.iter().map(|&g| spec.genre_names[g].clone()).collect(),
            audio: audio_rel,
        });
        label_sets.push(genres);
    }
    write_records(out.join(MANIFEST_FILE), &records)?;
    save_genres(out.join(GENRES_FILE), &spec.genre_names)?;
    spec.vocab().save(out.join(VOCAB_FILE))?;
    fs::write(out.join("synth_spec.json"), serde_json::to_string_pretty(spec)?)?;
    Ok(SynthSummary {
        records,
        counts: count_cooccurrence(&label_sets, spec.num_genres)?,
    })
}
