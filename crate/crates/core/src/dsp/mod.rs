//! Audio → log-mel spectrogram frontend.
//!
//! The pipeline is: crop/pad to a fixed duration, Hann-windowed STFT with
//! reflect padding, power spectrum, triangular mel filterbank, `log(1 + x)`.

mod cache;
mod mel;
mod wav;

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use cache::{decode_mel, encode_mel, read_mel, write_mel, MEL_MAGIC, MEL_VERSION};
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank, MelScale};
pub use wav::{read_wav, write_wav};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 22050;

/// Mono audio in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        AudioClip {
            samples,
            sample_rate,
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub seconds: f64,
    pub scale: MelScale,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            sample_rate: DEFAULT_SAMPLE_RATE,
            n_fft: 2048,
            hop: 512,
            n_mels: 128,
            seconds: 30.0,
            scale: MelScale::Slaney,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(Error::Config(format!("n_fft must be a power of two, got {}", self.n_fft)));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::Config(format!(
                "hop must be in 1..={}, got {}",
                self.n_fft, self.hop
            )));
        }
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be positive".into()));
        }
        if !(self.seconds > 0.0) {
            return Err(Error::Config(format!("seconds must be positive, got {}", self.seconds)));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.seconds * self.sample_rate as f64).round() as usize
    }

    /// Frame count under center padding.
    pub fn num_frames(&self, num_samples: usize) -> usize {
        num_frames(num_samples, self.hop)
    }
}

pub fn num_frames(num_samples: usize, hop: usize) -> usize {
    1 + num_samples / hop
}

/// `rows × cols` log-mel energies, row-major (mel band major).
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

impl MelSpectrogram {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::Input(format!(
                "mel buffer has {} values, expected {rows}×{cols}",
                values.len()
            )));
        }
        Ok(MelSpectrogram { rows, cols, values })
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }
}

/// Magnitude spectrogram, `bins × frames`, row-major.
#[derive(Clone, Debug)]
pub struct Spectrogram {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<f64>,
}

impl Spectrogram {
    pub fn at(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.frames + frame]
    }

    /// Bin with the largest magnitude in one frame.
    pub fn argmax_bin(&self, frame: usize) -> usize {
        (0..self.bins)
            .max_by(|&a, &b| self.at(a, frame).total_cmp(&self.at(b, frame)))
            .unwrap_or(0)
    }
}

/// Exactly `seconds × rate` samples: long clips keep the centered window,
/// short clips are zero-padded on both sides (extra sample on the right).
pub fn crop_or_pad(audio: &AudioClip, seconds: f64) -> Result<AudioClip> {
    if audio.samples.is_empty() {
        return Err(Error::Input("empty audio clip".into()));
    }
    if !(seconds > 0.0) {
        return Err(Error::Config(format!("seconds must be positive, got {seconds}")));
    }
    let target = (seconds * audio.sample_rate as f64).round() as usize;
    let len = audio.samples.len();
    let samples = if len >= target {
        let start = (len - target) / 2;
        audio.samples[start..start + target].to_vec()
    } else {
        let left = (target - len) / 2;
        let mut out = vec![0.0; target];
        out[left..left + len].copy_from_slice(&audio.samples);
        out
    };
    Ok(AudioClip::new(samples, audio.sample_rate))
}

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Center padding by `pad` on both sides. Mirrors without repeating the edge
/// sample; falls back to zeros where the signal is too short to mirror.
fn reflect_pad(x: &[f32], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n + 2 * pad];
    for (i, v) in x.iter().enumerate() {
        out[pad + i] = *v as f64;
    }
    if n > pad {
        for i in 0..pad {
            out[pad - 1 - i] = x[i + 1] as f64;
            out[pad + n + i] = x[n - 2 - i] as f64;
        }
    }
    out
}

fn stft_with<F: FnMut(usize, &[Complex<f64>])>(
    samples: &[f32],
    n_fft: usize,
    hop: usize,
    mut visit: F,
) -> Result<usize> {
    if !n_fft.is_power_of_two() || n_fft < 2 {
        return Err(Error::Config(format!("n_fft must be a power of two, got {n_fft}")));
    }
    if hop == 0 || hop > n_fft {
        return Err(Error::Config(format!("hop must be in 1..={n_fft}, got {hop}")));
    }
    let frames = num_frames(samples.len(), hop);
    let padded = reflect_pad(samples, n_fft / 2);
    let window = hann_window(n_fft);
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for t in 0..frames {
        let start = t * hop;
        for (k, c) in buf.iter_mut().enumerate() {
            let v = padded.get(start + k).copied().unwrap_or(0.0);
            *c = Complex::new(v * window[k], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        visit(t, &buf[..n_fft / 2 + 1]);
    }
    Ok(frames)
}

/// Hann-windowed, center-padded STFT magnitudes.
pub fn stft_magnitude(audio: &AudioClip, n_fft: usize, hop: usize) -> Result<Spectrogram> {
    let bins = n_fft / 2 + 1;
    let frames = num_frames(audio.samples.len(), hop);
    let mut data = vec![0.0; bins * frames];
    stft_with(&audio.samples, n_fft, hop, |t, spec| {
        for (b, c) in spec.iter().enumerate() {
            data[b * frames + t] = c.norm();
        }
    })?;
    Ok(Spectrogram { bins, frames, data })
}

/// Mel-band energies before log compression, `n_mels × frames` row-major.
pub fn mel_power(audio: &AudioClip, config: &MelConfig) -> Result<(usize, Vec<f64>)> {
    config.validate()?;
    let bank = MelFilterbank::new(config.sample_rate, config.n_fft, config.n_mels, config.scale)?;
    let frames = num_frames(audio.samples.len(), config.hop);
    let mut out = vec![0.0; config.n_mels * frames];
    let mut power = vec![0.0; config.n_fft / 2 + 1];
    stft_with(&audio.samples, config.n_fft, config.hop, |t, spec| {
        for (p, c) in power.iter_mut().zip(spec) {
            *p = c.norm_sqr();
        }
        for m in 0..config.n_mels {
            out[m * frames + t] = bank.apply_band(m, &power);
        }
    })?;
    Ok((frames, out))
}

/// Log-compressed mel spectrogram, `n_mels × (1 + len / hop)`.
pub fn mel_spectrogram(audio: &AudioClip, config: &MelConfig) -> Result<MelSpectrogram> {
    let (frames, power) = mel_power(audio, config)?;
    let values = power.iter().map(|&p| p.ln_1p() as f32).collect();
    MelSpectrogram::new(config.n_mels, frames, values)
}

/// Crop/pad then convert, the full per-track preprocessing recipe.
pub fn preprocess_clip(audio: &AudioClip, config: &MelConfig) -> Result<MelSpectrogram> {
    if audio.sample_rate != config.sample_rate {
        return Err(Error::Input(format!(
            "sample rate {} Hz does not match the configured {} Hz (resampling is not supported)",
            audio.sample_rate, config.sample_rate
        )));
    }
    let clip = crop_or_pad(audio, config.seconds)?;
    mel_spectrogram(&clip, config)
}
