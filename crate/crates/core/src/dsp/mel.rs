use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MelScale {
    /// Linear below 1 kHz, logarithmic above (Auditory Toolbox).
    #[default]
    Slaney,
    /// `2595 · log10(1 + f/700)`.
    Htk,
}

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

pub fn hz_to_mel(hz: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
        MelScale::Slaney if hz >= MIN_LOG_HZ => MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step(),
        MelScale::Slaney => hz / F_SP,
    }
}

pub fn mel_to_hz(mel: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 700.0 * (10f64.powf(mel / 2595.0) - 1.0),
        MelScale::Slaney if mel >= MIN_LOG_MEL => MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp(),
        MelScale::Slaney => mel * F_SP,
    }
}

/// Area-normalized triangular filters spanning 0 Hz to Nyquist.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    /// Per band: first FFT bin with nonzero weight, then the weights.
    bands: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn new(sample_rate: u32, n_fft: usize, n_mels: usize, scale: MelScale) -> Result<Self> {
        if n_mels == 0 || n_fft < 2 {
            return Err(Error::Config(format!("bad filterbank size n_fft={n_fft} n_mels={n_mels}")));
        }
        let n_bins = n_fft / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let (lo, hi) = (hz_to_mel(0.0, scale), hz_to_mel(nyquist, scale));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64, scale))
            .collect();
        let bin_hz = |k: usize| k as f64 * sample_rate as f64 / n_fft as f64;

        let bands = (0..n_mels)
            .map(|m| {
                let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
                let norm = 2.0 / (right - left);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = bin_hz(k);
                        let rise = (f - left) / (center - left);
                        let fall = (right - f) / (right - center);
                        let w = rise.min(fall).max(0.0) * norm;
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let start = weights.first().map_or(0, |&(k, _)| k);
                let mut dense = vec![0.0; weights.last().map_or(0, |&(k, _)| k + 1 - start)];
                for (k, w) in weights {
                    dense[k - start] = w;
                }
                (start, dense)
            })
            .collect();
        Ok(MelFilterbank {
            n_mels,
            n_bins,
            bands,
        })
    }

    /// Weight of FFT bin `bin` in band `band`.
    pub fn weight(&self, band: usize, bin: usize) -> f64 {
        let (start, w) = &self.bands[band];
        if bin < *start {
            return 0.0;
        }
        w.get(bin - start).copied().unwrap_or(0.0)
    }

    pub fn band_mass(&self, band: usize) -> f64 {
        self.bands[band].1.iter().sum()
    }

    /// Weighted sum of `power` (length `n_bins`) under one band.
    pub fn apply_band(&self, band: usize, power: &[f64]) -> f64 {
        let (start, w) = &self.bands[band];
        w.iter().zip(&power[*start..]).map(|(a, b)| a * b).sum()
    }
}
