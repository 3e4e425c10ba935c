use serde::{Deserialize, Serialize};

use super::fft::{frame_count, PowerSpectrum};
use crate::synth::AudioBuffer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrogramKind {
    Stft,
    Mel,
    Cqt,
}

/// A `C x K x T` array of non-negative energies with the centre frequency
/// of every bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<f64>,
    channels: usize,
    bins: usize,
    frames: usize,
    freqs: Vec<f64>,
    kind: SpectrogramKind,
    hop: usize,
    window: usize,
}

impl Spectrogram {
    /// Build from per-frame bin vectors (`frames[t][k]`), one channel.
    pub(crate) fn from_frames(
        frames: &[Vec<f64>],
        freqs: Vec<f64>,
        kind: SpectrogramKind,
        hop: usize,
        window: usize,
    ) -> Self {
        let bins = freqs.len();
        let t_len = frames.len();
        let mut data = vec![0.0; bins * t_len];
        for (t, frame) in frames.iter().enumerate() {
            for (k, &v) in frame.iter().enumerate() {
                data[k * t_len + t] = v;
            }
        }
        Spectrogram {
            data,
            channels: 1,
            bins,
            frames: t_len,
            freqs,
            kind,
            hop,
            window,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.bins, self.frames]
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn kind(&self) -> SpectrogramKind {
        self.kind
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, k: usize, t: usize) -> f64 {
        self.data[(c * self.bins + k) * self.frames + t]
    }

    /// Frequency of bin `k` in Hz.
    pub fn freq(&self, k: usize) -> f64 {
        self.freqs[k]
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// Bins per octave when the frequency axis is exactly logarithmic.
    pub fn bins_per_octave(&self) -> Option<usize> {
        if self.kind != SpectrogramKind::Cqt || self.bins < 2 {
            return None;
        }
        let per_bin = (self.freqs[1] / self.freqs[0]).log2();
        Some((1.0 / per_bin).round() as usize)
    }

    /// Sum over channels and frames, per bin.
    pub fn bin_totals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.bins];
        for c in 0..self.channels {
            for (k, o) in out.iter_mut().enumerate() {
                let row = &self.data[(c * self.bins + k) * self.frames..][..self.frames];
                *o += row.iter().sum::<f64>();
            }
        }
        out
    }

    /// Index of the loudest bin in frame `t`.
    pub fn argmax_bin(&self, t: usize) -> usize {
        (0..self.bins)
            .max_by(|&a, &b| self.get(0, a, t).total_cmp(&self.get(0, b, t)))
            .unwrap_or(0)
    }
}

pub(crate) fn check_framing(len: usize, window: usize, hop: usize) -> Result<()> {
    if window < 2 || !window.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "window {window} is not a power of two"
        )));
    }
    if hop == 0 || hop > window {
        return Err(Error::InvalidConfig(format!(
            "hop {hop} must be in 1..={window}"
        )));
    }
    if len < window {
        return Err(Error::AudioTooShort { len, window });
    }
    Ok(())
}

/// One-sided Hann-windowed power per frame (`out[t][k]`).
pub(crate) fn power_frames(samples: &[f64], window: usize, hop: usize) -> Result<Vec<Vec<f64>>> {
    check_framing(samples.len(), window, hop)?;
    let mut ps = PowerSpectrum::new(window);
    let n = frame_count(samples.len(), window, hop);
    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let mut out = vec![0.0; ps.bins()];
        ps.power(&samples[t * hop..t * hop + window], &mut out);
        frames.push(out);
    }
    Ok(frames)
}

/// Magnitude STFT with a periodic Hann window. Frames start at `t * hop`
/// with no padding, so `T = 1 + (len - window) / hop`.
pub fn stft_spectrogram(audio: &AudioBuffer, window: usize, hop: usize) -> Result<Spectrogram> {
    let samples = audio.to_f64();
    let mut frames = power_frames(&samples, window, hop)?;
    for f in &mut frames {
        for v in f.iter_mut() {
            *v = v.sqrt();
        }
    }
    let sr = f64::from(audio.sample_rate());
    let freqs = (0..=window / 2)
        .map(|k| k as f64 * sr / window as f64)
        .collect();
    Ok(Spectrogram::from_frames(
        &frames,
        freqs,
        SpectrogramKind::Stft,
        hop,
        window,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MelConfig {
    pub window: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    /// Upper edge; `None` means Nyquist.
    pub f_max: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            window: 1024,
            hop: 256,
            n_mels: 64,
            f_min: 0.0,
            f_max: None,
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, evaluated at FFT bin centres.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<Vec<f64>>,
    pub centers: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &MelConfig, sample_rate: u32) -> Result<Self> {
        let sr = f64::from(sample_rate);
        let f_max = cfg.f_max.unwrap_or(sr / 2.0);
        if cfg.n_mels == 0 || !(0.0..f_max).contains(&cfg.f_min) || f_max > sr / 2.0 {
            return Err(Error::InvalidConfig(format!(
                "mel: need n_mels > 0 and 0 <= f_min < f_max <= Nyquist (got {} bands, {}..{f_max} Hz)",
                cfg.n_mels, cfg.f_min
            )));
        }
        let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let bins = cfg.window / 2 + 1;
        let bin_hz: Vec<f64> = (0..bins)
            .map(|k| k as f64 * sr / cfg.window as f64)
            .collect();
        let weights = (0..cfg.n_mels)
            .map(|m| {
                let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
                bin_hz
                    .iter()
                    .map(|&f| ((f - l) / (c - l)).min((r - f) / (r - c)).max(0.0))
                    .collect()
            })
            .collect();
        Ok(MelFilterbank {
            weights,
            centers: edges[1..=cfg.n_mels].to_vec(),
        })
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub(crate) fn mel_frames(audio: &AudioBuffer, cfg: &MelConfig, bank: &MelFilterbank) -> Result<Vec<Vec<f64>>> {
    let frames = power_frames(&audio.to_f64(), cfg.window, cfg.hop)?;
    Ok(frames.iter().map(|p| bank.apply(p)).collect())
}

/// Mel power spectrogram.
pub fn mel_spectrogram(audio: &AudioBuffer, cfg: &MelConfig) -> Result<Spectrogram> {
    let bank = MelFilterbank::new(cfg, audio.sample_rate())?;
    let frames = mel_frames(audio, cfg, &bank)?;
    Ok(Spectrogram::from_frames(
        &frames,
        bank.centers,
        SpectrogramKind::Mel,
        cfg.hop,
        cfg.window,
    ))
}
