use serde::{Deserialize, Serialize};

use super::spectrogram::{mel_frames, MelConfig, MelFilterbank};
use crate::synth::AudioBuffer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfccConfig {
    pub mel: MelConfig,
    pub n_mfcc: usize,
    /// Power floor before taking decibels.
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            mel: MelConfig::default(),
            n_mfcc: 13,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    /// The 13- or 40-band variants used for reporting distances.
    pub fn with_bands(bands: usize) -> Self {
        MfccConfig {
            n_mfcc: bands,
            ..Self::default()
        }
    }
}

/// `n_mfcc x T` cepstral coefficients, row-major by coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    pub coeffs: Vec<f64>,
    pub n_mfcc: usize,
    pub frames: usize,
}

impl MfccMatrix {
    pub fn get(&self, n: usize, t: usize) -> f64 {
        self.coeffs[n * self.frames + t]
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.n_mfcc).map(|n| self.get(n, t)).collect()
    }
}

/// Precomputed filterbank and DCT basis for repeated MFCC extraction.
pub struct MfccExtractor {
    cfg: MfccConfig,
    sample_rate: u32,
    bank: MelFilterbank,
    dct: Vec<Vec<f64>>,
}

impl MfccExtractor {
    pub fn new(cfg: &MfccConfig, sample_rate: u32) -> Result<Self> {
        if cfg.n_mfcc == 0 || cfg.n_mfcc > cfg.mel.n_mels {
            return Err(Error::InvalidConfig(format!(
                "mfcc: need 1..={} coefficients, got {}",
                cfg.mel.n_mels, cfg.n_mfcc
            )));
        }
        if !(cfg.log_floor > 0.0) {
            return Err(Error::InvalidConfig("mfcc: log floor must be positive".into()));
        }
        let bank = MelFilterbank::new(&cfg.mel, sample_rate)?;
        let m = cfg.mel.n_mels as f64;
        // Orthonormal DCT-II.
        let dct = (0..cfg.n_mfcc)
            .map(|n| {
                let scale = if n == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                (0..cfg.mel.n_mels)
                    .map(|j| scale * (std::f64::consts::PI * n as f64 * (j as f64 + 0.5) / m).cos())
                    .collect()
            })
            .collect();
        Ok(MfccExtractor {
            cfg: *cfg,
            sample_rate,
            bank,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.cfg
    }

    pub fn extract(&self, audio: &AudioBuffer) -> Result<MfccMatrix> {
        if audio.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch(audio.sample_rate(), self.sample_rate));
        }
        let frames = mel_frames(audio, &self.cfg.mel, &self.bank)?;
        let t_len = frames.len();
        let mut coeffs = vec![0.0; self.cfg.n_mfcc * t_len];
        for (t, mel) in frames.iter().enumerate() {
            let db: Vec<f64> = mel
                .iter()
                .map(|&p| 10.0 * p.max(self.cfg.log_floor).log10())
                .collect();
            for (n, basis) in self.dct.iter().enumerate() {
                coeffs[n * t_len + t] = basis.iter().zip(&db).map(|(b, d)| b * d).sum();
            }
        }
        Ok(MfccMatrix {
            coeffs,
            n_mfcc: self.cfg.n_mfcc,
            frames: t_len,
        })
    }

    /// Mean over frames of the squared Euclidean distance between
    /// coefficient columns. Shorter inputs are zero-padded.
    pub fn distance(&self, a: &AudioBuffer, b: &AudioBuffer) -> Result<f64> {
        if a.sample_rate() != b.sample_rate() {
            return Err(Error::SampleRateMismatch(a.sample_rate(), b.sample_rate()));
        }
        let len = a.len().max(b.len());
        let ma = self.extract(&a.padded_to(len))?;
        let mb = self.extract(&b.padded_to(len))?;
        Ok(matrix_distance(&ma, &mb))
    }
}

/// Mean squared column distance between two equally shaped MFCC matrices.
pub fn matrix_distance(a: &MfccMatrix, b: &MfccMatrix) -> f64 {
    assert_eq!((a.n_mfcc, a.frames), (b.n_mfcc, b.frames), "MFCC shapes differ");
    if a.frames == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for t in 0..a.frames {
        let mut d = 0.0;
        for n in 0..a.n_mfcc {
            let diff = a.get(n, t) - b.get(n, t);
            d += diff * diff;
        }
        total += d;
    }
    total / a.frames as f64
}

pub fn mfcc(audio: &AudioBuffer, cfg: &MfccConfig) -> Result<MfccMatrix> {
    MfccExtractor::new(cfg, audio.sample_rate())?.extract(audio)
}

/// MFCC distance, the evaluation metric.
pub fn mfccd(a: &AudioBuffer, b: &AudioBuffer, cfg: &MfccConfig) -> Result<f64> {
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::SampleRateMismatch(a.sample_rate(), b.sample_rate()));
    }
    MfccExtractor::new(cfg, a.sample_rate())?.distance(a, b)
}
