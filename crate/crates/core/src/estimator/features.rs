use serde::{Deserialize, Serialize};

use crate::dsp::{
    mel_spectrogram, statistical_features, stft_spectrogram, CqtConfig, CqtKernel, MelConfig, MfccConfig,
    MfccExtractor, MfccMatrix, Spectrogram, StatTracks,
};
use crate::nn::{NamedArrays, Tensor};
use crate::synth::AudioBuffer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub stft_window: usize,
    pub stft_hop: usize,
    pub mel: MelConfig,
    pub cqt: CqtConfig,
    pub n_mfcc: usize,
    pub stats_frame: usize,
    pub stats_hop: usize,
    /// Block size of the optional rectified, block-averaged waveform.
    pub raw_block: Option<usize>,
    /// Time steps every modality is pooled to before entering the model.
    pub time_steps: usize,
    /// STFT bins after pooling.
    pub stft_bins: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            stft_window: 1024,
            stft_hop: 256,
            mel: MelConfig::default(),
            cqt: CqtConfig::default(),
            n_mfcc: 13,
            stats_frame: 1024,
            stats_hop: 256,
            raw_block: None,
            time_steps: 16,
            stft_bins: 64,
        }
    }
}

impl FeatureConfig {
    pub fn mfcc(&self) -> MfccConfig {
        MfccConfig {
            mel: self.mel,
            n_mfcc: self.n_mfcc,
            ..MfccConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("features: {msg}")));
        if self.time_steps == 0 || self.stft_bins == 0 {
            return bad("time_steps and stft_bins must be positive");
        }
        if self.stft_bins > self.stft_window / 2 {
            return bad("stft_bins exceeds the STFT bin count");
        }
        if self.raw_block == Some(0) {
            return bad("raw_block must be positive");
        }
        Ok(())
    }
}

/// Every representation of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub stft: Spectrogram,
    pub mel: Spectrogram,
    pub cqt: Spectrogram,
    pub mfcc: MfccMatrix,
    pub stats: StatTracks,
    pub raw_frames: Option<Vec<f64>>,
}

impl FeatureBundle {
    pub fn shapes(&self) -> BundleShapes {
        BundleShapes {
            stft: self.stft.shape(),
            mel: self.mel.shape(),
            cqt: self.cqt.shape(),
            mfcc: [self.mfcc.n_mfcc, self.mfcc.frames],
            stats: [4, self.stats.frames()],
            raw: self.raw_frames.as_ref().map(Vec::len),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BundleShapes {
    pub stft: [usize; 3],
    pub mel: [usize; 3],
    pub cqt: [usize; 3],
    pub mfcc: [usize; 2],
    pub stats: [usize; 2],
    pub raw: Option<usize>,
}

impl BundleShapes {
    /// Shapes the configuration implies for a clip of `len` samples.
    pub fn expected(cfg: &FeatureConfig, len: usize) -> Self {
        let frames = |w: usize, h: usize| 1 + (len - w) / h;
        BundleShapes {
            stft: [1, cfg.stft_window / 2 + 1, frames(cfg.stft_window, cfg.stft_hop)],
            mel: [1, cfg.mel.n_mels, frames(cfg.mel.window, cfg.mel.hop)],
            cqt: [1, cfg.cqt.bins(), len / cfg.cqt.hop + 1],
            mfcc: [cfg.n_mfcc, frames(cfg.mel.window, cfg.mel.hop)],
            stats: [4, frames(cfg.stats_frame, cfg.stats_hop)],
            raw: cfg.raw_block.map(|b| len.div_ceil(b)),
        }
    }
}

/// Holds the CQT kernel and MFCC basis so repeated extraction is cheap.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    sample_rate: u32,
    cqt: CqtKernel,
    mfcc: MfccExtractor,
}

impl FeatureExtractor {
    pub fn new(cfg: &FeatureConfig, sample_rate: u32) -> Result<Self> {
        cfg.validate()?;
        Ok(FeatureExtractor {
            cfg: *cfg,
            sample_rate,
            cqt: CqtKernel::new(&cfg.cqt, sample_rate)?,
            mfcc: MfccExtractor::new(&cfg.mfcc(), sample_rate)?,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn bundle(&self, audio: &AudioBuffer) -> Result<FeatureBundle> {
        if audio.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch(audio.sample_rate(), self.sample_rate));
        }
        let raw_frames = self.cfg.raw_block.map(|b| {
            audio
                .samples()
                .chunks(b)
                .map(|c| c.iter().map(|s| f64::from(s.abs())).sum::<f64>() / c.len() as f64)
                .collect()
        });
        Ok(FeatureBundle {
            stft: stft_spectrogram(audio, self.cfg.stft_window, self.cfg.stft_hop)?,
            mel: mel_spectrogram(audio, &self.cfg.mel)?,
            cqt: self.cqt.transform(audio)?,
            mfcc: self.mfcc.extract(audio)?,
            stats: statistical_features(audio, self.cfg.stats_frame, self.cfg.stats_hop)?,
            raw_frames,
        })
    }

    pub fn model_input(&self, audio: &AudioBuffer) -> Result<ModelInput> {
        ModelInput::from_bundle(&self.bundle(audio)?, &self.cfg)
    }
}

pub fn extract_bundle(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<FeatureBundle> {
    FeatureExtractor::new(cfg, audio.sample_rate())?.bundle(audio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Stft,
    Mel,
    Cqt,
    Mfcc,
    Stats,
    Raw,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::Stft,
        Modality::Mel,
        Modality::Cqt,
        Modality::Mfcc,
        Modality::Stats,
        Modality::Raw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Stft => "stft",
            Modality::Mel => "mel",
            Modality::Cqt => "cqt",
            Modality::Mfcc => "mfcc",
            Modality::Stats => "stats",
            Modality::Raw => "raw",
        }
    }
}

/// Fixed-size, log-compressed arrays fed to the network.
///
/// Spectrograms are `1 x K x T`, the MFCC sequence is `T x n_mfcc`, the
/// statistics are `4 x T` and the optional waveform track is a `4T` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub stft: Tensor,
    pub mel: Tensor,
    pub cqt: Tensor,
    pub mfcc: Tensor,
    pub stats: Tensor,
    pub raw: Option<Tensor>,
}

const LOG_EPS: f64 = 1e-6;
/// The waveform track keeps four points per model time step.
pub const RAW_STEPS_PER_TIME_STEP: usize = 4;

/// Average `rows x cols` (row-major) down to `rows x out` along columns.
/// Short inputs repeat columns.
fn pool_cols(data: &[f64], rows: usize, cols: usize, out: usize) -> Vec<f64> {
    let mut res = vec![0.0; rows * out];
    for j in 0..out {
        let lo = j * cols / out;
        let hi = ((j + 1) * cols / out).max(lo + 1).min(cols);
        for r in 0..rows {
            let seg = &data[r * cols + lo..r * cols + hi];
            res[r * out + j] = seg.iter().sum::<f64>() / seg.len() as f64;
        }
    }
    res
}

/// Sum consecutive rows into `out` bands. The last partial band is dropped.
fn pool_rows(data: &[f64], rows: usize, cols: usize, out: usize) -> Vec<f64> {
    let per = rows / out;
    let mut res = vec![0.0; out * cols];
    for b in 0..out {
        for r in b * per..(b + 1) * per {
            for c in 0..cols {
                res[b * cols + c] += data[r * cols + c];
            }
        }
    }
    res
}

fn log_compress(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| (x + LOG_EPS).ln()).collect()
}

impl ModelInput {
    pub fn from_bundle(b: &FeatureBundle, cfg: &FeatureConfig) -> Result<Self> {
        let t = cfg.time_steps;
        let spec = |s: &Spectrogram, rows_out: usize| -> Result<Tensor> {
            let [_, k, frames] = s.shape();
            let rows = if rows_out == k {
                s.data().to_vec()
            } else {
                pool_rows(s.data(), k, frames, rows_out)
            };
            Tensor::from_vec(&[1, rows_out, t], log_compress(pool_cols(&rows, rows_out, frames, t)))
        };
        let mfcc = pool_cols(&b.mfcc.coeffs, b.mfcc.n_mfcc, b.mfcc.frames, t);
        let mut seq = vec![0.0; t * b.mfcc.n_mfcc];
        for n in 0..b.mfcc.n_mfcc {
            for s in 0..t {
                // Decibel-scale coefficients brought to order one.
                seq[s * b.mfcc.n_mfcc + n] = mfcc[n * t + s] / 100.0;
            }
        }
        let tracks: Vec<f64> = b.stats.tracks().concat();
        let stats = pool_cols(&tracks, 4, b.stats.frames(), t);
        let raw = b
            .raw_frames
            .as_ref()
            .map(|r| Tensor::vector(log_compress(pool_cols(r, 1, r.len(), RAW_STEPS_PER_TIME_STEP * t))));
        Ok(ModelInput {
            stft: spec(&b.stft, cfg.stft_bins)?,
            mel: spec(&b.mel, b.mel.bins())?,
            cqt: spec(&b.cqt, b.cqt.bins())?,
            mfcc: Tensor::from_vec(&[t, b.mfcc.n_mfcc], seq)?,
            stats: Tensor::from_vec(&[4, t], stats)?,
            raw,
        })
    }

    pub fn get(&self, m: Modality) -> Option<&Tensor> {
        match m {
            Modality::Stft => Some(&self.stft),
            Modality::Mel => Some(&self.mel),
            Modality::Cqt => Some(&self.cqt),
            Modality::Mfcc => Some(&self.mfcc),
            Modality::Stats => Some(&self.stats),
            Modality::Raw => self.raw.as_ref(),
        }
    }

    pub fn get_mut(&mut self, m: Modality) -> Option<&mut Tensor> {
        match m {
            Modality::Stft => Some(&mut self.stft),
            Modality::Mel => Some(&mut self.mel),
            Modality::Cqt => Some(&mut self.cqt),
            Modality::Mfcc => Some(&mut self.mfcc),
            Modality::Stats => Some(&mut self.stats),
            Modality::Raw => self.raw.as_mut(),
        }
    }
}

/// Per-entry standardization fitted on training inputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Normalizer {
    pub stats: Vec<(Modality, Tensor, Tensor)>,
}

impl Normalizer {
    pub fn fit(inputs: &[ModelInput]) -> Result<Self> {
        let first = inputs.first().ok_or(Error::EmptyDataset)?;
        let mut stats = Vec::new();
        for m in Modality::ALL {
            let Some(t0) = first.get(m) else { continue };
            let n = inputs.len() as f64;
            let mut mean = vec![0.0; t0.len()];
            for x in inputs {
                let d = x.get(m).ok_or_else(|| Error::shape(m.name(), t0.shape(), &[]))?;
                d.expect_shape(m.name(), t0.shape())?;
                for (a, b) in mean.iter_mut().zip(d.data()) {
                    *a += b / n;
                }
            }
            let mut var = vec![0.0; t0.len()];
            for x in inputs {
                for ((v, b), mu) in var.iter_mut().zip(x.get(m).expect("checked").data()).zip(&mean) {
                    *v += (b - mu) * (b - mu) / n;
                }
            }
            let overall = (var.iter().sum::<f64>() / var.len().max(1) as f64).sqrt();
            let floor = 1e-3 * overall + 1e-8;
            let std: Vec<f64> = var.iter().map(|v| v.sqrt().max(floor)).collect();
            stats.push((m, Tensor::from_vec(t0.shape(), mean)?, Tensor::from_vec(t0.shape(), std)?));
        }
        Ok(Normalizer { stats })
    }

    pub fn apply(&self, input: &mut ModelInput) -> Result<()> {
        for (m, mean, std) in &self.stats {
            let x = input
                .get_mut(*m)
                .ok_or_else(|| Error::shape(format!("{} input", m.name()), mean.shape(), &[]))?;
            x.expect_shape(m.name(), mean.shape())?;
            for ((v, mu), s) in x.data_mut().iter_mut().zip(mean.data()).zip(std.data()) {
                *v = (*v - mu) / s;
            }
        }
        Ok(())
    }

    pub fn to_arrays(&self) -> NamedArrays {
        let mut out = Vec::new();
        for (m, mean, std) in &self.stats {
            out.push((format!("normalizer.{}.mean", m.name()), mean.clone()));
            out.push((format!("normalizer.{}.std", m.name()), std.clone()));
        }
        NamedArrays(out)
    }

    pub fn from_arrays(arrays: &NamedArrays) -> Result<Self> {
        let mut stats = Vec::new();
        for m in Modality::ALL {
            let mean = arrays.get(&format!("normalizer.{}.mean", m.name()));
            let std = arrays.get(&format!("normalizer.{}.std", m.name()));
            match (mean, std) {
                (Some(a), Some(b)) if a.shape() == b.shape() => stats.push((m, a.clone(), b.clone())),
                (None, None) => {}
                _ => return Err(Error::CorruptContainer(format!("normalizer for {} is incomplete", m.name()))),
            }
        }
        Ok(Normalizer { stats })
    }
}
