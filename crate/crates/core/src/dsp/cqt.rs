//! Constant-Q transform by the spectral-kernel method: every bin owns a
//! Hann-windowed complex exponential whose length shrinks with frequency
//! (constant Q), pre-transformed to the frequency domain and sparsified.
//! Each analysis frame then costs one FFT plus a few sparse dot products.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::spectrogram::{Spectrogram, SpectrogramKind};
use crate::synth::AudioBuffer;
use crate::{Error, Result};

/// C1, the conventional lowest CQT bin.
pub const C1_HZ: f64 = 32.703_195_662_574_83;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CqtConfig {
    pub f_min: f64,
    pub bins_per_octave: usize,
    pub num_octaves: usize,
    pub hop: usize,
    /// Spectral-kernel entries below this fraction of the bin's peak are dropped.
    pub sparsity: f64,
}

impl Default for CqtConfig {
    fn default() -> Self {
        CqtConfig {
            f_min: C1_HZ,
            bins_per_octave: 12,
            num_octaves: 7,
            hop: 512,
            sparsity: 0.0054,
        }
    }
}

impl CqtConfig {
    pub fn bins(&self) -> usize {
        self.bins_per_octave * self.num_octaves
    }

    pub fn freq(&self, k: usize) -> f64 {
        self.f_min * 2f64.powf(k as f64 / self.bins_per_octave as f64)
    }

    pub fn q(&self) -> f64 {
        1.0 / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if self.bins_per_octave == 0 || self.num_octaves == 0 || self.hop == 0 {
            return Err(Error::InvalidConfig(
                "cqt: bins per octave, octaves and hop must be positive".into(),
            ));
        }
        if !(self.f_min > 0.0) {
            return Err(Error::InvalidConfig("cqt: f_min must be positive".into()));
        }
        let top = self.f_min * 2f64.powi(self.num_octaves as i32);
        if top > nyquist {
            return Err(Error::InvalidConfig(format!(
                "cqt: f_min * 2^octaves = {top:.1} Hz exceeds Nyquist {nyquist} Hz"
            )));
        }
        Ok(())
    }
}

/// Sparse spectral kernels for one configuration and sample rate.
pub struct CqtKernel {
    cfg: CqtConfig,
    sample_rate: u32,
    fft_len: usize,
    rows: Vec<Vec<(usize, Complex<f64>)>>,
}

impl CqtKernel {
    pub fn new(cfg: &CqtConfig, sample_rate: u32) -> Result<Self> {
        cfg.validate(sample_rate)?;
        let sr = f64::from(sample_rate);
        let q = cfg.q();
        let longest = (q * sr / cfg.f_min).ceil() as usize;
        let fft_len = longest.next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        let mut rows = Vec::with_capacity(cfg.bins());
        let mut buf = vec![Complex::default(); fft_len];
        for k in 0..cfg.bins() {
            let len = (q * sr / cfg.freq(k)).ceil() as usize;
            let start = (fft_len - len) / 2;
            buf.iter_mut().for_each(|b| *b = Complex::default());
            for n in 0..len {
                let w = 0.5 - 0.5 * (std::f64::consts::TAU * n as f64 / (len - 1) as f64).cos();
                let arg = std::f64::consts::TAU * q * n as f64 / len as f64;
                buf[start + n] = Complex::from_polar(w / len as f64, arg);
            }
            fft.process(&mut buf);
            // Parseval: <x, a> = (1/L) <X, A>.
            let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let row = buf
                .iter()
                .enumerate()
                .filter(|(_, c)| c.norm() >= cfg.sparsity * peak)
                .map(|(j, c)| (j, c.conj() / fft_len as f64))
                .collect();
            rows.push(row);
        }
        Ok(CqtKernel {
            cfg: *cfg,
            sample_rate,
            fft_len,
            rows,
        })
    }

    pub fn config(&self) -> &CqtConfig {
        &self.cfg
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    /// Magnitude CQT. Frame `t` is centred on sample `t * hop` with zero
    /// padding beyond the signal, so `T = len / hop + 1`.
    pub fn transform(&self, audio: &AudioBuffer) -> Result<Spectrogram> {
        if audio.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch(audio.sample_rate(), self.sample_rate));
        }
        let x = audio.to_f64();
        let hop = self.cfg.hop;
        let frames = x.len() / hop + 1;
        let fft = FftPlanner::new().plan_fft_forward(self.fft_len);
        let half = self.fft_len as isize / 2;
        let mut buf = vec![Complex::default(); self.fft_len];
        let mut out = Vec::with_capacity(frames);
        for t in 0..frames {
            let origin = (t * hop) as isize - half;
            for (m, b) in buf.iter_mut().enumerate() {
                let i = origin + m as isize;
                let v = if i >= 0 && (i as usize) < x.len() {
                    x[i as usize]
                } else {
                    0.0
                };
                *b = Complex::new(v, 0.0);
            }
            fft.process(&mut buf);
            let col: Vec<f64> = self
                .rows
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&(j, s)| buf[j] * s)
                        .sum::<Complex<f64>>()
                        .norm()
                })
                .collect();
            out.push(col);
        }
        let freqs = (0..self.cfg.bins()).map(|k| self.cfg.freq(k)).collect();
        Ok(Spectrogram::from_frames(
            &out,
            freqs,
            SpectrogramKind::Cqt,
            hop,
            self.fft_len,
        ))
    }
}

/// Log-frequency CQT spectrogram with `freq(k) = f_min * 2^(k / B)`.
pub fn cqt_chromagram(audio: &AudioBuffer, cfg: &CqtConfig) -> Result<Spectrogram> {
    CqtKernel::new(cfg, audio.sample_rate())?.transform(audio)
}
