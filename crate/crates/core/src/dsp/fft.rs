use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed one-sided power spectrum of fixed-size frames.
pub(crate) struct PowerSpectrum {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl PowerSpectrum {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        PowerSpectrum {
            fft,
            window: hann(n),
            buf: vec![Complex::default(); n],
            scratch,
        }
    }

    pub fn bins(&self) -> usize {
        self.window.len() / 2 + 1
    }

    /// `out[k] = |FFT(frame * w)[k]|^2` for `k` in `0..=n/2`.
    pub fn power(&mut self, frame: &[f64], out: &mut [f64]) {
        for ((b, &x), &w) in self.buf.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(x * w, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, c) in out.iter_mut().zip(&self.buf) {
            *o = c.norm_sqr();
        }
    }
}

/// Number of whole frames; callers check `len >= window` first.
pub(crate) fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    1 + (len - window) / hop
}
