use std::path::Path;

use crate::{Error, Result};

/// Mono audio. Samples are stored at `f32` precision so that a buffer
/// survives a float WAV round trip unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(0));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidAudio(format!("sample {i} is not finite")));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Result<Self> {
        Self::new(samples.iter().map(|&s| s as f32).collect(), sample_rate)
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        AudioBuffer {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| f64::from(s)).collect()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, &s| m.max(f64::from(s).abs()))
    }

    /// Zero-pad to `len` samples; longer buffers are left alone.
    pub fn padded_to(&self, len: usize) -> AudioBuffer {
        let mut samples = self.samples.clone();
        if samples.len() < len {
            samples.resize(len, 0.0);
        }
        AudioBuffer {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    /// Write mono 32-bit float PCM.
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut writer = hound::WavWriter::create(path.as_ref(), spec)?;
        for &s in &self.samples {
            writer.write_sample(s)?;
        }
        writer.finalize()?;
        Ok(())
    }

    /// Read a mono WAV file. Integer PCM is scaled to [-1, 1].
    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = hound::WavReader::open(path)?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(Error::InvalidAudio(format!(
                "{}: expected mono, found {} channels",
                path.display(),
                spec.channels
            )));
        }
        let samples: Vec<f32> = match spec.sample_format {
            hound::SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>()?,
            hound::SampleFormat::Int => {
                let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
                reader
                    .samples::<i32>()
                    .map(|s| s.map(|v| v as f32 * scale))
                    .collect::<Result<_, _>>()?
            }
        };
        Self::new(samples, spec.sample_rate)
    }
}

/// True iff the RMS level reaches `threshold`.
pub fn is_audible(audio: &AudioBuffer, threshold: f64) -> bool {
    audio.rms() >= threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(amp: f64, n: usize) -> AudioBuffer {
        let s: Vec<f64> = (0..n)
            .map(|i| amp * (std::f64::consts::TAU * 440.0 * i as f64 / 16000.0).sin())
            .collect();
        AudioBuffer::from_f64(&s, 16000).unwrap()
    }

    #[test]
    fn audibility() {
        assert!(!is_audible(&AudioBuffer::silence(1000, 16000), 0.01));
        let full = sine(1.0, 16000);
        assert!((full.rms() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
        assert!(is_audible(&full, 0.01));
        assert!(!is_audible(&sine(0.001, 16000), 0.01));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(AudioBuffer::new(vec![0.0, f32::NAN], 16000).is_err());
    }

    #[test]
    fn wav_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let a = sine(0.5, 4000);
        a.write_wav(&path).unwrap();
        assert_eq!(AudioBuffer::read_wav(&path).unwrap(), a);
    }
}
