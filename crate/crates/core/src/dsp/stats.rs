use super::fft::{frame_count, PowerSpectrum};
use super::spectrogram::check_framing;
use crate::synth::AudioBuffer;
use crate::Result;

/// Per-frame scalar tracks. All four tracks have the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct StatTracks {
    pub amplitude_envelope: Vec<f64>,
    pub rms_energy: Vec<f64>,
    pub zero_crossing_rate: Vec<f64>,
    /// Spectral flatness: geometric over arithmetic mean of the power spectrum.
    pub wiener_entropy: Vec<f64>,
    pub frame: usize,
    pub hop: usize,
}

impl StatTracks {
    pub fn frames(&self) -> usize {
        self.rms_energy.len()
    }

    pub fn tracks(&self) -> [&[f64]; 4] {
        [
            &self.amplitude_envelope,
            &self.rms_energy,
            &self.zero_crossing_rate,
            &self.wiener_entropy,
        ]
    }
}

const FLATNESS_FLOOR: f64 = 1e-20;

pub fn statistical_features(audio: &AudioBuffer, frame: usize, hop: usize) -> Result<StatTracks> {
    let x = audio.to_f64();
    check_framing(x.len(), frame, hop)?;
    let n = frame_count(x.len(), frame, hop);
    let mut ps = PowerSpectrum::new(frame);
    let mut power = vec![0.0; ps.bins()];
    let mut out = StatTracks {
        amplitude_envelope: Vec::with_capacity(n),
        rms_energy: Vec::with_capacity(n),
        zero_crossing_rate: Vec::with_capacity(n),
        wiener_entropy: Vec::with_capacity(n),
        frame,
        hop,
    };
    for t in 0..n {
        let f = &x[t * hop..t * hop + frame];
        out.amplitude_envelope
            .push(f.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        out.rms_energy
            .push((f.iter().map(|v| v * v).sum::<f64>() / frame as f64).sqrt());
        let crossings = f
            .windows(2)
            .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
            .count();
        out.zero_crossing_rate
            .push(crossings as f64 / (frame - 1) as f64);
        ps.power(f, &mut power);
        let mean = power.iter().sum::<f64>() / power.len() as f64;
        let flatness = if mean <= FLATNESS_FLOOR {
            0.0
        } else {
            let log_mean =
                power.iter().map(|p| p.max(FLATNESS_FLOOR).ln()).sum::<f64>() / power.len() as f64;
            (log_mean.exp() / mean).clamp(0.0, 1.0)
        };
        out.wiener_entropy.push(flatness);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine(amp: f64) -> AudioBuffer {
        let s: Vec<f64> = (0..16000)
            .map(|i| amp * (std::f64::consts::TAU * 440.0 * i as f64 / 16000.0).sin())
            .collect();
        AudioBuffer::from_f64(&s, 16000).unwrap()
    }

    #[test]
    fn dc_has_no_crossings() {
        let a = AudioBuffer::new(vec![0.3; 4096], 16000).unwrap();
        let s = statistical_features(&a, 1024, 256).unwrap();
        assert!(s.zero_crossing_rate.iter().all(|&z| z == 0.0));
        assert!(s.amplitude_envelope.iter().all(|&e| (e - 0.3).abs() < 1e-7));
    }

    #[test]
    fn sine_rms_and_flatness() {
        let s = statistical_features(&sine(1.0), 1024, 256).unwrap();
        for t in 1..s.frames() - 1 {
            assert!((s.rms_energy[t] - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.01);
            assert!(s.wiener_entropy[t] < 0.1);
        }
        let zcr = s.zero_crossing_rate[3];
        assert!((zcr - 2.0 * 440.0 / 16000.0).abs() < 0.005);
    }

    #[test]
    fn noise_is_flat_and_tracks_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..16000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = statistical_features(&AudioBuffer::from_f64(&x, 16000).unwrap(), 1024, 256).unwrap();
        let mean = s.wiener_entropy.iter().sum::<f64>() / s.frames() as f64;
        assert!(mean > 0.5);
        for [e, r, z, w] in (0..s.frames()).map(|t| {
            [s.amplitude_envelope[t], s.rms_energy[t], s.zero_crossing_rate[t], s.wiener_entropy[t]]
        }) {
            assert!(e >= 0.0 && r >= 0.0);
            assert!((0.0..=1.0).contains(&z) && (0.0..=1.0).contains(&w));
        }
    }

    #[test]
    fn silence_is_constant() {
        let s = statistical_features(&AudioBuffer::silence(4096, 16000), 1024, 256).unwrap();
        for track in s.tracks() {
            assert!(track.iter().all(|&v| v == 0.0));
        }
    }
}
