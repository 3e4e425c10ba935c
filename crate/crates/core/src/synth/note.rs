use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A single held note: what the synth is asked to play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MidiNote {
    pub pitch: u8,
    pub velocity: u8,
    pub sustain_beats: f64,
    pub total_beats: f64,
    pub tempo_bpm: f64,
}

impl Default for MidiNote {
    /// Middle C at full velocity, held 4 of 8 beats at 120 bpm.
    fn default() -> Self {
        MidiNote {
            pitch: 60,
            velocity: 127,
            sustain_beats: 4.0,
            total_beats: 8.0,
            tempo_bpm: 120.0,
        }
    }
}

impl MidiNote {
    pub fn validate(&self) -> Result<()> {
        if self.pitch > 127 {
            return Err(Error::InvalidNote(format!("pitch {} out of 0..=127", self.pitch)));
        }
        if !(1..=127).contains(&self.velocity) {
            return Err(Error::InvalidNote(format!(
                "velocity {} out of 1..=127",
                self.velocity
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.sustain_beats) || !positive(self.total_beats) || !positive(self.tempo_bpm)
        {
            return Err(Error::InvalidNote(
                "beats and tempo must be positive and finite".into(),
            ));
        }
        if self.sustain_beats > self.total_beats {
            return Err(Error::InvalidNote(format!(
                "sustain ({}) exceeds total length ({})",
                self.sustain_beats, self.total_beats
            )));
        }
        Ok(())
    }

    /// Equal-tempered frequency with A4 = 440 Hz.
    pub fn frequency(&self) -> f64 {
        440.0 * 2f64.powf((f64::from(self.pitch) - 69.0) / 12.0)
    }

    pub fn seconds_per_beat(&self) -> f64 {
        60.0 / self.tempo_bpm
    }

    /// Rendered length in samples, rounded down.
    pub fn total_samples(&self, sample_rate: u32) -> usize {
        (self.total_beats * self.seconds_per_beat() * f64::from(sample_rate)).floor() as usize
    }

    pub fn gate_samples(&self, sample_rate: u32) -> usize {
        (self.sustain_beats * self.seconds_per_beat() * f64::from(sample_rate)).floor() as usize
    }
}
