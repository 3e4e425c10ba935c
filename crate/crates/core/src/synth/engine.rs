//! The FM engine.
//!
//! Each operator is a sine oscillator at `note_freq * ratio * detune`,
//! phase-modulated (not frequency-modulated, as on the DX7 family) by the
//! sum of its modulators' outputs. Every operator has a linear ADSR
//! envelope gated by the note's sustain length. Carriers are summed and
//! scaled by `1 / carriers`.

use std::f64::consts::{PI, TAU};

use super::audio::AudioBuffer;
use super::note::MidiNote;
use super::routing::{algorithm_topology, ModRouting};
use super::space::Preset;
use crate::{Error, Result};

pub const MIN_SAMPLE_RATE: u32 = 8000;
/// Dynamic range of the output-level curve.
pub const LEVEL_RANGE_DB: f64 = 48.0;
/// Peak modulation index (radians) of a modulator at full level.
pub const MAX_MOD_INDEX: f64 = TAU;
/// Peak feedback index (radians).
pub const MAX_FEEDBACK: f64 = PI / 2.0;
/// Envelope segment times span `MIN_SEGMENT_SECS * SEGMENT_SPAN^v`.
pub const MIN_SEGMENT_SECS: f64 = 0.002;
pub const SEGMENT_SPAN: f64 = 4000.0;

/// Output-level class value to linear gain. Zero maps to exact silence.
pub fn level_gain(unit: f64) -> f64 {
    if unit <= 0.0 {
        0.0
    } else {
        10f64.powf((unit - 1.0) * LEVEL_RANGE_DB / 20.0)
    }
}

pub fn coarse_ratio(class: usize) -> f64 {
    if class == 0 {
        0.5
    } else {
        class as f64
    }
}

pub fn segment_secs(unit: f64) -> f64 {
    MIN_SEGMENT_SECS * SEGMENT_SPAN.powf(unit)
}

/// Decoded per-operator settings in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSettings {
    pub ratio: f64,
    pub detune_semitones: f64,
    pub gain: f64,
    pub attack_secs: f64,
    pub decay_secs: f64,
    pub sustain: f64,
    pub release_secs: f64,
}

impl OperatorSettings {
    pub fn from_preset(preset: &Preset, op: usize) -> Result<Self> {
        let unit = |suffix: &str| {
            preset
                .unit(&format!("op{}_{suffix}", op + 1))
                .ok_or_else(|| Error::InvalidPreset(format!("op{} lacks `{suffix}`", op + 1)))
        };
        let coarse = preset
            .get(&format!("op{}_ratio_coarse", op + 1))
            .ok_or_else(|| Error::InvalidPreset(format!("op{} lacks `ratio_coarse`", op + 1)))?;
        Ok(OperatorSettings {
            ratio: coarse_ratio(coarse) * (1.0 + unit("ratio_fine")?),
            detune_semitones: unit("detune")? - 0.5,
            gain: level_gain(unit("output_level")?),
            attack_secs: segment_secs(unit("attack")?),
            decay_secs: segment_secs(unit("decay")?),
            sustain: unit("sustain")?,
            release_secs: segment_secs(unit("release")?),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Envelope {
    attack: f64,
    decay: f64,
    sustain: f64,
    release: f64,
    gate: usize,
    release_start: f64,
}

impl Envelope {
    fn new(s: &OperatorSettings, gate: usize, sample_rate: f64) -> Self {
        let samples = |secs: f64| (secs * sample_rate).round().max(1.0);
        let mut env = Envelope {
            attack: samples(s.attack_secs),
            decay: samples(s.decay_secs),
            sustain: s.sustain,
            release: samples(s.release_secs),
            gate,
            release_start: 0.0,
        };
        env.release_start = env.held(gate as f64);
        env
    }

    fn held(&self, t: f64) -> f64 {
        if t < self.attack {
            t / self.attack
        } else if t < self.attack + self.decay {
            1.0 - (1.0 - self.sustain) * (t - self.attack) / self.decay
        } else {
            self.sustain
        }
    }

    fn at(&self, t: usize) -> f64 {
        if t < self.gate {
            self.held(t as f64)
        } else {
            let r = (t - self.gate) as f64;
            if r >= self.release {
                0.0
            } else {
                self.release_start * (1.0 - r / self.release)
            }
        }
    }
}

/// Render one note. Pure and deterministic: identical inputs give
/// bit-identical output.
pub fn render(preset: &Preset, note: &MidiNote, sample_rate: u32) -> Result<AudioBuffer> {
    if sample_rate < MIN_SAMPLE_RATE {
        return Err(Error::InvalidSampleRate(sample_rate));
    }
    note.validate()?;
    preset.validate()?;
    let space = preset.space();
    if preset.get("algorithm") != Some(space.algorithm_id() as usize) {
        return Err(Error::InvalidPreset("algorithm does not match the space".into()));
    }
    let routing = algorithm_topology(space.algorithm_id())?;
    if routing.num_operators() != space.num_operators() {
        return Err(Error::SpaceMismatch {
            expected: format!("{} operators", routing.num_operators()),
            found: format!("{} operators", space.num_operators()),
        });
    }
    let ops: Vec<OperatorSettings> = (0..routing.num_operators())
        .map(|op| OperatorSettings::from_preset(preset, op))
        .collect::<Result<_>>()?;
    let feedback = preset.unit("feedback").unwrap_or(0.0) * MAX_FEEDBACK;
    let output = preset.unit("output").unwrap_or(1.0);
    let velocity = f64::from(note.velocity) / 127.0;

    let samples = render_ops(&routing, &ops, feedback, note, sample_rate, output * velocity);
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let scale = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    let out: Vec<f32> = samples.iter().map(|&s| (s * scale) as f32).collect();
    if out.is_empty() {
        return Err(Error::InvalidNote("note renders to zero samples".into()));
    }
    AudioBuffer::new(out, sample_rate)
}

fn render_ops(
    routing: &ModRouting,
    ops: &[OperatorSettings],
    feedback: f64,
    note: &MidiNote,
    sample_rate: u32,
    gain: f64,
) -> Vec<f64> {
    let sr = f64::from(sample_rate);
    let len = note.total_samples(sample_rate);
    let gate = note.gate_samples(sample_rate);
    let base = note.frequency();
    let order = routing.evaluation_order();
    let n = ops.len();
    let increments: Vec<f64> = ops
        .iter()
        .map(|o| base * o.ratio * 2f64.powf(o.detune_semitones / 12.0) / sr)
        .collect();
    let envelopes: Vec<Envelope> = ops.iter().map(|o| Envelope::new(o, gate, sr)).collect();
    let carrier_scale = gain / routing.carriers.len() as f64;

    let mut phase = vec![0.0f64; n];
    // Modulation each operator hands to its targets, in radians.
    let mut sent = vec![0.0f64; n];
    let mut out_gain = vec![0.0f64; n];
    let mut fb_history = [0.0f64; 2];
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let mut mix = 0.0;
        for &op in &order {
            let mut pm: f64 = routing.modulators[op].iter().map(|&m| sent[m]).sum();
            if routing.feedback == Some(op) && feedback > 0.0 {
                pm += feedback * 0.5 * (fb_history[0] + fb_history[1]);
            }
            let env = envelopes[op].at(t);
            let y = if ops[op].gain == 0.0 || env == 0.0 {
                0.0
            } else {
                env * (TAU * phase[op] + pm).sin()
            };
            if routing.feedback == Some(op) {
                fb_history = [y, fb_history[0]];
            }
            out_gain[op] = y * ops[op].gain;
            sent[op] = out_gain[op] * MAX_MOD_INDEX;
            phase[op] += increments[op];
            phase[op] -= phase[op].floor();
        }
        for &c in &routing.carriers {
            mix += out_gain[c];
        }
        out.push(mix * carrier_scale);
    }
    out
}
