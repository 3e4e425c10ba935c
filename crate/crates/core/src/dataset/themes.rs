//! Hand-designed seed presets.
//!
//! A theme fixes a character (bell, bass, ...) as ranges on the unit scale
//! for a carrier and for a modulator. Seed presets draw every parameter
//! uniformly inside its theme's ranges, so each seed is a different
//! instrument of the same family. Operators are cast as carrier or
//! modulator from the space's routing.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::synth::{algorithm_topology, ParameterSpace, Preset};
use crate::Result;
use std::sync::Arc;

type Range = (f64, f64);

#[derive(Debug, Clone, Copy)]
pub struct OperatorSketch {
    /// Coarse-ratio classes to pick from (class 0 is ratio 0.5).
    pub coarse: &'static [usize],
    pub fine: Range,
    pub level: Range,
    pub attack: Range,
    pub decay: Range,
    pub sustain: Range,
    pub release: Range,
}

#[derive(Debug, Clone, Copy)]
pub struct Theme {
    pub name: &'static str,
    pub carrier: OperatorSketch,
    pub modulator: OperatorSketch,
    pub feedback: Range,
}

const fn op(
    coarse: &'static [usize],
    level: Range,
    attack: Range,
    decay: Range,
    sustain: Range,
    release: Range,
) -> OperatorSketch {
    OperatorSketch {
        coarse,
        fine: (0.0, 0.02),
        level,
        attack,
        decay,
        sustain,
        release,
    }
}

pub const THEMES: [Theme; 8] = [
    Theme {
        name: "bell",
        carrier: op(&[1, 2], (0.9, 1.0), (0.0, 0.1), (0.6, 0.8), (0.0, 0.1), (0.5, 0.7)),
        modulator: op(&[3, 5, 7], (0.6, 0.8), (0.0, 0.1), (0.5, 0.7), (0.0, 0.2), (0.4, 0.6)),
        feedback: (0.1, 0.4),
    },
    Theme {
        name: "bass",
        carrier: op(&[0, 1], (0.9, 1.0), (0.0, 0.05), (0.4, 0.6), (0.5, 0.8), (0.2, 0.35)),
        modulator: op(&[1], (0.7, 0.85), (0.0, 0.05), (0.3, 0.5), (0.2, 0.5), (0.2, 0.35)),
        feedback: (0.0, 0.2),
    },
    Theme {
        name: "pad",
        carrier: op(&[1], (0.75, 0.9), (0.65, 0.8), (0.55, 0.7), (0.7, 0.9), (0.65, 0.8)),
        modulator: op(&[1, 2], (0.4, 0.6), (0.6, 0.8), (0.5, 0.7), (0.6, 0.9), (0.6, 0.8)),
        feedback: (0.0, 0.1),
    },
    Theme {
        name: "brass",
        carrier: op(&[1], (0.85, 1.0), (0.35, 0.5), (0.4, 0.55), (0.7, 0.85), (0.3, 0.45)),
        modulator: op(&[1], (0.65, 0.8), (0.4, 0.55), (0.4, 0.6), (0.6, 0.8), (0.3, 0.45)),
        feedback: (0.2, 0.5),
    },
    Theme {
        name: "pluck",
        carrier: op(&[1, 2], (0.85, 1.0), (0.0, 0.05), (0.35, 0.5), (0.0, 0.1), (0.2, 0.35)),
        modulator: op(&[1, 2, 3], (0.5, 0.7), (0.0, 0.05), (0.25, 0.4), (0.0, 0.1), (0.2, 0.3)),
        feedback: (0.0, 0.2),
    },
    Theme {
        name: "organ",
        carrier: op(&[1, 2], (0.8, 0.95), (0.05, 0.2), (0.3, 0.5), (0.9, 1.0), (0.15, 0.3)),
        modulator: op(&[2, 3, 4], (0.3, 0.5), (0.05, 0.2), (0.3, 0.5), (0.85, 1.0), (0.15, 0.3)),
        feedback: (0.0, 0.1),
    },
    Theme {
        name: "epiano",
        carrier: op(&[1], (0.85, 1.0), (0.0, 0.08), (0.55, 0.7), (0.2, 0.4), (0.35, 0.5)),
        modulator: op(&[13, 14, 15], (0.4, 0.6), (0.0, 0.05), (0.3, 0.45), (0.0, 0.15), (0.3, 0.45)),
        feedback: (0.0, 0.1),
    },
    Theme {
        name: "perc",
        carrier: op(&[0, 1], (0.9, 1.0), (0.0, 0.03), (0.2, 0.35), (0.0, 0.05), (0.1, 0.25)),
        modulator: op(&[5, 7, 9, 11], (0.7, 0.9), (0.0, 0.03), (0.15, 0.3), (0.0, 0.05), (0.1, 0.2)),
        feedback: (0.3, 0.6),
    },
];

pub fn theme(name: &str) -> Option<&'static Theme> {
    THEMES.iter().find(|t| t.name == name)
}

/// Set `name` from a unit range, skipping parameters the space fixes.
fn draw(preset: &mut Preset, name: &str, range: Range, rng: &mut ChaCha8Rng) -> Result<()> {
    let space = Arc::clone(preset.space());
    let Some(i) = space.position(name) else {
        return Ok(());
    };
    let d = &space.descriptors()[i];
    if !d.is_free() {
        return Ok(());
    }
    let v = rng.gen_range(range.0..=range.1);
    preset.set_index(i, d.class_for_unit(v))
}

fn pick(preset: &mut Preset, name: &str, classes: &[usize], rng: &mut ChaCha8Rng) -> Result<()> {
    let space = Arc::clone(preset.space());
    let Some(i) = space.position(name) else {
        return Ok(());
    };
    if !space.descriptors()[i].is_free() {
        return Ok(());
    }
    preset.set_index(i, *classes.choose(rng).expect("non-empty class list"))
}

impl Theme {
    /// One seed preset of this theme.
    pub fn sample(&self, space: &Arc<ParameterSpace>, rng: &mut ChaCha8Rng) -> Result<Preset> {
        let routing = algorithm_topology(space.algorithm_id())?;
        let mut p = space.default_preset();
        for o in 0..space.num_operators() {
            let s = if routing.is_carrier(o) { &self.carrier } else { &self.modulator };
            let n = |suffix: &str| format!("op{}_{suffix}", o + 1);
            pick(&mut p, &n("ratio_coarse"), s.coarse, rng)?;
            draw(&mut p, &n("ratio_fine"), s.fine, rng)?;
            draw(&mut p, &n("detune"), (0.45, 0.55), rng)?;
            draw(&mut p, &n("output_level"), s.level, rng)?;
            draw(&mut p, &n("attack"), s.attack, rng)?;
            draw(&mut p, &n("decay"), s.decay, rng)?;
            draw(&mut p, &n("sustain"), s.sustain, rng)?;
            draw(&mut p, &n("release"), s.release, rng)?;
        }
        draw(&mut p, "feedback", self.feedback, rng)?;
        p.theme = Some(self.name.to_string());
        Ok(p)
    }
}
