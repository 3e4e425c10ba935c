use std::f64::consts::TAU;
use std::sync::Arc;

use fmmatch::dataset::sample_random_preset;
use fmmatch::estimator::label_smooth;
use fmmatch::search::{genetic_search, hill_climb, GaConfig, HillClimbConfig, SearchBudget};
use fmmatch::synth::engine::{coarse_ratio, segment_secs};
use fmmatch::synth::{render, MidiNote, ParameterSpace, Preset};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space(id: &str) -> Arc<ParameterSpace> {
    Arc::new(ParameterSpace::by_id(id).unwrap())
}

fn short() -> MidiNote {
    MidiNote {
        sustain_beats: 0.5,
        total_beats: 1.0,
        ..MidiNote::default()
    }
}

fn random(id: &str, seed: u64) -> Preset {
    sample_random_preset(&space(id), &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Magnitude of the DFT of `x` at `freq`, computed directly.
fn dft_magnitude(x: &[f32], freq: f64, sr: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        let w = TAU * freq * n as f64 / sr;
        re += v as f64 * w.cos();
        im -= v as f64 * w.sin();
    }
    (re * re + im * im).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rendering_is_bit_identical(seed in any::<u64>(), id in prop::sample::select(vec!["toy2", "fm2", "fm6-stack", "fm6-pairs"])) {
        let p = random(id, seed);
        let a = render(&p, &short(), 16000).unwrap();
        let b = render(&p, &short(), 16000).unwrap();
        prop_assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn additive_carriers_sum_linearly(seed in any::<u64>()) {
        let p = random("fm6-additive", seed);
        let joint = render(&p, &short(), 16000).unwrap();
        let mut sum = vec![0.0f64; joint.len()];
        for op in 1..=6 {
            let mut solo = p.clone();
            for other in (1..=6).filter(|&o| o != op) {
                solo.set(&format!("op{other}_output_level"), 0).unwrap();
            }
            for (s, v) in sum.iter_mut().zip(render(&solo, &short(), 16000).unwrap().samples()) {
                *s += f64::from(*v);
            }
        }
        for (s, v) in sum.iter().zip(joint.samples()) {
            prop_assert!((s - f64::from(*v)).abs() < 1e-6);
        }
    }

    #[test]
    fn released_notes_fall_silent(seed in any::<u64>(), release in 0usize..40) {
        let mut p = random("fm2", seed);
        p.set("op1_release", release).unwrap();
        p.set("op2_release", release).unwrap();
        let note = MidiNote { sustain_beats: 1.0, total_beats: 8.0, ..MidiNote::default() };
        let audio = render(&p, &note, 16000).unwrap();
        let gate = note.gate_samples(16000);
        let unit = release as f64 / 63.0;
        let tail = gate + (segment_secs(unit) * 16000.0).ceil() as usize + 1;
        prop_assume!(tail < audio.len());
        prop_assert!(audio.samples()[tail..].iter().all(|v| v.abs() < 1e-4));
    }

    #[test]
    fn smoothing_keeps_mass_and_argmax(k in prop::sample::select(vec![8usize, 64]), c in 0usize..64, sigma in 0.01f64..2.0) {
        let c = c % k;
        let t = label_smooth(c, k, sigma);
        prop_assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let best = (0..k).max_by(|&a, &b| t[a].total_cmp(&t[b]).then(b.cmp(&a))).unwrap();
        prop_assert_eq!(best, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn search_traces_obey_their_rules(seed in any::<u64>(), budget in 1usize..40) {
        let full = space("toy2");
        let target_preset = random("toy2", seed ^ 0x5eed);
        let sp = Arc::new(full.restricted_to("toy2", &["op1_output_level", "op2_output_level", "op2_ratio_coarse"], &target_preset).unwrap());
        let target = render(&target_preset, &short(), 16000).unwrap();
        let b = SearchBudget::new(budget, seed).unwrap();
        let runs = [
            hill_climb(&target, &sp, &short(), b, HillClimbConfig { patience: 5 }).unwrap(),
            genetic_search(&target, &sp, &short(), b, GaConfig { population: 8, ..GaConfig::default() }).unwrap(),
        ];
        for (p, t) in &runs {
            prop_assert!(!t.is_empty() && t.len() <= budget);
            prop_assert!(t.best_so_far().windows(2).all(|w| w[1] <= w[0]));
            p.validate().unwrap();
        }
        let again = hill_climb(&target, &sp, &short(), b, HillClimbConfig { patience: 5 }).unwrap();
        prop_assert_eq!(&again, &runs[0]);
    }
}

#[test]
fn modulation_puts_energy_in_the_sidebands() {
    let sp = space("fm2");
    let mut p = sp.default_preset();
    p.set("op1_ratio_coarse", 1).unwrap();
    p.set("op2_ratio_coarse", 3).unwrap();
    p.set("op1_output_level", 63).unwrap();
    p.set("op1_sustain", 63).unwrap();
    p.set("op2_sustain", 63).unwrap();
    p.set("op2_output_level", 50).unwrap();
    let mut plain = p.clone();
    plain.set("op2_output_level", 0).unwrap();

    let note = short();
    let f0 = note.frequency();
    let (fc, fm) = (f0 * coarse_ratio(1), f0 * coarse_ratio(3));
    let with = render(&p, &note, 16000).unwrap();
    let without = render(&plain, &note, 16000).unwrap();
    for f in [fc + fm, (fc - fm).abs()] {
        let a = dft_magnitude(with.samples(), f, 16000.0);
        let b = dft_magnitude(without.samples(), f, 16000.0);
        assert!(a > 10.0 * b, "sideband {f:.1} Hz: {a} vs {b}");
    }
}
