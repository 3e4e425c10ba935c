//! The multi-modal parameter estimator.

mod features;
mod model;
mod targets;
mod train;

pub use features::{
    extract_bundle, BundleShapes, FeatureBundle, FeatureConfig, FeatureExtractor, Modality, ModelInput,
    Normalizer, RAW_STEPS_PER_TIME_STEP,
};
pub use model::{ModelConfig, PdcConfig, EstimatorNet};
pub use targets::{
    gradient_weights, label_smooth, loss, normalize_weights, smoothed_targets, ImportanceWeights, LossMode,
};
pub use train::{
    group_probe, load_optimizer, train, EpochRecord, Estimator, History, Sample, TrainConfig, TrainOutcome,
    TrainState,
};

use rand_chacha::ChaCha8Rng;

use crate::nn::uniform;

/// A random input with the shapes `cfg` produces. For tests and probes.
pub fn random_input(cfg: &FeatureConfig, rng: &mut ChaCha8Rng) -> ModelInput {
    let t = cfg.time_steps;
    ModelInput {
        stft: uniform(&[1, cfg.stft_bins, t], 1.0, rng),
        mel: uniform(&[1, cfg.mel.n_mels, t], 1.0, rng),
        cqt: uniform(&[1, cfg.cqt.bins(), t], 1.0, rng),
        mfcc: uniform(&[t, cfg.n_mfcc], 1.0, rng),
        stats: uniform(&[4, t], 1.0, rng),
        raw: cfg.raw_block.map(|_| uniform(&[RAW_STEPS_PER_TIME_STEP * t], 1.0, rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{check_gradients, GradCheckConfig};
    use crate::synth::{render, MidiNote, ParameterSpace};
    use rand::SeedableRng;
    use std::sync::Arc;

    fn tiny() -> (ModelConfig, FeatureConfig) {
        let model = ModelConfig {
            conv_dim: 6,
            aux_dim: 8,
            conv_channels: vec![2, 2],
            trunk_dim: 10,
            group_dim: 5,
            head_dim: 6,
            ..ModelConfig::default()
        };
        let mut features = FeatureConfig {
            time_steps: 4,
            stft_bins: 16,
            ..FeatureConfig::default()
        };
        features.mel.n_mels = 16;
        features.cqt.num_octaves = 3;
        (model, features)
    }

    fn space(id: &str) -> Arc<ParameterSpace> {
        Arc::new(ParameterSpace::by_id(id).unwrap())
    }

    #[test]
    fn logits_have_one_head_per_free_parameter() {
        let (mcfg, fcfg) = tiny();
        let sp = space("fm2");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for modalities in [mcfg.modalities.clone(), vec![Modality::Cqt], vec![Modality::Stats], vec![Modality::Mfcc]] {
            let cfg = ModelConfig { modalities, ..mcfg.clone() };
            let mut m = EstimatorNet::new(cfg, fcfg, Arc::clone(&sp), 3).unwrap();
            let logits = m.forward(&random_input(&fcfg, &mut rng)).unwrap();
            assert_eq!(logits.len(), sp.free_indices().len());
            for (z, i) in logits.iter().zip(sp.free_indices()) {
                assert_eq!(z.len(), sp.descriptors()[i].class_count);
                assert!(z.iter().all(|v| v.is_finite()));
            }
        }
        let bad = ModelConfig { modalities: vec![], ..mcfg };
        assert!(EstimatorNet::new(bad, fcfg, sp, 0).is_err());
    }

    #[test]
    fn groups_are_isolated() {
        let (mcfg, fcfg) = tiny();
        let sp = space("fm2");
        let mut m = EstimatorNet::new(mcfg.clone(), fcfg, sp, 4).unwrap();
        let x = random_input(&fcfg, &mut ChaCha8Rng::seed_from_u64(5));
        let gd = mcfg.group_dim;
        for g in 0..m.groups().len() {
            let grad = group_probe(&mut m, &x, g).unwrap();
            for (j, v) in grad.data().iter().enumerate() {
                if j / gd != g {
                    assert_eq!(*v, 0.0, "group {g} leaks into feature {j}");
                }
            }
        }
    }

    #[test]
    fn end_to_end_gradient_check() {
        let (mcfg, fcfg) = tiny();
        let sp = space("toy2");
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_input(&fcfg, &mut rng);
        let preset = crate::dataset::sample_random_preset(&sp, &mut rng);
        let targets = smoothed_targets(&preset, 1.0);
        let weights: Vec<f64> = (0..targets.len()).map(|i| 0.5 + i as f64 / 10.0).collect();
        let mut m = EstimatorNet::new(mcfg, fcfg, sp, 7).unwrap();
        for mode in [LossMode::CrossEntropy, LossMode::Mse] {
            let report = check_gradients(
                &mut m,
                |m, with_grad| {
                    let logits = m.forward(&x)?;
                    let (l, g) = loss(&logits, &targets, &weights, mode);
                    if with_grad {
                        m.zero_grads();
                        m.backward(&g)?;
                    }
                    Ok(l)
                },
                GradCheckConfig {
                    per_param: 4,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(report.max_rel_error < 1e-4, "{mode:?}: {report:?}");
        }
    }

    fn samples(sp: &Arc<ParameterSpace>, fcfg: &FeatureConfig, n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Sample {
                input: random_input(fcfg, &mut rng),
                preset: crate::dataset::sample_random_preset(sp, &mut rng),
                weights: None,
            })
            .collect()
    }

    #[test]
    fn one_epoch_smoke_and_determinism() {
        let (mcfg, fcfg) = tiny();
        let sp = space("toy2");
        let data = samples(&sp, &fcfg, 8, 8);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let m = EstimatorNet::new(mcfg.clone(), fcfg, Arc::clone(&sp), 9).unwrap();
            let mut out = train(m, &data, &data[..2], &cfg, 16000, 10).unwrap();
            assert_eq!(out.history.len(), 1);
            out.estimator.model.to_arrays().to_bytes()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn accumulation_matches_a_larger_batch() {
        let (mcfg, fcfg) = tiny();
        let sp = space("toy2");
        let data = samples(&sp, &fcfg, 8, 11);
        let run = |batch, accumulation| {
            let cfg = TrainConfig {
                epochs: 1,
                warmup_epochs: 0,
                batch_size: batch,
                accumulation,
                input_noise: 0.0,
                ..TrainConfig::default()
            };
            let m = EstimatorNet::new(mcfg.clone(), fcfg, Arc::clone(&sp), 12).unwrap();
            let mut out = train(m, &data, &data, &cfg, 16000, 13).unwrap();
            out.estimator.model.to_arrays()
        };
        let (a, b) = (run(8, 1), run(2, 4));
        for ((_, x), (_, y)) in a.0.iter().zip(&b.0) {
            for (u, v) in x.data().iter().zip(y.data()) {
                assert!((u - v).abs() <= 1e-6 * u.abs().max(v.abs()).max(1e-12));
            }
        }
    }

    #[test]
    fn singleton_is_memorized() {
        let (mcfg, fcfg) = tiny();
        let sp = space("toy2");
        let mut preset = crate::dataset::sample_random_preset(&sp, &mut ChaCha8Rng::seed_from_u64(14));
        preset.set("op1_output_level", 60).unwrap();
        let note = MidiNote {
            sustain_beats: 1.0,
            total_beats: 2.0,
            ..MidiNote::default()
        };
        let audio = render(&preset, &note, 16000).unwrap();
        let input = FeatureExtractor::new(&fcfg, 16000).unwrap().model_input(&audio).unwrap();
        let data = vec![Sample {
            input,
            preset: preset.clone(),
            weights: None,
        }];
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 1,
            peak_lr: 1e-2,
            warmup_epochs: 5,
            patience: None,
            input_noise: 0.0,
            ..TrainConfig::default()
        };
        let m = EstimatorNet::new(mcfg, fcfg, Arc::clone(&sp), 15).unwrap();
        let mut out = train(m, &data, &data, &cfg, 16000, 16).unwrap();
        assert_eq!(out.history.epochs.last().unwrap().val_accuracy, 1.0);
        let est = out.estimator.estimate(&audio).unwrap();
        est.validate().unwrap();
        assert_eq!(est.classes(), preset.classes());
    }

    #[test]
    fn checkpoint_round_trip() {
        let (mcfg, fcfg) = tiny();
        let sp = space("toy2");
        let data = samples(&sp, &fcfg, 4, 17);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let m = EstimatorNet::new(mcfg.clone(), fcfg, Arc::clone(&sp), 18).unwrap();
        let mut out = train(m, &data, &data, &cfg, 16000, 19).unwrap();
        let state = TrainState {
            format_version: 1,
            space: "toy2".into(),
            sample_rate: 16000,
            model: mcfg,
            features: fcfg,
            train: cfg.clone(),
            seed: 18,
            optimizer_step: out.optimizer.step,
            history: out.history.clone(),
            config_hash: None,
        };
        let dir = tempfile::tempdir().unwrap();
        out.estimator.save(dir.path(), &out.optimizer, &state).unwrap();
        let (mut back, st) = Estimator::load(dir.path()).unwrap();
        assert_eq!(st, state);
        assert_eq!(back.model.to_arrays(), out.estimator.model.to_arrays());
        assert_eq!(back.normalizer, out.estimator.normalizer);
        let opt = load_optimizer(dir.path(), cfg.optimizer, st.optimizer_step).unwrap();
        assert_eq!(opt, out.optimizer);
        for s in &data {
            assert_eq!(back.predict(&s.input).unwrap(), out.estimator.predict(&s.input).unwrap());
        }
    }
}
