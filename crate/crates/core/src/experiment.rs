//! End-to-end runs: build a dataset, train, score on the held-out split,
//! and compare variants.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::GlobalConfig;
use crate::dataset::{build_dataset, sample_random_preset, Dataset, Split};
use crate::dsp::{MfccConfig, MfccExtractor};
use crate::estimator::{
    train, Estimator, FeatureExtractor, History, Modality, ModelConfig, Sample, EstimatorNet, TrainConfig,
    TrainOutcome, TrainState,
};
use crate::synth::{render, Preset};
use crate::{Error, Result};

/// Middle value; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScores {
    /// MFCCD of each estimate's render against its target.
    pub estimated: Vec<f64>,
    /// MFCCD of a uniformly random preset against the same targets.
    pub random: Vec<f64>,
    pub estimates: Vec<Vec<usize>>,
}

impl MatchScores {
    pub fn median_estimated(&self) -> f64 {
        median(&self.estimated)
    }

    pub fn median_random(&self) -> f64 {
        median(&self.random)
    }

    pub fn ratio(&self) -> f64 {
        self.median_estimated() / self.median_random()
    }
}

/// Estimate every clip of `split` and score the estimates with 13-band MFCCD.
pub fn score_split(ds: &Dataset, est: &mut Estimator, split: Split, seed: u64) -> Result<MatchScores> {
    let sidecar = &ds.manifest.sidecar;
    let records: Vec<_> = ds.manifest.split(split).collect();
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ex = FeatureExtractor::new(est.model.feature_config(), sidecar.sample_rate)?;
    let clips: Vec<_> = records
        .par_iter()
        .map(|r| {
            let audio = ds.audio(r)?;
            let input = ex.model_input(&audio)?;
            Ok((audio, input))
        })
        .collect::<Result<_>>()?;
    let mut estimates = Vec::with_capacity(clips.len());
    for (_, input) in &clips {
        estimates.push(est.predict(input)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let randoms: Vec<Preset> = (0..clips.len()).map(|_| sample_random_preset(&ds.space, &mut rng)).collect();

    let mfcc = MfccExtractor::new(&MfccConfig::default(), sidecar.sample_rate)?;
    let score = |p: &Preset, target: &crate::synth::AudioBuffer| -> Result<f64> {
        mfcc.distance(&render(p, &sidecar.note, sidecar.sample_rate)?, target)
    };
    let pairs: Vec<(f64, f64)> = clips
        .par_iter()
        .zip(estimates.par_iter().zip(randoms.par_iter()))
        .map(|((audio, _), (e, r))| Ok((score(e, audio)?, score(r, audio)?)))
        .collect::<Result<_>>()?;
    Ok(MatchScores {
        estimated: pairs.iter().map(|p| p.0).collect(),
        random: pairs.iter().map(|p| p.1).collect(),
        estimates: estimates.iter().map(|p| p.classes().to_vec()).collect(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A built dataset with features extracted for training and validation.
pub struct Experiment {
    pub config: GlobalConfig,
    pub dataset: Dataset,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub history: History,
    pub first_train_loss: f64,
    pub best_train_loss: f64,
    /// Relative drop of the training loss from the first epoch to the best.
    pub train_loss_drop: f64,
    pub median_mfccd: f64,
    pub median_random_mfccd: f64,
    pub mfccd_ratio: f64,
    pub manifest_sha256: String,
    pub model_sha256: String,
    pub estimates_sha256: String,
}

impl Experiment {
    /// Build the dataset under `dir` and extract features.
    pub fn prepare(config: &GlobalConfig, dir: &Path) -> Result<Self> {
        config.validate()?;
        build_dataset(&config.dataset, config.seed, dir)?;
        Self::open(config, dir)
    }

    /// Use an existing dataset directory.
    pub fn open(config: &GlobalConfig, dir: &Path) -> Result<Self> {
        config.validate()?;
        let dataset = Dataset::open(dir)?;
        let features = config.features();
        let train = dataset.samples(Split::Train, &features)?;
        let val = dataset.samples(Split::Val, &features)?;
        Ok(Experiment {
            config: config.clone(),
            dataset,
            train,
            val,
        })
    }

    pub fn fit(&self, model: &ModelConfig, train_cfg: &TrainConfig) -> Result<TrainOutcome> {
        let net = EstimatorNet::new(model.clone(), self.config.features(), Arc::clone(&self.dataset.space), self.config.seed)?;
        train(net, &self.train, &self.val, train_cfg, self.config.sample_rate(), self.config.seed)
    }

    pub fn state(&self, outcome: &TrainOutcome, model: &ModelConfig, train_cfg: &TrainConfig) -> TrainState {
        TrainState {
            format_version: 1,
            space: self.dataset.space.id().to_string(),
            sample_rate: self.config.sample_rate(),
            model: model.clone(),
            features: self.config.features(),
            train: train_cfg.clone(),
            seed: self.config.seed,
            optimizer_step: outcome.optimizer.step,
            history: outcome.history.clone(),
            config_hash: Some(self.config.hash()),
        }
    }

    /// Train the configured model, save it under `model_dir` if given,
    /// and score it on the test split.
    pub fn run(&self, model_dir: Option<&Path>) -> Result<(RunReport, Estimator)> {
        let (model, train_cfg) = (&self.config.model, &self.config.train);
        let mut outcome = self.fit(model, train_cfg)?;
        if let Some(dir) = model_dir {
            let state = self.state(&outcome, model, train_cfg);
            outcome.estimator.save(dir, &outcome.optimizer, &state)?;
        }
        let scores = score_split(&self.dataset, &mut outcome.estimator, Split::Test, self.config.seed)?;
        let history = outcome.history.clone();
        let first = history.epochs.first().ok_or(Error::EmptyDataset)?.train_loss;
        let best = history.best_train_loss().ok_or(Error::EmptyDataset)?;
        let manifest = std::fs::read(self.dataset.dir.join(crate::dataset::MANIFEST_FILE))?;
        let estimates = serde_json::to_vec(&scores.estimates)?;
        let report = RunReport {
            config_hash: self.config.hash(),
            first_train_loss: first,
            best_train_loss: best,
            train_loss_drop: 1.0 - best / first,
            median_mfccd: scores.median_estimated(),
            median_random_mfccd: scores.median_random(),
            mfccd_ratio: scores.ratio(),
            manifest_sha256: sha256_hex(&manifest),
            model_sha256: sha256_hex(&outcome.estimator.model.to_arrays().to_bytes()),
            estimates_sha256: sha256_hex(&estimates),
            history,
        };
        Ok((report, outcome.estimator))
    }

    /// Train and score each variant on the same data.
    pub fn ablation(&self, variants: &[Variant]) -> Result<Vec<AblationRow>> {
        let mut rows = Vec::new();
        let mut random = None;
        for v in variants {
            let mut outcome = self.fit(&v.model, &v.train)?;
            let scores = score_split(&self.dataset, &mut outcome.estimator, Split::Test, self.config.seed)?;
            random.get_or_insert(scores.median_random());
            rows.push(AblationRow {
                method: v.name.clone(),
                mfccd: scores.median_estimated(),
            });
        }
        if let Some(r) = random {
            rows.insert(
                0,
                AblationRow {
                    method: "Random preset".into(),
                    mfccd: r,
                },
            );
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// PDC on and off for a CQT-only model, then the multi-modal model with
/// and without label smoothing and gradient weighting.
pub fn standard_variants(model: &ModelConfig, train_cfg: &TrainConfig) -> Vec<Variant> {
    let cqt = ModelConfig {
        modalities: vec![Modality::Cqt],
        ..model.clone()
    };
    let mut no_pdc = cqt.clone();
    no_pdc.pdc.enabled = false;
    let mut with_pdc = cqt;
    with_pdc.pdc.enabled = true;
    let v = |name: &str, model: ModelConfig, train: TrainConfig| Variant {
        name: name.into(),
        model,
        train,
    };
    vec![
        v("CQT, no PDC", no_pdc, train_cfg.clone()),
        v("CQT + PDC", with_pdc, train_cfg.clone()),
        v("Multi-modal", model.clone(), train_cfg.clone()),
        v(
            "Multi-modal, no label smoothing",
            model.clone(),
            TrainConfig {
                label_sigma0: 0.0,
                ..train_cfg.clone()
            },
        ),
        v(
            "Multi-modal, no weighting",
            model.clone(),
            TrainConfig {
                use_weights: false,
                ..train_cfg.clone()
            },
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub method: String,
    /// Median 13-band MFCCD on the test split.
    pub mfccd: f64,
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = String::from("| Method | MFCCD |\n|---|---|\n");
    for r in rows {
        s.push_str(&format!("| {} | {:.2} |\n", r.method, r.mfccd));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::FeatureConfig;
    use crate::synth::MidiNote;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn table_layout() {
        let t = ablation_table(&[AblationRow {
            method: "CQT + PDC".into(),
            mfccd: 12.345,
        }]);
        assert_eq!(t, "| Method | MFCCD |\n|---|---|\n| CQT + PDC | 12.35 |\n");
    }

    /// A miniature of the toy experiment.
    #[test]
    fn small_run_is_reproducible() {
        let mut cfg = GlobalConfig::default();
        cfg.dataset.note = MidiNote {
            sustain_beats: 0.5,
            total_beats: 1.0,
            ..MidiNote::default()
        };
        cfg.dataset.seeds = 8;
        cfg.dataset.augmented = 8;
        cfg.dataset.random = 8;
        cfg.dataset.compute_weights = false;
        cfg.dataset.features = FeatureConfig {
            time_steps: 4,
            stft_bins: 16,
            ..FeatureConfig::default()
        };
        cfg.model = ModelConfig {
            conv_dim: 6,
            aux_dim: 8,
            conv_channels: vec![2, 2],
            trunk_dim: 8,
            group_dim: 4,
            head_dim: 4,
            ..ModelConfig::default()
        };
        cfg.train.epochs = 2;
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            let exp = Experiment::prepare(&cfg, dir.path()).unwrap();
            let model_dir = dir.path().join("model");
            let (report, _) = exp.run(Some(&model_dir)).unwrap();
            assert!(model_dir.join("state.json").exists());
            let rows = exp.ablation(&standard_variants(&cfg.model, &cfg.train)[..2]).unwrap();
            assert_eq!(rows.len(), 3);
            report
        };
        let a = run();
        assert_eq!(a.history.len(), 2);
        assert!(a.mfccd_ratio.is_finite());
        assert_eq!(a, run());
    }
}
