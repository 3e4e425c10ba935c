use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::{FeatureConfig, FeatureExtractor, ModelInput, Normalizer};
use super::model::{ModelConfig, EstimatorNet};
use super::targets::{loss, normalize_weights, smoothed_targets, ImportanceWeights, LossMode};
use crate::nn::{argmax, clip_grad_norm, warmup_cosine_lr, AdamW, AdamWConfig, NamedArrays, Tensor};
use crate::synth::{AudioBuffer, ParameterSpace, Preset};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Micro-batches summed before each optimizer step.
    pub accumulation: usize,
    pub peak_lr: f64,
    pub warmup_epochs: usize,
    pub optimizer: AdamWConfig,
    pub clip_norm: Option<f64>,
    /// Standard deviation of Gaussian noise on normalized inputs.
    pub input_noise: f64,
    /// Stop after this many epochs without a better validation loss.
    pub patience: Option<usize>,
    /// Average the last `swa_last` epoch snapshots instead of keeping the best.
    pub swa_last: usize,
    pub label_sigma0: f64,
    pub use_weights: bool,
    pub loss: LossMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 16,
            accumulation: 1,
            peak_lr: 2e-3,
            warmup_epochs: 4,
            optimizer: AdamWConfig::default(),
            clip_norm: Some(1.0),
            input_noise: 0.01,
            patience: Some(8),
            swa_last: 0,
            label_sigma0: 1.0,
            use_weights: true,
            loss: LossMode::CrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("train: {msg}")));
        if self.epochs == 0 || self.batch_size == 0 || self.accumulation == 0 {
            return bad("epochs, batch_size and accumulation must be positive");
        }
        if !(self.peak_lr > 0.0) || self.input_noise < 0.0 || self.label_sigma0 < 0.0 {
            return bad("peak_lr must be positive; input_noise and label_sigma0 non-negative");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

/// One labelled clip.
#[derive(Debug, Clone)]
pub struct Sample {
    pub input: ModelInput,
    pub preset: Preset,
    pub weights: Option<ImportanceWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Fraction of free parameters predicted with the exact class.
    pub val_accuracy: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn best_train_loss(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.train_loss).min_by(f64::total_cmp)
    }
}

/// A model with the input statistics it was trained on.
pub struct Estimator {
    pub model: EstimatorNet,
    pub normalizer: Normalizer,
    pub sample_rate: u32,
    extractor: Option<FeatureExtractor>,
}

struct Prepared<'a> {
    input: ModelInput,
    targets: Vec<Vec<f64>>,
    weights: Vec<f64>,
    preset: &'a Preset,
}

fn prepare<'a>(samples: &'a [Sample], norm: &Normalizer, cfg: &TrainConfig) -> Result<Vec<Prepared<'a>>> {
    samples
        .iter()
        .map(|s| {
            let mut input = s.input.clone();
            norm.apply(&mut input)?;
            let n = s.preset.space().free_indices().len();
            let weights = match (&s.weights, cfg.use_weights) {
                (Some(w), true) => normalize_weights(&w.ordered(&s.preset)),
                _ => vec![1.0; n],
            };
            Ok(Prepared {
                input,
                targets: smoothed_targets(&s.preset, cfg.label_sigma0),
                weights,
                preset: &s.preset,
            })
        })
        .collect()
}

fn add_noise(input: &mut ModelInput, sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    for t in [&mut input.stft, &mut input.mel, &mut input.cqt, &mut input.mfcc, &mut input.stats] {
        t.data_mut().iter_mut().for_each(|v| *v += normal.sample(rng));
    }
    if let Some(raw) = input.raw.as_mut() {
        raw.data_mut().iter_mut().for_each(|v| *v += normal.sample(rng));
    }
}

fn evaluate(model: &mut EstimatorNet, data: &[Prepared], mode: LossMode) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let heads = model.head_descriptors();
    let (mut total, mut hits, mut count) = (0.0, 0usize, 0usize);
    for d in data {
        let logits = model.forward(&d.input)?;
        total += loss(&logits, &d.targets, &d.weights, mode).0;
        for (z, &i) in logits.iter().zip(&heads) {
            hits += usize::from(argmax(z) == d.preset.classes()[i]);
            count += 1;
        }
    }
    Ok((total / data.len() as f64, hits as f64 / count.max(1) as f64))
}

/// What a training run leaves behind.
pub struct TrainOutcome {
    pub estimator: Estimator,
    pub optimizer: AdamW,
    pub history: History,
}

/// Fit `model` on `train`, selecting by validation loss.
///
/// Single-threaded and fully determined by `seed`: the shuffling order and
/// the input noise come from one seeded stream.
pub fn train(
    mut model: EstimatorNet,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    sample_rate: u32,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for s in train.iter().chain(val) {
        if s.preset.space().id() != model.space().id() {
            return Err(Error::SpaceMismatch {
                expected: model.space().id().to_string(),
                found: s.preset.space().id().to_string(),
            });
        }
    }
    let normalizer = Normalizer::fit(&train.iter().map(|s| s.input.clone()).collect::<Vec<_>>())?;
    let train_set = prepare(train, &normalizer, cfg)?;
    let val_set = prepare(val, &normalizer, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = AdamW::new(cfg.optimizer.clone());
    let step_size = cfg.batch_size * cfg.accumulation;
    let steps_per_epoch = train_set.len().div_ceil(step_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let warmup = (steps_per_epoch * cfg.warmup_epochs).min(total_steps.saturating_sub(1));
    let mut history = History::default();
    let mut best: Option<(f64, NamedArrays)> = None;
    let mut recent: Vec<NamedArrays> = Vec::new();
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut last_lr = 0.0;
        for chunk in order.chunks(step_size) {
            model.zero_grads();
            let scale = 1.0 / chunk.len() as f64;
            for micro in chunk.chunks(cfg.batch_size) {
                for &i in micro {
                    let d = &train_set[i];
                    let mut x = d.input.clone();
                    add_noise(&mut x, cfg.input_noise, &mut rng);
                    let logits = model.forward(&x)?;
                    let (l, mut g) = loss(&logits, &d.targets, &d.weights, cfg.loss);
                    epoch_loss += l;
                    g.iter_mut().flatten().for_each(|v| *v *= scale);
                    model.backward(&g)?;
                }
            }
            if let Some(c) = cfg.clip_norm {
                clip_grad_norm(&mut model, c);
            }
            last_lr = warmup_cosine_lr(step, total_steps, warmup, cfg.peak_lr);
            opt.step(&mut model, last_lr)?;
            step += 1;
        }
        let (val_loss, val_accuracy) = if val_set.is_empty() {
            (epoch_loss / train_set.len() as f64, f64::NAN)
        } else {
            evaluate(&mut model, &val_set, cfg.loss)?
        };
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: epoch_loss / train_set.len() as f64,
            val_loss,
            val_accuracy,
            lr: last_lr,
        });
        if !val_loss.is_finite() {
            return Err(Error::InvalidConfig(format!("training diverged at epoch {}", epoch + 1)));
        }
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.to_arrays()));
            history.best_epoch = Some(epoch + 1);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if cfg.swa_last > 0 {
            recent.push(model.to_arrays());
            if recent.len() > cfg.swa_last {
                recent.remove(0);
            }
        }
        if cfg.patience.is_some_and(|p| since_best >= p) {
            break;
        }
    }
    if cfg.swa_last > 0 {
        model.load_arrays(&average(&recent))?;
        history.best_epoch = None;
    } else if let Some((_, arrays)) = best {
        model.load_arrays(&arrays)?;
    }
    Ok(TrainOutcome {
        estimator: Estimator::new(model, normalizer, sample_rate),
        optimizer: opt,
        history,
    })
}

fn average(snapshots: &[NamedArrays]) -> NamedArrays {
    let n = snapshots.len() as f64;
    let mut out = snapshots[0].clone();
    for (i, (_, t)) in out.0.iter_mut().enumerate() {
        for s in &snapshots[1..] {
            t.add_assign(&s.0[i].1);
        }
        t.scale(1.0 / n);
    }
    out
}

/// Training-state sidecar of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainState {
    pub format_version: u32,
    pub space: String,
    pub sample_rate: u32,
    pub model: ModelConfig,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub optimizer_step: u64,
    pub history: History,
    pub config_hash: Option<String>,
}

impl Estimator {
    pub fn new(model: EstimatorNet, normalizer: Normalizer, sample_rate: u32) -> Self {
        Estimator {
            model,
            normalizer,
            sample_rate,
            extractor: None,
        }
    }

    pub fn space(&self) -> &Arc<ParameterSpace> {
        self.model.space()
    }

    /// Preset for an input that has not been normalized yet.
    pub fn predict(&mut self, input: &ModelInput) -> Result<Preset> {
        let mut x = input.clone();
        self.normalizer.apply(&mut x)?;
        let logits = self.model.forward(&x)?;
        let space = Arc::clone(self.model.space());
        let mut preset = space.default_preset();
        for (z, i) in logits.iter().zip(self.model.head_descriptors()) {
            preset.set_index(i, argmax(z))?;
        }
        Ok(preset)
    }

    pub fn estimate(&mut self, audio: &AudioBuffer) -> Result<Preset> {
        if audio.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch(audio.sample_rate(), self.sample_rate));
        }
        if self.extractor.is_none() {
            self.extractor = Some(FeatureExtractor::new(self.model.feature_config(), self.sample_rate)?);
        }
        let input = self.extractor.as_ref().expect("set above").model_input(audio)?;
        self.predict(&input)
    }

    /// Write `model.bin`, `optimizer.bin` and `state.json` into `dir`.
    pub fn save(&mut self, dir: &Path, optimizer: &AdamW, state: &TrainState) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let mut arrays = self.model.to_arrays();
        arrays.0.extend(self.normalizer.to_arrays().0);
        arrays.write(&dir.join("model.bin"))?;
        let mut moments = Vec::new();
        for (name, m, v) in &optimizer.moments {
            moments.push((format!("m.{name}"), m.clone()));
            moments.push((format!("v.{name}"), v.clone()));
        }
        NamedArrays(moments).write(&dir.join("optimizer.bin"))?;
        let path = dir.join("state.json");
        let text = serde_json::to_string_pretty(state)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::file(&path, e))
    }

    pub fn load(dir: &Path) -> Result<(Self, TrainState)> {
        let path = dir.join("state.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        let state: TrainState = serde_json::from_str(&text)?;
        if state.format_version != 1 {
            return Err(Error::CorruptContainer(format!(
                "unsupported checkpoint format_version {}",
                state.format_version
            )));
        }
        let space = Arc::new(ParameterSpace::by_id(&state.space)?);
        let mut model = EstimatorNet::new(state.model.clone(), state.features, space, state.seed)?;
        let arrays = NamedArrays::read(&dir.join("model.bin"))?;
        model.load_arrays(&arrays)?;
        let normalizer = Normalizer::from_arrays(&arrays)?;
        Ok((Estimator::new(model, normalizer, state.sample_rate), state))
    }
}

/// Optimizer moments back from `optimizer.bin`.
pub fn load_optimizer(dir: &Path, config: AdamWConfig, step: u64) -> Result<AdamW> {
    let arrays = NamedArrays::read(&dir.join("optimizer.bin"))?;
    let mut moments = Vec::new();
    let mut it = arrays.0.into_iter();
    while let Some((mname, m)) = it.next() {
        let (vname, v) = it
            .next()
            .ok_or_else(|| Error::CorruptContainer("unpaired optimizer moment".into()))?;
        let name = mname
            .strip_prefix("m.")
            .filter(|n| vname.strip_prefix("v.") == Some(n))
            .ok_or_else(|| Error::CorruptContainer(format!("bad moment names {mname}, {vname}")))?;
        moments.push((name.to_string(), m, v));
    }
    Ok(AdamW {
        config,
        step,
        moments,
    })
}

/// Gradient of the logits of one group's heads with respect to every
/// group's local features, for a single input.
pub fn group_probe(model: &mut EstimatorNet, input: &ModelInput, group: usize) -> Result<Tensor> {
    let logits = model.forward(input)?;
    let groups = model.head_groups();
    let grads: Vec<Vec<f64>> = logits
        .iter()
        .zip(&groups)
        .map(|(z, &g)| if g == group { vec![1.0; z.len()] } else { vec![0.0; z.len()] })
        .collect();
    model.zero_grads();
    model.backward(&grads)
}
