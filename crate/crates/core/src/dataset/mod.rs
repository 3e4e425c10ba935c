//! Training data: seed presets from themes, augmentations, random presets,
//! rendered, filtered for audibility and split without theme leakage.
//!
//! Themes are partitioned before anything is augmented. A held-out set of
//! themes forms the test split together with all of their augmentations;
//! validation takes whole seed families (a seed and its augmentations) and
//! is topped up with random presets, so no family straddles train and val.

mod themes;

pub use themes::{theme, OperatorSketch, Theme, THEMES};

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::MfccExtractor;
use crate::estimator::{gradient_weights, FeatureConfig, FeatureExtractor, ImportanceWeights, Sample};
use crate::synth::{is_audible, render, AudioBuffer, MidiNote, ParamGroup, ParameterSpace, Preset};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SIDECAR_FILE: &str = "dataset.json";

/// Uniform class per free descriptor; fixed descriptors keep their value.
pub fn sample_random_preset(space: &Arc<ParameterSpace>, rng: &mut ChaCha8Rng) -> Preset {
    let mut p = space.default_preset();
    for i in space.free_indices() {
        let k = space.descriptors()[i].class_count;
        p.set_index(i, rng.gen_range(0..k)).expect("class in range");
    }
    p
}

/// Resample the named parameters uniformly, keep everything else.
pub fn augment_preset(preset: &Preset, free: &[String], rng: &mut ChaCha8Rng) -> Result<Preset> {
    let space = preset.space();
    let mut out = preset.clone();
    for name in free {
        let i = space
            .position(name)
            .ok_or_else(|| Error::InvalidPreset(format!("unknown parameter `{name}`")))?;
        let d = &space.descriptors()[i];
        if !d.is_free() {
            return Err(Error::InvalidPreset(format!("parameter `{name}` is fixed in this space")));
        }
        out.set_index(i, rng.gen_range(0..d.class_count))?;
    }
    Ok(out)
}

/// Free parameter names of one group.
pub fn group_parameters(space: &ParameterSpace, group: ParamGroup) -> Vec<String> {
    space
        .free_indices()
        .into_iter()
        .map(|i| &space.descriptors()[i])
        .filter(|d| d.group == group)
        .map(|d| d.name.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub space: String,
    pub note: MidiNote,
    pub sample_rate: u32,
    pub seeds: usize,
    pub augmented: usize,
    pub random: usize,
    /// Theme names to draw seeds from, round-robin.
    pub themes: Vec<String>,
    pub test_themes: usize,
    /// Fraction of the train+val pool that goes to val.
    pub val_fraction: f64,
    pub audibility_threshold: f64,
    pub retry_cap: usize,
    pub compute_weights: bool,
    /// Recorded in the sidecar so models can check what they were fed.
    pub features: FeatureConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            space: "toy2".into(),
            note: MidiNote::default(),
            sample_rate: 16000,
            seeds: 64,
            augmented: 192,
            random: 64,
            themes: THEMES.iter().map(|t| t.name.to_string()).collect(),
            test_themes: 2,
            val_fraction: 0.2,
            audibility_threshold: 0.01,
            retry_cap: 100,
            compute_weights: true,
            features: FeatureConfig::default(),
        }
    }
}

impl DatasetConfig {
    /// 1024 / 128 / 128 on the two-operator space.
    pub fn toy() -> Self {
        DatasetConfig {
            seeds: 128,
            augmented: 896,
            random: 256,
            test_themes: 1,
            val_fraction: 1.0 / 9.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        ParameterSpace::by_id(&self.space)?;
        self.note.validate()?;
        if self.sample_rate < crate::synth::engine::MIN_SAMPLE_RATE {
            return Err(Error::InvalidSampleRate(self.sample_rate));
        }
        if self.themes.is_empty() {
            return bad("themes: at least one theme is required".into());
        }
        if let Some(t) = self.themes.iter().find(|t| theme(t).is_none()) {
            return bad(format!("themes: unknown theme `{t}`"));
        }
        if self.themes.iter().collect::<BTreeSet<_>>().len() != self.themes.len() {
            return bad("themes: duplicate names".into());
        }
        if self.test_themes > self.themes.len() {
            return bad(format!("test_themes: {} exceeds the {} themes", self.test_themes, self.themes.len()));
        }
        if self.augmented > 0 && self.seeds == 0 {
            return bad("augmented: augmentations need at least one seed".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction: {} outside [0, 1)", self.val_fraction));
        }
        if !(self.audibility_threshold.is_finite() && self.audibility_threshold >= 0.0) {
            return bad("audibility_threshold: must be finite and non-negative".into());
        }
        if self.retry_cap == 0 {
            return bad("retry_cap: must be at least 1".into());
        }
        if self.seeds + self.augmented + self.random == 0 {
            return Err(Error::EmptyDataset);
        }
        self.features.validate()
    }

    pub fn feature_hash(&self) -> String {
        let json = serde_json::to_vec(&self.features).expect("feature config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Seed,
    Augmented,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub preset_path: String,
    pub audio_path: String,
    pub theme: Option<String>,
    /// Index of the seed a record descends from.
    pub family: Option<usize>,
    pub split: Split,
    pub source: Source,
    pub weights_path: Option<String>,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format_version: u32,
    pub space: String,
    pub note: MidiNote,
    pub sample_rate: u32,
    pub feature_config_hash: String,
    pub audibility_threshold: f64,
    pub seed: u64,
    pub test_themes: Vec<String>,
    pub config: DatasetConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub sidecar: Sidecar,
    pub records: Vec<Record>,
}

impl DatasetManifest {
    pub fn count(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join(MANIFEST_FILE), self.to_jsonl().as_bytes())?;
        let side = serde_json::to_string_pretty(&self.sidecar)?;
        write_file(&dir.join(SIDECAR_FILE), side.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let side_path = dir.join(SIDECAR_FILE);
        let side = fs::read_to_string(&side_path).map_err(|e| Error::file(&side_path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&side)
            .map_err(|e| Error::CorruptManifest(format!("{}: {e}", side_path.display())))?;
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                serde_json::from_str(l).map_err(|e| Error::CorruptManifest(format!("line {}: {e}", n + 1)))
            })
            .collect::<Result<Vec<Record>>>()?;
        Ok(DatasetManifest { sidecar, records })
    }

    pub fn space(&self) -> Result<Arc<ParameterSpace>> {
        Ok(Arc::new(ParameterSpace::by_id(&self.sidecar.space)?))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    f.write_all(bytes).map_err(|e| Error::file(path, e))
}

/// What one record is before it is rendered.
#[derive(Debug, Clone)]
struct Plan {
    id: String,
    source: Source,
    theme: Option<String>,
    family: Option<usize>,
    /// Parameters an augmentation resamples.
    free: Vec<String>,
}

fn plans(cfg: &DatasetConfig, space: &ParameterSpace) -> Vec<Plan> {
    let groups: Vec<ParamGroup> = space
        .free_groups()
        .into_iter()
        .filter(|g| matches!(g, ParamGroup::Operator(_)))
        .collect();
    let theme_of = |s: usize| cfg.themes[s % cfg.themes.len()].clone();
    let mut out = Vec::with_capacity(cfg.seeds + cfg.augmented + cfg.random);
    for s in 0..cfg.seeds {
        out.push(Plan {
            id: format!("seed-{s:05}"),
            source: Source::Seed,
            theme: Some(theme_of(s)),
            family: Some(s),
            free: vec![],
        });
    }
    for a in 0..cfg.augmented {
        let s = a % cfg.seeds;
        let g = groups[(a / cfg.seeds) % groups.len()];
        out.push(Plan {
            id: format!("aug-{a:05}"),
            source: Source::Augmented,
            theme: Some(theme_of(s)),
            family: Some(s),
            free: group_parameters(space, g),
        });
    }
    for r in 0..cfg.random {
        out.push(Plan {
            id: format!("rand-{r:05}"),
            source: Source::Random,
            theme: None,
            family: None,
            free: vec![],
        });
    }
    out
}

fn record_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw candidates until one is audible.
fn first_audible(
    cfg: &DatasetConfig,
    mut candidate: impl FnMut(&mut ChaCha8Rng) -> Result<Preset>,
    rng: &mut ChaCha8Rng,
) -> Result<(Preset, AudioBuffer)> {
    for _ in 0..cfg.retry_cap {
        let p = candidate(rng)?;
        let audio = render(&p, &cfg.note, cfg.sample_rate)?;
        if is_audible(&audio, cfg.audibility_threshold) {
            return Ok((p, audio));
        }
    }
    Err(Error::RetryCapExhausted(cfg.retry_cap))
}

/// Theme names held out for test, chosen by a seeded shuffle.
fn held_out_themes(cfg: &DatasetConfig, seed: u64) -> Vec<String> {
    let mut names = cfg.themes.clone();
    names.shuffle(&mut record_rng(seed, u64::MAX));
    let mut out: Vec<String> = names.into_iter().take(cfg.test_themes).collect();
    out.sort();
    out
}

fn assign_splits(cfg: &DatasetConfig, plans: &[Plan], test_themes: &[String], seed: u64) -> Vec<Split> {
    let mut splits: Vec<Split> = plans
        .iter()
        .map(|p| match &p.theme {
            Some(t) if test_themes.contains(t) => Split::Test,
            _ => Split::Train,
        })
        .collect();
    let pool = splits.iter().filter(|s| **s != Split::Test).count();
    let target = (cfg.val_fraction * pool as f64).round() as usize;
    let mut rng = record_rng(seed, u64::MAX - 1);

    let mut family_size: BTreeMap<usize, usize> = BTreeMap::new();
    for (p, s) in plans.iter().zip(&splits) {
        if let (Some(f), Split::Train) = (p.family, s) {
            *family_size.entry(f).or_default() += 1;
        }
    }
    let mut families: Vec<usize> = family_size.keys().copied().collect();
    families.shuffle(&mut rng);
    // Families are added whole while they fit; random presets fill the rest.
    let random_count = plans.iter().filter(|p| p.source == Source::Random).count();
    let mut val_families = BTreeSet::new();
    let mut taken = 0;
    for f in families {
        let n = family_size[&f];
        if taken + n <= target && target - taken - n <= random_count {
            val_families.insert(f);
            taken += n;
        }
        if target.saturating_sub(taken) <= random_count / 2 {
            break;
        }
    }
    let mut randoms: Vec<usize> = (0..plans.len()).filter(|&i| plans[i].source == Source::Random).collect();
    randoms.shuffle(&mut rng);
    for &i in randoms.iter().take(target.saturating_sub(taken)) {
        splits[i] = Split::Val;
    }
    for (p, s) in plans.iter().zip(splits.iter_mut()) {
        if p.family.is_some_and(|f| val_families.contains(&f)) && *s == Split::Train {
            *s = Split::Val;
        }
    }
    splits
}

/// Render, filter, split and write a dataset under `out`.
pub fn build_dataset(cfg: &DatasetConfig, seed: u64, out: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let space = Arc::new(ParameterSpace::by_id(&cfg.space)?);
    build_dataset_in(cfg, &space, seed, out)
}

/// As [`build_dataset`], over an explicit space instead of `cfg.space`.
pub fn build_dataset_in(
    cfg: &DatasetConfig,
    space: &Arc<ParameterSpace>,
    seed: u64,
    out: &Path,
) -> Result<DatasetManifest> {
    let space = Arc::clone(space);
    let plans = plans(cfg, &space);
    for sub in ["presets", "audio", "weights"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::file(&d, e))?;
    }

    let seed_count = cfg.seeds;
    let seeds: Vec<(Preset, AudioBuffer)> = plans[..seed_count]
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let t = theme(p.theme.as_deref().expect("seeds are themed")).expect("validated theme");
            first_audible(cfg, |rng| t.sample(&space, rng), &mut record_rng(seed, i as u64))
        })
        .collect::<Result<_>>()?;
    let rest: Vec<(Preset, AudioBuffer)> = plans[seed_count..]
        .par_iter()
        .enumerate()
        .map(|(j, p)| {
            let mut rng = record_rng(seed, (seed_count + j) as u64);
            match p.source {
                Source::Augmented => {
                    let parent = &seeds[p.family.expect("augmentations have a family")].0;
                    first_audible(cfg, |rng| augment_preset(parent, &p.free, rng), &mut rng)
                }
                _ => first_audible(cfg, |rng| Ok(sample_random_preset(&space, rng)), &mut rng),
            }
        })
        .collect::<Result<_>>()?;
    let rendered: Vec<(Preset, AudioBuffer)> = seeds.into_iter().chain(rest).collect();

    let test_themes = held_out_themes(cfg, seed);
    let splits = assign_splits(cfg, &plans, &test_themes, seed);

    let mfcc = MfccExtractor::new(&cfg.features.mfcc(), cfg.sample_rate)?;
    let records: Vec<Record> = plans
        .par_iter()
        .zip(rendered.par_iter())
        .zip(splits.par_iter())
        .map(|((plan, (preset, audio)), &split)| {
            let preset_path = format!("presets/{}.json", plan.id);
            let audio_path = format!("audio/{}.wav", plan.id);
            write_file(&out.join(&preset_path), preset.to_json().as_bytes())?;
            audio.write_wav(out.join(&audio_path))?;
            let weights_path = if cfg.compute_weights && split != Split::Test {
                let w = gradient_weights(preset, &cfg.note, cfg.sample_rate, &mfcc)?;
                let path = format!("weights/{}.json", plan.id);
                write_file(&out.join(&path), serde_json::to_string_pretty(&w)?.as_bytes())?;
                Some(path)
            } else {
                None
            };
            Ok(Record {
                id: plan.id.clone(),
                preset_path,
                audio_path,
                theme: plan.theme.clone(),
                family: plan.family,
                split,
                source: plan.source,
                weights_path,
                rms: audio.rms(),
            })
        })
        .collect::<Result<_>>()?;

    let manifest = DatasetManifest {
        sidecar: Sidecar {
            format_version: 1,
            space: space.id().to_string(),
            note: cfg.note,
            sample_rate: cfg.sample_rate,
            feature_config_hash: cfg.feature_hash(),
            audibility_threshold: cfg.audibility_threshold,
            seed,
            test_themes,
            config: cfg.clone(),
        },
        records,
    };
    manifest.write(out)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub records: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub issues: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Check every manifest invariant against the files on disk.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    let m = DatasetManifest::read(dir)?;
    let space = m.space()?;
    let mut issues = Vec::new();

    let mut ids = BTreeSet::new();
    for r in &m.records {
        if !ids.insert(&r.id) {
            issues.push(format!("{}: duplicate id", r.id));
        }
    }

    let mut themes: BTreeMap<&str, BTreeSet<bool>> = BTreeMap::new();
    let mut families: BTreeMap<usize, BTreeSet<Split>> = BTreeMap::new();
    for r in &m.records {
        if let Some(t) = &r.theme {
            themes.entry(t).or_default().insert(r.split == Split::Test);
        }
        if let Some(f) = r.family {
            families.entry(f).or_default().insert(r.split);
        }
        if r.source == Source::Random && r.split == Split::Test {
            issues.push(format!("{}: random preset in test", r.id));
        }
    }
    for (t, sides) in &themes {
        if sides.len() > 1 {
            issues.push(format!("theme `{t}` appears in test and in train/val"));
        }
    }
    for (f, splits) in &families {
        if splits.len() > 1 {
            issues.push(format!("seed family {f} spans {splits:?}"));
        }
    }

    let threshold = m.sidecar.audibility_threshold;
    let checks: Vec<Vec<String>> = m
        .records
        .par_iter()
        .map(|r| {
            let mut out = Vec::new();
            let preset = fs::read_to_string(dir.join(&r.preset_path))
                .map_err(|e| e.to_string())
                .and_then(|t| Preset::from_json(&t, &space).map_err(|e| e.to_string()));
            match preset {
                Ok(p) if p.theme != r.theme && r.source != Source::Random => {
                    out.push(format!("{}: preset theme {:?} differs from record {:?}", r.id, p.theme, r.theme))
                }
                Ok(_) => {}
                Err(e) => out.push(format!("{}: {}: {e}", r.id, r.preset_path)),
            }
            match AudioBuffer::read_wav(dir.join(&r.audio_path)) {
                Ok(a) if a.sample_rate() != m.sidecar.sample_rate => {
                    out.push(format!("{}: sample rate {}", r.id, a.sample_rate()))
                }
                Ok(a) if !is_audible(&a, threshold) => {
                    out.push(format!("{}: inaudible (rms {:.3e} < {threshold})", r.id, a.rms()))
                }
                Ok(_) => {}
                Err(e) => out.push(format!("{}: {}: {e}", r.id, r.audio_path)),
            }
            if let Some(w) = &r.weights_path {
                let parsed = fs::read_to_string(dir.join(w))
                    .map_err(|e| e.to_string())
                    .and_then(|t| serde_json::from_str::<ImportanceWeights>(&t).map_err(|e| e.to_string()));
                if let Err(e) = parsed {
                    out.push(format!("{}: {w}: {e}", r.id));
                }
            }
            out
        })
        .collect();
    issues.extend(checks.into_iter().flatten());

    Ok(VerifyReport {
        records: m.records.len(),
        train: m.count(Split::Train),
        val: m.count(Split::Val),
        test: m.count(Split::Test),
        issues,
    })
}

/// A dataset opened for training or evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub space: Arc<ParameterSpace>,
}

impl Dataset {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let manifest = DatasetManifest::read(&dir)?;
        let space = manifest.space()?;
        Ok(Dataset { dir, manifest, space })
    }

    pub fn preset(&self, r: &Record) -> Result<Preset> {
        let path = self.dir.join(&r.preset_path);
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        Preset::from_json(&text, &self.space)
    }

    pub fn audio(&self, r: &Record) -> Result<AudioBuffer> {
        AudioBuffer::read_wav(self.dir.join(&r.audio_path))
    }

    pub fn weights(&self, r: &Record) -> Result<Option<ImportanceWeights>> {
        let Some(w) = &r.weights_path else {
            return Ok(None);
        };
        let path = self.dir.join(w);
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Feature-extracted samples of one split, in manifest order.
    pub fn samples(&self, split: Split, features: &FeatureConfig) -> Result<Vec<Sample>> {
        let ex = FeatureExtractor::new(features, self.manifest.sidecar.sample_rate)?;
        let records: Vec<&Record> = self.manifest.split(split).collect();
        records
            .par_iter()
            .map(|r| {
                Ok(Sample {
                    input: ex.model_input(&self.audio(r)?)?,
                    preset: self.preset(r)?,
                    weights: self.weights(r)?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(id: &str) -> Arc<ParameterSpace> {
        Arc::new(ParameterSpace::by_id(id).unwrap())
    }

    /// Short notes keep rendering cheap.
    fn quick(seeds: usize, augmented: usize, random: usize) -> DatasetConfig {
        DatasetConfig {
            note: MidiNote {
                sustain_beats: 0.5,
                total_beats: 1.0,
                ..MidiNote::default()
            },
            seeds,
            augmented,
            random,
            compute_weights: false,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn random_presets_respect_fixed_values_and_bounds() {
        let sp = space("toy2");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = BTreeSet::new();
        for n in 0..1000 {
            let p = sample_random_preset(&sp, &mut rng);
            for (d, &c) in sp.descriptors().iter().zip(p.classes()) {
                assert!(c < d.class_count);
                if let Some(v) = d.fixed_value {
                    assert_eq!(c, v);
                }
            }
            if n < 100 {
                assert!(seen.insert(p.classes().to_vec()), "duplicate draw");
            }
        }
    }

    #[test]
    fn augmentation_only_touches_free_parameters() {
        let sp = space("fm2");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = THEMES[0].sample(&sp, &mut rng).unwrap();
        assert_eq!(augment_preset(&base, &[], &mut rng).unwrap(), base);
        let one = augment_preset(&base, &["op1_output_level".into()], &mut rng).unwrap();
        let diff = base.classes().iter().zip(one.classes()).filter(|(a, b)| a != b).count();
        assert!(diff <= 1);
        let free = group_parameters(&sp, ParamGroup::Operator(1));
        for _ in 0..100 {
            let a = augment_preset(&base, &free, &mut rng).unwrap();
            a.validate().unwrap();
            assert_eq!(a.theme, base.theme);
            for (d, (x, y)) in sp.descriptors().iter().zip(base.classes().iter().zip(a.classes())) {
                if !free.contains(&d.name) {
                    assert_eq!(x, y);
                }
            }
        }
        let toy = space("toy2");
        let p = toy.default_preset();
        assert!(augment_preset(&p, &["op1_detune".into()], &mut rng).is_err());
        assert!(augment_preset(&p, &["nope".into()], &mut rng).is_err());
    }

    #[test]
    fn seeds_only() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_dataset(&quick(16, 0, 0), 3, dir.path()).unwrap();
        assert_eq!(m.records.len(), 16);
        assert!(m.records.iter().all(|r| r.source == Source::Seed));
        let report = verify(dir.path()).unwrap();
        assert!(report.ok(), "{:?}", report.issues);
    }

    #[test]
    fn silent_space_exhausts_retries() {
        // Both output levels pinned to zero: nothing can be heard.
        let silent = ParameterSpace::by_id("toy2")
            .unwrap()
            .with_frozen("toy2", &[("op1_output_level".into(), 0), ("op2_output_level".into(), 0)])
            .unwrap();
        let cfg = DatasetConfig {
            retry_cap: 5,
            ..quick(2, 2, 2)
        };
        let dir = tempfile::tempdir().unwrap();
        let err = build_dataset_in(&cfg, &Arc::new(silent), 4, dir.path()).unwrap_err();
        assert!(matches!(err, Error::RetryCapExhausted(5)), "{err}");
    }

    #[test]
    fn default_counts_and_theme_disjoint_splits() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick(64, 192, 64);
        let m = build_dataset(&cfg, 5, dir.path()).unwrap();
        assert_eq!(m.records.len(), 320);
        let report = verify(dir.path()).unwrap();
        assert!(report.ok(), "{:?}", report.issues);
        // Two of eight themes held out: a quarter of seeds and augmentations.
        assert_eq!(report.test, 64);
        let pool = 256.0;
        assert_eq!(report.val, (0.2_f64 * pool).round() as usize);
        assert_eq!(report.train + report.val + report.test, 320);
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let cfg = quick(8, 16, 8);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        build_dataset(&cfg, 6, a.path()).unwrap();
        build_dataset(&cfg, 6, b.path()).unwrap();
        for f in [MANIFEST_FILE, SIDECAR_FILE, "audio/aug-00003.wav", "presets/rand-00002.json"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let other = tempfile::tempdir().unwrap();
        build_dataset(&cfg, 7, other.path()).unwrap();
        assert_ne!(
            fs::read(a.path().join(MANIFEST_FILE)).unwrap(),
            fs::read(other.path().join(MANIFEST_FILE)).unwrap()
        );
    }

    #[test]
    fn verify_reports_tampering() {
        let dir = tempfile::tempdir().unwrap();
        build_dataset(&quick(8, 8, 4), 8, dir.path()).unwrap();
        fs::remove_file(dir.path().join("audio/seed-00001.wav")).unwrap();
        AudioBuffer::silence(16000, 16000).write_wav(dir.path().join("audio/seed-00002.wav")).unwrap();
        let report = verify(dir.path()).unwrap();
        assert_eq!(report.issues.len(), 2, "{:?}", report.issues);
        fs::write(dir.path().join(MANIFEST_FILE), "{not json\n").unwrap();
        assert!(matches!(verify(dir.path()), Err(Error::CorruptManifest(_))));
    }

    #[test]
    fn weights_are_stored_for_train_and_val_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = DatasetConfig {
            compute_weights: true,
            ..quick(8, 0, 2)
        };
        let ds = {
            build_dataset(&cfg, 9, dir.path()).unwrap();
            Dataset::open(dir.path()).unwrap()
        };
        for r in &ds.manifest.records {
            assert_eq!(r.weights_path.is_some(), r.split != Split::Test, "{}", r.id);
        }
        let fcfg = FeatureConfig::default();
        let train = ds.samples(Split::Train, &fcfg).unwrap();
        assert_eq!(train.len(), ds.manifest.count(Split::Train));
        assert!(train.iter().all(|s| s.weights.is_some()));
    }
}
