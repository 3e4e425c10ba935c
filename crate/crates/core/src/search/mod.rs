//! Black-box baselines: hill climbing and a genetic algorithm that render
//! candidates and minimize MFCCD to the target directly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::sample_random_preset;
use crate::dsp::mfcc::matrix_distance;
use crate::dsp::{MfccConfig, MfccExtractor, MfccMatrix};
use crate::synth::{render, AudioBuffer, MidiNote, ParameterSpace, Preset};
use crate::{Error, Result};

/// Consecutive proposals answered from the cache before a search gives up.
const STALL_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBudget {
    pub max_evaluations: usize,
    pub seed: u64,
    /// Stop as soon as the best MFCCD reaches this value.
    pub early_stop: Option<f64>,
}

impl SearchBudget {
    pub fn new(max_evaluations: usize, seed: u64) -> Result<Self> {
        let b = SearchBudget {
            max_evaluations,
            seed,
            early_stop: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations == 0 {
            return Err(Error::ZeroBudget);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub candidate: String,
    pub mfccd: f64,
    pub best_mfccd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub entries: Vec<TraceEntry>,
}

impl SearchTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.best_mfccd).collect()
    }

    pub fn best(&self) -> Option<f64> {
        self.entries.last().map(|e| e.best_mfccd)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,mfccd,best_mfccd\n");
        for e in &self.entries {
            writeln!(s, "{},{},{}", e.step, e.mfccd, e.best_mfccd).expect("writing to a String");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::file(path, e))
    }
}

/// Short stable id of a class vector.
pub fn candidate_id(classes: &[usize]) -> String {
    let mut h = Sha256::new();
    for c in classes {
        h.update((*c as u32).to_le_bytes());
    }
    hex::encode(&h.finalize()[..6])
}

/// Renders candidates, scores them against the target and keeps the books:
/// cache, budget, trace and best candidate.
pub struct Evaluator {
    space: Arc<ParameterSpace>,
    note: MidiNote,
    sample_rate: u32,
    mfcc: MfccExtractor,
    target: MfccMatrix,
    budget: SearchBudget,
    cache: HashMap<Vec<usize>, f64>,
    trace: SearchTrace,
    best: Option<(Preset, f64)>,
}

impl Evaluator {
    pub fn new(target: &AudioBuffer, space: &Arc<ParameterSpace>, note: &MidiNote, budget: SearchBudget) -> Result<Self> {
        budget.validate()?;
        note.validate()?;
        let sample_rate = target.sample_rate();
        let expected = note.total_samples(sample_rate);
        if target.len() != expected {
            return Err(Error::InvalidAudio(format!(
                "target has {} samples, the note renders {expected} at {sample_rate} Hz",
                target.len()
            )));
        }
        let mfcc = MfccExtractor::new(&MfccConfig::default(), sample_rate)?;
        let target = mfcc.extract(target)?;
        Ok(Evaluator {
            space: Arc::clone(space),
            note: *note,
            sample_rate,
            mfcc,
            target,
            budget,
            cache: HashMap::new(),
            trace: SearchTrace::default(),
            best: None,
        })
    }

    pub fn space(&self) -> &Arc<ParameterSpace> {
        &self.space
    }

    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }

    pub fn remaining(&self) -> usize {
        self.budget.max_evaluations - self.trace.len()
    }

    /// Out of budget or below the early-stop threshold.
    pub fn done(&self) -> bool {
        self.remaining() == 0
            || matches!((self.budget.early_stop, &self.best), (Some(t), Some((_, b))) if *b <= t)
    }

    pub fn best(&self) -> Option<&(Preset, f64)> {
        self.best.as_ref()
    }

    pub fn cached(&self, p: &Preset) -> Option<f64> {
        self.cache.get(p.classes()).copied()
    }

    fn score(&self, p: &Preset) -> Result<f64> {
        let m = self.mfcc.extract(&render(p, &self.note, self.sample_rate)?)?;
        Ok(matrix_distance(&m, &self.target))
    }

    fn record(&mut self, p: &Preset, d: f64) {
        self.cache.insert(p.classes().to_vec(), d);
        if self.best.as_ref().is_none_or(|(_, b)| d < *b) {
            self.best = Some((p.clone(), d));
        }
        let best = self.best.as_ref().expect("just set").1;
        self.trace.entries.push(TraceEntry {
            step: self.trace.len() + 1,
            candidate: candidate_id(p.classes()),
            mfccd: d,
            best_mfccd: best,
        });
    }

    /// Score one candidate. `None` once the search must stop.
    pub fn evaluate(&mut self, p: &Preset) -> Result<Option<f64>> {
        Ok(self.evaluate_many(std::slice::from_ref(p))?.pop().flatten())
    }

    /// Score candidates in order, rendering new ones in parallel. Cache
    /// hits are free; candidates past the budget come back as `None`.
    pub fn evaluate_many(&mut self, ps: &[Preset]) -> Result<Vec<Option<f64>>> {
        let mut fresh: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, p) in ps.iter().enumerate() {
            if !self.cache.contains_key(p.classes()) && seen.insert(p.classes()) {
                fresh.push(i);
            }
        }
        let stop_at = if self.done() { 0 } else { self.remaining() };
        fresh.truncate(stop_at);
        let scores: Vec<f64> = fresh.par_iter().map(|&i| self.score(&ps[i])).collect::<Result<_>>()?;
        for (&i, &d) in fresh.iter().zip(&scores) {
            if self.done() {
                break;
            }
            self.record(&ps[i], d);
        }
        Ok(ps.iter().map(|p| self.cached(p)).collect())
    }

    pub fn finish(self) -> Result<(Preset, SearchTrace)> {
        let (p, _) = self.best.ok_or(Error::ZeroBudget)?;
        Ok((p, self.trace))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HillClimbConfig {
    /// Non-improving proposals before a random restart.
    pub patience: usize,
}

impl Default for HillClimbConfig {
    fn default() -> Self {
        HillClimbConfig { patience: 64 }
    }
}

/// Single-parameter ±1-class moves, accepted only on strict improvement,
/// with random restarts.
pub fn hill_climb(
    target: &AudioBuffer,
    space: &Arc<ParameterSpace>,
    note: &MidiNote,
    budget: SearchBudget,
    cfg: HillClimbConfig,
) -> Result<(Preset, SearchTrace)> {
    if cfg.patience == 0 {
        return Err(Error::InvalidConfig("patience: must be at least 1".into()));
    }
    let mut ev = Evaluator::new(target, space, note, budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let free = space.free_indices();

    let mut current = sample_random_preset(space, &mut rng);
    let mut current_d = ev.evaluate(&current)?.expect("budget is at least 1");
    let (mut stale, mut idle) = (0, 0);
    while !ev.done() && !free.is_empty() && idle < STALL_LIMIT {
        let before = ev.evaluations();
        if stale >= cfg.patience {
            current = sample_random_preset(space, &mut rng);
            match ev.evaluate(&current)? {
                Some(d) => current_d = d,
                None => break,
            }
            stale = 0;
        } else {
            let i = *free.choose(&mut rng).expect("non-empty");
            let k = space.descriptors()[i].class_count;
            let c = current.classes()[i];
            let up = rng.gen_bool(0.5);
            let next = if up { (c + 1).min(k - 1) } else { c.saturating_sub(1) };
            let mut cand = current.clone();
            cand.set_index(i, next)?;
            match ev.evaluate(&cand)? {
                Some(d) if d < current_d => {
                    current = cand;
                    current_d = d;
                    stale = 0;
                }
                Some(_) => stale += 1,
                None => break,
            }
        }
        idle = if ev.evaluations() == before { idle + 1 } else { 0 };
    }
    ev.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Per-gene rate; `None` means one over the number of free parameters.
    pub mutation_rate: Option<f64>,
    /// Share of mutations that step one class instead of resampling.
    pub step_share: f64,
    pub elitism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 32,
            tournament: 3,
            crossover_rate: 0.9,
            mutation_rate: None,
            step_share: 0.5,
            elitism: 2,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.population < 2 {
            return bad("population: must be at least 2");
        }
        if self.tournament == 0 || self.tournament > self.population {
            return bad("tournament: must be in 1..=population");
        }
        if self.elitism >= self.population {
            return bad("elitism: must be below population");
        }
        if !unit(self.crossover_rate) || !unit(self.step_share) || !self.mutation_rate.is_none_or(unit) {
            return bad("crossover_rate, mutation_rate and step_share must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Genetic search from a random initial population.
pub fn genetic_search(
    target: &AudioBuffer,
    space: &Arc<ParameterSpace>,
    note: &MidiNote,
    budget: SearchBudget,
    cfg: GaConfig,
) -> Result<(Preset, SearchTrace)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let init: Vec<Preset> = (0..cfg.population).map(|_| sample_random_preset(space, &mut rng)).collect();
    evolve(target, space, note, budget, cfg, init, rng)
}

/// Genetic search from a given initial population.
pub fn genetic_search_from(
    target: &AudioBuffer,
    space: &Arc<ParameterSpace>,
    note: &MidiNote,
    budget: SearchBudget,
    cfg: GaConfig,
    population: Vec<Preset>,
) -> Result<(Preset, SearchTrace)> {
    cfg.validate()?;
    if population.len() != cfg.population {
        return Err(Error::InvalidConfig(format!(
            "population: {} presets given, {} configured",
            population.len(),
            cfg.population
        )));
    }
    let rng = ChaCha8Rng::seed_from_u64(budget.seed);
    evolve(target, space, note, budget, cfg, population, rng)
}

fn evolve(
    target: &AudioBuffer,
    space: &Arc<ParameterSpace>,
    note: &MidiNote,
    budget: SearchBudget,
    cfg: GaConfig,
    init: Vec<Preset>,
    mut rng: ChaCha8Rng,
) -> Result<(Preset, SearchTrace)> {
    let mut ev = Evaluator::new(target, space, note, budget)?;
    let free = space.free_indices();
    let rate = cfg.mutation_rate.unwrap_or(1.0 / free.len().max(1) as f64);

    let scored = |ev: &mut Evaluator, pop: Vec<Preset>| -> Result<Vec<(Preset, f64)>> {
        let scores = ev.evaluate_many(&pop)?;
        Ok(pop.into_iter().zip(scores).filter_map(|(p, s)| s.map(|s| (p, s))).collect())
    };
    let mut pop = scored(&mut ev, init)?;
    let mut idle = 0;
    while !ev.done() && idle < STALL_LIMIT {
        // Stable sort keeps ties in population order.
        pop.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut children: Vec<Preset> = Vec::with_capacity(cfg.population);
        let tournament = |rng: &mut ChaCha8Rng| {
            (0..cfg.tournament)
                .map(|_| rng.gen_range(0..pop.len()))
                .min_by(|&a, &b| pop[a].1.total_cmp(&pop[b].1))
                .expect("tournament is non-empty")
        };
        while children.len() < cfg.population - cfg.elitism.min(pop.len()) {
            let a = &pop[tournament(&mut rng)].0;
            let b = &pop[tournament(&mut rng)].0;
            let mut child = a.clone();
            if rng.gen_bool(cfg.crossover_rate) {
                for &i in &free {
                    if rng.gen_bool(0.5) {
                        child.set_index(i, b.classes()[i])?;
                    }
                }
            }
            for &i in &free {
                if rng.gen_bool(rate) {
                    let k = space.descriptors()[i].class_count;
                    let c = child.classes()[i];
                    let next = if rng.gen_bool(cfg.step_share) {
                        if rng.gen_bool(0.5) { (c + 1).min(k - 1) } else { c.saturating_sub(1) }
                    } else {
                        rng.gen_range(0..k)
                    };
                    child.set_index(i, next)?;
                }
            }
            children.push(child);
        }
        let before = ev.evaluations();
        let mut next: Vec<(Preset, f64)> = pop.iter().take(cfg.elitism).cloned().collect();
        next.extend(scored(&mut ev, children)?);
        pop = next;
        idle = if ev.evaluations() == before { idle + 1 } else { 0 };
    }
    ev.finish()
}

/// MFCCD of every class of one free parameter, others held at `base`.
pub fn line_scan(
    target: &AudioBuffer,
    base: &Preset,
    name: &str,
    note: &MidiNote,
) -> Result<Vec<f64>> {
    let space = base.space();
    let i = space
        .position(name)
        .ok_or_else(|| Error::InvalidPreset(format!("unknown parameter `{name}`")))?;
    let mfcc = MfccExtractor::new(&MfccConfig::default(), target.sample_rate())?;
    let t = mfcc.extract(target)?;
    (0..space.descriptors()[i].class_count)
        .into_par_iter()
        .map(|c| {
            let mut p = base.clone();
            p.set_index(i, c)?;
            Ok(matrix_distance(&mfcc.extract(&render(&p, note, target.sample_rate())?)?, &t))
        })
        .collect()
}
