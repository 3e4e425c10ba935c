use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsp::MfccExtractor;
use crate::nn::{soft_cross_entropy, softmax};
use crate::synth::{render, MidiNote, ParamKind, Preset};
use crate::Result;

/// Gaussian of standard deviation `sigma0` class steps around `class`,
/// truncated to `0..k` and renormalized. `sigma0 = 0` gives a one-hot.
pub fn label_smooth(class: usize, k: usize, sigma0: f64) -> Vec<f64> {
    assert!(class < k, "class {class} out of range for {k} classes");
    let mut t = vec![0.0; k];
    if sigma0 <= 0.0 {
        t[class] = 1.0;
        return t;
    }
    for (i, v) in t.iter_mut().enumerate() {
        let d = (i as f64 - class as f64) / sigma0;
        *v = (-0.5 * d * d).exp();
    }
    let s: f64 = t.iter().sum();
    t.iter_mut().for_each(|v| *v /= s);
    t
}

/// Targets for every free parameter of `preset`. Only continuous
/// parameters are smoothed; categorical classes have no neighbourhood.
pub fn smoothed_targets(preset: &Preset, sigma0: f64) -> Vec<Vec<f64>> {
    let space = preset.space();
    space
        .free_indices()
        .into_iter()
        .map(|i| {
            let d = &space.descriptors()[i];
            let s = if d.kind == ParamKind::Continuous { sigma0 } else { 0.0 };
            label_smooth(preset.classes()[i], d.class_count, s)
        })
        .collect()
}

/// Per free parameter importance weights of one preset, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceWeights(pub BTreeMap<String, f64>);

impl ImportanceWeights {
    pub fn uniform(preset: &Preset) -> Self {
        let d = preset.space().descriptors();
        ImportanceWeights(preset.space().free_indices().into_iter().map(|i| (d[i].name.clone(), 1.0)).collect())
    }

    /// Weights in free-parameter order.
    pub fn ordered(&self, preset: &Preset) -> Vec<f64> {
        let d = preset.space().descriptors();
        preset
            .space()
            .free_indices()
            .into_iter()
            .map(|i| self.0.get(&d[i].name).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Rescale so the weights average to one. All-zero weights stay zero.
pub fn normalize_weights(w: &[f64]) -> Vec<f64> {
    let mean = w.iter().sum::<f64>() / w.len().max(1) as f64;
    if mean > 0.0 {
        w.iter().map(|v| v / mean).collect()
    } else {
        vec![0.0; w.len()]
    }
}

/// Audio-space change per unit of parameter-space squared error around
/// `preset`: for each free parameter, the mean over its one-class
/// neighbours of `MFCCD / ((1 / (K - 1))^2)`.
pub fn gradient_weights(
    preset: &Preset,
    note: &MidiNote,
    sample_rate: u32,
    mfcc: &MfccExtractor,
) -> Result<ImportanceWeights> {
    let reference = mfcc.extract(&render(preset, note, sample_rate)?)?;
    let space = preset.space();
    let mut out = BTreeMap::new();
    for i in space.free_indices() {
        let d = &space.descriptors()[i];
        let c = preset.classes()[i];
        let step = 1.0 / (d.class_count.max(2) - 1) as f64;
        let neighbours = [c.checked_sub(1), Some(c + 1).filter(|&n| n < d.class_count)];
        let mut sum = 0.0;
        let mut count = 0;
        for n in neighbours.into_iter().flatten() {
            let mut p = preset.clone();
            p.set_index(i, n)?;
            let m = mfcc.extract(&render(&p, note, sample_rate)?)?;
            sum += crate::dsp::mfcc::matrix_distance(&m, &reference) / (step * step);
            count += 1;
        }
        out.insert(d.name.clone(), if count == 0 { 0.0 } else { sum / count as f64 });
    }
    Ok(ImportanceWeights(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Weighted cross-entropy against the (smoothed) class targets.
    CrossEntropy,
    /// Squared error of the softmax-expected unit value.
    Mse,
}

/// Loss of one sample and its gradient with respect to every logit.
///
/// `weights` are used as given; the training loop normalizes them per
/// preset. The loss is the weighted mean over parameters.
pub fn loss(
    logits: &[Vec<f64>],
    targets: &[Vec<f64>],
    weights: &[f64],
    mode: LossMode,
) -> (f64, Vec<Vec<f64>>) {
    let p = logits.len().max(1) as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for ((z, t), &w) in logits.iter().zip(targets).zip(weights) {
        match mode {
            LossMode::CrossEntropy => {
                if w == 0.0 {
                    grads.push(vec![0.0; z.len()]);
                    continue;
                }
                let (l, g) = soft_cross_entropy(z, t);
                total += w * l / p;
                grads.push(g.into_iter().map(|v| v * w / p).collect());
            }
            LossMode::Mse => {
                let k = z.len();
                let unit = |c: usize| if k <= 1 { 0.0 } else { c as f64 / (k - 1) as f64 };
                let q = softmax(z);
                let expected: f64 = q.iter().enumerate().map(|(c, v)| v * unit(c)).sum();
                let truth: f64 = t.iter().enumerate().map(|(c, v)| v * unit(c)).sum();
                let e = expected - truth;
                total += w * e * e / p;
                grads.push(
                    q.iter()
                        .enumerate()
                        .map(|(c, qc)| 2.0 * w * e / p * qc * (unit(c) - expected))
                        .collect(),
                );
            }
        }
    }
    (total, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::MfccConfig;
    use crate::synth::ParameterSpace;
    use std::sync::Arc;

    #[test]
    fn smoothing_examples() {
        assert_eq!(label_smooth(3, 8, 0.0), {
            let mut v = vec![0.0; 8];
            v[3] = 1.0;
            v
        });
        let t = label_smooth(10, 64, 1.0);
        assert!((t[11] / t[10] - (-0.5f64).exp()).abs() < 1e-12);
        assert!((t[11] / t[10] - 0.6065).abs() < 1e-4);
        for k in [8, 64] {
            for c in 0..k {
                for s in [0.5, 1.0, 2.0] {
                    let t = label_smooth(c, k, s);
                    assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    assert_eq!(crate::nn::argmax(&t), c);
                }
            }
        }
    }

    #[test]
    fn loss_examples() {
        let target = label_smooth(5, 64, 0.0);
        let (l, _) = loss(&[vec![0.0; 64]], &[target.clone()], &[1.0], LossMode::CrossEntropy);
        assert!((l - 64f64.ln()).abs() < 1e-12);
        let mut z = vec![0.0; 64];
        z[5] = f64::INFINITY;
        assert_eq!(loss(&[z], &[target.clone()], &[1.0], LossMode::CrossEntropy).0, 0.0);
        let (l, g) = loss(&[vec![0.3; 64]], &[target], &[0.0], LossMode::Mse);
        assert_eq!(l, 0.0);
        assert!(g[0].iter().all(|&v| v == 0.0));
        assert_eq!(normalize_weights(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(normalize_weights(&[1.0, 3.0]), vec![0.5, 1.5]);
    }

    #[test]
    fn mse_gradient_matches_finite_difference() {
        let z = vec![vec![0.2, -0.4, 1.1, 0.0, 0.7]];
        let t = vec![label_smooth(1, 5, 0.0)];
        let (_, g) = loss(&z, &t, &[1.3], LossMode::Mse);
        let h = 1e-6;
        for c in 0..5 {
            let (mut up, mut down) = (z.clone(), z.clone());
            up[0][c] += h;
            down[0][c] -= h;
            let n = (loss(&up, &t, &[1.3], LossMode::Mse).0 - loss(&down, &t, &[1.3], LossMode::Mse).0) / (2.0 * h);
            assert!((n - g[0][c]).abs() < 1e-8);
        }
    }

    #[test]
    fn muted_modulator_has_no_influence() {
        let space = Arc::new(ParameterSpace::by_id("fm2").unwrap());
        let mut p = space.default_preset();
        for (name, v) in [
            ("op1_ratio_coarse", 1),
            ("op1_output_level", 63),
            ("op1_attack", 5),
            ("op1_sustain", 50),
            ("op2_ratio_coarse", 3),
            ("op2_output_level", 0),
            ("op2_attack", 20),
            ("op2_decay", 30),
            ("op2_sustain", 40),
            ("op2_release", 10),
            ("feedback", 0),
        ] {
            p.set(name, v).unwrap();
        }
        let note = MidiNote {
            sustain_beats: 1.0,
            total_beats: 2.0,
            ..MidiNote::default()
        };
        let mfcc = MfccExtractor::new(&MfccConfig::default(), 16000).unwrap();
        let w = gradient_weights(&p, &note, 16000, &mfcc).unwrap();
        for (name, &v) in &w.0 {
            assert!(v.is_finite() && v >= 0.0);
            if name.starts_with("op2_") && name != "op2_output_level" {
                assert_eq!(v, 0.0, "{name}");
            }
        }
        assert!(w.0["op1_output_level"] > 0.0);
        assert!(w.0["op1_output_level"] > w.0["op2_attack"]);
        assert_eq!(w, gradient_weights(&p, &note, 16000, &mfcc).unwrap());
    }
}
