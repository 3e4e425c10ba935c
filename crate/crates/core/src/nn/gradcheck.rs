//! Central-difference gradient checks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Layer, Param, Tensor};
use crate::Result;

/// Anything exposing its parameters for perturbation.
pub trait Differentiable {
    fn params(&mut self) -> Vec<(String, &mut Param)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub h: f64,
    /// Entries sampled per parameter array; smaller arrays are checked in full.
    pub per_param: usize,
    /// Denominator floor for the relative error, so entries whose true
    /// gradient is below the round-off of the difference quotient compare
    /// absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            h: 1e-5,
            per_param: 16,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// `loss(model, true)` must zero, then accumulate, parameter gradients;
/// `loss(model, false)` only evaluates.
pub fn check_gradients<M: Differentiable>(
    model: &mut M,
    mut loss: impl FnMut(&mut M, bool) -> Result<f64>,
    cfg: GradCheckConfig,
) -> Result<GradCheckReport> {
    loss(model, true)?;
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|(_, p)| p.grad.data().to_vec()).collect();
    let names: Vec<String> = model.params().iter().map(|(n, _)| n.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for (pi, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let picks: Vec<usize> = if n <= cfg.per_param {
            (0..n).collect()
        } else {
            let mut v = sample(&mut rng, n, cfg.per_param).into_vec();
            v.sort_unstable();
            v
        };
        for i in picks {
            let original = model.params()[pi].1.value.data()[i];
            model.params()[pi].1.value.data_mut()[i] = original + cfg.h;
            let up = loss(model, false)?;
            model.params()[pi].1.value.data_mut()[i] = original - cfg.h;
            let down = loss(model, false)?;
            model.params()[pi].1.value.data_mut()[i] = original;
            let numeric = (up - down) / (2.0 * cfg.h);
            let err = relative_error(grads[i], numeric, cfg.floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_empty() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = format!("{}[{i}]: analytic {} numeric {}", names[pi], grads[i], numeric);
            }
        }
    }
    Ok(report)
}

/// A layer under test with its input promoted to a parameter and a fixed
/// random projection `L = sum c * y` as the loss.
pub struct LayerProbe<'a> {
    pub layer: &'a mut dyn Layer,
    pub input: Param,
    coeffs: Option<Tensor>,
    seed: u64,
}

impl<'a> LayerProbe<'a> {
    pub fn new(layer: &'a mut dyn Layer, input: Tensor, seed: u64) -> Self {
        LayerProbe {
            layer,
            input: Param::new(input),
            coeffs: None,
            seed,
        }
    }

    pub fn loss(&mut self, with_grad: bool) -> Result<f64> {
        let y = self.layer.forward(&self.input.value)?;
        let c = self.coeffs.get_or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let data = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Tensor::from_vec(y.shape(), data).expect("same length")
        });
        let l = y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum();
        if with_grad {
            for (_, p) in self.params() {
                p.zero_grad();
            }
            let c = self.coeffs.clone().expect("set above");
            let gx = self.layer.backward(&c)?;
            self.input.grad = gx;
        }
        Ok(l)
    }

    pub fn check(&mut self, cfg: GradCheckConfig) -> Result<GradCheckReport> {
        check_gradients(self, |p, g| p.loss(g), cfg)
    }
}

impl Differentiable for LayerProbe<'_> {
    fn params(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = super::params_of(self.layer, "layer");
        out.push(("input".into(), &mut self.input));
        out
    }
}
