use serde::{Deserialize, Serialize};

use super::{params_of, Layer, Tensor};
use crate::{Error, Result};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: AdamWConfig,
    pub step: u64,
    /// First and second moments, in parameter order.
    pub moments: Vec<(String, Tensor, Tensor)>,
}

impl AdamW {
    pub fn new(config: AdamWConfig) -> Self {
        AdamW {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    /// `w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + wd * w)`.
    pub fn step(&mut self, model: &mut dyn Layer, lr: f64) -> Result<()> {
        let params = params_of(model, "model");
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|(n, p)| (n.clone(), Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape())))
                .collect();
        }
        if self.moments.len() != params.len() {
            return Err(Error::shape("optimizer moments", &[params.len()], &[self.moments.len()]));
        }
        self.step += 1;
        let AdamWConfig { beta1, beta2, eps, weight_decay } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for ((name, param), (mname, m, v)) in params.into_iter().zip(self.moments.iter_mut()) {
            if name != *mname || m.shape() != param.value.shape() {
                return Err(Error::shape(format!("optimizer state for {name}"), param.value.shape(), m.shape()));
            }
            let g = param.grad.data();
            for (((w, &gi), mi), vi) in param
                .value
                .data_mut()
                .iter_mut()
                .zip(g)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let update = (*mi / c1) / ((*vi / c2).sqrt() + eps);
                *w -= lr * (update + weight_decay * *w);
            }
        }
        Ok(())
    }
}

/// Linear warm-up from 0 to `peak_lr`, then cosine decay to 0 at `total_steps`.
pub fn warmup_cosine_lr(step: usize, total_steps: usize, warmup_steps: usize, peak_lr: f64) -> f64 {
    if step < warmup_steps {
        return peak_lr * step as f64 / warmup_steps as f64;
    }
    if step >= total_steps {
        return 0.0;
    }
    let progress = (step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
    0.5 * peak_lr * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(model: &mut dyn Layer, max_norm: f64) -> f64 {
    let mut params = params_of(model, "");
    let norm = params.iter().map(|(_, p)| p.grad.sum_squares()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for (_, p) in params.iter_mut() {
            p.grad.scale(s);
        }
    }
    norm
}

pub fn grad_norm(model: &mut dyn Layer) -> f64 {
    params_of(model, "").iter().map(|(_, p)| p.grad.sum_squares()).sum::<f64>().sqrt()
}
