/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::INFINITY {
        // Mass splits evenly over the infinite entries.
        let n = logits.iter().filter(|&&z| z == f64::INFINITY).count() as f64;
        return logits.iter().map(|&z| if z == f64::INFINITY { 1.0 / n } else { 0.0 }).collect();
    }
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Cross-entropy of `logits` against a probability vector, and its
/// gradient `softmax(logits) - target`.
pub fn soft_cross_entropy(logits: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    debug_assert_eq!(logits.len(), target.len());
    let p = softmax(logits);
    let loss = if logits.iter().any(|z| z.is_infinite()) {
        // Limit of a saturated prediction: zero where it agrees with the target.
        -target.iter().zip(&p).map(|(&t, &q)| if t > 0.0 { t * q.ln() } else { 0.0 }).sum::<f64>()
    } else {
        -target.iter().zip(log_softmax(logits)).map(|(t, l)| t * l).sum::<f64>()
    };
    let grad = p.iter().zip(target).map(|(q, t)| q - t).collect();
    (loss, grad)
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_sum_to_one() {
        for logits in [vec![0.0; 7], vec![1000.0, -1000.0, 3.0], vec![-3.2, 0.1, 9.9, 2.0]] {
            assert!((softmax(&logits).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_logits_cost_log_k() {
        let mut target = vec![0.0; 64];
        target[17] = 1.0;
        let (loss, _) = soft_cross_entropy(&[0.0; 64], &target);
        assert!((loss - 64f64.ln()).abs() < 1e-12);
        assert!((loss - 4.1589).abs() < 1e-4);
    }

    #[test]
    fn saturated_correct_prediction_costs_nothing() {
        let mut logits = vec![0.0; 8];
        logits[3] = f64::INFINITY;
        let mut target = vec![0.0; 8];
        target[3] = 1.0;
        assert_eq!(soft_cross_entropy(&logits, &target).0, 0.0);
        logits[3] = 800.0;
        assert!(soft_cross_entropy(&logits, &target).0 < 1e-300);
    }

    #[test]
    fn argmax_prefers_first_maximum() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
    }
}
