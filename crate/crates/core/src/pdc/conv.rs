//! Prime-dilated convolution along the frequency axis of a `C x K x T`
//! array. Output bin `k` reads input bins `k + k_j` for every tap offset
//! `k_j`, so the asymmetric filter reaches upward into the harmonics.
//! Out-of-range bins are zero, which keeps `K` unchanged. There is no
//! mixing across time frames or channels.

use super::filter::DilatedLocations;
use crate::nn::Tensor;
use crate::{Error, Result};

/// Trainable tap weights together with their locations.
#[derive(Debug, Clone, PartialEq)]
pub struct PdcFilter {
    pub v: Vec<f64>,
    pub locations: DilatedLocations,
}

impl PdcFilter {
    pub fn new(v: Vec<f64>, locations: DilatedLocations) -> Result<Self> {
        if v.len() != locations.len() {
            return Err(Error::shape("pdc filter weights", &[locations.len()], &[v.len()]));
        }
        Ok(PdcFilter { v, locations })
    }

    /// All weight on the zero offset: the identity map.
    pub fn identity(locations: DilatedLocations) -> Self {
        let v = locations
            .locations
            .iter()
            .map(|&k| if k == 0 { 1.0 } else { 0.0 })
            .collect();
        PdcFilter { v, locations }
    }

    pub fn expanded(&self) -> Vec<f64> {
        super::filter::expand_filter(&self.v, &self.locations).expect("lengths checked on construction")
    }
}

fn dims(x: &Tensor) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [c, k, t] => Ok((c, k, t)),
        _ => Err(Error::shape("pdc input (C x K x T)", &[0, 0, 0], x.shape())),
    }
}

fn check_bins(input_bpo: usize, filter: &PdcFilter) -> Result<()> {
    if input_bpo != filter.locations.bins_per_octave {
        return Err(Error::BinsPerOctaveMismatch {
            input: input_bpo,
            filter: filter.locations.bins_per_octave,
        });
    }
    Ok(())
}

/// Shared-filter forward pass. `bins_per_octave` describes the input axis.
pub fn pdc_conv_forward(x: &Tensor, bins_per_octave: usize, filter: &PdcFilter) -> Result<Tensor> {
    check_bins(bins_per_octave, filter)?;
    let (c, k, t) = dims(x)?;
    let mut out = Tensor::zeros(x.shape());
    for ch in 0..c {
        forward_channel(x, &filter.v, &filter.locations.locations, ch, k, t, out.data_mut());
    }
    Ok(out)
}

pub(crate) fn forward_channel(
    x: &Tensor,
    v: &[f64],
    offsets: &[i64],
    ch: usize,
    k: usize,
    t: usize,
    out: &mut [f64],
) {
    let plane = ch * k * t;
    let xd = &x.data()[plane..plane + k * t];
    let od = &mut out[plane..plane + k * t];
    for (&w, &off) in v.iter().zip(offsets) {
        let (lo, hi) = valid_range(off, k);
        for bin in lo..hi {
            let src = (bin as i64 + off) as usize;
            let (o, i) = (&mut od[bin * t..(bin + 1) * t], &xd[src * t..(src + 1) * t]);
            for (a, b) in o.iter_mut().zip(i) {
                *a += w * b;
            }
        }
    }
}

/// Output bins `bin` with `0 <= bin + off < k`.
fn valid_range(off: i64, k: usize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = (k as i64 - off.max(0)).max(0) as usize;
    (lo.min(k), hi.max(lo.min(k)))
}

/// Gradients of [`pdc_conv_forward`] with respect to the input and to the
/// tap weights. Bins between taps carry no weight and get no gradient.
pub fn pdc_conv_backward(
    x: &Tensor,
    filter: &PdcFilter,
    upstream: &Tensor,
) -> Result<(Tensor, Vec<f64>)> {
    let (c, k, t) = dims(x)?;
    upstream.expect_shape("pdc upstream gradient", x.shape())?;
    let mut gx = Tensor::zeros(x.shape());
    let mut gv = vec![0.0; filter.v.len()];
    for ch in 0..c {
        backward_channel(
            x,
            upstream,
            &filter.v,
            &filter.locations.locations,
            ch,
            k,
            t,
            gx.data_mut(),
            &mut gv,
        );
    }
    Ok((gx, gv))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_channel(
    x: &Tensor,
    upstream: &Tensor,
    v: &[f64],
    offsets: &[i64],
    ch: usize,
    k: usize,
    t: usize,
    gx: &mut [f64],
    gv: &mut [f64],
) {
    let plane = ch * k * t;
    let xd = &x.data()[plane..plane + k * t];
    let gd = &upstream.data()[plane..plane + k * t];
    let gxd = &mut gx[plane..plane + k * t];
    for (j, (&w, &off)) in v.iter().zip(offsets).enumerate() {
        let (lo, hi) = valid_range(off, k);
        let mut acc = 0.0;
        for bin in lo..hi {
            let src = (bin as i64 + off) as usize;
            let g = &gd[bin * t..(bin + 1) * t];
            let xi = &xd[src * t..(src + 1) * t];
            let gi = &mut gxd[src * t..(src + 1) * t];
            for ((gxv, &gg), &xv) in gi.iter_mut().zip(g).zip(xi) {
                *gxv += w * gg;
                acc += gg * xv;
            }
        }
        gv[j] += acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdc::dilated_locations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_filter() {
        let x = random(&[2, 30, 4], 1);
        for symmetric in [false, true] {
            let f = PdcFilter::identity(dilated_locations(12, 4, symmetric));
            assert_eq!(pdc_conv_forward(&x, 12, &f).unwrap(), x);
            let g = random(&[2, 30, 4], 2);
            let (gx, _) = pdc_conv_backward(&x, &f, &g).unwrap();
            assert_eq!(gx, g);
        }
    }

    #[test]
    fn impulse_reaches_down_to_its_subharmonic_bins() {
        let mut x = Tensor::zeros(&[1, 40, 1]);
        x.data_mut()[20] = 1.0;
        let f = PdcFilter::new(vec![1.0; 5], dilated_locations(12, 4, false)).unwrap();
        let y = pdc_conv_forward(&x, 12, &f).unwrap();
        let hot: Vec<usize> = (0..40).filter(|&k| y.data()[k] != 0.0).collect();
        assert_eq!(hot, vec![8, 10, 13, 16, 20]);
    }

    #[test]
    fn linear_in_the_input() {
        let f = PdcFilter::new(
            vec![0.3, -1.2, 0.7, 2.0, -0.4, 0.9, 1.1, -0.2, 0.5],
            dilated_locations(12, 4, true),
        )
        .unwrap();
        let (x, y) = (random(&[3, 30, 5], 3), random(&[3, 30, 5], 4));
        let (a, b) = (1.7, -0.6);
        let mut mix = x.clone();
        mix.scale(a);
        let mut yb = y.clone();
        yb.scale(b);
        mix.add_assign(&yb);
        let lhs = pdc_conv_forward(&mix, 12, &f).unwrap();
        let fx = pdc_conv_forward(&x, 12, &f).unwrap();
        let fy = pdc_conv_forward(&y, 12, &f).unwrap();
        for i in 0..lhs.len() {
            let rhs = a * fx.data()[i] + b * fy.data()[i];
            assert!((lhs.data()[i] - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let x = random(&[1, 30, 4], 5);
        let f = PdcFilter::new(vec![0.5; 5], dilated_locations(12, 4, false)).unwrap();
        let (gx, gv) = pdc_conv_backward(&x, &f, &Tensor::zeros(&[1, 30, 4])).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(gv.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn central_difference_check() {
        let x = random(&[1, 30, 4], 6);
        let f = PdcFilter::new(vec![0.4, -0.8, 1.3, 0.2, -1.1], dilated_locations(12, 4, false)).unwrap();
        let g = random(&[1, 30, 4], 7);
        let (gx, gv) = pdc_conv_backward(&x, &f, &g).unwrap();
        let loss = |x: &Tensor, f: &PdcFilter| -> f64 {
            let y = pdc_conv_forward(x, 12, f).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        for i in 0..x.len() {
            let (mut up, mut down) = (x.clone(), x.clone());
            up.data_mut()[i] += h;
            down.data_mut()[i] -= h;
            let n = (loss(&up, &f) - loss(&down, &f)) / (2.0 * h);
            assert!(rel(gx.data()[i], n) < 1e-6, "x[{i}]");
        }
        for j in 0..f.v.len() {
            let (mut up, mut down) = (f.clone(), f.clone());
            up.v[j] += h;
            down.v[j] -= h;
            let n = (loss(&x, &up) - loss(&x, &down)) / (2.0 * h);
            assert!(rel(gv[j], n) < 1e-6, "v[{j}]");
        }
    }

    #[test]
    fn mismatched_resolution_is_rejected() {
        let f = PdcFilter::identity(dilated_locations(24, 4, false));
        assert!(matches!(
            pdc_conv_forward(&Tensor::zeros(&[1, 30, 2]), 12, &f),
            Err(Error::BinsPerOctaveMismatch { input: 12, filter: 24 })
        ));
    }
}
