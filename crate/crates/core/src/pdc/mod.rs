//! Prime-dilated convolution.
//!
//! On a log-frequency axis with `B` bins per octave the `n`-th harmonic of
//! any fundamental sits `B log2 n` bins above it. Writing `n` as a product
//! of prime ratios turns that distance into a sum of a few fixed
//! distances, one per prime, each at most `B`. A sparse filter with taps at
//! those (rounded) distances therefore reaches every integer harmonic when
//! stacked: a layer adds one prime ratio per application.

mod conv;
mod filter;
mod prime;

pub use conv::{pdc_conv_backward, pdc_conv_forward, PdcFilter};
pub(crate) use conv::{backward_channel, forward_channel};
pub use filter::{dilated_locations, expand_filter, nearest_bin, DilatedLocations, PrimeTap};
pub use prime::{
    first_primes, harmonic_distance, is_prime, octave_shift, prime_distance, prime_ratio,
    prime_ratio_decompose, prime_ratio_f64, PrimeRatioDecomposition,
};

use crate::dsp::{Spectrogram, SpectrogramKind};
use crate::{Error, Result};

/// Apply a filter to a CQT spectrogram, checking the log-frequency axis.
pub fn pdc_spectrogram(spec: &Spectrogram, filter: &PdcFilter) -> Result<crate::nn::Tensor> {
    if spec.kind() != SpectrogramKind::Cqt {
        return Err(Error::InvalidConfig(
            "prime-dilated convolution needs a log-frequency (CQT) input".into(),
        ));
    }
    let bpo = spec.bins_per_octave().unwrap_or(0);
    let x = crate::nn::Tensor::from_vec(&spec.shape(), spec.data().to_vec())?;
    pdc_conv_forward(&x, bpo, filter)
}
