//! Audio-to-feature transforms and the MFCC distance.

pub mod cqt;
mod fft;
pub mod mfcc;
pub mod spectrogram;
pub mod stats;

pub use cqt::{cqt_chromagram, CqtConfig, CqtKernel};
pub use fft::hann;
pub use mfcc::{mfcc, mfccd, MfccConfig, MfccExtractor, MfccMatrix};
pub use spectrogram::{
    mel_spectrogram, stft_spectrogram, MelConfig, MelFilterbank, Spectrogram, SpectrogramKind,
};
pub use stats::{statistical_features, StatTracks};
