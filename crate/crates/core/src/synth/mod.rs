//! Deterministic FM synthesis and the preset parameter space.

pub mod audio;
pub mod engine;
pub mod note;
pub mod routing;
pub mod space;

pub use audio::{is_audible, AudioBuffer};
pub use engine::render;
pub use note::MidiNote;
pub use routing::{algorithm_topology, ModRouting};
pub use space::{
    DecodedValue, ParamGroup, ParamKind, ParameterDescriptor, ParameterSpace, Preset,
};
