//! Binaural sound source localization with a spiking auditory-pathway model,
//! and the simulated experiments built on it.

pub mod acoustics;
pub mod asr;
pub mod behavior;
pub mod brainstem;
pub mod classifier;
pub mod cochlea;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod experiments;
pub mod midbrain;
pub mod pipeline;
pub mod seed;
pub mod signal;
pub mod speech;
pub mod verify;

pub use error::{Error, Result};
