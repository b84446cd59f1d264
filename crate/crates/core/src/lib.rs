//! Software model of a beam-switched millimetre-wave MIMO channel sounder.
//!
//! The crate covers the whole measurement chain: multitone sounding waveform
//! design, phased-array beam codebooks, synthetic double-directional channels,
//! sweep timing, hardware impairments, capture simulation, the binary capture
//! container, and the post-processing that turns captures into directional
//! power delay profiles, angular spectra and path loss.
//!
//! Algorithms that come in interchangeable variants (tone phase designs,
//! beam pattern models, anchor-slot policies, delay windows) are exposed as
//! trait objects in a [`registry::Registry`] so callers can pick them by name.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beams;
pub mod capture;
pub mod channel;
pub mod error;
pub mod impairments;
pub mod io;
pub mod processing;
pub mod registry;
mod serde_seed;
pub mod sweep;
pub mod units;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64;
