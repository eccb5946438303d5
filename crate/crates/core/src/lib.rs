//! Security impact of light-injection attacks on lithium-niobate modulators
//! in decoy-state BB84.
//!
//! The crate is organised bottom-up:
//!
//! * [`primitives`]: decibel units, intensity sets, binary entropy;
//! * [`channel`]: asymptotic gain/QBER forward model;
//! * [`decoy`]: single-photon bounds, key-rate bound, attack scenarios;
//! * [`optimizer`]: signal/decoy intensity search;
//! * [`modulator`]: measurement ingestion and photorefractive response model;
//! * [`countermeasures`]: isolator/filter attenuation and light monitor;
//! * [`analysis`]: sweep and report tables consumed by the CLI.
//!
//! Batch evaluations go through [`exec::Execution`], which uses rayon when
//! the `parallel` feature is enabled and runs sequentially otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod countermeasures;
pub mod decoy;
pub mod error;
pub mod exec;
pub mod modulator;
pub mod optimizer;
pub mod primitives;

pub use channel::{ChannelParams, ObservedStats};
pub use decoy::{evaluate_scenarios, KeyRateReport};
pub use error::{Error, Result};
pub use exec::Execution;
pub use optimizer::{optimize_intensities, Optimization, OptimizationConfig};
pub use primitives::{binary_entropy, Decibel, IntensitySet};
