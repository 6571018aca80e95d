//! Joint resource allocation for an IRS-assisted full-duplex integrated
//! sensing, communication and computing system.
//!
//! The pipeline solves caching once, then cycles WMMSE auxiliaries, IRS
//! phases (ADMM with a linearized radar constraint), SDR transmit beams,
//! closed-form receive combiners and CP-UE power/CPU allocation.

pub mod beamforming;
pub mod cacheopt;
pub mod channels;
pub mod config;
pub mod conic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod orchestrator;
pub mod phaseadmm;
pub mod powercomp;
pub mod sysmodel;
pub mod wmmse;

pub use channels::ChannelSet;
pub use config::{CacheConfig, SystemConfig};
pub use error::{Error, Result};
pub use sysmodel::{Duplex, Metrics, Solution};
