//! Device-fingerprinting testbed built around variance fractal dimension
//! trajectories (VFDT) of IQ signals.
//!
//! The pipeline: synthesize hardware-impaired 4-QAM transmissions
//! ([`impairments`]), pass them through parameterized propagation domains
//! ([`channel`]), turn each burst into a 2 x L feature matrix - either the
//! paired I/Q dimension trajectories ([`vfdt`]) or normalized raw samples -
//! and classify the transmitter with a small CNN ([`classifier`]). The
//! [`harness`] module assembles populations, datasets, and the
//! domain-adaptation and scalability experiments; [`signal`] covers cf32
//! capture files and burst extraction for recorded data.

pub mod channel;
pub mod classifier;
pub mod error;
pub mod harness;
pub mod impairments;
pub mod rng;
pub mod signal;
pub mod vfdt;

pub use error::{Error, Result};
