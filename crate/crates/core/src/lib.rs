//! Key generation rate (KGR) simulation for fluid-antenna arrays.
//!
//! A base station with `N` movable antennas probes a reciprocal multipath
//! channel with a single-antenna user. The achievable key rate is the mutual
//! information between the two parties' precoded channel estimates, which
//! depends on both the precoding matrix and the antenna positions. This crate
//! evaluates that rate and maximizes it with
//!
//! * a joint particle swarm over (precoder, layout),
//! * an alternating scheme: projected gradient descent on the precoder, then a
//!   layout-only particle swarm,
//! * two baselines: a fixed uniform planar array with a precoder-only swarm and
//!   a purely random feasible search.
//!
//! The [`experiment`] module wires these into reproducible, seeded runs that
//! write CSV/JSON results.

pub mod ao;
pub mod baselines;
pub mod channel;
pub mod constraints;
pub mod error;
pub mod experiment;
pub mod kgr;
pub mod pso;
pub mod rng;
pub mod swarm;
pub mod trace;

pub use channel::{ChannelCovariance, CovarianceModel, Layout, PathSet, Region, Scenario};
pub use error::{Error, Result};
pub use kgr::{KgrGradient, KgrValue, Precoder};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
