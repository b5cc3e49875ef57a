//! Joint digital and pinching beamforming for pinching-antenna (PASS) enabled
//! underlay cognitive radio.
//!
//! The secondary base station feeds `N` dielectric waveguides, each carrying `M`
//! pinching antennas whose positions along the waveguide are tunable. The crate
//! maximizes the secondary sum rate under a transmit power budget, the antenna
//! placement constraints and per-primary-user interference-temperature caps:
//!
//! * [`channel`] / [`metrics`]: the spherical-wave channel model and SINR, rate
//!   and interference-temperature evaluation.
//! * [`wmmse`]: the weighted-MMSE reformulation and the alternating-optimization
//!   driver ([`wmmse::solve`]).
//! * [`digital`]: the convex precoder subproblem, solved by Lagrangian duality.
//! * [`pinching`]: penalty-based antenna placement with element-wise grid search.
//! * [`schemes`]: the uniform, discrete-socket and fixed-array baselines.
//! * [`harness`]: random user drops, parameter sweeps and CSV/JSON output.
//!
//! All powers are linear milliwatts; rates are in nats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod constants;
pub mod digital;
mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod pinching;
pub mod schemes;
pub mod wmmse;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix (column-major).
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
