//! Uplink spectral-efficiency engine for scalable cell-free massive MIMO
//! networks whose UEs and APs use finite-resolution DACs/ADCs, over spatially
//! correlated Rician fading.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`]: geometry, large-scale fading, LOS steering vectors, local
//!   scattering correlation matrices and channel sampling.
//! * [`quantization`]: the additive DAC/ADC distortion model.
//! * [`pilots`]: DFT pilots, pilot-domain covariances and MMSE estimation.
//! * [`scheduler`]: joint AP clustering, pilot assignment and fractional power
//!   control, plus complexity accounting.
//! * [`detectors`]: local and centralized combining vectors.
//! * [`lsfd`]: large-scale fading decoding weights and their closed-form
//!   ingredients.
//! * [`se`]: closed-form and Monte Carlo spectral efficiency.
//!
//! [`Deployment`] bundles one fully configured network (statistics, pilots,
//! clusters, powers, hardware) together with its precomputed estimation
//! context; almost every evaluation routine takes one by reference.

pub mod channel;
pub mod deployment;
pub mod detectors;
mod error;
pub mod linalg;
pub mod lsfd;
pub mod pilots;
pub mod quantization;
pub mod rng;
pub mod scheduler;
pub mod se;

pub use deployment::Deployment;
pub use error::{Error, Result};

/// Complex double.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
