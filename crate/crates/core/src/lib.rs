//! Samplers and verification tools for nonintersecting Brownian bridges.
//!
//! The crate provides:
//!
//! * [`measures`]: one-dimensional probability measures (atomic and
//!   density-on-grid) with quantiles, Stieltjes/Hilbert transforms and
//!   Wasserstein-1 distance;
//! * [`kernel`]: numerically stable evaluation of the Karlin–McGregor
//!   determinant density and its log-gradient, the exact bridge drift;
//! * [`sde`]: Euler–Maruyama integration of the exact-kernel and mean-field
//!   particle systems, the bridge/drifted-motion duality transform, and the
//!   Calogero–Moser system used as a deterministic check;
//! * [`burgers`]: limit shapes, as closed-form watermelon profiles and a
//!   characteristic solver for the complex Burgers equation, with edge
//!   detection, square-root coefficient fits, and the mean-field drift field;
//! * [`airy`]: the Airy function and the Tracy–Widom GUE distribution via
//!   Fredholm determinants of the Airy kernel;
//! * [`stats`]: rigidity reports, Stieltjes concentration checks, rescaled
//!   edge statistics, Kolmogorov–Smirnov distances and stochastic-dominance
//!   tests over sampled ensembles.

pub mod airy;
pub mod burgers;
pub mod error;
pub mod kernel;
mod linalg;
pub mod measures;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
