//! Simulation and Malliavin-derivative toolkit for SDEs with semi-monotone,
//! locally Lipschitz drift.
//!
//! The drift is split as `b + f` with `b` one-sided Lipschitz (possibly
//! superlinear) and `f`, `sigma` globally Lipschitz. Paths of the original
//! equation are obtained from smoothly truncated drifts `phi_n b` by doubling
//! `n` on fixed noise until truncation is inactive. Along those paths the
//! crate propagates first- and second-order Malliavin derivatives and checks
//! them against independent oracles, and it estimates moments across
//! truncation levels against Gronwall-type bounds.
//!
//! Module map:
//!
//! * [`model`]: coefficient traits, built-in models, hypothesis checks, constants
//! * [`cutoff`]: cutoff family `phi_n`, truncated models, certification
//! * [`paths`]: noise, Euler–Maruyama, nesting, stopping times
//! * [`malliavin`]: derivative fields and oracles
//! * [`estimators`]: Monte Carlo moments, bounds, uniform and convergence reports
//! * [`config`], [`runner`]: declarative experiment runs writing CSV artifacts

pub mod config;
pub mod cutoff;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod malliavin;
pub mod model;
pub mod paths;
pub mod runner;
pub mod sampling;

pub use cutoff::{make_truncated, CutoffFamily, TruncatedModel};
pub use error::{Error, Result};
pub use model::{ModelSpec, Sde};
pub use paths::{sample_noise, NoisePath, PathSolution, TimeGrid};
