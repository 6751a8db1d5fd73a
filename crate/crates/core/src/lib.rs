//! Identity-perturbation ellipsoid fitting for random point clouds, its dual
//! certificates, and Monte Carlo checks of the concentration estimates it
//! relies on.

pub mod cloud;
pub mod conclab;
pub mod dual;
pub mod error;
pub mod fitter;
pub mod flatten;
pub mod linalg;
pub mod phase;
pub mod rng;
pub mod stats;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use fitter::{solve_identity_perturbation, FitResult, Tolerances, TrialRecord};
pub use linalg::SymMatrix;
pub use rng::{Purpose, RandomStream};
