//! Gaussian-process testbed for in-context regression.
//!
//! Functions are drawn from Matérn or squared-exponential GP priors, shown
//! to a point predictor as prompts of growing length, and the predictions
//! are compared against exact GP regression, an analytic nearest-neighbour
//! error bound and candidate-kernel likelihoods.
//!
//! ```
//! use gp_icl::kernel::{KernelSpec, NoiseSpec};
//! use gp_icl::gp::{posterior_predictive, Demo};
//!
//! let k = KernelSpec::squared_exponential(8.0, 0.001)?;
//! let demos = [Demo::new(vec![1.0], 0.02), Demo::new(vec![4.0], -0.01)];
//! let p = posterior_predictive(&k, &NoiseSpec::new(0.001)?, &demos, &[2.5])?;
//! assert!(p.variance_y > 0.001);
//! # Ok::<(), gp_icl::Error>(())
//! ```

pub mod bias;
pub mod cli;
pub mod config;
pub mod curve;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod manifest;
pub mod nn_bound;
pub mod predictor;
pub mod prompt;
pub mod quadrature;
pub mod records;
pub mod reward;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};
