//! Maximum-likelihood estimation for latent class models with one continuous
//! external variable.
//!
//! Three model variants share one parameterisation:
//!
//! * [`Variant::LcReg`]: latent class regression. The external variable `z`
//!   is a covariate of the indicators and is not modelled.
//! * [`Variant::LcDist`]: latent class with a distal outcome. `z` is Gaussian
//!   within each class and the indicators do not depend on it.
//! * [`Variant::LcCw`]: the cluster-weighted latent class model. `z` is
//!   Gaussian within each class *and* enters every indicator's logit.
//!
//! The crate is `no_std` (it needs `alloc`). The `std` feature switches the
//! dependencies to their std builds and `parallel` runs random starts on a
//! rayon pool. Results never depend on the thread count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
mod math;

pub mod data;
pub mod diagnostics;
pub mod estimation;
pub mod inference;
pub mod layout;
pub mod model;
pub mod params;
pub mod posterior;
pub mod simulation;
pub mod special;
pub mod spec;

pub use data::Dataset;
pub use diagnostics::Partition;
pub use error::{Error, Result};
pub use estimation::{fit, FitConfig, FitResult};
pub use params::{ExternalParams, ItemParams, Parameters};
pub use posterior::Posteriors;
pub use spec::{ModelSpec, SlopeConstraint, VarianceMode, Variant};
