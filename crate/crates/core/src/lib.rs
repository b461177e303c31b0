//! Sliced Wasserstein distances between 3D point clouds with Monte Carlo,
//! quasi-Monte Carlo and randomized quasi-Monte Carlo projecting directions.
//!
//! The crate is `no_std` (it needs `alloc`) and holds only the numerics:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`qmc`] | Sobol and Halton sequences, shift and digital scrambling, exact star discrepancy |
//! | [`sphere`] | Point sets on the sphere: Gaussian map, equal-area map, spiral, energy optimizers, rotations |
//! | [`discrepancy`] | Spherical cap discrepancy on S² |
//! | [`ot1d`] | Point clouds, projections and closed-form 1D Wasserstein |
//! | [`sw`] | MC / QSW / RQSW estimators, gradients and confidence intervals |
//! | [`exact_ot`] | Exact W₂ between equal-size clouds via linear assignment |
//! | [`flows`] | Euler gradient flows: point-cloud interpolation and color transfer |
//!
//! File formats, the on-disk point-set cache and the command-line front end
//! live in the `qsw` companion crate.
//!
//! ```
//! use qsw_core::ot1d::PointCloud;
//! use qsw_core::sphere::Construction;
//! use qsw_core::sw::{estimate_sw, EstimatorSpec, Scheme};
//!
//! let a = PointCloud::new(3, vec![0.0, 0.0, 0.0]).unwrap();
//! let b = PointCloud::new(3, vec![1.0, 0.0, 0.0]).unwrap();
//! let spec = EstimatorSpec::new(2.0, 2048, Scheme::Qsw(Construction::Spiral));
//! let est = estimate_sw(&a, &b, &spec).unwrap();
//! assert!((est.value - 1.0 / 3.0).abs() < 1e-3);
//! ```
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod discrepancy;
mod error;
pub mod exact_ot;
pub mod flows;
pub mod linalg;
pub mod normal;
pub mod ot1d;
pub mod qmc;
pub mod rng;
pub mod sphere;
pub mod sw;
pub mod synth;

pub use error::{Error, Result};
