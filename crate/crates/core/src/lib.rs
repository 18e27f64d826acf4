//! Median-filter schemes for level set mean curvature flow on random point
//! clouds, with the graph heat flow and nonlocal energies that go with them.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix `f64`, which is what the experiments use.

// `!(x > 0)` is how parameter checks reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod evolution;
pub mod heatflow;
pub mod kernels;
pub mod medians;
mod qmc;
pub mod rng;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Domain = domain::Domain<f64>;
pub type PointCloud = domain::PointCloud<f64>;
pub type KernelSpec = kernels::KernelSpec<f64>;
pub type KernelMoments = kernels::KernelMoments<f64>;
pub type LevelSetField = evolution::LevelSetField<f64>;
pub type EvolutionConfig = evolution::EvolutionConfig<f64>;
pub type GraphField = heatflow::GraphField<f64>;
pub type CurveFront = verify::CurveFront<f64>;

pub type PointCloud32 = domain::PointCloud<f32>;
pub type LevelSetField32 = evolution::LevelSetField<f32>;
