//! Numerical tools for lifespan estimates of the radially symmetric
//! semilinear wave equation `u_tt − Δu = |u|^p` in two space dimensions,
//! `1 < p < 2`.

pub mod duhamel;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod field;
pub mod kernels;
pub mod linear_wave;
pub mod picard;
pub mod profile;
pub mod quadrature;
pub mod suite;
pub mod weights;

pub use error::{Error, Result};
pub use field::{Abs, Field, FnField, GridSpec, SpacetimeField};
pub use profile::{DataFamily, DataPair, MeanCase, RadialProfile, Smoothness};
