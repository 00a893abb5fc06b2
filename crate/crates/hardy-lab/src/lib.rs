//! Hardy spaces on finite metric measure spaces with a non-negative self-adjoint operator.
//!
//! The crate models a finite space `(M, ρ, μ)` with an operator `L`, evaluates the
//! functional calculus `f(t√L)` exactly through a dense eigendecomposition, and
//! builds the maximal functions, Whitney covers and atomic decompositions of `H^p_L`.

// `!(x > 0.0)` guards are written that way on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic;
mod dd;
mod exact;
pub mod fixtures;
pub mod io;
pub mod jet;
pub mod maximal;
pub mod profiles;
pub mod quadrature;
pub mod space;
pub mod spectral;
pub mod whitney;

pub use fixtures::{GraphModel, ModelError};
pub use profiles::{LpPair, Profile, ProfileError};
pub use space::{GeometryReport, MetricMeasureSpace, PointSet, SpaceError};
pub use spectral::{KernelMatrix, MeasureMode, SpectralError, SpectralOperator};
