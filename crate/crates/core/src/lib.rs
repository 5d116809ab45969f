//! Numerical verification of identities for the k-plane transform of
//! `|Ef|^2`, where `E` is the Fourier extension operator of a parametrized
//! submanifold of `R^n`.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: orthonormal frames, projections, the wedge quantity `|V ∧ W|`.
//! * [`manifold`]: parametrized submanifolds, surface densities, transversality
//!   certificates and graph charts over a plane.
//! * [`transform`]: extension operator, truncated k-plane integrals, the
//!   tangent-wedge integral and the composed adjoint transform.
//! * [`applications`]: Schrödinger energy, convolution identity, rank-1
//!   Brascamp–Lieb feasibility, weighted identities and the two-cap scan.
//! * [`cli`]: scenario files, orchestration and reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod manifold;
pub mod quadrature;
pub mod transform;

pub use error::{Error, Result};
