//! Normalized solutions of the Sobolev-critical nonlinear Schrödinger
//! equation with a weakly attractive potential.

pub mod bubbles;
pub mod domain;
pub mod error;
pub mod functional;
pub mod linalg;
pub mod mfg;
pub mod potentials;
pub mod solvers;
pub mod spectrum;

pub use domain::{build_domain, dilate, grad_norm_sq, integrate, Domain, DomainSpec, Field, GridKind};
pub use error::{Error, Result};
