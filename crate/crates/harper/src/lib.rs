//! Spectral and topological analysis of generalized Harper operators at
//! rational magnetic flux.
//!
//! The crate builds the finite fiber matrices of a (q, r)-Harper operator at
//! flux theta = M/N, locates the spectral gaps, computes Chern numbers of the
//! gap projections by a lattice field-strength method in two bundle
//! representations, and verifies gap-by-gap that the transport integers
//! satisfy the exact Diophantine equation `N*t + M0*s = q*d`.
//!
//! Module map:
//! - [`numtheory`]: exact integer layer (Bezout data, Diophantine solver,
//!   continued fractions, Farey enumeration).
//! - [`rep`]: clock/shift matrices and fiber representations of the operator.
//! - [`spectral`]: eigendecomposition, band structure, gap chart, integrated
//!   density of states.
//! - [`topology`]: projector fields and lattice Chern numbers, plus the exact
//!   transfer between the two bundle representations.
//! - [`tknn`]: gap-by-gap verification records and flux-tracking along
//!   continued-fraction convergents.
//! - [`cli`]: command implementations, JSON/CSV/SVG emitters, config, cache.

pub mod cli;
pub mod error;
pub mod numtheory;
pub mod rep;
pub mod spectral;
pub mod tknn;
pub mod topology;

pub use error::{Error, Result};
pub use numtheory::{DiophantineSolution, HarperModel};
