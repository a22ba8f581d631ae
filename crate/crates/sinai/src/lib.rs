//! Dispersing billiard on the unit 2-torus with two circular scatterers: a
//! "gray" disk of radius `rbar` fixed at the lattice corner and a "white" disk
//! of radius `r` whose center is displaced from the torus center by an
//! arbitrary offset of norm at most `eps`, possibly re-drawn before every
//! return. The crate builds the admissible table, traces the return map to a
//! cross section made of the gray arcs and clean transparent crossings,
//! verifies uniform hyperbolicity along orbits, and estimates the limit
//! covariance of vector-valued Birkhoff sums over random scatterer sequences,
//! together with correlation-decay, characteristic-function and CLT
//! diagnostics.
//!
//! Modules:
//! - [`geometry`]: table admissibility, wall charts, clean-pass predicate;
//! - [`phase`]: cross-section phase points, invariant measure, involution,
//!   unstable cones, homogeneity strips;
//! - [`dynamics`]: the return map, its inverse and tangent map, singularity
//!   margins, separation times;
//! - [`sequences`]: scatterer-sequence models and mixing diagnostics;
//! - [`stats`]: observables, correlation decay, limit covariance, CLT and
//!   variance-growth diagnostics;
//! - [`config`], [`report`], [`cli`]: the flat config format, JSON/CSV
//!   reports, and the thin command-line front end.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod phase;
pub mod report;
pub mod rng;
pub mod sequences;
pub mod stats;

pub use error::{Error, Result};
