//! Eikonal algebras of compact metric graphs.
//!
//! Pipeline: impulse dynamics produce hydras; lattice closure cuts the
//! reached set into families of equal cells; per family the amplitude
//! frames give projectors and linear time functions; blocks of projectors
//! are then glued into a canonical form whose invariants describe the
//! spectrum.

pub mod error;
pub mod examples;
pub mod fd;
pub mod graph;
pub mod instances;
pub mod io;
pub mod par;
pub mod rational;
pub mod spectrum;
pub mod verify;
pub mod algebra;
pub mod canon;
pub mod dynamics;
pub mod eikonal;
pub mod frames;
pub mod partition;

pub use error::{Error, Result};
pub use graph::{MetricGraph, Position};
pub use rational::Rational;
