//! Energy absorption interferometry toolkit.
//!
//! A system's dissipative response to one or two generalized forces is a
//! Hermitian, positive semidefinite block tensor D. Driving the system with
//! two phase-locked sources and recording the fringe in total absorbed power
//! as their relative phase varies measures complex matrix elements of D in
//! the basis of the source fields. This crate simulates that measurement and
//! runs the analysis chain behind it:
//!
//! * [`tensor`] — grids, force vectors, block response tensors, absorbed power;
//! * [`synth`] — synthetic systems with known ground-truth modes;
//! * [`sources`] — probe fields, source catalogs and SVD dual bases;
//! * [`interferometer`] — fringe simulation, visibility extraction, campaigns;
//! * [`reconstruct`] — dual-basis reconstruction, measurement filter,
//!   incremental catalog growth;
//! * [`modes`] — natural-mode decompositions and coupled-mode power;
//! * [`kdomain`] — wave-vector representation on regular lattices;
//! * [`io`] — the EAI1 container, catalog files and report writers;
//! * [`cli`] — the `eai` command-line pipeline.
//!
//! See the crate examples for a runnable tour of each capability.

pub mod cli;
pub mod config;
pub mod error;
pub mod force;
pub mod grid;
pub mod interferometer;
pub mod io;
pub mod kdomain;
pub mod linalg;
pub mod modes;
pub mod reconstruct;
pub mod sources;
pub mod synth;
pub mod tensor;

pub use error::{EaiError, Result};
pub use force::{CoherenceMatrix, ForceVector};
pub use grid::{DomainId, ForceType, Lattice, SampleGrid};
pub use linalg::{C64, CMat, CVec};
pub use tensor::{
    absorbed_power_coherent, absorbed_power_ensemble, BlockResponseMatrix, Tolerances,
    ValidationReport,
};
