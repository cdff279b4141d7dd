//! Entropic-dynamics laboratory.
//!
//! Three independent routes to the same quantum dynamics:
//!
//! * walkers sampling the closed-form max-entropy transition kernel
//!   ([`kernel`], [`ensemble`]);
//! * the coupled Fokker-Planck / Hamilton-Jacobi field equations generated
//!   by the ensemble Hamiltonian ([`hamiltonian`]);
//! * the gauge-covariant Schrödinger equation ([`schrodinger`]).
//!
//! [`winding`] holds gauge and topology diagnostics: circulation, winding
//! numbers, charge quantization and loop-closure tests of superpositions.
//! [`scenario`] and [`runner`] tie everything into reproducible runs.

pub mod calculus;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod gauge;
pub mod grid;
pub mod hamiltonian;
pub mod io;
pub mod kernel;
pub mod params;
pub mod phase;
pub mod runner;
pub mod scenario;
pub mod schrodinger;
pub mod stats;
pub mod winding;

pub use error::{Error, Result};
pub use field::{ComplexField, ScalarField, VectorField};
pub use gauge::{gauge_transform, AngleField, GaugeInput};
pub use grid::{Grid, ParticleLayout, Topology};
pub use params::ModelParams;
pub use phase::PhaseRecord;
