//! Few-photon linear-optics simulation of a heralded, nondestructive
//! measurement of a polarization qubit.
//!
//! A signal photon and a meter photon interact on a partially reflective beam
//! splitter; detecting exactly one photon in the meter output heralds a
//! successful, non-destructive polarization measurement of the signal. The
//! crate simulates the circuit exactly in the two-photon Fock space, computes
//! the fidelity and complementarity metrics that characterize it, and ships a
//! small plan language plus a CLI for running experiments.
//!
//! ```
//! use qnd::circuit::{self, CircuitConfig, PolarizationQubit};
//!
//! let signal = PolarizationQubit::vertical();
//! let meter = circuit::prepare_meter(1.0 / 3.0).unwrap();
//! let outcome = circuit::run(&signal, &meter, &CircuitConfig::strong()).unwrap();
//! assert!((outcome.success_probability - 0.5).abs() < 1e-12);
//! ```

pub mod circuit;
pub mod cli;
pub mod dsl;
pub mod elements;
pub mod fock;
pub mod metrics;
mod numfmt;

pub use circuit::{CircuitConfig, JointDistribution, PolarizationQubit, RunOutcome, StandardInput};
pub use elements::ModeTransform;
pub use fock::{ModeConstraint, Occupation, PureState, QubitDensityMatrix};
