//! Measurement-based imaginary time evolution with quantum nondemolition
//! (QND) photon-counting measurements.
//!
//! A weak QND measurement multiplies every energy eigencomponent of the
//! register by a photon-count dependent amplitude (the C-function). Repeated
//! measurements, a running energy estimate built from cumulative photon
//! counts, and a corrective unitary applied whenever that estimate leaves a
//! target window make the target eigenspace the only fixed point of the
//! evolution. Chaining four such stages prepares a four-qubit cluster state.
//!
//! Module map:
//!
//! * [`statevec`]: dense state vectors, Pauli strings, Hamiltonians and their
//!   eigensystems.
//! * [`cfunc`]: the C-function, its Gaussian approximations and the ancilla
//!   baseline amplitude.
//! * [`povm`]: measurement operators, outcome distributions and Born sampling.
//! * [`mite`]: the feedback controller and the per-stage measurement loop.
//! * [`protocols`]: the four-qubit cluster-state experiment.
//! * [`config`] and [`output`]: run configuration files and CSV/JSON records.

pub mod cfunc;
pub mod config;
pub mod error;
pub mod mite;
pub mod output;
pub mod povm;
pub mod protocols;
pub mod statevec;

pub use error::{Error, Result};
