//! Expectation values of quantum observables for driven bosonic systems.

pub mod algebra;
pub mod envelope;
pub mod experiment;
pub mod error;
pub mod hamiltonian;
pub mod hilbert;
pub mod linalg;
pub mod scenario;
pub mod oracles;
pub mod series;
pub mod tolerances;
pub mod words;

pub use num_complex::Complex64 as C64;
