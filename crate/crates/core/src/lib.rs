//! Simulator for three spin qubits hosted in a double and a triple quantum dot
//! coupled through a microwave resonator.

pub mod basis;
pub mod effective;
pub mod error;
pub mod fitter;
pub mod gates;
pub mod hamiltonian;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod optimize;
pub mod propagator;
pub mod pulse;
pub mod units;

pub use error::{Result, SimError};
pub use num_complex::Complex64 as C64;
