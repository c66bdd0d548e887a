//! Numerical lab for the one-dimensional wave-Petrovsky system with an exponential memory
//! kernel: spectral analysis, modal synthesis, Ingham-type estimates, HUM control synthesis
//! and a modal forward simulator.

pub mod error;
pub mod expsum;
pub mod forward_sim;
pub mod hum;
pub mod ingham;
pub mod memory_kernel;
pub mod modal;
pub mod ode;
pub mod params;
pub mod quadrature;
pub mod spectrum;

pub use error::{LabError, Result};
pub use expsum::{ExponentialSum, Term};
pub use forward_sim::{FinalError, SimOptions, SimRun, SimState};
pub use hum::{Controls, GramSystem, HumResult, TracePair};
pub use ingham::{AbstractCoefficients, Annihilator, BoundReport, ComposedAnnihilator, InghamEstimate};
pub use memory_kernel::{ExpKernel, SampledFunction};
pub use modal::{FinalData, ModalCoefficients, ModeSolution};
pub use num_complex::Complex64;
pub use params::ModelParams;
pub use spectrum::{HypothesisReport, SpectralBranch};
