//! Semiclassical trajectory simulation of collectively decaying two-level
//! emitters.
//!
//! The crate maps the Lindblad dynamics of N radiatively coupled spins onto
//! 2N stochastic differential equations for spin-coherent angles, integrates
//! trajectory ensembles with reproducible parallelism, and evaluates
//! emission, squeezing and synchronization observables from Weyl-symbol
//! averages. Numerically exact references (Dicke ladder rate equations, a
//! dense Lindblad integrator for small N, and the closed-form single-atom
//! solution) back the `validate` path and the test suite.
//!
//! Units: rates in Γ₀ (the single-atom decay rate), times in 1/Γ₀, lengths
//! in λ_e (the transition wavelength).

pub mod coupling;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod observables;
pub mod oracles;
pub mod phase_space;
pub mod runner;
pub mod scenario;
pub mod sde;

pub use engine::{run_ensemble, RunOptions, RunSeries};
pub use error::{Error, Result};
pub use phase_space::{InitialState, PhasePoint};
pub use sde::{SimConfig, TwaSystem};
