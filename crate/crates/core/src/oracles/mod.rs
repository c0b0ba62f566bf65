//! Numerically exact references: Dicke ladder rate equations, dense Lindblad
//! propagation for small N, and the closed-form single-atom decay.

pub mod dicke;
pub mod lindblad;
pub mod single_atom;

pub use dicke::{dicke_evolve, DickeInitial, DickeLadder, DickeSolution};
pub use lindblad::{lindblad_evolve, DensityMatrix, LindbladOptions, LindbladSolution};
pub use single_atom::{sigma_z_analytic, single_atom_exact_drift, single_atom_exact_sde_step};
