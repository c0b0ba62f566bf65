//! Exact single-atom decay in phase space.
//!
//! For one undriven atom the phase-space mapping of spontaneous emission is
//! exact, with a deterministic polar drift and a purely azimuthal noise:
//!
//! ```text
//! dθ = Γ₀ (cotθ + cscθ/√3) dt
//! dφ = √(Γ₀ (1 + 2cot²θ + 2cotθcscθ/√3)) dW
//! ```
//!
//! The cosθ flow is linear, dc = −Γ₀(c + 1/√3)dt, so the ensemble average of
//! √3 cosθ reproduces ⟨σ_z⟩(t) = 2e^{−Γ₀t} − 1 identically.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::phase_space::SQRT_3;

/// ⟨σ_z⟩(t) of a two-level atom starting in |e⟩.
pub fn sigma_z_analytic(t: f64) -> f64 {
    2.0 * (-t).exp() - 1.0
}

/// The exact polar drift Γ₀(cotθ + cscθ/√3).
pub fn single_atom_exact_drift(theta: f64) -> f64 {
    let (st, ct) = (theta.sin(), theta.cos());
    ct / st + 1.0 / (SQRT_3 * st)
}

/// One Euler–Maruyama step of the exact single-atom equations.
pub fn single_atom_exact_sde_step<R: Rng + ?Sized>(
    theta: f64,
    phi: f64,
    dt: f64,
    rng: &mut R,
) -> (f64, f64) {
    let (st, ct) = (theta.sin(), theta.cos());
    let cot = ct / st;
    let csc = 1.0 / st;
    let diffusion_sq = 1.0 + 2.0 * cot * cot + 2.0 * cot * csc / SQRT_3;
    let z: f64 = StandardNormal.sample(rng);
    let new_theta = theta + (cot + csc / SQRT_3) * dt;
    let new_phi = phi + diffusion_sq.max(0.0).sqrt() * dt.sqrt() * z;
    (new_theta, new_phi)
}
