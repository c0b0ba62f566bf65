//! Spin-coherent phase space: Weyl symbols of the Pauli operators and the
//! discrete sampling of initial phase-space points.
//!
//! Each spin carries spherical coordinates (θ, φ). Internally θ lives as
//! cosθ, which keeps the fixed initial values cosθ = ±1/√3 exact and keeps
//! the integrator's coefficients regular at the poles; φ is unwrapped.

use nalgebra::Vector3;
use rand::Rng;

pub const SQRT_3: f64 = 1.732_050_807_568_877_3;

/// Pole guard: θ is confined to [ε, π − ε].
pub const EPS_POLE: f64 = 1e-6;

/// cos(EPS_POLE); |cosθ| never exceeds this after an update.
pub const COS_POLE_GUARD: f64 = 1.0 - 5e-13;

/// Weyl symbol of the Pauli vector: s(θ, φ) = √3 (sinθcosφ, sinθsinφ, cosθ).
pub fn bloch_weyl(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = (theta.sin(), theta.cos());
    Vector3::new(SQRT_3 * st * phi.cos(), SQRT_3 * st * phi.sin(), SQRT_3 * ct)
}

/// Product initial states with factorized Wigner functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// |e…e⟩ — every Weyl sample has s_z = +1.
    AllExcited,
    /// |g…g⟩ — every Weyl sample has s_z = −1.
    AllGround,
    /// ρ = 𝟙/2^N — per-spin W = 1/2.
    FullyMixed,
}

/// Per-trajectory mutable state: cosθ_n and unwrapped φ_n for N spins.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub cos_theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl PhasePoint {
    pub fn n(&self) -> usize {
        self.cos_theta.len()
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.cos_theta[i].acos()
    }

    pub fn sin_theta(&self, i: usize) -> f64 {
        (1.0 - self.cos_theta[i] * self.cos_theta[i]).max(0.0).sqrt()
    }

    /// Weyl vector of spin `i`.
    pub fn s(&self, i: usize) -> Vector3<f64> {
        let st = self.sin_theta(i);
        Vector3::new(
            SQRT_3 * st * self.phi[i].cos(),
            SQRT_3 * st * self.phi[i].sin(),
            SQRT_3 * self.cos_theta[i],
        )
    }

    /// Clamps every cosθ into the pole guard.
    pub fn enforce_pole_guard(&mut self) {
        for c in &mut self.cos_theta {
            *c = c.clamp(-COS_POLE_GUARD, COS_POLE_GUARD);
        }
    }
}

const COS_EXCITED: f64 = 1.0 / SQRT_3;

/// Draws a phase-space point from the discrete initial distribution.
///
/// Per spin, cosθ = +1/√3 (excited pattern) or −1/√3 (ground pattern) and φ
/// is uniform on {π/4, 3π/4, 5π/4, 7π/4}, so every Weyl sample has
/// s_μ ∈ {−1, +1} componentwise. This reproduces all first and second Pauli
/// moments exactly per sample, not just on average.
pub fn sample_initial<R: Rng + ?Sized>(state: InitialState, n: usize, rng: &mut R) -> PhasePoint {
    let mut cos_theta = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for _ in 0..n {
        let excited = match state {
            InitialState::AllExcited => true,
            InitialState::AllGround => false,
            InitialState::FullyMixed => rng.random_bool(0.5),
        };
        cos_theta.push(if excited { COS_EXCITED } else { -COS_EXCITED });
        let k: u8 = rng.random_range(0..4);
        phi.push(std::f64::consts::FRAC_PI_4 * (2.0 * k as f64 + 1.0));
    }
    PhasePoint { cos_theta, phi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bloch_weyl_poles_and_equator() {
        let north = bloch_weyl(0.0, 1.234);
        assert_relative_eq!(north.z, SQRT_3);
        assert!(north.x.abs() < 1e-12 && north.y.abs() < 1e-12);

        let eq = bloch_weyl(std::f64::consts::FRAC_PI_2, 0.0);
        assert_relative_eq!(eq.x, SQRT_3, epsilon = 1e-12);
        assert!(eq.y.abs() < 1e-12 && eq.z.abs() < 1e-12);
    }

    #[test]
    fn bloch_weyl_norm_is_sqrt3() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let phi: f64 = rng.random_range(-10.0..10.0);
            assert_relative_eq!(bloch_weyl(theta, phi).norm_squared(), 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn samples_sit_on_the_sign_lattice() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for state in [InitialState::AllExcited, InitialState::AllGround, InitialState::FullyMixed] {
            let p = sample_initial(state, 64, &mut rng);
            for i in 0..p.n() {
                let s = p.s(i);
                for mu in 0..3 {
                    assert_relative_eq!(s[mu].abs(), 1.0, epsilon = 1e-12);
                }
                match state {
                    InitialState::AllExcited => assert_relative_eq!(s.z, 1.0, epsilon = 1e-12),
                    InitialState::AllGround => assert_relative_eq!(s.z, -1.0, epsilon = 1e-12),
                    InitialState::FullyMixed => {}
                }
            }
        }
    }

    #[test]
    fn excited_sampling_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 100_000;
        let mut mean = Vector3::zeros();
        let mut cross_xy = 0.0;
        for _ in 0..draws {
            let p = sample_initial(InitialState::AllExcited, 1, &mut rng);
            let s = p.s(0);
            mean += s;
            cross_xy += s.x * s.y;
            // second moments are exact per sample
            assert_relative_eq!(s.x * s.x, 1.0, epsilon = 1e-10);
            assert_relative_eq!(s.y * s.y, 1.0, epsilon = 1e-10);
            assert_relative_eq!(s.z * s.z, 1.0, epsilon = 1e-10);
        }
        mean /= draws as f64;
        cross_xy /= draws as f64;
        let tol = 4.0 / (draws as f64).sqrt();
        assert!(mean.x.abs() < tol && mean.y.abs() < tol);
        assert_relative_eq!(mean.z, 1.0, epsilon = 1e-10);
        assert!(cross_xy.abs() < tol, "E[s_x s_y] = {cross_xy}");
    }

    #[test]
    fn ground_and_mixed_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let draws = 40_000;
        let mut gz = 0.0;
        let mut mixed = Vector3::zeros();
        for _ in 0..draws {
            gz += sample_initial(InitialState::AllGround, 1, &mut rng).s(0).z;
            mixed += sample_initial(InitialState::FullyMixed, 1, &mut rng).s(0);
        }
        assert_relative_eq!(gz / draws as f64, -1.0, epsilon = 1e-10);
        mixed /= draws as f64;
        let tol = 4.0 / (draws as f64).sqrt();
        for mu in 0..3 {
            assert!(mixed[mu].abs() < tol, "mixed mean component {mu} = {}", mixed[mu]);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let a = sample_initial(InitialState::FullyMixed, 32, &mut ChaCha8Rng::seed_from_u64(7));
        let b = sample_initial(InitialState::FullyMixed, 32, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn pole_guard_clamps() {
        let mut p = PhasePoint { cos_theta: vec![1.0, -1.0, 0.3], phi: vec![0.0; 3] };
        p.enforce_pole_guard();
        assert_eq!(p.cos_theta[0], COS_POLE_GUARD);
        assert_eq!(p.cos_theta[1], -COS_POLE_GUARD);
        assert_eq!(p.cos_theta[2], 0.3);
    }
}
