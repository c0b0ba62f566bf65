//! Emitter geometries and the classical drive field.
//!
//! Positions are measured in units of the transition wavelength `λ_e`, so
//! `k_e · r = 2π r` everywhere downstream.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Positions may not coincide; the dipole kernel diverges as r → 0.
pub const MIN_SEPARATION: f64 = 1e-9;

/// Cloud sampling rejects positions closer than this to an existing one.
pub const CLOUD_MIN_SEPARATION: f64 = 1e-3;

const RESAMPLE_LIMIT: usize = 1000;

/// A fixed set of emitters sharing one dipole polarization.
#[derive(Debug, Clone)]
pub struct AtomEnsemble {
    positions: Vec<Vector3<f64>>,
    polarization: Vector3<Complex64>,
}

/// Circular polarization p̂ = (1, i, 0)ᵀ/√2, the default for every scenario.
pub fn circular_polarization() -> Vector3<Complex64> {
    let inv_sqrt2 = 1.0 / std::f64::consts::SQRT_2;
    Vector3::new(
        Complex64::new(inv_sqrt2, 0.0),
        Complex64::new(0.0, inv_sqrt2),
        Complex64::new(0.0, 0.0),
    )
}

impl AtomEnsemble {
    /// Builds an ensemble after validating pairwise separations and
    /// normalizing the polarization to unit Hermitian norm.
    pub fn new(positions: Vec<Vector3<f64>>, polarization: Vector3<Complex64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one emitter".into()));
        }
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                if (positions[i] - positions[j]).norm() <= MIN_SEPARATION {
                    return Err(Error::DegenerateGeometry(format!(
                        "emitters {i} and {j} closer than {MIN_SEPARATION} λ_e"
                    )));
                }
            }
        }
        let norm = polarization.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("polarization must be a nonzero finite vector".into()));
        }
        Ok(Self { positions, polarization: polarization / Complex64::new(norm, 0.0) })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn polarization(&self) -> &Vector3<Complex64> {
        &self.polarization
    }

    /// One "x y z" triple per line, λ_e units.
    pub fn write_positions(&self) -> String {
        let mut out = String::new();
        for p in &self.positions {
            writeln!(out, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z).unwrap();
        }
        out
    }

    pub fn read_positions(text: &str, polarization: Vector3<Complex64>) -> Result<Self> {
        let mut positions = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Scenario(format!("position table line {}: {e}", lineno + 1)))?;
            if fields.len() != 3 {
                return Err(Error::Scenario(format!(
                    "position table line {}: expected 3 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            positions.push(Vector3::new(fields[0], fields[1], fields[2]));
        }
        Self::new(positions, polarization)
    }

    pub fn read_positions_file(path: &Path, polarization: Vector3<Complex64>) -> Result<Self> {
        Self::read_positions(&std::fs::read_to_string(path)?, polarization)
    }
}

/// `rows × cols` square lattice in the z = 0 plane, row-major, origin at the
/// first site.
pub fn build_square_lattice(
    rows: usize,
    cols: usize,
    spacing: f64,
    polarization: Vector3<Complex64>,
) -> Result<AtomEnsemble> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("lattice needs rows, cols >= 1".into()));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument(format!("lattice spacing must be > 0, got {spacing}")));
    }
    let mut positions = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            positions.push(Vector3::new(c as f64 * spacing, r as f64 * spacing, 0.0));
        }
    }
    AtomEnsemble::new(positions, polarization)
}

/// N positions drawn from an axis-aligned normal distribution with zero mean.
///
/// Any draw closer than [`CLOUD_MIN_SEPARATION`] to an accepted position is
/// rejected and redrawn; positions are fixed for the whole run (frozen gas).
pub fn sample_gaussian_cloud<R: Rng>(
    n: usize,
    sigma: Vector3<f64>,
    polarization: Vector3<Complex64>,
    rng: &mut R,
) -> Result<AtomEnsemble> {
    if n == 0 {
        return Err(Error::InvalidArgument("cloud needs at least one emitter".into()));
    }
    if !(sigma.x > 0.0 && sigma.y > 0.0 && sigma.z > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cloud standard deviations must be > 0, got ({}, {}, {})",
            sigma.x, sigma.y, sigma.z
        )));
    }
    let dists = [
        Normal::new(0.0, sigma.x).unwrap(),
        Normal::new(0.0, sigma.y).unwrap(),
        Normal::new(0.0, sigma.z).unwrap(),
    ];
    let mut positions: Vec<Vector3<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut accepted = false;
        for _ in 0..RESAMPLE_LIMIT {
            let candidate = Vector3::new(
                dists[0].sample(rng),
                dists[1].sample(rng),
                dists[2].sample(rng),
            );
            if positions.iter().all(|p| (p - candidate).norm() >= CLOUD_MIN_SEPARATION) {
                positions.push(candidate);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::DegenerateGeometry(format!(
                "no admissible position after {RESAMPLE_LIMIT} resamples (n = {}, σ = {:?})",
                positions.len(),
                (sigma.x, sigma.y, sigma.z)
            )));
        }
    }
    AtomEnsemble::new(positions, polarization)
}

/// Plane-wave drive: Rabi amplitude Ω (units Γ₀), propagation direction n̂
/// and detuning Δ = ω_c − ω_e (units Γ₀).
#[derive(Debug, Clone)]
pub struct DriveField {
    pub rabi_amplitude: f64,
    direction: Vector3<f64>,
    pub detuning: f64,
}

impl DriveField {
    pub fn new(rabi_amplitude: f64, direction: Vector3<f64>, detuning: f64) -> Result<Self> {
        if rabi_amplitude < 0.0 || !rabi_amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Rabi amplitude must be finite and >= 0, got {rabi_amplitude}"
            )));
        }
        let norm = direction.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("drive direction must be a nonzero vector".into()));
        }
        if !detuning.is_finite() {
            return Err(Error::InvalidArgument("detuning must be finite".into()));
        }
        Ok(Self { rabi_amplitude, direction: direction / norm, detuning })
    }

    /// A switched-off drive.
    pub fn off() -> Self {
        Self { rabi_amplitude: 0.0, direction: Vector3::z(), detuning: 0.0 }
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }

    /// Ω_n = Ω e^{i k_c·r_n} with k_c = 2π n̂ (position in λ_e units).
    pub fn rabi_at(&self, position: &Vector3<f64>) -> Complex64 {
        let phase = 2.0 * std::f64::consts::PI * self.direction.dot(position);
        Complex64::from_polar(self.rabi_amplitude, phase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_site_lattice() {
        let e = build_square_lattice(1, 1, 0.5, circular_polarization()).unwrap();
        assert_eq!(e.n(), 1);
        assert_eq!(e.positions()[0], Vector3::zeros());
    }

    #[test]
    fn two_by_two_lattice_sites() {
        let e = build_square_lattice(2, 2, 0.8, circular_polarization()).unwrap();
        let expect = [(0.0, 0.0), (0.8, 0.0), (0.0, 0.8), (0.8, 0.8)];
        for (p, (x, y)) in e.positions().iter().zip(expect) {
            assert_relative_eq!(p.x, x);
            assert_relative_eq!(p.y, y);
            assert_eq!(p.z, 0.0);
        }
    }

    #[test]
    fn four_by_four_max_distance() {
        let e = build_square_lattice(4, 4, 0.2, circular_polarization()).unwrap();
        assert_eq!(e.n(), 16);
        let mut max = 0.0f64;
        for i in 0..16 {
            for j in 0..16 {
                max = max.max((e.positions()[i] - e.positions()[j]).norm());
            }
        }
        assert_relative_eq!(max, 3.0 * 0.2 * std::f64::consts::SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn nonpositive_spacing_rejected() {
        assert!(matches!(
            build_square_lattice(2, 2, 0.0, circular_polarization()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn lattice_is_bit_reproducible() {
        let a = build_square_lattice(3, 5, 0.37, circular_polarization()).unwrap();
        let b = build_square_lattice(3, 5, 0.37, circular_polarization()).unwrap();
        for (p, q) in a.positions().iter().zip(b.positions()) {
            assert_eq!(p, q);
        }
    }

    #[test]
    fn cloud_reproducible_per_seed_and_distinct_across_seeds() {
        let sigma = Vector3::new(0.15, 0.15, 5.5);
        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        let mut r3 = ChaCha8Rng::seed_from_u64(43);
        let a = sample_gaussian_cloud(50, sigma, circular_polarization(), &mut r1).unwrap();
        let b = sample_gaussian_cloud(50, sigma, circular_polarization(), &mut r2).unwrap();
        let c = sample_gaussian_cloud(50, sigma, circular_polarization(), &mut r3).unwrap();
        assert_eq!(a.positions(), b.positions());
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn cloud_axis_spread_matches_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = sample_gaussian_cloud(50, Vector3::new(0.15, 0.15, 5.5), circular_polarization(), &mut rng)
            .unwrap();
        let zs: Vec<f64> = e.positions().iter().map(|p| p.z).collect();
        let mean = zs.iter().sum::<f64>() / 50.0;
        let sd = (zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / 49.0).sqrt();
        assert!((sd - 5.5).abs() / 5.5 < 0.25, "z std-dev {sd} too far from 5.5");
    }

    #[test]
    fn cloud_mean_within_three_sigma() {
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = sample_gaussian_cloud(n, Vector3::new(1.0, 1.0, 1.0), circular_polarization(), &mut rng)
            .unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        for axis in 0..3 {
            let mean = e.positions().iter().map(|p| p[axis]).sum::<f64>() / n as f64;
            assert!(mean.abs() < bound, "axis {axis} mean {mean} exceeds {bound}");
        }
    }

    #[test]
    fn rabi_phase_conventions() {
        let d = DriveField::new(20.0, Vector3::z(), 0.0).unwrap();
        let at_origin = d.rabi_at(&Vector3::zeros());
        assert_relative_eq!(at_origin.re, 20.0);
        assert_relative_eq!(at_origin.im, 0.0);

        let d1 = DriveField::new(1.0, Vector3::z(), 0.0).unwrap();
        let half = d1.rabi_at(&Vector3::new(0.0, 0.0, 0.5));
        assert_relative_eq!(half.re, -1.0, epsilon = 1e-12);
        assert_relative_eq!(half.im, 0.0, epsilon = 1e-12);

        let transverse = d1.rabi_at(&Vector3::new(3.2, -1.7, 0.0));
        assert_relative_eq!(transverse.re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(transverse.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rabi_magnitude_is_position_independent() {
        let d = DriveField::new(3.5, Vector3::new(1.0, 1.0, 0.0), 0.0).unwrap();
        for p in [Vector3::new(0.3, 0.1, -2.0), Vector3::new(-5.0, 2.0, 0.4)] {
            assert_relative_eq!(d.rabi_at(&p).norm(), 3.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn position_table_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = sample_gaussian_cloud(12, Vector3::new(0.4, 0.4, 1.1), circular_polarization(), &mut rng)
            .unwrap();
        let text = e.write_positions();
        let back = AtomEnsemble::read_positions(&text, circular_polarization()).unwrap();
        assert_eq!(e.positions(), back.positions());
    }

    #[test]
    fn coincident_positions_rejected() {
        let p = vec![Vector3::zeros(), Vector3::zeros()];
        assert!(matches!(
            AtomEnsemble::new(p, circular_polarization()),
            Err(Error::DegenerateGeometry(_))
        ));
    }
}
