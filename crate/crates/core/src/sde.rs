//! Drift and diffusion of the semiclassical trajectory equations, plus the
//! single-trajectory integration steps.
//!
//! The trajectory equations for N spins, in Itô form, are
//!
//! ```text
//! dθ_n = [ Γ_nn/2 cotθ_n + √3 Σ_m sinθ_m (J_mn sinφ_mn + Γ_mn/2 cosφ_mn)
//!          + Im(Ω_n e^{iφ_n}) ] dt
//!        + Σ_m G_nm (−cosφ_n dW_θm + sinφ_n dW_φm)
//! dφ_n = [ √3 cotθ_n Σ_m sinθ_m (−J_mn cosφ_mn + Γ_mn/2 sinφ_mn)
//!          + Re(Ω_n e^{iφ_n}) cotθ_n − Δ ] dt
//!        + cotθ_n Σ_m G_nm (sinφ_n dW_θm + cosφ_n dW_φm)
//! ```
//!
//! with φ_mn = φ_m − φ_n and 2N independent Wiener increments per step.
//!
//! The integrator advances cosθ_n rather than θ_n. The Itô change of
//! variables turns the singular Γ_nn/2·cotθ_n drift plus its quadratic
//! correction into the bounded term −Γ_nn cosθ_n, and the θ-noise acquires a
//! sinθ_n prefactor that vanishes at the poles, so Euler–Maruyama stays
//! accurate at the working timesteps where the raw θ form blows up near
//! clamped pole excursions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::coupling::CouplingMatrices;
use crate::error::{Error, Result};
use crate::phase_space::{PhasePoint, COS_POLE_GUARD, SQRT_3};

/// Simulation parameters; times in 1/Γ₀.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub n_traj: u64,
    pub seed: u64,
    /// Steps between observable records (the final step is always recorded).
    pub sample_stride: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.t_final < self.dt || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t_final must be >= dt, got {} < {}",
                self.t_final, self.dt
            )));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidArgument("n_traj must be >= 1".into()));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidArgument("sample_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        ((self.t_final / self.dt).round() as u64).max(1)
    }
}

/// Everything a trajectory worker needs, shared read-only.
#[derive(Debug, Clone)]
pub struct TwaSystem {
    pub j: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub gamma_diag: DVector<f64>,
    /// Per-atom complex Rabi frequency Ω_n; `None` for an undriven system.
    pub rabi: Option<Vec<Complex64>>,
    pub detuning: f64,
    j_is_zero: bool,
}

impl TwaSystem {
    pub fn new(couplings: &CouplingMatrices, rabi: Option<Vec<Complex64>>, detuning: f64) -> Self {
        let n = couplings.n();
        let gamma_diag = DVector::from_fn(n, |i, _| couplings.gamma[(i, i)]);
        Self {
            j: couplings.j.clone(),
            gamma: couplings.gamma.clone(),
            g: couplings.g.clone(),
            gamma_diag,
            rabi,
            detuning,
            j_is_zero: couplings.j_is_zero(),
        }
    }

    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }
}

/// 2N Wiener increments for one step, each of variance dt.
#[derive(Debug, Clone)]
pub struct NoiseVector {
    pub d_w_theta: DVector<f64>,
    pub d_w_phi: DVector<f64>,
}

impl NoiseVector {
    pub fn sample<R: Rng + ?Sized>(n: usize, dt: f64, rng: &mut R) -> Self {
        let sq = dt.sqrt();
        let mut draw = || -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            sq * z
        };
        let d_w_theta = DVector::from_fn(n, |_, _| draw());
        let d_w_phi = DVector::from_fn(n, |_, _| draw());
        Self { d_w_theta, d_w_phi }
    }
}

/// Reusable per-trajectory work arrays; one per worker.
#[derive(Debug, Clone)]
pub struct StepScratch {
    st: DVector<f64>,
    cp: DVector<f64>,
    sp: DVector<f64>,
    a: DVector<f64>,
    b: DVector<f64>,
    ja: DVector<f64>,
    jb: DVector<f64>,
    ga: DVector<f64>,
    gb: DVector<f64>,
    gt: DVector<f64>,
    gp: DVector<f64>,
    drift_c: DVector<f64>,
    drift_phi: DVector<f64>,
}

impl StepScratch {
    pub fn new(n: usize) -> Self {
        let z = || DVector::zeros(n);
        Self {
            st: z(),
            cp: z(),
            sp: z(),
            a: z(),
            b: z(),
            ja: z(),
            jb: z(),
            ga: z(),
            gb: z(),
            gt: z(),
            gp: z(),
            drift_c: z(),
            drift_phi: z(),
        }
    }

    fn trig(&mut self, point: &PhasePoint) {
        for i in 0..point.n() {
            let c = point.cos_theta[i];
            self.st[i] = (1.0 - c * c).max(0.0).sqrt();
            let (s, co) = point.phi[i].sin_cos();
            self.sp[i] = s;
            self.cp[i] = co;
            self.a[i] = self.st[i] * co;
            self.b[i] = self.st[i] * s;
        }
    }

    /// Interaction sums via four matrix-vector products:
    /// sum_θ[n] = Σ_m sinθ_m (J_mn sinφ_mn + Γ_mn/2 cosφ_mn)
    /// sum_φ[n] = Σ_m sinθ_m (−J_mn cosφ_mn + Γ_mn/2 sinφ_mn)
    /// expanded over a_m = sinθ_m cosφ_m, b_m = sinθ_m sinφ_m.
    fn interaction_sums(&mut self, system: &TwaSystem) {
        if system.j_is_zero {
            self.ja.fill(0.0);
            self.jb.fill(0.0);
        } else {
            self.ja.gemv(1.0, &system.j, &self.a, 0.0);
            self.jb.gemv(1.0, &system.j, &self.b, 0.0);
        }
        self.ga.gemv(1.0, &system.gamma, &self.a, 0.0);
        self.gb.gemv(1.0, &system.gamma, &self.b, 0.0);
    }

    fn sum_theta(&self, i: usize) -> f64 {
        (self.jb[i] * self.cp[i] - self.ja[i] * self.sp[i])
            + 0.5 * (self.ga[i] * self.cp[i] + self.gb[i] * self.sp[i])
    }

    fn sum_phi(&self, i: usize) -> f64 {
        -(self.ja[i] * self.cp[i] + self.jb[i] * self.sp[i])
            + 0.5 * (self.gb[i] * self.cp[i] - self.ga[i] * self.sp[i])
    }

    /// Drive projections using e^{iφ} = cosφ + i sinφ.
    fn drive_im(&self, rabi: &[Complex64], i: usize) -> f64 {
        rabi[i].re * self.sp[i] + rabi[i].im * self.cp[i]
    }

    fn drive_re(&self, rabi: &[Complex64], i: usize) -> f64 {
        rabi[i].re * self.cp[i] - rabi[i].im * self.sp[i]
    }
}

/// Deterministic part of (dθ_n/dt, dφ_n/dt) at `point`.
///
/// The θ component carries the Γ_nn/2·cotθ term, so it grows without bound
/// inside the pole guard; the integrator itself works with the cosθ form.
pub fn drift(point: &PhasePoint, system: &TwaSystem, scratch: &mut StepScratch) -> (Vec<f64>, Vec<f64>) {
    let n = point.n();
    scratch.trig(point);
    scratch.interaction_sums(system);
    let mut d_theta = vec![0.0; n];
    let mut d_phi = vec![0.0; n];
    for i in 0..n {
        let cot = point.cos_theta[i] / scratch.st[i];
        d_theta[i] = 0.5 * system.gamma_diag[i] * cot + SQRT_3 * scratch.sum_theta(i);
        d_phi[i] = SQRT_3 * cot * scratch.sum_phi(i) - system.detuning;
        if let Some(rabi) = &system.rabi {
            d_theta[i] += scratch.drive_im(rabi, i);
            d_phi[i] += scratch.drive_re(rabi, i) * cot;
        }
    }
    (d_theta, d_phi)
}

/// Noise increments (δθ_n, δφ_n) for a given noise realization.
pub fn diffusion_apply(
    point: &PhasePoint,
    g: &DMatrix<f64>,
    noise: &NoiseVector,
) -> (Vec<f64>, Vec<f64>) {
    let n = point.n();
    let gt = g * &noise.d_w_theta;
    let gp = g * &noise.d_w_phi;
    let mut d_theta = vec![0.0; n];
    let mut d_phi = vec![0.0; n];
    for i in 0..n {
        let (sp, cp) = point.phi[i].sin_cos();
        let cot = point.cos_theta[i] / point.sin_theta(i);
        d_theta[i] = -cp * gt[i] + sp * gp[i];
        d_phi[i] = cot * (sp * gt[i] + cp * gp[i]);
    }
    (d_theta, d_phi)
}

/// One Euler–Maruyama step: drift and diffusion evaluated at the pre-step
/// state (Itô), then the pole guard is applied to cosθ. φ stays unwrapped.
pub fn step_euler_maruyama<R: Rng + ?Sized>(
    point: &mut PhasePoint,
    system: &TwaSystem,
    dt: f64,
    rng: &mut R,
    scratch: &mut StepScratch,
) -> Result<()> {
    let n = point.n();
    scratch.trig(point);
    scratch.interaction_sums(system);

    for i in 0..n {
        let c = point.cos_theta[i];
        let st = scratch.st[i];
        let cot = c / st;
        // cosθ drift: −sinθ·(θ-drift without the cot term) − Γ_nn·cosθ,
        // the −Γ_nn c already containing the Itô quadratic correction.
        let mut dc = -system.gamma_diag[i] * c - SQRT_3 * st * scratch.sum_theta(i);
        let mut dphi = SQRT_3 * cot * scratch.sum_phi(i) - system.detuning;
        if let Some(rabi) = &system.rabi {
            dc -= st * scratch.drive_im(rabi, i);
            dphi += scratch.drive_re(rabi, i) * cot;
        }
        scratch.drift_c[i] = dc;
        scratch.drift_phi[i] = dphi;
    }

    let sq = dt.sqrt();
    let mut draw = || -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        sq * z
    };
    for i in 0..n {
        scratch.gt[i] = draw();
    }
    for i in 0..n {
        scratch.gp[i] = draw();
    }
    // In-place G·dW via the a/b buffers as temporaries.
    scratch.a.gemv(1.0, &system.g, &scratch.gt, 0.0);
    scratch.b.gemv(1.0, &system.g, &scratch.gp, 0.0);

    for i in 0..n {
        let st = scratch.st[i];
        let cot = point.cos_theta[i] / st;
        let (gt, gp) = (scratch.a[i], scratch.b[i]);
        let noise_theta = -scratch.cp[i] * gt + scratch.sp[i] * gp;
        let noise_phi = cot * (scratch.sp[i] * gt + scratch.cp[i] * gp);
        point.cos_theta[i] += scratch.drift_c[i] * dt - st * noise_theta;
        point.phi[i] += scratch.drift_phi[i] * dt + noise_phi;
    }
    point.enforce_pole_guard();

    for i in 0..n {
        if !point.cos_theta[i].is_finite() || !point.phi[i].is_finite() {
            return Err(Error::NumericalBlowup { trajectory: 0, step: 0 });
        }
    }
    Ok(())
}

/// Collective dephasing: dθ_n = 0, dφ_n = 2√γ J_n dW with one shared
/// Wiener increment.
pub fn step_collective_dephasing<R: Rng + ?Sized>(
    point: &mut PhasePoint,
    j_weights: &[f64],
    gamma_rate: f64,
    dt: f64,
    rng: &mut R,
) {
    let z: f64 = StandardNormal.sample(rng);
    let dw = dt.sqrt() * z;
    let amp = 2.0 * gamma_rate.sqrt();
    for (phi, j) in point.phi.iter_mut().zip(j_weights) {
        *phi += amp * j * dw;
    }
}

/// Rotation axis for [`step_larmor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Larmor precession ds_n = 2 J_n S^μ(J) × s_n dt about the collective field
/// along one Cartesian axis, applied as an exact rotation so |s_n| = √3 is
/// preserved; the field S^μ(J) = Σ_m J_m s_m^μ is evaluated at the pre-step
/// state.
pub fn step_larmor(point: &mut PhasePoint, j_weights: &[f64], axis: Axis, dt: f64) {
    let n = point.n();
    let mut field = 0.0;
    for i in 0..n {
        let s = point.s(i);
        field += j_weights[i]
            * match axis {
                Axis::X => s.x,
                Axis::Y => s.y,
                Axis::Z => s.z,
            };
    }
    for i in 0..n {
        let angle = 2.0 * j_weights[i] * field * dt;
        match axis {
            Axis::Z => {
                // Rotation about z advances the azimuth directly.
                point.phi[i] += angle;
            }
            Axis::X | Axis::Y => {
                let s = point.s(i) / SQRT_3;
                let (sin_a, cos_a) = angle.sin_cos();
                let (x, y, z) = (s.x, s.y, s.z);
                let (nx, ny, nz) = match axis {
                    Axis::X => (x, y * cos_a - z * sin_a, y * sin_a + z * cos_a),
                    Axis::Y => (x * cos_a + z * sin_a, y, -x * sin_a + z * cos_a),
                    Axis::Z => unreachable!(),
                };
                point.cos_theta[i] = nz.clamp(-COS_POLE_GUARD, COS_POLE_GUARD);
                let wrapped = ny.atan2(nx);
                point.phi[i] = unwrap_near(point.phi[i], wrapped);
            }
        }
    }
}

/// Lifts a wrapped angle onto the unwrapped line, closest to `prev`.
fn unwrap_near(prev: f64, wrapped: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut delta = (wrapped - prev) % TAU;
    if delta > PI {
        delta -= TAU;
    } else if delta < -PI {
        delta += TAU;
    }
    prev + delta
}
