//! Trajectory-averaged estimators for the physical observables, together
//! with the streaming accumulator they are read from.
//!
//! Estimators average Weyl symbols over trajectories. Products of symbols on
//! *distinct* atoms estimate operator products directly; on-site operator
//! products are replaced by their Pauli-algebra values before averaging
//! (σ^μσ^ν + σ^νσ^μ = 2δ_{μν}), never by squares of per-sample symbols.

use nalgebra::{DMatrix, DVector, Matrix2, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phase_space::{PhasePoint, SQRT_3};

/// |⟨S⟩| below this multiple of N leaves the squeezing direction undefined.
pub const MEAN_SPIN_THRESHOLD_PER_ATOM: f64 = 1e-6;

/// A directional detector: unit vector k̂, its single-atom envelope
/// γ₀(k̂) = 1 − |p̂·k̂|², and per-atom phases e^{i2π k̂·r_n}.
#[derive(Debug, Clone)]
pub struct DirectionContext {
    pub k_hat: Vector3<f64>,
    pub gamma0: f64,
    pub phases: Vec<Complex64>,
}

/// Everything the accumulator needs to turn a phase-space point into moment
/// contributions. Shared read-only across workers.
#[derive(Debug, Clone)]
pub struct ObservableContext {
    pub gamma: DMatrix<f64>,
    pub gamma_diag: DVector<f64>,
    pub directions: Vec<DirectionContext>,
    pub squeezing: bool,
    pub kuramoto: bool,
}

impl ObservableContext {
    pub fn new(gamma: DMatrix<f64>) -> Self {
        let n = gamma.nrows();
        let gamma_diag = DVector::from_fn(n, |i, _| gamma[(i, i)]);
        Self { gamma, gamma_diag, directions: Vec::new(), squeezing: false, kuramoto: false }
    }

    pub fn with_directions(
        mut self,
        directions: &[Vector3<f64>],
        positions: &[Vector3<f64>],
        polarization: &Vector3<Complex64>,
    ) -> Result<Self> {
        for k in directions {
            let norm = k.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::InvalidArgument("observation direction must be nonzero".into()));
            }
            let k_hat = k / norm;
            let proj = polarization.x * k_hat.x + polarization.y * k_hat.y + polarization.z * k_hat.z;
            let gamma0 = 1.0 - proj.norm_sqr();
            let phases = positions
                .iter()
                .map(|r| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k_hat.dot(r)))
                .collect();
            self.directions.push(DirectionContext { k_hat, gamma0, phases });
        }
        Ok(self)
    }

    pub fn with_squeezing(mut self, on: bool) -> Self {
        self.squeezing = on;
        self
    }

    pub fn with_kuramoto(mut self, on: bool) -> Self {
        self.kuramoto = on;
        self
    }

    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }
}

/// Scratch for one accumulation; one per worker, never shared.
#[derive(Debug, Clone)]
pub struct AccumScratch {
    a: DVector<f64>,
    b: DVector<f64>,
    ga: DVector<f64>,
    gb: DVector<f64>,
}

impl AccumScratch {
    pub fn new(n: usize) -> Self {
        Self {
            a: DVector::zeros(n),
            b: DVector::zeros(n),
            ga: DVector::zeros(n),
            gb: DVector::zeros(n),
        }
    }
}

/// Streaming sums of the Weyl-symbol moments the estimators need.
///
/// Merging is associative and commutative at the mathematical level; counts
/// are additive. Sums (not means) are stored so that merge is a plain add.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    pub count: u64,
    /// Σ_traj cosθ_n, Σ_traj sinθ_n cosφ_n, Σ_traj sinθ_n sinφ_n per atom.
    pub sum_cos: DVector<f64>,
    pub sum_a: DVector<f64>,
    pub sum_b: DVector<f64>,
    /// Σ_traj (aᵀΓa + bᵀΓb) — the pairwise sum the emission rate needs.
    pub sum_gamma_quad: f64,
    /// Σ_traj Σ_n sin²θ_n.
    pub sum_sin_sq: f64,
    /// Per direction: Σ_traj |Σ_n e^{i2πk̂·r_n} sinθ_n e^{iφ_n}|².
    pub sum_dir_abs_sq: Vec<f64>,
    /// Σ_traj T^μ with T^μ = Σ_n s^μ_n (collective spin building block).
    pub sum_t: [f64; 3],
    /// Σ_traj T^μ T^ν, packed xx, xy, xz, yy, yz, zz.
    pub sum_tt: [f64; 6],
    /// Σ_traj Σ_n s^μ_n s^ν_n, same packing.
    pub sum_onsite: [f64; 6],
    pub sum_kuramoto_r: f64,
    pub sum_kuramoto_r_sq: f64,
}

impl MomentAccumulator {
    pub fn new(n: usize, n_directions: usize) -> Self {
        Self {
            count: 0,
            sum_cos: DVector::zeros(n),
            sum_a: DVector::zeros(n),
            sum_b: DVector::zeros(n),
            sum_gamma_quad: 0.0,
            sum_sin_sq: 0.0,
            sum_dir_abs_sq: vec![0.0; n_directions],
            sum_t: [0.0; 3],
            sum_tt: [0.0; 6],
            sum_onsite: [0.0; 6],
            sum_kuramoto_r: 0.0,
            sum_kuramoto_r_sq: 0.0,
        }
    }

    /// Folds one trajectory sample (cosθ, φ arrays) into the sums.
    pub fn accumulate(
        &mut self,
        cos_theta: &[f64],
        phi: &[f64],
        ctx: &ObservableContext,
        scratch: &mut AccumScratch,
    ) {
        let n = cos_theta.len();
        self.count += 1;
        for i in 0..n {
            let c = cos_theta[i];
            let st = (1.0 - c * c).max(0.0).sqrt();
            let (sp, cp) = phi[i].sin_cos();
            scratch.a[i] = st * cp;
            scratch.b[i] = st * sp;
            self.sum_cos[i] += c;
            self.sum_a[i] += scratch.a[i];
            self.sum_b[i] += scratch.b[i];
            self.sum_sin_sq += st * st;
        }
        scratch.ga.gemv(1.0, &ctx.gamma, &scratch.a, 0.0);
        scratch.gb.gemv(1.0, &ctx.gamma, &scratch.b, 0.0);
        self.sum_gamma_quad += scratch.a.dot(&scratch.ga) + scratch.b.dot(&scratch.gb);

        for (d, dir) in ctx.directions.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                acc += dir.phases[i] * Complex64::new(scratch.a[i], scratch.b[i]);
            }
            self.sum_dir_abs_sq[d] += acc.norm_sqr();
        }

        if ctx.squeezing {
            let mut t = [0.0; 3];
            for i in 0..n {
                let s = [SQRT_3 * scratch.a[i], SQRT_3 * scratch.b[i], SQRT_3 * cos_theta[i]];
                t[0] += s[0];
                t[1] += s[1];
                t[2] += s[2];
                let mut k = 0;
                for mu in 0..3 {
                    for nu in mu..3 {
                        self.sum_onsite[k] += s[mu] * s[nu];
                        k += 1;
                    }
                }
            }
            let mut k = 0;
            for mu in 0..3 {
                self.sum_t[mu] += t[mu];
                for nu in mu..3 {
                    self.sum_tt[k] += t[mu] * t[nu];
                    k += 1;
                }
            }
        }

        if ctx.kuramoto {
            let (r, _) = kuramoto_order_slice(phi);
            self.sum_kuramoto_r += r;
            self.sum_kuramoto_r_sq += r * r;
        }
    }

    /// Adds another accumulator's sums; the merge-order contract is the
    /// engine's concern.
    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum_cos += &other.sum_cos;
        self.sum_a += &other.sum_a;
        self.sum_b += &other.sum_b;
        self.sum_gamma_quad += other.sum_gamma_quad;
        self.sum_sin_sq += other.sum_sin_sq;
        for (x, y) in self.sum_dir_abs_sq.iter_mut().zip(&other.sum_dir_abs_sq) {
            *x += y;
        }
        for k in 0..3 {
            self.sum_t[k] += other.sum_t[k];
        }
        for k in 0..6 {
            self.sum_tt[k] += other.sum_tt[k];
            self.sum_onsite[k] += other.sum_onsite[k];
        }
        self.sum_kuramoto_r += other.sum_kuramoto_r;
        self.sum_kuramoto_r_sq += other.sum_kuramoto_r_sq;
    }

    fn mean(&self, sum: f64) -> f64 {
        sum / self.count as f64
    }

    /// Excitations above the ground state: N/2 + ⟨Ŝ^z⟩ with the Weyl
    /// estimator W_{Ŝ^z} = (√3/2) Σ_n cosθ_n.
    pub fn excitation_number(&self) -> f64 {
        let n = self.sum_cos.len() as f64;
        n / 2.0 + SQRT_3 / 2.0 * self.mean(self.sum_cos.iter().sum())
    }

    /// Total photon emission rate in Γ₀, reported positive during decay:
    /// γ = (√3/2) Σ_n Γ_nn ⟨cosθ_n⟩
    ///   + (3/4) Σ_mn Γ_mn ⟨sinθ_m sinθ_n cos(φ_m − φ_n)⟩,
    /// the m=n diagonal of the pair sum included.
    pub fn total_emission_rate(&self, gamma_diag: &DVector<f64>) -> f64 {
        let first: f64 = self
            .sum_cos
            .iter()
            .zip(gamma_diag.iter())
            .map(|(s, g)| g * self.mean(*s))
            .sum();
        SQRT_3 / 2.0 * first + 0.75 * self.mean(self.sum_gamma_quad)
    }

    /// Photon emission rate along direction `d`, in units of the rate of a
    /// single fully excited atom into the same direction (the γ₀(k̂)
    /// envelope times one excitation).
    ///
    /// Off-site pair terms are Weyl products; the on-site diagonal is the
    /// operator identity ⟨σ⁺_nσ⁻_n⟩ = (1 + √3⟨cosθ_n⟩)/2. By conjugate
    /// symmetry of the pair matrix the result is exactly real.
    pub fn directional_emission_rate(&self, ctx: &ObservableContext, d: usize) -> f64 {
        let dir = &ctx.directions[d];
        let pair_full = 0.75 * (self.mean(self.sum_dir_abs_sq[d]) - self.mean(self.sum_sin_sq));
        dir.gamma0 * (pair_full + self.excitation_number())
    }

    /// Mean collective spin ⟨S⟩ = ½ Σ_n ⟨s_n⟩.
    pub fn mean_collective_spin(&self) -> Vector3<f64> {
        0.5 * SQRT_3
            * Vector3::new(
                self.mean(self.sum_a.iter().sum()),
                self.mean(self.sum_b.iter().sum()),
                self.mean(self.sum_cos.iter().sum()),
            )
    }

    /// Spin squeezing ξ² = N·min_{n̂ ⊥ ⟨S⟩} ⟨S_n̂²⟩ / |⟨S⟩|².
    pub fn spin_squeezing(&self) -> Result<f64> {
        let n = self.sum_cos.len();
        let mean_spin = self.mean_collective_spin();
        let norm = mean_spin.norm();
        let threshold = MEAN_SPIN_THRESHOLD_PER_ATOM * n as f64;
        if norm <= threshold {
            return Err(Error::UndefinedDirection { norm, threshold });
        }
        // ⟨S^μS^ν⟩_sym = ¼ [ Σ_{m≠n} ⟨s^μ_m s^ν_n⟩ + N δ_{μν} ].
        let mut ss = nalgebra::Matrix3::zeros();
        let mut k = 0;
        for mu in 0..3 {
            for nu in mu..3 {
                let pair = self.mean(self.sum_tt[k]) - self.mean(self.sum_onsite[k]);
                let val = 0.25 * (pair + if mu == nu { n as f64 } else { 0.0 });
                ss[(mu, nu)] = val;
                ss[(nu, mu)] = val;
                k += 1;
            }
        }
        let e3 = mean_spin / norm;
        let mut t1 = e3.cross(&Vector3::x());
        if t1.norm() < 1e-8 {
            t1 = e3.cross(&Vector3::y());
        }
        t1.normalize_mut();
        let t2 = e3.cross(&t1);
        let m = Matrix2::new(
            (t1.transpose() * ss * t1)[0],
            (t1.transpose() * ss * t2)[0],
            (t2.transpose() * ss * t1)[0],
            (t2.transpose() * ss * t2)[0],
        );
        let eig = m.symmetric_eigen();
        let min = eig.eigenvalues.min();
        Ok(n as f64 * min / (norm * norm))
    }

    pub fn kuramoto_r_mean(&self) -> f64 {
        self.mean(self.sum_kuramoto_r)
    }

    pub fn kuramoto_r_std(&self) -> f64 {
        let mean = self.kuramoto_r_mean();
        (self.mean(self.sum_kuramoto_r_sq) - mean * mean).max(0.0).sqrt()
    }
}

/// One evaluated record of the observable time series.
#[derive(Debug, Clone)]
pub struct ObservableRecord {
    pub t: f64,
    pub excitations: f64,
    pub total_rate: f64,
    pub directional_rates: Vec<f64>,
    /// `None` when not requested or when the mean-spin direction is
    /// undefined at this time.
    pub squeezing: Option<f64>,
    pub kuramoto_r_mean: Option<f64>,
    pub kuramoto_r_std: Option<f64>,
}

impl ObservableRecord {
    pub fn from_accumulator(t: f64, acc: &MomentAccumulator, ctx: &ObservableContext) -> Self {
        let directional_rates =
            (0..ctx.directions.len()).map(|d| acc.directional_emission_rate(ctx, d)).collect();
        Self {
            t,
            excitations: acc.excitation_number(),
            total_rate: acc.total_emission_rate(&ctx.gamma_diag),
            directional_rates,
            squeezing: if ctx.squeezing { acc.spin_squeezing().ok() } else { None },
            kuramoto_r_mean: ctx.kuramoto.then(|| acc.kuramoto_r_mean()),
            kuramoto_r_std: ctx.kuramoto.then(|| acc.kuramoto_r_std()),
        }
    }
}

/// Kuramoto order parameters of one trajectory: r e^{iψ} = (1/N) Σ e^{iφ_n}.
pub fn kuramoto_order(point: &PhasePoint) -> (f64, f64) {
    kuramoto_order_slice(&point.phi)
}

pub fn kuramoto_order_slice(phi: &[f64]) -> (f64, f64) {
    let n = phi.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for p in phi {
        let (s, c) = p.sin_cos();
        re += c;
        im += s;
    }
    ((re * re + im * im).sqrt() / n, im.atan2(re))
}

/// Exact steady-state ⟨Ŝ^z(∞)⟩ of the Dicke decay from the fully mixed
/// state, and the excitations N/2 + ⟨Ŝ^z(∞)⟩ above ground:
///
/// ```text
/// ⟨Ŝ^z(∞)⟩ = Σ_{j=0}^{N/2} (2j+1) d_j (−j) / 2^N,
/// d_j = (2j+1) N! / ((N/2+j+1)! (N/2−j)!)
/// ```
pub fn trapping_steady_state(n: usize) -> Result<(f64, f64)> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("trapping formula needs even N >= 2, got {n}")));
    }
    let half = n / 2;
    let mut sz = 0.0;
    for j in 0..=half {
        let d = ladder_degeneracy(n, j);
        sz += (2 * j + 1) as f64 * d * -(j as f64);
    }
    let sz = sz / 2f64.powi(n as i32);
    Ok((sz, n as f64 / 2.0 + sz))
}

/// d_j = (2j+1) N! / ((N/2+j+1)! (N/2−j)!), evaluated by cancelling the
/// factorials into a product safe for N up to ~60.
pub fn ladder_degeneracy(n: usize, j: usize) -> f64 {
    let half = n / 2;
    let mut val = (2 * j + 1) as f64;
    // N! / (N/2+j+1)!; the denominator argument can exceed N (top rungs).
    let top = half + j + 1;
    if top > n {
        for k in (n + 1)..=top {
            val /= k as f64;
        }
    } else {
        for k in (top + 1)..=n {
            val *= k as f64;
        }
    }
    for k in 2..=(half - j) {
        val /= k as f64;
    }
    val
}

/// Upper bound on the relative truncation error of the correspondence
/// rules: √(2 |J|² Tr ρ²) / ‖W_{S(J)ρ}‖.
pub fn validity_ratio(weights: &[Complex64], purity: f64, collective_norm: f64) -> f64 {
    let j_sq: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
    (2.0 * j_sq * purity).sqrt() / collective_norm
}

/// The same bound specialized to a Dicke eigenstate |j, m⟩ with uniform
/// weights: √(2N)/j.
pub fn validity_ratio_dicke(n: usize, j: f64) -> f64 {
    (2.0 * n as f64).sqrt() / j
}
