//! Dipole-dipole coupling matrices and the noise factorization Γ = G·Gᵀ.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;

use crate::ensemble::AtomEnsemble;
use crate::error::{Error, Result};

/// Max-norm tolerance on ‖G·Gᵀ − Γ‖ (units Γ₀).
pub const FACTORIZATION_TOL: f64 = 1e-10;

/// Eigenvalues of Γ in [−tol, 0) are clamped to zero; anything below −tol
/// signals a numerical failure. The tolerance scales with N.
pub const EIGENVALUE_CLAMP_PER_ATOM: f64 = 1e-10;

/// Below this `k_e r` the Γ kernel switches to its series expansion; the
/// closed form loses digits to cancellation between the 1/x² and 1/x³ terms.
const SERIES_THRESHOLD: f64 = 1e-2;

/// Coherent (J) and dissipative (Γ) pair couplings for one pair at separation
/// `r_mn` (λ_e units), both in Γ₀.
///
/// With x = 2π|r| and c = |p̂·r̂|²:
///
/// ```text
/// J/Γ₀ = -3/4 { (1-c) cos x / x - (1-3c) [ sin x / x² + cos x / x³ ] }
/// Γ/Γ₀ =  3/2 { (1-c) sin x / x + (1-3c) [ cos x / x² - sin x / x³ ] }
/// ```
pub fn dipole_kernel(r_mn: &Vector3<f64>, polarization: &Vector3<Complex64>) -> Result<(f64, f64)> {
    let r = r_mn.norm();
    if r <= 0.0 {
        return Err(Error::SingularKernel);
    }
    let rhat = r_mn / r;
    let proj: Complex64 = polarization.x * rhat.x + polarization.y * rhat.y + polarization.z * rhat.z;
    let c = proj.norm_sqr();
    let x = 2.0 * std::f64::consts::PI * r;
    let (sx, cx) = x.sin_cos();

    let j = -0.75 * ((1.0 - c) * cx / x - (1.0 - 3.0 * c) * (sx / (x * x) + cx / (x * x * x)));

    let gamma = if x < SERIES_THRESHOLD {
        // sin x/x = 1 - x²/6 + x⁴/120; cos x/x² - sin x/x³ = -1/3 + x²/30 - x⁴/840
        let x2 = x * x;
        let sinc = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
        let tail = -1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0;
        1.5 * ((1.0 - c) * sinc + (1.0 - 3.0 * c) * tail)
    } else {
        1.5 * ((1.0 - c) * sx / x + (1.0 - 3.0 * c) * (cx / (x * x) - sx / (x * x * x)))
    };

    Ok((j, gamma))
}

/// Dense coupling matrices shared read-only by all trajectory workers.
#[derive(Debug, Clone)]
pub struct CouplingMatrices {
    /// Coherent dipole-dipole rates, symmetric, zero diagonal.
    pub j: DMatrix<f64>,
    /// Dissipative rates, symmetric, Γ_nn = Γ₀ = 1.
    pub gamma: DMatrix<f64>,
    /// Noise map with G·Gᵀ = Γ to [`FACTORIZATION_TOL`].
    pub g: DMatrix<f64>,
    /// Eigenpairs (γᵢ, uᵢ) of Γ, descending by γᵢ, after clamping.
    pub eigen_spectrum: Vec<(f64, DVector<f64>)>,
}

impl CouplingMatrices {
    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }

    /// True when every J entry vanishes (Dicke idealization); lets the
    /// integrator skip two matrix-vector products per step.
    pub fn j_is_zero(&self) -> bool {
        self.j.iter().all(|&v| v == 0.0)
    }

    fn check_factorization(&self) -> Result<()> {
        let resid = (&self.g * self.g.transpose() - &self.gamma)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if resid > FACTORIZATION_TOL {
            return Err(Error::KernelInconsistency(format!(
                "‖G·Gᵀ − Γ‖_max = {resid:.3e} exceeds {FACTORIZATION_TOL:.1e}"
            )));
        }
        Ok(())
    }
}

/// Fills J and Γ from the free-space kernel and factorizes Γ through its
/// symmetric eigendecomposition, clamping eigenvalues in [−tol, 0) to zero.
///
/// Γ is positive semidefinite in exact arithmetic for any geometry; an
/// eigenvalue below −[`EIGENVALUE_CLAMP_PER_ATOM`]·N is reported as an error.
pub fn build_matrices(ensemble: &AtomEnsemble) -> Result<CouplingMatrices> {
    let n = ensemble.n();
    let mut j = DMatrix::zeros(n, n);
    let mut gamma = DMatrix::identity(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let r = ensemble.positions()[a] - ensemble.positions()[b];
            let (jv, gv) = dipole_kernel(&r, ensemble.polarization())?;
            j[(a, b)] = jv;
            j[(b, a)] = jv;
            gamma[(a, b)] = gv;
            gamma[(b, a)] = gv;
        }
    }
    let (g, eigen_spectrum) = factorize(&gamma)?;
    let m = CouplingMatrices { j, gamma, g, eigen_spectrum };
    m.check_factorization()?;
    Ok(m)
}

/// Dicke idealization: Γ_mn = Γ₀ for every pair, J ≡ 0, and the rank-1
/// factorization G_mn = √Γ₀ δ_{n,1} so all emitters share two noises.
pub fn dicke_override(n: usize) -> Result<CouplingMatrices> {
    if n == 0 {
        return Err(Error::InvalidArgument("dicke override needs n >= 1".into()));
    }
    let gamma = DMatrix::from_element(n, n, 1.0);
    let j = DMatrix::zeros(n, n);
    let mut g = DMatrix::zeros(n, n);
    for row in 0..n {
        g[(row, 0)] = 1.0;
    }
    let mut eigen_spectrum = Vec::with_capacity(n);
    eigen_spectrum.push((n as f64, DVector::from_element(n, 1.0 / (n as f64).sqrt())));
    for k in 1..n {
        // Orthonormal complement of the all-ones vector: u_k ∝ e_0 - e_k.
        let mut v = DVector::zeros(n);
        v[0] = 1.0 / std::f64::consts::SQRT_2;
        v[k] = -1.0 / std::f64::consts::SQRT_2;
        eigen_spectrum.push((0.0, v));
    }
    let m = CouplingMatrices { j, gamma, g, eigen_spectrum };
    m.check_factorization()?;
    Ok(m)
}

fn factorize(gamma: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<(f64, DVector<f64>)>)> {
    let n = gamma.nrows();
    let eig = gamma.clone().symmetric_eigen();
    let clamp = EIGENVALUE_CLAMP_PER_ATOM * n as f64;
    let mut pairs: Vec<(f64, DVector<f64>)> = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda < -clamp {
            return Err(Error::KernelInconsistency(format!(
                "Γ eigenvalue {lambda:.3e} below −{clamp:.1e}"
            )));
        }
        pairs.push((lambda.max(0.0), eig.eigenvectors.column(k).into_owned()));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut g = DMatrix::zeros(n, n);
    for (k, (lambda, vec)) in pairs.iter().enumerate() {
        let s = lambda.sqrt();
        for row in 0..n {
            g[(row, k)] = s * vec[row];
        }
    }
    Ok((g, pairs))
}

/// CSV dumps of J, Γ, G and the Γ spectrum for external inspection.
pub fn matrices_to_csv(m: &CouplingMatrices) -> Vec<(&'static str, String)> {
    let dump = |mat: &DMatrix<f64>| {
        let mut s = String::new();
        for r in 0..mat.nrows() {
            let row: Vec<String> = (0..mat.ncols()).map(|c| format!("{:.17e}", mat[(r, c)])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    };
    let mut spectrum = String::from("index,eigenvalue\n");
    for (i, (lambda, _)) in m.eigen_spectrum.iter().enumerate() {
        spectrum.push_str(&format!("{i},{:.17e}\n", lambda));
    }
    vec![
        ("J.csv", dump(&m.j)),
        ("Gamma.csv", dump(&m.gamma)),
        ("G.csv", dump(&m.g)),
        ("spectrum.csv", spectrum),
    ]
}
