//! Rate equations on the Dicke ladders.
//!
//! With Γ_mn = Γ₀ and J ≡ 0 the dynamics is permutation symmetric and closes
//! on the populations p_m of the |j, m⟩ states within each cooperativity
//! ladder j:
//!
//! ```text
//! dp_m/dt = Γ₀ [ (j+m+1)(j−m) p_{m+1} − (j+m)(j−m+1) p_m ]
//! ```
//!
//! The inverted state lives on the single maximal ladder j = N/2; the fully
//! mixed state weights every (j, m, α) state with 2^{−N}, the degeneracy d_j
//! folded into the ladder weights.

use crate::error::{Error, Result};
use crate::observables::ladder_degeneracy;

/// Probability loss (or negative population) beyond this, per unit time,
/// marks the integration as failed.
pub const CONSERVATION_TOL: f64 = 1e-9;

/// One cooperativity ladder: populations p_m for m = −j..j, index i ↔ m = −j+i.
#[derive(Debug, Clone)]
pub struct DickeLadder {
    /// 2j (kept integral; j may be half-integer).
    pub two_j: u32,
    pub populations: Vec<f64>,
    /// Statistical weight carried by this ladder (degeneracy folded in).
    pub weight: f64,
}

impl DickeLadder {
    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    fn m(&self, i: usize) -> f64 {
        -self.j() + i as f64
    }

    fn total(&self) -> f64 {
        self.populations.iter().sum()
    }

    /// Σ_m m p_m.
    fn sz(&self) -> f64 {
        self.populations.iter().enumerate().map(|(i, p)| self.m(i) * p).sum()
    }

    /// Photon emission rate Γ₀ Σ_m (j+m)(j−m+1) p_m.
    fn rate(&self) -> f64 {
        let j = self.j();
        self.populations
            .iter()
            .enumerate()
            .map(|(i, p)| (j + self.m(i)) * (j - self.m(i) + 1.0) * p)
            .sum()
    }

    fn rhs(&self, p: &[f64], out: &mut [f64]) {
        let j = self.j();
        let dim = p.len();
        for i in 0..dim {
            let m = self.m(i);
            let loss = (j + m) * (j - m + 1.0);
            let mut dp = -loss * p[i];
            if i + 1 < dim {
                let m_up = self.m(i + 1);
                dp += (j + m_up) * (j - m_up + 1.0) * p[i + 1];
            }
            out[i] = dp;
        }
    }

    fn rk4_step(&mut self, h: f64, k: &mut [Vec<f64>]) {
        let dim = self.populations.len();
        let p = &self.populations;
        self.rhs(p, &mut k[0]);
        let mut tmp: Vec<f64> = (0..dim).map(|i| p[i] + 0.5 * h * k[0][i]).collect();
        self.rhs(&tmp, &mut k[1]);
        for i in 0..dim {
            tmp[i] = p[i] + 0.5 * h * k[1][i];
        }
        self.rhs(&tmp, &mut k[2]);
        for i in 0..dim {
            tmp[i] = p[i] + h * k[2][i];
        }
        self.rhs(&tmp, &mut k[3]);
        for i in 0..dim {
            self.populations[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DickeInitial {
    /// |e…e⟩ = |j = N/2, m = N/2⟩.
    Inverted,
    /// ρ = 𝟙/2^N spread over every ladder.
    MixedEnsemble,
}

/// Excitations above ground and total emission rate on `t_grid`.
#[derive(Debug, Clone)]
pub struct DickeSolution {
    pub times: Vec<f64>,
    pub excitations: Vec<f64>,
    pub rate: Vec<f64>,
}

/// Integrates the ladder rate equations with fixed-step RK4 at
/// h ≤ 10⁻⁴/(N Γ₀) and reads off excitations and emission rate at `t_grid`.
pub fn dicke_evolve(n: usize, initial: DickeInitial, t_grid: &[f64]) -> Result<DickeSolution> {
    dicke_evolve_with_step(n, initial, t_grid, 1e-4 / n.max(1) as f64)
}

/// Same integration with an explicit step bound; used by refinement tests.
pub fn dicke_evolve_with_step(
    n: usize,
    initial: DickeInitial,
    t_grid: &[f64],
    h_max: f64,
) -> Result<DickeSolution> {
    if n == 0 {
        return Err(Error::InvalidArgument("dicke_evolve needs N >= 1".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidArgument("t_grid must be increasing and nonnegative".into()));
    }

    let mut ladders: Vec<DickeLadder> = match initial {
        DickeInitial::Inverted => {
            let mut populations = vec![0.0; n + 1];
            populations[n] = 1.0; // m = +j
            vec![DickeLadder { two_j: n as u32, populations, weight: 1.0 }]
        }
        DickeInitial::MixedEnsemble => {
            let norm = 2f64.powi(n as i32);
            (0..=n)
                .rev()
                .filter(|two_j| two_j % 2 == n % 2)
                .map(|two_j| {
                    let d = ladder_degeneracy(n, two_j / 2);
                    let dim = two_j + 1;
                    DickeLadder {
                        two_j: two_j as u32,
                        populations: vec![d / norm; dim],
                        weight: d,
                    }
                })
                .collect()
        }
    };
    let budgets: Vec<f64> = ladders.iter().map(|l| l.total()).collect();

    let mut k = vec![vec![0.0; n + 1]; 4];
    let mut t_now = 0.0;
    let mut out = DickeSolution {
        times: t_grid.to_vec(),
        excitations: Vec::with_capacity(t_grid.len()),
        rate: Vec::with_capacity(t_grid.len()),
    };
    for &t_target in t_grid {
        while t_now < t_target - 1e-12 {
            let h = h_max.min(t_target - t_now);
            for ladder in &mut ladders {
                ladder.rk4_step(h, &mut k);
            }
            t_now += h;
        }
        let mut sz = 0.0;
        let mut rate = 0.0;
        for (ladder, budget) in ladders.iter().zip(&budgets) {
            let drift = (ladder.total() - budget).abs();
            if drift > CONSERVATION_TOL * (1.0 + t_now) {
                return Err(Error::IntegratorFailure(format!(
                    "ladder j={} probability drift {drift:.3e} at t={t_now}",
                    ladder.j()
                )));
            }
            if ladder.populations.iter().any(|p| *p < -CONSERVATION_TOL) {
                return Err(Error::IntegratorFailure(format!(
                    "negative population on ladder j={} at t={t_now}",
                    ladder.j()
                )));
            }
            sz += ladder.sz();
            rate += ladder.rate();
        }
        out.excitations.push(n as f64 / 2.0 + sz);
        out.rate.push(rate);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::trapping_steady_state;
    use approx::assert_relative_eq;

    #[test]
    fn single_atom_is_exponential() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let sol = dicke_evolve(1, DickeInitial::Inverted, &grid).unwrap();
        for (t, e) in grid.iter().zip(&sol.excitations) {
            assert_relative_eq!(*e, (-t).exp(), epsilon = 1e-8);
        }
    }

    #[test]
    fn two_atom_closed_form() {
        // p₁ = e^{−2t}, p₀ = 2t e^{−2t}, p₋₁ the rest:
        // excitations = 1 + p₁ − p₋₁ = 2e^{−2t} + 2te^{−2t} − ... computed
        // directly from the ladder populations below.
        let grid: Vec<f64> = (0..=16).map(|i| i as f64 * 0.125).collect();
        let sol = dicke_evolve(2, DickeInitial::Inverted, &grid).unwrap();
        for (t, e) in grid.iter().zip(&sol.excitations) {
            let p1 = (-2.0 * t).exp();
            let p0 = 2.0 * t * (-2.0 * t).exp();
            let pm1 = 1.0 - p1 - p0;
            let expect = 1.0 + p1 - pm1;
            assert_relative_eq!(*e, expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn mixed_long_time_matches_trapping_formula() {
        for n in [2usize, 4, 6, 8] {
            let sol = dicke_evolve(n, DickeInitial::MixedEnsemble, &[0.0, 12.0]).unwrap();
            let (_, trapped) = trapping_steady_state(n).unwrap();
            assert_relative_eq!(sol.excitations[1], trapped, epsilon = 1e-8);
            // at t=0 the mixed state has N/2 excitations on average
            assert_relative_eq!(sol.excitations[0], n as f64 / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn probability_conserved_per_ladder() {
        let sol = dicke_evolve(8, DickeInitial::MixedEnsemble, &[0.0, 1.0, 5.0]);
        assert!(sol.is_ok());
    }

    #[test]
    fn inverted_burst_peaks_above_n() {
        let grid: Vec<f64> = (0..=300).map(|i| i as f64 * 0.01).collect();
        let sol = dicke_evolve(8, DickeInitial::Inverted, &grid).unwrap();
        let peak = sol.rate.iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak > 8.0, "superradiant peak {peak} should exceed N·Γ₀");
        assert_relative_eq!(sol.rate[0], 8.0, epsilon = 1e-8);
    }

    #[test]
    fn step_refinement_is_converged() {
        let grid = [0.0, 0.5, 1.0, 2.0];
        let h = 1e-4 / 4.0;
        let a = dicke_evolve_with_step(4, DickeInitial::Inverted, &grid, h).unwrap();
        let b = dicke_evolve_with_step(4, DickeInitial::Inverted, &grid, h / 2.0).unwrap();
        for (x, y) in a.excitations.iter().zip(&b.excitations) {
            assert!((x - y).abs() < 1e-8, "step halving moved excitations by {}", x - y);
        }
        for (x, y) in a.rate.iter().zip(&b.rate) {
            assert!((x - y).abs() < 1e-8, "step halving moved rate by {}", x - y);
        }
    }
}
