//! Trajectory-ensemble driver: deterministic per-trajectory RNG streams,
//! block-wise parallel execution, and moment accumulation.
//!
//! Each trajectory owns a counter-based RNG stream derived from
//! (seed, trajectory index), so results do not depend on worker count or
//! scheduling. Trajectories are processed in fixed-size blocks; each block
//! yields one accumulator per record time. In reproducible mode the block
//! results are folded in block order (a fixed reduction tree, bit-identical
//! for any worker count); otherwise they are reduced pairwise in whatever
//! order the pool delivers them, which is identical up to floating-point
//! reassociation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::observables::{AccumScratch, MomentAccumulator, ObservableContext, ObservableRecord};
use crate::phase_space::{sample_initial, InitialState};
use crate::sde::{step_euler_maruyama, SimConfig, StepScratch, TwaSystem};

/// Trajectories per work unit; fixed so the block partition (and therefore
/// the reproducible reduction tree) does not depend on the worker count.
const BLOCK_SIZE: u64 = 64;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Fold block results in block order for bit-identical output.
    pub reproducible: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: None, reproducible: true }
    }
}

/// Accumulated moments on the record-time grid.
#[derive(Debug, Clone)]
pub struct RunSeries {
    pub times: Vec<f64>,
    pub accumulators: Vec<MomentAccumulator>,
    pub blown_trajectories: u64,
    pub n_traj: u64,
}

impl RunSeries {
    pub fn evaluate(&self, ctx: &ObservableContext) -> Vec<ObservableRecord> {
        self.times
            .iter()
            .zip(&self.accumulators)
            .map(|(t, acc)| ObservableRecord::from_accumulator(*t, acc, ctx))
            .collect()
    }
}

/// Step indices at which observables are recorded: every `sample_stride`
/// steps plus the final step.
pub fn record_steps(config: &SimConfig) -> Vec<u64> {
    let n_steps = config.n_steps();
    let mut steps: Vec<u64> = (0..=n_steps).step_by(config.sample_stride as usize).collect();
    if *steps.last().unwrap() != n_steps {
        steps.push(n_steps);
    }
    steps
}

struct BlockResult {
    accumulators: Vec<MomentAccumulator>,
    blown: u64,
    first_blowup: Option<(u64, u64)>,
}

impl BlockResult {
    fn empty(n: usize, n_records: usize, n_dirs: usize) -> Self {
        Self {
            accumulators: vec![MomentAccumulator::new(n, n_dirs); n_records],
            blown: 0,
            first_blowup: None,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.accumulators.iter_mut().zip(&other.accumulators) {
            a.merge(b);
        }
        self.blown += other.blown;
        if self.first_blowup.is_none() {
            self.first_blowup = other.first_blowup;
        }
        self
    }
}

struct TrajectoryWorker<'a> {
    system: &'a TwaSystem,
    config: &'a SimConfig,
    initial: InitialState,
    ctx: &'a ObservableContext,
    record_at: &'a [u64],
    step_scratch: StepScratch,
    acc_scratch: AccumScratch,
    /// Staged (cosθ, φ) snapshots, folded in only if the trajectory finishes.
    snapshots: Vec<(Vec<f64>, Vec<f64>)>,
}

impl<'a> TrajectoryWorker<'a> {
    fn new(
        system: &'a TwaSystem,
        config: &'a SimConfig,
        initial: InitialState,
        ctx: &'a ObservableContext,
        record_at: &'a [u64],
    ) -> Self {
        let n = system.n();
        Self {
            system,
            config,
            initial,
            ctx,
            record_at,
            step_scratch: StepScratch::new(n),
            acc_scratch: AccumScratch::new(n),
            snapshots: Vec::with_capacity(record_at.len()),
        }
    }

    /// Integrates one trajectory; stages snapshots at record steps.
    fn integrate(&mut self, traj_idx: u64) -> Result<()> {
        let n = self.system.n();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1 + traj_idx);
        let mut point = sample_initial(self.initial, n, &mut rng);
        self.snapshots.clear();

        let n_steps = self.config.n_steps();
        let mut next_record = 0usize;
        for step in 0..=n_steps {
            if next_record < self.record_at.len() && self.record_at[next_record] == step {
                self.snapshots.push((point.cos_theta.clone(), point.phi.clone()));
                next_record += 1;
            }
            if step == n_steps {
                break;
            }
            step_euler_maruyama(
                &mut point,
                self.system,
                self.config.dt,
                &mut rng,
                &mut self.step_scratch,
            )
            .map_err(|e| match e {
                Error::NumericalBlowup { .. } => {
                    Error::NumericalBlowup { trajectory: traj_idx, step }
                }
                other => other,
            })?;
        }
        Ok(())
    }

    fn run_block(&mut self, block_idx: u64) -> BlockResult {
        let n = self.system.n();
        let n_dirs = self.ctx.directions.len();
        let mut result = BlockResult::empty(n, self.record_at.len(), n_dirs);
        let lo = block_idx * BLOCK_SIZE;
        let hi = (lo + BLOCK_SIZE).min(self.config.n_traj);
        for traj in lo..hi {
            match self.integrate(traj) {
                Ok(()) => {
                    for (acc, (c, phi)) in
                        result.accumulators.iter_mut().zip(&self.snapshots)
                    {
                        acc.accumulate(c, phi, self.ctx, &mut self.acc_scratch);
                    }
                }
                Err(Error::NumericalBlowup { trajectory, step }) => {
                    result.blown += 1;
                    if result.first_blowup.is_none() {
                        result.first_blowup = Some((trajectory, step));
                    }
                }
                Err(_) => unreachable!("integration only fails by blow-up"),
            }
        }
        result
    }
}

/// Integrates `config.n_traj` trajectories and returns the accumulated
/// moments at every record time.
///
/// Blown-up trajectories are excluded from the statistics and counted; the
/// run aborts when they exceed 1% of the ensemble.
pub fn run_ensemble(
    system: &TwaSystem,
    initial: InitialState,
    config: &SimConfig,
    ctx: &ObservableContext,
    options: &RunOptions,
) -> Result<RunSeries> {
    config.validate()?;
    let record_at = record_steps(config);
    let n_blocks = config.n_traj.div_ceil(BLOCK_SIZE);

    let result = process_blocks(system, initial, config, ctx, &record_at, n_blocks, options)?;

    if result.blown * 100 > config.n_traj {
        return Err(Error::BlowupFraction { blown: result.blown, total: config.n_traj });
    }
    let times = record_at.iter().map(|s| *s as f64 * config.dt).collect();
    Ok(RunSeries {
        times,
        accumulators: result.accumulators,
        blown_trajectories: result.blown,
        n_traj: config.n_traj,
    })
}

#[cfg(feature = "parallel")]
fn process_blocks(
    system: &TwaSystem,
    initial: InitialState,
    config: &SimConfig,
    ctx: &ObservableContext,
    record_at: &[u64],
    n_blocks: u64,
    options: &RunOptions,
) -> Result<BlockResult> {
    let run_block = |block_idx: u64| {
        let mut worker = TrajectoryWorker::new(system, config, initial, ctx, record_at);
        worker.run_block(block_idx)
    };
    let reduce = |results: Vec<BlockResult>| {
        results
            .into_iter()
            .fold(BlockResult::empty(system.n(), record_at.len(), ctx.directions.len()), BlockResult::merge)
    };

    let work = || -> BlockResult {
        if options.reproducible {
            let results: Vec<BlockResult> = (0..n_blocks).into_par_iter().map(run_block).collect();
            reduce(results)
        } else {
            (0..n_blocks)
                .into_par_iter()
                .map(run_block)
                .reduce(
                    || BlockResult::empty(system.n(), record_at.len(), ctx.directions.len()),
                    BlockResult::merge,
                )
        }
    };

    match options.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::IntegratorFailure(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

#[cfg(not(feature = "parallel"))]
fn process_blocks(
    system: &TwaSystem,
    initial: InitialState,
    config: &SimConfig,
    ctx: &ObservableContext,
    record_at: &[u64],
    n_blocks: u64,
    _options: &RunOptions,
) -> Result<BlockResult> {
    let mut total = BlockResult::empty(system.n(), record_at.len(), ctx.directions.len());
    let mut worker = TrajectoryWorker::new(system, config, initial, ctx, record_at);
    for block_idx in 0..n_blocks {
        total = total.merge(worker.run_block(block_idx));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::dicke_override;
    use approx::assert_relative_eq;

    fn dicke_setup(n: usize) -> (TwaSystem, ObservableContext) {
        let c = dicke_override(n).unwrap();
        let ctx = ObservableContext::new(c.gamma.clone()).with_kuramoto(true);
        (TwaSystem::new(&c, None, 0.0), ctx)
    }

    #[test]
    fn record_grid_includes_start_and_end() {
        let config =
            SimConfig { dt: 0.1, t_final: 1.0, n_traj: 1, seed: 0, sample_stride: 3 };
        assert_eq!(record_steps(&config), vec![0, 3, 6, 9, 10]);
    }

    #[test]
    fn single_trajectory_equals_n_traj_one() {
        let (system, ctx) = dicke_setup(2);
        let config = SimConfig { dt: 1e-2, t_final: 0.1, n_traj: 1, seed: 42, sample_stride: 2 };
        let series =
            run_ensemble(&system, InitialState::AllExcited, &config, &ctx, &RunOptions::default())
                .unwrap();
        assert_eq!(series.accumulators[0].count, 1);

        // hand-rolled single trajectory with the same stream
        let record_at = record_steps(&config);
        let mut worker = TrajectoryWorker::new(&system, &config, InitialState::AllExcited, &ctx, &record_at);
        worker.integrate(0).unwrap();
        let mut acc = MomentAccumulator::new(2, 0);
        let mut scratch = AccumScratch::new(2);
        let (c, phi) = &worker.snapshots[worker.snapshots.len() - 1];
        acc.accumulate(c, phi, &ctx, &mut scratch);
        let last = series.accumulators.last().unwrap();
        assert_eq!(acc.sum_cos, last.sum_cos);
        assert_eq!(acc.sum_a, last.sum_a);
    }

    #[test]
    fn bit_identical_across_worker_counts() {
        let (system, ctx) = dicke_setup(3);
        let config =
            SimConfig { dt: 5e-3, t_final: 0.25, n_traj: 300, seed: 7, sample_stride: 10 };
        let run = |workers| {
            run_ensemble(
                &system,
                InitialState::AllExcited,
                &config,
                &ctx,
                &RunOptions { workers: Some(workers), reproducible: true },
            )
            .unwrap()
        };
        let a = run(1);
        let b = run(2);
        let c = run(4);
        for ((x, y), z) in a.accumulators.iter().zip(&b.accumulators).zip(&c.accumulators) {
            assert_eq!(x, y);
            assert_eq!(y, z);
        }
    }

    #[test]
    fn nonreproducible_mode_matches_statistically() {
        let (system, ctx) = dicke_setup(2);
        let config =
            SimConfig { dt: 5e-3, t_final: 0.2, n_traj: 256, seed: 3, sample_stride: 8 };
        let a = run_ensemble(
            &system,
            InitialState::AllExcited,
            &config,
            &ctx,
            &RunOptions { workers: Some(2), reproducible: true },
        )
        .unwrap();
        let b = run_ensemble(
            &system,
            InitialState::AllExcited,
            &config,
            &ctx,
            &RunOptions { workers: Some(2), reproducible: false },
        )
        .unwrap();
        for (x, y) in a.accumulators.iter().zip(&b.accumulators) {
            assert_eq!(x.count, y.count);
            assert_relative_eq!(
                x.excitation_number(),
                y.excitation_number(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn permutation_symmetry_of_dicke_statistics() {
        // permuting atom indices leaves the Dicke ensemble statistics
        // invariant: every atom sees identical couplings and iid draws
        let (system, ctx) = dicke_setup(4);
        let config =
            SimConfig { dt: 5e-3, t_final: 0.5, n_traj: 4000, seed: 11, sample_stride: 25 };
        let series =
            run_ensemble(&system, InitialState::AllExcited, &config, &ctx, &RunOptions::default())
                .unwrap();
        let last = series.accumulators.last().unwrap();
        let means: Vec<f64> =
            last.sum_cos.iter().map(|s| s / last.count as f64).collect();
        let grand = means.iter().sum::<f64>() / 4.0;
        for m in &means {
            assert!((m - grand).abs() < 0.05, "per-atom mean {m} vs grand {grand}");
        }
    }
}
