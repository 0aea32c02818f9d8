//! The SCMC engine: a particle population pushed through a schedule of
//! bridging densities by reweighting, ESS-triggered resampling, and
//! covariance-shaped Metropolis moves, with hard constraint rejection at the
//! end.

pub mod bridge;
pub mod kernel;
pub mod resample;

pub use bridge::{
    bridge_log_density, constrained_log_density, lambda_log_indicator, soft_indicator_log,
    softplus, BridgeSchedule, ConstraintMode, ConstraintSpec, DensitySchedule, GeometricBridge,
    LambdaAscent, HARD_KAPPA_TOL,
};
pub use kernel::{MatrixWalk, ScalarWalk, SimplexWalk, WalkKernel};
pub use resample::{
    effective_sample_size, log_sum_exp, normalize_log_weights, resample_indices, ResampleScheme,
};

use crate::error::{Error, Result};
use crate::sampling::RngStream;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Everything the schedules need to know about one point: target and
/// reference log densities plus the constraint values κ_j, all computed in
/// one pass by the problem definition.
#[derive(Clone, Debug, PartialEq)]
pub struct Eval {
    pub log_target: f64,
    pub log_reference: f64,
    pub kappas: Vec<f64>,
}

impl Eval {
    pub fn unconstrained(log_target: f64, log_reference: f64) -> Self {
        Self {
            log_target,
            log_reference,
            kappas: Vec::new(),
        }
    }
}

/// A sampling problem: the point type being walked and the density/constraint
/// evaluation at a point.
pub trait Problem: Sync {
    type Point: Clone + Send + Sync;
    fn evaluate(&self, point: &Self::Point) -> Eval;
}

/// Which coordinate system the walk kernel moves in. The engine itself takes
/// the kernel as a value; pipelines use this switch to build it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkMode {
    MatrixSpace,
    SimplexSpace,
}

/// Run parameters of the SCMC loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScmcConfig {
    pub n_particles: usize,
    /// Bridge steps N_τ (used by the τ schedule; λ ladders take their step
    /// count from the grid instead).
    pub n_steps: usize,
    /// Metropolis iterations per bridge step.
    pub n_mc: usize,
    /// Resample when ESS < fraction·N_s.
    pub ess_threshold_fraction: f64,
    /// Extra Metropolis passes after the last bridge step.
    pub final_mc_iterations: usize,
    /// Initial proposal scale multiplier (adapted per step unless disabled).
    pub step_scale: f64,
    pub adapt_step_scale: bool,
    pub walk_mode: WalkMode,
    pub resample_scheme: ResampleScheme,
    /// Resample unconditionally before the final Metropolis passes so the
    /// emitted sample is unweighted.
    pub final_resample: bool,
    pub seed: u64,
}

impl Default for ScmcConfig {
    fn default() -> Self {
        Self {
            n_particles: 1000,
            n_steps: 100,
            n_mc: 15,
            ess_threshold_fraction: 0.8,
            final_mc_iterations: 20,
            step_scale: 1.0,
            adapt_step_scale: true,
            walk_mode: WalkMode::MatrixSpace,
            resample_scheme: ResampleScheme::Multinomial,
            final_resample: true,
            seed: 0,
        }
    }
}

impl ScmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidParameter {
                name: "n_particles",
                reason: "need at least two particles".into(),
            });
        }
        if self.n_steps == 0 || self.n_mc == 0 {
            return Err(Error::InvalidParameter {
                name: "n_steps/n_mc",
                reason: "step counts must be positive".into(),
            });
        }
        if !(self.ess_threshold_fraction > 0.0 && self.ess_threshold_fraction <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "ess_threshold_fraction",
                reason: format!("must be in (0,1], got {}", self.ess_threshold_fraction),
            });
        }
        if !(self.step_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "step_scale",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// The weighted particle population at one schedule step. Log weights are
/// kept normalized (Σ exp = 1).
#[derive(Clone, Debug)]
pub struct ParticleEnsemble<P> {
    pub points: Vec<P>,
    pub evals: Vec<Eval>,
    pub log_weights: Vec<f64>,
    /// Index of the schedule step this population currently represents.
    pub generation: usize,
}

impl<P> ParticleEnsemble<P> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-step diagnostics record.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    /// Schedule parameter (τ_i or λ_j).
    pub value: f64,
    /// ESS measured on the freshly reweighted population.
    pub ess: f64,
    pub resampled: bool,
    /// Mean Metropolis acceptance rate over the step's sweeps.
    pub acceptance: f64,
    pub step_scale: f64,
}

/// Hook invoked after each step's propagation; used for per-step statistics
/// (λ-region averages, demo snapshots).
pub trait RunObserver<P> {
    fn on_step(&mut self, ensemble: &ParticleEnsemble<P>, record: &StepRecord);
}

/// No-op observer.
pub struct NoObserver;

impl<P> RunObserver<P> for NoObserver {
    fn on_step(&mut self, _: &ParticleEnsemble<P>, _: &StepRecord) {}
}

/// Final population plus everything needed to audit the run.
#[derive(Clone, Debug)]
pub struct RunOutput<P> {
    pub ensemble: ParticleEnsemble<P>,
    /// Hard-form constraint verdict per particle, in ensemble order.
    pub accepted: Vec<bool>,
    pub records: Vec<StepRecord>,
    pub final_acceptance: f64,
    pub final_step_scale: f64,
}

impl<P> RunOutput<P> {
    pub fn n_accepted(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }

    pub fn yield_fraction(&self) -> f64 {
        self.n_accepted() as f64 / self.ensemble.len() as f64
    }

    pub fn accepted_points(&self) -> impl Iterator<Item = (&P, &Eval)> {
        self.ensemble
            .points
            .iter()
            .zip(&self.ensemble.evals)
            .zip(&self.accepted)
            .filter_map(|(pe, &ok)| ok.then_some(pe))
    }
}

// Substream tags: every random decision in a run draws from
// seed/(tag, step, particle), which makes runs independent of thread count.
const TAG_INIT: u64 = 1;
const TAG_PROPAGATE: u64 = 2;
const TAG_RESAMPLE: u64 = 3;
const TAG_FINAL_RESAMPLE: u64 = 4;
const TAG_FINAL_PROPAGATE: u64 = 5;

/// Multiplies every weight by (new density)/(old density) at its particle,
/// then renormalizes. A non-finite log ratio removes the particle (weight 0).
pub fn reweight<P>(
    ensemble: &mut ParticleEnsemble<P>,
    old_log_density: impl Fn(&P, &Eval) -> f64,
    new_log_density: impl Fn(&P, &Eval) -> f64,
) -> Result<()> {
    for ((point, eval), w) in ensemble
        .points
        .iter()
        .zip(&ensemble.evals)
        .zip(ensemble.log_weights.iter_mut())
    {
        let increment = new_log_density(point, eval) - old_log_density(point, eval);
        if increment.is_finite() {
            *w += increment;
        } else {
            *w = f64::NEG_INFINITY;
        }
    }
    normalize_log_weights(&mut ensemble.log_weights)
}

/// Draws a same-size population proportional to the weights and resets them
/// to uniform, so ESS = N_s afterwards.
pub fn resample<P: Clone>(
    ensemble: &mut ParticleEnsemble<P>,
    scheme: ResampleScheme,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<()> {
    let n = ensemble.len();
    let indices = resample_indices(&ensemble.log_weights, n, scheme, rng)?;
    ensemble.points = indices.iter().map(|&i| ensemble.points[i].clone()).collect();
    ensemble.evals = indices.iter().map(|&i| ensemble.evals[i].clone()).collect();
    ensemble.log_weights = vec![-(n as f64).ln(); n];
    Ok(())
}

/// Runs `iterations` Metropolis sweeps on every particle in parallel under
/// the given log density; returns the mean acceptance rate. Out-of-domain
/// proposals count as rejected; a particle currently out of support accepts
/// any in-support candidate.
pub fn metropolis_propagate<Pr, K>(
    ensemble: &mut ParticleEnsemble<Pr::Point>,
    problem: &Pr,
    log_density: impl Fn(&Eval) -> f64 + Sync,
    kernel: &K,
    scale: f64,
    iterations: usize,
    stream: RngStream,
) -> f64
where
    Pr: Problem,
    K: WalkKernel<Pr::Point>,
{
    if iterations == 0 || ensemble.is_empty() {
        return 0.0;
    }
    let accepted: u64 = ensemble
        .points
        .par_iter_mut()
        .zip(ensemble.evals.par_iter_mut())
        .enumerate()
        .map(|(j, (point, eval))| {
            let mut rng = stream.substream(&[j as u64]).rng();
            let mut current_ld = log_density(eval);
            let mut hits = 0u64;
            for _ in 0..iterations {
                let Some(candidate) = kernel.propose(point, scale, &mut rng) else {
                    continue;
                };
                let cand_eval = problem.evaluate(&candidate);
                let cand_ld = log_density(&cand_eval);
                if cand_ld == f64::NEG_INFINITY {
                    continue;
                }
                let accept = if current_ld == f64::NEG_INFINITY {
                    true
                } else {
                    let delta = cand_ld - current_ld;
                    // u ∈ (0,1]; NaN delta rejects
                    delta >= 0.0 || (1.0 - rng.random::<f64>()).ln() < delta
                };
                if accept {
                    *point = candidate;
                    *eval = cand_eval;
                    current_ld = cand_ld;
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    accepted as f64 / (ensemble.len() * iterations) as f64
}

/// The step-0 population exactly as [`scmc_run`] would draw it for this
/// config, for emitting the reference cloud alongside a run's outputs.
pub fn initial_ensemble<Pr, F>(
    problem: &Pr,
    config: &ScmcConfig,
    init: F,
) -> ParticleEnsemble<Pr::Point>
where
    Pr: Problem,
    F: Fn(usize, &mut rand_chacha::ChaCha8Rng) -> Pr::Point + Sync,
{
    initialize(problem, &init, config.n_particles, RngStream::new(config.seed))
}

/// Initializes the population: one call per particle with its own stream.
fn initialize<Pr, F>(
    problem: &Pr,
    init: &F,
    n: usize,
    stream: RngStream,
) -> ParticleEnsemble<Pr::Point>
where
    Pr: Problem,
    F: Fn(usize, &mut rand_chacha::ChaCha8Rng) -> Pr::Point + Sync,
{
    let points: Vec<Pr::Point> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream.substream(&[TAG_INIT, j as u64]).rng();
            init(j, &mut rng)
        })
        .collect();
    let evals: Vec<Eval> = points.par_iter().map(|p| problem.evaluate(p)).collect();
    ParticleEnsemble {
        points,
        evals,
        log_weights: vec![-(n as f64).ln(); n],
        generation: 0,
    }
}

/// The full loop. `init` draws the step-0 population (typically from the
/// reference distribution, or a rejection-seeded region for λ ladders); the schedule
/// provides the per-step densities and the final hard cut.
pub fn scmc_run<Pr, S, K, F>(
    problem: &Pr,
    schedule: &S,
    kernel: &mut K,
    config: &ScmcConfig,
    init: F,
) -> Result<RunOutput<Pr::Point>>
where
    Pr: Problem,
    S: DensitySchedule,
    K: WalkKernel<Pr::Point>,
    F: Fn(usize, &mut rand_chacha::ChaCha8Rng) -> Pr::Point + Sync,
{
    scmc_run_observed(problem, schedule, kernel, config, init, &mut NoObserver)
}

/// `scmc_run` with a per-step observation hook.
pub fn scmc_run_observed<Pr, S, K, F, O>(
    problem: &Pr,
    schedule: &S,
    kernel: &mut K,
    config: &ScmcConfig,
    init: F,
    observer: &mut O,
) -> Result<RunOutput<Pr::Point>>
where
    Pr: Problem,
    S: DensitySchedule,
    K: WalkKernel<Pr::Point>,
    F: Fn(usize, &mut rand_chacha::ChaCha8Rng) -> Pr::Point + Sync,
    O: RunObserver<Pr::Point>,
{
    config.validate()?;
    let stream = RngStream::new(config.seed);
    let n = config.n_particles;
    let mut ensemble = initialize(problem, &init, n, stream);
    let mut records = Vec::with_capacity(schedule.n_steps());
    let mut ess_trace = Vec::with_capacity(schedule.n_steps());
    let mut scale = config.step_scale;

    let degenerate = |step: usize, trace: &[f64]| Error::DegenerateEnsemble {
        step,
        ess_trace: trace.to_vec(),
    };

    for step in 1..=schedule.n_steps() {
        reweight(
            &mut ensemble,
            |_, e| schedule.log_density(e, step - 1),
            |_, e| schedule.log_density(e, step),
        )
        .map_err(|_| degenerate(step, &ess_trace))?;
        let ess = effective_sample_size(&ensemble.log_weights)
            .map_err(|_| degenerate(step, &ess_trace))?;
        ess_trace.push(ess);

        let resampled = ess < config.ess_threshold_fraction * n as f64;
        if resampled {
            let mut rng = stream.substream(&[TAG_RESAMPLE, step as u64]).rng();
            resample(&mut ensemble, config.resample_scheme, &mut rng)
                .map_err(|_| degenerate(step, &ess_trace))?;
        }

        kernel.refresh(&ensemble.points);
        let acceptance = metropolis_propagate(
            &mut ensemble,
            problem,
            |e| schedule.log_density(e, step),
            kernel,
            scale,
            config.n_mc,
            stream.substream(&[TAG_PROPAGATE, step as u64]),
        );
        ensemble.generation = step;

        let record = StepRecord {
            step,
            value: schedule.value(step),
            ess,
            resampled,
            acceptance,
            step_scale: scale,
        };
        observer.on_step(&ensemble, &record);
        records.push(record);

        if config.adapt_step_scale {
            if acceptance < 0.2 {
                scale = (scale * 0.7).max(1e-6);
            } else if acceptance > 0.5 {
                scale = (scale * 1.4).min(1e3);
            }
        }
    }

    let last = schedule.n_steps();
    if config.final_resample {
        let mut rng = stream.substream(&[TAG_FINAL_RESAMPLE]).rng();
        resample(&mut ensemble, config.resample_scheme, &mut rng)
            .map_err(|_| degenerate(last, &ess_trace))?;
    }
    kernel.refresh(&ensemble.points);
    let final_acceptance = metropolis_propagate(
        &mut ensemble,
        problem,
        |e| schedule.log_density(e, last),
        kernel,
        scale,
        config.final_mc_iterations,
        stream.substream(&[TAG_FINAL_PROPAGATE]),
    );

    let accepted: Vec<bool> = ensemble
        .evals
        .iter()
        .map(|e| schedule.final_accept(e))
        .collect();

    Ok(RunOutput {
        ensemble,
        accepted,
        records,
        final_acceptance,
        final_step_scale: scale,
    })
}

/// Post-run filtering pass: extra Metropolis iterations under `log_density`
/// with an arbitrary kernel (e.g. a different propagation direction — an
/// isotropic preset is available on `MatrixWalk`), after which only particles
/// passing `keep` survive. The choice of kernel/direction here is heuristic;
/// the stationary density is unchanged by construction.
pub fn mcmc_filter<Pr, K>(
    ensemble: &mut ParticleEnsemble<Pr::Point>,
    problem: &Pr,
    log_density: impl Fn(&Eval) -> f64 + Sync,
    kernel: &mut K,
    scale: f64,
    iterations: usize,
    stream: RngStream,
    keep: impl Fn(&Pr::Point, &Eval) -> bool,
) -> usize
where
    Pr: Problem,
    K: WalkKernel<Pr::Point>,
{
    kernel.refresh(&ensemble.points);
    metropolis_propagate(
        ensemble,
        problem,
        log_density,
        kernel,
        scale,
        iterations,
        stream,
    );
    let mask: Vec<bool> = ensemble
        .points
        .iter()
        .zip(&ensemble.evals)
        .map(|(p, e)| keep(p, e))
        .collect();
    let mut keep_iter = mask.iter();
    ensemble.points.retain(|_| *keep_iter.next().unwrap());
    let mut keep_iter = mask.iter();
    ensemble.evals.retain(|_| *keep_iter.next().unwrap());
    let mut keep_iter = mask.iter();
    ensemble.log_weights.retain(|_| *keep_iter.next().unwrap());
    if !ensemble.log_weights.is_empty() {
        let _ = normalize_log_weights(&mut ensemble.log_weights);
    }
    ensemble.len()
}
