//! Small illustrative runs: 1D tempering from a single-peak reference to a
//! two-peak target, and the single-qubit walk from the uniform trine simplex
//! into the physical disk.

use std::io::Write as _;

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{metadata_lines, steps_csv, KappaFraction};
use crate::config::{Demo1dSpec, RunConfig};
use crate::dump::RunDir;
use crate::engine::{
    initial_ensemble, scmc_run_observed, ConstraintSpec, Eval, GeometricBridge,
    ParticleEnsemble, Problem, RunObserver, ScalarWalk, SimplexWalk, StepRecord,
};
use crate::error::Result;
use crate::problems::SimplexDirichletProblem;
use crate::qstate::build_trine_pom;
use crate::sampling::sample_dirichlet;
use crate::sampling::DirichletParams;
use crate::targets::DirichletTarget;

// The 1D demo's distributions: a deliberately lopsided two-peak target
// reached from one broad reference peak.
pub const TWO_PEAK_WEIGHTS: [f64; 2] = [0.65, 0.35];
pub const TWO_PEAK_MEANS: [f64; 2] = [-2.5, 2.0];
pub const TWO_PEAK_SIGMAS: [f64; 2] = [0.7, 0.5];
pub const REFERENCE_SIGMA: f64 = 3.0;

/// Soft-physicality sharpness of the qubit demo: hard enough that the final
/// sample is uniform on the disk well inside statistical resolution, soft
/// enough that early clouds visibly overhang the boundary.
pub const QUBIT_DEMO_SHARPNESS: f64 = 250.0;

fn normal_log_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn normal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    0.5 * libm::erfc(-(x - mu) / (sigma * std::f64::consts::SQRT_2))
}

pub fn two_peak_log_density(x: f64) -> f64 {
    let a = TWO_PEAK_WEIGHTS[0].ln() + normal_log_pdf(x, TWO_PEAK_MEANS[0], TWO_PEAK_SIGMAS[0]);
    let b = TWO_PEAK_WEIGHTS[1].ln() + normal_log_pdf(x, TWO_PEAK_MEANS[1], TWO_PEAK_SIGMAS[1]);
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

pub fn two_peak_cdf(x: f64) -> f64 {
    TWO_PEAK_WEIGHTS[0] * normal_cdf(x, TWO_PEAK_MEANS[0], TWO_PEAK_SIGMAS[0])
        + TWO_PEAK_WEIGHTS[1] * normal_cdf(x, TWO_PEAK_MEANS[1], TWO_PEAK_SIGMAS[1])
}

pub fn reference_log_density(x: f64) -> f64 {
    normal_log_pdf(x, 0.0, REFERENCE_SIGMA)
}

/// Kolmogorov–Smirnov distance of a sample to a CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut worst = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let c = cdf(*x);
        worst = worst.max((c - i as f64 / n).abs());
        worst = worst.max((c - (i as f64 + 1.0) / n).abs());
    }
    worst
}

struct TwoPeakProblem;

impl Problem for TwoPeakProblem {
    type Point = f64;

    fn evaluate(&self, x: &f64) -> Eval {
        Eval::unconstrained(two_peak_log_density(*x), reference_log_density(*x))
    }
}

/// Weight fraction landing in each of `bins` equal bins over [lo, hi].
fn weighted_histogram<P>(
    ensemble: &ParticleEnsemble<P>,
    coord: impl Fn(&P) -> f64,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Vec<f64> {
    let mut fractions = vec![0.0; bins];
    let width = (hi - lo) / bins as f64;
    for (point, lw) in ensemble.points.iter().zip(&ensemble.log_weights) {
        let x = coord(point);
        if x < lo || x >= hi {
            continue;
        }
        let k = ((x - lo) / width) as usize;
        fractions[k.min(bins - 1)] += lw.exp();
    }
    fractions
}

struct HistogramObserver {
    lo: f64,
    hi: f64,
    bins: usize,
    rows: Vec<(usize, f64, Vec<f64>)>,
}

impl RunObserver<f64> for HistogramObserver {
    fn on_step(&mut self, ensemble: &ParticleEnsemble<f64>, record: &StepRecord) {
        let h = weighted_histogram(ensemble, |x| *x, self.lo, self.hi, self.bins);
        self.rows.push((record.step, record.value, h));
    }
}

const DEMO_1D_RANGE: (f64, f64) = (-10.0, 10.0);

pub fn run_demo_1d(config: &RunConfig, spec: &Demo1dSpec, dir: &mut RunDir) -> Result<Vec<String>> {
    let meta = metadata_lines(config, "1")?;
    let problem = TwoPeakProblem;
    let schedule = GeometricBridge::new(config.engine.n_steps, Vec::new())?;
    let mut kernel = ScalarWalk::new();
    let init = |_: usize, rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        REFERENCE_SIGMA * rng.sample::<f64, _>(StandardNormal)
    };
    let (lo, hi) = DEMO_1D_RANGE;
    let mut observer = HistogramObserver {
        lo,
        hi,
        bins: spec.bins,
        rows: Vec::new(),
    };
    // the τ=0 snapshot comes from the same draw the run itself starts with
    let start = initial_ensemble(&problem, &config.engine, init);
    observer.rows.push((
        0,
        0.0,
        weighted_histogram(&start, |x| *x, lo, hi, spec.bins),
    ));
    let output = scmc_run_observed(
        &problem,
        &schedule,
        &mut kernel,
        &config.engine,
        init,
        &mut observer,
    )?;

    dir.write_file("steps.csv", &steps_csv(&meta, &output.records, None)?)?;

    let width = (hi - lo) / spec.bins as f64;
    let mut hist = Vec::new();
    for line in &meta {
        writeln!(hist, "# {line}")?;
    }
    writeln!(hist, "step,tau,bin_lo,bin_hi,fraction")?;
    for (step, tau, fractions) in &observer.rows {
        for (k, f) in fractions.iter().enumerate() {
            let b_lo = lo + k as f64 * width;
            writeln!(hist, "{step},{tau:e},{b_lo:e},{:e},{f:e}", b_lo + width)?;
        }
    }
    dir.write_file("histograms.csv", &hist)?;

    let mut density = Vec::new();
    for line in &meta {
        writeln!(density, "# {line}")?;
    }
    writeln!(density, "x,target_density,reference_density")?;
    for i in 0..=600 {
        let x = lo + (hi - lo) * i as f64 / 600.0;
        writeln!(
            density,
            "{x:e},{:e},{:e}",
            two_peak_log_density(x).exp(),
            reference_log_density(x).exp()
        )?;
    }
    dir.write_file("exact_densities.csv", &density)?;

    let mut sample = Vec::new();
    for line in &meta {
        writeln!(sample, "# {line}")?;
    }
    writeln!(sample, "x")?;
    for x in &output.ensemble.points {
        writeln!(sample, "{x:e}")?;
    }
    dir.write_file("final_sample.csv", &sample)?;

    let ks = ks_distance(&output.ensemble.points, two_peak_cdf);
    let left = output
        .ensemble
        .points
        .iter()
        .filter(|&&x| x < 0.0)
        .count() as f64
        / output.ensemble.len() as f64;
    Ok(vec![
        format!("KS distance of the final sample to the exact CDF: {ks:.4}"),
        format!(
            "left-peak mass {left:.3} (exact {:.3})",
            TWO_PEAK_WEIGHTS[0]
        ),
    ])
}

/// Trine coordinates of a probability vector: an affine map under which the
/// simplex is an equilateral triangle and the physical set the unit disk.
pub fn trine_xy(p: &[f64]) -> (f64, f64) {
    (3.0 * p[0] - 1.0, 3.0f64.sqrt() * (p[1] - p[2]))
}

struct CloudObserver {
    rows: Vec<(usize, f64, Vec<(f64, f64, f64)>)>,
}

impl CloudObserver {
    fn snapshot(&mut self, step: usize, tau: f64, ensemble: &ParticleEnsemble<Vec<f64>>) {
        let points = ensemble
            .points
            .iter()
            .zip(&ensemble.log_weights)
            .map(|(p, lw)| {
                let (x, y) = trine_xy(p);
                (x, y, lw.exp())
            })
            .collect();
        self.rows.push((step, tau, points));
    }
}

impl RunObserver<Vec<f64>> for CloudObserver {
    fn on_step(&mut self, ensemble: &ParticleEnsemble<Vec<f64>>, record: &StepRecord) {
        self.snapshot(record.step, record.value, ensemble);
    }
}

pub fn run_demo_qubit(config: &RunConfig, dir: &mut RunDir) -> Result<Vec<String>> {
    let meta = metadata_lines(config, "2")?;
    let target = DirichletTarget::new(build_trine_pom(), vec![0.0; 3])?;
    let problem = SimplexDirichletProblem::new(target);
    let schedule = GeometricBridge::new(
        config.engine.n_steps,
        vec![ConstraintSpec::soft(QUBIT_DEMO_SHARPNESS)],
    )?;
    let mut kernel = SimplexWalk::new(3);
    let flat = DirichletParams::new(vec![0.0; 3])?;
    let init =
        |_: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { sample_dirichlet(&flat, rng) };

    let mut clouds = CloudObserver { rows: Vec::new() };
    let mut physical = KappaFraction::default();
    let start = initial_ensemble(&problem, &config.engine, init);
    clouds.snapshot(0, 0.0, &start);

    struct Both<'a>(&'a mut CloudObserver, &'a mut KappaFraction);
    impl RunObserver<Vec<f64>> for Both<'_> {
        fn on_step(&mut self, ensemble: &ParticleEnsemble<Vec<f64>>, record: &StepRecord) {
            self.0.on_step(ensemble, record);
            self.1.on_step(ensemble, record);
        }
    }
    let output = scmc_run_observed(
        &problem,
        &schedule,
        &mut kernel,
        &config.engine,
        init,
        &mut Both(&mut clouds, &mut physical),
    )?;

    dir.write_file(
        "steps.csv",
        &steps_csv(
            &meta,
            &output.records,
            Some(("physical_fraction", &physical.fractions)),
        )?,
    )?;

    let mut cloud_csv = Vec::new();
    for line in &meta {
        writeln!(cloud_csv, "# {line}")?;
    }
    writeln!(cloud_csv, "step,tau,x,y,weight")?;
    for (step, tau, points) in &clouds.rows {
        for (x, y, w) in points {
            writeln!(cloud_csv, "{step},{tau:e},{x:e},{y:e},{w:e}")?;
        }
    }
    dir.write_file("clouds.csv", &cloud_csv)?;

    let mut accepted_csv = Vec::new();
    for line in &meta {
        writeln!(accepted_csv, "# {line}")?;
    }
    writeln!(accepted_csv, "x,y")?;
    let mut n_accepted = 0usize;
    for (p, _) in output.accepted_points() {
        let (x, y) = trine_xy(p);
        writeln!(accepted_csv, "{x:e},{y:e}")?;
        n_accepted += 1;
    }
    dir.write_file("accepted_points.csv", &accepted_csv)?;

    let mut geometry = Vec::new();
    writeln!(geometry, "kind,x,y")?;
    for k in 0..=3 {
        let phi = 2.0 * std::f64::consts::PI * (k % 3) as f64 / 3.0;
        writeln!(geometry, "triangle,{:e},{:e}", 2.0 * phi.cos(), 2.0 * phi.sin())?;
    }
    for k in 0..=360 {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / 360.0;
        writeln!(geometry, "circle,{:e},{:e}", phi.cos(), phi.sin())?;
    }
    dir.write_file("geometry.csv", &geometry)?;

    Ok(vec![
        format!(
            "accepted {} of {} points (yield {:.3})",
            n_accepted,
            output.ensemble.len(),
            output.yield_fraction()
        ),
        format!(
            "physical fraction went {:.3} → {:.3} across the bridge",
            physical.fractions.first().copied().unwrap_or(f64::NAN),
            physical.fractions.last().copied().unwrap_or(f64::NAN)
        ),
    ])
}
