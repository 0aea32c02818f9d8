//! Direct SCMC sampling of a Dirichlet target, in either walk mode, with an
//! optional content curve from the final sample.

use std::io::Write as _;

use super::{metadata_lines, steps_csv, target_peak, KappaFraction};
use crate::config::{RunConfig, TargetSampleSpec};
use crate::dump::{write_state_dump, RunDir};
use crate::engine::{
    scmc_run_observed, ConstraintSpec, GeometricBridge, MatrixWalk, ScmcConfig, SimplexWalk,
    StepRecord, WalkMode,
};
use crate::error::Result;
use crate::otj::content_from_sample;
use crate::problems::{MatrixDirichletProblem, SimplexDirichletProblem};
use crate::qstate::DensityMatrix;
use crate::sampling::{sample_dirichlet, sample_wishart_state, DirichletParams};

/// Walk-agnostic results of one direct sampling run.
pub struct TargetRun {
    pub records: Vec<StepRecord>,
    /// Fraction of the ensemble that is physical, per step.
    pub physical_fraction: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Probability coordinates of the final particles (simplex walks only).
    pub probs: Option<Vec<Vec<f64>>>,
    /// Target log density per final particle.
    pub log_f: Vec<f64>,
    pub accepted: Vec<bool>,
    pub final_acceptance: f64,
}

impl TargetRun {
    pub fn accepted_log_f(&self) -> Vec<f64> {
        self.log_f
            .iter()
            .zip(&self.accepted)
            .filter_map(|(lf, &ok)| ok.then_some(*lf))
            .collect()
    }

    pub fn n_accepted(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }
}

/// Runs the bridge from the requested reference to the target and returns the
/// final ensemble in both state and (where applicable) probability form.
pub fn draw(engine: &ScmcConfig, spec: &TargetSampleSpec) -> Result<TargetRun> {
    let target = spec.target.build()?;
    match spec.walk {
        WalkMode::SimplexSpace => {
            let n = target.n_outcomes();
            let reference = spec.reference.simplex_params(n)?;
            let init_params = match &reference {
                Some(params) => params.clone(),
                None => DirichletParams::new(vec![0.0; n])?,
            };
            let mut problem = SimplexDirichletProblem::new(target);
            if let Some(params) = reference {
                problem = problem.with_reference(params)?;
            }
            let schedule = GeometricBridge::new(
                engine.n_steps,
                vec![ConstraintSpec::soft(spec.physicality_sharpness)],
            )?;
            let mut kernel = SimplexWalk::new(n);
            let mut observer = KappaFraction::default();
            let output = scmc_run_observed(
                &problem,
                &schedule,
                &mut kernel,
                engine,
                |_, rng| sample_dirichlet(&init_params, rng),
                &mut observer,
            )?;
            let states = output
                .ensemble
                .points
                .iter()
                .map(|p| problem.state_of(p))
                .collect();
            let log_f = output
                .ensemble
                .evals
                .iter()
                .map(|e| e.log_target)
                .collect();
            Ok(TargetRun {
                records: output.records,
                physical_fraction: observer.fractions,
                states,
                probs: Some(output.ensemble.points),
                log_f,
                accepted: output.accepted,
                final_acceptance: output.final_acceptance,
            })
        }
        WalkMode::MatrixSpace => {
            let d = target.dim();
            let reference = spec.reference.matrix_params(d)?;
            let problem = MatrixDirichletProblem::new(target, reference.clone())?;
            let schedule = GeometricBridge::new(engine.n_steps, Vec::new())?;
            let mut kernel = MatrixWalk::new(d, true);
            let mut observer = KappaFraction::default();
            let output = scmc_run_observed(
                &problem,
                &schedule,
                &mut kernel,
                engine,
                |_, rng| sample_wishart_state(&reference, rng),
                &mut observer,
            )?;
            let log_f = output
                .ensemble
                .evals
                .iter()
                .map(|e| e.log_target)
                .collect();
            Ok(TargetRun {
                records: output.records,
                physical_fraction: observer.fractions,
                states: output.ensemble.points,
                probs: None,
                log_f,
                accepted: output.accepted,
                final_acceptance: output.final_acceptance,
            })
        }
    }
}

pub fn run(config: &RunConfig, spec: &TargetSampleSpec, dir: &mut RunDir) -> Result<Vec<String>> {
    let target = spec.target.build()?;
    let meta = metadata_lines(config, &target.dim().to_string())?;
    let sample = draw(&config.engine, spec)?;

    dir.write_file(
        "steps.csv",
        &steps_csv(
            &meta,
            &sample.records,
            Some(("physical_fraction", &sample.physical_fraction)),
        )?,
    )?;

    // Final ensemble with per-particle diagnostics; probability coordinates
    // are appended for simplex walks.
    let accepted_col: Vec<f64> = sample.accepted.iter().map(|&a| f64::from(u8::from(a))).collect();
    let mut extras: Vec<(String, Vec<f64>)> = vec![
        ("log_f".into(), sample.log_f.clone()),
        ("accepted".into(), accepted_col),
    ];
    if let Some(probs) = &sample.probs {
        for k in 0..target.n_outcomes() {
            extras.push((format!("p_{k}"), probs.iter().map(|p| p[k]).collect()));
        }
    }
    let extra_refs: Vec<(&str, &[f64])> = extras
        .iter()
        .map(|(name, values)| (name.as_str(), values.as_slice()))
        .collect();
    let mut dump = Vec::new();
    write_state_dump(&mut dump, &meta, target.dim(), &sample.states, &extra_refs)?;
    dir.write_file("final_states.csv", &dump)?;

    let mut lines = vec![
        format!(
            "accepted {} of {} states (yield {:.3})",
            sample.n_accepted(),
            sample.accepted.len(),
            sample.n_accepted() as f64 / sample.accepted.len() as f64
        ),
        format!(
            "physical fraction: {:.3} initial step, {:.3} final",
            sample.physical_fraction.first().copied().unwrap_or(f64::NAN),
            sample.physical_fraction.last().copied().unwrap_or(f64::NAN)
        ),
    ];

    if let Some(grid_spec) = &spec.content_grid {
        let grid = grid_spec.to_grid()?;
        let (_, _, log_peak) = target_peak(&target)?;
        let content = content_from_sample(&sample.accepted_log_f(), log_peak, grid.values())?;
        let mut csv = Vec::new();
        for line in &meta {
            writeln!(csv, "# {line}")?;
        }
        writeln!(csv, "# log_peak = {log_peak:e}")?;
        writeln!(csv, "lambda,content")?;
        for (lambda, c) in grid.values().iter().zip(&content) {
            writeln!(csv, "{lambda:e},{c:e}")?;
        }
        dir.write_file("content.csv", &csv)?;
        lines.push(format!(
            "content curve over {} λ points written (c at λ_top = {:.4})",
            grid.len(),
            content.first().copied().unwrap_or(f64::NAN)
        ));
    }
    Ok(lines)
}
