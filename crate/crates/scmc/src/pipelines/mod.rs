//! End-to-end pipelines behind the CLI subcommands. Each takes a validated
//! [`RunConfig`], writes its output files into a [`RunDir`], and returns
//! human-readable summary lines; the dispatcher seals the directory with
//! `resolved_config.json` and `manifest.json`.

pub mod bound_entangled;
pub mod demos;
pub mod otj_run;
pub mod target_sample;

use std::io::Write as _;
use std::path::Path;

use crate::config::{PipelineSpec, RunConfig};
use crate::dump::{build_describe, Manifest, RunDir};
use crate::engine::{ParticleEnsemble, RunObserver, StepRecord};
use crate::error::{Error, Result};
use crate::qstate::DensityMatrix;
use crate::targets::{find_peak, DirichletTarget, PeakConfig};

pub struct RunSummary {
    pub lines: Vec<String>,
    pub manifest: Manifest,
}

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    let mut dir = RunDir::create(out_dir)?;
    let lines = match &config.pipeline {
        PipelineSpec::BoundEntangled(spec) => bound_entangled::run(config, spec, &mut dir)?,
        PipelineSpec::TargetSample(spec) => target_sample::run(config, spec, &mut dir)?,
        PipelineSpec::Otj(spec) => otj_run::run(config, spec, &mut dir)?,
        PipelineSpec::Demo1d(spec) => demos::run_demo_1d(config, spec, &mut dir)?,
        PipelineSpec::DemoQubit(_) => demos::run_demo_qubit(config, &mut dir)?,
    };
    let manifest = dir.finish(config)?;
    Ok(RunSummary { lines, manifest })
}

/// Header lines shared by every CSV this run emits.
pub(crate) fn metadata_lines(config: &RunConfig, dims: &str) -> Result<Vec<String>> {
    Ok(vec![
        format!("pipeline = {}", config.pipeline.name()),
        format!("dims = {dims}"),
        format!("seed = {}", config.engine.seed),
        format!("build = {}", build_describe()),
        format!("config_hash = {}", config.hash()?),
    ])
}

/// Per-step diagnostics CSV, optionally with one extra per-step column.
pub(crate) fn steps_csv(
    metadata: &[String],
    records: &[StepRecord],
    extra: Option<(&str, &[f64])>,
) -> Result<Vec<u8>> {
    if let Some((name, values)) = &extra {
        if values.len() != records.len() {
            return Err(Error::InvalidInput(format!(
                "column {name} has {} values for {} steps",
                values.len(),
                records.len()
            )));
        }
    }
    let mut out = Vec::new();
    for line in metadata {
        writeln!(out, "# {line}")?;
    }
    let mut header = String::from("step,value,ess,resampled,acceptance,step_scale");
    if let Some((name, _)) = &extra {
        header.push(',');
        header.push_str(name);
    }
    writeln!(out, "{header}")?;
    for (i, r) in records.iter().enumerate() {
        write!(
            out,
            "{},{:e},{:e},{},{:e},{:e}",
            r.step, r.value, r.ess, r.resampled, r.acceptance, r.step_scale
        )?;
        if let Some((_, values)) = &extra {
            write!(out, ",{:e}", values[i])?;
        }
        writeln!(out)?;
    }
    Ok(out)
}

/// Tracks, per bridge step, the ensemble fraction whose first κ is already
/// satisfied in hard form (1 when the problem carries no constraints).
#[derive(Default)]
pub(crate) struct KappaFraction {
    pub fractions: Vec<f64>,
}

impl<P> RunObserver<P> for KappaFraction {
    fn on_step(&mut self, ensemble: &ParticleEnsemble<P>, _record: &StepRecord) {
        let inside = ensemble
            .evals
            .iter()
            .filter(|e| e.kappas.first().is_none_or(|k| *k >= 0.0))
            .count();
        self.fractions.push(inside as f64 / ensemble.len() as f64);
    }
}

/// Peak of the target over physical states as (probabilities, state, ln F).
/// A flat target (A = 0) peaks everywhere; the maximally mixed state stands in.
pub(crate) fn target_peak(target: &DirichletTarget) -> Result<(Vec<f64>, DensityMatrix, f64)> {
    if target.total() == 0.0 {
        let state = DensityMatrix::maximally_mixed(target.dim());
        let probs = target.probability_map().probabilities(state.matrix());
        return Ok((probs, state, 0.0));
    }
    let (state, _) = find_peak(target, &PeakConfig::default())?;
    let probs = target.probability_map().probabilities(state.matrix());
    let log_peak = target.log_density_probs(&probs);
    Ok((probs, state, log_peak))
}
