//! OTJ size/content estimation: anchor calibration on a uniform sample, the
//! λ ascent collecting region averages, and optionally a direct-SCMC content
//! curve for comparison on the same grid.

use std::io::Write as _;

use super::{metadata_lines, target_peak};
use crate::config::{OtjSpec, ReferenceSpec, RunConfig, TargetSampleSpec};
use crate::dump::RunDir;
use crate::engine::{ConstraintSpec, MatrixWalk, SimplexWalk, WalkMode};
use crate::error::{Error, Result};
use crate::otj::{content_from_sample, otj_protocol, OtjConfig, OtjRun};
use crate::pipelines::target_sample;
use crate::problems::{MatrixDirichletProblem, SimplexDirichletProblem};
use crate::sampling::{
    sample_dirichlet, sample_wishart_state, DirichletParams, RngStream, WishartParams,
};
use crate::targets::{physicality_kappa, DirichletTarget};
use rand_chacha::ChaCha8Rng;

// Substream tag for the calibration draws; the engine's own tags are small
// integers, so a distant value keeps the streams disjoint by construction.
const TAG_CALIBRATE: u64 = 101;

/// Target log densities of `n` uniformly distributed physical states, drawn
/// in probability coordinates by rejection from the flat simplex.
fn uniform_simplex_log_f(
    target: &DirichletTarget,
    n: usize,
    stream: RngStream,
) -> Result<Vec<f64>> {
    let flat = DirichletParams::new(vec![0.0; target.n_outcomes()])?;
    let map = target.probability_map();
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity(n);
    let mut attempts: usize = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > n.saturating_mul(1000) {
            return Err(Error::InvalidSample(format!(
                "only {} of {n} uniform draws were physical after {attempts} attempts",
                out.len()
            )));
        }
        let p = sample_dirichlet(&flat, &mut rng);
        if physicality_kappa(map, &p) >= 0.0 {
            out.push(target.log_density_probs(&p));
        }
    }
    Ok(out)
}

/// Target log densities of `n` Hilbert–Schmidt random states.
fn uniform_hs_log_f(target: &DirichletTarget, n: usize, stream: RngStream) -> Vec<f64> {
    let params = WishartParams::hilbert_schmidt(target.dim());
    let mut rng = stream.rng();
    (0..n)
        .map(|_| target.log_density_state(&sample_wishart_state(&params, &mut rng)))
        .collect()
}

pub fn run(config: &RunConfig, spec: &OtjSpec, dir: &mut RunDir) -> Result<Vec<String>> {
    let target = spec.target.build()?;
    let meta = metadata_lines(config, &target.dim().to_string())?;
    let (peak_probs, peak_state, _) = target_peak(&target)?;

    let mut otj_config = OtjConfig::new(spec.grid.to_grid()?, spec.hardness, config.engine.clone());
    otj_config.anchor_fraction = spec.anchor_fraction;
    otj_config.min_anchor_fraction = spec.min_anchor_fraction;
    otj_config.ladder_per_decade = spec.ladder_per_decade;
    otj_config.reanchor_lambda = spec.reanchor_lambda;

    let calibration_stream = RngStream::new(config.engine.seed).substream(&[TAG_CALIBRATE]);
    let result: OtjRun = match spec.walk {
        WalkMode::SimplexSpace => {
            let uniform_log_f =
                uniform_simplex_log_f(&target, spec.calibration_samples, calibration_stream)?;
            // in probability coordinates the walk can leave the state space,
            // so physicality is enforced as a hard constraint
            let constraints = [ConstraintSpec::hard()];
            let log_peak = target.log_density_probs(&peak_probs);
            let problem = SimplexDirichletProblem::new(spec.target.build()?);
            let mut kernel = SimplexWalk::new(target.n_outcomes());
            let flat = DirichletParams::new(vec![0.0; target.n_outcomes()])?;
            otj_protocol(
                &problem,
                &constraints,
                log_peak,
                &uniform_log_f,
                |rng: &mut ChaCha8Rng| sample_dirichlet(&flat, rng),
                &mut kernel,
                &otj_config,
            )?
        }
        WalkMode::MatrixSpace => {
            let uniform_log_f =
                uniform_hs_log_f(&target, spec.calibration_samples, calibration_stream);
            let log_peak = target.log_density_state(&peak_state);
            let problem = MatrixDirichletProblem::new(
                spec.target.build()?,
                WishartParams::hilbert_schmidt(target.dim()),
            )?;
            let mut kernel = MatrixWalk::new(target.dim(), true);
            let hs = WishartParams::hilbert_schmidt(target.dim());
            otj_protocol(
                &problem,
                &[],
                log_peak,
                &uniform_log_f,
                |rng: &mut ChaCha8Rng| sample_wishart_state(&hs, rng),
                &mut kernel,
                &otj_config,
            )?
        }
    };

    let mut csv = Vec::new();
    result.write_csv(&mut csv, &meta)?;
    dir.write_file("otj.csv", &csv)?;

    let mut lines = vec![
        format!(
            "anchored at λ₀ = {:.3e} with s(λ₀) = {:.4e}",
            result.anchor.0, result.anchor.1
        ),
        format!(
            "deepest grid point λ = {:.3e}: s = {:.4e}, c = {:.4}",
            result.grid.bottom(),
            result.s_values.last().copied().unwrap_or(f64::NAN),
            result.c_values.last().copied().unwrap_or(f64::NAN)
        ),
    ];

    if spec.compare_direct {
        let direct_spec = TargetSampleSpec {
            target: spec.target.clone(),
            reference: ReferenceSpec::Uniform,
            walk: spec.walk,
            physicality_sharpness: crate::config::default_physicality_sharpness(),
            content_grid: None,
        };
        let mut engine = config.engine.clone();
        engine.seed = engine.seed.wrapping_add(1);
        let direct = target_sample::draw(&engine, &direct_spec)?;
        let log_peak = match spec.walk {
            WalkMode::SimplexSpace => target.log_density_probs(&peak_probs),
            WalkMode::MatrixSpace => target.log_density_state(&peak_state),
        };
        let c_direct =
            content_from_sample(&direct.accepted_log_f(), log_peak, result.grid.values())?;

        let mut csv = Vec::new();
        for line in &meta {
            writeln!(csv, "# {line}")?;
        }
        writeln!(csv, "# direct_sample_size = {}", direct.n_accepted())?;
        writeln!(csv, "lambda,c_otj,c_direct")?;
        for ((lambda, c_otj), cd) in result
            .grid
            .values()
            .iter()
            .zip(&result.c_values)
            .zip(&c_direct)
        {
            writeln!(csv, "{lambda:e},{c_otj:e},{cd:e}")?;
        }
        dir.write_file("content_comparison.csv", &csv)?;

        let max_gap = result
            .c_values
            .iter()
            .zip(&c_direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        lines.push(format!(
            "largest |c_otj − c_direct| over the grid: {max_gap:.4}"
        ));
    }
    Ok(lines)
}
