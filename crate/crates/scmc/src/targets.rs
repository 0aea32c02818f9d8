//! Target densities and constraint bundles: Dirichlet posteriors over POM
//! probabilities, the PPT/CCNR pair certifying bound entanglement, and the
//! nested λ-regions of a peaked target.

use crate::engine::{lambda_log_indicator, ConstraintSpec};
use crate::error::{Error, Result};
use crate::qstate::{
    hermitian_part, min_eigenvalue_raw, min_pt_eigenvalue_raw, BipartiteDims, CMatrix,
    DensityMatrix, Pom, ProbabilityMap,
};
use crate::sampling::RngStream;
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;

/// Posterior-style density f(ρ) ∝ ∏_k p_k^{α_k} over the probabilities of a
/// fixed POM.
#[derive(Clone, Debug)]
pub struct DirichletTarget {
    pom: Pom,
    map: ProbabilityMap,
    alphas: Vec<f64>,
    total: f64,
}

impl DirichletTarget {
    pub fn new(pom: Pom, alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() != pom.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} exponents for a {}-outcome POM",
                alphas.len(),
                pom.len()
            )));
        }
        if alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidParameter {
                name: "alphas",
                reason: "exponents must be finite and nonnegative".into(),
            });
        }
        let map = ProbabilityMap::new(&pom);
        let total = alphas.iter().sum();
        Ok(Self {
            pom,
            map,
            alphas,
            total,
        })
    }

    pub fn pom(&self) -> &Pom {
        &self.pom
    }

    pub fn probability_map(&self) -> &ProbabilityMap {
        &self.map
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// A = Σ α_k.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.pom.dim()
    }

    pub fn n_outcomes(&self) -> usize {
        self.alphas.len()
    }

    /// Σ α_k ln p_k on a probability vector; −∞ when any p_k ≤ 0 carries a
    /// positive exponent (α_k = 0 outcomes contribute nothing even at p = 0).
    pub fn log_density_probs(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.alphas.len());
        let mut acc = 0.0;
        for (&a, &pk) in self.alphas.iter().zip(p) {
            if a == 0.0 {
                continue;
            }
            if !(pk > 0.0) {
                return f64::NEG_INFINITY;
            }
            acc += a * pk.ln();
        }
        acc
    }

    pub fn log_density_state(&self, rho: &DensityMatrix) -> f64 {
        let p = self.map.probabilities(rho.matrix());
        self.log_density_probs(&p)
    }

    /// Unconstrained maximizer over the simplex: p̂_k = α_k / A.
    pub fn simplex_mode(&self) -> Result<Vec<f64>> {
        if !(self.total > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alphas",
                reason: "the simplex mode needs A > 0".into(),
            });
        }
        Ok(self.alphas.iter().map(|a| a / self.total).collect())
    }
}

/// Eq.-(5)-style log density of a state under the target; checks dimensions,
/// then evaluates Σ α_k ln tr(Π_k ρ).
pub fn dirichlet_log_density(rho: &DensityMatrix, target: &DirichletTarget) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs POM dim {}",
            rho.dim(),
            target.dim()
        )));
    }
    Ok(target.log_density_state(rho))
}

/// (κ_1, κ_2) = (min eigenvalue of ρ^{T_B}, R − 1): the state is a PPT
/// candidate when κ_1 ≥ 0 and CCNR-certified entangled when κ_2 > 0.
pub fn bound_entanglement_kappas(
    rho: &DensityMatrix,
    dims: BipartiteDims,
) -> Result<(f64, f64)> {
    dims.check(rho.dim())?;
    Ok((
        min_pt_eigenvalue_raw(rho.matrix(), dims),
        crate::qstate::ccnr_value_raw(rho.matrix(), dims) - 1.0,
    ))
}

/// The constraint pair of a bound-entanglement search with its soft
/// tolerances: a_p sharpens the PPT indicator, a_e the CCNR one.
#[derive(Clone, Copy, Debug)]
pub struct BoundEntanglementConstraints {
    pub dims: BipartiteDims,
    pub a_p: f64,
    pub a_e: f64,
}

impl BoundEntanglementConstraints {
    pub fn new(dims: BipartiteDims, a_p: f64, a_e: f64) -> Result<Self> {
        if !(a_p > 0.0 && a_e > 0.0) {
            return Err(Error::InvalidParameter {
                name: "a_p/a_e",
                reason: "soft-constraint tolerances must be positive".into(),
            });
        }
        Ok(Self { dims, a_p, a_e })
    }

    pub fn kappas(&self, rho: &DensityMatrix) -> (f64, f64) {
        (
            min_pt_eigenvalue_raw(rho.matrix(), self.dims),
            crate::qstate::ccnr_value_raw(rho.matrix(), self.dims) - 1.0,
        )
    }

    /// PPT: accepted output must have min μ_PT ≥ 0.
    pub fn ppt_spec(&self) -> ConstraintSpec {
        ConstraintSpec::soft(self.a_p).with_final_cut(0.0, false)
    }

    /// CCNR: accepted output must have R strictly above 1.
    pub fn ccnr_spec(&self) -> ConstraintSpec {
        ConstraintSpec::soft(self.a_e).with_final_cut(0.0, true)
    }
}

/// The region {ρ : f(ρ) ≥ λF} of a Dirichlet target.
#[derive(Clone, Debug)]
pub struct LambdaRegion {
    pub lambda: f64,
    pub peak_log_f: f64,
    pub target: DirichletTarget,
}

impl LambdaRegion {
    pub fn new(lambda: f64, peak_log_f: f64, target: DirichletTarget) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be in [0,1], got {lambda}"),
            });
        }
        Ok(Self {
            lambda,
            peak_log_f,
            target,
        })
    }
}

/// Soft membership indicator of the λ-region, imposed on ln f because f
/// spans hundreds of orders of magnitude; λ = 0 is the whole space.
pub fn lambda_region_log_indicator(
    rho: &DensityMatrix,
    region: &LambdaRegion,
    a: f64,
    tau: f64,
) -> f64 {
    lambda_log_indicator(
        region.target.log_density_state(rho),
        region.lambda,
        region.peak_log_f,
        a,
        tau,
    )
}

/// Euclidean projection of a Hermitian matrix onto the state space (PSD,
/// unit trace): diagonalize and project the spectrum onto the probability
/// simplex.
pub fn project_to_state_space(m: &CMatrix) -> DensityMatrix {
    let herm = hermitian_part(m);
    let eig = SymmetricEigen::new(herm);
    let clipped = project_spectrum_to_simplex(eig.eigenvalues.as_slice());
    let d = m.nrows();
    let mut out = CMatrix::zeros(d, d);
    for (j, &x) in clipped.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(j);
        // out += x · v v†
        for r in 0..d {
            for c in 0..d {
                out[(r, c)] += Complex64::new(x, 0.0) * v[r] * v[c].conj();
            }
        }
    }
    DensityMatrix::from_matrix_unchecked(hermitian_part(&out))
}

/// Projection of a real vector onto {x ≥ 0, Σx = 1}.
fn project_spectrum_to_simplex(mu: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = mu.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &m) in sorted.iter().enumerate() {
        cumulative += m;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if m - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    mu.iter().map(|&m| (m - theta).max(0.0)).collect()
}

/// How the peak of a Dirichlet target is located.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeakMethod {
    /// Projected-gradient ascent on the concave log density (the default).
    ProjectedGradient,
    /// Coarse SCMC localization of the peak followed by the same
    /// projected-gradient polish; fallback for difficult landscapes.
    ScmcRefined,
}

#[derive(Clone, Copy, Debug)]
pub struct PeakConfig {
    pub method: PeakMethod,
    pub max_iterations: usize,
    /// Stop once the log density improves by less than this per iteration.
    pub improvement_tol: f64,
    /// Required projected-gradient norm at the returned point.
    pub stationarity_tol: f64,
    /// Seed for the ScmcRefined localization stage.
    pub seed: u64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            method: PeakMethod::ProjectedGradient,
            max_iterations: 20_000,
            improvement_tol: 1e-10,
            stationarity_tol: 1e-6,
            seed: 0,
        }
    }
}

/// ‖Proj(ρ + t∇ln f) − ρ‖_F / t at a small probe step t: zero exactly at a
/// constrained maximizer.
pub fn projected_gradient_norm(target: &DirichletTarget, rho: &DensityMatrix, probe: f64) -> f64 {
    let grad = log_density_gradient(target, rho);
    let stepped = rho.matrix() + grad.map(|z| z * probe);
    let projected = project_to_state_space(&stepped);
    (projected.matrix() - rho.matrix()).map(|z| z.norm_sqr()).sum().sqrt() / probe
}

/// ∇_ρ Σ α_k ln p_k = Σ (α_k / p_k) Π_k as a Hermitian matrix.
fn log_density_gradient(target: &DirichletTarget, rho: &DensityMatrix) -> CMatrix {
    let p = target.probability_map().probabilities(rho.matrix());
    let d = target.dim();
    let mut grad = CMatrix::zeros(d, d);
    for ((&a, &pk), effect) in target
        .alphas()
        .iter()
        .zip(&p)
        .zip(target.pom().outcomes())
    {
        if a == 0.0 {
            continue;
        }
        let w = a / pk.max(1e-300);
        grad += effect.map(|z| z * w);
    }
    grad
}

/// Maximizer of the target over physical states and its log density ln F.
///
/// When the simplex mode p̂ = α/A reconstructs to a physical state the answer
/// is exact and immediate; otherwise concave projected-gradient ascent runs
/// until the per-iteration improvement drops below `improvement_tol` and the
/// projected gradient is stationary.
pub fn find_peak(target: &DirichletTarget, config: &PeakConfig) -> Result<(DensityMatrix, f64)> {
    let mode = target.simplex_mode()?;
    if let Ok(rec) = target.probability_map().to_state(&mode) {
        if rec.physical {
            let log_peak = target.log_density_probs(&mode);
            return Ok((rec.state, log_peak));
        }
    }

    let start = match config.method {
        PeakMethod::ProjectedGradient => DensityMatrix::maximally_mixed(target.dim()),
        PeakMethod::ScmcRefined => scmc_localize_peak(target, config)?,
    };
    ascend(target, start, config)
}

/// Local Lipschitz estimate of the gradient, Σ (α_k/p_k²)·‖Π_k‖_F²; the safe
/// ascent step is its inverse.
fn gradient_lipschitz(target: &DirichletTarget, rho: &DensityMatrix) -> f64 {
    let p = target.probability_map().probabilities(rho.matrix());
    target
        .alphas()
        .iter()
        .zip(&p)
        .zip(target.pom().outcomes())
        .map(|((&a, &pk), effect)| {
            if a == 0.0 {
                0.0
            } else {
                a / pk.max(1e-300).powi(2) * effect.map(|z| z.norm_sqr()).sum()
            }
        })
        .sum()
}

fn ascend(
    target: &DirichletTarget,
    start: DensityMatrix,
    config: &PeakConfig,
) -> Result<(DensityMatrix, f64)> {
    let mut rho = start;
    let mut value = target.log_density_state(&rho);
    if value == f64::NEG_INFINITY {
        // a zero-probability start (possible for rank-deficient POMs) is
        // nudged toward the maximally mixed state, where every p_k > 0
        rho = DensityMatrix::from_matrix_unchecked(
            rho.matrix().map(|z| z * 0.5)
                + DensityMatrix::maximally_mixed(target.dim()).matrix().map(|z| z * 0.5),
        );
        value = target.log_density_state(&rho);
    }

    // Fixed-point iteration ρ ← Proj(ρ + η ∇ln f) with η below the inverse
    // curvature. Convergence is judged on the displacement residual
    // ‖Δρ‖/η — the projected-gradient norm itself — rather than on value
    // improvements, which bottom out at the f64 granularity of |ln f| long
    // before the residual reaches stationarity_tol.
    let mut damping = 1.0;
    for iteration in 1..=config.max_iterations {
        let eta = damping / gradient_lipschitz(target, &rho).max(1e-12);
        let grad = log_density_gradient(target, &rho);
        let stepped = rho.matrix() + grad.map(|z| z * eta);
        let candidate = project_to_state_space(&stepped);
        let cand_value = target.log_density_state(&candidate);
        let improvement = cand_value - value;
        if improvement < -1e-9 {
            // definite overshoot (beyond evaluation noise): retry shorter
            damping *= 0.5;
            if damping < 1e-12 {
                return Err(Error::PeakNotConverged {
                    iterations: iteration,
                    best_log_f: value,
                    best: Box::new(rho),
                });
            }
            continue;
        }
        let moved = (candidate.matrix() - rho.matrix())
            .map(|z| z.norm_sqr())
            .sum()
            .sqrt();
        let residual = moved / eta;
        rho = candidate;
        value = value.max(cand_value);
        damping = (damping * 1.3).min(1.0);
        if residual <= 0.1 * config.stationarity_tol
            && improvement.abs() < config.improvement_tol
            && projected_gradient_norm(target, &rho, 1e-3) <= config.stationarity_tol
        {
            return Ok((rho, value));
        }
    }
    if projected_gradient_norm(target, &rho, 1e-3) <= config.stationarity_tol {
        return Ok((rho, value));
    }
    Err(Error::PeakNotConverged {
        iterations: config.max_iterations,
        best_log_f: value,
        best: Box::new(rho),
    })
}

/// Coarse peak localization: a short bridged run from the uniform ensemble
/// toward f, keeping the best particle seen.
fn scmc_localize_peak(target: &DirichletTarget, config: &PeakConfig) -> Result<DensityMatrix> {
    use crate::engine::{scmc_run, GeometricBridge, MatrixWalk, Problem, ScmcConfig};
    use crate::sampling::{sample_wishart_state, WishartParams};

    struct Localize<'a>(&'a DirichletTarget);
    impl Problem for Localize<'_> {
        type Point = DensityMatrix;
        fn evaluate(&self, rho: &DensityMatrix) -> crate::Eval {
            crate::Eval::unconstrained(self.0.log_density_state(rho), 0.0)
        }
    }

    let run_config = ScmcConfig {
        n_particles: 512,
        n_steps: 40,
        seed: config.seed,
        ..ScmcConfig::default()
    };
    let schedule = GeometricBridge::new(run_config.n_steps, vec![])?;
    let mut kernel = MatrixWalk::new(target.dim(), true);
    let params = WishartParams::hilbert_schmidt(target.dim());
    let out = scmc_run(&Localize(target), &schedule, &mut kernel, &run_config, |_, rng| {
        sample_wishart_state(&params, rng)
    })?;
    let best = out
        .ensemble
        .points
        .iter()
        .zip(&out.ensemble.evals)
        .max_by(|a, b| a.1.log_target.total_cmp(&b.1.log_target))
        .map(|(p, _)| p.clone())
        .expect("non-empty ensemble");
    Ok(best)
}

/// Simulated measurement record: `total` clicks multinomially distributed
/// over the POM outcomes of a true state. Stands in for external count data.
pub fn simulate_clicks(
    pom: &Pom,
    true_state: &DensityMatrix,
    total: usize,
    stream: RngStream,
) -> Result<Vec<f64>> {
    let p = crate::qstate::pom_probabilities(true_state, pom)?;
    let mut cumulative = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &pk in &p {
        acc += pk.max(0.0);
        cumulative.push(acc);
    }
    let mut rng = stream.rng();
    let mut counts = vec![0.0; p.len()];
    for _ in 0..total {
        let u = rng.random::<f64>() * acc;
        let idx = match cumulative.binary_search_by(|c| c.partial_cmp(&u).expect("finite")) {
            Ok(i) | Err(i) => i.min(p.len() - 1),
        };
        counts[idx] += 1.0;
    }
    Ok(counts)
}

/// The physicality constraint value used by simplex-space pipelines:
/// κ_p(ρ) = min eigenvalue of the reconstructed state.
pub fn physicality_kappa(map: &ProbabilityMap, p: &[f64]) -> f64 {
    min_eigenvalue_raw(&map.state_matrix_minnorm(p))
}
