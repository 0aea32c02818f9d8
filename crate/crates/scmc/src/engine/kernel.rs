//! Random-walk proposal kernels. All walks are symmetric (gaussian steps),
//! shaped by the ensemble covariance of the current particle cloud so that
//! proposals move preferentially along directions the population actually
//! spreads in.

use crate::qstate::{DensityMatrix, HermitianBasis};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A symmetric proposal generator over points of type `P`. `refresh` adapts
/// the kernel to the current ensemble (called once per bridge step, before
/// the Metropolis sweeps); `propose` returns `None` when the candidate falls
/// outside the walk's domain, which the caller counts as a rejection.
pub trait WalkKernel<P>: Sync {
    fn refresh(&mut self, points: &[P]);
    fn propose(&self, current: &P, scale: f64, rng: &mut ChaCha8Rng) -> Option<P>;
}

/// Covariance shaping shared by the concrete walks: a Cholesky factor of the
/// (jittered) ensemble covariance when it is usable, otherwise an isotropic
/// fallback with a scale floor so a collapsed ensemble (e.g. every particle
/// at the peak) can still move.
#[derive(Clone, Debug)]
struct ShapedStep {
    chol: Option<DMatrix<f64>>,
    isotropic_sigma: f64,
}

const SIGMA_FLOOR: f64 = 1e-2;

impl ShapedStep {
    fn unit(dim: usize) -> Self {
        let _ = dim;
        Self {
            chol: None,
            isotropic_sigma: SIGMA_FLOOR,
        }
    }

    fn from_coords(coords: &[DVector<f64>]) -> Self {
        let n = coords.len();
        let dim = coords[0].len();
        let mut mean = DVector::<f64>::zeros(dim);
        for x in coords {
            mean += x;
        }
        mean /= n as f64;
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for x in coords {
            let d = x - &mean;
            cov.syger(1.0 / n as f64, &d, &d, 1.0);
        }
        cov.fill_upper_triangle_with_lower_triangle();

        let mean_var = cov.trace() / dim as f64;
        if !(mean_var > 1e-16) {
            return Self::unit(dim);
        }
        // escalating diagonal jitter until the factorization succeeds
        let mut jitter = 0.01 * mean_var;
        for _ in 0..4 {
            let mut c = cov.clone();
            for i in 0..dim {
                c[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(c) {
                return Self {
                    chol: Some(chol.l()),
                    isotropic_sigma: mean_var.sqrt(),
                };
            }
            jitter *= 10.0;
        }
        Self {
            chol: None,
            isotropic_sigma: mean_var.sqrt().max(SIGMA_FLOOR),
        }
    }

    fn displacement(&self, dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let xi = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        match &self.chol {
            Some(l) => l * xi * scale,
            None => xi * (scale * self.isotropic_sigma),
        }
    }
}

/// Matrix-space walk: ρ′ = ρ + ε·H with H Hermitian and traceless, drawn
/// along the ensemble covariance in Hermitian-basis coordinates. With
/// `hard_physical` the walk rejects candidates with a negative eigenvalue, so
/// the chain never leaves the state space.
pub struct MatrixWalk {
    basis: HermitianBasis,
    step: ShapedStep,
    hard_physical: bool,
}

impl MatrixWalk {
    pub fn new(dim: usize, hard_physical: bool) -> Self {
        let basis = HermitianBasis::new(dim);
        let coords_dim = dim * dim - 1;
        Self {
            basis,
            step: ShapedStep::unit(coords_dim),
            hard_physical,
        }
    }

    /// Identity-shaped preset (no covariance adaptation); useful as an
    /// alternative propagation direction for post-run filtering.
    pub fn isotropic(dim: usize, sigma: f64, hard_physical: bool) -> Self {
        let basis = HermitianBasis::new(dim);
        Self {
            basis,
            step: ShapedStep {
                chol: None,
                isotropic_sigma: sigma,
            },
            hard_physical,
        }
    }
}

impl WalkKernel<DensityMatrix> for MatrixWalk {
    fn refresh(&mut self, points: &[DensityMatrix]) {
        if points.is_empty() {
            return;
        }
        let coords: Vec<DVector<f64>> = points
            .iter()
            .map(|p| self.basis.traceless_coords(p.matrix()))
            .collect();
        self.step = ShapedStep::from_coords(&coords);
    }

    fn propose(
        &self,
        current: &DensityMatrix,
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<DensityMatrix> {
        let dx = self.step.displacement(self.basis.n_traceless(), scale, rng);
        let mut mat = current.matrix().clone();
        self.basis.add_traceless(&mut mat, &dx);
        let state = DensityMatrix::from_matrix_unchecked(mat);
        if self.hard_physical && state.min_eigenvalue() < 0.0 {
            return None;
        }
        Some(state)
    }
}

/// Simplex-space walk over POM probability vectors: steps live in the
/// zero-sum hyperplane (so Σp stays 1 exactly up to rounding) and candidates
/// with any negative component are out of domain. Physicality of the
/// reconstructed state is *not* checked here — it enters as a κ constraint.
pub struct SimplexWalk {
    /// K×(K−1) orthonormal basis of the zero-sum hyperplane.
    hyperplane: DMatrix<f64>,
    step: ShapedStep,
}

impl SimplexWalk {
    pub fn new(n_outcomes: usize) -> Self {
        assert!(n_outcomes >= 2, "simplex needs at least two outcomes");
        let k = n_outcomes;
        let mut h = DMatrix::<f64>::zeros(k, k - 1);
        for j in 1..k {
            let norm = (j as f64 * (j + 1) as f64).sqrt();
            for i in 0..j {
                h[(i, j - 1)] = 1.0 / norm;
            }
            h[(j, j - 1)] = -(j as f64) / norm;
        }
        Self {
            hyperplane: h,
            step: ShapedStep::unit(k - 1),
        }
    }
}

impl WalkKernel<Vec<f64>> for SimplexWalk {
    fn refresh(&mut self, points: &[Vec<f64>]) {
        if points.is_empty() {
            return;
        }
        let coords: Vec<DVector<f64>> = points
            .iter()
            .map(|p| self.hyperplane.transpose() * DVector::from_column_slice(p))
            .collect();
        self.step = ShapedStep::from_coords(&coords);
    }

    fn propose(&self, current: &Vec<f64>, scale: f64, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let dy = self.step.displacement(self.hyperplane.ncols(), scale, rng);
        let dp = &self.hyperplane * dy;
        let candidate: Vec<f64> = current.iter().zip(dp.iter()).map(|(p, d)| p + d).collect();
        if candidate.iter().any(|&p| p <= 0.0) {
            return None;
        }
        Some(candidate)
    }
}

/// Plain scalar gaussian walk for one-dimensional demonstrations.
pub struct ScalarWalk {
    sigma: f64,
}

impl ScalarWalk {
    pub fn new() -> Self {
        Self { sigma: 1.0 }
    }
}

impl Default for ScalarWalk {
    fn default() -> Self {
        Self::new()
    }
}

impl WalkKernel<f64> for ScalarWalk {
    fn refresh(&mut self, points: &[f64]) {
        if points.len() < 2 {
            return;
        }
        let n = points.len() as f64;
        let mean = points.iter().sum::<f64>() / n;
        let var = points.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        self.sigma = var.sqrt().max(SIGMA_FLOOR);
    }

    fn propose(&self, current: &f64, scale: f64, rng: &mut ChaCha8Rng) -> Option<f64> {
        let xi: f64 = rng.sample(StandardNormal);
        Some(current + scale * self.sigma * xi)
    }
}
