//! Directly sampleable reference distributions — Wishart-induced states
//! (including the uniform Hilbert–Schmidt measure), Dirichlet draws on the
//! probability simplex — plus the deterministic RNG-stream plumbing every
//! parallel run is built on.

use crate::error::{Error, Result};
use crate::qstate::{hermitian_part, CMatrix, DensityMatrix};
use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// splitmix64 finalizer; used to derive independent stream ids.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Cholesky with an explicit positive-definiteness check; nalgebra's complex
/// factorization does not reject indefinite input on its own.
fn cholesky_pd(herm: &CMatrix) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    let min_eig = herm
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |m, &e| m.min(e));
    if !(min_eig > 0.0) {
        return Err(Error::InvalidCovariance(format!(
            "covariance is not positive-definite (min eigenvalue {min_eig:e})"
        )));
    }
    Cholesky::new(herm.clone())
        .ok_or_else(|| Error::InvalidCovariance("covariance is not positive-definite".into()))
}

/// A (seed, stream) pair addressing one deterministic ChaCha8 sequence.
/// Identical pairs always reproduce identical draws; substreams derived from
/// distinct word lists never collide in practice, which is what makes
/// particle-parallel runs reproducible at any thread count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Derives a child stream by hashing `words` into the stream id.
    pub fn substream(self, words: &[u64]) -> Self {
        let mut h = self.stream;
        for &w in words {
            h = splitmix64(h ^ splitmix64(w));
        }
        Self {
            seed: self.seed,
            stream: h,
        }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Parameters of the Wishart construction ρ = Z†Z / tr(Z†Z) with Z an n×d
/// complex Gaussian matrix of column covariance Σ. n = d with Σ = 1 gives
/// the uniform Hilbert–Schmidt distribution.
#[derive(Clone, Debug)]
pub struct WishartParams {
    dim: usize,
    dof: usize,
    covariance: CMatrix,
    /// L† with Σ = L·L†; `None` when Σ is the identity.
    chol_adjoint: Option<CMatrix>,
    sigma_inv: Option<CMatrix>,
}

impl WishartParams {
    pub fn new(dim: usize, dof: usize, covariance: CMatrix) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be positive".into(),
            });
        }
        if dof < dim {
            return Err(Error::InvalidParameter {
                name: "dof",
                reason: format!("need dof >= dim, got {dof} < {dim}"),
            });
        }
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{}, expected {dim}x{dim}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let identity_dev = (&covariance - CMatrix::identity(dim, dim))
            .map(|z| z.norm())
            .max();
        if identity_dev <= 1e-14 {
            return Ok(Self {
                dim,
                dof,
                covariance,
                chol_adjoint: None,
                sigma_inv: None,
            });
        }
        let herm = hermitian_part(&covariance);
        let chol = cholesky_pd(&herm)?;
        let chol_adjoint = chol.l().adjoint();
        let sigma_inv = chol.inverse();
        Ok(Self {
            dim,
            dof,
            covariance,
            chol_adjoint: Some(chol_adjoint),
            sigma_inv: Some(sigma_inv),
        })
    }

    /// n = d, Σ = 1: the uniform Hilbert–Schmidt measure.
    pub fn hilbert_schmidt(dim: usize) -> Self {
        Self {
            dim,
            dof: dim,
            covariance: CMatrix::identity(dim, dim),
            chol_adjoint: None,
            sigma_inv: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn covariance(&self) -> &CMatrix {
        &self.covariance
    }
}

/// n×d matrix with i.i.d. standard complex normal entries (real and
/// imaginary parts each of variance 1/2).
pub fn sample_standard_complex_gaussian(
    rows: usize,
    cols: usize,
    rng: &mut ChaCha8Rng,
) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// Z = G·L† with G standard complex Gaussian and Σ = L·L†, so that rows of Z
/// have covariance Σ.
pub fn sample_gaussian_matrix(
    rows: usize,
    cols: usize,
    covariance: &CMatrix,
    rng: &mut ChaCha8Rng,
) -> Result<CMatrix> {
    if covariance.nrows() != cols || covariance.ncols() != cols {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, expected {cols}x{cols}",
            covariance.nrows(),
            covariance.ncols()
        )));
    }
    let g = sample_standard_complex_gaussian(rows, cols, rng);
    let identity_dev = (covariance - CMatrix::identity(cols, cols))
        .map(|z| z.norm())
        .max();
    if identity_dev <= 1e-14 {
        return Ok(g);
    }
    let chol = cholesky_pd(&hermitian_part(covariance))?;
    Ok(g * chol.l().adjoint())
}

/// One Wishart-induced state ρ = Z†Z / tr(Z†Z).
pub fn sample_wishart_state(params: &WishartParams, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = sample_standard_complex_gaussian(params.dof, params.dim, rng);
    let z = match &params.chol_adjoint {
        Some(lt) => g * lt,
        None => g,
    };
    let mut m = z.adjoint() * &z;
    let tr = m.trace().re;
    m = hermitian_part(&m).map(|v| v / tr);
    DensityMatrix::from_matrix_unchecked(m)
}

/// Log density of the Wishart-induced distribution, up to an additive
/// constant: (n−d)·ln det ρ − n·d·ln tr(Σ⁻¹ρ). Singular ρ with n > d gives
/// −∞; the n = d determinant term is dropped exactly (its exponent is zero).
pub fn log_density_wishart(rho: &DensityMatrix, params: &WishartParams) -> f64 {
    let n = params.dof as f64;
    let d = params.dim as f64;
    let mut out = 0.0;
    if params.dof > params.dim {
        let mut log_det = 0.0;
        for eig in rho.eigenvalues() {
            if eig <= 0.0 {
                return f64::NEG_INFINITY;
            }
            log_det += eig.ln();
        }
        out += (n - d) * log_det;
    }
    if let Some(sigma_inv) = &params.sigma_inv {
        let t = crate::qstate::trace_product(sigma_inv, rho.matrix()).re;
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        out -= n * d * t.ln();
    }
    out
}

/// Exponent vector of a Dirichlet-type density ∝ ∏ p_k^{α_k}; the sampler
/// draws Gamma(α_k + 1) variates, so each α_k must exceed −1. The optional
/// `center`/`concentration` constructor places the density's mode at a given
/// simplex point.
#[derive(Clone, Debug)]
pub struct DirichletParams {
    alphas: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "alphas",
                reason: "need at least two outcomes".into(),
            });
        }
        for (k, a) in alphas.iter().enumerate() {
            if !(a.is_finite() && *a > -1.0) {
                return Err(Error::InvalidParameter {
                    name: "alphas",
                    reason: format!("alpha[{k}] = {a}; exponents must be finite and > -1"),
                });
            }
        }
        Ok(Self { alphas })
    }

    /// Exponents c·p̂_k, whose density mode on the simplex is exactly the
    /// given center. `concentration` c sets how tightly the draws cluster.
    pub fn centered_at(center: &[f64], concentration: f64) -> Result<Self> {
        let sum: f64 = center.iter().sum();
        if !((sum - 1.0).abs() <= 1e-10) {
            return Err(Error::InvalidParameter {
                name: "center",
                reason: format!("must sum to 1, got {sum}"),
            });
        }
        if center.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidParameter {
                name: "center",
                reason: "entries must be nonnegative".into(),
            });
        }
        if !(concentration > 0.0) {
            return Err(Error::InvalidParameter {
                name: "concentration",
                reason: "must be positive".into(),
            });
        }
        Self::new(center.iter().map(|&p| concentration * p).collect())
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// One draw from the density ∝ ∏ p_k^{α_k} on the simplex, via normalized
/// Gamma(α_k + 1) variates.
pub fn sample_dirichlet(params: &DirichletParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gammas: Vec<Gamma<f64>> = params
        .alphas
        .iter()
        .map(|&a| Gamma::new(a + 1.0, 1.0).expect("shape > 0 by construction"))
        .collect();
    loop {
        let draws: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        // tiny shapes can underflow every variate to zero; redraw
        if sum > 0.0 && sum.is_finite() {
            return draws.into_iter().map(|x| x / sum).collect();
        }
    }
}

/// Haar-random unitary via QR of a complex Gaussian matrix with the phase
/// convention fixed from the R diagonal.
pub fn haar_random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = sample_standard_complex_gaussian(dim, dim, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Affine shift ρ ← (1−t)·ρ + t·ρ₀.
///
/// Experimental: exposed for "shifted" reference ensembles; the mixing state
/// and weight are entirely caller-chosen.
pub fn affine_shift_state(rho: &DensityMatrix, t: f64, toward: &DensityMatrix) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("shift weight must be in [0,1], got {t}"),
        });
    }
    if rho.dim() != toward.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dims {} vs {}",
            rho.dim(),
            toward.dim()
        )));
    }
    let m = rho.matrix().map(|z| z * (1.0 - t)) + toward.matrix().map(|z| z * t);
    Ok(DensityMatrix::from_matrix_unchecked(m))
}
