//! Density matrices and the linear-algebra kernels everything else consumes:
//! Hermitian eigensolves, partial transposition, realignment, and POM
//! probabilities.

mod basis;
mod pom;

pub use basis::HermitianBasis;
pub use pom::{
    build_product_tetrahedron_pom, build_trine_pom, dirichlet_to_state, Pom, ProbabilityMap,
    StateReconstruction,
};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest entrywise deviation from Hermiticity accepted by validating
/// constructors.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Largest |tr ρ − 1| accepted by validating constructors.
pub const TRACE_TOL: f64 = 1e-12;
/// A state counts as physical when its smallest eigenvalue is ≥ −PHYSICALITY_TOL.
pub const PHYSICALITY_TOL: f64 = 1e-10;

/// (m + m†)/2. Arithmetic on Hermitian matrices can leave picoscale skew;
/// symmetrize before any eigensolve that assumes Hermiticity.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    let mut h = m.adjoint();
    h += m;
    h.map(|z| z * 0.5)
}

pub(crate) fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue_raw(m: &CMatrix) -> f64 {
    let eigs = hermitian_part(m).symmetric_eigenvalues();
    eigs.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// A Hermitian unit-trace matrix. Positivity is *not* enforced by the
/// constructor: constraint schedules deliberately walk through non-physical
/// trial states, so physicality is a separate query ([`DensityMatrix::is_physical`]).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (≤ [`HERMITICITY_TOL`]) and unit trace
    /// (≤ [`TRACE_TOL`]).
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square and nonempty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm = hermiticity_error(&mat);
        if !(herm <= HERMITICITY_TOL) {
            return Err(Error::InvalidInput(format!(
                "matrix is not Hermitian: max |m - m\u{2020}| = {herm:e}"
            )));
        }
        let tr = mat.trace();
        let tr_err = (tr - Complex64::new(1.0, 0.0)).norm();
        if !(tr_err <= TRACE_TOL) {
            return Err(Error::InvalidInput(format!(
                "matrix trace is not 1: |tr - 1| = {tr_err:e}"
            )));
        }
        Ok(Self { mat })
    }

    /// Skips validation; for hot paths whose construction is Hermitian and
    /// unit-trace by design.
    pub fn from_matrix_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let m = CMatrix::identity(dim, dim).map(|z| z / dim as f64);
        Self { mat: m }
    }

    /// Qubit state (1 + r·σ)/2. Bloch vectors with |r| > 1 yield valid
    /// (Hermitian, unit-trace) but non-physical matrices.
    pub fn from_bloch(r: [f64; 3]) -> Self {
        let half = 0.5;
        let mat = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(half * (1.0 + r[2]), 0.0),
                Complex64::new(half * r[0], -half * r[1]),
                Complex64::new(half * r[0], half * r[1]),
                Complex64::new(half * (1.0 - r[2]), 0.0),
            ],
        );
        Self { mat }
    }

    /// |ψ⟩⟨ψ| from an unnormalized ket.
    pub fn pure_from_ket(ket: &CVector) -> Result<Self> {
        let norm = ket.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("zero ket".into()));
        }
        let v = ket.map(|z| z / norm);
        let mat = &v * v.adjoint();
        Ok(Self { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Eigenvalues sorted ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eigs = hermitian_part(&self.mat).symmetric_eigenvalues();
        let mut v: Vec<f64> = eigs.iter().cloned().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue_raw(&self.mat)
    }

    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue() >= -PHYSICALITY_TOL
    }

    /// tr ρ².
    pub fn purity(&self) -> f64 {
        trace_product(&self.mat, &self.mat).re
    }

    /// Bloch vector of a qubit state.
    pub fn bloch_vector(&self) -> Result<[f64; 3]> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "bloch vector needs a qubit, got dim {}",
                self.dim()
            )));
        }
        let m = &self.mat;
        Ok([
            2.0 * m[(1, 0)].re,
            2.0 * m[(1, 0)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ])
    }
}

/// Subsystem dimensions of a bipartite system; index convention is
/// row = a·d_B + i with a addressing A and i addressing B.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BipartiteDims {
    pub dim_a: usize,
    pub dim_b: usize,
}

impl BipartiteDims {
    pub fn new(dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::InvalidParameter {
                name: "dims",
                reason: "subsystem dimensions must be positive".into(),
            });
        }
        Ok(Self { dim_a, dim_b })
    }

    pub fn total(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if self.total() != dim {
            return Err(Error::DimensionMismatch(format!(
                "bipartite split {}x{} does not match matrix dim {}",
                self.dim_a, self.dim_b, dim
            )));
        }
        Ok(())
    }
}

/// ρ^{T_B}: transposes the d_B×d_B block structure in place. Exactly
/// Hermitian for Hermitian input.
pub fn partial_transpose_raw(m: &CMatrix, dims: BipartiteDims) -> CMatrix {
    let db = dims.dim_b;
    CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        let (a, i) = (r / db, r % db);
        let (b, j) = (c / db, c % db);
        m[(a * db + j, b * db + i)]
    })
}

pub fn partial_transpose(rho: &DensityMatrix, dims: BipartiteDims) -> Result<CMatrix> {
    dims.check(rho.dim())?;
    Ok(partial_transpose_raw(rho.matrix(), dims))
}

/// κ₁: smallest eigenvalue of the partial transpose; ≥ 0 is the PPT criterion.
pub fn min_pt_eigenvalue(rho: &DensityMatrix, dims: BipartiteDims) -> Result<f64> {
    dims.check(rho.dim())?;
    Ok(min_pt_eigenvalue_raw(rho.matrix(), dims))
}

pub fn min_pt_eigenvalue_raw(m: &CMatrix, dims: BipartiteDims) -> f64 {
    min_eigenvalue_raw(&partial_transpose_raw(m, dims))
}

/// Realigned matrix of shape d_A² × d_B²: entry ((i,j),(k,l)) = ρ_{(i k),(j l)}
/// with i,j addressing A and k,l addressing B. Realignment of a product
/// A ⊗ B equals vec(A)·vec(B)ᵀ with row-major vec, which pins the convention:
/// R = 2 for a Bell pair and R = 1/√(d_A d_B) for the maximally mixed state.
pub fn realign_raw(m: &CMatrix, dims: BipartiteDims) -> CMatrix {
    let (da, db) = (dims.dim_a, dims.dim_b);
    CMatrix::from_fn(da * da, db * db, |r, c| {
        let (i, j) = (r / da, r % da);
        let (k, l) = (c / db, c % db);
        m[(i * db + k, j * db + l)]
    })
}

pub fn realign(rho: &DensityMatrix, dims: BipartiteDims) -> Result<CMatrix> {
    dims.check(rho.dim())?;
    Ok(realign_raw(rho.matrix(), dims))
}

/// R: the trace norm (sum of singular values) of the realigned matrix.
/// R > 1 certifies entanglement; κ₂ = R − 1.
pub fn ccnr_value(rho: &DensityMatrix, dims: BipartiteDims) -> Result<f64> {
    dims.check(rho.dim())?;
    Ok(ccnr_value_raw(rho.matrix(), dims))
}

pub fn ccnr_value_raw(m: &CMatrix, dims: BipartiteDims) -> f64 {
    realign_raw(m, dims).singular_values().iter().sum()
}

/// tr(a·b) without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// p_k = Re tr(Π_k ρ).
pub fn pom_probabilities(rho: &DensityMatrix, pom: &Pom) -> Result<Vec<f64>> {
    if pom.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "POM dim {} does not match state dim {}",
            pom.dim(),
            rho.dim()
        )));
    }
    Ok(pom
        .outcomes()
        .iter()
        .map(|e| trace_product(e, rho.matrix()).re)
        .collect())
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    )
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
        ],
    )
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ],
    )
}
