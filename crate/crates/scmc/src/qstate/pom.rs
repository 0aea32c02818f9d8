//! Probability-operator measurements and the linear map between states and
//! outcome probabilities.

use super::basis::HermitianBasis;
use super::{
    hermiticity_error, min_eigenvalue_raw, CMatrix, DensityMatrix, HERMITICITY_TOL,
    PHYSICALITY_TOL,
};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Smallest eigenvalue a POM effect may have.
pub const POM_PSD_TOL: f64 = 1e-12;
/// Entrywise tolerance for Σ_k Π_k = 1.
pub const POM_SUM_TOL: f64 = 1e-10;
/// |Σ p_k − 1| accepted when reconstructing a state from probabilities.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// A positive-operator measurement: K positive-semidefinite effects summing
/// to the identity.
#[derive(Clone, Debug)]
pub struct Pom {
    effects: Vec<CMatrix>,
    dim: usize,
}

impl Pom {
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidPom("no effects".into()));
        }
        let dim = effects[0].nrows();
        let mut sum = CMatrix::zeros(dim, dim);
        for (k, e) in effects.iter().enumerate() {
            if !e.is_square() || e.nrows() != dim {
                return Err(Error::InvalidPom(format!(
                    "effect {k} is {}x{}, expected {dim}x{dim}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            let herm = hermiticity_error(e);
            if !(herm <= HERMITICITY_TOL) {
                return Err(Error::InvalidPom(format!(
                    "effect {k} is not Hermitian (deviation {herm:e})"
                )));
            }
            let min_eig = min_eigenvalue_raw(e);
            if !(min_eig >= -POM_PSD_TOL) {
                return Err(Error::InvalidPom(format!(
                    "effect {k} is not positive semidefinite (min eigenvalue {min_eig:e})"
                )));
            }
            sum += e;
        }
        let dev = (&sum - CMatrix::identity(dim, dim))
            .map(|z| z.norm())
            .max();
        if !(dev <= POM_SUM_TOL) {
            return Err(Error::InvalidPom(format!(
                "effects do not sum to the identity (max deviation {dev:e})"
            )));
        }
        Ok(Self { effects, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn outcomes(&self) -> &[CMatrix] {
        &self.effects
    }

    /// True when the effects span the full d²-dimensional Hermitian space,
    /// i.e. outcome probabilities determine the state uniquely.
    pub fn is_informationally_complete(&self) -> bool {
        ProbabilityMap::new(self).is_informationally_complete()
    }
}

/// The linear map p = M·x from Hermitian-basis coordinates to outcome
/// probabilities, with its pseudoinverse for the reverse direction.
#[derive(Clone, Debug)]
pub struct ProbabilityMap {
    basis: HermitianBasis,
    map: DMatrix<f64>,  // K × d²
    pinv: DMatrix<f64>, // d² × K
    rank: usize,
    dim: usize,
}

impl ProbabilityMap {
    pub fn new(pom: &Pom) -> Self {
        let d = pom.dim();
        let k = pom.len();
        let basis = HermitianBasis::new(d);
        let mut map = DMatrix::zeros(k, d * d);
        for (row, e) in pom.outcomes().iter().enumerate() {
            map.row_mut(row).copy_from(&basis.full_coords(e).transpose());
        }
        let svd = map.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let rcond = 1e-12 * smax.max(1.0);
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > rcond)
            .count();
        let pinv = svd
            .pseudo_inverse(rcond)
            .expect("pseudo-inverse of a finite matrix");
        Self {
            basis,
            map,
            pinv,
            rank,
            dim: d,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_outcomes(&self) -> usize {
        self.map.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_informationally_complete(&self) -> bool {
        self.rank == self.dim * self.dim
    }

    /// p = M·coords(m). Same values as tr(Π_k m), in one matrix-vector product.
    pub fn probabilities(&self, m: &CMatrix) -> Vec<f64> {
        let x = self.basis.full_coords(m);
        let p = &self.map * x;
        p.iter().cloned().collect()
    }

    /// Minimum-Frobenius-norm Hermitian matrix with the given outcome
    /// probabilities. No validation; use [`ProbabilityMap::to_state`] at API
    /// boundaries.
    pub fn state_matrix_minnorm(&self, p: &[f64]) -> CMatrix {
        debug_assert_eq!(p.len(), self.n_outcomes());
        let x = &self.pinv * DVector::from_column_slice(p);
        self.basis.matrix_from_full_coords(&x)
    }

    /// Reconstructs the Hermitian unit-trace matrix with tr(Π_k ρ) = p_k.
    ///
    /// For an informationally complete POM the solution is unique. For a
    /// rank-deficient map the minimum-Frobenius-norm solution is returned —
    /// the representative closest to the maximally mixed state, which is the
    /// natural slice when a sampler lives in the POM's probability
    /// coordinates. Probabilities that no state can produce (inconsistent
    /// with the map's image) are rejected.
    pub fn to_state(&self, p: &[f64]) -> Result<StateReconstruction> {
        if p.len() != self.n_outcomes() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for a {}-outcome POM",
                p.len(),
                self.n_outcomes()
            )));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite probability".into()));
        }
        let sum: f64 = p.iter().sum();
        if !((sum - 1.0).abs() <= PROB_SUM_TOL) {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        let pv = DVector::from_column_slice(p);
        let x = &self.pinv * &pv;
        let residual = (&self.map * &x - &pv).amax();
        if !(residual <= PROB_SUM_TOL) {
            return Err(Error::InvalidPom(format!(
                "probabilities are inconsistent with the POM (residual {residual:e}); \
                 the map has rank {} of {}",
                self.rank,
                self.dim * self.dim
            )));
        }
        let mut h = self.basis.matrix_from_full_coords(&x);
        // pin the trace exactly; the solve leaves ~1e-15 drift
        let defect = (1.0 - h.trace().re) / self.dim as f64;
        for i in 0..self.dim {
            h[(i, i)] += Complex64::new(defect, 0.0);
        }
        let min_eigenvalue = min_eigenvalue_raw(&h);
        Ok(StateReconstruction {
            state: DensityMatrix::from_matrix_unchecked(h),
            min_eigenvalue,
            physical: min_eigenvalue >= -PHYSICALITY_TOL,
        })
    }
}

/// Result of mapping probabilities back to a state: the reconstruction plus
/// its physicality verdict.
#[derive(Clone, Debug)]
pub struct StateReconstruction {
    pub state: DensityMatrix,
    pub min_eigenvalue: f64,
    pub physical: bool,
}

/// Reconstructs the state with outcome probabilities `p` under `pom`; see
/// [`ProbabilityMap::to_state`]. Builds the map on every call — cache a
/// [`ProbabilityMap`] in loops.
pub fn dirichlet_to_state(p: &[f64], pom: &Pom) -> Result<StateReconstruction> {
    ProbabilityMap::new(pom).to_state(p)
}

fn qubit_effect(weight: f64, axis: [f64; 3]) -> CMatrix {
    // weight * (1 + axis·σ)
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(weight * (1.0 + axis[2]), 0.0),
            Complex64::new(weight * axis[0], -weight * axis[1]),
            Complex64::new(weight * axis[0], weight * axis[1]),
            Complex64::new(weight * (1.0 - axis[2]), 0.0),
        ],
    )
}

/// Bloch vectors of the single-qubit tetrahedron POM, (±1,±1,±1)/√3 with an
/// even number of minus signs. Any regular tetrahedron works; this
/// orientation is fixed so that simulated click data is reproducible.
pub const TETRAHEDRON_AXES: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

fn single_qubit_tetrahedron() -> Vec<CMatrix> {
    let s = 1.0 / 3.0f64.sqrt();
    TETRAHEDRON_AXES
        .iter()
        .map(|a| qubit_effect(0.25, [a[0] * s, a[1] * s, a[2] * s]))
        .collect()
}

/// The 4ⁿ-outcome tensor-product tetrahedron POM on n qubits. Outcomes are
/// ordered by base-4 digits, most significant qubit first.
pub fn build_product_tetrahedron_pom(n_qubits: usize) -> Result<Pom> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter {
            name: "n_qubits",
            reason: "need at least one qubit".into(),
        });
    }
    if n_qubits > 6 {
        return Err(Error::InvalidParameter {
            name: "n_qubits",
            reason: "product tetrahedron POM beyond 6 qubits is not supported".into(),
        });
    }
    let single = single_qubit_tetrahedron();
    let mut effects = single.clone();
    for _ in 1..n_qubits {
        let mut next = Vec::with_capacity(effects.len() * 4);
        for e in &effects {
            for s in &single {
                next.push(e.kronecker(s));
            }
        }
        effects = next;
    }
    Pom::new(effects)
}

/// The symmetric trine POM: three effects (1/3)(1 + u_k·σ) with u_k equally
/// spaced in the equatorial (x,y) plane. Not informationally complete — its
/// probabilities determine only the equatorial Bloch coordinates, so
/// reconstructions live on the z = 0 disk.
pub fn build_trine_pom() -> Pom {
    let effects = (0..3)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            qubit_effect(1.0 / 3.0, [phi.cos(), phi.sin(), 0.0])
        })
        .collect();
    Pom::new(effects).expect("trine construction is exact")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{pom_probabilities, trace_product};
    use approx::assert_relative_eq;

    #[test]
    fn tetrahedron_normalization() {
        let pom = build_product_tetrahedron_pom(1).unwrap();
        assert_eq!(pom.len(), 4);
        for e in pom.outcomes() {
            assert_relative_eq!(e.trace().re, 0.5, epsilon = 1e-15);
        }
        // pairwise overlaps identical by tetrahedral symmetry: (1 + a_j·a_k)/8 = 1/12
        for j in 0..4 {
            for k in 0..4 {
                if j != k {
                    let overlap = trace_product(&pom.outcomes()[j], &pom.outcomes()[k]).re;
                    assert_relative_eq!(overlap, 1.0 / 12.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn product_tetrahedron_two_qubits() {
        let pom = build_product_tetrahedron_pom(2).unwrap();
        assert_eq!(pom.len(), 16);
        assert_eq!(pom.dim(), 4);
        for e in pom.outcomes() {
            assert_relative_eq!(e.trace().re, 0.25, epsilon = 1e-14);
        }
        assert!(pom.is_informationally_complete());
    }

    #[test]
    fn probabilities_of_symmetric_states() {
        let pom = build_product_tetrahedron_pom(1).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        for p in pom_probabilities(&mixed, &pom).unwrap() {
            assert_relative_eq!(p, 0.25, epsilon = 1e-14);
        }

        let trine = build_trine_pom();
        for p in pom_probabilities(&mixed, &trine).unwrap() {
            assert_relative_eq!(p, 1.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_outcome_projective_probabilities() {
        let up = qubit_effect(0.5, [0.0, 0.0, 1.0]);
        let down = qubit_effect(0.5, [0.0, 0.0, -1.0]);
        let pom = Pom::new(vec![up, down]).unwrap();
        let zero = DensityMatrix::from_bloch([0.0, 0.0, 1.0]);
        let p = pom_probabilities(&zero, &pom).unwrap();
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(p[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn trine_is_not_informationally_complete() {
        let trine = build_trine_pom();
        assert!(!trine.is_informationally_complete());
        let map = ProbabilityMap::new(&trine);
        assert_eq!(map.rank(), 3);
    }

    #[test]
    fn tetrahedron_reconstruction_round_trip() {
        let pom = build_product_tetrahedron_pom(1).unwrap();
        assert!(pom.is_informationally_complete());
        let rho = DensityMatrix::from_bloch([0.2, -0.4, 0.3]);
        let p = pom_probabilities(&rho, &pom).unwrap();
        let rec = dirichlet_to_state(&p, &pom).unwrap();
        assert!(rec.physical);
        let diff = (rec.state.matrix() - rho.matrix()).map(|z| z.norm()).max();
        assert!(diff < 1e-10, "round trip drift {diff:e}");
        let p2 = pom_probabilities(&rec.state, &pom).unwrap();
        for (a, b) in p.iter().zip(&p2) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn symmetric_probabilities_give_maximally_mixed() {
        let pom = build_product_tetrahedron_pom(1).unwrap();
        let rec = dirichlet_to_state(&[0.25; 4], &pom).unwrap();
        let diff = (rec.state.matrix() - DensityMatrix::maximally_mixed(2).matrix())
            .map(|z| z.norm())
            .max();
        assert!(diff < 1e-12);
    }

    #[test]
    fn simplex_vertex_is_flagged_non_physical() {
        let pom = build_product_tetrahedron_pom(1).unwrap();
        let rec = dirichlet_to_state(&[1.0, 0.0, 0.0, 0.0], &pom).unwrap();
        assert!(!rec.physical);
        // p_k = (1 + a_k·r)/4 forces r = 3·a_1: Bloch norm 3, min eigenvalue −1
        let r = rec.state.bloch_vector().unwrap();
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        assert_relative_eq!(norm, 3.0, epsilon = 1e-9);
        assert_relative_eq!(rec.min_eigenvalue, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn trine_reconstruction_lives_on_the_equatorial_disk() {
        let trine = build_trine_pom();
        let map = ProbabilityMap::new(&trine);
        let rho = DensityMatrix::from_bloch([0.3, -0.2, 0.0]);
        let p = pom_probabilities(&rho, &trine).unwrap();
        let rec = map.to_state(&p).unwrap();
        let r = rec.state.bloch_vector().unwrap();
        assert_relative_eq!(r[0], 0.3, epsilon = 1e-10);
        assert_relative_eq!(r[1], -0.2, epsilon = 1e-10);
        assert_relative_eq!(r[2], 0.0, epsilon = 1e-12);

        // a z-tilted state reconstructs to its equatorial projection
        let tilted = DensityMatrix::from_bloch([0.3, -0.2, 0.5]);
        let p2 = pom_probabilities(&tilted, &trine).unwrap();
        let rec2 = map.to_state(&p2).unwrap();
        let r2 = rec2.state.bloch_vector().unwrap();
        assert_relative_eq!(r2[0], 0.3, epsilon = 1e-10);
        assert_relative_eq!(r2[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bad_probability_vectors_are_rejected() {
        let pom = build_product_tetrahedron_pom(1).unwrap();
        assert!(dirichlet_to_state(&[0.5, 0.5], &pom).is_err());
        assert!(dirichlet_to_state(&[0.7, 0.2, 0.2, 0.2], &pom).is_err());
        assert!(dirichlet_to_state(&[f64::NAN, 0.5, 0.25, 0.25], &pom).is_err());
    }

    #[test]
    fn pom_validation_rejects_non_psd_and_bad_sums() {
        // effects summing to identity but one not PSD
        let a = qubit_effect(0.75, [0.0, 0.0, 4.0 / 3.0]);
        let b = CMatrix::identity(2, 2) - &a;
        assert!(matches!(Pom::new(vec![a, b]), Err(Error::InvalidPom(_))));

        // effects not summing to identity
        let half = qubit_effect(0.25, [0.0, 0.0, 0.0]);
        assert!(matches!(
            Pom::new(vec![half.clone(), half]),
            Err(Error::InvalidPom(_))
        ));
    }
}
