//! Orthonormal Hermitian (generalized Gell-Mann) basis used to move between
//! matrices and real coordinate vectors: random walks, covariance shaping,
//! and the POM probability map all operate on these coordinates.

use super::CMatrix;
use nalgebra::DVector;
use num_complex::Complex64;

/// Orthonormal basis of d×d Hermitian matrices under the Frobenius inner
/// product. The traceless part has d²−1 elements, ordered as: real
/// off-diagonal pairs (j<k), imaginary off-diagonal pairs (j<k), then the
/// d−1 diagonal elements; the full basis prepends 1/√d.
///
/// All extraction and reconstruction is sparse: O(d²) per matrix, no basis
/// matrices are ever materialized.
#[derive(Clone, Debug)]
pub struct HermitianBasis {
    dim: usize,
}

impl HermitianBasis {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "basis dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of traceless coordinates, d²−1.
    pub fn n_traceless(&self) -> usize {
        self.dim * self.dim - 1
    }

    /// Coordinates of the traceless part of a Hermitian matrix. The trace
    /// component is simply dropped.
    pub fn traceless_coords(&self, m: &CMatrix) -> DVector<f64> {
        let d = self.dim;
        debug_assert_eq!(m.nrows(), d);
        let mut x = DVector::zeros(self.n_traceless());
        let n_off = d * (d - 1) / 2;
        let mut idx = 0;
        for j in 0..d {
            for k in (j + 1)..d {
                let z = m[(j, k)];
                x[idx] = std::f64::consts::SQRT_2 * z.re;
                x[n_off + idx] = -std::f64::consts::SQRT_2 * z.im;
                idx += 1;
            }
        }
        let mean = m.trace().re / d as f64;
        let mut partial = 0.0; // Σ_{j<l} (m_jj − mean)
        for l in 1..d {
            partial += m[(l - 1, l - 1)].re - mean;
            let c = 1.0 / ((l * (l + 1)) as f64).sqrt();
            x[2 * n_off + l - 1] = c * (partial - l as f64 * (m[(l, l)].re - mean));
        }
        x
    }

    /// Full coordinates: [tr(m)/√d, traceless coordinates...].
    pub fn full_coords(&self, m: &CMatrix) -> DVector<f64> {
        let d = self.dim;
        let mut x = DVector::zeros(d * d);
        x[0] = m.trace().re / (d as f64).sqrt();
        x.rows_mut(1, d * d - 1).copy_from(&self.traceless_coords(m));
        x
    }

    /// Adds the traceless matrix with the given coordinates onto `out`.
    pub fn add_traceless(&self, out: &mut CMatrix, x: &DVector<f64>) {
        let d = self.dim;
        debug_assert_eq!(x.len(), self.n_traceless());
        let n_off = d * (d - 1) / 2;
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut idx = 0;
        for j in 0..d {
            for k in (j + 1)..d {
                let re = x[idx] * inv_sqrt2;
                let im = -x[n_off + idx] * inv_sqrt2;
                out[(j, k)] += Complex64::new(re, im);
                out[(k, j)] += Complex64::new(re, -im);
                idx += 1;
            }
        }
        for l in 1..d {
            let c = x[2 * n_off + l - 1] / ((l * (l + 1)) as f64).sqrt();
            for j in 0..l {
                out[(j, j)] += Complex64::new(c, 0.0);
            }
            out[(l, l)] -= Complex64::new(c * l as f64, 0.0);
        }
    }

    pub fn traceless_from_coords(&self, x: &DVector<f64>) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        self.add_traceless(&mut m, x);
        m
    }

    /// Hermitian matrix from full coordinates (including the trace element).
    pub fn matrix_from_full_coords(&self, x: &DVector<f64>) -> CMatrix {
        let d = self.dim;
        debug_assert_eq!(x.len(), d * d);
        let diag = x[0] / (d as f64).sqrt();
        let mut m = CMatrix::identity(d, d).map(|z| z * diag);
        let rest = x.rows(1, d * d - 1).into_owned();
        self.add_traceless(&mut m, &rest);
        m
    }

    /// 1/d plus the traceless matrix with coordinates `x`: the unit-trace
    /// state a covariance-shaped walk addresses.
    pub fn state_from_coords(&self, x: &DVector<f64>) -> CMatrix {
        let d = self.dim;
        let mut m = CMatrix::identity(d, d).map(|z| z / d as f64);
        self.add_traceless(&mut m, x);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{hermitian_part, trace_product};
    use approx::assert_relative_eq;

    fn random_hermitian(d: usize, seed: u64) -> CMatrix {
        // deterministic pseudo-random entries, good enough for round trips
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMatrix::from_fn(d, d, |_, _| Complex64::new(next(), next()));
        hermitian_part(&m)
    }

    #[test]
    fn coords_round_trip() {
        for d in [2usize, 3, 5] {
            let basis = HermitianBasis::new(d);
            let h = random_hermitian(d, 42 + d as u64);
            let x = basis.full_coords(&h);
            let back = basis.matrix_from_full_coords(&x);
            assert!((&back - &h).map(|z| z.norm()).max() < 1e-13);

            // traceless part round-trips as well
            let t = basis.traceless_coords(&h);
            let tm = basis.traceless_from_coords(&t);
            assert!(tm.trace().norm() < 1e-13);
            let y = basis.traceless_coords(&tm);
            assert_relative_eq!((&y - &t).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn coordinates_preserve_frobenius_inner_product() {
        let d = 4;
        let basis = HermitianBasis::new(d);
        let a = random_hermitian(d, 7);
        let b = random_hermitian(d, 9);
        let xa = basis.full_coords(&a);
        let xb = basis.full_coords(&b);
        let frob = trace_product(&a, &b).re;
        assert_relative_eq!(xa.dot(&xb), frob, epsilon = 1e-12);
    }

    #[test]
    fn state_from_zero_coords_is_maximally_mixed() {
        let basis = HermitianBasis::new(3);
        let m = basis.state_from_coords(&DVector::zeros(8));
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert_relative_eq!(m[(i, j)].re, expect, epsilon = 1e-15);
                assert_relative_eq!(m[(i, j)].im, 0.0, epsilon = 1e-15);
            }
        }
    }
}
