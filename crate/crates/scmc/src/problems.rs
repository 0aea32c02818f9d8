//! Concrete sampling problems wiring targets to the engine's point types:
//! matrix-space walks over density matrices and simplex-space walks over POM
//! probability vectors.

use crate::engine::{ConstraintSpec, Eval, Problem};
use crate::error::{Error, Result};
use crate::qstate::DensityMatrix;
use crate::sampling::{log_density_wishart, DirichletParams, WishartParams};
use crate::targets::{physicality_kappa, BoundEntanglementConstraints, DirichletTarget};

/// ln ∏ p_k^{e_k}; −∞ on the simplex boundary whenever an exponent is active.
fn log_simplex_density(exponents: &[f64], p: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (e, &pk) in exponents.iter().zip(p) {
        if *e == 0.0 {
            continue;
        }
        if pk <= 0.0 {
            return f64::NEG_INFINITY;
        }
        sum += e * pk.ln();
    }
    sum
}

/// Dirichlet target explored in POM probability coordinates. The reference is
/// uniform on the simplex unless Dirichlet exponents are supplied; physicality
/// of the reconstructed state enters as the soft constraint κ_p = min
/// eigenvalue.
pub struct SimplexDirichletProblem {
    target: DirichletTarget,
    reference: Option<DirichletParams>,
}

impl SimplexDirichletProblem {
    pub fn new(target: DirichletTarget) -> Self {
        Self {
            target,
            reference: None,
        }
    }

    pub fn with_reference(mut self, reference: DirichletParams) -> Result<Self> {
        if reference.len() != self.target.n_outcomes() {
            return Err(Error::DimensionMismatch(format!(
                "reference has {} exponents for a {}-outcome target",
                reference.len(),
                self.target.n_outcomes()
            )));
        }
        self.reference = Some(reference);
        Ok(self)
    }

    pub fn target(&self) -> &DirichletTarget {
        &self.target
    }

    pub fn reference(&self) -> Option<&DirichletParams> {
        self.reference.as_ref()
    }

    /// The physicality constraint spec pipelines attach to this problem.
    pub fn physicality_spec(a_p: f64) -> ConstraintSpec {
        ConstraintSpec::soft(a_p)
    }

    pub fn state_of(&self, p: &[f64]) -> DensityMatrix {
        let mat = self.target.probability_map().state_matrix_minnorm(p);
        DensityMatrix::from_matrix_unchecked(mat)
    }
}

impl Problem for SimplexDirichletProblem {
    type Point = Vec<f64>;

    fn evaluate(&self, p: &Vec<f64>) -> Eval {
        let log_reference = match &self.reference {
            None => 0.0,
            Some(params) => log_simplex_density(params.alphas(), p),
        };
        Eval {
            log_target: self.target.log_density_probs(p),
            log_reference,
            kappas: vec![physicality_kappa(self.target.probability_map(), p)],
        }
    }
}

/// Dirichlet target explored directly in state space, with a Wishart-type
/// reference; physicality is kept hard by the matrix walk, so no κ is needed.
pub struct MatrixDirichletProblem {
    target: DirichletTarget,
    reference: WishartParams,
}

impl MatrixDirichletProblem {
    pub fn new(target: DirichletTarget, reference: WishartParams) -> Result<Self> {
        if target.dim() != reference.dim() {
            return Err(crate::error::Error::DimensionMismatch(format!(
                "target dim {} vs reference dim {}",
                target.dim(),
                reference.dim()
            )));
        }
        Ok(Self { target, reference })
    }

    pub fn target(&self) -> &DirichletTarget {
        &self.target
    }

    pub fn reference(&self) -> &WishartParams {
        &self.reference
    }
}

impl Problem for MatrixDirichletProblem {
    type Point = DensityMatrix;

    fn evaluate(&self, rho: &DensityMatrix) -> Eval {
        Eval {
            log_target: self.target.log_density_state(rho),
            log_reference: log_density_wishart(rho, &self.reference),
            kappas: Vec::new(),
        }
    }
}

/// Which of the two entanglement criteria a bound-entanglement run imposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriterionSet {
    /// PPT ∧ CCNR: the sufficient pair for bound entanglement.
    Both,
    PptOnly,
    CcnrOnly,
}

/// Uniform Hilbert–Schmidt exploration constrained toward the chosen
/// criteria: f = g (flat ratio), all the work is in the κ indicators.
pub struct BoundEntangledProblem {
    constraints: BoundEntanglementConstraints,
    criteria: CriterionSet,
}

impl BoundEntangledProblem {
    pub fn new(constraints: BoundEntanglementConstraints, criteria: CriterionSet) -> Self {
        Self {
            constraints,
            criteria,
        }
    }

    pub fn constraints(&self) -> &BoundEntanglementConstraints {
        &self.constraints
    }

    pub fn criteria(&self) -> CriterionSet {
        self.criteria
    }

    /// Constraint specs aligned with the κ vector this problem emits.
    pub fn constraint_specs(&self) -> Vec<ConstraintSpec> {
        match self.criteria {
            CriterionSet::Both => vec![
                self.constraints.ppt_spec(),
                self.constraints.ccnr_spec(),
            ],
            CriterionSet::PptOnly => vec![self.constraints.ppt_spec()],
            CriterionSet::CcnrOnly => vec![self.constraints.ccnr_spec()],
        }
    }
}

impl Problem for BoundEntangledProblem {
    type Point = DensityMatrix;

    fn evaluate(&self, rho: &DensityMatrix) -> Eval {
        let kappas = match self.criteria {
            CriterionSet::Both => {
                let (k1, k2) = self.constraints.kappas(rho);
                vec![k1, k2]
            }
            CriterionSet::PptOnly => {
                vec![crate::qstate::min_pt_eigenvalue_raw(
                    rho.matrix(),
                    self.constraints.dims,
                )]
            }
            CriterionSet::CcnrOnly => {
                vec![crate::qstate::ccnr_value_raw(rho.matrix(), self.constraints.dims) - 1.0]
            }
        };
        Eval {
            log_target: 0.0,
            log_reference: 0.0,
            kappas,
        }
    }
}
