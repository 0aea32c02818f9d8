//! Bridging densities and soft-constraint indicators.
//!
//! The run interpolates h_i(x) = f(x)^{τ_i} g(x)^{1−τ_i} with each inequality
//! constraint κ(x) ≥ 0 entering through the smoothed indicator
//! I_{κ,i}(x) = [1 + tanh(aτ_i κ(x))]/2, whose hardness aτ_i grows along the
//! schedule. Everything is computed in log space; −∞ is the absorbing
//! "density zero" sentinel.

use crate::error::{Error, Result};
use crate::Eval;

/// Final hard-form slack: κ ≥ −HARD_KAPPA_TOL counts as satisfied.
pub const HARD_KAPPA_TOL: f64 = 1e-10;

/// ln(1 + e^x) without overflow at either end.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln h for h = f^τ g^{1−τ}. Endpoints are exact; −∞ in either input with a
/// nonzero exponent yields −∞.
pub fn bridge_log_density(log_f: f64, log_g: f64, tau: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&tau), "tau out of [0,1]: {tau}");
    if tau <= 0.0 {
        return log_g;
    }
    if tau >= 1.0 {
        return log_f;
    }
    let v = tau * log_f + (1.0 - tau) * log_g;
    if v.is_nan() {
        // −∞·τ + ∞·(1−τ) style collisions: treat as out of support
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// ln I_{κ,i} = ln([1 + tanh(aτκ)]/2), computed as −ln(1 + e^{−2aτκ}) so the
/// deep-violation tail underflows to −∞ instead of rounding tanh to −1.
pub fn soft_indicator_log(kappa: f64, a: f64, tau: f64) -> f64 {
    debug_assert!(a > 0.0, "indicator sharpness must be positive");
    let hardness = a * tau;
    if hardness == 0.0 {
        // indicator is exactly 1/2 regardless of κ (even ±∞)
        return -std::f64::consts::LN_2;
    }
    let v = -softplus(-2.0 * hardness * kappa);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Soft indicator for the λ-region constraint f(x) ≥ λF, imposed on logs
/// because f spans hundreds of orders of magnitude: κ = ln f − ln λ − ln F.
/// λ = 0 is the whole space (indicator 1).
pub fn lambda_log_indicator(log_f: f64, lambda: f64, log_peak: f64, a: f64, tau: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    soft_indicator_log(log_f - lambda.ln() - log_peak, a, tau)
}

/// How one κ component participates in the run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintMode {
    /// tanh indicator with sharpness `a`, hardening as aτ.
    Soft { a: f64 },
    /// Step indicator at every τ: 0 when κ ≥ −HARD_KAPPA_TOL, −∞ otherwise.
    Hard,
}

/// One inequality constraint κ ≥ 0 plus its final acceptance cut.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintSpec {
    pub mode: ConstraintMode,
    /// Final rejection keeps κ ≥ `final_min` (strictly > when `final_strict`).
    pub final_min: f64,
    pub final_strict: bool,
}

impl ConstraintSpec {
    /// Soft constraint with the default final cut κ ≥ −HARD_KAPPA_TOL.
    pub fn soft(a: f64) -> Self {
        Self {
            mode: ConstraintMode::Soft { a },
            final_min: -HARD_KAPPA_TOL,
            final_strict: false,
        }
    }

    pub fn hard() -> Self {
        Self {
            mode: ConstraintMode::Hard,
            final_min: -HARD_KAPPA_TOL,
            final_strict: false,
        }
    }

    pub fn with_final_cut(mut self, min: f64, strict: bool) -> Self {
        self.final_min = min;
        self.final_strict = strict;
        self
    }

    pub fn log_indicator(&self, kappa: f64, tau: f64) -> f64 {
        match self.mode {
            ConstraintMode::Soft { a } => soft_indicator_log(kappa, a, tau),
            ConstraintMode::Hard => {
                if kappa >= -HARD_KAPPA_TOL {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn final_pass(&self, kappa: f64) -> bool {
        if self.final_strict {
            kappa > self.final_min
        } else {
            kappa >= self.final_min
        }
    }
}

/// ln[h_i(x) · ∏_j I_{κ_j,i}(x)]: the bridge density with every constraint's
/// indicator folded in at hardness aτ.
pub fn constrained_log_density(
    log_f: f64,
    log_g: f64,
    kappas: &[f64],
    constraints: &[ConstraintSpec],
    tau: f64,
) -> f64 {
    debug_assert_eq!(
        kappas.len(),
        constraints.len(),
        "one κ value per constraint"
    );
    let mut v = bridge_log_density(log_f, log_g, tau);
    for (c, &k) in constraints.iter().zip(kappas) {
        v += c.log_indicator(k, tau);
    }
    v
}

/// τ_i = i/N_τ, i = 0..N_τ: the arithmetic interpolation schedule.
#[derive(Clone, Copy, Debug)]
pub struct BridgeSchedule {
    n_steps: usize,
}

impl BridgeSchedule {
    pub fn new(n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                reason: "need at least one bridge step".into(),
            });
        }
        Ok(Self { n_steps })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn tau(&self, step: usize) -> f64 {
        debug_assert!(step <= self.n_steps);
        step as f64 / self.n_steps as f64
    }
}

/// The sequence of per-step log densities an SCMC run moves through, plus the
/// hard acceptance rule applied after the final propagation.
pub trait DensitySchedule: Sync {
    fn n_steps(&self) -> usize;
    /// Schedule parameter at `step` for diagnostics (τ_i or λ_j).
    fn value(&self, step: usize) -> f64;
    fn log_density(&self, eval: &Eval, step: usize) -> f64;
    fn final_accept(&self, eval: &Eval) -> bool;
}

/// Reference-to-target interpolation with hardening constraint indicators:
/// the standard SCMC schedule.
#[derive(Clone, Debug)]
pub struct GeometricBridge {
    pub schedule: BridgeSchedule,
    pub constraints: Vec<ConstraintSpec>,
}

impl GeometricBridge {
    pub fn new(n_steps: usize, constraints: Vec<ConstraintSpec>) -> Result<Self> {
        Ok(Self {
            schedule: BridgeSchedule::new(n_steps)?,
            constraints,
        })
    }
}

impl DensitySchedule for GeometricBridge {
    fn n_steps(&self) -> usize {
        self.schedule.n_steps()
    }

    fn value(&self, step: usize) -> f64 {
        self.schedule.tau(step)
    }

    fn log_density(&self, eval: &Eval, step: usize) -> f64 {
        constrained_log_density(
            eval.log_target,
            eval.log_reference,
            &eval.kappas,
            &self.constraints,
            self.schedule.tau(step),
        )
    }

    fn final_accept(&self, eval: &Eval) -> bool {
        self.constraints
            .iter()
            .zip(&eval.kappas)
            .all(|(c, &k)| c.final_pass(k))
    }
}

/// Uniform sampling of the nested regions f ≥ λF along an ascending λ
/// ladder. The run starts inside the largest (bottom) region, and every step
/// restricts to the next smaller one — restricting a uniform population
/// keeps it uniform, so the ladder never owes the kernel relaxation work the
/// way an expanding sequence would. Step 0 repeats the bottom value, making
/// the first reweight a no-op while the kernel decorrelates the seeded
/// start. The λ indicator runs at fixed hardness, and any extra constraints
/// (e.g. physicality) apply at full strength throughout.
#[derive(Clone, Debug)]
pub struct LambdaAscent {
    lambdas: Vec<f64>,
    hardness: f64,
    log_peak: f64,
    constraints: Vec<ConstraintSpec>,
}

impl LambdaAscent {
    pub fn new(
        lambdas: Vec<f64>,
        hardness: f64,
        log_peak: f64,
        constraints: Vec<ConstraintSpec>,
    ) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidParameter {
                name: "lambdas",
                reason: "need at least one λ value".into(),
            });
        }
        let ascending = lambdas.windows(2).all(|w| w[0] < w[1]);
        let in_range = lambdas.iter().all(|&l| l > 0.0 && l < 1.0);
        if !ascending || !in_range {
            return Err(Error::InvalidParameter {
                name: "lambdas",
                reason: "values must be strictly increasing within (0,1)".into(),
            });
        }
        if !(hardness > 0.0) {
            return Err(Error::InvalidParameter {
                name: "hardness",
                reason: "must be positive".into(),
            });
        }
        Ok(Self {
            lambdas,
            hardness,
            log_peak,
            constraints,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

impl DensitySchedule for LambdaAscent {
    fn n_steps(&self) -> usize {
        self.lambdas.len()
    }

    fn value(&self, step: usize) -> f64 {
        if step == 0 {
            self.lambdas[0]
        } else {
            self.lambdas[step - 1]
        }
    }

    fn log_density(&self, eval: &Eval, step: usize) -> f64 {
        let mut v = lambda_log_indicator(
            eval.log_target,
            self.value(step),
            self.log_peak,
            self.hardness,
            1.0,
        );
        for (c, &k) in self.constraints.iter().zip(&eval.kappas) {
            v += c.log_indicator(k, 1.0);
        }
        v
    }

    fn final_accept(&self, eval: &Eval) -> bool {
        let lam = *self.lambdas.last().expect("non-empty grid");
        let margin = eval.log_target - lam.ln() - self.log_peak;
        margin >= -HARD_KAPPA_TOL
            && self
                .constraints
                .iter()
                .zip(&eval.kappas)
                .all(|(c, &k)| c.final_pass(k))
    }
}
