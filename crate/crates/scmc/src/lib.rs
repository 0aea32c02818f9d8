//! Sequentially constrained Monte Carlo sampling of quantum states.
//!
//! A sequential Monte Carlo sampler whose bridging distributions both
//! interpolate geometrically between a reference and a target density and
//! gradually harden inequality constraints (physicality, entanglement
//! criteria, level-set membership). On top of the engine sit ready-made
//! pipelines: bound-entangled state search under the PPT + CCNR double
//! criterion, Dirichlet targets over measurement probabilities, and
//! region-average size/content estimation for peaked targets.

pub mod config;
pub mod dump;
pub mod engine;
pub mod error;
pub mod otj;
pub mod pipelines;
pub mod problems;
pub mod qstate;
pub mod sampling;
pub mod targets;

pub use engine::Eval;
pub use error::{Error, Result};
