//! Run configuration: one self-contained JSON document per run, validated
//! before any computation starts. CLI flags override file fields; the fully
//! resolved document is written back next to the outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{ScmcConfig, WalkMode};
use crate::error::{Error, Result};
use crate::otj::{LambdaGrid, DEFAULT_POINTS_PER_DECADE};
use crate::problems::CriterionSet;
use crate::qstate::{
    build_product_tetrahedron_pom, build_trine_pom, CMatrix, DensityMatrix, Pom,
};
use crate::sampling::{DirichletParams, RngStream, WishartParams};
use crate::targets::{simulate_clicks, DirichletTarget};

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level run document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub engine: ScmcConfig,
    pub pipeline: PipelineSpec,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// Which pipeline runs and its parameters; tag names double as the CLI
/// subcommand names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PipelineSpec {
    BoundEntangled(BoundEntangledSpec),
    TargetSample(TargetSampleSpec),
    Otj(OtjSpec),
    #[serde(rename = "demo-1d")]
    Demo1d(Demo1dSpec),
    DemoQubit(DemoQubitSpec),
}

impl PipelineSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PipelineSpec::BoundEntangled(_) => "bound-entangled",
            PipelineSpec::TargetSample(_) => "target-sample",
            PipelineSpec::Otj(_) => "otj",
            PipelineSpec::Demo1d(_) => "demo-1d",
            PipelineSpec::DemoQubit(_) => "demo-qubit",
        }
    }
}

fn default_sharpness() -> f64 {
    5e4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundEntangledSpec {
    /// Subsystem dimensions [d_A, d_B].
    pub dims: [usize; 2],
    #[serde(default = "default_sharpness")]
    pub a_p: f64,
    #[serde(default = "default_sharpness")]
    pub a_e: f64,
    #[serde(default)]
    pub criteria: CriteriaChoice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriteriaChoice {
    #[default]
    Both,
    PptOnly,
    CcnrOnly,
}

impl CriteriaChoice {
    pub fn to_criterion_set(self) -> CriterionSet {
        match self {
            CriteriaChoice::Both => CriterionSet::Both,
            CriteriaChoice::PptOnly => CriterionSet::PptOnly,
            CriteriaChoice::CcnrOnly => CriterionSet::CcnrOnly,
        }
    }
}

/// Sharp enough that a target peaking outside the physical set cannot pull
/// the population through the softened boundary: the sigmoid slope must beat
/// the target's log-density slope at the boundary, which reaches several
/// hundred per unit Bloch radius for click counts in the thousands.
pub(crate) fn default_physicality_sharpness() -> f64 {
    5e4
}

fn default_walk() -> WalkMode {
    WalkMode::SimplexSpace
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSampleSpec {
    pub target: TargetSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default = "default_walk")]
    pub walk: WalkMode,
    /// Soft-physicality sharpness for simplex-space walks.
    #[serde(default = "default_physicality_sharpness")]
    pub physicality_sharpness: f64,
    /// Emit a content curve c_λ on this grid.
    #[serde(default)]
    pub content_grid: Option<GridSpec>,
}

fn default_hardness() -> f64 {
    1e3
}

fn default_anchor_fraction() -> f64 {
    0.03
}

fn default_min_anchor_fraction() -> f64 {
    1e-3
}

fn default_calibration_samples() -> usize {
    20_000
}

fn default_ladder_per_decade() -> f64 {
    crate::otj::DEFAULT_LADDER_PER_DECADE
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtjSpec {
    pub target: TargetSpec,
    pub grid: GridSpec,
    #[serde(default = "default_hardness")]
    pub hardness: f64,
    #[serde(default = "default_anchor_fraction")]
    pub anchor_fraction: f64,
    #[serde(default = "default_min_anchor_fraction")]
    pub min_anchor_fraction: f64,
    /// Uniform state-space points drawn for the anchor calibration.
    #[serde(default = "default_calibration_samples")]
    pub calibration_samples: usize,
    /// Rung density of the internal λ ladder the run walks between grid
    /// points.
    #[serde(default = "default_ladder_per_decade")]
    pub ladder_per_decade: f64,
    #[serde(default)]
    pub reanchor_lambda: Option<f64>,
    /// Also run the direct sampler and emit the comparison curve.
    #[serde(default = "default_true")]
    pub compare_direct: bool,
    #[serde(default = "default_walk")]
    pub walk: WalkMode,
}

fn default_bins() -> usize {
    60
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demo1dSpec {
    /// Histogram bins for the per-step snapshots.
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl Default for Demo1dSpec {
    fn default() -> Self {
        Self {
            bins: default_bins(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoQubitSpec {}

/// Target density f: a POM and Dirichlet exponents, given directly or
/// simulated from click data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub pom: PomSpec,
    pub alphas: AlphaSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PomSpec {
    /// Three symmetric outcomes in the qubit equatorial plane.
    Trine,
    /// Product of per-qubit tetrahedron POMs.
    Tetrahedron { qubits: usize },
    /// Explicit outcome operators.
    Explicit { outcomes: Vec<MatrixSpec> },
}

impl PomSpec {
    pub fn build(&self) -> Result<Pom> {
        match self {
            PomSpec::Trine => Ok(build_trine_pom()),
            PomSpec::Tetrahedron { qubits } => build_product_tetrahedron_pom(*qubits),
            PomSpec::Explicit { outcomes } => {
                let effects = outcomes
                    .iter()
                    .map(MatrixSpec::to_matrix)
                    .collect::<Result<Vec<_>>>()?;
                Pom::new(effects)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlphaSpec {
    Explicit(Vec<f64>),
    /// Simulate `total` clicks on `true_state` and use the counts.
    Clicks {
        true_state: StateSpec,
        total: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Bloch([f64; 3]),
    Matrix(MatrixSpec),
    MaximallyMixed { dim: usize },
}

impl StateSpec {
    pub fn to_state(&self) -> Result<DensityMatrix> {
        match self {
            StateSpec::Bloch(r) => {
                let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                if !(norm <= 1.0) {
                    return Err(Error::Config(format!(
                        "bloch vector has length {norm} > 1"
                    )));
                }
                Ok(DensityMatrix::from_bloch(*r))
            }
            StateSpec::Matrix(m) => DensityMatrix::new(m.to_matrix()?),
            StateSpec::MaximallyMixed { dim } => {
                if *dim == 0 {
                    return Err(Error::Config("maximally mixed state needs dim > 0".into()));
                }
                Ok(DensityMatrix::maximally_mixed(*dim))
            }
        }
    }
}

/// Row-major complex matrix with separate real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.dim * self.dim;
        if self.dim == 0 || self.re.len() != n || self.im.len() != n {
            return Err(Error::Config(format!(
                "matrix spec needs dim² = {n} entries in re and im, got {} and {}",
                self.re.len(),
                self.im.len()
            )));
        }
        if self.re.iter().chain(&self.im).any(|v| !v.is_finite()) {
            return Err(Error::Config("matrix entries must be finite".into()));
        }
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let k = i * self.dim + j;
                m[(i, j)] = num_complex::Complex64::new(self.re[k], self.im[k]);
            }
        }
        Ok(m)
    }
}

impl TargetSpec {
    pub fn build(&self) -> Result<DirichletTarget> {
        let pom = self.pom.build()?;
        let alphas = match &self.alphas {
            AlphaSpec::Explicit(a) => a.clone(),
            AlphaSpec::Clicks {
                true_state,
                total,
                seed,
            } => {
                let state = true_state.to_state()?;
                simulate_clicks(&pom, &state, *total, RngStream::new(*seed))?
            }
        };
        DirichletTarget::new(pom, alphas)
    }

    fn validate(&self) -> Result<()> {
        match &self.pom {
            PomSpec::Tetrahedron { qubits } => {
                if !(1..=6).contains(qubits) {
                    return Err(Error::Config(format!(
                        "tetrahedron POM supports 1..=6 qubits, got {qubits}"
                    )));
                }
            }
            PomSpec::Explicit { outcomes } => {
                if outcomes.len() < 2 {
                    return Err(Error::Config(
                        "explicit POM needs at least two outcomes".into(),
                    ));
                }
            }
            PomSpec::Trine => {}
        }
        match &self.alphas {
            AlphaSpec::Explicit(a) => {
                if a.is_empty() || a.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Config(
                        "alphas must be a non-empty list of finite nonnegative values".into(),
                    ));
                }
            }
            AlphaSpec::Clicks { total, .. } => {
                if *total == 0 {
                    return Err(Error::Config("click simulation needs total > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Reference density g for bridge pipelines.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Flat on the walk coordinates: Hilbert–Schmidt in matrix space,
    /// uniform-simplex in probability space.
    #[default]
    Uniform,
    /// Wishart-projected states; `dof` defaults to the Hilbert–Schmidt n = d.
    Wishart { dof: Option<usize> },
    /// Dirichlet in probability space with explicit exponents.
    Dirichlet { exponents: Vec<f64> },
    /// Dirichlet concentrated around a probability vector.
    DirichletPeaked { center: Vec<f64>, concentration: f64 },
}

impl ReferenceSpec {
    /// Reference parameters for a matrix-space walk.
    pub fn matrix_params(&self, dim: usize) -> Result<WishartParams> {
        match self {
            ReferenceSpec::Uniform => Ok(WishartParams::hilbert_schmidt(dim)),
            ReferenceSpec::Wishart { dof } => {
                WishartParams::new(dim, dof.unwrap_or(dim), CMatrix::identity(dim, dim))
            }
            other => Err(Error::Config(format!(
                "{other:?} is a probability-space reference; use a simplex walk"
            ))),
        }
    }

    /// Reference exponents for a simplex-space walk; `None` means flat.
    pub fn simplex_params(&self, n_outcomes: usize) -> Result<Option<DirichletParams>> {
        match self {
            ReferenceSpec::Uniform => Ok(None),
            ReferenceSpec::Dirichlet { exponents } => {
                if exponents.len() != n_outcomes {
                    return Err(Error::Config(format!(
                        "{} reference exponents for a {n_outcomes}-outcome POM",
                        exponents.len()
                    )));
                }
                DirichletParams::new(exponents.clone()).map(Some)
            }
            ReferenceSpec::DirichletPeaked {
                center,
                concentration,
            } => {
                if center.len() != n_outcomes {
                    return Err(Error::Config(format!(
                        "{} reference center entries for a {n_outcomes}-outcome POM",
                        center.len()
                    )));
                }
                DirichletParams::centered_at(center, *concentration).map(Some)
            }
            ReferenceSpec::Wishart { .. } => Err(Error::Config(
                "wishart is a matrix-space reference; use a matrix walk".into(),
            )),
        }
    }

    fn validate(&self, walk: WalkMode) -> Result<()> {
        let compatible = match walk {
            WalkMode::MatrixSpace => {
                matches!(self, ReferenceSpec::Uniform | ReferenceSpec::Wishart { .. })
            }
            WalkMode::SimplexSpace => !matches!(self, ReferenceSpec::Wishart { .. }),
        };
        if !compatible {
            return Err(Error::Config(format!(
                "reference {self:?} is incompatible with {walk:?}"
            )));
        }
        if let ReferenceSpec::DirichletPeaked { concentration, .. } = self {
            if !(concentration.is_finite() && *concentration > 0.0) {
                return Err(Error::Config(
                    "dirichlet-peaked concentration must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// λ grid bounds plus either an explicit point count or a per-decade density
/// (default [`DEFAULT_POINTS_PER_DECADE`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub top: f64,
    pub bottom: f64,
    #[serde(default)]
    pub n_points: Option<usize>,
    #[serde(default)]
    pub points_per_decade: Option<f64>,
}

impl GridSpec {
    pub fn to_grid(&self) -> Result<LambdaGrid> {
        match (self.n_points, self.points_per_decade) {
            (Some(_), Some(_)) => Err(Error::Config(
                "grid takes n_points or points_per_decade, not both".into(),
            )),
            (Some(n), None) => LambdaGrid::log_spaced(self.top, self.bottom, n),
            (None, Some(ppd)) => LambdaGrid::per_decade(self.top, self.bottom, ppd),
            (None, None) => {
                LambdaGrid::per_decade(self.top, self.bottom, DEFAULT_POINTS_PER_DECADE)
            }
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported; this build reads version {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        self.engine.validate()?;
        match &self.pipeline {
            PipelineSpec::BoundEntangled(spec) => {
                if spec.dims.iter().any(|&d| d < 2) {
                    return Err(Error::Config(
                        "bound-entangled subsystems need dimension at least 2".into(),
                    ));
                }
                if !(spec.a_p > 0.0 && spec.a_p.is_finite())
                    || !(spec.a_e > 0.0 && spec.a_e.is_finite())
                {
                    return Err(Error::Config(
                        "constraint sharpness a_p, a_e must be positive and finite".into(),
                    ));
                }
            }
            PipelineSpec::TargetSample(spec) => {
                spec.target.validate()?;
                spec.reference.validate(spec.walk)?;
                if spec.walk == WalkMode::SimplexSpace
                    && !(spec.physicality_sharpness > 0.0)
                {
                    return Err(Error::Config(
                        "physicality_sharpness must be positive".into(),
                    ));
                }
                if let Some(grid) = &spec.content_grid {
                    grid.to_grid()?;
                }
            }
            PipelineSpec::Otj(spec) => {
                spec.target.validate()?;
                spec.grid.to_grid()?;
                if !(spec.hardness > 0.0 && spec.hardness.is_finite()) {
                    return Err(Error::Config("otj hardness must be positive".into()));
                }
                if !(spec.anchor_fraction > 0.0 && spec.anchor_fraction < 1.0) {
                    return Err(Error::Config("anchor_fraction must lie in (0,1)".into()));
                }
                if !(spec.min_anchor_fraction > 0.0
                    && spec.min_anchor_fraction <= spec.anchor_fraction)
                {
                    return Err(Error::Config(
                        "min_anchor_fraction must be positive and at most anchor_fraction"
                            .into(),
                    ));
                }
                if spec.calibration_samples < 100 {
                    return Err(Error::Config(
                        "calibration needs at least 100 uniform samples".into(),
                    ));
                }
                if !(spec.ladder_per_decade >= 1.0 && spec.ladder_per_decade <= 1000.0) {
                    return Err(Error::Config(
                        "ladder_per_decade must lie in [1, 1000]".into(),
                    ));
                }
                if let Some(l1) = spec.reanchor_lambda {
                    if !(l1 > 0.0 && l1 < 1.0) {
                        return Err(Error::Config(
                            "reanchor_lambda must lie in (0,1)".into(),
                        ));
                    }
                }
            }
            PipelineSpec::Demo1d(spec) => {
                if spec.bins < 10 {
                    return Err(Error::Config(
                        "the 1d demo histogram needs at least 10 bins".into(),
                    ));
                }
            }
            PipelineSpec::DemoQubit(_) => {}
        }
        Ok(())
    }

    /// SHA-256 of the pretty JSON serialization — the exact bytes written to
    /// `resolved_config.json`, so the hash can be re-checked against the file.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_pretty_json()?.as_bytes()))
    }

    pub fn to_pretty_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

// Preset configurations: single source of the desk-scale run parameters used
// by both the CLI examples and the acceptance suite.

/// Fig.-1-style 3×3 bound entanglement search.
pub fn preset_bound_entangled_3x3() -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        engine: ScmcConfig {
            n_particles: 1000,
            n_steps: 300,
            seed: 1001,
            ..ScmcConfig::default()
        },
        pipeline: PipelineSpec::BoundEntangled(BoundEntangledSpec {
            dims: [3, 3],
            a_p: 5e4,
            a_e: 5e4,
            criteria: CriteriaChoice::Both,
        }),
        output_dir: None,
    }
}

/// 2×4 non-falsification run: the double criterion is expected to come up
/// empty while either single criterion alone has positive yield.
pub fn preset_bound_entangled_2x4(criteria: CriteriaChoice) -> RunConfig {
    let (n_particles, n_steps) = match criteria {
        CriteriaChoice::Both => (1000, 300),
        _ => (500, 150),
    };
    RunConfig {
        schema_version: SCHEMA_VERSION,
        engine: ScmcConfig {
            n_particles,
            n_steps,
            seed: 1002,
            ..ScmcConfig::default()
        },
        pipeline: PipelineSpec::BoundEntangled(BoundEntangledSpec {
            dims: [2, 4],
            a_p: 5e4,
            a_e: 5e4,
            criteria,
        }),
        output_dir: None,
    }
}

/// The Fig.-3 single-qubit trine target.
pub fn preset_trine_target() -> TargetSpec {
    TargetSpec {
        pom: PomSpec::Trine,
        alphas: AlphaSpec::Explicit(vec![1802.0, 315.0, 303.0]),
    }
}

fn content_grid_20pt() -> GridSpec {
    GridSpec {
        top: 0.5,
        bottom: 1e-10,
        n_points: Some(20),
        points_per_decade: None,
    }
}

/// Direct SCMC sampling of the trine target with a content curve.
pub fn preset_trine_content(n_particles: usize) -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        engine: ScmcConfig {
            n_particles,
            n_steps: 10,
            seed: 1003,
            ..ScmcConfig::default()
        },
        pipeline: PipelineSpec::TargetSample(TargetSampleSpec {
            target: preset_trine_target(),
            reference: ReferenceSpec::Uniform,
            walk: WalkMode::SimplexSpace,
            physicality_sharpness: default_physicality_sharpness(),
            content_grid: Some(content_grid_20pt()),
        }),
        output_dir: None,
    }
}

/// OTJ size/content run on the same trine target and λ grid.
pub fn preset_otj_trine() -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        engine: ScmcConfig {
            n_particles: 1000,
            n_steps: 10,
            seed: 1004,
            ..ScmcConfig::default()
        },
        pipeline: PipelineSpec::Otj(OtjSpec {
            target: preset_trine_target(),
            grid: content_grid_20pt(),
            hardness: 1e3,
            anchor_fraction: 0.03,
            min_anchor_fraction: 1e-3,
            calibration_samples: 20_000,
            ladder_per_decade: default_ladder_per_decade(),
            reanchor_lambda: None,
            compare_direct: true,
            walk: WalkMode::SimplexSpace,
        }),
        output_dir: None,
    }
}

/// 1D two-peak tempering demo.
pub fn preset_demo_1d() -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        engine: ScmcConfig {
            n_particles: 10_000,
            n_steps: 10,
            seed: 1005,
            ..ScmcConfig::default()
        },
        pipeline: PipelineSpec::Demo1d(Demo1dSpec::default()),
        output_dir: None,
    }
}

/// Single-qubit constrained-uniform demo in trine coordinates.
pub fn preset_demo_qubit() -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        engine: ScmcConfig {
            n_particles: 10_000,
            n_steps: 10,
            seed: 1006,
            ..ScmcConfig::default()
        },
        pipeline: PipelineSpec::DemoQubit(DemoQubitSpec::default()),
        output_dir: None,
    }
}
