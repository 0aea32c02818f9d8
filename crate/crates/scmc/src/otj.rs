//! Size/content machinery for nested high-density regions.
//!
//! For a target f with peak value F, the λ-region is {ρ : f(ρ) ≥ λF}. Its
//! credibility content c_λ comes either directly from a target sample or from
//! the region's relative size s_λ, which in turn follows from the
//! region-average integral anchored at a calibrated (λ₀, s_{λ₀}).

use std::io;

use rand_chacha::ChaCha8Rng;

use crate::engine::{
    scmc_run_observed, ConstraintSpec, LambdaAscent, ParticleEnsemble, Problem, RunObserver,
    ScmcConfig, StepRecord, WalkKernel,
};
use crate::error::{Error, Result};
use crate::sampling::RngStream;

/// Region-membership tolerance in log-density units: members with
/// ln f − ln λ − ln F ≥ −REGION_TOL count as inside, clamped up to 0.
pub const REGION_TOL: f64 = 1e-9;

/// Default grid density for log-spaced λ grids.
pub const DEFAULT_POINTS_PER_DECADE: f64 = 20.0;

/// Default rung density of the internal ascent ladder.
pub const DEFAULT_LADDER_PER_DECADE: f64 = 20.0;

// Cap refinement above the grid top: −ln λ is shrunk geometrically from
// −ln λ_top down to CAP_DEPTH of it. The extra rungs resolve s on (λ_top, 1),
// where a single trapezoid down to s(1) = 0 would badly overestimate the
// content integral's tail.
const CAP_RATIO: f64 = std::f64::consts::FRAC_1_SQRT_2;
const CAP_DEPTH: f64 = 1e-4;

// Substream tag for the rejection draws seeding the bottom region; the
// engine's own tags are 1–5, so this path stays disjoint.
const TAG_REGION_SEED: u64 = 7;

/// Strictly decreasing λ values in (0,1], linearly spaced in ln λ by
/// construction (arbitrary descending grids are accepted too).
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter {
                name: "lambda_grid",
                reason: "need at least one λ value".into(),
            });
        }
        if values.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
            return Err(Error::InvalidParameter {
                name: "lambda_grid",
                reason: "all values must lie in (0,1]".into(),
            });
        }
        if values.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidParameter {
                name: "lambda_grid",
                reason: "values must be strictly decreasing".into(),
            });
        }
        Ok(Self { values })
    }

    /// `n_points` values with ln λ equally spaced from ln `top` down to
    /// ln `bottom`; both endpoints are hit exactly.
    pub fn log_spaced(top: f64, bottom: f64, n_points: usize) -> Result<Self> {
        if !(top > bottom && bottom > 0.0 && top <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "lambda_grid",
                reason: format!("need 0 < bottom < top <= 1, got [{bottom:e}, {top:e}]"),
            });
        }
        if n_points < 2 {
            return Err(Error::InvalidParameter {
                name: "n_points",
                reason: "a log-spaced grid needs at least two points".into(),
            });
        }
        let (u_top, u_bot) = (top.ln(), bottom.ln());
        let mut values: Vec<f64> = (0..n_points)
            .map(|j| {
                let t = j as f64 / (n_points - 1) as f64;
                (u_top + t * (u_bot - u_top)).exp()
            })
            .collect();
        values[0] = top;
        values[n_points - 1] = bottom;
        Self::new(values)
    }

    /// Log-spaced grid with a target point density per decade of λ.
    pub fn per_decade(top: f64, bottom: f64, points_per_decade: f64) -> Result<Self> {
        if !(points_per_decade > 0.0) {
            return Err(Error::InvalidParameter {
                name: "points_per_decade",
                reason: "must be positive".into(),
            });
        }
        let decades = (top / bottom).log10();
        if !(decades > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda_grid",
                reason: "top must exceed bottom".into(),
            });
        }
        let n = ((decades * points_per_decade).ceil() as usize + 1).max(2);
        Self::log_spaced(top, bottom, n)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn top(&self) -> f64 {
        self.values[0]
    }

    pub fn bottom(&self) -> f64 {
        *self.values.last().expect("non-empty grid")
    }

    /// Grid with `lambda` inserted in order, plus its index. An existing value
    /// within 1e-12 relative in ln λ is reused instead of duplicated.
    pub fn merged_with(&self, lambda: f64) -> Result<(Self, usize)> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("merge value must lie in (0,1], got {lambda:e}"),
            });
        }
        let lu = lambda.ln();
        for (j, &v) in self.values.iter().enumerate() {
            if (v.ln() - lu).abs() <= 1e-12 * lu.abs().max(1.0) {
                return Ok((self.clone(), j));
            }
        }
        let idx = self.values.partition_point(|&v| v > lambda);
        let mut values = self.values.clone();
        values.insert(idx, lambda);
        Ok((Self::new(values)?, idx))
    }
}

/// One size/content estimation run over a λ grid.
#[derive(Clone, Debug)]
pub struct OtjRun {
    pub grid: LambdaGrid,
    /// Region-average g_λ = ⟨ln f − ln λ − ln F⟩ per grid point.
    pub g_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub c_values: Vec<f64>,
    /// (λ₀, s_{λ₀}) the size integral was anchored at.
    pub anchor: (f64, f64),
    /// Hard-filtered region members per grid point.
    pub sample_sizes: Vec<usize>,
    /// Effective sample size at each grid step's reweighting.
    pub ess_min: Vec<f64>,
}

impl OtjRun {
    /// CSV with columns λ, g, s, c, sample-size, ESS; the λ = 0 endpoint row
    /// (s = c = 1 exactly) is emitted first. Lines starting with '#' carry
    /// caller-provided metadata.
    pub fn write_csv<W: io::Write>(&self, mut w: W, metadata: &[String]) -> Result<()> {
        for line in metadata {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# anchor_lambda = {:e}", self.anchor.0)?;
        writeln!(w, "# anchor_s = {:e}", self.anchor.1)?;
        writeln!(w, "lambda,g,s,c,sample_size,ess_min")?;
        writeln!(w, "0,,1,1,,")?;
        for j in 0..self.grid.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{},{:e}",
                self.grid.values()[j],
                self.g_values[j],
                self.s_values[j],
                self.c_values[j],
                self.sample_sizes[j],
                self.ess_min[j],
            )?;
        }
        Ok(())
    }
}

/// c_λ = fraction of a target sample inside each λ-region, i.e. with
/// ln f ≥ ln λ + ln F. λ = 0 counts everything.
pub fn content_from_sample(log_f: &[f64], log_peak: f64, lambdas: &[f64]) -> Result<Vec<f64>> {
    if log_f.is_empty() {
        return Err(Error::InvalidSample("empty target sample".into()));
    }
    if log_f.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidSample("NaN log density in sample".into()));
    }
    let mut sorted = log_f.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    lambdas
        .iter()
        .map(|&lam| {
            if lam < 0.0 || !lam.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "lambda",
                    reason: format!("content requested at λ = {lam:e}"),
                });
            }
            if lam == 0.0 {
                return Ok(1.0);
            }
            let thr = lam.ln() + log_peak;
            let below = sorted.partition_point(|&v| v < thr);
            Ok((sorted.len() - below) as f64 / n)
        })
        .collect()
}

/// g_λ: the mean of ln f − ln λ − ln F over a sample that is uniform on the
/// λ-region. Members may sit below the boundary by at most [`REGION_TOL`]
/// (clamped to 0); anything deeper is an invalid sample.
pub fn region_log_average(log_f: &[f64], lambda: f64, log_peak: f64) -> Result<f64> {
    if log_f.is_empty() {
        return Err(Error::InvalidSample("empty λ-region sample".into()));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("λ-region average needs λ in (0,1], got {lambda:e}"),
        });
    }
    let thr = lambda.ln() + log_peak;
    let mut sum = 0.0;
    for &v in log_f {
        let margin = v - thr;
        if !(margin >= -REGION_TOL) {
            return Err(Error::InvalidSample(format!(
                "sample point below the λ-region boundary: margin {margin:e} at λ = {lambda:e}"
            )));
        }
        sum += margin.max(0.0);
    }
    Ok(sum / log_f.len() as f64)
}

/// s_λ = s_{λ₀} (g_{λ₀}/g_λ) exp(−∫_{λ₀}^{λ} du/g) with u = ln λ′, trapezoid
/// rule outward in both directions from `anchor_index`. Results are clamped
/// into [0, 1].
pub fn size_integral(
    lambdas: &[f64],
    g: &[f64],
    anchor_index: usize,
    anchor_s: f64,
) -> Result<Vec<f64>> {
    if lambdas.is_empty() || lambdas.len() != g.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} λ values vs {} g values",
            lambdas.len(),
            g.len()
        )));
    }
    if lambdas
        .iter()
        .any(|&l| !(l > 0.0 && l <= 1.0))
        || lambdas.windows(2).any(|w| !(w[0] > w[1]))
    {
        return Err(Error::InvalidParameter {
            name: "lambdas",
            reason: "grid must be strictly decreasing within (0,1]".into(),
        });
    }
    if anchor_index >= lambdas.len() {
        return Err(Error::InvalidParameter {
            name: "anchor_index",
            reason: format!("{} outside a {}-point grid", anchor_index, lambdas.len()),
        });
    }
    if !(anchor_s > 0.0 && anchor_s <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "anchor_s",
            reason: format!("anchor size must lie in (0,1], got {anchor_s:e}"),
        });
    }
    let positive = |j: usize| -> Result<f64> {
        let gj = g[j];
        if !(gj > 0.0) {
            return Err(Error::SingularIntegrand {
                lambda: lambdas[j],
            });
        }
        Ok(gj)
    };
    let g_anchor = positive(anchor_index)?;
    let u: Vec<f64> = lambdas.iter().map(|&l| l.ln()).collect();
    let mut s = vec![0.0; lambdas.len()];
    s[anchor_index] = anchor_s;

    // toward smaller λ (descending indices above the anchor)
    let mut integral = 0.0;
    for j in anchor_index + 1..lambdas.len() {
        let gj = positive(j)?;
        integral += (u[j] - u[j - 1]) * 0.5 * (1.0 / gj + 1.0 / g[j - 1]);
        s[j] = (anchor_s * (g_anchor / gj) * (-integral).exp()).clamp(0.0, 1.0);
    }
    // toward larger λ
    integral = 0.0;
    for j in (0..anchor_index).rev() {
        let gj = positive(j)?;
        integral += (u[j] - u[j + 1]) * 0.5 * (1.0 / gj + 1.0 / g[j + 1]);
        s[j] = (anchor_s * (g_anchor / gj) * (-integral).exp()).clamp(0.0, 1.0);
    }
    Ok(s)
}

/// c_λ = [λ s_λ + ∫_λ^1 s dλ′] / ∫_0^1 s dλ′ by trapezoid on the grid
/// augmented with (λ=0, s=1) and — unless the grid already reaches 1 —
/// (λ=1, s=0).
pub fn size_to_content(lambdas: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    if lambdas.is_empty() || lambdas.len() != s.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} λ values vs {} s values",
            lambdas.len(),
            s.len()
        )));
    }
    if lambdas
        .iter()
        .any(|&l| !(l > 0.0 && l <= 1.0))
        || lambdas.windows(2).any(|w| !(w[0] > w[1]))
    {
        return Err(Error::InvalidParameter {
            name: "lambdas",
            reason: "grid must be strictly decreasing within (0,1]".into(),
        });
    }
    if s.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: "sizes must lie in [0,1]".into(),
        });
    }
    let n = lambdas.len();
    // ascending augmented curve
    let mut lam_asc = Vec::with_capacity(n + 2);
    let mut s_asc = Vec::with_capacity(n + 2);
    lam_asc.push(0.0);
    s_asc.push(1.0);
    for j in (0..n).rev() {
        lam_asc.push(lambdas[j]);
        s_asc.push(s[j]);
    }
    if lambdas[0] < 1.0 {
        lam_asc.push(1.0);
        s_asc.push(0.0);
    }
    let m = lam_asc.len();
    // tail[k] = trapezoid estimate of ∫_{λ_k}^{1} s dλ′
    let mut tail = vec![0.0; m];
    for k in (0..m - 1).rev() {
        tail[k] =
            tail[k + 1] + 0.5 * (s_asc[k] + s_asc[k + 1]) * (lam_asc[k + 1] - lam_asc[k]);
    }
    // the s(0) = 1 augmentation keeps the denominator strictly positive
    let denom = tail[0];
    debug_assert!(denom > 0.0);
    // ascending index of original grid point j (grid was reversed after the
    // λ=0 node): n-j maps j = n-1..0 to 1..n
    let c = (0..n)
        .map(|j| {
            let k = n - j;
            ((lam_asc[k] * s_asc[k] + tail[k]) / denom).clamp(0.0, 1.0)
        })
        .collect();
    Ok(c)
}

/// Protocol parameters for [`otj_protocol`].
#[derive(Clone, Debug)]
pub struct OtjConfig {
    pub grid: LambdaGrid,
    /// Sharpness of the λ-region soft indicator during the ascent.
    pub hardness: f64,
    /// Target fraction of the calibration sample inside the anchor region.
    pub anchor_fraction: f64,
    /// Below this achieved fraction the anchor is unusable.
    pub min_anchor_fraction: f64,
    /// Rungs per decade of the internal ladder the ascent actually walks;
    /// the reported grid is a subset. Denser ladders shrink both the
    /// per-stage restriction loss and the trapezoid error of the size
    /// integral.
    pub ladder_per_decade: f64,
    /// Engine parameters for the λ ascent (its `n_steps` is ignored; the
    /// ladder sets the step count).
    pub scmc: ScmcConfig,
    /// Re-anchor a second ascent at this λ using the first run's s there.
    pub reanchor_lambda: Option<f64>,
}

impl OtjConfig {
    pub fn new(grid: LambdaGrid, hardness: f64, scmc: ScmcConfig) -> Self {
        Self {
            grid,
            hardness,
            anchor_fraction: 0.03,
            min_anchor_fraction: 1e-3,
            ladder_per_decade: DEFAULT_LADDER_PER_DECADE,
            scmc,
            reanchor_lambda: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid.top() >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "λ grids must stay strictly below λ = 1".into(),
            });
        }
        if !(self.hardness > 0.0) {
            return Err(Error::InvalidParameter {
                name: "hardness",
                reason: "must be positive".into(),
            });
        }
        if !(self.ladder_per_decade > 0.0 && self.ladder_per_decade.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "ladder_per_decade",
                reason: "must be positive and finite".into(),
            });
        }
        if !(self.anchor_fraction > 0.0 && self.anchor_fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "anchor_fraction",
                reason: "must lie in (0,1)".into(),
            });
        }
        if !(self.min_anchor_fraction > 0.0 && self.min_anchor_fraction <= self.anchor_fraction)
        {
            return Err(Error::InvalidParameter {
                name: "min_anchor_fraction",
                reason: "must be positive and at most anchor_fraction".into(),
            });
        }
        if let Some(l1) = self.reanchor_lambda {
            if !(l1 >= self.grid.bottom() && l1 <= self.grid.top()) {
                return Err(Error::InvalidParameter {
                    name: "reanchor_lambda",
                    reason: format!(
                        "λ₁ = {l1:e} outside the grid range [{:e}, {:e}]",
                        self.grid.bottom(),
                        self.grid.top()
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Anchor calibration: pick λ₀ so that roughly `anchor_fraction` of a uniform
/// state-space sample lies in the λ₀-region, then read s_{λ₀} off the sample
/// exactly. λ₀ is clamped into the grid range so it lands on the ladder.
pub fn calibrate_anchor(
    uniform_log_f: &[f64],
    log_peak: f64,
    grid: &LambdaGrid,
    anchor_fraction: f64,
    min_anchor_fraction: f64,
) -> Result<(f64, f64)> {
    if uniform_log_f.is_empty() {
        return Err(Error::InvalidSample("empty calibration sample".into()));
    }
    if uniform_log_f.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidSample(
            "NaN log density in calibration sample".into(),
        ));
    }
    let m = uniform_log_f.len();
    let mut sorted = uniform_log_f.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a)); // descending
    let k = ((anchor_fraction * m as f64).round() as usize).clamp(1, m);
    // threshold in log space: exact quantile when it falls inside the grid
    // range, otherwise clamped to the nearest grid endpoint
    let ln_quantile = sorted[k - 1] - log_peak;
    let (ln_bot, ln_top) = (grid.bottom().ln(), grid.top().ln());
    // clamped anchors reuse the grid endpoint value itself, so they merge
    // into the grid without a new point
    let (lambda0, thr) = if ln_quantile < ln_bot {
        (grid.bottom(), ln_bot + log_peak)
    } else if ln_quantile > ln_top {
        (grid.top(), ln_top + log_peak)
    } else {
        (ln_quantile.exp(), sorted[k - 1])
    };
    let inside = sorted.iter().take_while(|&&v| v >= thr).count();
    let s0 = inside as f64 / m as f64;
    if s0 < min_anchor_fraction {
        return Err(Error::AnchorTooDeep(format!(
            "only {inside} of {m} calibration points reach λ₀ = {lambda0:e}; extend the grid \
             below λ₀ or enlarge the calibration sample"
        )));
    }
    Ok((lambda0, s0))
}

/// The λ ladder the ascent actually walks: every report value, log-spaced
/// fill at `per_decade` rungs, and the cap refinement above the top. Values
/// stay strictly inside (0,1).
fn ascent_ladder(report: &LambdaGrid, per_decade: f64) -> Result<LambdaGrid> {
    let mut values = report.values().to_vec();
    if report.bottom() < report.top() {
        values.extend_from_slice(
            LambdaGrid::per_decade(report.top(), report.bottom(), per_decade)?.values(),
        );
    }
    let t_top = -report.top().ln();
    let mut t = t_top * CAP_RATIO;
    while t > t_top * CAP_DEPTH {
        let lam = (-t).exp();
        if lam < 1.0 {
            values.push(lam);
        }
        t *= CAP_RATIO;
    }
    values.sort_by(|a, b| b.total_cmp(a));
    values.dedup();
    LambdaGrid::new(values)
}

/// Rejection-samples the ascent's step-0 population: `n_particles` points
/// uniform on the bottom λ-region with all hard constraints satisfied.
/// Calibration already certified at least `min_anchor_fraction` of uniform
/// draws inside a region no larger than this one, so the attempt cap makes
/// failure a configuration error rather than bad luck.
fn seed_bottom_region<Pr, F>(
    problem: &Pr,
    constraints: &[ConstraintSpec],
    log_peak: f64,
    draw_uniform: &F,
    bottom: f64,
    config: &OtjConfig,
    seed: u64,
) -> Result<Vec<Pr::Point>>
where
    Pr: Problem,
    F: Fn(&mut ChaCha8Rng) -> Pr::Point,
{
    let thr = bottom.ln() + log_peak;
    let max_tries = (64.0 / config.min_anchor_fraction).ceil() as usize;
    let mut rng = RngStream::new(seed).substream(&[TAG_REGION_SEED]).rng();
    let n = config.scmc.n_particles;
    let mut seeds = Vec::with_capacity(n);
    while seeds.len() < n {
        let mut found = None;
        for _ in 0..max_tries {
            let point = draw_uniform(&mut rng);
            let eval = problem.evaluate(&point);
            let inside = eval.log_target - thr >= -REGION_TOL
                && constraints
                    .iter()
                    .zip(&eval.kappas)
                    .all(|(c, &k)| c.log_indicator(k, 1.0) > f64::NEG_INFINITY);
            if inside {
                found = Some(point);
                break;
            }
        }
        match found {
            Some(point) => seeds.push(point),
            None => {
                return Err(Error::AnchorTooDeep(format!(
                    "no uniform draw landed in the λ = {bottom:e} region within {max_tries} \
                     attempts; raise the grid bottom"
                )))
            }
        }
    }
    Ok(seeds)
}

/// Per-step λ-region statistics: weighted region averages g, hard-member
/// counts, and the ESS trace.
struct RegionStats {
    log_peak: f64,
    g: Vec<f64>,
    counts: Vec<usize>,
    ess: Vec<f64>,
}

/// Ladder statistics restricted to integrable rungs. Cap rungs (above the
/// report top) where no hard member survived carry no information and are
/// dropped; everything at or below the top must be resolvable, and a dead
/// rung there surfaces later as a [`Error::SingularIntegrand`].
struct LadderStats {
    lambdas: Vec<f64>,
    g: Vec<f64>,
    counts: Vec<usize>,
    ess: Vec<f64>,
}

impl LadderStats {
    fn from_run(ladder: &LambdaGrid, top: f64, stats: &RegionStats) -> Self {
        let mut out = Self {
            lambdas: Vec::new(),
            g: Vec::new(),
            counts: Vec::new(),
            ess: Vec::new(),
        };
        for (j, &lam) in ladder.values().iter().enumerate() {
            if lam <= top || (stats.counts[j] > 0 && stats.g[j] > 0.0) {
                out.lambdas.push(lam);
                out.g.push(stats.g[j]);
                out.counts.push(stats.counts[j]);
                out.ess.push(stats.ess[j]);
            }
        }
        out
    }

    /// Index of a report λ, which is on the ladder by construction.
    fn position(&self, lambda: f64) -> usize {
        self.lambdas
            .iter()
            .position(|&v| v == lambda)
            .expect("report λ is on the ladder")
    }
}

impl<P> RunObserver<P> for RegionStats {
    fn on_step(&mut self, ensemble: &ParticleEnsemble<P>, record: &StepRecord) {
        let thr = record.value.ln() + self.log_peak;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut count = 0usize;
        for (eval, &lw) in ensemble.evals.iter().zip(&ensemble.log_weights) {
            let margin = eval.log_target - thr;
            if margin >= -REGION_TOL {
                let w = lw.exp();
                num += w * margin.max(0.0);
                den += w;
                count += 1;
            }
        }
        self.g.push(if den > 0.0 { num / den } else { f64::NAN });
        self.counts.push(count);
        self.ess.push(record.ess);
    }
}

/// The size/content estimation protocol: calibrate an anchor against a
/// uniform state-space sample, seed the bottom λ-region by rejection, ascend
/// the ladder recording region averages, then run the size integral and the
/// size-to-content relation on the full ladder before reporting the grid
/// subset. Ascending matters: restricting a uniform population keeps it
/// uniform, while expanding one leaves the kernel unbounded relaxation work,
/// which visibly biases g on anisotropic regions. With `reanchor_lambda`
/// set, a second ascent is integrated from the first pass's s at that λ.
pub fn otj_protocol<Pr, K, F>(
    problem: &Pr,
    constraints: &[ConstraintSpec],
    log_peak: f64,
    uniform_log_f: &[f64],
    draw_uniform: F,
    kernel: &mut K,
    config: &OtjConfig,
) -> Result<OtjRun>
where
    Pr: Problem,
    K: WalkKernel<Pr::Point>,
    F: Fn(&mut ChaCha8Rng) -> Pr::Point,
{
    config.validate()?;
    let (lambda0, s0) = calibrate_anchor(
        uniform_log_f,
        log_peak,
        &config.grid,
        config.anchor_fraction,
        config.min_anchor_fraction,
    )?;
    let (mut report, mut anchor_idx) = config.grid.merged_with(lambda0)?;
    let mut reanchor_idx = None;
    if let Some(l1) = config.reanchor_lambda {
        let before = report.len();
        let (merged, idx) = report.merged_with(l1)?;
        let inserted = merged.len() > before;
        report = merged;
        reanchor_idx = Some(idx);
        if inserted && idx <= anchor_idx {
            anchor_idx += 1;
        }
    }
    let ladder = ascent_ladder(&report, config.ladder_per_decade)?;

    let ascend = |seed: u64, kern: &mut K| -> Result<LadderStats> {
        let seeds = seed_bottom_region(
            problem,
            constraints,
            log_peak,
            &draw_uniform,
            ladder.bottom(),
            config,
            seed,
        )?;
        let ascending: Vec<f64> = ladder.values().iter().rev().copied().collect();
        let schedule =
            LambdaAscent::new(ascending, config.hardness, log_peak, constraints.to_vec())?;
        let mut stats = RegionStats {
            log_peak,
            g: Vec::with_capacity(ladder.len()),
            counts: Vec::with_capacity(ladder.len()),
            ess: Vec::with_capacity(ladder.len()),
        };
        let mut scmc = config.scmc.clone();
        scmc.seed = seed;
        scmc_run_observed(
            problem,
            &schedule,
            kern,
            &scmc,
            |j, _| seeds[j].clone(),
            &mut stats,
        )?;
        // recorded bottom-up; flip into the grids' descending order
        stats.g.reverse();
        stats.counts.reverse();
        stats.ess.reverse();
        Ok(LadderStats::from_run(&ladder, report.top(), &stats))
    };

    let anchor_lambda = report.values()[anchor_idx];
    let stats = ascend(config.scmc.seed, kernel)?;
    let s_first = size_integral(&stats.lambdas, &stats.g, stats.position(anchor_lambda), s0)?;

    let (stats, mut s, anchor) = match reanchor_idx {
        None => (stats, s_first, (anchor_lambda, s0)),
        Some(idx) => {
            let lambda1 = report.values()[idx];
            let s1 = s_first[stats.position(lambda1)];
            if !(s1 > 0.0) {
                return Err(Error::AnchorTooDeep(format!(
                    "calibration pass found s = 0 at the re-anchor λ₁ = {lambda1:e}"
                )));
            }
            let precision = ascend(config.scmc.seed.wrapping_add(1), kernel)?;
            let s = size_integral(&precision.lambdas, &precision.g, precision.position(lambda1), s1)?;
            (precision, s, (lambda1, s1))
        }
    };

    // enforce region nesting: s may not shrink as λ decreases
    for j in 1..s.len() {
        if s[j] < s[j - 1] {
            s[j] = s[j - 1];
        }
    }
    let c = size_to_content(&stats.lambdas, &s)?;

    let sel: Vec<usize> = report.values().iter().map(|&l| stats.position(l)).collect();
    Ok(OtjRun {
        g_values: sel.iter().map(|&k| stats.g[k]).collect(),
        s_values: sel.iter().map(|&k| s[k]).collect(),
        c_values: sel.iter().map(|&k| c[k]).collect(),
        sample_sizes: sel.iter().map(|&k| stats.counts[k]).collect(),
        ess_min: sel.iter().map(|&k| stats.ess[k]).collect(),
        grid: report,
        anchor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimplexWalk;
    use crate::problems::SimplexDirichletProblem;
    use crate::sampling::{sample_dirichlet, DirichletParams};
    use crate::targets::{physicality_kappa, DirichletTarget};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_validation() {
        assert!(LambdaGrid::new(vec![]).is_err());
        assert!(LambdaGrid::new(vec![0.5, 0.5]).is_err());
        assert!(LambdaGrid::new(vec![0.1, 0.5]).is_err());
        assert!(LambdaGrid::new(vec![1.5, 0.5]).is_err());
        assert!(LambdaGrid::new(vec![0.5, 0.0]).is_err());
        let g = LambdaGrid::new(vec![1.0, 0.5, 0.1]).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.top(), 1.0);
        assert_eq!(g.bottom(), 0.1);
    }

    #[test]
    fn log_spaced_hits_endpoints_exactly() {
        let g = LambdaGrid::log_spaced(0.9, 1e-6, 13).unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!(g.top(), 0.9);
        assert_eq!(g.bottom(), 1e-6);
        // equal spacing in ln λ
        let u: Vec<f64> = g.values().iter().map(|l| l.ln()).collect();
        let h = u[1] - u[0];
        for w in u.windows(2) {
            assert_relative_eq!(w[1] - w[0], h, epsilon = 1e-12);
        }
        assert!(LambdaGrid::log_spaced(1e-6, 0.9, 5).is_err());
        assert!(LambdaGrid::log_spaced(0.9, 1e-6, 1).is_err());
    }

    #[test]
    fn per_decade_sets_point_count() {
        let g = LambdaGrid::per_decade(1.0, 1e-3, 20.0).unwrap();
        assert_eq!(g.len(), 61); // 3 decades at 20/decade plus the endpoint
        assert!(LambdaGrid::per_decade(0.5, 1e-2, 0.0).is_err());
    }

    #[test]
    fn merged_with_inserts_in_order_and_dedupes() {
        let g = LambdaGrid::new(vec![0.9, 0.1, 0.01]).unwrap();
        let (m, idx) = g.merged_with(0.5).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(m.values(), &[0.9, 0.5, 0.1, 0.01]);
        let (m, idx) = g.merged_with(0.1).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(m.len(), 3);
        let (m, idx) = g.merged_with(0.005).unwrap();
        assert_eq!(idx, 3);
        assert_eq!(m.len(), 4);
        assert!(g.merged_with(0.0).is_err());
    }

    #[test]
    fn content_counts_region_membership() {
        let log_f = vec![-3.0, -2.0, -1.0, -0.5];
        let c = content_from_sample(&log_f, 0.0, &[0.0, 1.0, (-2.0f64).exp()]).unwrap();
        assert_eq!(c[0], 1.0); // λ = 0 holds everything
        assert_eq!(c[1], 0.0); // λ = 1: nothing reaches the peak value
        assert_eq!(c[2], 0.75); // threshold −2 keeps −2, −1, −0.5
        assert!(content_from_sample(&[], 0.0, &[0.5]).is_err());
        assert!(content_from_sample(&[f64::NAN], 0.0, &[0.5]).is_err());
        assert!(content_from_sample(&log_f, 0.0, &[-0.1]).is_err());
    }

    #[test]
    fn content_includes_exact_peak_members() {
        // λ = 1 counts sample points sitting exactly at the peak
        let log_f = vec![-5.0, -5.0, -5.0, -5.0];
        let c = content_from_sample(&log_f, -5.0, &[1.0]).unwrap();
        assert_eq!(c[0], 1.0);
    }

    #[test]
    fn region_average_of_boundary_points_is_zero() {
        let lam: f64 = 0.3;
        let log_peak = 2.5;
        let boundary = lam.ln() + log_peak;
        let g = region_log_average(&[boundary; 5], lam, log_peak).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn region_average_matches_hand_mean() {
        let lam: f64 = 0.5;
        let thr = lam.ln(); // log_peak = 0
        let log_f = [thr + 0.2, thr + 0.6, thr + 1.0];
        let g = region_log_average(&log_f, lam, 0.0).unwrap();
        assert_relative_eq!(g, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn region_average_rejects_violators_and_clamps_jitter() {
        let lam: f64 = 0.5;
        let thr = lam.ln();
        // margin −1e-12 is inside tolerance and clamps to zero
        let g = region_log_average(&[thr - 1e-12, thr + 0.4], lam, 0.0).unwrap();
        assert_relative_eq!(g, 0.2, epsilon = 1e-12);
        // margin −1e-6 is a genuine violation
        let err = region_log_average(&[thr - 1e-6], lam, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidSample(_)));
        assert!(region_log_average(&[], lam, 0.0).is_err());
        assert!(region_log_average(&[0.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn size_integral_anchor_identity() {
        let grid = LambdaGrid::log_spaced(0.9, 1e-4, 9).unwrap();
        let g = vec![0.4; 9];
        for anchor in [0usize, 4, 8] {
            let s = size_integral(grid.values(), &g, anchor, 0.37).unwrap();
            assert_eq!(s[anchor], 0.37);
        }
    }

    #[test]
    fn size_integral_constant_g_matches_power_law() {
        let gamma = 0.7;
        let grid = LambdaGrid::log_spaced(0.9, 1e-6, 13).unwrap();
        let anchor = 6;
        let s0 = 1e-6;
        let s = size_integral(grid.values(), &vec![gamma; 13], anchor, s0).unwrap();
        let l0 = grid.values()[anchor];
        for (j, &lam) in grid.values().iter().enumerate() {
            let expected = s0 * (lam / l0).powf(-1.0 / gamma);
            assert_relative_eq!(s[j], expected, epsilon = 1e-12, max_relative = 1e-12);
        }
        // smaller λ ⇒ larger region in both directions from the anchor
        for w in s.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn size_integral_reports_singular_lambda() {
        let grid = LambdaGrid::log_spaced(0.9, 1e-3, 5).unwrap();
        let mut g = vec![0.5; 5];
        g[3] = 0.0;
        let err = size_integral(grid.values(), &g, 1, 0.1).unwrap_err();
        match err {
            Error::SingularIntegrand { lambda } => {
                assert_relative_eq!(lambda, grid.values()[3], epsilon = 1e-15)
            }
            other => panic!("expected SingularIntegrand, got {other:?}"),
        }
        // NaN g is singular too
        g[3] = f64::NAN;
        assert!(size_integral(grid.values(), &g, 1, 0.1).is_err());
        // bad anchor parameters
        assert!(size_integral(grid.values(), &vec![0.5; 5], 9, 0.1).is_err());
        assert!(size_integral(grid.values(), &vec![0.5; 5], 1, 0.0).is_err());
        assert!(size_integral(grid.values(), &vec![0.5; 4], 1, 0.1).is_err());
    }

    #[test]
    fn linear_size_curve_reproduces_closed_form_content() {
        // s(λ) = 1 − λ ⇒ c(λ) = 1 − λ²; trapezoid is exact on piecewise
        // linear curves, so the 1e-3 documented tolerance is loose here
        let n = 999;
        let lambdas: Vec<f64> = (1..=n).rev().map(|j| j as f64 / 1000.0).collect();
        let s: Vec<f64> = lambdas.iter().map(|l| 1.0 - l).collect();
        let c = size_to_content(&lambdas, &s).unwrap();
        for (j, &lam) in lambdas.iter().enumerate() {
            let expected = 1.0 - lam * lam;
            assert!((c[j] - expected).abs() < 1e-3);
            assert_relative_eq!(c[j], expected, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn flat_size_curve_gives_unit_content() {
        let grid = LambdaGrid::log_spaced(0.9, 1e-5, 21).unwrap();
        let c = size_to_content(grid.values(), &vec![1.0; 21]).unwrap();
        for &cj in &c {
            assert_relative_eq!(cj, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn size_to_content_rejects_degenerate_input() {
        // an all-zero size curve is valid input: the λ = 0 anchor keeps the
        // denominator positive and the content is 0 on the grid
        let c = size_to_content(&[0.5], &[0.0]).unwrap();
        assert_eq!(c, vec![0.0]);
        assert!(size_to_content(&[0.5], &[1.0, 0.5]).is_err());
        assert!(size_to_content(&[0.5], &[1.5]).is_err());
        assert!(size_to_content(&[], &[]).is_err());
    }

    #[test]
    fn anchor_is_the_uniform_sample_fraction_exactly() {
        let grid = LambdaGrid::log_spaced(0.9, 1e-8, 17).unwrap();
        // distinct log densities, deliberately unsorted
        let log_f = vec![-3.0, -9.0, -1.0, -6.0, -2.0, -12.0, -4.0, -8.0];
        let (l0, s0) = calibrate_anchor(&log_f, 0.0, &grid, 0.25, 1e-3).unwrap();
        // k = 2 ⇒ threshold at the second-largest value, −2
        assert_eq!(s0, 0.25);
        assert_relative_eq!(l0, (-2.0f64).exp(), epsilon = 1e-15);
        // ties at the threshold all count
        let tied = vec![-2.0, -2.0, -2.0, -7.0];
        let (_, s0) = calibrate_anchor(&tied, 0.0, &grid, 0.25, 1e-3).unwrap();
        assert_eq!(s0, 0.75);
    }

    #[test]
    fn anchor_clamps_into_grid_range() {
        let grid = LambdaGrid::log_spaced(0.9, 1e-2, 9).unwrap();
        // quantile would land above the top: clamp to top, recount
        let shallow = vec![-0.01, -0.02, -0.03, -0.04];
        let (l0, s0) = calibrate_anchor(&shallow, 0.0, &grid, 0.25, 1e-3).unwrap();
        assert_relative_eq!(l0, 0.9, epsilon = 1e-12);
        assert_eq!(s0, 1.0); // all four sit above ln 0.9
        // quantile far below the bottom: clamp to bottom; only the point
        // inside survives the recount
        let mut deep = vec![-40.0; 1999];
        deep.push(-1.0);
        let (l0, s0) = calibrate_anchor(&deep, 0.0, &grid, 0.03, 1e-4).unwrap();
        assert_relative_eq!(l0, 1e-2, epsilon = 1e-12);
        assert_relative_eq!(s0, 1.0 / 2000.0, epsilon = 1e-15);
        // same situation with a stricter floor is an anchor failure
        let err = calibrate_anchor(&deep, 0.0, &grid, 0.03, 1e-3).unwrap_err();
        assert!(matches!(err, Error::AnchorTooDeep(_)));
        assert!(calibrate_anchor(&[], 0.0, &grid, 0.03, 1e-3).is_err());
    }

    /// Flat target on the trine simplex: every physical point has the same
    /// density, so g_λ = −ln λ exactly, the region is the whole disk, and the
    /// protocol must report s = c = 1 on the entire grid.
    #[test]
    fn protocol_flat_target_is_exact() {
        let target = DirichletTarget::new(crate::qstate::build_trine_pom(), vec![0.0; 3]).unwrap();
        let problem = SimplexDirichletProblem::new(target);
        let constraints = [crate::engine::ConstraintSpec::hard()];
        let grid = LambdaGrid::log_spaced(0.9, 1e-3, 10).unwrap();
        let scmc = ScmcConfig {
            n_particles: 200,
            n_mc: 6,
            seed: 7,
            ..ScmcConfig::default()
        };
        let config = OtjConfig::new(grid, 500.0, scmc);
        let uniform_log_f = vec![0.0; 2000];
        let mut kernel = SimplexWalk::new(3);
        let flat = DirichletParams::new(vec![0.0; 3]).unwrap();
        let run = otj_protocol(
            &problem,
            &constraints,
            0.0,
            &uniform_log_f,
            |rng: &mut ChaCha8Rng| sample_dirichlet(&flat, rng),
            &mut kernel,
            &config,
        )
        .unwrap();
        assert_relative_eq!(run.anchor.0, 0.9, epsilon = 1e-12);
        assert_eq!(run.anchor.1, 1.0);
        for (j, &lam) in run.grid.values().iter().enumerate() {
            assert_relative_eq!(run.g_values[j], -lam.ln(), epsilon = 1e-12);
            assert!(run.s_values[j] >= 1.0 - 1e-9, "s[{j}] = {}", run.s_values[j]);
            assert_relative_eq!(run.c_values[j], 1.0, epsilon = 1e-12);
            assert_eq!(run.sample_sizes[j], 200);
            assert_relative_eq!(run.ess_min[j], 200.0, epsilon = 1e-9);
        }
    }

    fn uniform_disk_log_densities(
        target: &DirichletTarget,
        n: usize,
        seed: u64,
    ) -> Vec<f64> {
        let params = DirichletParams::new(vec![0.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let p = sample_dirichlet(&params, &mut rng);
            if physicality_kappa(target.probability_map(), &p) >= 0.0 {
                out.push(target.log_density_probs(&p));
            }
        }
        out
    }

    /// Cross-validation on a peaked trine target: the OTJ content curve has
    /// to track a direct importance estimate of c_λ from a large uniform
    /// sample.
    #[test]
    fn protocol_tracks_direct_content_estimate() {
        let target =
            DirichletTarget::new(crate::qstate::build_trine_pom(), vec![16.0, 8.0, 4.0]).unwrap();
        let p_peak = target.simplex_mode().unwrap();
        assert!(physicality_kappa(target.probability_map(), &p_peak) > 0.0);
        let log_peak = target.log_density_probs(&p_peak);
        let uniform_log_f = uniform_disk_log_densities(&target, 30_000, 42);

        // direct estimate: c(λ) = Σ_{f ≥ λF} f / Σ f over the uniform sample
        let weights: Vec<f64> = uniform_log_f.iter().map(|lf| (lf - log_peak).exp()).collect();
        let total: f64 = weights.iter().sum();
        let direct = |lam: f64| -> f64 {
            let thr = lam.ln() + log_peak;
            uniform_log_f
                .iter()
                .zip(&weights)
                .filter(|(&lf, _)| lf >= thr)
                .map(|(_, &w)| w)
                .sum::<f64>()
                / total
        };

        let problem = SimplexDirichletProblem::new(target);
        let constraints = [crate::engine::ConstraintSpec::hard()];
        let grid = LambdaGrid::per_decade(0.9, 1e-4, 8.0).unwrap();
        let scmc = ScmcConfig {
            n_particles: 600,
            n_mc: 10,
            seed: 3,
            ..ScmcConfig::default()
        };
        let config = OtjConfig::new(grid, 500.0, scmc);
        let mut kernel = SimplexWalk::new(3);
        let flat = DirichletParams::new(vec![0.0; 3]).unwrap();
        let run = otj_protocol(
            &problem,
            &constraints,
            log_peak,
            &uniform_log_f,
            |rng: &mut ChaCha8Rng| sample_dirichlet(&flat, rng),
            &mut kernel,
            &config,
        )
        .unwrap();

        // invariants
        assert!(run.anchor.1 > 0.0 && run.anchor.1 <= 1.0);
        for j in 0..run.grid.len() {
            assert!(run.g_values[j] >= 0.0);
            assert!((0.0..=1.0).contains(&run.s_values[j]));
            assert!((0.0..=1.0).contains(&run.c_values[j]));
            if j > 0 {
                assert!(run.s_values[j] >= run.s_values[j - 1]);
                assert!(run.c_values[j] >= run.c_values[j - 1] - 1e-12);
            }
        }
        // agreement with the direct curve in the informative range
        let mut compared = 0;
        for (j, &lam) in run.grid.values().iter().enumerate() {
            let d = direct(lam);
            if (0.05..=0.95).contains(&d) {
                assert!(
                    (run.c_values[j] - d).abs() <= 0.08,
                    "λ = {lam:.3e}: OTJ {} vs direct {d}",
                    run.c_values[j]
                );
                compared += 1;
            }
        }
        assert!(compared >= 5, "only {compared} grid points were informative");
    }

    #[test]
    fn protocol_reanchor_stays_consistent() {
        let target =
            DirichletTarget::new(crate::qstate::build_trine_pom(), vec![16.0, 8.0, 4.0]).unwrap();
        let p_peak = target.simplex_mode().unwrap();
        let log_peak = target.log_density_probs(&p_peak);
        let uniform_log_f = uniform_disk_log_densities(&target, 8_000, 5);
        let problem = SimplexDirichletProblem::new(target);
        let constraints = [crate::engine::ConstraintSpec::hard()];
        let scmc = ScmcConfig {
            n_particles: 300,
            n_mc: 8,
            seed: 11,
            ..ScmcConfig::default()
        };
        let grid = LambdaGrid::per_decade(0.9, 1e-3, 6.0).unwrap();
        let mut plain_cfg = OtjConfig::new(grid.clone(), 500.0, scmc.clone());
        let mut kernel = SimplexWalk::new(3);
        let flat = DirichletParams::new(vec![0.0; 3]).unwrap();
        let plain = otj_protocol(
            &problem,
            &constraints,
            log_peak,
            &uniform_log_f,
            |rng: &mut ChaCha8Rng| sample_dirichlet(&flat, rng),
            &mut kernel,
            &plain_cfg,
        )
        .unwrap();

        plain_cfg.reanchor_lambda = Some(1e-2);
        let re = otj_protocol(
            &problem,
            &constraints,
            log_peak,
            &uniform_log_f,
            |rng: &mut ChaCha8Rng| sample_dirichlet(&flat, rng),
            &mut kernel,
            &plain_cfg,
        )
        .unwrap();
        assert_relative_eq!(re.anchor.0, 1e-2, epsilon = 1e-12);
        assert!(re.anchor.1 > 0.0);
        for j in 1..re.grid.len() {
            assert!(re.s_values[j] >= re.s_values[j - 1]);
        }
        // both runs estimate the same curve; compare at the deepest λ
        let c_plain = *plain.c_values.last().unwrap();
        let c_re = *re.c_values.last().unwrap();
        assert!(
            (c_plain - c_re).abs() <= 0.1,
            "plain {c_plain} vs re-anchored {c_re}"
        );
    }

    #[test]
    fn csv_round_trip_shape() {
        let run = OtjRun {
            grid: LambdaGrid::new(vec![0.5, 0.1]).unwrap(),
            g_values: vec![0.3, 1.2],
            s_values: vec![0.01, 0.2],
            c_values: vec![0.4, 0.9],
            anchor: (0.5, 0.01),
            sample_sizes: vec![100, 100],
            ess_min: vec![90.0, 85.0],
        };
        let mut buf = Vec::new();
        run.write_csv(&mut buf, &["demo".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# demo"));
        let header = lines.iter().position(|l| l.starts_with("lambda,")).unwrap();
        assert_eq!(lines[header + 1], "0,,1,1,,"); // exact λ = 0 endpoint
        assert_eq!(lines.len(), header + 4);
    }
}
