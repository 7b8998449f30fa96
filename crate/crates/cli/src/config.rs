//! Scenario documents: one JSON object per run, validated in full before any computation.

use akprop::analysis::{geometric_ladder, XYGrid};
use akprop::oracle::GridSpec;
use akprop::oscillatory::{model_symbol, symbol_with, Omega, SymbolShape, SymbolSpec};
use akprop::profiles::{make_band_limited_profile, make_gaussian_profile, make_zero_mean_profile, modulate, translate, Profile, ProfileFamily};
use akprop::propagator::QuadratureConfig;
use akprop::spectral::{remark52_family, tau0_threshold};
use akprop::Branch;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    KernelEval,
    BorelScan,
    SpectralCheck,
    Propagate,
    OracleCompare,
    DecayFit,
    OscillatoryVerify,
    Scaling,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::KernelEval => "kernel-eval",
            Experiment::BorelScan => "borel-scan",
            Experiment::SpectralCheck => "spectral-check",
            Experiment::Propagate => "propagate",
            Experiment::OracleCompare => "oracle-compare",
            Experiment::DecayFit => "decay-fit",
            Experiment::OscillatoryVerify => "oscillatory-verify",
            Experiment::Scaling => "scaling",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub dimension: usize,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub lambda_grid: Option<LambdaGrid>,
    /// spectral-check passes when the scanned margin exceeds this floor
    #[serde(default)]
    pub spectral_floor: f64,
    #[serde(default)]
    pub points: Option<PointsSpec>,
    #[serde(default)]
    pub times: Option<TimesSpec>,
    #[serde(default)]
    pub kernel_eval: Option<KernelEvalSpec>,
    #[serde(default)]
    pub propagate: Option<PropagateSpec>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub decay: Option<DecaySpec>,
    #[serde(default)]
    pub oscillatory: Option<OscillatorySpec>,
    #[serde(default)]
    pub scaling: Option<ScalingSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum Shape {
    Gaussian,
    ZeroMean,
    BandLimited,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub shape: Shape,
    /// width (Gaussian, zero-mean) or Fourier radius (band-limited)
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub shift: Option<Vec<f64>>,
    #[serde(default)]
    pub frequency: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl ProfileSpec {
    pub fn build(&self, d: usize) -> akprop::Result<Profile> {
        let mut p = match self.shape {
            Shape::Gaussian => make_gaussian_profile(d, self.scale)?,
            Shape::ZeroMean => make_zero_mean_profile(d, self.scale)?,
            Shape::BandLimited => make_band_limited_profile(d, self.scale)?,
        };
        for (v, what) in [(&self.shift, "shift"), (&self.frequency, "frequency")] {
            if let Some(v) = v {
                if v.len() != d {
                    return Err(akprop::Error::Invalid(format!("profile {what} must have {d} components")));
                }
            }
        }
        if let Some(s) = &self.shift {
            p = translate(&p, s);
        }
        if let Some(k) = &self.frequency {
            p = modulate(&p, k);
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    #[default]
    Empty,
    Explicit { members: Vec<ProfileSpec>, weights: Vec<f64> },
    /// φ(· − jτ₀e₁), j < n; τ₀ from the spread threshold when omitted
    Translated {
        profile: ProfileSpec,
        n: usize,
        #[serde(default)]
        tau0: Option<f64>,
        #[serde(default = "one")]
        weight: f64,
    },
    /// e^{i(L+2j)x₁}φ with weights 2^{−j}
    Remark52 { profile: ProfileSpec, n: usize },
}

impl FamilySpec {
    pub fn with_n(&self, n: usize) -> FamilySpec {
        let mut f = self.clone();
        match &mut f {
            FamilySpec::Translated { n: m, .. } | FamilySpec::Remark52 { n: m, .. } => *m = n,
            _ => {}
        }
        f
    }

    /// Translation step actually used (resolving the threshold when needed).
    pub fn tau0(&self, d: usize, lambda_grid: &[f64]) -> akprop::Result<Option<f64>> {
        match self {
            FamilySpec::Translated { profile, n, tau0, weight } => match tau0 {
                Some(t) => Ok(Some(*t)),
                None => Ok(Some(tau0_threshold(&profile.build(d)?, *weight, *n, lambda_grid, 4.0)?)),
            },
            _ => Ok(None),
        }
    }

    pub fn build(&self, d: usize, lambda_grid: &[f64]) -> akprop::Result<ProfileFamily> {
        match self {
            FamilySpec::Empty => Ok(ProfileFamily::empty()),
            FamilySpec::Explicit { members, weights } => {
                let m = members.iter().map(|p| p.build(d)).collect::<akprop::Result<Vec<_>>>()?;
                ProfileFamily::new(m, weights.clone())
            }
            FamilySpec::Translated { profile, n, weight, .. } => {
                let tau = self.tau0(d, lambda_grid)?.unwrap_or(0.0);
                ProfileFamily::translated(&profile.build(d)?, *n, tau, *weight)
            }
            FamilySpec::Remark52 { profile, n } => remark52_family(&profile.build(d)?, *n),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub lambda0: Option<f64>,
    pub lambda_max: Option<f64>,
    pub phase_budget: Option<f64>,
    pub tol: Option<f64>,
    pub epsilon_schedule: Option<Vec<f64>>,
}

impl QuadratureSpec {
    pub fn build(&self) -> akprop::Result<QuadratureConfig> {
        let mut q = QuadratureConfig::default();
        if let Some(v) = self.lambda0 {
            q.lambda0 = v;
        }
        if let Some(v) = self.lambda_max {
            q.lambda_max = v;
        }
        if let Some(v) = self.phase_budget {
            q.phase_budget = v;
        }
        if let Some(v) = self.tol {
            q.tol = v;
        }
        if let Some(v) = &self.epsilon_schedule {
            q.epsilon_schedule = v.clone();
        }
        q.validate()?;
        Ok(q)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaGrid {
    List(Vec<f64>),
    Uniform { start: f64, stop: f64, count: usize },
}

impl LambdaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            LambdaGrid::List(v) => v.clone(),
            LambdaGrid::Uniform { start, stop, count } => {
                if *count < 2 {
                    return vec![*start];
                }
                (0..*count).map(|i| start + (stop - start) * i as f64 / (*count - 1) as f64).collect()
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PointsSpec {
    /// n equispaced points on [−r, r]·e₁, for x and y
    Axis { r: f64, n: usize },
    Explicit { xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>> },
    /// s·e₁ with s = j·τ₀ + offset for each member j of a translated family
    Around { offsets: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimesSpec {
    List(Vec<f64>),
    Ladder { t0: f64, ratio: f64, count: usize },
}

impl TimesSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            TimesSpec::List(v) => v.clone(),
            TimesSpec::Ladder { t0, ratio, count } => geometric_ladder(*t0, *ratio, *count),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEvalSpec {
    pub branch: BranchName,
    pub lambda: f64,
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchName {
    Plus,
    Minus,
}

impl From<BranchName> for Branch {
    fn from(b: BranchName) -> Branch {
        match b {
            BranchName::Plus => Branch::Plus,
            BranchName::Minus => Branch::Minus,
        }
    }
}

impl From<Branch> for BranchName {
    fn from(b: Branch) -> BranchName {
        match b {
            Branch::Plus => BranchName::Plus,
            Branch::Minus => BranchName::Minus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Free,
    Difference,
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateSpec {
    #[serde(default = "difference")]
    pub kernel: KernelKind,
}

fn difference() -> KernelKind {
    KernelKind::Difference
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// box half-width
    pub l: f64,
    pub n: usize,
    #[serde(default = "oracle_tol")]
    pub rel_tol: f64,
}

fn oracle_tol() -> f64 {
    5e-3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    #[serde(default = "difference")]
    pub kernel: KernelKind,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub b: f64,
    pub k: usize,
    pub omega: OmegaName,
    #[serde(default = "one")]
    pub r0: f64,
    #[serde(default)]
    pub power: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaName {
    Low,
    High,
}

impl SymbolConfig {
    pub fn build(&self) -> akprop::Result<SymbolSpec> {
        let omega = match self.omega {
            OmegaName::Low => Omega::Low,
            OmegaName::High => Omega::High,
        };
        if self.power {
            symbol_with(self.b, self.k, omega, self.r0, SymbolShape::Power)
        } else if self.r0 == 1.0 {
            model_symbol(self.b, self.k, omega)
        } else {
            symbol_with(self.b, self.k, omega, self.r0, SymbolShape::Model)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub t0: f64,
    pub t_octaves: usize,
    pub x0: f64,
    pub x_octaves: usize,
    pub per_octave: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// "2.32", "2.33" or "2.34"
    pub bound: String,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub symbols: Vec<SymbolConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorySpec {
    pub lattice: LatticeConfig,
    pub sweeps: Vec<SweepConfig>,
    /// symbol used for the I₁ + I₂ recombination check
    #[serde(default)]
    pub split_symbol: Option<SymbolConfig>,
    #[serde(default)]
    pub fresnel_t: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    N,
    Tau,
    Alpha,
    Trace,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub mode: ScalingMode,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default = "one")]
    pub t_ref: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    pub threshold: f64,
    /// reference point for trace-class partial sums
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub y: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub prefix: Option<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("akprop-out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir(), prefix: None }
    }
}

/// Everything an experiment needs, checked up front.
pub struct Validated {
    pub cfg: ScenarioConfig,
    pub quad: QuadratureConfig,
    pub lambda_grid: Vec<f64>,
    pub family: ProfileFamily,
    pub tau0: Option<f64>,
    pub grid: Option<XYGrid>,
    pub times: Vec<f64>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(key: &str, why: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("invalid `{key}`: {why}"))
}

pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
}

pub fn points_grid(spec: &PointsSpec, d: usize, n_members: usize, tau0: Option<f64>) -> akprop::Result<XYGrid> {
    match spec {
        PointsSpec::Axis { r, n } => XYGrid::axis(d, *r, *n),
        PointsSpec::Explicit { xs, ys } => XYGrid::from_points(d, xs.clone(), ys.clone()),
        PointsSpec::Around { offsets } => {
            let tau = tau0.ok_or_else(|| akprop::Error::Invalid("`around` points need a translated family".into()))?;
            let centers: Vec<f64> = (0..n_members.max(1)).map(|j| j as f64 * tau).collect();
            XYGrid::around(d, &centers, offsets)
        }
    }
}

pub fn validate(cfg: ScenarioConfig, experiment: Experiment) -> Result<Validated, ConfigError> {
    let d = cfg.dimension;
    if !(1..=3).contains(&d) {
        return Err(bad("dimension", format!("{d} not in 1..=3")));
    }
    let quad = cfg.quadrature.build().map_err(|e| bad("quadrature", e))?;
    let lambda_grid = cfg
        .lambda_grid
        .as_ref()
        .map(|g| g.values())
        .unwrap_or_else(|| (1..=50).map(|i| 0.2 * i as f64).collect());
    if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(*l > 0.0)) || lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("lambda_grid", "needs values that are positive and strictly increasing"));
    }
    let tau0 = cfg.family.tau0(d, &lambda_grid).map_err(|e| bad("family", e))?;
    let family = cfg.family.build(d, &lambda_grid).map_err(|e| bad("family", e))?;
    let grid = match &cfg.points {
        Some(p) => Some(points_grid(p, d, family.len(), tau0).map_err(|e| bad("points", e))?),
        None => None,
    };
    let times = cfg.times.as_ref().map(|t| t.values()).unwrap_or_default();
    if times.iter().any(|t| *t == 0.0 || !t.is_finite()) {
        return Err(bad("times", "t must be finite and non-zero"));
    }
    if !(cfg.spectral_floor >= 0.0) {
        return Err(bad("spectral_floor", "must be ≥ 0"));
    }
    let need = |ok: bool, key: &str| if ok { Ok(()) } else { Err(bad(key, format!("required by {}", experiment.name()))) };
    match experiment {
        Experiment::KernelEval => {
            let k = cfg.kernel_eval.as_ref().ok_or_else(|| bad("kernel_eval", "required by kernel-eval"))?;
            if !(k.lambda > 0.0) || !(k.r >= 0.0) {
                return Err(bad("kernel_eval", "needs lambda > 0 and r ≥ 0"));
            }
        }
        Experiment::BorelScan | Experiment::SpectralCheck => {}
        Experiment::Propagate => {
            need(grid.is_some(), "points")?;
            need(!times.is_empty(), "times")?;
        }
        Experiment::OracleCompare => {
            need(grid.is_some(), "points")?;
            need(!times.is_empty(), "times")?;
            let o = cfg.oracle.as_ref().ok_or_else(|| bad("oracle", "required by oracle-compare"))?;
            GridSpec::new(d, o.l, o.n).map_err(|e| bad("oracle", e))?;
        }
        Experiment::DecayFit => {
            need(grid.is_some(), "points")?;
            need(times.len() >= 5, "times")?;
            need(cfg.decay.is_some(), "decay")?;
            need(cfg.decay.as_ref().map_or(false, |k| k.tolerance > 0.0), "decay.tolerance")?;
        }
        Experiment::OscillatoryVerify => {
            let o = cfg.oscillatory.as_ref().ok_or_else(|| bad("oscillatory", "required by oscillatory-verify"))?;
            for s in &o.sweeps {
                if !matches!(s.bound.as_str(), "2.32" | "2.33" | "2.34") {
                    return Err(bad("oscillatory.sweeps.bound", format!("unknown bound {}", s.bound)));
                }
                if s.bound == "2.34" && s.d.is_none() {
                    return Err(bad("oscillatory.sweeps.d", "2.34 needs a dimension"));
                }
                for sym in &s.symbols {
                    sym.build().map_err(|e| bad("oscillatory.sweeps.symbols", e))?;
                }
            }
            if let Some(s) = &o.split_symbol {
                s.build().map_err(|e| bad("oscillatory.split_symbol", e))?;
            }
        }
        Experiment::Scaling => {
            let s = cfg.scaling.as_ref().ok_or_else(|| bad("scaling", "required by scaling"))?;
            match s.mode {
                ScalingMode::N => {
                    need(!matches!(cfg.family, FamilySpec::Empty | FamilySpec::Explicit { .. }), "family")?;
                    need(cfg.points.is_some(), "points")?;
                }
                ScalingMode::Tau => {
                    need(s.lambda.is_some(), "scaling.lambda")?;
                    need(matches!(cfg.family, FamilySpec::Translated { .. }), "family")?;
                }
                ScalingMode::Alpha => {
                    need(grid.is_some(), "points")?;
                    need(family.len() == 1, "family")?;
                }
                ScalingMode::Trace => {
                    need(s.x.as_ref().map(|v| v.len()) == Some(d), "scaling.x")?;
                    need(s.y.as_ref().map(|v| v.len()) == Some(d), "scaling.y")?;
                }
            }
            if s.mode != ScalingMode::Trace && s.values.len() < 2 {
                return Err(bad("scaling.values", "need at least two values"));
            }
        }
    }
    Ok(Validated { cfg, quad, lambda_grid, family, tau0, grid, times })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_ladders_expand() {
        let cfg = parse(r#"{"dimension": 1, "lambda_grid": {"start": 1.0, "stop": 2.0, "count": 3}, "times": {"t0": 1.0, "ratio": 2.0, "count": 4}}"#).unwrap();
        assert_eq!(cfg.lambda_grid.unwrap().values(), vec![1.0, 1.5, 2.0]);
        assert_eq!(cfg.times.unwrap().values(), vec![1.0, 2.0, 4.0, 8.0]);
        let listed = parse(r#"{"dimension": 2, "times": [0.5, 3.0]}"#).unwrap();
        assert_eq!(listed.times.unwrap().values(), vec![0.5, 3.0]);
    }

    #[test]
    fn validation_names_the_offending_key() {
        let cfg = parse(r#"{"dimension": 1, "points": {"kind": "axis", "r": 1.0, "n": 3}}"#).unwrap();
        let e = validate(cfg, Experiment::Propagate).err().unwrap();
        assert!(e.0.contains("`times`"), "{}", e.0);
        let cfg = parse(r#"{"dimension": 4}"#).unwrap();
        assert!(validate(cfg, Experiment::SpectralCheck).is_err());
        assert!(parse(r#"{"dimension": 1, "family": {"kind": "nonsense"}}"#).is_err());
    }

    #[test]
    fn families_build_with_the_requested_size() {
        let cfg = parse(r#"{"dimension": 1, "family": {"kind": "translated", "profile": {"shape": "gaussian"}, "n": 3, "tau0": 2.5, "weight": 0.5}}"#).unwrap();
        let v = validate(cfg, Experiment::SpectralCheck).unwrap();
        assert_eq!(v.family.len(), 3);
        assert_eq!(v.tau0, Some(2.5));
        assert_eq!(v.family.weights, vec![0.5; 3]);
    }
}
