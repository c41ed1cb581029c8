//! Versioned JSON experiment configuration and its validation.

use hjcheck_core::{ModelSpace, Potential, SpaceKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Invalid configuration, located by a dotted field path such as
/// `tataru.epsilon[0]`.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid config at {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Quadratic { kappa: f64 },
    Quartic,
    DoubleWell { shift: f64 },
}

impl PotentialConfig {
    pub fn to_potential(&self) -> Potential {
        match *self {
            PotentialConfig::Quadratic { kappa } => Potential::Quadratic { kappa },
            PotentialConfig::Quartic => Potential::Quartic,
            PotentialConfig::DoubleWell { shift } => Potential::DoubleWell { shift },
        }
    }

    fn label(&self) -> String {
        match self {
            PotentialConfig::Quadratic { kappa } => format!("quadratic({kappa})"),
            PotentialConfig::Quartic => "quartic".into(),
            PotentialConfig::DoubleWell { shift } => format!("double_well({shift})"),
        }
    }

    fn validate(&self, path: &str) -> Result<(), ConfigError> {
        let v = match *self {
            PotentialConfig::Quadratic { kappa } => kappa,
            PotentialConfig::Quartic => 0.0,
            PotentialConfig::DoubleWell { shift } => shift,
        };
        if !v.is_finite() {
            return Err(ConfigError::new(path, "potential parameter must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKindConfig {
    Euclidean,
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceKindConfig,
    /// Dimension, or number of quantile points.
    pub dim: usize,
    pub potential: PotentialConfig,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
}

impl SpaceConfig {
    pub fn build(&self) -> hjcheck_core::Result<ModelSpace> {
        let kind = match self.kind {
            SpaceKindConfig::Euclidean => SpaceKind::Euclidean,
            SpaceKindConfig::Quantile => SpaceKind::Quantile1D,
        };
        let s = ModelSpace::new(kind, self.dim, self.potential.to_potential())?;
        match self.bounds {
            Some([lo, hi]) => s.with_box(lo, hi),
            None => Ok(s),
        }
    }

    /// Row label; contains no commas.
    pub fn label(&self) -> String {
        let kind = match self.kind {
            SpaceKindConfig::Euclidean => "euclidean",
            SpaceKindConfig::Quantile => "quantile",
        };
        format!("{}/{}{}", self.potential.label(), kind, self.dim)
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.potential, PotentialConfig::Quadratic { .. })
    }

    fn validate(&self, path: &str) -> Result<(), ConfigError> {
        if self.dim == 0 {
            return Err(ConfigError::new(format!("{path}.dim"), "must be at least 1"));
        }
        self.potential.validate(&format!("{path}.potential"))?;
        if let Some([lo, hi]) = self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ConfigError::new(format!("{path}.box"), "need finite lo < hi"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EviConfig {
    pub instances: usize,
    pub delta: f64,
    pub time_samples: usize,
    pub trajectory_samples: usize,
    pub tolerance: f64,
    /// Bound for checks that hold exactly with closed-form flows.
    pub exact_tolerance: f64,
}

impl Default for EviConfig {
    fn default() -> Self {
        EviConfig {
            instances: 200,
            delta: 1e-4,
            time_samples: 64,
            trajectory_samples: 4000,
            tolerance: 1e-3,
            exact_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsiConfig {
    pub epsilon: Vec<f64>,
    pub grid_points: usize,
    pub r_max: f64,
}

impl Default for PsiConfig {
    fn default() -> Self {
        PsiConfig { epsilon: vec![1e-4, 1e-2, 0.5], grid_points: 10_000, r_max: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TataruConfig {
    pub instances: usize,
    /// Smoothing levels for the smoothed-distance gap.
    pub epsilon: Vec<f64>,
    pub smoothed_pairs: usize,
    pub tolerance: f64,
}

impl Default for TataruConfig {
    fn default() -> Self {
        TataruConfig { instances: 500, epsilon: vec![1e-4, 1e-2], smoothed_pairs: 100, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceConfig {
    pub epsilon: f64,
    pub pi: f64,
    pub mu: f64,
    pub m: Vec<u64>,
    pub varadhan_tolerance: f64,
    pub constants: Vec<f64>,
    pub constant_tolerance: f64,
    pub riemann_m: u64,
    pub riemann_n: Vec<u64>,
    pub tilt_m: u64,
    pub tilt_epsilon: f64,
    pub tilt_radius: f64,
    pub tilt_mass: f64,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        LaplaceConfig {
            epsilon: 0.1,
            pi: 0.0,
            mu: 3.0,
            m: vec![10, 100, 1000, 10_000],
            varadhan_tolerance: 0.05,
            constants: vec![0.0, 0.5, 2.0],
            constant_tolerance: 1e-10,
            riemann_m: 20,
            riemann_n: vec![10, 40, 160],
            tilt_m: 1000,
            tilt_epsilon: 1e-3,
            tilt_radius: 0.1,
            tilt_mass: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub samples: usize,
    pub links: Vec<String>,
    pub tolerance_one_two: f64,
    pub tolerance_four_five: f64,
    pub tolerance_overlap: f64,
    /// Instances for the level 5/6 identity.
    pub level_samples: usize,
    pub epsilon: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            samples: 500,
            links: vec!["1-2".into(), "4-5".into(), "0-1-overlap".into()],
            tolerance_one_two: 1e-9,
            tolerance_four_five: 1e-6,
            tolerance_overlap: 1e-10,
            level_samples: 50,
            epsilon: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventConfig {
    pub lambda: f64,
    pub potential: PotentialConfig,
    pub half_width: f64,
    pub dx: f64,
    pub controls: usize,
    pub control_bound: f64,
    /// Time step as a fraction of `lambda`.
    pub dt_fraction: f64,
    pub tolerance: f64,
    pub oracle_half_width: f64,
    pub oracle_tolerance: f64,
    pub constant: f64,
    pub shift: f64,
    pub equivariance_tolerance: f64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        ResolventConfig {
            lambda: 1.0,
            potential: PotentialConfig::Quadratic { kappa: 1.0 },
            half_width: 5.0,
            dx: 1.0 / 200.0,
            controls: 129,
            control_bound: 2.0,
            dt_fraction: 0.01,
            tolerance: 1e-10,
            oracle_half_width: 2.0,
            oracle_tolerance: 1e-2,
            constant: 0.7,
            shift: 0.3,
            equivariance_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViscosityConfig {
    pub pairs: usize,
    pub anchor_range: f64,
    pub a_range: [f64; 2],
    pub weight_range: [f64; 2],
    pub max_anchors: usize,
    /// Violation tolerance in units of the grid spacing.
    pub tolerance_cells: f64,
}

impl Default for ViscosityConfig {
    fn default() -> Self {
        ViscosityConfig {
            pairs: 50,
            anchor_range: 2.0,
            a_range: [0.2, 1.5],
            weight_range: [0.1, 1.0],
            max_anchors: 2,
            tolerance_cells: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonConfig {
    pub pairs: usize,
    pub shift: f64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig { pairs: 20, shift: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default = "default_spaces")]
    pub spaces: Vec<SpaceConfig>,
    #[serde(default)]
    pub evi: EviConfig,
    #[serde(default)]
    pub psi: PsiConfig,
    #[serde(default)]
    pub tataru: TataruConfig,
    #[serde(default)]
    pub laplace: LaplaceConfig,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub resolvent: ResolventConfig,
    #[serde(default)]
    pub viscosity: ViscosityConfig,
    #[serde(default)]
    pub comparison: ComparisonConfig,
}

pub fn default_spaces() -> Vec<SpaceConfig> {
    let narrow = Some([-2.0, 2.0]);
    vec![
        SpaceConfig {
            kind: SpaceKindConfig::Euclidean,
            dim: 1,
            potential: PotentialConfig::Quadratic { kappa: 1.0 },
            bounds: None,
        },
        SpaceConfig {
            kind: SpaceKindConfig::Euclidean,
            dim: 2,
            potential: PotentialConfig::Quadratic { kappa: -0.5 },
            bounds: narrow,
        },
        SpaceConfig { kind: SpaceKindConfig::Quantile, dim: 16, potential: PotentialConfig::Quartic, bounds: narrow },
        SpaceConfig {
            kind: SpaceKindConfig::Euclidean,
            dim: 1,
            potential: PotentialConfig::DoubleWell { shift: 0.3 },
            bounds: narrow,
        },
    ]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            out: None,
            spaces: default_spaces(),
            evi: EviConfig::default(),
            psi: PsiConfig::default(),
            tataru: TataruConfig::default(),
            laplace: LaplaceConfig::default(),
            chain: ChainConfig::default(),
            resolvent: ResolventConfig::default(),
            viscosity: ViscosityConfig::default(),
            comparison: ComparisonConfig::default(),
        }
    }
}

/// Parse and validate a JSON configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = serde_json::from_str(text)
        .map_err(|e| ConfigError::new(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be nonnegative and finite, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, "must be finite"))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> Result<(), ConfigError> {
    if v >= min {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be at least {min}, got {v}")))
    }
}

fn all_positive(path: &str, vs: &[f64]) -> Result<(), ConfigError> {
    if vs.is_empty() {
        return Err(ConfigError::new(path, "must not be empty"));
    }
    vs.iter().enumerate().try_for_each(|(i, v)| positive(&format!("{path}[{i}]"), *v))
}

fn increasing(path: &str, vs: &[u64]) -> Result<(), ConfigError> {
    if vs.is_empty() || vs[0] == 0 {
        return Err(ConfigError::new(path, "must be a nonempty list of positive integers"));
    }
    if vs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::new(path, "must be strictly increasing"));
    }
    Ok(())
}

fn range(path: &str, r: [f64; 2]) -> Result<(), ConfigError> {
    positive(&format!("{path}[0]"), r[0])?;
    if !(r[1].is_finite() && r[1] > r[0]) {
        return Err(ConfigError::new(format!("{path}[1]"), "must exceed the lower end"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.spaces.is_empty() {
            return Err(ConfigError::new("spaces", "must not be empty"));
        }
        for (i, s) in self.spaces.iter().enumerate() {
            s.validate(&format!("spaces[{i}]"))?;
        }

        let e = &self.evi;
        at_least("evi.instances", e.instances, 1)?;
        positive("evi.delta", e.delta)?;
        at_least("evi.time_samples", e.time_samples, 2)?;
        at_least("evi.trajectory_samples", e.trajectory_samples, 2)?;
        positive("evi.tolerance", e.tolerance)?;
        positive("evi.exact_tolerance", e.exact_tolerance)?;

        all_positive("psi.epsilon", &self.psi.epsilon)?;
        at_least("psi.grid_points", self.psi.grid_points, 2)?;
        positive("psi.r_max", self.psi.r_max)?;

        let t = &self.tataru;
        at_least("tataru.instances", t.instances, 1)?;
        all_positive("tataru.epsilon", &t.epsilon)?;
        at_least("tataru.smoothed_pairs", t.smoothed_pairs, 1)?;
        positive("tataru.tolerance", t.tolerance)?;

        let l = &self.laplace;
        positive("laplace.epsilon", l.epsilon)?;
        finite("laplace.pi", l.pi)?;
        finite("laplace.mu", l.mu)?;
        increasing("laplace.m", &l.m)?;
        positive("laplace.varadhan_tolerance", l.varadhan_tolerance)?;
        if l.constants.is_empty() {
            return Err(ConfigError::new("laplace.constants", "must not be empty"));
        }
        for (i, c) in l.constants.iter().enumerate() {
            nonnegative(&format!("laplace.constants[{i}]"), *c)?;
        }
        positive("laplace.constant_tolerance", l.constant_tolerance)?;
        increasing("laplace.riemann_n", &l.riemann_n)?;
        increasing("laplace.riemann_m", &[l.riemann_m])?;
        increasing("laplace.tilt_m", &[l.tilt_m])?;
        positive("laplace.tilt_epsilon", l.tilt_epsilon)?;
        positive("laplace.tilt_radius", l.tilt_radius)?;
        if !(l.tilt_mass > 0.0 && l.tilt_mass <= 1.0) {
            return Err(ConfigError::new("laplace.tilt_mass", "must lie in (0, 1]"));
        }

        let c = &self.chain;
        at_least("chain.samples", c.samples, 1)?;
        for (i, link) in c.links.iter().enumerate() {
            if hjcheck_core::hamiltonians::ChainLink::parse(link).is_none() {
                return Err(ConfigError::new(format!("chain.links[{i}]"), format!("unknown link {link:?}")));
            }
        }
        positive("chain.tolerance_one_two", c.tolerance_one_two)?;
        positive("chain.tolerance_four_five", c.tolerance_four_five)?;
        positive("chain.tolerance_overlap", c.tolerance_overlap)?;
        at_least("chain.level_samples", c.level_samples, 1)?;
        positive("chain.epsilon", c.epsilon)?;

        let r = &self.resolvent;
        positive("resolvent.lambda", r.lambda)?;
        r.potential.validate("resolvent.potential")?;
        positive("resolvent.half_width", r.half_width)?;
        positive("resolvent.dx", r.dx)?;
        if r.dx > r.half_width {
            return Err(ConfigError::new("resolvent.dx", "must not exceed half_width"));
        }
        at_least("resolvent.controls", r.controls, 2)?;
        positive("resolvent.control_bound", r.control_bound)?;
        positive("resolvent.dt_fraction", r.dt_fraction)?;
        if r.dt_fraction >= 1.0 {
            return Err(ConfigError::new("resolvent.dt_fraction", "time step too large: must be below 1"));
        }
        positive("resolvent.tolerance", r.tolerance)?;
        positive("resolvent.oracle_half_width", r.oracle_half_width)?;
        positive("resolvent.oracle_tolerance", r.oracle_tolerance)?;
        finite("resolvent.constant", r.constant)?;
        positive("resolvent.shift", r.shift)?;
        positive("resolvent.equivariance_tolerance", r.equivariance_tolerance)?;

        let v = &self.viscosity;
        at_least("viscosity.pairs", v.pairs, 1)?;
        positive("viscosity.anchor_range", v.anchor_range)?;
        range("viscosity.a_range", v.a_range)?;
        range("viscosity.weight_range", v.weight_range)?;
        at_least("viscosity.max_anchors", v.max_anchors, 1)?;
        positive("viscosity.tolerance_cells", v.tolerance_cells)?;

        at_least("comparison.pairs", self.comparison.pairs, 1)?;
        positive("comparison.shift", self.comparison.shift)?;
        Ok(())
    }
}
