//! Experiment configuration, read from TOML.
//!
//! Unknown keys are rejected at every level. `schema_version` must equal
//! [`SCHEMA_VERSION`]. A minimal config:
//!
//! ```toml
//! schema_version = 1
//! name = "demo"
//! experiments = ["simulate", "first_field"]
//!
//! [model]
//! name = "ou"
//! params = { K = 1.0, sigma = 1.0 }
//! x0 = [1.0]
//!
//! [grid]
//! horizon = 1.0
//! steps = 1000
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::malliavin::CMDirection;
use crate::model::{builtin, ModelSpec};
use crate::paths::TimeGrid;

pub const SCHEMA_VERSION: u32 = 1;

/// Bundled configs as `(name, description, toml)`.
pub const BUNDLED: [(&str, &str, &str); 3] = [
    (
        "ou_smoke",
        "OU model: fields, oracles, moments and convergence against closed forms",
        include_str!("../configs/ou_smoke.toml"),
    ),
    (
        "cubic_full",
        "cubic model: every experiment, including second-order fields and nesting",
        include_str!("../configs/cubic_full.toml"),
    ),
    (
        "cutoff_cert",
        "cutoff family: profiles and uniform derivative certification for n = 1..6",
        include_str!("../configs/cutoff_cert.toml"),
    ),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _, _)| *n == name).map(|(_, _, t)| *t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Hypothesis,
    Cutoff,
    Simulate,
    FirstField,
    SecondField,
    Oracles,
    Moments,
    Convergence,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Hypothesis,
        Experiment::Cutoff,
        Experiment::Simulate,
        Experiment::FirstField,
        Experiment::SecondField,
        Experiment::Oracles,
        Experiment::Moments,
        Experiment::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Hypothesis => "hypothesis",
            Experiment::Cutoff => "cutoff",
            Experiment::Simulate => "simulate",
            Experiment::FirstField => "first_field",
            Experiment::SecondField => "second_field",
            Experiment::Oracles => "oracles",
            Experiment::Moments => "moments",
            Experiment::Convergence => "convergence",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::Hypothesis => "sampled checks of monotonicity, Lipschitz, growth and derivative consistency",
            Experiment::Cutoff => "cutoff profiles and uniform derivative certification",
            Experiment::Simulate => "settled path and its noise for the field seed",
            Experiment::FirstField => "first-order derivative field along the settled path",
            Experiment::SecondField => "second-order field at output times for a lattice of pairs",
            Experiment::Oracles => "Cameron-Martin, flow factorisation and symmetry checks",
            Experiment::Moments => "moments per truncation level against Gronwall bounds",
            Experiment::Convergence => "coupled gaps to a reference truncation level",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub experiments: Vec<Experiment>,
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub hypothesis: HypothesisSection,
    #[serde(default)]
    pub cutoff: CutoffSection,
    #[serde(default)]
    pub malliavin: MalliavinSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSection {
    /// Overrides the model's exponent.
    pub xi: Option<f64>,
    pub levels: Vec<u32>,
    pub n_start: u32,
    pub n_max: u32,
    pub reference_level: u32,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self {
            xi: None,
            levels: vec![1, 2, 3, 4, 5],
            n_start: 1,
            n_max: 1 << 16,
            reference_level: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypothesisSection {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for HypothesisSection {
    fn default() -> Self {
        Self {
            radius: 10.0,
            samples: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutoffSection {
    pub orders: Vec<usize>,
    pub levels: Vec<u32>,
    pub samples: usize,
    pub seed: u64,
    /// Radial points per profile file.
    pub profile_points: usize,
}

impl Default for CutoffSection {
    fn default() -> Self {
        Self {
            orders: vec![1],
            levels: vec![1, 2, 3, 4, 5, 6],
            samples: 10_000,
            seed: 0,
            profile_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum DirectionSpec {
    Constant { value: Vec<f64> },
    Window { start: f64, end: f64, value: Vec<f64> },
}

impl DirectionSpec {
    pub fn to_direction(&self) -> CMDirection {
        match self {
            DirectionSpec::Constant { value } => CMDirection::Constant(value.clone()),
            DirectionSpec::Window { start, end, value } => CMDirection::Window {
                start: *start,
                end: *end,
                value: value.clone(),
            },
        }
    }

    fn dim(&self) -> usize {
        match self {
            DirectionSpec::Constant { value } | DirectionSpec::Window { value, .. } => value.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MalliavinSection {
    pub orders: Vec<u8>,
    /// Output times for the second-order field (time units, snapped to the grid).
    pub output_times: Vec<f64>,
    /// Grid stride of the `(r, tau)` lattice and of the first-field CSV.
    pub pair_stride: usize,
    /// Seed of the path used for field exports; defaults to `mc.seed0`.
    pub seed: Option<u64>,
    pub epsilon: f64,
    pub direction: Option<DirectionSpec>,
    /// Seeds used by the Cameron–Martin oracle.
    pub cm_seeds: usize,
    /// Grid stride of the flow factorisation audit.
    pub flow_stride: usize,
}

impl Default for MalliavinSection {
    fn default() -> Self {
        Self {
            orders: vec![1, 2],
            output_times: Vec::new(),
            pair_stride: 100,
            seed: None,
            epsilon: 1e-4,
            direction: None,
            cm_seeds: 10,
            flow_stride: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub samples: usize,
    pub seed0: u64,
    pub p: Vec<f64>,
    /// Grid steps for Monte Carlo runs; defaults to `grid.steps`.
    pub steps: Option<usize>,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed0: 0,
            p: vec![2.0],
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: Option<String>,
    /// CSV stems to write; empty means all.
    pub files: Vec<String>,
}

/// CSV stems an experiment can produce (profiles add `cutoff_n<k>`).
pub const FILE_STEMS: [&str; 14] = [
    "hypothesis",
    "cutoff",
    "cutoff_cert",
    "path",
    "noise",
    "first_field",
    "hnorm",
    "second_field",
    "oracles",
    "moments",
    "moments_uncentered",
    "hnorm_moments",
    "bounds",
    "convergence",
];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.experiments.is_empty() {
            return Err(cfg_err("experiments: list at least one experiment"));
        }
        TimeGrid::new(self.grid.horizon, self.grid.steps)
            .map_err(|_| cfg_err("grid: horizon must be positive and steps >= 1"))?;
        if let Some(s) = self.mc.steps {
            if s == 0 {
                return Err(cfg_err("mc.steps: must be >= 1"));
            }
        }
        let t = &self.truncation;
        if let Some(xi) = t.xi {
            if !(xi > 0.0) || !xi.is_finite() {
                return Err(cfg_err(format!("truncation.xi: must be positive, got {xi}")));
            }
        }
        if t.levels.is_empty() || t.levels.contains(&0) {
            return Err(cfg_err("truncation.levels: need a nonempty list of levels >= 1"));
        }
        if t.n_start == 0 || t.n_max < t.n_start {
            return Err(cfg_err("truncation.n_start / n_max: need 1 <= n_start <= n_max"));
        }
        if t.reference_level <= *t.levels.iter().max().unwrap() {
            return Err(cfg_err("truncation.reference_level: must exceed every level"));
        }
        let c = &self.cutoff;
        if c.orders.iter().any(|o| !(1..=2).contains(o)) {
            return Err(cfg_err("cutoff.orders: only orders 1 and 2 are supported"));
        }
        if c.levels.is_empty() || c.levels.contains(&0) || c.samples == 0 || c.profile_points < 2 {
            return Err(cfg_err("cutoff: need levels >= 1, samples >= 1, profile_points >= 2"));
        }
        let h = &self.hypothesis;
        if !(h.radius > 0.0) || h.samples == 0 {
            return Err(cfg_err("hypothesis: radius must be positive and samples >= 1"));
        }
        let m = &self.malliavin;
        if m.orders.iter().any(|o| !(1..=2).contains(o)) {
            return Err(cfg_err("malliavin.orders: only orders 1 and 2 are supported"));
        }
        if m.output_times.iter().any(|&x| !(x >= 0.0 && x <= self.grid.horizon)) {
            return Err(cfg_err("malliavin.output_times: must lie in [0, horizon]"));
        }
        if m.pair_stride == 0 || m.flow_stride == 0 {
            return Err(cfg_err("malliavin.pair_stride / flow_stride: must be >= 1"));
        }
        if !(m.epsilon > 0.0) {
            return Err(cfg_err(format!("malliavin.epsilon: must be positive, got {}", m.epsilon)));
        }
        if m.cm_seeds == 0 {
            return Err(cfg_err("malliavin.cm_seeds: must be >= 1"));
        }
        if self.mc.samples < 2 {
            return Err(cfg_err("mc.samples: must be >= 2"));
        }
        if self.mc.p.is_empty() || self.mc.p.iter().any(|&p| !(p >= 1.0)) {
            return Err(cfg_err("mc.p: need a nonempty list of orders >= 1"));
        }
        for f in &self.outputs.files {
            if !FILE_STEMS.contains(&f.as_str()) {
                let hint = builtin::suggest(f, &FILE_STEMS)
                    .map(|s| format!(" (did you mean '{s}'?)"))
                    .unwrap_or_default();
                return Err(cfg_err(format!("outputs.files: unknown file '{f}'{hint}")));
            }
        }
        let model = self.build_model()?;
        if let Some(dir) = &m.direction {
            if dir.dim() != model.dim {
                return Err(cfg_err(format!(
                    "malliavin.direction: expected {} components, got {}",
                    model.dim,
                    dir.dim()
                )));
            }
        }
        Ok(())
    }

    /// The model with any `truncation.xi` override applied.
    pub fn build_model(&self) -> Result<ModelSpec> {
        let m = builtin::from_params(&self.model.name, &self.model.params, self.model.x0.clone())?;
        match self.truncation.xi {
            Some(xi) => m.with_xi(xi).map_err(|e| cfg_err(format!("truncation.xi: {e}"))),
            None => Ok(m),
        }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.grid.horizon, self.grid.steps).expect("validated")
    }

    pub fn mc_grid(&self) -> TimeGrid {
        TimeGrid::new(self.grid.horizon, self.mc.steps.unwrap_or(self.grid.steps)).expect("validated")
    }

    pub fn field_seed(&self) -> u64 {
        self.malliavin.seed.unwrap_or(self.mc.seed0)
    }

    pub fn wants_file(&self, stem: &str) -> bool {
        self.outputs.files.is_empty()
            || self.outputs.files.iter().any(|f| stem == f || (f == "cutoff" && stem.starts_with("cutoff_n")))
    }
}
