//! Experiment configuration: a versioned TOML schema plus `key.path=value`
//! overrides applied before validation.

use std::path::{Path, PathBuf};

use ropo_core::env::{GridworldConfig, PerturbationMetric, DEFAULT_LAYOUT};
use ropo_core::{BonusScale, MirrorSign, UncertaintyKind, UncertaintySet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentSection,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    pub runs: Vec<RunConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    /// `K`.
    pub episodes: usize,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Gridworld {
        /// Text layout (`o` road, `x` wall, `+` reward); the built-in
        /// layout when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<String>,
        /// Path of a layout file, relative to the config file. Loading
        /// replaces it with the file's text in `layout`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout_file: Option<PathBuf>,
        #[serde(default = "default_slip")]
        slip_success: f64,
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_smoothing")]
        smoothing: f64,
    },
    /// The three-state instance; its uncertainty radius comes from each run
    /// and its worst-case kernel from the evaluation radius.
    Hard { epsilon: f64, horizon: usize },
}

fn default_slip() -> f64 {
    0.9
}

fn default_horizon() -> usize {
    20
}

fn default_smoothing() -> f64 {
    1e-6
}

impl EnvironmentConfig {
    pub fn horizon(&self) -> usize {
        match self {
            EnvironmentConfig::Gridworld { horizon, .. } | EnvironmentConfig::Hard { horizon, .. } => *horizon,
        }
    }

    pub fn gridworld(&self) -> Result<Option<GridworldConfig>> {
        match self {
            EnvironmentConfig::Gridworld {
                layout,
                layout_file,
                slip_success,
                horizon,
                smoothing,
            } => {
                if let Some(f) = layout_file {
                    return Err(HarnessError::config(format!(
                        "layout file {} was not loaded",
                        f.display()
                    )));
                }
                let text = layout.as_deref().unwrap_or(DEFAULT_LAYOUT);
                let mut grid = GridworldConfig::from_layout(text, *slip_success, *horizon)?;
                grid.smoothing = *smoothing;
                grid.validate()?;
                Ok(Some(grid))
            }
            EnvironmentConfig::Hard { .. } => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalKernel {
    #[default]
    Nominal,
    Perturbed,
    HardWorstCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    L1,
    Kl,
}

impl From<Metric> for PerturbationMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::L1 => PerturbationMetric::L1,
            Metric::Kl => PerturbationMetric::Kl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub radius: f64,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default)]
    pub kernel: EvalKernel,
    /// Required for the perturbed and hard-worst-case kernels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
    /// A CSV row (with evaluation rollouts) every `every` episodes, plus the
    /// first and last episode.
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "default_rollouts")]
    pub rollouts: usize,
    /// Track the exact robust value and regret of the executed policies.
    #[serde(default = "default_true")]
    pub planner: bool,
    /// Robust values are recomputed every `planner_every` episodes and held
    /// in between.
    #[serde(default = "default_planner_every")]
    pub planner_every: usize,
}

fn default_every() -> usize {
    10
}

fn default_rollouts() -> usize {
    20
}

fn default_true() -> bool {
    true
}

fn default_planner_every() -> usize {
    1
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            kernel: EvalKernel::Nominal,
            perturbation: None,
            every: default_every(),
            rollouts: default_rollouts(),
            planner: true,
            planner_every: default_planner_every(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ropo,
    /// ROPO with radius zero.
    NonrobustPo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    L1Sa,
    L1S,
    Kl,
}

impl From<SetKind> for UncertaintyKind {
    fn from(k: SetKind) -> Self {
        match k {
            SetKind::L1Sa => UncertaintyKind::L1Sa,
            SetKind::L1S => UncertaintyKind::L1S,
            SetKind::Kl => UncertaintyKind::Kl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyConfig {
    pub kind: SetKind,
    pub radius: f64,
}

/// A single multiplier for all bonus terms, or one per term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleConfig {
    Uniform(f64),
    Terms { reward: f64, transition: f64, tail: f64 },
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig::Uniform(1.0)
    }
}

impl ScaleConfig {
    pub fn to_scale(self) -> BonusScale {
        match self {
            ScaleConfig::Uniform(c) => BonusScale::uniform(c),
            ScaleConfig::Terms {
                reward,
                transition,
                tail,
            } => BonusScale {
                reward,
                transition,
                tail,
            },
        }
    }
}

/// Minimum nominal kernel entry used by the KL bonus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KlConstant {
    /// `"oracle"`: read from the simulator's nominal kernel.
    Named(OracleTag),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleTag {
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BonusConfig {
    /// Confidence level; `1/H` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub scale: ScaleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_c: Option<KlConstant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    #[default]
    Ascent,
    Descent,
}

impl From<Sign> for MirrorSign {
    fn from(s: Sign) -> Self {
        match s {
            Sign::Ascent => MirrorSign::Ascent,
            Sign::Descent => MirrorSign::Descent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub label: String,
    pub algorithm: Algorithm,
    /// Required for `ropo`; for `nonrobust-po` only the kind matters (it
    /// picks the bonus form) and the radius must be zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyConfig>,
    #[serde(default)]
    pub bonus: BonusConfig,
    /// `sqrt(2 ln A / (H^2 K))` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub mirror_sign: Sign,
}

impl RunConfig {
    pub fn uncertainty_set(&self) -> Result<UncertaintySet> {
        match (self.algorithm, self.uncertainty) {
            (Algorithm::Ropo, None) => Err(HarnessError::config(format!(
                "run {:?}: ropo needs an uncertainty set",
                self.label
            ))),
            (Algorithm::Ropo, Some(u)) => Ok(UncertaintySet::new(u.kind.into(), u.radius)?),
            (Algorithm::NonrobustPo, None) => Ok(UncertaintySet::nominal(UncertaintyKind::L1Sa)),
            (Algorithm::NonrobustPo, Some(u)) if u.radius == 0.0 => Ok(UncertaintySet::nominal(u.kind.into())),
            (Algorithm::NonrobustPo, Some(_)) => Err(HarnessError::config(format!(
                "run {:?}: nonrobust-po needs radius 0",
                self.label
            ))),
        }
    }
}

impl ExperimentConfig {
    /// Reads `path`, applies `overrides` and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse_in(&text, overrides, base).map_err(|e| match e {
            HarnessError::Parse { message, .. } => HarnessError::parse(path, message),
            other => other,
        })
    }

    /// Parses config text; relative layout files resolve against the
    /// working directory.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        Self::parse_in(text, overrides, Path::new(""))
    }

    fn parse_in(text: &str, overrides: &[String], base: &Path) -> Result<Self> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| HarnessError::parse("<config>", e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::parse("<config>", e.to_string()))?;
        let mut config = config;
        if let EnvironmentConfig::Gridworld {
            layout, layout_file, ..
        } = &mut config.environment
        {
            if let Some(f) = layout_file.take() {
                if layout.is_some() {
                    return Err(HarnessError::config("give either layout or layout_file, not both"));
                }
                let f = base.join(f);
                *layout = Some(std::fs::read_to_string(&f).map_err(|e| HarnessError::io(&f, e))?);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.experiment.episodes == 0 {
            return Err(HarnessError::config("experiment.episodes must be at least 1"));
        }
        if self.experiment.seeds.is_empty() {
            return Err(HarnessError::config("experiment.seeds is empty"));
        }
        if self.runs.is_empty() {
            return Err(HarnessError::config("no runs configured"));
        }
        let e = &self.evaluation;
        if e.every == 0 || e.planner_every == 0 || e.rollouts == 0 {
            return Err(HarnessError::config("evaluation cadences and rollouts must be at least 1"));
        }
        match (e.kernel, &self.environment, e.perturbation) {
            (EvalKernel::Nominal, _, _) => {}
            (EvalKernel::Perturbed, EnvironmentConfig::Gridworld { .. }, Some(_)) => {}
            (EvalKernel::HardWorstCase, EnvironmentConfig::Hard { .. }, Some(p)) if p.metric == Metric::L1 => {}
            (kernel, _, _) => {
                return Err(HarnessError::config(format!(
                    "evaluation kernel {kernel:?} does not fit this environment or lacks a perturbation"
                )))
            }
        }
        self.environment.gridworld()?;
        let mut labels: Vec<&str> = self.runs.iter().map(|r| r.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::config("run labels must be unique"));
        }
        for run in &self.runs {
            if run.label.is_empty() || !run.label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(HarnessError::config(format!(
                    "run label {:?} must be non-empty and use only [A-Za-z0-9._-]",
                    run.label
                )));
            }
            let set = run.uncertainty_set()?;
            if matches!(self.environment, EnvironmentConfig::Hard { .. }) && set.kind != UncertaintyKind::L1Sa {
                return Err(HarnessError::config("the hard instance supports only the l1-sa set"));
            }
        }
        Ok(())
    }

    pub fn run(&self, label: &str) -> Result<&RunConfig> {
        self.runs
            .iter()
            .find(|r| r.label == label)
            .ok_or_else(|| HarnessError::config(format!("no run labelled {label:?}")))
    }

    /// Canonical TOML rendering, used for hashing and for the copy stored
    /// next to the results.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical_toml`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `a.b.c=value`, where `value` is a TOML literal or else a bare string.
/// Numeric path segments index into arrays (`runs.0.label=x`).
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| HarnessError::config(format!("override {spec:?} is not key=value")))?;
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(HarnessError::config(format!("override path {path:?} is malformed")));
    }
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert((*key).to_string(), parsed);
                    return Ok(());
                }
                t.entry((*key).to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| HarnessError::config(format!("override path {path:?}: {key:?} is not an index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| HarnessError::config(format!("override path {path:?}: index {idx} >= {len}")))?;
                if last {
                    *slot = parsed;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(HarnessError::config(format!(
                    "override path {path:?}: {key:?} is below a scalar"
                )))
            }
        };
    }
    unreachable!("the loop returns on the last key")
}
