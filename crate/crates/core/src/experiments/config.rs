//! Per-command JSON configurations. Every struct rejects unknown fields and is
//! validated before any computation starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::closure::GridSpec;
use crate::dictionary::{ConjLogistic, SillDictionary};
use crate::error::{Result, SillError};
use crate::io::read_json;

fn invalid(msg: impl Into<String>) -> SillError {
    SillError::InvalidParameter(msg.into())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_ridge(ridge: f64) -> Result<()> {
    if ridge >= 0.0 && ridge.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("ridge must be non-negative and finite, got {ridge}")))
    }
}

fn check_scales(name: &str, scales: &[f64]) -> Result<()> {
    if scales.is_empty() {
        return Err(invalid(format!("{name} must not be empty")));
    }
    for &s in scales {
        check_positive(name, s)?;
    }
    Ok(())
}

/// Resolves `p` against the directory holding the config file.
pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn check_exists(base: &Path, p: &Path) -> Result<()> {
    let full = resolve(base, p);
    if full.is_file() {
        Ok(())
    } else {
        Err(invalid(format!("file not found: {}", full.display())))
    }
}

/// A dictionary given inline or as a path to a dictionary JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DictionarySource {
    Path(PathBuf),
    Inline(SillDictionary),
}

impl DictionarySource {
    pub fn load(&self, base: &Path) -> Result<SillDictionary> {
        match self {
            DictionarySource::Path(p) => read_json(&resolve(base, p)),
            DictionarySource::Inline(d) => Ok(d.clone()),
        }
    }

    fn validate(&self, base: &Path) -> Result<()> {
        match self {
            DictionarySource::Path(p) => check_exists(base, p),
            DictionarySource::Inline(_) => Ok(()),
        }
    }
}

/// `fit` and `edmd`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub snapshots: PathBuf,
    pub manifest: PathBuf,
    pub dictionary: DictionarySource,
    #[serde(default)]
    pub ridge: f64,
}

impl FitConfig {
    pub fn validate(&self, base: &Path) -> Result<()> {
        check_exists(base, &self.snapshots)?;
        check_exists(base, &self.manifest)?;
        self.dictionary.validate(base)?;
        check_ridge(self.ridge)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub model: PathBuf,
    pub initial_conditions: Vec<Vec<f64>>,
    pub horizon: f64,
    pub dt: f64,
}

impl PredictConfig {
    pub fn validate(&self, base: &Path) -> Result<()> {
        check_exists(base, &self.model)?;
        if self.initial_conditions.is_empty() {
            return Err(invalid("at least one initial condition is required"));
        }
        if self.horizon < 0.0 || !self.horizon.is_finite() {
            return Err(invalid(format!("horizon must be non-negative, got {}", self.horizon)));
        }
        check_positive("dt", self.dt)
    }
}

/// Weights `W` (one row per measurement coordinate) over a dictionary's logistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub dictionary: DictionarySource,
    pub weights: Vec<Vec<f64>>,
}

impl Default for FieldConfig {
    /// Two logistics on the plane with a mixing weight matrix. Centers sit on
    /// a quarter-cell offset of the `[-2, 2]²`, 8-per-axis lattice, so that
    /// grid is 0.125-separated from every center hyperplane.
    fn default() -> Self {
        let f = ConjLogistic::new(vec![-0.375, 0.625], vec![12.0, 12.0]).expect("valid");
        let g = ConjLogistic::new(vec![0.625, -0.375], vec![12.0, 12.0]).expect("valid");
        Self {
            dictionary: DictionarySource::Inline(SillDictionary::new(2, vec![f, g]).expect("valid")),
            weights: vec![vec![1.0, 0.5], vec![-0.5, 1.0]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    #[serde(default)]
    pub field: FieldConfig,
    pub grid: GridSpec,
    #[serde(default = "default_alpha_scales")]
    pub alpha_scales: Vec<f64>,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_a")]
    pub a: f64,
}

fn default_alpha_scales() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}

fn default_a() -> f64 {
    1.0
}

impl ClosureConfig {
    pub fn validate(&self, base: &Path) -> Result<()> {
        self.field.dictionary.validate(base)?;
        self.grid.validate()?;
        check_scales("alpha_scales", &self.alpha_scales)?;
        check_ridge(self.ridge)?;
        check_positive("a", self.a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Config {
    pub f: ConjLogistic,
    pub g: ConjLogistic,
    pub grid: GridSpec,
    #[serde(default = "default_decay_scales")]
    pub scales: Vec<f64>,
}

fn default_decay_scales() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0]
}

impl Theorem1Config {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        check_scales("scales", &self.scales)?;
        if self.f.dim() != self.g.dim() || self.f.dim() != self.grid.dim() {
            return Err(SillError::DimensionMismatch {
                context: "theorem1 logistics and grid",
                expected: self.grid.dim(),
                found: if self.f.dim() != self.grid.dim() { self.f.dim() } else { self.g.dim() },
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    #[serde(default = "default_a_values")]
    pub a_values: Vec<f64>,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_m_values")]
    pub m_values: Vec<usize>,
    /// Interval radius for the error-rate and conjunctive tables.
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            a_values: default_a_values(),
            quad_points: default_quad_points(),
            samples: default_samples(),
            m_values: default_m_values(),
            a: default_a(),
            seed: None,
        }
    }
}

fn default_a_values() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}

fn default_quad_points() -> usize {
    200
}

fn default_samples() -> u64 {
    1_000_000
}

fn default_m_values() -> Vec<usize> {
    (1..=6).collect()
}

impl StatsConfig {
    pub fn validate(&self) -> Result<()> {
        check_scales("a_values", &self.a_values)?;
        check_positive("a", self.a)?;
        if self.quad_points < 100 {
            return Err(invalid(format!("quad_points must be at least 100, got {}", self.quad_points)));
        }
        if self.samples == 0 {
            return Err(invalid("samples must be positive"));
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return Err(invalid("m_values must be non-empty and positive"));
        }
        Ok(())
    }
}

/// SILL fit of `ẏ = y²` on a bounded interval, for contrast with the polynomial table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SillComparison {
    #[serde(default = "default_sill_box")]
    pub interval: [f64; 2],
    #[serde(default = "default_sill_logistics")]
    pub n_logistics: usize,
    #[serde(default = "default_sill_alpha")]
    pub alpha: f64,
    #[serde(default = "default_sill_points")]
    pub points: usize,
    #[serde(default)]
    pub ridge: f64,
}

impl Default for SillComparison {
    fn default() -> Self {
        Self {
            interval: default_sill_box(),
            n_logistics: default_sill_logistics(),
            alpha: default_sill_alpha(),
            points: default_sill_points(),
            ridge: 0.0,
        }
    }
}

fn default_sill_box() -> [f64; 2] {
    [-2.0, 2.0]
}

fn default_sill_logistics() -> usize {
    8
}

fn default_sill_alpha() -> f64 {
    4.0
}

fn default_sill_points() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example1Config {
    pub n: usize,
    #[serde(default = "default_fit_interval")]
    pub fit_interval: [f64; 2],
    #[serde(default = "default_fit_points")]
    pub fit_points: usize,
    #[serde(default = "default_eval_y")]
    pub eval_y: Vec<f64>,
    #[serde(default)]
    pub sill: SillComparison,
}

fn default_fit_interval() -> [f64; 2] {
    [-10.0, 10.0]
}

fn default_fit_points() -> usize {
    201
}

/// Nine log-spaced points over `[1e2, 1e4]`.
fn default_eval_y() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(2.0 + 0.25 * k as f64)).collect()
}

impl Example1Config {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        let [lo, hi] = self.fit_interval;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(invalid("fit_interval must satisfy lo < hi"));
        }
        if self.fit_points <= self.n {
            return Err(invalid(format!(
                "fit_points must exceed n = {}, got {}",
                self.n, self.fit_points
            )));
        }
        if self.eval_y.is_empty() || self.eval_y.iter().any(|y| !y.is_finite()) {
            return Err(invalid("eval_y must be non-empty and finite"));
        }
        let s = &self.sill;
        let [slo, shi] = s.interval;
        if !(slo < shi && slo.is_finite() && shi.is_finite()) {
            return Err(invalid("sill.interval must satisfy lo < hi"));
        }
        if s.n_logistics == 0 || s.points < 2 {
            return Err(invalid("sill needs at least one logistic and two points"));
        }
        check_positive("sill.alpha", s.alpha)?;
        check_ridge(s.ridge)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompleteDictionaryConfig {
    pub dictionary: DictionarySource,
}

impl CompleteDictionaryConfig {
    pub fn validate(&self, base: &Path) -> Result<()> {
        self.dictionary.validate(base)
    }
}
