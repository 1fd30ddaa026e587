//! Run configuration: a TOML file plus `key=value` overrides.
//!
//! Top-level keys (all but `experiment_id`, `mode` and `output_dir` are
//! optional):
//!
//! ```toml
//! experiment_id = 1                 # 1..=4
//! mode = "inverse"                  # direct | inverse | convergence | polyfit-analysis
//! n_time_steps = 200
//! mesh = { n_elems = 200 }          # or { nx = 40, ny = 40 } in 2D
//! epsilons = [0.001, 0.005, 0.01, 0.03, 0.05]
//! seeds = "per-experiment"          # or a list of integers
//! degree = "auto"                   # or an integer
//! parity = "any"                    # any | even | odd
//! improvement_threshold_percent = 5.0
//! max_degree = 10
//! samples = 100
//! convergence_steps = [25, 50, 100, 200]
//! cg_rel_tol = 1e-12
//! omega_min = 1e-8
//! output_dir = "results/exp1"
//! ```
//!
//! Overrides use dotted keys (`mesh.nx=20`) and TOML values; anything that
//! does not parse as a TOML value is taken as a string.

use std::path::{Path, PathBuf};

use isp_core::experiments::{build_case, DegreeChoice, DEFAULT_ELEMENTS_1D, DEFAULT_GRID_2D};
use isp_core::regularization::Parity;
use isp_core::Mesh;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_EPSILONS: [f64; 5] = [0.001, 0.005, 0.01, 0.03, 0.05];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Direct,
    Inverse,
    Convergence,
    PolyfitAnalysis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalMesh {
    pub n_elems: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquareMesh {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshConfig {
    Interval(IntervalMesh),
    Square(SquareMesh),
}

impl MeshConfig {
    pub fn dim(&self) -> usize {
        match self {
            MeshConfig::Interval(_) => 1,
            MeshConfig::Square(_) => 2,
        }
    }

    pub fn build(&self) -> isp_core::Result<Mesh> {
        match *self {
            MeshConfig::Interval(m) => Mesh::interval(m.n_elems),
            MeshConfig::Square(m) => Mesh::unit_square(m.nx, m.ny),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedPreset {
    /// Seed `experiment_id − 1`.
    #[serde(alias = "paper")]
    PerExperiment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Preset(SeedPreset),
    List(Vec<u64>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Preset(SeedPreset::PerExperiment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoDegree {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Degree {
    Auto(AutoDegree),
    Fixed(usize),
}

impl Default for Degree {
    fn default() -> Self {
        Degree::Auto(AutoDegree::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityConfig {
    #[default]
    Any,
    Even,
    Odd,
}

impl From<ParityConfig> for Parity {
    fn from(p: ParityConfig) -> Self {
        match p {
            ParityConfig::Any => Parity::Any,
            ParityConfig::Even => Parity::Even,
            ParityConfig::Odd => Parity::Odd,
        }
    }
}

fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}
fn default_threshold() -> f64 {
    isp_core::regularization::DEFAULT_THRESHOLD_PERCENT
}
fn default_max_degree() -> usize {
    10
}
fn default_samples() -> usize {
    isp_core::regularization::DEFAULT_SAMPLES
}
fn default_convergence_steps() -> Vec<usize> {
    vec![25, 50, 100, 200]
}
fn default_cg_rel_tol() -> f64 {
    isp_core::fem::DEFAULT_REL_TOL
}
fn default_omega_min() -> f64 {
    isp_core::problem::DEFAULT_OMEGA_MIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment_id: u32,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_time_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshConfig>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub degree: Degree,
    #[serde(default)]
    pub parity: ParityConfig,
    #[serde(default = "default_threshold")]
    pub improvement_threshold_percent: f64,
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_convergence_steps")]
    pub convergence_steps: Vec<usize>,
    #[serde(default = "default_cg_rel_tol")]
    pub cg_rel_tol: f64,
    #[serde(default = "default_omega_min")]
    pub omega_min: f64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Parse(e.message().to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Parse(e.message().to_string()))
    }

    /// Fills mesh and step count from the case defaults and checks ranges.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        let case = match build_case(self.experiment_id) {
            Ok(c) => c,
            Err(e) => return bad(e.to_string()),
        };
        let mesh = *self.mesh.get_or_insert(match case.dim {
            1 => MeshConfig::Interval(IntervalMesh {
                n_elems: DEFAULT_ELEMENTS_1D,
            }),
            _ => MeshConfig::Square(SquareMesh {
                nx: DEFAULT_GRID_2D,
                ny: DEFAULT_GRID_2D,
            }),
        });
        let steps = *self.n_time_steps.get_or_insert(case.default_steps());

        if mesh.dim() != case.dim {
            return bad(format!(
                "experiment {} is {}D but the mesh is {}D",
                self.experiment_id,
                case.dim,
                mesh.dim()
            ));
        }
        if let Err(e) = mesh.build() {
            return bad(e.to_string());
        }
        if steps == 0 {
            return bad("n_time_steps must be positive".into());
        }
        if self.epsilons.is_empty() {
            return bad("epsilons is empty".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return bad(format!("noise level {e} outside [0, 1)"));
        }
        if matches!(&self.seeds, Seeds::List(s) if s.is_empty()) {
            return bad("seeds is empty".into());
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        let parity = Parity::from(self.parity);
        if self.max_degree < parity.first_degree() || self.max_degree >= self.samples {
            return bad(format!(
                "max_degree {} outside [{}, {})",
                self.max_degree,
                parity.first_degree(),
                self.samples
            ));
        }
        if let Degree::Fixed(d) = self.degree {
            if !parity.admits(d) || d >= self.samples {
                return bad(format!("degree {d} not admissible for parity {:?}", self.parity));
            }
        }
        if !(self.improvement_threshold_percent > 0.0 && self.improvement_threshold_percent < 100.0) {
            return bad(format!(
                "improvement_threshold_percent {} outside (0, 100)",
                self.improvement_threshold_percent
            ));
        }
        if self.convergence_steps.len() < 3
            || self.convergence_steps[0] == 0
            || self.convergence_steps.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("convergence_steps needs at least 3 strictly increasing positive entries".into());
        }
        if !(self.cg_rel_tol > 0.0 && self.cg_rel_tol < 1.0) {
            return bad(format!("cg_rel_tol {} outside (0, 1)", self.cg_rel_tol));
        }
        if !(self.omega_min > 0.0) || !self.omega_min.is_finite() {
            return bad(format!("omega_min {} must be positive", self.omega_min));
        }
        Ok(self)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Seeds::Preset(SeedPreset::PerExperiment) => vec![u64::from(self.experiment_id) - 1],
            Seeds::List(s) => s.clone(),
        }
    }

    pub fn degree_choice(&self) -> DegreeChoice {
        match self.degree {
            Degree::Fixed(d) => DegreeChoice::Fixed(d),
            Degree::Auto(_) => DegreeChoice::Auto {
                max_degree: self.max_degree,
                threshold_percent: self.improvement_threshold_percent,
            },
        }
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("override {item:?} is not key=value")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    };
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty());
    let last = last.ok_or_else(|| CliError::Parse(format!("override {item:?} has an empty key")))?;
    let mut node = table;
    for part in parts {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Parse(format!("override key {key:?}: {part} is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
