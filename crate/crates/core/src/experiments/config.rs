use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BssError, Result};
use crate::sources::InnovationLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig1,
    Fig2,
    Fig3,
    CrbSweep,
    Custom,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig1 => "fig1",
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::CrbSweep => "crb_sweep",
            ExperimentKind::Custom => "custom",
        }
    }

    fn default_reps(self) -> usize {
        match self {
            ExperimentKind::Fig2 => 500,
            ExperimentKind::CrbSweep => 1,
            _ => 200,
        }
    }

    fn default_n(self) -> Vec<usize> {
        match self {
            ExperimentKind::Fig1 => vec![500],
            ExperimentKind::Fig2 | ExperimentKind::CrbSweep => vec![250],
            ExperimentKind::Fig3 => vec![250, 500, 1000],
            ExperimentKind::Custom => vec![500],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Grade,
    Jade,
    FasticaSq,
    GraphJade,
    GraphFastica,
    Ml,
    MlOracle,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Grade => "grade",
            EstimatorKind::Jade => "jade",
            EstimatorKind::FasticaSq => "fastica_sq",
            EstimatorKind::GraphJade => "graph_jade",
            EstimatorKind::GraphFastica => "graph_fastica",
            EstimatorKind::Ml => "ml",
            EstimatorKind::MlOracle => "ml_oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "grade" => EstimatorKind::Grade,
            "jade" => EstimatorKind::Jade,
            "fastica_sq" => EstimatorKind::FasticaSq,
            "graph_jade" => EstimatorKind::GraphJade,
            "graph_fastica" => EstimatorKind::GraphFastica,
            "ml" => EstimatorKind::Ml,
            "ml_oracle" => EstimatorKind::MlOracle,
            other => return Err(BssError::Config(format!("unknown estimator {other:?}"))),
        })
    }
}

/// Evenly spaced grid `start, start + step, ..., stop` (inclusive up to rounding).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.stop >= self.start) {
            return Err(BssError::Config(format!("invalid grid {self:?}")));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        // rounded so that e.g. the 9th point of 0.01-steps is exactly 0.09
        Ok((0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    /// Max graph power `K` used by every graph-based estimator.
    pub k: u32,
    pub jd_tol: f64,
    pub jd_max_sweeps: usize,
    pub graph_jade_lambda: f64,
    pub graph_fastica_lambda: f64,
    pub fastica_tol: f64,
    pub fastica_max_iter: usize,
    pub fastica_max_restarts: usize,
    pub ml_theta_grid: Grid,
    /// Number of steps of the rotation grid over `[−π/2, π/2]`.
    pub ml_phi_steps: usize,
    pub ml_det_factor: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            k: 1,
            jd_tol: crate::jointdiag::DEFAULT_TOL,
            jd_max_sweeps: crate::jointdiag::DEFAULT_MAX_SWEEPS,
            graph_jade_lambda: crate::separators::GRAPH_JADE_LAMBDA,
            graph_fastica_lambda: crate::separators::GRAPH_FASTICA_LAMBDA,
            fastica_tol: 1e-9,
            fastica_max_iter: 2000,
            fastica_max_restarts: 5,
            ml_theta_grid: Grid { start: 0.0, stop: 0.6, step: 0.005 },
            ml_phi_steps: 720,
            ml_det_factor: 0.5,
        }
    }
}

impl EstimatorSettings {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(BssError::Config("estimators.k must be >= 1".into()));
        }
        for (name, l) in [
            ("graph_jade_lambda", self.graph_jade_lambda),
            ("graph_fastica_lambda", self.graph_fastica_lambda),
        ] {
            if !(0.0..=1.0).contains(&l) {
                return Err(BssError::Config(format!("estimators.{name} must lie in [0, 1]")));
            }
        }
        if !(self.jd_tol > 0.0 && self.fastica_tol >= 0.0) {
            return Err(BssError::Config("tolerances must be positive".into()));
        }
        if self.ml_phi_steps == 0 {
            return Err(BssError::Config("estimators.ml_phi_steps must be >= 1".into()));
        }
        if self.ml_det_factor != 0.5 && self.ml_det_factor != 1.0 {
            return Err(BssError::Config("estimators.ml_det_factor must be 0.5 or 1.0".into()));
        }
        self.ml_theta_grid.points()?;
        Ok(())
    }
}

/// Random graph model, generated fresh in every repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphModel {
    Er { eps: f64 },
    Sbm { p_in: f64, p_out: f64 },
    Geometric { radius: f64 },
    /// Graph error model applied to an earlier graph of the same list.
    Perturbed { base: usize, eps1: f64, eps2: f64 },
    /// Fixed graph read from an edge-list file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTemplate {
    /// Index into the scenario's graph list.
    pub graph: usize,
    pub theta: f64,
    pub innovation: InnovationLaw,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    Identity,
    /// Fresh standard normal entries in every repetition.
    #[default]
    RandomNormal,
    Fixed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub id: String,
    pub graphs: Vec<GraphModel>,
    pub sources: Vec<SourceTemplate>,
    #[serde(default)]
    pub mixing: Mixing,
}

impl ScenarioTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() || self.graphs.is_empty() {
            return Err(BssError::Config(format!("scenario {} needs graphs and sources", self.id)));
        }
        for (i, g) in self.graphs.iter().enumerate() {
            if let GraphModel::Perturbed { base, .. } = g {
                if *base >= i {
                    return Err(BssError::Config(format!(
                        "scenario {}: perturbed graph {i} must refer to an earlier graph",
                        self.id
                    )));
                }
            }
        }
        for s in &self.sources {
            if s.graph >= self.graphs.len() {
                return Err(BssError::Config(format!(
                    "scenario {}: source refers to missing graph {}",
                    self.id, s.graph
                )));
            }
            s.innovation.validate().map_err(|e| BssError::Config(e.to_string()))?;
        }
        if let Mixing::Fixed(rows) = &self.mixing {
            let p = self.sources.len();
            if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                return Err(BssError::Config(format!("scenario {}: mixing must be {p}x{p}", self.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig1Settings {
    pub theta: Vec<f64>,
    pub er_eps: f64,
    /// `(ε₁, ε₂)` per perturbation model.
    pub perturbations: Vec<[f64; 2]>,
    pub extra_graphs: usize,
}

impl Default for Fig1Settings {
    fn default() -> Self {
        Self {
            theta: vec![0.32, 0.16, 0.08, 0.04],
            er_eps: 0.05,
            perturbations: vec![[0.19, 0.01], [0.38, 0.02], [0.57, 0.03], [0.76, 0.04]],
            extra_graphs: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fig2Setup {
    C1,
    C2,
    C3,
    C4,
}

impl Fig2Setup {
    pub fn name(self) -> &'static str {
        match self {
            Fig2Setup::C1 => "C1",
            Fig2Setup::C2 => "C2",
            Fig2Setup::C3 => "C3",
            Fig2Setup::C4 => "C4",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Settings {
    pub setups: Vec<Fig2Setup>,
    pub theta1: f64,
    pub theta2: Grid,
    pub sbm_p_in: f64,
    pub sbm_p_out: f64,
    pub geometric_radius: f64,
    pub er_eps: f64,
    pub estimators: Vec<EstimatorKind>,
}

impl Default for Fig2Settings {
    fn default() -> Self {
        Self {
            setups: vec![Fig2Setup::C1, Fig2Setup::C2, Fig2Setup::C3, Fig2Setup::C4],
            theta1: 0.1,
            theta2: Grid { start: 0.01, stop: 0.40, step: 0.01 },
            sbm_p_in: 0.13,
            sbm_p_out: 0.01,
            geometric_radius: 0.16,
            er_eps: 0.07,
            estimators: vec![EstimatorKind::Grade, EstimatorKind::Ml, EstimatorKind::MlOracle],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fig3Model {
    M1,
    M2,
    M3,
    M4,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Settings {
    pub models: Vec<Fig3Model>,
    pub er_eps: f64,
    pub estimators: Vec<EstimatorKind>,
}

impl Default for Fig3Settings {
    fn default() -> Self {
        Self {
            models: vec![Fig3Model::M1, Fig3Model::M2, Fig3Model::M3, Fig3Model::M4],
            er_eps: 0.05,
            estimators: vec![
                EstimatorKind::FasticaSq,
                EstimatorKind::Jade,
                EstimatorKind::Grade,
                EstimatorKind::GraphJade,
                EstimatorKind::GraphFastica,
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomSettings {
    pub scenario: Option<ScenarioTemplate>,
    pub estimators: Vec<EstimatorKind>,
}

impl Default for CustomSettings {
    fn default() -> Self {
        Self {
            scenario: None,
            estimators: vec![EstimatorKind::Grade, EstimatorKind::Jade, EstimatorKind::GraphJade],
        }
    }
}

/// Top-level experiment configuration, read from TOML.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    /// Node counts.
    pub n: Option<Vec<usize>>,
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Adds a wall-clock column; output is then no longer byte-reproducible.
    pub record_timing: bool,
    pub estimators: EstimatorSettings,
    pub fig1: Fig1Settings,
    pub fig2: Fig2Settings,
    pub fig3: Fig3Settings,
    pub crb_sweep: Fig2Settings,
    pub custom: CustomSettings,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| BssError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BssError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BssError::Config(e.to_string()))
    }

    /// Checks the config for `kind` and fills experiment-dependent defaults.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<Resolved> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(BssError::Config(format!(
                    "config is for experiment {}, not {}",
                    k.name(),
                    kind.name()
                )));
            }
        }
        let seed = self
            .seed
            .ok_or_else(|| BssError::Config("a seed is required (config `seed` or --seed)".into()))?;
        let reps = self.reps.unwrap_or(kind.default_reps());
        if reps == 0 {
            return Err(BssError::Config("reps must be >= 1".into()));
        }
        let n = self.n.clone().unwrap_or_else(|| kind.default_n());
        if n.is_empty() || n.contains(&0) {
            return Err(BssError::Config("n must list positive node counts".into()));
        }
        self.estimators.validate()?;
        let f2 = match kind {
            ExperimentKind::CrbSweep => Some(&self.crb_sweep),
            ExperimentKind::Fig2 => Some(&self.fig2),
            _ => None,
        };
        if let Some(f2) = f2 {
            f2.theta2.points()?;
            if f2.setups.is_empty() {
                return Err(BssError::Config("at least one setup is required".into()));
            }
            if n.iter().any(|v| v % 2 == 1) {
                return Err(BssError::Config("the community graph needs an even n".into()));
            }
        }
        if kind == ExperimentKind::Fig1 && self.fig1.theta.len() != 4 {
            return Err(BssError::Config("fig1.theta must have four entries".into()));
        }
        if kind == ExperimentKind::Custom {
            self.custom
                .scenario
                .as_ref()
                .ok_or_else(|| BssError::Config("custom experiment needs [custom.scenario]".into()))?
                .validate()?;
        }
        Ok(Resolved { kind, seed, reps, n })
    }
}

/// Settings that depend on the experiment kind, after defaults.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub reps: usize,
    pub n: Vec<usize>,
}
