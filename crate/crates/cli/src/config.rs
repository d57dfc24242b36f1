//! Run configuration file. Every section is optional and falls back to the
//! library defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use biokg::abc::{AbcConfig, PriorSpec};
use biokg::baseline::LsConfig;
use biokg::experiments::{ExperimentConfig, Level};
use biokg::model::GroundTruthConfig;
use biokg::planner::{DecisionProblem, PlannerConfig, ProblemKind, NODE_BUDGET};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub ground_truth: GroundTruthConfig,
    pub prior: PriorSpec,
    pub abc: AbcConfig,
    pub planner: PlannerSection,
    #[serde(default = "DecisionProblem::medium_exchange")]
    pub problem: DecisionProblem,
    pub simulate: SimulateSection,
    pub experiment: ExperimentSection,
    /// Paths; excluded from the config hash.
    pub io: IoSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            ground_truth: GroundTruthConfig::default(),
            prior: PriorSpec::kinetic_default(),
            abc: AbcConfig::default(),
            planner: PlannerSection::default(),
            problem: DecisionProblem::medium_exchange(),
            simulate: SimulateSection::default(),
            experiment: ExperimentSection::default(),
            io: IoSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub b: usize,
    pub j: usize,
    pub node_budget: u64,
    /// Replicates per schedule in the open-loop ranking.
    pub open_loop_reps: usize,
    /// Run the closed-loop trace against a ground-truth batch instead of
    /// the model's expected transition.
    pub truth_environment: bool,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let p = PlannerConfig::default();
        PlannerSection {
            b: p.b,
            j: p.j,
            node_budget: NODE_BUDGET,
            open_loop_reps: 1000,
            truth_environment: false,
        }
    }
}

impl PlannerSection {
    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            b: self.b,
            j: self.j,
            node_budget: self.node_budget,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Batches to generate.
    pub m: usize,
    pub hours: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { m: 3, hours: 30.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Prediction,
    Decision,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub problems: Vec<ProblemKind>,
    pub sizes: Vec<usize>,
    pub b2b: Vec<Level>,
    pub noise: Vec<Level>,
    pub replications: usize,
    pub n_test: usize,
    pub n_mc: usize,
    pub horizons: Vec<usize>,
    pub decision_batches: usize,
    pub curve_reps: usize,
    pub bootstrap_resamples: usize,
    pub ls: LsConfig,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        let (replications, n_test) = ExperimentConfig::DESK;
        ExperimentSection {
            kind: ExperimentKind::All,
            problems: vec![ProblemKind::MediumExchange, ProblemKind::Expansion],
            sizes: vec![3, 6, 20],
            b2b: vec![Level::High, Level::Low],
            noise: vec![Level::High, Level::Low],
            replications,
            n_test,
            n_mc: e.n_mc,
            horizons: e.horizons,
            decision_batches: e.decision_batches,
            curve_reps: e.curve_reps,
            bootstrap_resamples: e.bootstrap_resamples,
            ls: e.ls,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub out_dir: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

/// Experiment sizes selected by `--scale`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    Desk,
    Paper,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn apply_scale(&mut self, scale: Scale) {
        let (r, n) = match scale {
            Scale::Desk => ExperimentConfig::DESK,
            Scale::Paper => ExperimentConfig::FULL,
        };
        self.experiment.replications = r;
        self.experiment.n_test = n;
    }

    pub fn validate(&self) -> Result<()> {
        self.ground_truth.validate()?;
        self.prior.validate()?;
        self.abc.validate()?;
        self.planner.planner_config().validate()?;
        self.problem.validate()?;
        self.experiment_config().validate()?;
        if self.simulate.m == 0 || !(self.simulate.hours > 0.0) {
            bail!("simulate needs m >= 1 and positive hours");
        }
        if self.planner.open_loop_reps == 0 {
            bail!("planner.open_loop_reps must be positive");
        }
        let e = &self.experiment;
        if e.sizes.is_empty() || e.b2b.is_empty() || e.noise.is_empty() || e.replications == 0 {
            bail!("experiment needs at least one size, one level of each factor and one replication");
        }
        Ok(())
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            prior: self.prior.clone(),
            abc: self.abc.clone(),
            ls: e.ls,
            planner: self.planner.planner_config(),
            horizons: e.horizons.clone(),
            n_test: e.n_test,
            n_mc: e.n_mc,
            decision_batches: e.decision_batches,
            curve_reps: e.curve_reps,
            bootstrap_resamples: e.bootstrap_resamples,
            history_hours: self.simulate.hours,
        }
    }

    /// SHA-256 over the canonical JSON of every section except `io`.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.io = IoSection::default();
        let bytes = serde_json::to_vec(&hashed).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
