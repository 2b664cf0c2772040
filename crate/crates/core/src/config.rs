//! Experiment configuration: a TOML file with constellation, data, model,
//! budget, aggregation, and distribution blocks. Unknown keys are parse
//! errors; validation reports every problem at once rather than stopping at
//! the first.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationConfig;
use crate::budget::ResourceProfile;
use crate::constellation::OrbitSpec;
use crate::error::{Error, Result};
use crate::model::Activation;

/// The federated strategies the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Full pipeline: sub-structures, scrolling distribution, period-
    /// corrected aggregation, pseudo-synchronous merging.
    Fedsn,
    /// Sub-structures with plain synchronous round-end averaging.
    SsFedavg,
    /// Sub-structures with per-arrival asynchronous mixing.
    SsFedasync,
    /// Full-model synchronous averaging; under-budget satellites drop out.
    Fedavg,
    /// Full-model asynchronous mixing; under-budget satellites drop out.
    Fedasync,
    /// Width-sliced nested training with per-region averaging.
    Vheterofl,
    /// Resource- and staleness-unconstrained synchronous averaging.
    Ideal,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Fedsn,
        Strategy::SsFedavg,
        Strategy::SsFedasync,
        Strategy::Fedavg,
        Strategy::Fedasync,
        Strategy::Vheterofl,
        Strategy::Ideal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Fedsn => "fedsn",
            Strategy::SsFedavg => "ss_fedavg",
            Strategy::SsFedasync => "ss_fedasync",
            Strategy::Fedavg => "fedavg",
            Strategy::Fedasync => "fedasync",
            Strategy::Vheterofl => "vheterofl",
            Strategy::Ideal => "ideal",
        }
    }

    pub fn parse(name: &str) -> Result<Strategy> {
        Strategy::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| {
                Error::rejected(format!(
                    "unknown strategy {name:?}; expected one of {}",
                    Strategy::ALL.map(|s| s.name()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationConfig {
    /// Satellites per orbit; ids are dealt orbit by orbit from 0.
    pub orbit_sizes: Vec<usize>,
    /// Dimensionless orbital period ratios, one per orbit.
    pub period_ratios: Vec<f64>,
    /// Contact windows (inter-group sets) per round.
    pub windows: usize,
    /// Contact duration in seconds (enters the uplink budget).
    #[serde(default = "default_contact_seconds")]
    pub contact_seconds: f64,
    /// Derive per-orbit phase offsets from the master seed.
    #[serde(default)]
    pub seeded_phases: bool,
}

fn default_contact_seconds() -> f64 {
    300.0
}

impl ConstellationConfig {
    pub fn satellite_count(&self) -> usize {
        self.orbit_sizes.iter().sum()
    }

    /// Materialize the orbit list, dealing satellite ids orbit by orbit.
    pub fn orbits(&self) -> Vec<OrbitSpec> {
        let mut next = 0;
        self.orbit_sizes
            .iter()
            .zip(&self.period_ratios)
            .enumerate()
            .map(|(index, (&size, &period))| {
                let members = (next..next + size).collect();
                next += size;
                OrbitSpec {
                    index,
                    period,
                    members,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Iid,
    Noniid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub partition: PartitionKind,
    /// Synthetic generator: class count.
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Synthetic generator: feature dimensions.
    #[serde(default = "default_dims")]
    pub dims: usize,
    /// Synthetic generator: samples per class before the 80/20 split.
    #[serde(default = "default_samples_per_class")]
    pub samples_per_class: usize,
    /// Synthetic generator: mutual distance between class means.
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// CSV source: train split path.
    #[serde(default)]
    pub train_csv: Option<PathBuf>,
    /// CSV source: test split path.
    #[serde(default)]
    pub test_csv: Option<PathBuf>,
    /// CSV source: skip a header row.
    #[serde(default)]
    pub csv_header: bool,
    /// Standardize features with train statistics.
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Non-IID partition: total label-sorted shards.
    #[serde(default)]
    pub total_shards: Option<usize>,
    /// Non-IID partition: shards dealt to each satellite.
    #[serde(default)]
    pub shards_per_sat: Option<usize>,
}

fn default_classes() -> usize {
    3
}

fn default_dims() -> usize {
    16
}

fn default_samples_per_class() -> usize {
    200
}

fn default_separation() -> f64 {
    2.5
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Hidden layer widths; the input/output widths come from the data.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Local update epochs per contact.
    pub local_epochs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![64, 64],
            activation: Activation::Relu,
            learning_rate: 0.005,
            batch_size: 128,
            local_epochs: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetMode {
    /// Draw each satellite's budget from a discrete distribution.
    Sampled,
    /// Characterize budgets from per-satellite resource profiles.
    Derived,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub mode: BudgetMode,
    /// Sampled mode: support of the budget distribution.
    #[serde(default)]
    pub values: Vec<f64>,
    /// Sampled mode: distribution weights; empty means uniform.
    #[serde(default)]
    pub weights: Vec<f64>,
    /// Derived mode: one resource profile per satellite, in id order.
    #[serde(default)]
    pub profiles: Vec<ResourceProfile>,
    /// Derived mode: FLOPs for one epoch of full-model training.
    #[serde(default)]
    pub theta: Option<f64>,
    /// Derived mode: full model memory footprint, bytes.
    #[serde(default)]
    pub mem_model: Option<f64>,
    /// Derived mode: full model transfer size, bits.
    #[serde(default)]
    pub model_bits: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionRule {
    Scrolling,
    Random,
    Static,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistributionConfig {
    pub rule: DistributionRule,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        DistributionConfig {
            rule: DistributionRule::Scrolling,
        }
    }
}

/// The complete experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every component stream derives from it.
    pub seed: u64,
    /// Training rounds (each spans the maximum orbital period).
    pub rounds: usize,
    pub strategy: Strategy,
    /// Evaluate every this many rounds.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// Also evaluate after every contact event (off by default).
    #[serde(default)]
    pub eval_per_event: bool,
    /// Where metrics and the final model land; CLI `--out` overrides.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub constellation: ConstellationConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub aggregation: AggregationConfig,
    #[serde(default)]
    pub distribution: DistributionConfig,
}

fn default_eval_every() -> usize {
    1
}

impl ExperimentConfig {
    /// Parse and fully validate a TOML config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Parse and fully validate TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    /// Every validation problem at once, or Ok.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.rounds == 0 {
            problems.push("rounds must be at least 1".to_string());
        }
        if self.eval_every == 0 {
            problems.push("eval_every must be at least 1".to_string());
        }

        let n_sats = self.constellation.satellite_count();
        if self.constellation.orbit_sizes.is_empty() {
            problems.push("constellation.orbit_sizes must not be empty".to_string());
        }
        if self.constellation.orbit_sizes.len() != self.constellation.period_ratios.len() {
            problems.push(format!(
                "constellation has {} orbit sizes but {} period ratios",
                self.constellation.orbit_sizes.len(),
                self.constellation.period_ratios.len()
            ));
        }
        if self.constellation.orbit_sizes.iter().any(|&s| s == 0) {
            problems.push("every orbit needs at least one satellite".to_string());
        }
        if self
            .constellation
            .period_ratios
            .iter()
            .any(|&p| !(p > 0.0 && p.is_finite()))
        {
            problems.push("period ratios must be positive and finite".to_string());
        }
        if self.constellation.windows == 0 {
            problems.push("constellation.windows must be at least 1".to_string());
        }
        if !(self.constellation.contact_seconds > 0.0) {
            problems.push("constellation.contact_seconds must be positive".to_string());
        }

        match self.data.source {
            DataSource::Synthetic => {
                if self.data.classes < 2 {
                    problems.push("data.classes must be at least 2".to_string());
                }
                if self.data.dims == 0 {
                    problems.push("data.dims must be at least 1".to_string());
                } else if self.data.classes >= 2 && self.data.dims < self.data.classes - 1 {
                    problems.push(format!(
                        "data.dims {} cannot hold {} equidistant class means",
                        self.data.dims, self.data.classes
                    ));
                }
                if self.data.samples_per_class < 5 {
                    problems.push("data.samples_per_class must be at least 5".to_string());
                }
                if !(self.data.separation >= 0.0 && self.data.separation.is_finite()) {
                    problems.push("data.separation must be finite and >= 0".to_string());
                }
            }
            DataSource::Csv => {
                if self.data.train_csv.is_none() {
                    problems.push("data.train_csv is required for the csv source".to_string());
                }
                if self.data.test_csv.is_none() {
                    problems.push("data.test_csv is required for the csv source".to_string());
                }
            }
        }
        if self.data.partition == PartitionKind::Noniid {
            match (self.data.total_shards, self.data.shards_per_sat) {
                (Some(total), Some(per)) => {
                    if total != n_sats * per {
                        problems.push(format!(
                            "data.total_shards {total} != {n_sats} satellites x {per} shards each"
                        ));
                    }
                }
                _ => problems.push(
                    "non-iid partition needs data.total_shards and data.shards_per_sat"
                        .to_string(),
                ),
            }
        }

        if self.model.hidden.is_empty() {
            problems.push("model.hidden must list at least one hidden width".to_string());
        }
        if self.model.hidden.iter().any(|&w| w == 0) {
            problems.push("hidden widths must be positive".to_string());
        }
        if !(self.model.learning_rate >= 0.0 && self.model.learning_rate.is_finite()) {
            problems.push("model.learning_rate must be finite and >= 0".to_string());
        }
        if self.model.batch_size == 0 {
            problems.push("model.batch_size must be at least 1".to_string());
        }
        if self.model.local_epochs == 0 {
            problems.push("model.local_epochs must be at least 1".to_string());
        }

        match self.budget.mode {
            BudgetMode::Sampled => {
                if self.budget.values.is_empty() {
                    problems.push("sampled budgets need budget.values".to_string());
                }
                if let Some(&bad) = self
                    .budget
                    .values
                    .iter()
                    .find(|&&v| !(v > 0.0 && v <= 1.0))
                {
                    problems.push(format!("budget value {bad} outside (0, 1]"));
                }
                if !self.budget.weights.is_empty() {
                    if self.budget.weights.len() != self.budget.values.len() {
                        problems.push(format!(
                            "{} budget weights for {} values",
                            self.budget.weights.len(),
                            self.budget.values.len()
                        ));
                    }
                    if self.budget.weights.iter().any(|&w| w < 0.0)
                        || self.budget.weights.iter().sum::<f64>() <= 0.0
                    {
                        problems
                            .push("budget weights must be >= 0 with a positive sum".to_string());
                    }
                }
            }
            BudgetMode::Derived => {
                if self.budget.profiles.len() != n_sats {
                    problems.push(format!(
                        "derived budgets need one profile per satellite: {} profiles for {n_sats}",
                        self.budget.profiles.len()
                    ));
                }
                for (name, value) in [
                    ("theta", self.budget.theta),
                    ("mem_model", self.budget.mem_model),
                    ("model_bits", self.budget.model_bits),
                ] {
                    match value {
                        Some(v) if v > 0.0 => {}
                        Some(v) => problems.push(format!("budget.{name} must be positive, got {v}")),
                        None => problems.push(format!(
                            "derived budgets need budget.{name}"
                        )),
                    }
                }
            }
        }

        if let Err(Error::RejectedInput(message)) = self.aggregation.validate() {
            problems.push(format!("aggregation: {message}"));
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}
