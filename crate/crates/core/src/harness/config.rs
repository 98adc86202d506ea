use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::DroConfig;
use crate::data::{load_csv, synthesize, Dataset, DatasetSchema, SyntheticSpec};
use crate::metrics::{TudCenter, UtilityKind};
use crate::nnet::{Activation, ModelSpec, OptimizerKind, Task};
use crate::vfair::{FairObjectiveKind, UpdateState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Erm,
    VfairStd,
    VfairVar,
    VfairPairwise,
    Dro,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::VfairStd => "vfair_std",
            Method::VfairVar => "vfair_var",
            Method::VfairPairwise => "vfair_pairwise",
            Method::Dro => "dro",
        }
    }

    pub fn fair_objective(self) -> Option<FairObjectiveKind> {
        match self {
            Method::VfairStd => Some(FairObjectiveKind::StdDev),
            Method::VfairVar => Some(FairObjectiveKind::Variance),
            Method::VfairPairwise => Some(FairObjectiveKind::Pairwise),
            Method::Erm | Method::Dro => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochSelection {
    #[default]
    Final,
    /// Epoch whose training loss is nearest the ERM reference loss.
    Harmless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        #[serde(flatten)]
        spec: SyntheticSpec,
        /// Seed of the generated sample; run seeds only drive splits and training.
        #[serde(default)]
        data_seed: u64,
    },
    Csv {
        path: PathBuf,
        schema: DatasetSchema,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(flatten)]
    pub source: DataSource,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub methods: Vec<Method>,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Clamp on `mu / sigma`; 0 or `inf` disables it.
    #[serde(default = "default_lambda2_cap")]
    pub lambda2_cap: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_alpha_min")]
    pub dro_alpha_min: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub epoch_selection: EpochSelection,
    /// Stored ERM training loss used by harmless selection when ERM is not
    /// trained in the same invocation.
    #[serde(default)]
    pub reference_loss: Option<f64>,
    /// Also evaluate test metrics every this many steps.
    #[serde(default)]
    pub eval_every_steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Defaults to MSE for regression and accuracy for classification.
    #[serde(default)]
    pub utility: Option<UtilityKind>,
    #[serde(default)]
    pub tud_center: TudCenter,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            utility: None,
            tud_center: TudCenter::Global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default = "default_model")]
    pub model: ModelConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_test_fraction() -> f64 {
    0.3
}
fn default_activation() -> Activation {
    Activation::Relu
}
fn default_model() -> ModelConfig {
    ModelConfig {
        hidden_dims: Vec::new(),
        activation: default_activation(),
    }
}
fn default_step_size() -> f64 {
    0.01
}
fn default_batch_size() -> usize {
    128
}
fn default_epochs() -> usize {
    50
}
fn default_beta() -> f64 {
    0.99
}
fn default_lambda2_cap() -> f64 {
    3.0
}
fn default_epsilon() -> f64 {
    1.0
}
fn default_alpha_min() -> f64 {
    0.2
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative CSV path is resolved against the
    /// config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let DataSource::Csv { path: csv, .. } = &mut cfg.data.source {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn task(&self) -> Task {
        match &self.data.source {
            DataSource::Synthetic { spec, .. } => spec.task,
            DataSource::Csv { schema, .. } => schema.task,
        }
    }

    pub fn utility_kind(&self) -> UtilityKind {
        self.eval.utility.unwrap_or(if self.task().is_classification() {
            UtilityKind::Accuracy
        } else {
            UtilityKind::Mse
        })
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        if t.methods.is_empty() {
            return Err(Error::Config("train.methods is empty".into()));
        }
        let mut unique = t.methods.clone();
        unique.sort();
        unique.dedup();
        if unique.len() != t.methods.len() {
            return Err(Error::Config("train.methods lists a method twice".into()));
        }
        if t.seeds.is_empty() {
            return Err(Error::Config("train.seeds is empty".into()));
        }
        if t.batch_size == 0 || t.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be > 0".into()));
        }
        if t.eval_every_steps == Some(0) {
            return Err(Error::Config("eval_every_steps must be > 0".into()));
        }
        if !(t.lambda2_cap >= 0.0) {
            return Err(Error::Config(format!("lambda2_cap must be >= 0, got {}", t.lambda2_cap)));
        }
        if !t.epsilon.is_finite() {
            return Err(Error::Config("epsilon must be finite".into()));
        }
        self.update_state()?;
        if t.methods.contains(&Method::Dro) {
            DroConfig::new(t.dro_alpha_min)?;
        }
        if t.epoch_selection == EpochSelection::Harmless
            && t.reference_loss.is_none()
            && !t.methods.contains(&Method::Erm)
        {
            return Err(Error::Config(
                "harmless epoch selection needs `erm` in train.methods or train.reference_loss".into(),
            ));
        }
        if let DataSource::Synthetic { spec, .. } = &self.data.source {
            spec.validate()?;
        }
        if let DataSource::Csv { schema, .. } = &self.data.source {
            schema.validate()?;
        }
        if self.task() == Task::MulticlassCe && self.utility_kind() != UtilityKind::Accuracy {
            return Err(Error::Config("multiclass tasks support accuracy utility only".into()));
        }
        Ok(())
    }

    pub fn update_state(&self) -> Result<UpdateState> {
        let t = &self.train;
        let mut state = UpdateState::new(t.step_size);
        state.decay = t.beta;
        state.epsilon_projection = t.epsilon;
        state.lambda2_cap = if t.lambda2_cap > 0.0 && t.lambda2_cap.is_finite() {
            Some(t.lambda2_cap)
        } else {
            None
        };
        state.validate()?;
        Ok(state)
    }

    pub fn dro_config(&self) -> Result<DroConfig> {
        DroConfig::new(self.train.dro_alpha_min)
    }

    /// Generates or loads the full dataset.
    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.data.source {
            DataSource::Synthetic { spec, data_seed } => synthesize(spec, *data_seed),
            DataSource::Csv { path, schema } => load_csv(path, schema),
        }
    }

    pub fn model_spec(&self, input_dim: usize) -> Result<ModelSpec> {
        let task = self.task();
        let output_dim = match (task, &self.data.source) {
            (Task::MulticlassCe, DataSource::Csv { schema, .. }) => match &schema.label_levels {
                Some(levels) => levels.len(),
                None => {
                    return Err(Error::Config(
                        "multiclass CSV data needs schema.label_levels to size the output".into(),
                    ))
                }
            },
            _ => 1,
        };
        ModelSpec::new(
            input_dim,
            self.model.hidden_dims.clone(),
            self.model.activation,
            output_dim,
            task,
        )
    }
}
