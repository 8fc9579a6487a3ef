//! Experiment config: a TOML file with dotted section keys.

use std::path::{Path, PathBuf};

use pathnas::oracle::{LandscapeKind, LandscapeParams};
use pathnas::search::{EaConfig, PathPriorityOptions, SearchBudget, SearchMethod};
use pathnas::searchspace::DEFAULT_ENUMERATION_CAP;
use pathnas::supernet::{Hyper, SupernetConfig, TaskConfig};
use pathnas::{LayerGroup, SearchSpace};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Relative paths resolve against the config file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
    pub space: SpaceConfig,
    pub evaluator: EvaluatorConfig,
    #[serde(default)]
    pub method: MethodConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_parallelism() -> usize {
    1
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// `"paper"` selects the 40 × 4, 7 × 6, 9 × 3 space.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub groups: Vec<GroupConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub name: String,
    pub layers: usize,
    /// Choice count for anonymous labels `c0, c1, ...`.
    #[serde(default)]
    pub choices: Option<usize>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Oracle,
    Supernet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorConfig {
    pub kind: EvaluatorKind,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub supernet: SupernetSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub landscape: LandscapeKind,
    /// Landscape seed; the run seed when absent.
    pub seed: Option<u64>,
    /// Seed of the hashed noise when it should differ from the landscape seed.
    pub noise_seed: Option<u64>,
    pub interaction_count: usize,
    pub interaction_scale: f64,
    pub noise_sigma: f64,
    /// Load this landscape document instead of generating one.
    pub file: Option<PathBuf>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let p = LandscapeParams::default();
        Self {
            landscape: LandscapeKind::Separable,
            seed: None,
            noise_seed: None,
            interaction_count: p.interaction_count,
            interaction_scale: p.interaction_scale,
            noise_sigma: p.noise_sigma,
            file: None,
        }
    }
}

impl OracleConfig {
    pub fn params(&self) -> LandscapeParams {
        LandscapeParams {
            interaction_count: self.interaction_count,
            interaction_scale: self.interaction_scale,
            noise_sigma: self.noise_sigma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupernetSection {
    /// Trained weights used by `search` and `eval-arch`.
    pub checkpoint: Option<PathBuf>,
    /// Target macro-step count of `train-supernet`.
    pub macro_steps: u64,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub task: TaskConfig,
}

impl Default for SupernetSection {
    fn default() -> Self {
        let s = SupernetConfig::default();
        Self {
            checkpoint: None,
            macro_steps: 100,
            hidden_width: s.hidden_width,
            learning_rate: s.hyper.learning_rate,
            momentum: s.hyper.momentum,
            weight_decay: s.hyper.weight_decay,
            task: TaskConfig::default(),
        }
    }
}

impl SupernetSection {
    pub fn supernet_config(&self, seed: u64) -> SupernetConfig {
        SupernetConfig {
            hidden_width: self.hidden_width,
            hyper: Hyper {
                learning_rate: self.learning_rate,
                momentum: self.momentum,
                weight_decay: self.weight_decay,
            },
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default)]
    pub name: SearchMethod,
    #[serde(default)]
    pub path_priority: PathPriorityConfig,
    #[serde(default)]
    pub ea: EaSection,
    #[serde(default)]
    pub random: RandomConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathPriorityConfig {
    pub cycles: usize,
    pub models_per_cycle: usize,
    /// Round `models_per_cycle` up to a multiple of the choice-count lcm
    /// instead of rejecting it.
    pub round_up: bool,
    /// Score constant; `models_per_cycle` when absent.
    pub k: Option<f64>,
    pub reseed_per_cycle: bool,
}

impl Default for PathPriorityConfig {
    fn default() -> Self {
        Self {
            cycles: 5,
            models_per_cycle: 12,
            round_up: false,
            k: None,
            reseed_per_cycle: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EaSection {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub elite_count: usize,
    pub tournament_size: usize,
}

impl Default for EaSection {
    fn default() -> Self {
        let d = EaConfig::default();
        Self {
            population_size: d.population_size,
            generations: d.generations,
            crossover_prob: d.crossover_prob,
            mutation_prob: d.mutation_prob,
            elite_count: d.elite_count,
            tournament_size: d.tournament_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomConfig {
    pub evaluations: usize,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self { evaluations: 300 }
    }
}

/// A parsed config together with the directory its paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub space: SearchSpace,
}

impl LoadedConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
        if let Some(seed) = seed_override {
            config.seeds = vec![seed];
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let space = config.validate()?;
        Ok(Self {
            config,
            base_dir,
            space,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output_dir)
    }
}

impl ExperimentConfig {
    /// Checks every parameter up front and builds the search space.
    pub fn validate(&self) -> CliResult<SearchSpace> {
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds must not be empty"));
        }
        if self.parallelism == 0 {
            return Err(CliError::config("parallelism must be positive"));
        }
        let space = self.space.build()?;
        let o = &self.evaluator.oracle;
        if !(o.interaction_scale >= 0.0 && o.noise_sigma >= 0.0) {
            return Err(CliError::config(
                "oracle interaction_scale and noise_sigma must be non-negative",
            ));
        }
        if o.landscape == LandscapeKind::Noisy && o.noise_sigma <= 0.0 {
            return Err(CliError::config("noisy landscape needs noise_sigma > 0"));
        }
        let s = &self.evaluator.supernet;
        s.task.validate()?;
        if s.hidden_width == 0 {
            return Err(CliError::config("supernet hidden_width must be positive"));
        }
        if !(s.learning_rate >= 0.0 && s.momentum >= 0.0 && s.weight_decay >= 0.0) {
            return Err(CliError::config(
                "supernet hyperparameters must be non-negative",
            ));
        }
        self.ea_config().validate()?;
        if self.method.name == SearchMethod::PathPriority {
            self.search_budget(&space)?;
        }
        if self.method.random.evaluations == 0 {
            return Err(CliError::config("random evaluations must be positive"));
        }
        Ok(space)
    }

    pub fn search_budget(&self, space: &SearchSpace) -> CliResult<SearchBudget> {
        let p = &self.method.path_priority;
        let budget = if p.round_up {
            SearchBudget::round_up(p.cycles, p.models_per_cycle, space)?
        } else {
            SearchBudget::new(p.cycles, p.models_per_cycle, space)?
        };
        Ok(budget)
    }

    pub fn path_priority_options(&self) -> PathPriorityOptions {
        let p = &self.method.path_priority;
        PathPriorityOptions {
            k: p.k,
            parallelism: self.parallelism,
            reseed_per_cycle: p.reseed_per_cycle,
        }
    }

    pub fn ea_config(&self) -> EaConfig {
        let e = &self.method.ea;
        EaConfig {
            population_size: e.population_size,
            generations: e.generations,
            crossover_prob: e.crossover_prob,
            mutation_prob: e.mutation_prob,
            elite_count: e.elite_count,
            tournament_size: e.tournament_size,
            parallelism: self.parallelism,
        }
    }

    /// Budget of the configured search method.
    pub fn declared_budget(&self, space: &SearchSpace) -> CliResult<usize> {
        Ok(match self.method.name {
            SearchMethod::PathPriority => self.search_budget(space)?.total(),
            SearchMethod::Ea => self.ea_config().budget(),
            SearchMethod::Random => self.method.random.evaluations,
        })
    }

    /// Hex SHA-256 of the canonical JSON form, salted with `extra`.
    pub fn content_hash(&self, extra: &str) -> String {
        let mut h = Sha256::new();
        h.update(extra.as_bytes());
        h.update(serde_json::to_vec(self).expect("config serializes"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl SpaceConfig {
    pub fn build(&self) -> CliResult<SearchSpace> {
        match (&self.preset, self.groups.is_empty()) {
            (Some(p), true) if p == "paper" => Ok(SearchSpace::paper()),
            (Some(p), true) => Err(CliError::config(format!("unknown space preset {p:?}"))),
            (Some(_), false) => Err(CliError::config(
                "space takes either a preset or groups, not both",
            )),
            (None, true) => Err(CliError::config(
                "space needs a preset or at least one group",
            )),
            (None, false) => {
                let groups = self
                    .groups
                    .iter()
                    .map(|g| match (&g.labels, g.choices) {
                        (Some(labels), None) => {
                            LayerGroup::new(g.name.clone(), g.layers, labels.clone())
                        }
                        (Some(labels), Some(n)) if n == labels.len() => {
                            LayerGroup::new(g.name.clone(), g.layers, labels.clone())
                        }
                        (None, Some(n)) => LayerGroup::anonymous(g.name.clone(), g.layers, n),
                        _ => Err(pathnas::Error::InvalidSpace(format!(
                            "group {:?} needs choices or labels, consistent with each other",
                            g.name
                        ))),
                    })
                    .collect::<pathnas::Result<Vec<_>>>()?;
                Ok(SearchSpace::new(groups)?)
            }
        }
    }
}
