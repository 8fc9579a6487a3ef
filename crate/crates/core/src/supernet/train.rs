//! Strictly fair supernet training loop.

use serde::{Deserialize, Serialize};

use super::{Batch, SupernetConfig, SupernetState, TaskConfig, ToyTask};
use crate::error::{Error, Result};
use crate::sampler::{derive_seed, FairnessReport, PermutationScheduler};
use crate::scalar::Scalar;
use crate::searchspace::{Architecture, SearchSpace};

/// A supernet together with the sampler and data cursor that drive it.
#[derive(Clone, Debug)]
pub struct TrainingRun<T> {
    pub(crate) state: SupernetState<T>,
    pub(crate) sampler: PermutationScheduler,
    pub(crate) task: TaskConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub macro_steps: u64,
    pub accumulation_window: usize,
    /// Mean training loss of every macro-step of the last call.
    pub losses: Vec<f64>,
    pub fairness: FairnessReport,
    pub update_counts: Vec<Vec<u64>>,
}

impl<T: Scalar> TrainingRun<T> {
    pub fn new(space: &SearchSpace, task: &TaskConfig, config: &SupernetConfig) -> Result<Self> {
        task.validate()?;
        let state = SupernetState::new(space, task.input_dim, task.num_classes, config)?;
        Ok(Self::from_state(state, task))
    }

    /// Wraps an existing network; the sampler is seeded from its config.
    pub fn from_state(state: SupernetState<T>, task: &TaskConfig) -> Self {
        let sampler = PermutationScheduler::new(state.space(), derive_seed(state.seed(), 200));
        Self {
            state,
            sampler,
            task: *task,
        }
    }

    pub fn state(&self) -> &SupernetState<T> {
        &self.state
    }

    pub fn into_state(self) -> SupernetState<T> {
        self.state
    }

    pub fn sampler(&self) -> &PermutationScheduler {
        &self.sampler
    }

    pub fn task_config(&self) -> &TaskConfig {
        &self.task
    }

    fn micro_steps(&self) -> u64 {
        self.state.macro_steps() * self.state.accumulation_window() as u64
            + self.state.window_progress() as u64
    }

    /// Runs one accumulation window; returns its mean loss.
    pub fn macro_step(&mut self, task: &ToyTask<T>) -> Result<T> {
        if task.config() != &self.task {
            return Err(Error::InvalidConfig(
                "training data does not match the run's task config".into(),
            ));
        }
        let train = task.train();
        let window = self.state.accumulation_window();
        let mut total = T::zero();
        for _ in 0..window {
            let batch: &Batch<T> = &train[(self.micro_steps() % train.len() as u64) as usize];
            let arch = self.sampler.next_arch();
            total += self.state.accumulate_gradients(&arch, batch)?;
        }
        self.state.macro_step()?;
        Ok(total / T::of_usize(window))
    }

    pub fn train(&mut self, task: &ToyTask<T>, macro_steps: u64) -> Result<TrainingSummary> {
        let mut losses = Vec::with_capacity(macro_steps as usize);
        for _ in 0..macro_steps {
            losses.push(self.macro_step(task)?.as_f64());
        }
        Ok(TrainingSummary {
            macro_steps: self.state.macro_steps(),
            accumulation_window: self.state.accumulation_window(),
            losses,
            fairness: self.sampler.fairness_report(),
            update_counts: self.state.update_counts().to_vec(),
        })
    }
}

/// Trains `arch` alone for `macro_steps` steps and returns its validation
/// accuracy.
pub fn train_standalone<T: Scalar>(
    space: &SearchSpace,
    arch: &Architecture,
    task: &ToyTask<T>,
    config: &SupernetConfig,
    macro_steps: u64,
) -> Result<T> {
    let cfg = task.config();
    let state = SupernetState::standalone(space, arch, cfg.input_dim, cfg.num_classes, config)?;
    let mut run = TrainingRun::from_state(state, cfg);
    run.train(task, macro_steps)?;
    run.state
        .estimate_fitness(&Architecture::zeros(arch.len()), task.val())
}
