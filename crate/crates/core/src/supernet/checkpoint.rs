//! Binary checkpoints of a training run.
//!
//! Layout: the magic line, one line of JSON header, then every weight and
//! then every momentum value as little-endian `f64`. Values are ordered by
//! layer, choice, parameter matrix and row-major position, followed by the
//! classifier.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Hyper, SupernetState, TaskConfig, TrainingRun};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampler::{PermutationScheduler, SchedulerState};
use crate::scalar::Scalar;
use crate::searchspace::{LayerGroup, SearchSpace};

pub const CHECKPOINT_FORMAT: &str = "pathnas-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub version: u32,
    pub groups: Vec<LayerGroup>,
    pub input_dim: usize,
    pub hidden_width: usize,
    pub num_classes: usize,
    pub hyper: Hyper,
    pub seed: u64,
    pub macro_steps: u64,
    pub update_counts: Vec<Vec<u64>>,
    pub task: TaskConfig,
    pub sampler: SchedulerState,
    /// Number of weights; the same number of momentum values follows them.
    pub value_count: usize,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl<T: Scalar> SupernetState<T> {
    fn weights(&self) -> impl Iterator<Item = &Matrix<T>> {
        self.blocks
            .iter()
            .flatten()
            .flat_map(|b| b.params().iter())
            .chain(self.head.iter())
    }

    fn momenta(&self) -> impl Iterator<Item = &Matrix<T>> {
        self.block_momentum
            .iter()
            .flatten()
            .flatten()
            .chain(self.head_momentum.iter())
    }

    fn weights_mut(&mut self) -> impl Iterator<Item = &mut Matrix<T>> {
        self.blocks
            .iter_mut()
            .flatten()
            .flat_map(|b| b.params_mut().iter_mut())
            .chain(self.head.iter_mut())
    }

    fn momenta_mut(&mut self) -> impl Iterator<Item = &mut Matrix<T>> {
        self.block_momentum
            .iter_mut()
            .flatten()
            .flatten()
            .chain(self.head_momentum.iter_mut())
    }
}

impl<T: Scalar> TrainingRun<T> {
    pub fn header(&self) -> CheckpointHeader {
        let s = &self.state;
        CheckpointHeader {
            version: CHECKPOINT_VERSION,
            groups: s.space().groups().to_vec(),
            input_dim: s.input_dim(),
            hidden_width: s.hidden_width(),
            num_classes: s.num_classes(),
            hyper: s.hyper(),
            seed: s.seed(),
            macro_steps: s.macro_steps(),
            update_counts: s.update_counts().to_vec(),
            task: self.task,
            sampler: self.sampler.state(),
            value_count: s.weights().map(|m| m.data().len()).sum(),
        }
    }

    /// Serializes the run. Only allowed between macro-steps, when the
    /// gradient buffers are empty.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.state.window_progress() != 0 {
            return Err(Error::IncompleteWindow {
                done: self.state.window_progress(),
                window: self.state.accumulation_window(),
            });
        }
        let header = self.header();
        let mut out = format!("{CHECKPOINT_FORMAT}\n").into_bytes();
        serde_json::to_writer(&mut out, &header)?;
        out.push(b'\n');
        out.reserve(16 * header.value_count);
        for m in self.state.weights().chain(self.state.momenta()) {
            for v in m.data() {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut lines = bytes.splitn(3, |&b| b == b'\n');
        if lines.next() != Some(CHECKPOINT_FORMAT.as_bytes()) {
            return Err(bad("not a pathnas checkpoint"));
        }
        let header: CheckpointHeader =
            serde_json::from_slice(lines.next().ok_or_else(|| bad("missing header"))?)
                .map_err(|e| bad(format!("bad header: {e}")))?;
        let body = lines.next().ok_or_else(|| bad("missing weights"))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {}", header.version)));
        }
        let space = SearchSpace::new(header.groups.clone())?;
        let config = super::SupernetConfig {
            hidden_width: header.hidden_width,
            hyper: header.hyper,
            seed: header.seed,
        };
        let mut state =
            SupernetState::<T>::new(&space, header.input_dim, header.num_classes, &config)?;
        let expected: usize = state.weights().map(|m| m.data().len()).sum();
        if expected != header.value_count || body.len() != 16 * expected {
            return Err(bad(format!(
                "expected {expected} weights and momenta, found {} bytes",
                body.len()
            )));
        }
        if header.update_counts.len() != space.total_layers()
            || header
                .update_counts
                .iter()
                .zip(space.shape())
                .any(|(c, p)| c.len() != p)
            || header.sampler.shape != space.shape()
        {
            return Err(bad("header does not match its search space"));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())));
        for m in state.weights_mut() {
            m.data_mut()
                .iter_mut()
                .for_each(|v| *v = values.next().unwrap());
        }
        for m in state.momenta_mut() {
            m.data_mut()
                .iter_mut()
                .for_each(|v| *v = values.next().unwrap());
        }
        state.macro_steps = header.macro_steps;
        state.update_counts = header.update_counts;
        let sampler = PermutationScheduler::from_state(header.sampler)?;
        header.task.validate()?;
        Ok(Self {
            state,
            sampler,
            task: header.task,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{SupernetConfig, ToyTask};
    use super::*;

    fn setup() -> (TrainingRun<f64>, ToyTask<f64>) {
        let task_cfg = TaskConfig {
            train_size: 128,
            val_size: 64,
            ..Default::default()
        };
        let space = SearchSpace::new(vec![
            LayerGroup::anonymous("a", 2, 4).unwrap(),
            LayerGroup::new("b", 1, vec!["r4".into(), "r8".into(), "r16".into()]).unwrap(),
        ])
        .unwrap();
        let run = TrainingRun::new(
            &space,
            &task_cfg,
            &SupernetConfig {
                seed: 5,
                ..Default::default()
            },
        )
        .unwrap();
        (run, ToyTask::generate(&task_cfg).unwrap())
    }

    #[test]
    fn resume_is_bit_exact() {
        let (mut straight, task) = setup();
        straight.train(&task, 6).unwrap();

        let (mut first, _) = setup();
        first.train(&task, 3).unwrap();
        let bytes = first.to_bytes().unwrap();
        let mut resumed = TrainingRun::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(resumed.to_bytes().unwrap(), bytes);
        resumed.train(&task, 3).unwrap();

        assert_eq!(resumed.to_bytes().unwrap(), straight.to_bytes().unwrap());
        assert_eq!(resumed.state(), straight.state());
    }

    #[test]
    fn rejects_corruption() {
        let (run, _) = setup();
        let bytes = run.to_bytes().unwrap();
        assert!(TrainingRun::<f64>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(TrainingRun::<f64>::from_bytes(b"garbage\n{}\n").is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(TrainingRun::<f64>::from_bytes(&wrong).is_err());
    }

    #[test]
    fn refuses_mid_window() {
        let (mut run, task) = setup();
        let arch = crate::searchspace::Architecture::zeros(3);
        run.state
            .accumulate_gradients(&arch, &task.train()[0])
            .unwrap();
        assert!(run.to_bytes().is_err());
    }
}
