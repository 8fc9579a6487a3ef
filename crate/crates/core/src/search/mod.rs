//! Architecture search against any fitness evaluator.
//!
//! [`path_priority_search`] rates individual choice paths rather than whole
//! models; [`ea_search`] and [`random_search`] are the whole-model baselines.

mod ea;
mod leaderboard;
mod log;
mod path_priority;
mod random;

pub use ea::{ea_search, EaConfig};
pub use leaderboard::{competition_ranks, Leaderboard, Selection};
pub use log::{read_evaluation_log, write_evaluation_log, EVALUATION_LOG_HEADER};
pub use path_priority::{
    path_priority_search, run_cycle, score_cycle, PathPriorityOptions, PathPriorityOutcome,
};
pub use random::random_search;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::searchspace::{Architecture, SearchSpace};

/// Maps an architecture to the scalar a search maximizes.
pub trait Evaluator<T>: Sync {
    fn evaluate(&self, arch: &Architecture) -> Result<T>;
}

impl<T, E: Evaluator<T> + ?Sized> Evaluator<T> for &E {
    fn evaluate(&self, arch: &Architecture) -> Result<T> {
        (**self).evaluate(arch)
    }
}

/// Adapts a closure into an [`Evaluator`].
pub struct FnEvaluator<F>(pub F);

impl<T, F> Evaluator<T> for FnEvaluator<F>
where
    F: Fn(&Architecture) -> Result<T> + Sync,
{
    fn evaluate(&self, arch: &Architecture) -> Result<T> {
        (self.0)(arch)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SearchMethod {
    #[default]
    #[serde(rename = "path-priority")]
    PathPriority,
    #[serde(rename = "ea")]
    Ea,
    #[serde(rename = "random")]
    Random,
}

impl fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PathPriority => "path-priority",
            Self::Ea => "ea",
            Self::Random => "random",
        })
    }
}

impl FromStr for SearchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path-priority" => Ok(Self::PathPriority),
            "ea" => Ok(Self::Ea),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidConfig(format!(
                "unknown search method {other:?}"
            ))),
        }
    }
}

/// One logged evaluation. `cycle` is the search cycle for path-priority,
/// the generation for EA and always 0 for random search.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord<T> {
    pub method: SearchMethod,
    pub cycle: usize,
    pub draw: usize,
    pub architecture: Architecture,
    pub fitness: T,
}

/// Result of a whole-model search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome<T> {
    pub best: Architecture,
    pub best_fitness: T,
    pub log: Vec<EvalRecord<T>>,
}

/// `cycles` × `models_per_cycle` evaluations for path-priority search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    cycles: usize,
    models_per_cycle: usize,
}

impl SearchBudget {
    /// `models_per_cycle` must be a positive multiple of the space's choice lcm.
    pub fn new(cycles: usize, models_per_cycle: usize, space: &SearchSpace) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::InvalidBudget(
                "at least one cycle is required".into(),
            ));
        }
        let window = space.choice_lcm();
        if models_per_cycle == 0 || !models_per_cycle.is_multiple_of(window) {
            return Err(Error::InvalidBudget(format!(
                "models per cycle {models_per_cycle} is not a positive multiple of {window}"
            )));
        }
        Ok(Self {
            cycles,
            models_per_cycle,
        })
    }

    /// Smallest multiple of the space's choice lcm that is at least `e`.
    pub fn round_up(cycles: usize, e: usize, space: &SearchSpace) -> Result<Self> {
        let w = space.choice_lcm();
        Self::new(cycles, e.max(1).div_ceil(w) * w, space)
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn models_per_cycle(&self) -> usize {
        self.models_per_cycle
    }

    pub fn total(&self) -> usize {
        self.cycles * self.models_per_cycle
    }
}

/// Evaluates `archs` with at most `parallelism` threads, preserving order.
/// The first failure in draw order is returned with its architecture.
pub fn evaluate_batch<T, E>(
    evaluator: &E,
    archs: &[Architecture],
    parallelism: usize,
) -> Result<Vec<T>>
where
    T: Send,
    E: Evaluator<T> + ?Sized,
{
    let results: Vec<Result<T>> = if parallelism <= 1 || archs.len() <= 1 {
        archs.iter().map(|a| evaluator.evaluate(a)).collect()
    } else {
        let chunk = archs.len().div_ceil(parallelism);
        std::thread::scope(|scope| {
            let handles: Vec<_> = archs
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|a| evaluator.evaluate(a))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("evaluator thread panicked"))
                .collect()
        })
    };
    results
        .into_iter()
        .zip(archs)
        .map(|(r, a)| {
            r.map_err(|e| Error::Evaluation {
                arch: a.clone(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Index of the first maximum.
pub(crate) fn first_argmax<T: PartialOrd + Copy>(
    xs: impl IntoIterator<Item = T>,
) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, x) in xs.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::searchspace::LayerGroup;

    #[test]
    fn budget_requires_lcm_multiple() {
        let space = SearchSpace::new(vec![
            LayerGroup::anonymous("a", 2, 4).unwrap(),
            LayerGroup::anonymous("b", 2, 6).unwrap(),
            LayerGroup::anonymous("c", 2, 3).unwrap(),
        ])
        .unwrap();
        assert_eq!(SearchBudget::new(5, 12, &space).unwrap().total(), 60);
        assert!(SearchBudget::new(5, 10, &space).is_err());
        assert!(SearchBudget::new(0, 12, &space).is_err());
        assert!(SearchBudget::new(5, 0, &space).is_err());
        let s3 = SearchSpace::uniform(5, 3).unwrap();
        assert_eq!(
            SearchBudget::round_up(5, 12, &s3)
                .unwrap()
                .models_per_cycle(),
            12
        );
        assert_eq!(
            SearchBudget::round_up(5, 10, &s3)
                .unwrap()
                .models_per_cycle(),
            12
        );
    }

    #[test]
    fn batch_evaluation_keeps_order_and_reports_failures() {
        let archs: Vec<_> = (0..10).map(|i| Architecture::new(vec![i])).collect();
        let ev = FnEvaluator(|a: &Architecture| Ok(a.choices()[0] as f64 * 2.0));
        let seq = evaluate_batch(&ev, &archs, 1).unwrap();
        let par = evaluate_batch(&ev, &archs, 4).unwrap();
        assert_eq!(seq, par);
        assert_eq!(par[7], 14.0);

        let failing = FnEvaluator(|a: &Architecture| {
            if a.choices()[0] >= 6 {
                Err(Error::Evaluator("boom".into()))
            } else {
                Ok(0.0)
            }
        });
        match evaluate_batch(&failing, &archs, 3).unwrap_err() {
            Error::Evaluation { arch, .. } => assert_eq!(arch, Architecture::new(vec![6])),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            SearchMethod::PathPriority,
            SearchMethod::Ea,
            SearchMethod::Random,
        ] {
            assert_eq!(m.to_string().parse::<SearchMethod>().unwrap(), m);
        }
        assert!("darts".parse::<SearchMethod>().is_err());
    }
}
