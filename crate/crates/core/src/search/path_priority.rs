use crate::error::{Error, Result};
use crate::sampler::{derive_seed, FairnessReport, PermutationScheduler};
use crate::scalar::Scalar;
use crate::searchspace::{lcm, Architecture, SearchSpace};

use super::{
    evaluate_batch, EvalRecord, Evaluator, Leaderboard, SearchBudget, SearchMethod, Selection,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPriorityOptions {
    /// Score constant; `None` means `K = E`.
    pub k: Option<f64>,
    /// Concurrent evaluator calls within a cycle.
    pub parallelism: usize,
    /// Restart the sampler from a per-cycle derived seed instead of
    /// continuing one scheduler across cycles.
    pub reseed_per_cycle: bool,
}

impl Default for PathPriorityOptions {
    fn default() -> Self {
        Self {
            k: None,
            parallelism: 1,
            reseed_per_cycle: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathPriorityOutcome<T> {
    pub selection: Selection,
    pub leaderboard: Leaderboard<T>,
    pub log: Vec<EvalRecord<T>>,
    pub fairness: FairnessReport,
}

/// Draws `models` architectures from `sampler` and evaluates them, in draw
/// order. `models` must be a multiple of the lcm of all choice counts.
pub fn run_cycle<T, E>(
    sampler: &mut PermutationScheduler,
    evaluator: &E,
    models: usize,
    parallelism: usize,
) -> Result<Vec<(Architecture, T)>>
where
    T: Scalar,
    E: Evaluator<T> + ?Sized,
{
    let window = sampler.shape().iter().copied().fold(1, lcm);
    if models == 0 || !models.is_multiple_of(window) {
        return Err(Error::InvalidBudget(format!(
            "models per cycle {models} is not a positive multiple of {window}"
        )));
    }
    let archs: Vec<Architecture> = (0..models).map(|_| sampler.next_arch()).collect();
    let fitness = evaluate_batch(evaluator, &archs, parallelism)?;
    Ok(archs.into_iter().zip(fitness).collect())
}

/// Adds one cycle to `leaderboard` with score constant `k`; returns ranks.
pub fn score_cycle<T: Scalar>(
    results: &[(Architecture, T)],
    leaderboard: &mut Leaderboard<T>,
    k: T,
) -> Vec<usize> {
    leaderboard.record_cycle(results, k)
}

pub fn path_priority_search<T, E>(
    space: &SearchSpace,
    evaluator: &E,
    budget: SearchBudget,
    seed: u64,
    options: &PathPriorityOptions,
) -> Result<PathPriorityOutcome<T>>
where
    T: Scalar,
    E: Evaluator<T> + ?Sized,
{
    // revalidate against this space in case the budget was built for another
    let budget = SearchBudget::new(budget.cycles(), budget.models_per_cycle(), space)?;
    let e = budget.models_per_cycle();
    let k = options.k.map(T::of).unwrap_or_else(|| T::of_usize(e));
    let mut sampler = PermutationScheduler::new(space, seed);
    let mut leaderboard = Leaderboard::new(&space.shape());
    let mut log = Vec::with_capacity(budget.total());
    for cycle in 0..budget.cycles() {
        if options.reseed_per_cycle {
            sampler.reseed(derive_seed(seed, cycle as u64));
        }
        let results = run_cycle(&mut sampler, evaluator, e, options.parallelism)?;
        score_cycle(&results, &mut leaderboard, k);
        log.extend(
            results
                .into_iter()
                .enumerate()
                .map(|(draw, (architecture, fitness))| EvalRecord {
                    method: SearchMethod::PathPriority,
                    cycle,
                    draw,
                    architecture,
                    fitness,
                }),
        );
    }
    let selection = leaderboard.select_best()?;
    Ok(PathPriorityOutcome {
        selection,
        leaderboard,
        log,
        fairness: sampler.fairness_report(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::FnEvaluator;
    use crate::searchspace::LayerGroup;

    fn mixed_space() -> SearchSpace {
        SearchSpace::new(vec![
            LayerGroup::anonymous("backbone", 3, 4).unwrap(),
            LayerGroup::anonymous("head", 2, 6).unwrap(),
            LayerGroup::anonymous("inter", 2, 3).unwrap(),
        ])
        .unwrap()
    }

    fn sum_evaluator() -> FnEvaluator<impl Fn(&Architecture) -> Result<f64> + Sync> {
        FnEvaluator(|a: &Architecture| Ok(a.choices().iter().map(|&c| c as f64).sum::<f64>()))
    }

    #[test]
    fn cycle_gives_equal_occurrences() {
        let space = mixed_space();
        let mut s = PermutationScheduler::new(&space, 1);
        let res = run_cycle(&mut s, &sum_evaluator(), 12, 2).unwrap();
        assert_eq!(res.len(), 12);
        let mut lb = Leaderboard::new(&space.shape());
        score_cycle(&res, &mut lb, 12.0);
        assert_eq!(lb.occurrences()[0], vec![3; 4]);
        assert_eq!(lb.occurrences()[3], vec![2; 6]);
        assert_eq!(lb.occurrences()[6], vec![4; 3]);
    }

    #[test]
    fn cycle_size_must_be_lcm_multiple() {
        let space = mixed_space();
        let mut s = PermutationScheduler::new(&space, 1);
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let ev = FnEvaluator(|_: &Architecture| {
            calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(0.0)
        });
        assert!(run_cycle::<f64, _>(&mut s, &ev, 6, 1).is_err());
        assert_eq!(calls.into_inner(), 0);
    }

    #[test]
    fn constant_evaluator_selects_lowest_indices() {
        let space = SearchSpace::uniform(4, 3).unwrap();
        let budget = SearchBudget::new(1, 3, &space).unwrap();
        let ev = FnEvaluator(|_: &Architecture| Ok(1.0f64));
        let out = path_priority_search(&space, &ev, budget, 5, &Default::default()).unwrap();
        assert_eq!(out.selection.architecture, Architecture::zeros(4));
        assert_eq!(out.selection.tied_layers, vec![0, 1, 2, 3]);
    }

    #[test]
    fn paper_budget_logs_sixty_and_is_deterministic() {
        let space = mixed_space();
        let budget = SearchBudget::new(5, 12, &space).unwrap();
        let a = path_priority_search(&space, &sum_evaluator(), budget, 42, &Default::default())
            .unwrap();
        let b = path_priority_search(
            &space,
            &sum_evaluator(),
            budget,
            42,
            &PathPriorityOptions {
                parallelism: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.log.len(), 60);
        assert_eq!(a, b);
        assert_eq!(a.fairness.max_spread(), 0);
        assert!(space.validate(&a.selection.architecture));
    }

    #[test]
    fn reseeding_changes_draws_but_keeps_fairness() {
        let space = mixed_space();
        let budget = SearchBudget::new(3, 12, &space).unwrap();
        let opts = PathPriorityOptions {
            reseed_per_cycle: true,
            ..Default::default()
        };
        let a = path_priority_search(&space, &sum_evaluator(), budget, 42, &opts).unwrap();
        let b = path_priority_search(&space, &sum_evaluator(), budget, 42, &Default::default())
            .unwrap();
        assert_ne!(a.log, b.log);
        assert_eq!(a.fairness.max_spread(), 0);
    }

    #[test]
    fn score_conservation_per_cycle() {
        let space = mixed_space();
        let budget = SearchBudget::new(2, 12, &space).unwrap();
        let out =
            path_priority_search(&space, &sum_evaluator(), budget, 3, &Default::default()).unwrap();
        let total: f64 = out.leaderboard.scores().iter().flatten().sum();
        let mut expected = 0.0;
        for cycle in 0..2 {
            let fit: Vec<f64> = out
                .log
                .iter()
                .filter(|r| r.cycle == cycle)
                .map(|r| r.fitness)
                .collect();
            let ranks = crate::search::competition_ranks(&fit);
            expected +=
                ranks.iter().map(|&r| (12 - r) as f64).sum::<f64>() * space.total_layers() as f64;
        }
        assert_eq!(total, expected);
    }
}
