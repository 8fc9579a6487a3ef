use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::searchspace::{Architecture, SearchSpace};

use super::{evaluate_batch, first_argmax, EvalRecord, Evaluator, SearchMethod, SearchOutcome};

/// Evolutionary baseline settings. Every generation evaluates
/// `population_size` new individuals, so the budget is
/// `population_size × generations`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-gene probability of switching to a different choice.
    pub mutation_prob: f64,
    pub elite_count: usize,
    pub tournament_size: usize,
    pub parallelism: usize,
}

impl Default for EaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 20,
            crossover_prob: 0.5,
            mutation_prob: 0.1,
            elite_count: 5,
            tournament_size: 2,
            parallelism: 1,
        }
    }
}

impl EaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("ea: {m}")));
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if self.generations == 0 {
            return bad("generations must be positive");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) || !(0.0..=1.0).contains(&self.mutation_prob)
        {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.elite_count > self.population_size {
            return bad("elite_count exceeds population_size");
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be positive");
        }
        Ok(())
    }

    pub fn budget(&self) -> usize {
        self.population_size * self.generations
    }
}

type Individual<T> = (Architecture, T);

pub fn ea_search<T, E>(
    space: &SearchSpace,
    evaluator: &E,
    config: &EaConfig,
    seed: u64,
) -> Result<SearchOutcome<T>>
where
    T: Scalar,
    E: Evaluator<T> + ?Sized,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = space.shape();
    let mut log: Vec<EvalRecord<T>> = Vec::with_capacity(config.budget());

    let initial: Vec<Architecture> = (0..config.population_size)
        .map(|_| Architecture::new(shape.iter().map(|&p| rng.gen_range(0..p)).collect()))
        .collect();
    let mut population = evaluate_generation(evaluator, initial, 0, config, &mut log)?;

    for generation in 1..config.generations {
        sort_by_fitness(&mut population);
        let children: Vec<Architecture> = (0..config.population_size)
            .map(|_| {
                let first = tournament(&population, config.tournament_size, &mut rng);
                let mut child = if rng.gen::<f64>() < config.crossover_prob {
                    let second = tournament(&population, config.tournament_size, &mut rng);
                    uniform_crossover(first, second, &mut rng)
                } else {
                    first.choices().to_vec()
                };
                mutate(&mut child, &shape, config.mutation_prob, &mut rng);
                Architecture::new(child)
            })
            .collect();
        let evaluated = evaluate_generation(evaluator, children, generation, config, &mut log)?;
        let mut next: Vec<Individual<T>> = population.drain(..config.elite_count).collect();
        next.extend(evaluated);
        sort_by_fitness(&mut next);
        next.truncate(config.population_size);
        population = next;
    }

    let (i, best_fitness) =
        first_argmax(log.iter().map(|r| r.fitness)).expect("at least one evaluation");
    Ok(SearchOutcome {
        best: log[i].architecture.clone(),
        best_fitness,
        log,
    })
}

fn evaluate_generation<T, E>(
    evaluator: &E,
    archs: Vec<Architecture>,
    generation: usize,
    config: &EaConfig,
    log: &mut Vec<EvalRecord<T>>,
) -> Result<Vec<Individual<T>>>
where
    T: Scalar,
    E: Evaluator<T> + ?Sized,
{
    let fitness = evaluate_batch(evaluator, &archs, config.parallelism)?;
    let individuals: Vec<Individual<T>> = archs.into_iter().zip(fitness).collect();
    log.extend(
        individuals
            .iter()
            .enumerate()
            .map(|(draw, (a, f))| EvalRecord {
                method: SearchMethod::Ea,
                cycle: generation,
                draw,
                architecture: a.clone(),
                fitness: *f,
            }),
    );
    Ok(individuals)
}

/// Descending by fitness; stable, so earlier individuals win ties.
fn sort_by_fitness<T: Scalar>(pop: &mut [Individual<T>]) {
    pop.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
}

fn tournament<'a, T: Scalar>(
    pop: &'a [Individual<T>],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> &'a Architecture {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..size {
        let other = rng.gen_range(0..pop.len());
        if pop[other].1 > pop[best].1 {
            best = other;
        }
    }
    &pop[best].0
}

fn uniform_crossover(a: &Architecture, b: &Architecture, rng: &mut ChaCha8Rng) -> Vec<usize> {
    a.choices()
        .iter()
        .zip(b.choices())
        .map(|(&x, &y)| if rng.gen::<bool>() { x } else { y })
        .collect()
}

fn mutate(genes: &mut [usize], shape: &[usize], prob: f64, rng: &mut ChaCha8Rng) {
    for (g, &p) in genes.iter_mut().zip(shape) {
        if p > 1 && rng.gen::<f64>() < prob {
            // uniform over the other p - 1 choices
            let r = rng.gen_range(0..p - 1);
            *g = if r >= *g { r + 1 } else { r };
        }
    }
}
