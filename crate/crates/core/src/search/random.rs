use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::searchspace::{Architecture, SearchSpace};

use super::{evaluate_batch, first_argmax, EvalRecord, Evaluator, SearchMethod, SearchOutcome};

/// Evaluates `n` i.i.d. uniform architectures and keeps the first best.
pub fn random_search<T, E>(
    space: &SearchSpace,
    evaluator: &E,
    n: usize,
    seed: u64,
    parallelism: usize,
) -> Result<SearchOutcome<T>>
where
    T: Scalar,
    E: Evaluator<T> + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidConfig(
            "random search needs at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = space.shape();
    let archs: Vec<Architecture> = (0..n)
        .map(|_| Architecture::new(shape.iter().map(|&p| rng.gen_range(0..p)).collect()))
        .collect();
    let fitness = evaluate_batch(evaluator, &archs, parallelism)?;
    let (i, best_fitness) = first_argmax(fitness.iter().copied()).expect("n >= 1");
    let best = archs[i].clone();
    let log = archs
        .into_iter()
        .zip(fitness)
        .enumerate()
        .map(|(draw, (architecture, fitness))| EvalRecord {
            method: SearchMethod::Random,
            cycle: 0,
            draw,
            architecture,
            fitness,
        })
        .collect();
    Ok(SearchOutcome {
        best,
        best_fitness,
        log,
    })
}
