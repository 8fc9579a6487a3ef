//! Per-layer uniform sampling without replacement.
//!
//! Every layer owns a deck holding a shuffled permutation of its choices.
//! Each draw pops one card per layer; an empty deck is refilled with a fresh
//! permutation first. Between two refills of a layer every one of its
//! choices is therefore emitted exactly once.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::searchspace::{Architecture, SearchSpace};

/// Independent child seed for stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct PermutationScheduler {
    shape: Vec<usize>,
    /// Remaining cards per layer, consumed from the back.
    decks: Vec<Vec<usize>>,
    counts: Vec<Vec<u64>>,
    seed: u64,
    rng: ChaCha8Rng,
    draw_count: u64,
}

/// Serializable snapshot of a scheduler, enough to resume it exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub shape: Vec<usize>,
    pub seed: u64,
    /// ChaCha word position, as a decimal string since it is 128-bit.
    pub word_pos: String,
    pub decks: Vec<Vec<usize>>,
    pub counts: Vec<Vec<u64>>,
    pub draw_count: u64,
}

impl PermutationScheduler {
    pub fn new(space: &SearchSpace, seed: u64) -> Self {
        let shape = space.shape();
        Self {
            decks: vec![Vec::new(); shape.len()],
            counts: shape.iter().map(|&p| vec![0; p]).collect(),
            shape,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draw_count: 0,
        }
    }

    /// Next architecture; one card from every layer's deck.
    pub fn next_arch(&mut self) -> Architecture {
        let mut choices = Vec::with_capacity(self.shape.len());
        for (l, &p) in self.shape.iter().enumerate() {
            if self.decks[l].is_empty() {
                let mut deck: Vec<usize> = (0..p).collect();
                deck.shuffle(&mut self.rng);
                // popped from the back, keep shuffle order as draw order
                deck.reverse();
                self.decks[l] = deck;
            }
            let c = self.decks[l].pop().expect("deck refilled above");
            self.counts[l][c] += 1;
            choices.push(c);
        }
        self.draw_count += 1;
        Architecture::new(choices)
    }

    /// Restarts the generator from `seed`, discarding partially consumed
    /// decks. Activation counts are kept.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.decks.iter_mut().for_each(Vec::clear);
    }

    pub fn draw_count(&self) -> u64 {
        self.draw_count
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn fairness_report(&self) -> FairnessReport {
        FairnessReport {
            draw_count: self.draw_count,
            counts: self.counts.clone(),
        }
    }

    pub fn state(&self) -> SchedulerState {
        SchedulerState {
            shape: self.shape.clone(),
            seed: self.seed,
            word_pos: self.rng.get_word_pos().to_string(),
            decks: self.decks.clone(),
            counts: self.counts.clone(),
            draw_count: self.draw_count,
        }
    }

    pub fn from_state(state: SchedulerState) -> crate::Result<Self> {
        let word_pos: u128 = state.word_pos.parse().map_err(|_| {
            crate::Error::Checkpoint(format!("bad word position {:?}", state.word_pos))
        })?;
        let consistent = state.decks.len() == state.shape.len()
            && state.counts.len() == state.shape.len()
            && state
                .counts
                .iter()
                .zip(&state.shape)
                .all(|(c, &p)| c.len() == p)
            && state
                .decks
                .iter()
                .zip(&state.shape)
                .all(|(d, &p)| d.iter().all(|&c| c < p));
        if !consistent {
            return Err(crate::Error::Checkpoint(
                "scheduler state does not match its shape".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
        rng.set_word_pos(word_pos);
        Ok(Self {
            shape: state.shape,
            decks: state.decks,
            counts: state.counts,
            seed: state.seed,
            rng,
            draw_count: state.draw_count,
        })
    }
}

impl Iterator for PermutationScheduler {
    type Item = Architecture;

    fn next(&mut self) -> Option<Architecture> {
        Some(self.next_arch())
    }
}

/// Per-(layer, choice) activation counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub draw_count: u64,
    pub counts: Vec<Vec<u64>>,
}

impl FairnessReport {
    /// Max minus min activation count within `layer`.
    pub fn spread(&self, layer: usize) -> u64 {
        let c = &self.counts[layer];
        c.iter().max().copied().unwrap_or(0) - c.iter().min().copied().unwrap_or(0)
    }

    pub fn max_spread(&self) -> u64 {
        (0..self.counts.len())
            .map(|l| self.spread(l))
            .max()
            .unwrap_or(0)
    }
}
