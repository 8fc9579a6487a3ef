use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::searchspace::{Architecture, SearchSpace};

/// Accumulated per-path scores across search cycles.
#[derive(Clone, Debug, PartialEq)]
pub struct Leaderboard<T> {
    scores: Vec<Vec<T>>,
    occurrences: Vec<Vec<u64>>,
    cycles: usize,
}

/// Per-layer argmax of a leaderboard.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub architecture: Architecture,
    /// Layers whose maximum score was shared by several choices; the lowest
    /// choice index was taken.
    pub tied_layers: Vec<usize>,
}

/// Competition ranks, best = 1; tied values share the better rank.
pub fn competition_ranks<T: PartialOrd>(fitness: &[T]) -> Vec<usize> {
    fitness
        .iter()
        .map(|f| 1 + fitness.iter().filter(|g| *g > f).count())
        .collect()
}

impl<T: Scalar> Leaderboard<T> {
    pub fn new(shape: &[usize]) -> Self {
        Self {
            scores: shape.iter().map(|&p| vec![T::zero(); p]).collect(),
            occurrences: shape.iter().map(|&p| vec![0; p]).collect(),
            cycles: 0,
        }
    }

    pub fn scores(&self) -> &[Vec<T>] {
        &self.scores
    }

    pub fn occurrences(&self) -> &[Vec<u64>] {
        &self.occurrences
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    /// Ranks one cycle's models and awards `k − rank` to every path of each
    /// model. Returns the ranks in draw order.
    pub fn record_cycle(&mut self, results: &[(Architecture, T)], k: T) -> Vec<usize> {
        let fitness: Vec<T> = results.iter().map(|(_, f)| *f).collect();
        let ranks = competition_ranks(&fitness);
        for ((arch, _), &rank) in results.iter().zip(&ranks) {
            let award = k - T::of_usize(rank);
            for (l, &c) in arch.choices().iter().enumerate() {
                self.scores[l][c] += award;
                self.occurrences[l][c] += 1;
            }
        }
        self.cycles += 1;
        ranks
    }

    /// Highest-scoring choice per layer, lowest index on ties.
    pub fn select_best(&self) -> Result<Selection> {
        if self.cycles == 0 {
            return Err(Error::EmptyLeaderboard);
        }
        let mut choices = Vec::with_capacity(self.scores.len());
        let mut tied_layers = Vec::new();
        for (l, row) in self.scores.iter().enumerate() {
            let (best, top) =
                super::first_argmax(row.iter().copied()).expect("layers have choices");
            if row.iter().filter(|&&s| s == top).count() > 1 {
                tied_layers.push(l);
            }
            choices.push(best);
        }
        Ok(Selection {
            architecture: Architecture::new(choices),
            tied_layers,
        })
    }

    /// Plain-text matrix, one line per layer: `layer group: score/occurrences ...`.
    pub fn to_text(&self, space: &SearchSpace) -> String {
        let mut out = format!(
            "# leaderboard after {} cycles (score/occurrences per choice)\n",
            self.cycles
        );
        for (l, (row, occ)) in self.scores.iter().zip(&self.occurrences).enumerate() {
            let group = if l < space.total_layers() {
                space.group_of(l).name()
            } else {
                "?"
            };
            let _ = write!(out, "{l:>4} {group:<10}");
            for (s, o) in row.iter().zip(occ) {
                let _ = write!(out, " {}/{}", s.as_f64(), o);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(v: &[usize]) -> Architecture {
        Architecture::new(v.to_vec())
    }

    #[test]
    fn ranks_share_the_better_position() {
        assert_eq!(competition_ranks(&[0.9, 0.5, 0.7]), vec![1, 3, 2]);
        assert_eq!(competition_ranks(&[1.0, 1.0, 1.0]), vec![1, 1, 1]);
        assert_eq!(competition_ranks(&[0.2, 0.8, 0.8, 0.1]), vec![3, 1, 1, 4]);
    }

    #[test]
    fn awards_follow_k_minus_rank() {
        let mut lb = Leaderboard::<f64>::new(&[3]);
        let results = vec![(arch(&[0]), 0.9), (arch(&[1]), 0.5), (arch(&[2]), 0.7)];
        let ranks = lb.record_cycle(&results, 3.0);
        assert_eq!(ranks, vec![1, 3, 2]);
        assert_eq!(lb.scores()[0], vec![2.0, 0.0, 1.0]);
        assert_eq!(lb.occurrences()[0], vec![1, 1, 1]);
    }

    #[test]
    fn equal_fitness_gives_everyone_k_minus_one() {
        let mut lb = Leaderboard::<f64>::new(&[3, 3]);
        let results = vec![
            (arch(&[0, 1]), 0.4),
            (arch(&[1, 2]), 0.4),
            (arch(&[2, 0]), 0.4),
        ];
        lb.record_cycle(&results, 3.0);
        assert!(lb.scores().iter().flatten().all(|&s| s == 2.0));
    }

    #[test]
    fn select_best_is_argmax_with_low_index_ties() {
        let mut lb = Leaderboard::<f64>::new(&[3, 3]);
        lb.scores = vec![vec![5.0, 9.0, 2.0], vec![7.0, 7.0, 1.0]];
        lb.cycles = 1;
        let sel = lb.select_best().unwrap();
        assert_eq!(sel.architecture, arch(&[1, 0]));
        assert_eq!(sel.tied_layers, vec![1]);
    }

    #[test]
    fn empty_leaderboard_cannot_select() {
        let lb = Leaderboard::<f64>::new(&[2]);
        assert!(matches!(lb.select_best(), Err(Error::EmptyLeaderboard)));
    }
}
