//! Toy weight-sharing supernet with strictly fair training.
//!
//! Every `(layer, choice)` owns a block; a forward pass composes the chosen
//! block of each layer followed by a shared linear classifier. Gradients are
//! accumulated over a window of `lcm(choice counts)` micro-steps, each on a
//! different architecture from the permutation sampler, and then applied
//! once with SGD (momentum, weight decay), each block's gradient divided by
//! the number of times it was selected in the window.

mod block;
mod checkpoint;
mod task;
mod train;

pub use block::{Activation, Block, BlockCache, BlockKind};
pub use checkpoint::{CheckpointHeader, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use task::{Batch, TaskConfig, ToyTask};
pub use train::{train_standalone, TrainingRun, TrainingSummary};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampler::derive_seed;
use crate::scalar::Scalar;
use crate::search::Evaluator;
use crate::searchspace::{Architecture, LayerGroup, SearchSpace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyper {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupernetConfig {
    pub hidden_width: usize,
    pub hyper: Hyper,
    /// Seeds weight initialization and the training sampler.
    pub seed: u64,
}

impl Default for SupernetConfig {
    fn default() -> Self {
        Self {
            hidden_width: 16,
            hyper: Hyper::default(),
            seed: 0,
        }
    }
}

/// Per-sample caches of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    blocks: Vec<Vec<BlockCache<T>>>,
    features: Vec<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupernetState<T> {
    space: SearchSpace,
    input_dim: usize,
    hidden_width: usize,
    num_classes: usize,
    hyper: Hyper,
    seed: u64,
    blocks: Vec<Vec<Block<T>>>,
    block_momentum: Vec<Vec<Vec<Matrix<T>>>>,
    block_grads: Vec<Vec<Vec<Matrix<T>>>>,
    /// `[W (classes × width), b (classes × 1)]`
    head: Vec<Matrix<T>>,
    head_momentum: Vec<Matrix<T>>,
    head_grads: Vec<Matrix<T>>,
    window: usize,
    window_done: usize,
    window_selections: Vec<Vec<u64>>,
    update_counts: Vec<Vec<u64>>,
    macro_steps: u64,
}

impl<T: Scalar> SupernetState<T> {
    pub fn new(
        space: &SearchSpace,
        input_dim: usize,
        num_classes: usize,
        config: &SupernetConfig,
    ) -> Result<Self> {
        let width = config.hidden_width;
        if input_dim == 0 || width == 0 || num_classes < 2 {
            return Err(Error::InvalidConfig(
                "supernet needs positive dimensions and at least two classes".into(),
            ));
        }
        let h = &config.hyper;
        if !(h.learning_rate >= 0.0 && h.momentum >= 0.0 && h.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(
                "hyperparameters must be non-negative".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 100));
        let mut blocks = Vec::with_capacity(space.total_layers());
        for l in 0..space.total_layers() {
            let group = space.group_of(l);
            let in_dim = if l == 0 { input_dim } else { width };
            let layer = group
                .choice_labels()
                .iter()
                .enumerate()
                .map(|(c, label)| {
                    Block::new(BlockKind::from_label(label, c), in_dim, width, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(layer);
        }
        let head = vec![
            Matrix::glorot(num_classes, width, &mut rng),
            Matrix::zeros(num_classes, 1),
        ];
        let zeros = |ms: &[Matrix<T>]| {
            ms.iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect::<Vec<_>>()
        };
        let block_momentum: Vec<Vec<Vec<Matrix<T>>>> = blocks
            .iter()
            .map(|row: &Vec<Block<T>>| row.iter().map(|b| b.zero_like()).collect())
            .collect();
        Ok(Self {
            space: space.clone(),
            input_dim,
            hidden_width: width,
            num_classes,
            hyper: config.hyper,
            seed: config.seed,
            block_grads: block_momentum.clone(),
            block_momentum,
            head_momentum: zeros(&head),
            head_grads: zeros(&head),
            head,
            blocks,
            window: space.choice_lcm(),
            window_done: 0,
            window_selections: space.shape().iter().map(|&p| vec![0; p]).collect(),
            update_counts: space.shape().iter().map(|&p| vec![0; p]).collect(),
            macro_steps: 0,
        })
    }

    /// A one-path network holding only the blocks of `arch`, for training
    /// that architecture standalone.
    pub fn standalone(
        space: &SearchSpace,
        arch: &Architecture,
        input_dim: usize,
        num_classes: usize,
        config: &SupernetConfig,
    ) -> Result<Self> {
        if !space.validate(arch) {
            return Err(Error::ArchitectureMismatch(arch.clone()));
        }
        let groups = arch
            .choices()
            .iter()
            .enumerate()
            .map(|(l, &c)| {
                let kind = BlockKind::from_label(&space.group_of(l).choice_labels()[c], c);
                LayerGroup::new(format!("l{l}"), 1, vec![kind.to_string()])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&SearchSpace::new(groups)?, input_dim, num_classes, config)
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden_width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn hyper(&self) -> Hyper {
        self.hyper
    }

    pub fn set_hyper(&mut self, hyper: Hyper) {
        self.hyper = hyper;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> SupernetConfig {
        SupernetConfig {
            hidden_width: self.hidden_width,
            hyper: self.hyper,
            seed: self.seed,
        }
    }

    /// Micro-steps per parameter update.
    pub fn accumulation_window(&self) -> usize {
        self.window
    }

    pub fn window_progress(&self) -> usize {
        self.window_done
    }

    pub fn macro_steps(&self) -> u64 {
        self.macro_steps
    }

    /// Gradient contributions applied to each block so far.
    pub fn update_counts(&self) -> &[Vec<u64>] {
        &self.update_counts
    }

    pub fn block(&self, layer: usize, choice: usize) -> &Block<T> {
        &self.blocks[layer][choice]
    }

    pub fn block_params_mut(&mut self, layer: usize, choice: usize) -> &mut [Matrix<T>] {
        self.blocks[layer][choice].params_mut()
    }

    pub fn head_params(&self) -> &[Matrix<T>] {
        &self.head
    }

    pub fn head_params_mut(&mut self) -> &mut [Matrix<T>] {
        &mut self.head
    }

    /// Accumulated, unscaled gradient buffer of one block.
    pub fn block_gradients(&self, layer: usize, choice: usize) -> &[Matrix<T>] {
        &self.block_grads[layer][choice]
    }

    pub fn head_gradients(&self) -> &[Matrix<T>] {
        &self.head_grads
    }

    fn check(&self, arch: &Architecture, batch: &Batch<T>) -> Result<()> {
        if !self.space.validate(arch) {
            return Err(Error::ArchitectureMismatch(arch.clone()));
        }
        if batch.is_empty() || batch.inputs.len() != batch.labels.len() {
            return Err(Error::DimensionMismatch("empty or ragged batch".into()));
        }
        if let Some(x) = batch.inputs.iter().find(|x| x.len() != self.input_dim) {
            return Err(Error::DimensionMismatch(format!(
                "input has {} features, supernet expects {}",
                x.len(),
                self.input_dim
            )));
        }
        if batch.labels.iter().any(|&y| y >= self.num_classes) {
            return Err(Error::DimensionMismatch(
                "label outside the class range".into(),
            ));
        }
        Ok(())
    }

    /// Logits of the single-path model `arch` for every sample.
    pub fn forward(
        &self,
        arch: &Architecture,
        batch: &Batch<T>,
    ) -> Result<(Vec<Vec<T>>, ForwardCache<T>)> {
        self.check(arch, batch)?;
        let mut logits = Vec::with_capacity(batch.len());
        let mut cache = ForwardCache {
            blocks: Vec::with_capacity(batch.len()),
            features: Vec::new(),
        };
        for x in &batch.inputs {
            let mut h = x.clone();
            let mut caches = Vec::with_capacity(arch.len());
            for (l, &c) in arch.choices().iter().enumerate() {
                let (y, bc) = self.blocks[l][c].forward(&h);
                caches.push(bc);
                h = y;
            }
            let mut z = self.head[0].matvec(&h);
            for (zi, b) in z.iter_mut().zip(self.head[1].data()) {
                *zi += *b;
            }
            logits.push(z);
            cache.blocks.push(caches);
            cache.features.push(h);
        }
        Ok((logits, cache))
    }

    /// Block `(layer, choice)` parameter `m`, or classifier parameter `m`.
    fn param_matrix(&mut self, block: Option<(usize, usize)>, m: usize) -> &mut Matrix<T> {
        match block {
            Some((l, c)) => &mut self.blocks[l][c].params_mut()[m],
            None => &mut self.head[m],
        }
    }

    /// Drops partially accumulated gradients and window bookkeeping.
    pub fn clear_accumulation(&mut self) {
        for m in self
            .block_grads
            .iter_mut()
            .flatten()
            .flatten()
            .chain(self.head_grads.iter_mut())
        {
            m.fill(T::zero());
        }
        self.window_selections
            .iter_mut()
            .flatten()
            .for_each(|n| *n = 0);
        self.window_done = 0;
    }

    /// Mean cross-entropy of `arch` on `batch`.
    pub fn loss(&self, arch: &Architecture, batch: &Batch<T>) -> Result<T> {
        let (logits, _) = self.forward(arch, batch)?;
        Ok(mean_cross_entropy(&logits, &batch.labels).0)
    }

    /// Adds analytic gradients of the mean cross-entropy into the buffers of
    /// the chosen blocks and the classifier; returns the loss.
    pub fn accumulate_gradients(&mut self, arch: &Architecture, batch: &Batch<T>) -> Result<T> {
        let (logits, cache) = self.forward(arch, batch)?;
        let (loss, grad_logits) = mean_cross_entropy(&logits, &batch.labels);
        for (s, g) in grad_logits.iter().enumerate() {
            let feat = &cache.features[s];
            self.head_grads[0].add_outer(g, feat, T::one());
            for (gb, &gi) in self.head_grads[1].data_mut().iter_mut().zip(g) {
                *gb += gi;
            }
            let mut grad_h = self.head[0].t_matvec(g);
            for (l, &c) in arch.choices().iter().enumerate().rev() {
                grad_h = self.blocks[l][c].backward(
                    &cache.blocks[s][l],
                    &grad_h,
                    &mut self.block_grads[l][c],
                    T::one(),
                );
            }
        }
        for (l, &c) in arch.choices().iter().enumerate() {
            self.window_selections[l][c] += 1;
        }
        self.window_done += 1;
        Ok(loss)
    }

    /// Applies one SGD step from a full accumulation window and clears the
    /// buffers. Unselected blocks are left untouched.
    pub fn macro_step(&mut self) -> Result<()> {
        if self.window_done != self.window {
            return Err(Error::IncompleteWindow {
                done: self.window_done,
                window: self.window,
            });
        }
        let lr = T::of(self.hyper.learning_rate);
        let mu = T::of(self.hyper.momentum);
        let wd = T::of(self.hyper.weight_decay);
        for l in 0..self.blocks.len() {
            for c in 0..self.blocks[l].len() {
                let n = self.window_selections[l][c];
                if n == 0 {
                    continue;
                }
                let scale = T::one() / T::of(n as f64);
                sgd_update(
                    self.blocks[l][c].params_mut(),
                    &mut self.block_momentum[l][c],
                    &mut self.block_grads[l][c],
                    scale,
                    lr,
                    mu,
                    wd,
                );
                self.update_counts[l][c] += n;
                self.window_selections[l][c] = 0;
            }
        }
        let scale = T::one() / T::of_usize(self.window);
        sgd_update(
            &mut self.head,
            &mut self.head_momentum,
            &mut self.head_grads,
            scale,
            lr,
            mu,
            wd,
        );
        self.window_done = 0;
        self.macro_steps += 1;
        Ok(())
    }

    /// Validation accuracy of the single-path model `arch` under the shared
    /// weights.
    pub fn estimate_fitness(&self, arch: &Architecture, batches: &[Batch<T>]) -> Result<T> {
        let mut correct = 0usize;
        let mut total = 0usize;
        for batch in batches {
            let (logits, _) = self.forward(arch, batch)?;
            for (z, &y) in logits.iter().zip(&batch.labels) {
                let pred = crate::search::first_argmax(z.iter().copied()).map_or(0, |(i, _)| i);
                correct += usize::from(pred == y);
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::DimensionMismatch("no validation samples".into()));
        }
        Ok(T::of_usize(correct) / T::of_usize(total))
    }

    /// Total parameter count of all blocks and the classifier.
    pub fn parameter_count(&self) -> usize {
        self.blocks
            .iter()
            .flatten()
            .map(Block::parameter_count)
            .sum::<usize>()
            + self.head.iter().map(|m| m.data().len()).sum::<usize>()
    }
}

/// Per-block max relative errors between analytic gradients and central
/// differences of the mean cross-entropy of `arch` on `batch`, one entry per
/// layer, then one for the classifier.
pub fn gradient_errors<T: Scalar>(
    state: &SupernetState<T>,
    arch: &Architecture,
    batch: &Batch<T>,
    step: T,
) -> Result<Vec<T>> {
    let mut analytic = state.clone();
    analytic.clear_accumulation();
    analytic.accumulate_gradients(arch, batch)?;
    let mut probe = state.clone();
    let mut worst = Vec::with_capacity(arch.len() + 1);
    let check = |probe: &mut SupernetState<T>,
                 target: Option<(usize, usize)>,
                 grads: &[Matrix<T>]|
     -> Result<T> {
        let mut err = T::zero();
        for (m, g) in grads.iter().enumerate() {
            for i in 0..g.data().len() {
                let orig = probe.param_matrix(target, m).data()[i];
                probe.param_matrix(target, m).data_mut()[i] = orig + step;
                let plus = probe.loss(arch, batch)?;
                probe.param_matrix(target, m).data_mut()[i] = orig - step;
                let minus = probe.loss(arch, batch)?;
                probe.param_matrix(target, m).data_mut()[i] = orig;
                let numeric = (plus - minus) / (step + step);
                err = err.max(crate::attention::relative_error(g.data()[i], numeric));
            }
        }
        Ok(err)
    };
    for (l, &c) in arch.choices().iter().enumerate() {
        worst.push(check(
            &mut probe,
            Some((l, c)),
            &analytic.block_grads[l][c],
        )?);
    }
    worst.push(check(&mut probe, None, &analytic.head_grads)?);
    Ok(worst)
}

/// Largest entry of [`gradient_errors`].
pub fn gradient_check<T: Scalar>(
    state: &SupernetState<T>,
    arch: &Architecture,
    batch: &Batch<T>,
    step: T,
) -> Result<T> {
    Ok(gradient_errors(state, arch, batch, step)?
        .into_iter()
        .fold(T::zero(), T::max))
}

fn sgd_update<T: Scalar>(
    params: &mut [Matrix<T>],
    momentum: &mut [Matrix<T>],
    grads: &mut [Matrix<T>],
    scale: T,
    lr: T,
    mu: T,
    wd: T,
) {
    for ((p, v), g) in params
        .iter_mut()
        .zip(momentum.iter_mut())
        .zip(grads.iter_mut())
    {
        for ((w, m), gi) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data_mut()) {
            *m = mu * *m + *gi * scale + wd * *w;
            *w -= lr * *m;
            *gi = T::zero();
        }
    }
}

/// Mean softmax cross-entropy and its gradient w.r.t. the logits.
fn mean_cross_entropy<T: Scalar>(logits: &[Vec<T>], labels: &[usize]) -> (T, Vec<Vec<T>>) {
    let n = T::of_usize(labels.len());
    let mut loss = T::zero();
    let grads = logits
        .iter()
        .zip(labels)
        .map(|(z, &y)| {
            let m = z.iter().copied().fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
            let sum: T = exps.iter().copied().sum();
            loss += sum.ln() + m - z[y];
            exps.iter()
                .enumerate()
                .map(|(k, &e)| (e / sum - if k == y { T::one() } else { T::zero() }) / n)
                .collect()
        })
        .collect();
    (loss / n, grads)
}

/// Shared-weight validation accuracy as a search evaluator.
pub struct SupernetEvaluator<'a, T> {
    pub state: &'a SupernetState<T>,
    pub batches: &'a [Batch<T>],
}

impl<T: Scalar> Evaluator<T> for SupernetEvaluator<'_, T> {
    fn evaluate(&self, arch: &Architecture) -> Result<T> {
        self.state.estimate_fitness(arch, self.batches)
    }
}
