//! Choice blocks of the toy supernet.
//!
//! Affine blocks compute `mask ⊙ act(W x + b)` where the mask keeps the
//! first `active` units, which is how narrow choices are expressed while
//! every block of a layer keeps identical parameter shapes. Attention blocks
//! compute `x + relu(W1 (1 − σ(W2 x))) ⊙ x` on the hidden vector, i.e. the
//! inter-modular channel attention with `1 × 1` spatial extent.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{backward_raw, excite_raw, ExciteCache};
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
    Softplus,
}

impl Activation {
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Self::Relu => x.max(T::zero()),
            Self::Tanh => x.tanh(),
            Self::Linear => x,
            Self::Softplus => {
                // ln(1 + e^x) without overflow
                x.max(T::zero()) + (T::one() + (-x.abs()).exp()).ln()
            }
        }
    }

    /// Derivative at pre-activation `x` given output `y`.
    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Self::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Tanh => T::one() - y * y,
            Self::Linear => T::one(),
            Self::Softplus => sigmoid(x),
        }
    }
}

/// What a choice label stands for inside the toy supernet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BlockKind {
    Affine {
        activation: Activation,
        narrow: bool,
    },
    Attention {
        ratio: usize,
    },
}

const FALLBACK_KINDS: [BlockKind; 6] = [
    BlockKind::Affine {
        activation: Activation::Relu,
        narrow: false,
    },
    BlockKind::Affine {
        activation: Activation::Tanh,
        narrow: false,
    },
    BlockKind::Affine {
        activation: Activation::Relu,
        narrow: true,
    },
    BlockKind::Affine {
        activation: Activation::Softplus,
        narrow: false,
    },
    BlockKind::Affine {
        activation: Activation::Tanh,
        narrow: true,
    },
    BlockKind::Affine {
        activation: Activation::Softplus,
        narrow: true,
    },
];

impl BlockKind {
    /// Maps a choice label to a block kind.
    ///
    /// Recognized labels are `relu`, `tanh`, `linear`, `softplus`, each
    /// optionally suffixed `-narrow`, and `r<k>` / `attn-r<k>` for attention
    /// with reduction ratio `k`. Anything else falls back on the choice index:
    /// relu, tanh, relu-narrow, softplus, tanh-narrow, softplus-narrow.
    /// Linear blocks are never a fallback since stacks of them train unstably.
    pub fn from_label(label: &str, choice_index: usize) -> Self {
        let lower = label.to_ascii_lowercase();
        let ratio = lower
            .strip_prefix("attn-")
            .unwrap_or(&lower)
            .strip_prefix('r')
            .and_then(|r| r.parse().ok());
        if let Some(ratio) = ratio {
            return Self::Attention { ratio };
        }
        let (base, narrow) = match lower.strip_suffix("-narrow") {
            Some(b) => (b, true),
            None => (lower.as_str(), false),
        };
        let activation = match base {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "linear" => Activation::Linear,
            "softplus" => Activation::Softplus,
            _ => return FALLBACK_KINDS[choice_index % FALLBACK_KINDS.len()],
        };
        Self::Affine { activation, narrow }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Affine { activation, narrow } => {
                write!(f, "{}", format!("{activation:?}").to_ascii_lowercase())?;
                if *narrow {
                    f.write_str("-narrow")?;
                }
                Ok(())
            }
            Self::Attention { ratio } => write!(f, "attn-r{ratio}"),
        }
    }
}

/// Per-sample values a block keeps for its backward pass.
#[derive(Clone, Debug)]
pub enum BlockCache<T> {
    Affine {
        input: Vec<T>,
        pre: Vec<T>,
        output: Vec<T>,
    },
    Attention {
        input: Vec<T>,
        excite: ExciteCache<T>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block<T> {
    kind: BlockKind,
    input_dim: usize,
    width: usize,
    /// Affine: `[W (width × input), b (width × 1)]`; attention: `[W1, W2]`.
    params: Vec<Matrix<T>>,
}

impl<T: Scalar> Block<T> {
    pub fn new<R: Rng>(
        kind: BlockKind,
        input_dim: usize,
        width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let params = match kind {
            BlockKind::Affine { narrow, .. } => {
                if narrow && width < 2 {
                    return Err(Error::InvalidConfig(
                        "narrow block needs width of at least 2".into(),
                    ));
                }
                vec![
                    Matrix::glorot(width, input_dim, rng),
                    Matrix::zeros(width, 1),
                ]
            }
            BlockKind::Attention { ratio } => {
                if input_dim != width {
                    return Err(Error::InvalidConfig(format!(
                        "attention block needs equal input and width, got {input_dim} and {width}"
                    )));
                }
                if ratio == 0 || !width.is_multiple_of(ratio) {
                    return Err(Error::InvalidConfig(format!(
                        "width {width} not divisible by reduction ratio {ratio}"
                    )));
                }
                vec![
                    Matrix::glorot(width, width / ratio, rng),
                    Matrix::glorot(width / ratio, width, rng),
                ]
            }
        };
        Ok(Self {
            kind,
            input_dim,
            width,
            params,
        })
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn params(&self) -> &[Matrix<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Matrix<T>] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|m| m.data().len()).sum()
    }

    /// Units that can be nonzero in the output.
    pub fn active_units(&self) -> usize {
        match self.kind {
            BlockKind::Affine { narrow: true, .. } => self.width / 2,
            _ => self.width,
        }
    }

    pub fn forward(&self, x: &[T]) -> (Vec<T>, BlockCache<T>) {
        debug_assert_eq!(x.len(), self.input_dim);
        match self.kind {
            BlockKind::Affine { activation, .. } => {
                let active = self.active_units();
                let (w, b) = (&self.params[0], &self.params[1]);
                let mut pre = w.matvec(x);
                for (p, bias) in pre.iter_mut().zip(b.data()) {
                    *p += *bias;
                }
                let output: Vec<T> = pre
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        if i < active {
                            activation.apply(p)
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                (
                    output.clone(),
                    BlockCache::Affine {
                        input: x.to_vec(),
                        pre,
                        output,
                    },
                )
            }
            BlockKind::Attention { .. } => {
                let excite = excite_raw(&self.params[0], &self.params[1], x);
                let y = x
                    .iter()
                    .zip(&excite.attention)
                    .map(|(&v, &a)| v + a * v)
                    .collect();
                (
                    y,
                    BlockCache::Attention {
                        input: x.to_vec(),
                        excite,
                    },
                )
            }
        }
    }

    /// Adds `scale ×` parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(
        &self,
        cache: &BlockCache<T>,
        grad_y: &[T],
        grads: &mut [Matrix<T>],
        scale: T,
    ) -> Vec<T> {
        match (self.kind, cache) {
            (BlockKind::Affine { activation, .. }, BlockCache::Affine { input, pre, output }) => {
                let active = self.active_units();
                let grad_pre: Vec<T> = (0..self.width)
                    .map(|i| {
                        if i < active {
                            grad_y[i] * activation.derivative(pre[i], output[i])
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                grads[0].add_outer(&grad_pre, input, scale);
                for (g, &d) in grads[1].data_mut().iter_mut().zip(&grad_pre) {
                    *g += d * scale;
                }
                self.params[0].t_matvec(&grad_pre)
            }
            (BlockKind::Attention { .. }, BlockCache::Attention { input, excite }) => {
                // y = x + a(x) ⊙ x
                let grad_a: Vec<T> = grad_y.iter().zip(input).map(|(&g, &x)| g * x).collect();
                let g = backward_raw(&self.params[0], &self.params[1], input, excite, &grad_a);
                for (dst, src) in grads[0].data_mut().iter_mut().zip(g.w1.data()) {
                    *dst += *src * scale;
                }
                for (dst, src) in grads[1].data_mut().iter_mut().zip(g.w2.data()) {
                    *dst += *src * scale;
                }
                grad_y
                    .iter()
                    .zip(&excite.attention)
                    .zip(&g.z)
                    .map(|((&gy, &a), &gz)| gy * (T::one() + a) + gz)
                    .collect()
            }
            _ => unreachable!("cache produced by a block of another kind"),
        }
    }

    pub fn zero_like(&self) -> Vec<Matrix<T>> {
        self.params
            .iter()
            .map(|m| Matrix::zeros(m.rows(), m.cols()))
            .collect()
    }
}
