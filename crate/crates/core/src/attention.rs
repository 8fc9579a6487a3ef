//! Bidirectional inter-modular channel attention at toy tensor scale.
//!
//! Channel statistics `z` of one branch (global average pooling over the
//! channel-concatenation of its levels, coarser levels bilinearly upsampled
//! to the finest one) are excited into a non-negative attention vector
//!
//! ```text
//! a = relu(W1 · (1 − sigmoid(W2 · z)))
//! ```
//!
//! which recalibrates each level of the other branch residually,
//! `F' = F + a ⊗ F`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sigmoid, Matrix};
use crate::scalar::Scalar;

/// Reduction ratios offered by the inter-modular search layers.
pub const REDUCTION_RATIOS: [usize; 3] = [4, 8, 16];

/// Dense `C × H × W` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::DimensionMismatch(
                "feature map with an empty dimension".into(),
            ));
        }
        if data.len() != channels * height * width {
            return Err(Error::DimensionMismatch(format!(
                "feature map data has {} values, expected {channels}×{height}×{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(
                "feature map contains non-finite values".into(),
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Bilinear resize with half-pixel centers (align-corners false);
    /// source coordinates below zero clamp to the first pixel.
    pub fn upsample_bilinear(&self, height: usize, width: usize) -> Self {
        if (height, width) == (self.height, self.width) {
            return self.clone();
        }
        let axis = |out: usize, inp: usize| -> Vec<(usize, usize, T)> {
            let scale = inp as f64 / out as f64;
            (0..out)
                .map(|o| {
                    let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
                    let i0 = (src.floor() as usize).min(inp - 1);
                    let i1 = (i0 + 1).min(inp - 1);
                    (i0, i1, T::of(src - i0 as f64))
                })
                .collect()
        };
        let ys = axis(height, self.height);
        let xs = axis(width, self.width);
        let mut data = Vec::with_capacity(self.channels * height * width);
        for c in 0..self.channels {
            for &(y0, y1, ly) in &ys {
                for &(x0, x1, lx) in &xs {
                    let top = self.get(c, y0, x0) * (T::one() - lx) + self.get(c, y0, x1) * lx;
                    let bottom = self.get(c, y1, x0) * (T::one() - lx) + self.get(c, y1, x1) * lx;
                    data.push(top * (T::one() - ly) + bottom * ly);
                }
            }
        }
        Self {
            channels: self.channels,
            height,
            width,
            data,
        }
    }

    /// Spatial mean of every channel.
    pub fn channel_means(&self) -> Vec<T> {
        let n = T::of_usize(self.height * self.width);
        (0..self.channels)
            .map(|c| self.channel(c).iter().copied().sum::<T>() / n)
            .collect()
    }
}

/// Global-average-pooled statistics of the channel concatenation of `maps`,
/// after upsampling every map to the finest resolution present.
pub fn squeeze<T: Scalar>(maps: &[FeatureMap<T>]) -> Result<Vec<T>> {
    let first = maps
        .first()
        .ok_or_else(|| Error::DimensionMismatch("squeeze of an empty map list".into()))?;
    let (mut h, mut w) = first.spatial();
    for m in maps {
        h = h.max(m.height);
        w = w.max(m.width);
    }
    let mut z = Vec::with_capacity(maps.iter().map(|m| m.channels).sum());
    for m in maps {
        z.extend(m.upsample_bilinear(h, w).channel_means());
    }
    Ok(z)
}

/// `F' = F + a ⊗ F`, channel-wise.
pub fn calibrate<T: Scalar>(feature: &FeatureMap<T>, a: &[T]) -> Result<FeatureMap<T>> {
    if a.len() != feature.channels {
        return Err(Error::DimensionMismatch(format!(
            "attention vector has {} entries for {} channels",
            a.len(),
            feature.channels
        )));
    }
    let n = feature.height * feature.width;
    let data = feature
        .data
        .iter()
        .enumerate()
        .map(|(i, &x)| x + a[i / n] * x)
        .collect();
    Ok(FeatureMap { data, ..*feature })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "fg-to-bg")]
    ForegroundToBackground,
    #[serde(rename = "bg-to-fg")]
    BackgroundToForeground,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionBlock<T> {
    source_channels: usize,
    target_channels: usize,
    ratio: usize,
    /// `C_s × C_s/r`
    w1: Matrix<T>,
    /// `C_s/r × C_r`
    w2: Matrix<T>,
    direction: Direction,
}

/// Intermediate values of one excitation, kept for backprop.
#[derive(Clone, Debug)]
pub struct ExciteCache<T> {
    /// `W2 · z`
    pub pre_gate: Vec<T>,
    /// `1 − sigmoid(W2 · z)`
    pub gate: Vec<T>,
    /// `W1 · gate`
    pub pre_attention: Vec<T>,
    pub attention: Vec<T>,
}

/// Gradients of a scalar w.r.t. a block's weights and its input statistics.
/// Calibrated foreground and background feature levels.
pub type CalibratedPair<T> = (Vec<FeatureMap<T>>, Vec<FeatureMap<T>>);

#[derive(Clone, Debug)]
pub struct AttentionGrads<T> {
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
    pub z: Vec<T>,
}

impl<T: Scalar> AttentionBlock<T> {
    pub fn new(
        source_channels: usize,
        target_channels: usize,
        ratio: usize,
        direction: Direction,
        w1: Matrix<T>,
        w2: Matrix<T>,
    ) -> Result<Self> {
        let hidden = Self::hidden_width(target_channels, ratio)?;
        if source_channels == 0 {
            return Err(Error::DimensionMismatch(
                "attention block without source channels".into(),
            ));
        }
        if (w1.rows(), w1.cols()) != (target_channels, hidden)
            || (w2.rows(), w2.cols()) != (hidden, source_channels)
        {
            return Err(Error::DimensionMismatch(format!(
                "W1 must be {target_channels}×{hidden} and W2 {hidden}×{source_channels}, got {}×{} and {}×{}",
                w1.rows(),
                w1.cols(),
                w2.rows(),
                w2.cols()
            )));
        }
        Ok(Self {
            source_channels,
            target_channels,
            ratio,
            w1,
            w2,
            direction,
        })
    }

    /// Glorot-uniform weights.
    pub fn random<R: Rng>(
        source_channels: usize,
        target_channels: usize,
        ratio: usize,
        direction: Direction,
        rng: &mut R,
    ) -> Result<Self> {
        let hidden = Self::hidden_width(target_channels, ratio)?;
        let w1 = Matrix::glorot(target_channels, hidden, rng);
        let w2 = Matrix::glorot(hidden, source_channels, rng);
        Self::new(source_channels, target_channels, ratio, direction, w1, w2)
    }

    fn hidden_width(target_channels: usize, ratio: usize) -> Result<usize> {
        if ratio == 0 || target_channels == 0 || !target_channels.is_multiple_of(ratio) {
            return Err(Error::DimensionMismatch(format!(
                "target channels {target_channels} not divisible by reduction ratio {ratio}"
            )));
        }
        Ok(target_channels / ratio)
    }

    /// `C_s · C_s/r + C_s/r · C_r`
    pub fn parameter_count_for(
        target_channels: usize,
        source_channels: usize,
        ratio: usize,
    ) -> usize {
        let hidden = target_channels / ratio;
        target_channels * hidden + hidden * source_channels
    }

    pub fn parameter_count(&self) -> usize {
        Self::parameter_count_for(self.target_channels, self.source_channels, self.ratio)
    }

    pub fn source_channels(&self) -> usize {
        self.source_channels
    }

    pub fn target_channels(&self) -> usize {
        self.target_channels
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn w1(&self) -> &Matrix<T> {
        &self.w1
    }

    pub fn w2(&self) -> &Matrix<T> {
        &self.w2
    }

    pub fn w1_mut(&mut self) -> &mut Matrix<T> {
        &mut self.w1
    }

    pub fn w2_mut(&mut self) -> &mut Matrix<T> {
        &mut self.w2
    }

    pub fn excite(&self, z: &[T]) -> Result<Vec<T>> {
        Ok(self.excite_cached(z)?.attention)
    }

    pub fn excite_cached(&self, z: &[T]) -> Result<ExciteCache<T>> {
        if z.len() != self.source_channels {
            return Err(Error::DimensionMismatch(format!(
                "statistics vector has {} entries, block expects {}",
                z.len(),
                self.source_channels
            )));
        }
        Ok(excite_raw(&self.w1, &self.w2, z))
    }

    /// Backpropagates `d/da` through the excitation. The ReLU subgradient
    /// at exactly zero is zero.
    pub fn backward(
        &self,
        z: &[T],
        cache: &ExciteCache<T>,
        grad_attention: &[T],
    ) -> AttentionGrads<T> {
        backward_raw(&self.w1, &self.w2, z, cache, grad_attention)
    }
}

pub(crate) fn excite_raw<T: Scalar>(w1: &Matrix<T>, w2: &Matrix<T>, z: &[T]) -> ExciteCache<T> {
    let pre_gate = w2.matvec(z);
    let gate: Vec<T> = pre_gate.iter().map(|&h| T::one() - sigmoid(h)).collect();
    let pre_attention = w1.matvec(&gate);
    let attention = pre_attention.iter().map(|&u| u.max(T::zero())).collect();
    ExciteCache {
        pre_gate,
        gate,
        pre_attention,
        attention,
    }
}

pub(crate) fn backward_raw<T: Scalar>(
    w1: &Matrix<T>,
    w2: &Matrix<T>,
    z: &[T],
    cache: &ExciteCache<T>,
    grad_attention: &[T],
) -> AttentionGrads<T> {
    let grad_pre: Vec<T> = grad_attention
        .iter()
        .zip(&cache.pre_attention)
        .map(|(&g, &u)| if u > T::zero() { g } else { T::zero() })
        .collect();
    let mut grad_w1 = Matrix::zeros(w1.rows(), w1.cols());
    grad_w1.add_outer(&grad_pre, &cache.gate, T::one());
    let grad_gate = w1.t_matvec(&grad_pre);
    // d(1 − σ(h))/dh = −σ(h)(1 − σ(h))
    let grad_h: Vec<T> = grad_gate
        .iter()
        .zip(&cache.pre_gate)
        .map(|(&g, &h)| {
            let s = sigmoid(h);
            -g * s * (T::one() - s)
        })
        .collect();
    let mut grad_w2 = Matrix::zeros(w2.rows(), w2.cols());
    grad_w2.add_outer(&grad_h, z, T::one());
    let grad_z = w2.t_matvec(&grad_h);
    AttentionGrads {
        w1: grad_w1,
        w2: grad_w2,
        z: grad_z,
    }
}

/// Attention between a foreground hierarchy (e.g. five RPN levels) and a
/// background hierarchy (e.g. four semantic levels): one block per target
/// level and direction, all sharing one reduction ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct InterModularAttention<T> {
    /// Calibrates background level `i` from foreground statistics.
    fg_to_bg: Vec<AttentionBlock<T>>,
    /// Calibrates foreground level `i` from background statistics.
    bg_to_fg: Vec<AttentionBlock<T>>,
}

impl<T: Scalar> InterModularAttention<T> {
    pub fn random<R: Rng>(
        foreground_channels: &[usize],
        background_channels: &[usize],
        ratio: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let fg_total: usize = foreground_channels.iter().sum();
        let bg_total: usize = background_channels.iter().sum();
        let fg_to_bg = background_channels
            .iter()
            .map(|&c| {
                AttentionBlock::random(fg_total, c, ratio, Direction::ForegroundToBackground, rng)
            })
            .collect::<Result<_>>()?;
        let bg_to_fg = foreground_channels
            .iter()
            .map(|&c| {
                AttentionBlock::random(bg_total, c, ratio, Direction::BackgroundToForeground, rng)
            })
            .collect::<Result<_>>()?;
        Ok(Self { fg_to_bg, bg_to_fg })
    }

    pub fn parameter_count(&self) -> usize {
        self.fg_to_bg
            .iter()
            .chain(&self.bg_to_fg)
            .map(AttentionBlock::parameter_count)
            .sum()
    }

    /// Both directions read pre-calibration statistics. Returns the calibrated
    /// foreground and background levels.
    pub fn apply(
        &self,
        foreground: &[FeatureMap<T>],
        background: &[FeatureMap<T>],
    ) -> Result<CalibratedPair<T>> {
        if foreground.len() != self.bg_to_fg.len() || background.len() != self.fg_to_bg.len() {
            return Err(Error::DimensionMismatch(
                "level count differs from block count".into(),
            ));
        }
        let z_fg = squeeze(foreground)?;
        let z_bg = squeeze(background)?;
        let fg_out = foreground
            .iter()
            .zip(&self.bg_to_fg)
            .map(|(f, b)| calibrate(f, &b.excite(&z_bg)?))
            .collect::<Result<_>>()?;
        let bg_out = background
            .iter()
            .zip(&self.fg_to_bg)
            .map(|(s, b)| calibrate(s, &b.excite(&z_fg)?))
            .collect::<Result<_>>()?;
        Ok((fg_out, bg_out))
    }
}

/// Max relative error between analytic and central-difference gradients of
/// `sum(calibrate(target, excite(squeeze(sources))))` w.r.t. `W1` and `W2`.
pub fn gradient_check_attention<T: Scalar>(
    block: &AttentionBlock<T>,
    sources: &[FeatureMap<T>],
    target: &FeatureMap<T>,
    step: T,
) -> Result<T> {
    let [w1, w2] = gradient_errors_attention(block, sources, target, step)?;
    Ok(w1.max(w2))
}

/// Per-matrix max relative errors `[W1, W2]`; see [`gradient_check_attention`].
pub fn gradient_errors_attention<T: Scalar>(
    block: &AttentionBlock<T>,
    sources: &[FeatureMap<T>],
    target: &FeatureMap<T>,
    step: T,
) -> Result<[T; 2]> {
    let z = squeeze(sources)?;
    let readout = |b: &AttentionBlock<T>| -> Result<T> {
        Ok(calibrate(target, &b.excite(&z)?)?
            .data()
            .iter()
            .copied()
            .sum())
    };
    let cache = block.excite_cached(&z)?;
    if target.channels() != block.target_channels {
        return Err(Error::DimensionMismatch(
            "target channels differ from the block".into(),
        ));
    }
    // d(sum F')/da_c = sum over the channel's pixels
    let grad_a: Vec<T> = (0..target.channels())
        .map(|c| target.channel(c).iter().copied().sum())
        .collect();
    let grads = block.backward(&z, &cache, &grad_a);

    let mut worst = [T::zero(); 2];
    let mut probe = block.clone();
    for (which, worst) in worst.iter_mut().enumerate() {
        let n = if which == 0 {
            block.w1.data().len()
        } else {
            block.w2.data().len()
        };
        for i in 0..n {
            let orig = weights_mut(&mut probe, which)[i];
            weights_mut(&mut probe, which)[i] = orig + step;
            let plus = readout(&probe)?;
            weights_mut(&mut probe, which)[i] = orig - step;
            let minus = readout(&probe)?;
            weights_mut(&mut probe, which)[i] = orig;
            let numeric = (plus - minus) / (step + step);
            let analytic = if which == 0 {
                grads.w1.data()[i]
            } else {
                grads.w2.data()[i]
            };
            *worst = worst.max(relative_error(analytic, numeric));
        }
    }
    Ok(worst)
}

fn weights_mut<T: Scalar>(b: &mut AttentionBlock<T>, which: usize) -> &mut [T] {
    if which == 0 {
        b.w1.data_mut()
    } else {
        b.w2.data_mut()
    }
}

/// `|a − n| / max(|a|, |n|)`, zero when both vanish below `1e-10`.
pub fn relative_error<T: Scalar>(analytic: T, numeric: T) -> T {
    let scale = analytic.abs().max(numeric.abs());
    if scale < T::of(1e-10) {
        T::zero()
    } else {
        (analytic - numeric).abs() / scale
    }
}
