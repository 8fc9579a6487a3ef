//! Synthetic fitness landscapes with exact brute-force optima.
//!
//! Fitness is the sum of per-path utilities, pairwise interaction terms whose
//! two endpoints are both selected, and a noise term that is a pure hash of
//! `(seed, architecture)`. Re-evaluating an architecture always returns the
//! same value.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::search::Evaluator;
use crate::searchspace::{Architecture, SearchSpace};

pub const LANDSCAPE_FORMAT: &str = "pathnas-landscape";
pub const LANDSCAPE_VERSION: u32 = 1;

/// A `(layer, choice)` pair.
pub type Path = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandscapeKind {
    Separable,
    Interacting,
    Noisy,
}

impl FromStr for LandscapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separable" => Ok(Self::Separable),
            "interacting" => Ok(Self::Interacting),
            "noisy" => Ok(Self::Noisy),
            other => Err(Error::UnknownLandscapeKind(other.to_string())),
        }
    }
}

impl fmt::Display for LandscapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Separable => "separable",
            Self::Interacting => "interacting",
            Self::Noisy => "noisy",
        })
    }
}

/// Knobs for [`FitnessLandscape::generate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeParams {
    /// Number of pairwise terms for `interacting` landscapes.
    pub interaction_count: usize,
    /// Interaction weights are uniform in `[-scale, scale]`.
    pub interaction_scale: f64,
    /// Noise standard deviation for `noisy` landscapes.
    pub noise_sigma: f64,
}

impl Default for LandscapeParams {
    fn default() -> Self {
        Self {
            interaction_count: 10,
            interaction_scale: 0.3,
            noise_sigma: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitnessLandscape<T> {
    shape: Vec<usize>,
    unary: Vec<Vec<T>>,
    pairwise: BTreeMap<(Path, Path), T>,
    noise_sigma: T,
    seed: u64,
}

impl<T: Scalar> FitnessLandscape<T> {
    /// Landscape from explicit tables. `pairwise` keys must satisfy
    /// `layer_a < layer_b` and reference valid paths.
    pub fn from_parts(
        shape: Vec<usize>,
        unary: Vec<Vec<T>>,
        pairwise: BTreeMap<(Path, Path), T>,
        noise_sigma: T,
        seed: u64,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidLandscape(m));
        if unary.len() != shape.len() || unary.iter().zip(&shape).any(|(u, &p)| u.len() != p) {
            return bad("unary table does not match the space shape".into());
        }
        if shape.contains(&0) {
            return bad("layer with no choices".into());
        }
        for &((la, ca), (lb, cb)) in pairwise.keys() {
            if la >= lb || lb >= shape.len() || ca >= shape[la] || cb >= shape[lb] {
                return bad(format!("invalid pairwise key (({la},{ca}),({lb},{cb}))"));
            }
        }
        if noise_sigma < T::zero() || !noise_sigma.is_finite() {
            return bad("noise_sigma must be finite and non-negative".into());
        }
        let finite = unary
            .iter()
            .flatten()
            .chain(pairwise.values())
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite utility".into());
        }
        Ok(Self {
            shape,
            unary,
            pairwise,
            noise_sigma,
            seed,
        })
    }

    /// Seeded landscape: unary utilities i.i.d. uniform in `[0, 1)`, plus
    /// pairwise terms (`interacting`) or noise (`noisy`).
    pub fn generate(
        space: &SearchSpace,
        kind: LandscapeKind,
        seed: u64,
        params: &LandscapeParams,
    ) -> Result<Self> {
        let shape = space.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unary: Vec<Vec<T>> = shape
            .iter()
            .map(|&p| (0..p).map(|_| T::of(rng.gen::<f64>())).collect())
            .collect();
        let mut pairwise = BTreeMap::new();
        let mut noise_sigma = T::zero();
        match kind {
            LandscapeKind::Separable => {}
            LandscapeKind::Noisy => {
                if params.noise_sigma.is_nan() || params.noise_sigma <= 0.0 {
                    return Err(Error::InvalidLandscape(
                        "noisy landscape needs noise_sigma > 0".into(),
                    ));
                }
                noise_sigma = T::of(params.noise_sigma);
            }
            LandscapeKind::Interacting => {
                let available: usize = (0..shape.len())
                    .flat_map(|a| (a + 1..shape.len()).map(move |b| (a, b)))
                    .map(|(a, b)| shape[a] * shape[b])
                    .sum();
                if params.interaction_count > available {
                    return Err(Error::InvalidLandscape(format!(
                        "{} interactions requested but only {available} distinct pairs exist",
                        params.interaction_count
                    )));
                }
                let scale = params.interaction_scale;
                while pairwise.len() < params.interaction_count {
                    let la = rng.gen_range(0..shape.len());
                    let lb = rng.gen_range(0..shape.len());
                    if la == lb {
                        continue;
                    }
                    let (la, lb) = (la.min(lb), la.max(lb));
                    let key = (
                        (la, rng.gen_range(0..shape[la])),
                        (lb, rng.gen_range(0..shape[lb])),
                    );
                    let w = T::of(rng.gen_range(-1.0..=1.0) * scale);
                    pairwise.entry(key).or_insert(w);
                }
            }
        }
        Self::from_parts(shape, unary, pairwise, noise_sigma, seed)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn unary(&self) -> &[Vec<T>] {
        &self.unary
    }

    pub fn set_unary(&mut self, layer: usize, choice: usize, value: T) {
        self.unary[layer][choice] = value;
    }

    pub fn pairwise(&self) -> &BTreeMap<(Path, Path), T> {
        &self.pairwise
    }

    pub fn noise_sigma(&self) -> T {
        self.noise_sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fits(&self, arch: &Architecture) -> bool {
        arch.len() == self.shape.len()
            && arch.choices().iter().zip(&self.shape).all(|(&c, &p)| c < p)
    }

    /// True when the landscape was built over a space of this shape.
    pub fn matches_space(&self, space: &SearchSpace) -> bool {
        self.shape == space.shape()
    }

    pub fn fitness(&self, arch: &Architecture) -> Result<T> {
        if !self.fits(arch) {
            return Err(Error::ArchitectureMismatch(arch.clone()));
        }
        let c = arch.choices();
        let mut total: T = c.iter().enumerate().map(|(l, &ch)| self.unary[l][ch]).sum();
        for (&((la, ca), (lb, cb)), &w) in &self.pairwise {
            if c[la] == ca && c[lb] == cb {
                total += w;
            }
        }
        if self.noise_sigma > T::zero() {
            total += self.noise_sigma * T::of(hashed_normal(self.seed, c));
        }
        Ok(total)
    }

    /// Exhaustive maximum; ties go to the lexicographically smallest vector.
    pub fn brute_force_optimum(&self, cap: u64) -> Result<(Architecture, T)> {
        let space = self.space()?;
        let mut best: Option<(Architecture, T)> = None;
        for arch in space.enumerate_all(cap)? {
            let f = self.fitness(&arch)?;
            if best.as_ref().is_none_or(|(_, b)| f > *b) {
                best = Some((arch, f));
            }
        }
        Ok(best.expect("a valid space has at least one architecture"))
    }

    /// Anonymous space of this landscape's shape.
    pub fn space(&self) -> Result<SearchSpace> {
        use crate::searchspace::LayerGroup;
        let groups = self
            .shape
            .iter()
            .enumerate()
            .map(|(l, &p)| LayerGroup::anonymous(format!("l{l}"), 1, p))
            .collect::<Result<Vec<_>>>()?;
        SearchSpace::new(groups)
    }

    pub fn to_document(&self) -> LandscapeDocument {
        LandscapeDocument {
            format: LANDSCAPE_FORMAT.to_string(),
            version: LANDSCAPE_VERSION,
            shape: self.shape.clone(),
            unary: self
                .unary
                .iter()
                .map(|r| r.iter().map(|v| v.as_f64()).collect())
                .collect(),
            pairwise: self
                .pairwise
                .iter()
                .map(|(&(a, b), w)| PairTerm {
                    a: [a.0, a.1],
                    b: [b.0, b.1],
                    weight: w.as_f64(),
                })
                .collect(),
            noise_sigma: self.noise_sigma.as_f64(),
            seed: self.seed,
        }
    }

    pub fn from_document(doc: &LandscapeDocument) -> Result<Self> {
        if doc.format != LANDSCAPE_FORMAT || doc.version != LANDSCAPE_VERSION {
            return Err(Error::InvalidLandscape(format!(
                "unsupported document {} v{}",
                doc.format, doc.version
            )));
        }
        let mut pairwise = BTreeMap::new();
        for t in &doc.pairwise {
            let key = ((t.a[0], t.a[1]), (t.b[0], t.b[1]));
            if pairwise.insert(key, T::of(t.weight)).is_some() {
                return Err(Error::InvalidLandscape(format!(
                    "duplicate pairwise key {key:?}"
                )));
            }
        }
        Self::from_parts(
            doc.shape.clone(),
            doc.unary
                .iter()
                .map(|r| r.iter().map(|&v| T::of(v)).collect())
                .collect(),
            pairwise,
            T::of(doc.noise_sigma),
            doc.seed,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

impl<T: Scalar> Evaluator<T> for FitnessLandscape<T> {
    fn evaluate(&self, arch: &Architecture) -> Result<T> {
        self.fitness(arch)
    }
}

/// Versioned textual form of a landscape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeDocument {
    pub format: String,
    pub version: u32,
    pub shape: Vec<usize>,
    pub unary: Vec<Vec<f64>>,
    pub pairwise: Vec<PairTerm>,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairTerm {
    pub a: [usize; 2],
    pub b: [usize; 2],
    pub weight: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_arch(seed: u64, choices: &[usize], salt: u64) -> u64 {
    let mut h = splitmix64(seed ^ salt.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    h = splitmix64(h ^ choices.len() as u64);
    for &c in choices {
        h = splitmix64(h ^ c as u64);
    }
    h
}

/// Standard normal deviate determined by `(seed, choices)` alone.
fn hashed_normal(seed: u64, choices: &[usize]) -> f64 {
    let unit = |h: u64| ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u1 = unit(hash_arch(seed, choices, 1));
    let u2 = unit(hash_arch(seed, choices, 2));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
