//! Layered search spaces, architecture encoding and exact cardinality.
//!
//! Layers are indexed globally and contiguously across groups in declaration
//! order, so layer `0` is the first layer of the first group.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on `space_size` for [`SearchSpace::enumerate_all`].
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// A run of identical search layers sharing one set of candidate operators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGroup {
    name: String,
    num_layers: usize,
    choice_labels: Vec<String>,
}

impl LayerGroup {
    pub fn new<S: Into<String>>(
        name: S,
        num_layers: usize,
        choice_labels: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if num_layers == 0 {
            return Err(Error::InvalidSpace(format!("group {name:?} has no layers")));
        }
        if choice_labels.is_empty() {
            return Err(Error::InvalidSpace(format!(
                "group {name:?} has no choices"
            )));
        }
        for (i, label) in choice_labels.iter().enumerate() {
            if choice_labels[..i].contains(label) {
                return Err(Error::InvalidSpace(format!(
                    "group {name:?} repeats choice label {label:?}"
                )));
            }
        }
        Ok(Self {
            name,
            num_layers,
            choice_labels,
        })
    }

    /// Group whose choices are labelled `c0..c{n-1}`.
    pub fn anonymous<S: Into<String>>(
        name: S,
        num_layers: usize,
        num_choices: usize,
    ) -> Result<Self> {
        Self::new(
            name,
            num_layers,
            (0..num_choices).map(|c| format!("c{c}")).collect(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn num_choices(&self) -> usize {
        self.choice_labels.len()
    }

    pub fn choice_labels(&self) -> &[String] {
        &self.choice_labels
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchSpace {
    groups: Vec<LayerGroup>,
    /// Owning group of every global layer.
    layer_group: Vec<usize>,
}

impl SearchSpace {
    pub fn new(groups: Vec<LayerGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidSpace("no layer groups".into()));
        }
        for (i, g) in groups.iter().enumerate() {
            if groups[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate group name {:?}",
                    g.name
                )));
            }
        }
        let layer_group = groups
            .iter()
            .enumerate()
            .flat_map(|(gi, g)| std::iter::repeat_n(gi, g.num_layers))
            .collect();
        Ok(Self {
            groups,
            layer_group,
        })
    }

    /// Backbone (40 × 4), head (7 × 6) and inter-modular (9 × 3) groups.
    pub fn paper() -> Self {
        let labels = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self::new(vec![
            LayerGroup::new(
                "backbone",
                40,
                labels(&["shuffle3x3", "shuffle5x5", "shuffle7x7", "xception3x3"]),
            )
            .unwrap(),
            LayerGroup::new(
                "head",
                7,
                labels(&[
                    "dwconv3x3",
                    "dwconv5x5",
                    "atconv3x3",
                    "atconv5x5",
                    "dfconv3x3",
                    "dfconv5x5",
                ]),
            )
            .unwrap(),
            LayerGroup::new("inter", 9, labels(&["r4", "r8", "r16"])).unwrap(),
        ])
        .unwrap()
    }

    /// Single anonymous group of `num_layers` layers with `num_choices` each.
    pub fn uniform(num_layers: usize, num_choices: usize) -> Result<Self> {
        Self::new(vec![LayerGroup::anonymous(
            "layers",
            num_layers,
            num_choices,
        )?])
    }

    /// Space with one layer per entry of `arch`, each offering only the
    /// chosen operator of `self`. Used to train a single path standalone.
    pub fn singleton(&self, arch: &Architecture) -> Result<Self> {
        if !self.validate(arch) {
            return Err(Error::ArchitectureMismatch(arch.clone()));
        }
        let groups = arch
            .choices()
            .iter()
            .enumerate()
            .map(|(l, &c)| {
                let g = &self.groups[self.layer_group[l]];
                LayerGroup::new(
                    format!("{}.{l}", g.name),
                    1,
                    vec![g.choice_labels[c].clone()],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(groups)
    }

    /// Concatenation of two spaces; group names must stay distinct.
    pub fn concat(&self, other: &SearchSpace) -> Result<Self> {
        Self::new(
            self.groups
                .iter()
                .chain(other.groups.iter())
                .cloned()
                .collect(),
        )
    }

    pub fn groups(&self) -> &[LayerGroup] {
        &self.groups
    }

    pub fn total_layers(&self) -> usize {
        self.layer_group.len()
    }

    /// Exact number of architectures, the product of per-layer choice counts.
    pub fn space_size(&self) -> BigUint {
        self.groups.iter().fold(BigUint::one(), |acc, g| {
            acc * BigUint::from(g.num_choices()).pow(g.num_layers as u32)
        })
    }

    pub fn layer_info(&self, layer_index: usize) -> Result<(&str, usize)> {
        let gi = *self
            .layer_group
            .get(layer_index)
            .ok_or(Error::LayerOutOfBounds {
                index: layer_index,
                total: self.total_layers(),
            })?;
        let g = &self.groups[gi];
        Ok((g.name.as_str(), g.num_choices()))
    }

    /// Group owning `layer`. Panics when out of range.
    pub fn group_of(&self, layer: usize) -> &LayerGroup {
        &self.groups[self.layer_group[layer]]
    }

    /// Choice count of `layer`. Panics when out of range.
    pub fn num_choices(&self, layer: usize) -> usize {
        self.group_of(layer).num_choices()
    }

    /// Per-layer choice counts, one entry per global layer.
    pub fn shape(&self) -> Vec<usize> {
        (0..self.total_layers())
            .map(|l| self.num_choices(l))
            .collect()
    }

    /// Least common multiple of all choice counts.
    pub fn choice_lcm(&self) -> usize {
        self.groups.iter().map(LayerGroup::num_choices).fold(1, lcm)
    }

    pub fn validate(&self, arch: &Architecture) -> bool {
        arch.len() == self.total_layers()
            && arch
                .choices()
                .iter()
                .enumerate()
                .all(|(l, &c)| c < self.num_choices(l))
    }

    /// Every architecture exactly once, in lexicographic order.
    pub fn enumerate_all(&self, cap: u64) -> Result<Enumeration> {
        let size = self.space_size();
        if size > BigUint::from(cap) {
            return Err(Error::TooLargeToEnumerate {
                size: size.to_string(),
                cap,
            });
        }
        Ok(Enumeration {
            shape: self.shape(),
            next: Some(vec![0; self.total_layers()]),
            remaining: size.to_u64().unwrap_or(0),
        })
    }
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Lexicographic odometer over a space; see [`SearchSpace::enumerate_all`].
#[derive(Clone, Debug)]
pub struct Enumeration {
    shape: Vec<usize>,
    next: Option<Vec<usize>>,
    remaining: u64,
}

impl Iterator for Enumeration {
    type Item = Architecture;

    fn next(&mut self) -> Option<Architecture> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carry = true;
        for l in (0..succ.len()).rev() {
            succ[l] += 1;
            if succ[l] < self.shape[l] {
                carry = false;
                break;
            }
            succ[l] = 0;
        }
        if !carry {
            self.next = Some(succ);
        }
        self.remaining = self.remaining.saturating_sub(1);
        Some(Architecture(current))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

/// One choice index per search layer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Architecture(Vec<usize>);

impl Architecture {
    pub fn new(choices: Vec<usize>) -> Self {
        Self(choices)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for Architecture {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Comma-joined choice vector, e.g. `2,0,1`.
impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self(Vec::new()));
        }
        s.split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Self)
            .map_err(|_| Error::ParseArchitecture(s.to_string()))
    }
}

impl From<Architecture> for String {
    fn from(a: Architecture) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Architecture {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}
