//! Chart regions and their relationships.
//!
//! A region is the set of all chart points covered by exactly the same
//! subset of classes (its signature). Regions need not be connected. The
//! first `m` regions are the base regions, region `i` belonging to class `i`
//! alone; composite regions follow, ordered by signature size then bitmask.

mod histogram;
mod raster;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::Srgb8;

pub use histogram::{scene_from_histograms, HistogramSpec};
pub use raster::{
    rasterize_histograms, scene_from_masks, LayerMask, LayerMaskSet, MaskScene, DEFAULT_MIN_REGION_FRACTION,
};
pub use validate::{validate_scene, SceneViolation};

/// Maximum number of classes a [`ClassSet`] can hold.
pub const MAX_CLASSES: usize = 32;

/// Subset of class indices, stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassSet(u32);

impl ClassSet {
    pub const EMPTY: ClassSet = ClassSet(0);

    pub const fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn single(class: usize) -> Self {
        assert!(class < MAX_CLASSES, "class index {class} exceeds {MAX_CLASSES}");
        Self(1 << class)
    }

    pub fn from_classes<I: IntoIterator<Item = usize>>(classes: I) -> Self {
        classes.into_iter().fold(Self::EMPTY, |s, c| s.with(c))
    }

    pub fn with(self, class: usize) -> Self {
        Self(self.0 | Self::single(class).0)
    }

    pub fn contains(self, class: usize) -> bool {
        class < MAX_CLASSES && self.0 & (1 << class) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersection(self, other: Self) -> Self {
        Self(self.0 & other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_CLASSES).filter(move |&c| self.0 & (1 << c) != 0)
    }

    /// Canonical region ordering key: smaller sets first, then by bitmask.
    fn order_key(self) -> (usize, u32) {
        (self.len(), self.0)
    }
}

impl fmt::Debug for ClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for ClassSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ClassSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let classes = Vec::<usize>::deserialize(deserializer)?;
        if let Some(&c) = classes.iter().find(|&&c| c >= MAX_CLASSES) {
            return Err(serde::de::Error::custom(format!("class index {c} exceeds {MAX_CLASSES}")));
        }
        Ok(Self::from_classes(classes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionInfo {
    pub id: usize,
    pub signature: ClassSet,
    /// Fraction of the covered chart footprint.
    pub size: f64,
}

/// Non-fatal findings recorded while building a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneWarning {
    /// The class has no area covered by it alone; `representative` stands in
    /// as its base region.
    ExclusiveRegionMissing { class: usize, representative: ClassSet },
    /// A sliver signature was folded into a neighboring signature.
    MergedRegion { signature: ClassSet, into: ClassSet, fraction: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("scene needs at least one class")]
    NoClasses,
    #[error("{0} classes exceed the supported maximum of {MAX_CLASSES}")]
    TooManyClasses(usize),
    #[error("{field}: {reason}")]
    InvalidInput { field: String, reason: String },
    #[error("class {0} covers no area")]
    EmptyClass(usize),
    #[error("class {0} has no region left to act as its base region")]
    NoRepresentative(usize),
    #[error("mask {index} is {got:?}, expected {expected:?}")]
    DimensionMismatch {
        index: usize,
        expected: (u32, u32),
        got: (u32, u32),
    },
    #[error("all masks are empty")]
    AllEmpty,
}

impl SceneError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Regions, membership `M`, pair-share `W = M Mᵀ`, sizes and adjacency of one chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneStructure {
    pub m: usize,
    pub class_labels: Vec<String>,
    pub background: Srgb8,
    pub regions: Vec<RegionInfo>,
    /// `n × m`, 1 where region `i` belongs to class `j`.
    pub membership: Vec<Vec<u8>>,
    /// `n × n`, number of classes shared by two regions.
    pub pair_share: Vec<Vec<u32>>,
    /// Sorted neighbor lists.
    pub adjacency: Vec<Vec<usize>>,
    #[serde(default)]
    pub warnings: Vec<SceneWarning>,
}

impl SceneStructure {
    /// Assembles a scene from per-signature areas and signature contacts.
    ///
    /// Sizes are normalized by their sum. Zero-area signatures are dropped.
    pub fn from_signatures(
        class_labels: Vec<String>,
        background: Srgb8,
        areas: &BTreeMap<ClassSet, f64>,
        contacts: &BTreeSet<(ClassSet, ClassSet)>,
        mut warnings: Vec<SceneWarning>,
    ) -> Result<Self, SceneError> {
        let m = class_labels.len();
        if m == 0 {
            return Err(SceneError::NoClasses);
        }
        if m > MAX_CLASSES {
            return Err(SceneError::TooManyClasses(m));
        }
        let present: Vec<(ClassSet, f64)> = areas
            .iter()
            .filter(|(s, &a)| !s.is_empty() && a > 0.0)
            .map(|(&s, &a)| (s, a))
            .collect();
        let total: f64 = present.iter().map(|&(_, a)| a).sum();
        if let Some(c) = (0..m).find(|&c| !present.iter().any(|(s, _)| s.contains(c))) {
            return Err(SceneError::EmptyClass(c));
        }
        if let Some((s, _)) = present.iter().find(|(s, _)| s.iter().any(|c| c >= m)) {
            return Err(SceneError::invalid("signature", format!("{s:?} references a class >= {m}")));
        }

        let mut base: Vec<ClassSet> = Vec::with_capacity(m);
        for class in 0..m {
            let single = ClassSet::single(class);
            if present.iter().any(|&(s, _)| s == single) {
                base.push(single);
                continue;
            }
            let representative = present
                .iter()
                .map(|&(s, _)| s)
                .filter(|s| s.contains(class) && !base.contains(s))
                .min_by_key(|s| s.order_key())
                .ok_or(SceneError::NoRepresentative(class))?;
            log::warn!("class {class} has no exclusive region; using {representative:?} as its base region");
            warnings.push(SceneWarning::ExclusiveRegionMissing { class, representative });
            base.push(representative);
        }
        let mut composites: Vec<ClassSet> = present
            .iter()
            .map(|&(s, _)| s)
            .filter(|s| !base.contains(s))
            .collect();
        composites.sort_by_key(|s| s.order_key());

        let order: Vec<ClassSet> = base.into_iter().chain(composites).collect();
        let index: BTreeMap<ClassSet, usize> = order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let regions: Vec<RegionInfo> = order
            .iter()
            .enumerate()
            .map(|(id, &signature)| RegionInfo {
                id,
                signature,
                size: areas[&signature] / total,
            })
            .collect();

        let mut adjacency = vec![BTreeSet::new(); regions.len()];
        for &(a, b) in contacts {
            if a == b {
                continue;
            }
            if let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) {
                adjacency[i].insert(j);
                adjacency[j].insert(i);
            }
        }

        let membership = membership_matrix(&regions, m);
        let pair_share = pair_share_matrix(&membership);
        Ok(Self {
            m,
            class_labels,
            background,
            regions,
            membership,
            pair_share,
            adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect(),
            warnings,
        })
    }

    pub fn n(&self) -> usize {
        self.regions.len()
    }

    pub fn sizes(&self) -> Vec<f64> {
        self.regions.iter().map(|r| r.size).collect()
    }

    /// Undirected edges as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn region_of(&self, signature: ClassSet) -> Option<usize> {
        self.regions.iter().position(|r| r.signature == signature)
    }

    pub fn exclusive_missing(&self, class: usize) -> bool {
        self.warnings
            .iter()
            .any(|w| matches!(w, SceneWarning::ExclusiveRegionMissing { class: c, .. } if *c == class))
    }
}

pub(crate) fn membership_matrix(regions: &[RegionInfo], m: usize) -> Vec<Vec<u8>> {
    regions
        .iter()
        .map(|r| (0..m).map(|c| r.signature.contains(c) as u8).collect())
        .collect()
}

pub(crate) fn pair_share_matrix(membership: &[Vec<u8>]) -> Vec<Vec<u32>> {
    membership
        .iter()
        .map(|a| {
            membership
                .iter()
                .map(|b| a.iter().zip(b).map(|(&x, &y)| (x * y) as u32).sum())
                .collect()
        })
        .collect()
}
