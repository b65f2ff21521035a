use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ClassSet, SceneError, SceneStructure, MAX_CLASSES};
use crate::color::Srgb8;

/// Bottom-aligned overlapped histograms: `heights[class][bin]` over
/// contiguous bins delimited by `bin_edges`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub class_labels: Vec<String>,
    pub bin_edges: Vec<f64>,
    pub heights: Vec<Vec<f64>>,
    #[serde(default = "default_background")]
    pub background: Srgb8,
}

fn default_background() -> Srgb8 {
    Srgb8::WHITE
}

impl HistogramSpec {
    pub fn m(&self) -> usize {
        self.class_labels.len()
    }

    pub fn bins(&self) -> usize {
        self.bin_edges.len().saturating_sub(1)
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let m = self.m();
        if m == 0 {
            return Err(SceneError::NoClasses);
        }
        if m > MAX_CLASSES {
            return Err(SceneError::TooManyClasses(m));
        }
        if self.bin_edges.len() < 2 {
            return Err(SceneError::invalid("bin_edges", "need at least two edges"));
        }
        for (i, w) in self.bin_edges.windows(2).enumerate() {
            if !(w[0].is_finite() && w[1].is_finite() && w[1] > w[0]) {
                return Err(SceneError::invalid(
                    format!("bin_edges[{}]", i + 1),
                    "edges must be finite and strictly increasing",
                ));
            }
        }
        if self.heights.len() != m {
            return Err(SceneError::invalid(
                "heights",
                format!("{} height rows for {m} classes", self.heights.len()),
            ));
        }
        let bins = self.bins();
        for (c, row) in self.heights.iter().enumerate() {
            if row.len() != bins {
                return Err(SceneError::invalid(
                    format!("heights[{c}]"),
                    format!("{} values for {bins} bins", row.len()),
                ));
            }
            if let Some(b) = row.iter().position(|h| !h.is_finite() || *h < 0.0) {
                return Err(SceneError::invalid(
                    format!("heights[{c}][{b}]"),
                    "heights must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }

    /// Vertical intervals `(lo, hi, cover)` of one bin, bottom to top.
    pub(crate) fn bin_intervals(&self, bin: usize) -> Vec<(f64, f64, ClassSet)> {
        let mut levels: Vec<f64> = self
            .heights
            .iter()
            .map(|row| row[bin])
            .filter(|&h| h > 0.0)
            .collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut out = Vec::with_capacity(levels.len());
        let mut lo = 0.0;
        for hi in levels {
            let cover = ClassSet::from_classes(
                self.heights
                    .iter()
                    .enumerate()
                    .filter(|(_, row)| row[bin] >= hi)
                    .map(|(c, _)| c),
            );
            out.push((lo, hi, cover));
            lo = hi;
        }
        out
    }
}

/// Builds the region structure of overlapped histograms analytically.
///
/// Each bin's class heights split it into stacked intervals whose cover
/// sets are region signatures. Two signatures are adjacent when they share
/// an edge of positive length, either stacked within a bin or side by side
/// across neighboring bins.
pub fn scene_from_histograms(spec: &HistogramSpec) -> Result<SceneStructure, SceneError> {
    spec.validate()?;
    let mut areas: BTreeMap<ClassSet, f64> = BTreeMap::new();
    let mut contacts: BTreeSet<(ClassSet, ClassSet)> = BTreeSet::new();
    let mut touch = |a: ClassSet, b: ClassSet| {
        if a != b {
            contacts.insert((a.min(b), a.max(b)));
        }
    };

    let columns: Vec<Vec<(f64, f64, ClassSet)>> = (0..spec.bins()).map(|b| spec.bin_intervals(b)).collect();
    for (b, column) in columns.iter().enumerate() {
        let width = spec.bin_edges[b + 1] - spec.bin_edges[b];
        for &(lo, hi, cover) in column {
            *areas.entry(cover).or_insert(0.0) += width * (hi - lo);
        }
        for pair in column.windows(2) {
            touch(pair[0].2, pair[1].2);
        }
    }
    for pair in columns.windows(2) {
        let (left, right) = (&pair[0], &pair[1]);
        let (mut i, mut j) = (0, 0);
        while i < left.len() && j < right.len() {
            let (llo, lhi, ls) = left[i];
            let (rlo, rhi, rs) = right[j];
            if lhi.min(rhi) > llo.max(rlo) {
                touch(ls, rs);
            }
            if lhi <= rhi {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    SceneStructure::from_signatures(
        spec.class_labels.clone(),
        spec.background,
        &areas,
        &contacts,
        Vec::new(),
    )
}
