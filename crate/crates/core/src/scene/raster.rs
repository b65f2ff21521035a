//! Screen-space scene construction from per-class coverage masks.

use std::collections::{BTreeMap, BTreeSet};

use super::histogram::HistogramSpec;
use super::{ClassSet, SceneError, SceneStructure, SceneWarning, MAX_CLASSES};
use crate::color::Srgb8;

/// Signatures covering less than this share of the footprint are merged
/// into a neighbor.
pub const DEFAULT_MIN_REGION_FRACTION: f64 = 0.0005;

/// Binary coverage of one class layer, row-major from the top-left pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerMask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl LayerMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    /// Thresholds 8-bit coverage at one half.
    pub fn from_gray(width: u32, height: u32, gray: &[u8]) -> Result<Self, SceneError> {
        if gray.len() != width as usize * height as usize {
            return Err(SceneError::invalid(
                "mask",
                format!("{} samples for a {width}x{height} mask", gray.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            data: gray.iter().map(|&v| v >= 128).collect(),
        })
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let i = (y * self.width + x) as usize;
        self.data[i] = v;
    }

    pub fn fill_rect(&mut self, x0: u32, y0: u32, x1: u32, y1: u32) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set(x, y, true);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerMaskSet {
    pub class_labels: Vec<String>,
    pub masks: Vec<LayerMask>,
    pub background: Srgb8,
}

/// A raster scene together with its per-pixel bookkeeping.
#[derive(Clone, Debug)]
pub struct MaskScene {
    pub scene: SceneStructure,
    pub width: u32,
    pub height: u32,
    /// Actual cover signature per pixel, before sliver merging.
    pub pixel_signatures: Vec<ClassSet>,
    /// Region index per covered pixel, after merging.
    pub pixel_regions: Vec<Option<usize>>,
}

fn signature_contacts(sigs: &[ClassSet], width: usize, height: usize) -> BTreeMap<(ClassSet, ClassSet), u64> {
    let mut contacts = BTreeMap::new();
    let mut note = |a: ClassSet, b: ClassSet| {
        if a != b && !a.is_empty() && !b.is_empty() {
            *contacts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    };
    for y in 0..height {
        for x in 0..width {
            let s = sigs[y * width + x];
            if x + 1 < width {
                note(s, sigs[y * width + x + 1]);
            }
            if y + 1 < height {
                note(s, sigs[(y + 1) * width + x]);
            }
        }
    }
    contacts
}

fn signature_counts(sigs: &[ClassSet]) -> BTreeMap<ClassSet, u64> {
    let mut counts = BTreeMap::new();
    for &s in sigs.iter().filter(|s| !s.is_empty()) {
        *counts.entry(s).or_insert(0) += 1;
    }
    counts
}

/// Builds a scene from coverage masks.
///
/// Every covered pixel gets the signature of the masks covering it; pixels
/// sharing a signature form one region sized by its share of all covered
/// pixels. Regions are adjacent when 4-connected pixels of the two
/// signatures touch. Non-base signatures below `min_region_fraction` are
/// merged into the touching signature with the most pixels.
pub fn scene_from_masks(set: &LayerMaskSet, min_region_fraction: f64) -> Result<MaskScene, SceneError> {
    let m = set.masks.len();
    if m == 0 {
        return Err(SceneError::NoClasses);
    }
    if m > MAX_CLASSES {
        return Err(SceneError::TooManyClasses(m));
    }
    if set.class_labels.len() != m {
        return Err(SceneError::invalid(
            "class_labels",
            format!("{} labels for {m} masks", set.class_labels.len()),
        ));
    }
    let (width, height) = (set.masks[0].width, set.masks[0].height);
    for (index, mask) in set.masks.iter().enumerate() {
        let got = (mask.width, mask.height);
        if got != (width, height) || mask.data.len() != width as usize * height as usize {
            return Err(SceneError::DimensionMismatch {
                index,
                expected: (width, height),
                got,
            });
        }
    }
    let pixels = width as usize * height as usize;
    let pixel_signatures: Vec<ClassSet> = (0..pixels)
        .map(|p| {
            ClassSet::from_classes(set.masks.iter().enumerate().filter(|(_, mk)| mk.data[p]).map(|(c, _)| c))
        })
        .collect();
    let covered = pixel_signatures.iter().filter(|s| !s.is_empty()).count();
    if covered == 0 {
        return Err(SceneError::AllEmpty);
    }

    let mut sigs = pixel_signatures.clone();
    let mut warnings = Vec::new();
    let threshold = min_region_fraction * covered as f64;
    loop {
        let counts = signature_counts(&sigs);
        let contacts = signature_contacts(&sigs, width as usize, height as usize);
        let victim = counts
            .iter()
            .filter(|(s, &n)| s.len() > 1 && (n as f64) < threshold)
            // Never merge away the last signature carrying some class.
            .filter(|(s, _)| s.iter().all(|c| counts.keys().any(|o| o != *s && o.contains(c))))
            .filter_map(|(&s, &n)| {
                let target = contacts
                    .keys()
                    .filter_map(|&(a, b)| match (a == s, b == s) {
                        (true, _) => Some(b),
                        (_, true) => Some(a),
                        _ => None,
                    })
                    .max_by(|x, y| counts[x].cmp(&counts[y]).then(y.cmp(x)))?;
                Some((n, s, target))
            })
            .min();
        let Some((n, s, target)) = victim else { break };
        log::debug!("merging sliver {s:?} ({n} px) into {target:?}");
        warnings.push(SceneWarning::MergedRegion {
            signature: s,
            into: target,
            fraction: n as f64 / covered as f64,
        });
        for v in sigs.iter_mut().filter(|v| **v == s) {
            *v = target;
        }
    }

    let areas: BTreeMap<ClassSet, f64> = signature_counts(&sigs).into_iter().map(|(s, n)| (s, n as f64)).collect();
    let contacts: BTreeSet<(ClassSet, ClassSet)> = signature_contacts(&sigs, width as usize, height as usize)
        .into_keys()
        .collect();
    let scene = SceneStructure::from_signatures(set.class_labels.clone(), set.background, &areas, &contacts, warnings)?;
    let pixel_regions = sigs
        .iter()
        .map(|&s| if s.is_empty() { None } else { scene.region_of(s) })
        .collect();
    Ok(MaskScene {
        scene,
        width,
        height,
        pixel_signatures,
        pixel_regions,
    })
}

/// Rasterizes histograms into per-class masks by sampling pixel centers.
/// The plot spans the full canvas: x over the bin edges, y from 0 at the
/// bottom row to the tallest bar at the top.
pub fn rasterize_histograms(spec: &HistogramSpec, width: u32, height: u32) -> Result<LayerMaskSet, SceneError> {
    spec.validate()?;
    let x0 = spec.bin_edges[0];
    let span = spec.bin_edges[spec.bins()] - x0;
    let top = spec.max_height();
    if top <= 0.0 {
        return Err(SceneError::AllEmpty);
    }
    let mut masks = vec![LayerMask::new(width, height); spec.m()];
    for px in 0..width {
        let x = x0 + (px as f64 + 0.5) * span / width as f64;
        let bin = spec.bin_edges.partition_point(|&e| e <= x).saturating_sub(1).min(spec.bins() - 1);
        for py in 0..height {
            let y = (height - py) as f64 - 0.5;
            let y = y * top / height as f64;
            for (c, mask) in masks.iter_mut().enumerate() {
                if spec.heights[c][bin] > y {
                    mask.set(px, py, true);
                }
            }
        }
    }
    Ok(LayerMaskSet {
        class_labels: spec.class_labels.clone(),
        masks,
        background: spec.background,
    })
}
