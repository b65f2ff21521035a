//! Color-name model: a binned color-term count matrix and the similarity
//! measures built on top of it.
//!
//! Colors are mapped to the count row of the nearest bin center under
//! CIEDE2000. The search walks bins in lightness order and stops once the
//! lightness gap alone rules out a closer bin; results are also memoized.

mod format;
mod prototype;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::color::{ciede2000, lch_hue, luminance_diff, Lab};

pub use format::{convert_survey_export, NameModelError, NameModelFile, MODEL_FORMAT, MODEL_VERSION};

const CACHE_LIMIT: usize = 1 << 20;

/// Sparse count row: `(term index, count)` pairs sorted by term index.
pub type TermRow = [(u32, u32)];

pub struct NameModel {
    bins: Vec<Lab>,
    terms: Vec<String>,
    rows: Vec<Vec<(u32, u32)>>,
    norms: Vec<f64>,
    /// Bin indices sorted by lightness, for pruned nearest-bin search.
    by_lightness: Vec<u32>,
    lookup: RwLock<HashMap<[u64; 3], u32>>,
}

impl fmt::Debug for NameModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NameModel")
            .field("bins", &self.bins.len())
            .field("terms", &self.terms.len())
            .finish()
    }
}

impl Clone for NameModel {
    fn clone(&self) -> Self {
        Self::from_parts_unchecked(self.bins.clone(), self.terms.clone(), self.rows.clone())
    }
}

impl NameModel {
    /// Builds a model from dense parts, validating the count matrix.
    pub fn new(bins: Vec<Lab>, terms: Vec<String>, counts: Vec<Vec<u32>>) -> Result<Self, NameModelError> {
        if counts.len() != bins.len() {
            return Err(NameModelError::Invalid(format!(
                "{} bins but {} count rows",
                bins.len(),
                counts.len()
            )));
        }
        let mut rows = Vec::with_capacity(counts.len());
        for (i, dense) in counts.into_iter().enumerate() {
            if dense.len() != terms.len() {
                return Err(NameModelError::Invalid(format!(
                    "count row {i} has {} entries, expected {}",
                    dense.len(),
                    terms.len()
                )));
            }
            let row: Vec<(u32, u32)> = dense
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0)
                .map(|(t, c)| (t as u32, c))
                .collect();
            rows.push(row);
        }
        Self::from_sparse(bins, terms, rows)
    }

    pub(crate) fn from_sparse(
        bins: Vec<Lab>,
        terms: Vec<String>,
        rows: Vec<Vec<(u32, u32)>>,
    ) -> Result<Self, NameModelError> {
        if bins.is_empty() {
            return Err(NameModelError::Invalid("model has no bins".into()));
        }
        if terms.is_empty() {
            return Err(NameModelError::Invalid("model has no terms".into()));
        }
        if let Some((i, _)) = bins
            .iter()
            .enumerate()
            .find(|(_, b)| !(b.l.is_finite() && b.a.is_finite() && b.b.is_finite()))
        {
            return Err(NameModelError::Invalid(format!("bin {i} has a non-finite coordinate")));
        }
        if let Some(i) = rows.iter().position(|r| r.iter().all(|&(_, c)| c == 0)) {
            return Err(NameModelError::Invalid(format!("bin {i} has no nonzero counts")));
        }
        Ok(Self::from_parts_unchecked(bins, terms, rows))
    }

    fn from_parts_unchecked(bins: Vec<Lab>, terms: Vec<String>, mut rows: Vec<Vec<(u32, u32)>>) -> Self {
        for row in &mut rows {
            row.sort_unstable_by_key(|&(t, _)| t);
        }
        let norms = rows
            .iter()
            .map(|r| r.iter().map(|&(_, c)| (c as f64) * (c as f64)).sum::<f64>().sqrt())
            .collect();
        let mut by_lightness: Vec<u32> = (0..bins.len() as u32).collect();
        by_lightness.sort_by(|&i, &j| bins[i as usize].l.total_cmp(&bins[j as usize].l));
        Self {
            bins,
            terms,
            rows,
            norms,
            by_lightness,
            lookup: RwLock::new(HashMap::new()),
        }
    }

    /// Parses the JSON model file format.
    pub fn from_json(text: &str) -> Result<Self, NameModelError> {
        NameModelFile::parse(text)?.into_model()
    }

    pub fn to_json(&self) -> String {
        NameModelFile::from_model(self).to_json()
    }

    /// Built-in synthetic model generated from basic color-term prototypes.
    pub fn prototype() -> Self {
        prototype::build_with_step(10.0)
    }

    pub fn prototype_with_step(step: f64) -> Self {
        prototype::build_with_step(step)
    }

    pub fn bins(&self) -> &[Lab] {
        &self.bins
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn row(&self, bin: usize) -> &TermRow {
        &self.rows[bin]
    }

    /// Index of the bin nearest to `c` under CIEDE2000, lowest index on ties.
    pub fn nearest_bin(&self, c: Lab) -> usize {
        let key = [c.l.to_bits(), c.a.to_bits(), c.b.to_bits()];
        if let Some(&hit) = self.lookup.read().expect("lookup lock poisoned").get(&key) {
            return hit as usize;
        }
        let bin = self.indexed_nearest(c);
        let mut cache = self.lookup.write().expect("lookup lock poisoned");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, bin as u32);
        bin
    }

    /// Walks outward from `c.l` through the lightness-sorted bins. The
    /// CIEDE2000 rotation term can never make the chroma/hue part negative,
    /// so `ΔE00 ≥ |ΔL| / S_L`, and `S_L ≤ 1 + 0.015·|L̄ − 50|` makes that
    /// bound grow with `|ΔL|`; the walk stops once it exceeds the best
    /// distance on both sides.
    fn indexed_nearest(&self, c: Lab) -> usize {
        let order = &self.by_lightness;
        let bound = |dl: f64| dl / (1.0 + 0.015 * ((c.l - 50.0).abs() + dl / 2.0)) - 1e-9;
        let mut up = order.partition_point(|&i| self.bins[i as usize].l < c.l);
        let mut down = up;
        let mut best = (f64::INFINITY, usize::MAX);
        loop {
            let dl_up = order.get(up).map(|&i| self.bins[i as usize].l - c.l);
            let dl_down = down.checked_sub(1).map(|k| c.l - self.bins[order[k] as usize].l);
            let take_up = match (dl_up, dl_down) {
                (None, None) => break,
                (Some(u), Some(d)) => u <= d,
                (u, _) => u.is_some(),
            };
            let (k, dl) = if take_up {
                up += 1;
                (up - 1, dl_up.unwrap())
            } else {
                down -= 1;
                (down, dl_down.unwrap())
            };
            if bound(dl) > best.0 {
                break;
            }
            let i = order[k] as usize;
            let d = ciede2000(c, self.bins[i]);
            if (d, i) < best {
                best = (d, i);
            }
        }
        best.1
    }

    /// Exhaustive reference for [`Self::nearest_bin`].
    pub fn scan_nearest(&self, c: Lab) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &b) in self.bins.iter().enumerate() {
            let d = ciede2000(c, b);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Term-count row used as the name distribution of `c`.
    pub fn name_vector(&self, c: Lab) -> &TermRow {
        self.row(self.nearest_bin(c))
    }

    /// Cosine similarity between the name distributions of two bins.
    pub fn bin_similarity(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        let dot = sparse_dot(&self.rows[i], &self.rows[j]);
        (dot / (self.norms[i] * self.norms[j])).clamp(0.0, 1.0)
    }

    /// Cosine name similarity of two colors, in `[0, 1]`.
    pub fn name_similarity(&self, c1: Lab, c2: Lab) -> f64 {
        self.bin_similarity(self.nearest_bin(c1), self.nearest_bin(c2))
    }

    /// Most frequent term for `c`.
    pub fn top_term(&self, c: Lab) -> &str {
        let row = self.name_vector(c);
        let (t, _) = row
            .iter()
            .copied()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("rows are non-empty");
        &self.terms[t as usize]
    }
}

fn sparse_dot(a: &TermRow, b: &TermRow) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 as f64 * b[j].1 as f64;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Which similarity `S(c_i, c_j)` the objective uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMeasure {
    /// Cosine of color-term distributions.
    #[default]
    Name,
    /// `1 - ΔE00 / 100`, clamped.
    Color,
    /// `1 - 0.01 |ΔL|`.
    Luminance,
    /// `1 - Δh / 180` with circular hue difference.
    Hue,
}

impl FromStr for SimilarityMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "name" => Ok(Self::Name),
            "color" => Ok(Self::Color),
            "luminance" => Ok(Self::Luminance),
            "hue" => Ok(Self::Hue),
            other => Err(format!("unknown similarity measure {other:?}")),
        }
    }
}

impl fmt::Display for SimilarityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Name => "name",
            Self::Color => "color",
            Self::Luminance => "luminance",
            Self::Hue => "hue",
        })
    }
}

/// Circular hue difference in degrees, in `[0, 180]`.
pub fn hue_difference(c1: Lab, c2: Lab) -> f64 {
    let d = (lch_hue(c1) - lch_hue(c2)).abs();
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Evaluates `S(c1, c2)` for the chosen measure. Every measure is symmetric
/// and lies in `[0, 1]`.
pub fn similarity(kind: SimilarityMeasure, model: &NameModel, c1: Lab, c2: Lab) -> f64 {
    match kind {
        SimilarityMeasure::Name => model.name_similarity(c1, c2),
        SimilarityMeasure::Color => (1.0 - ciede2000(c1, c2) / 100.0).clamp(0.0, 1.0),
        SimilarityMeasure::Luminance => (1.0 - 0.01 * luminance_diff(c1, c2)).clamp(0.0, 1.0),
        SimilarityMeasure::Hue => 1.0 - hue_difference(c1, c2) / 180.0,
    }
}
