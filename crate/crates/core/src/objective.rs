//! The color-name-aware objective `E = ω1·E_WA − ω2·E_BD + ω3·E_CS` and
//! the two hard constraints (pairwise JND, background lightness contrast).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{ciede2000, luminance_diff, Lab, Srgb8};
use crate::composite::{region_color, BlendSpace, CompositeError, RenderOrder};
use crate::names::{similarity, NameModel, SimilarityMeasure};
use crate::scene::SceneStructure;

/// How `E_CS` scales the CIEDE2000 distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeparabilityScale {
    /// ΔE00 as is.
    Raw,
    /// ΔE00 / 100, comparable to the [0, 1] similarity terms.
    #[default]
    Normalized,
}

impl SeparabilityScale {
    fn divisor(self) -> f64 {
        match self {
            Self::Raw => 1.0,
            Self::Normalized => 100.0,
        }
    }

    /// Value reported for `E_CS` when no region has a neighbor.
    pub fn ceiling(self) -> f64 {
        100.0 / self.divisor()
    }
}

impl FromStr for SeparabilityScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Self::Raw),
            "normalized" => Ok(Self::Normalized),
            other => Err(format!("unknown separability scale {other:?}")),
        }
    }
}

impl fmt::Display for SeparabilityScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Raw => "raw",
            Self::Normalized => "normalized",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// `(ω1, ω2, ω3)`.
    pub weights: [f64; 3],
    /// Minimum ΔE00 between any two region colors (exclusive).
    pub jnd_threshold: f64,
    /// Minimum |ΔL| of every region color against the background.
    pub bg_contrast: f64,
    pub similarity: SimilarityMeasure,
    pub separability_scale: SeparabilityScale,
    pub blend_space: BlendSpace,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            weights: [1.0, 1.0, 1.0],
            jnd_threshold: 3.0,
            bg_contrast: 5.0,
            similarity: SimilarityMeasure::Name,
            separability_scale: SeparabilityScale::Normalized,
            blend_space: BlendSpace::Linear,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(ObjectiveError::InvalidConfig {
                field: "weights",
                reason: format!("weight {w} must be finite and non-negative"),
            });
        }
        if !(self.jnd_threshold.is_finite() && self.jnd_threshold > 0.0) {
            return Err(ObjectiveError::InvalidConfig {
                field: "jnd_threshold",
                reason: format!("{} must be positive", self.jnd_threshold),
            });
        }
        if !(self.bg_contrast.is_finite() && self.bg_contrast >= 0.0) {
            return Err(ObjectiveError::InvalidConfig {
                field: "bg_contrast",
                reason: format!("{} must be non-negative", self.bg_contrast),
            });
        }
        Ok(())
    }

    pub fn total(&self, e_wa: f64, e_bd: f64, e_cs: f64) -> f64 {
        let [w1, w2, w3] = self.weights;
        w1 * e_wa - w2 * e_bd + w3 * e_cs
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("solution has {got} classes, scene has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error("{field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

/// Palette `P`, opacities `A` and rendering order `O`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub palette: Vec<Srgb8>,
    pub opacities: Vec<f64>,
    pub order: RenderOrder,
}

impl Solution {
    pub fn m(&self) -> usize {
        self.palette.len()
    }
}

/// Display color of one region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionColor {
    pub srgb: Srgb8,
    pub lab: Lab,
}

impl RegionColor {
    pub fn new(srgb: Srgb8) -> Self {
        Self { srgb, lab: srgb.to_lab() }
    }
}

/// One broken hard constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Two region colors are within the JND threshold.
    Jnd { i: usize, j: usize, distance: f64 },
    /// A region color is too close to the background in lightness.
    Contrast { region: usize, delta_l: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Jnd { i, j, distance } => write!(f, "regions {i} and {j} differ by ΔE00 {distance:.3}"),
            Self::Contrast { region, delta_l } => {
                write!(f, "region {region} differs from the background by ΔL {delta_l:.3}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Which terms fell back to their degenerate-scene convention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VacuousTerms {
    /// No base/composite pair shares a class; the minimum term is 1.
    pub e_wa: bool,
    /// No pair of regions is class-disjoint; the term is 0.
    pub e_bd: bool,
    /// No region has a neighbor; the term is the scale ceiling.
    pub e_cs: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub e_wa: f64,
    pub e_bd: f64,
    pub e_cs: f64,
    pub total: f64,
    pub constraints_ok: bool,
    pub region_colors: Vec<RegionColor>,
    pub violations: Vec<Violation>,
    pub vacuous: VacuousTerms,
}

/// Composites every region and converts the result to Lab.
pub fn resolve_region_colors(
    scene: &SceneStructure,
    sol: &Solution,
    space: BlendSpace,
) -> Result<Vec<RegionColor>, ObjectiveError> {
    if sol.m() != scene.m {
        return Err(ObjectiveError::DimensionMismatch {
            expected: scene.m,
            got: sol.m(),
        });
    }
    scene
        .regions
        .iter()
        .map(|r| {
            region_color(r.signature, &sol.palette, &sol.opacities, &sol.order, scene.background, space)
                .map(RegionColor::new)
                .map_err(Into::into)
        })
        .collect()
}

/// Difficulty weight `Ψ(i)` of class `i`: its share of regions relative to
/// the busiest class, times one minus the ratio of its base region to the
/// pair-share-weighted area around it.
pub fn class_weight(scene: &SceneStructure, class: usize) -> f64 {
    let column = |c: usize| scene.membership.iter().map(|row| row[c] as f64).sum::<f64>();
    let busiest = (0..scene.m).map(column).fold(0.0, f64::max);
    let aggregate: f64 = scene.pair_share[class]
        .iter()
        .zip(&scene.regions)
        .map(|(&w, r)| w as f64 * r.size)
        .sum();
    column(class) / busiest * (1.0 - scene.regions[class].size / aggregate)
}

/// Pairwise similarity over resolved colors, looking up name bins once.
struct Similarity<'a> {
    kind: SimilarityMeasure,
    model: &'a NameModel,
    labs: Vec<Lab>,
    bins: Vec<usize>,
}

impl<'a> Similarity<'a> {
    fn new(kind: SimilarityMeasure, model: &'a NameModel, colors: &[RegionColor]) -> Self {
        let labs: Vec<Lab> = colors.iter().map(|c| c.lab).collect();
        let bins = match kind {
            SimilarityMeasure::Name => labs.iter().map(|&l| model.nearest_bin(l)).collect(),
            _ => Vec::new(),
        };
        Self { kind, model, labs, bins }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        match self.kind {
            SimilarityMeasure::Name => self.model.bin_similarity(self.bins[i], self.bins[j]),
            kind => similarity(kind, self.model, self.labs[i], self.labs[j]),
        }
    }
}

fn wa_term(scene: &SceneStructure, psi: &[f64], s: &Similarity) -> (f64, bool) {
    let (mut num, mut den, mut min) = (0.0, 0.0, f64::INFINITY);
    for i in 0..scene.m {
        for j in scene.m..scene.n() {
            let w = scene.pair_share[i][j];
            if w == 0 {
                continue;
            }
            let sim = s.get(i, j);
            num += psi[i].sqrt() * w as f64 * sim;
            den += w as f64;
            min = min.min(sim);
        }
    }
    if den == 0.0 {
        (1.0, true)
    } else {
        (num / den + min, false)
    }
}

fn bd_term(scene: &SceneStructure, s: &Similarity) -> (f64, bool) {
    let (mut sum, mut count, mut max) = (0.0, 0usize, f64::NEG_INFINITY);
    for i in 0..scene.n() {
        for j in i + 1..scene.n() {
            if scene.pair_share[i][j] == 0 {
                let sim = s.get(i, j);
                sum += sim;
                count += 1;
                max = max.max(sim);
            }
        }
    }
    if count == 0 {
        (0.0, true)
    } else {
        (sum / count as f64 + max, false)
    }
}

fn cs_term(scene: &SceneStructure, colors: &[RegionColor], scale: SeparabilityScale) -> (f64, bool) {
    let mut min = f64::INFINITY;
    for (i, ns) in scene.adjacency.iter().enumerate() {
        let weight = 1.0 + scene.regions[i].size;
        for &j in ns {
            min = min.min(ciede2000(colors[i].lab, colors[j].lab) * weight);
        }
    }
    if min.is_infinite() {
        (scale.ceiling(), true)
    } else {
        (min / scale.divisor(), false)
    }
}

/// Within-class association: Ψ-weighted mean similarity of base regions to
/// the composites sharing their classes, plus the worst such similarity.
pub fn e_wa(scene: &SceneStructure, model: &NameModel, colors: &[RegionColor], cfg: &ObjectiveConfig) -> f64 {
    let psi: Vec<f64> = (0..scene.m).map(|c| class_weight(scene, c)).collect();
    wa_term(scene, &psi, &Similarity::new(cfg.similarity, model, colors)).0
}

/// Between-class disassociation: mean plus maximum similarity over region
/// pairs sharing no class.
pub fn e_bd(scene: &SceneStructure, model: &NameModel, colors: &[RegionColor], cfg: &ObjectiveConfig) -> f64 {
    bd_term(scene, &Similarity::new(cfg.similarity, model, colors)).0
}

/// Color separability: smallest size-weighted distance between neighbors.
pub fn e_cs(scene: &SceneStructure, colors: &[RegionColor], cfg: &ObjectiveConfig) -> f64 {
    cs_term(scene, colors, cfg.separability_scale).0
}

/// Lists every JND and background-contrast violation.
pub fn check_constraints(scene: &SceneStructure, colors: &[RegionColor], cfg: &ObjectiveConfig) -> ConstraintReport {
    let bg = scene.background.to_lab();
    let mut violations = Vec::new();
    for i in 0..colors.len() {
        for j in i + 1..colors.len() {
            let distance = ciede2000(colors[i].lab, colors[j].lab);
            if distance <= cfg.jnd_threshold {
                violations.push(Violation::Jnd { i, j, distance });
            }
        }
    }
    for (region, c) in colors.iter().enumerate() {
        let delta_l = luminance_diff(c.lab, bg);
        if delta_l < cfg.bg_contrast {
            violations.push(Violation::Contrast { region, delta_l });
        }
    }
    ConstraintReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Same verdict as [`check_constraints`] without building a report.
pub fn is_feasible(colors: &[RegionColor], background: Lab, cfg: &ObjectiveConfig) -> bool {
    colors.iter().all(|c| luminance_diff(c.lab, background) >= cfg.bg_contrast)
        && colors.iter().enumerate().all(|(i, a)| {
            colors[i + 1..]
                .iter()
                .all(|b| ciede2000(a.lab, b.lab) > cfg.jnd_threshold)
        })
}

/// Scores one solution from scratch.
pub fn total_score(
    scene: &SceneStructure,
    model: &NameModel,
    sol: &Solution,
    cfg: &ObjectiveConfig,
) -> Result<ScoreBreakdown, ObjectiveError> {
    Objective::new(scene, model, cfg.clone())?.breakdown(sol)
}

/// Evaluator bound to one scene, with the class weights precomputed.
#[derive(Clone, Debug)]
pub struct Objective<'a> {
    scene: &'a SceneStructure,
    model: &'a NameModel,
    cfg: ObjectiveConfig,
    psi: Vec<f64>,
    background: Lab,
}

impl<'a> Objective<'a> {
    pub fn new(scene: &'a SceneStructure, model: &'a NameModel, cfg: ObjectiveConfig) -> Result<Self, ObjectiveError> {
        cfg.validate()?;
        Ok(Self {
            psi: (0..scene.m).map(|c| class_weight(scene, c)).collect(),
            background: scene.background.to_lab(),
            scene,
            model,
            cfg,
        })
    }

    pub fn scene(&self) -> &SceneStructure {
        self.scene
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.cfg
    }

    pub fn class_weights(&self) -> &[f64] {
        &self.psi
    }

    pub fn colors(&self, sol: &Solution) -> Result<Vec<RegionColor>, ObjectiveError> {
        resolve_region_colors(self.scene, sol, self.cfg.blend_space)
    }

    pub fn feasible(&self, colors: &[RegionColor]) -> bool {
        is_feasible(colors, self.background, &self.cfg)
    }

    /// `(e_wa, e_bd, e_cs)` and the vacuous flags for resolved colors.
    pub fn terms(&self, colors: &[RegionColor]) -> ([f64; 3], VacuousTerms) {
        // Zero-weighted terms are still evaluated so breakdowns stay
        // comparable across weight settings.
        let s = Similarity::new(self.cfg.similarity, self.model, colors);
        let (wa, vwa) = wa_term(self.scene, &self.psi, &s);
        let (bd, vbd) = bd_term(self.scene, &s);
        let (cs, vcs) = cs_term(self.scene, colors, self.cfg.separability_scale);
        (
            [wa, bd, cs],
            VacuousTerms {
                e_wa: vwa,
                e_bd: vbd,
                e_cs: vcs,
            },
        )
    }

    pub fn score_colors(&self, colors: &[RegionColor]) -> f64 {
        let ([wa, bd, cs], _) = self.terms(colors);
        self.cfg.total(wa, bd, cs)
    }

    pub fn breakdown(&self, sol: &Solution) -> Result<ScoreBreakdown, ObjectiveError> {
        let colors = self.colors(sol)?;
        Ok(self.breakdown_colors(colors))
    }

    pub fn breakdown_colors(&self, colors: Vec<RegionColor>) -> ScoreBreakdown {
        let ([e_wa, e_bd, e_cs], vacuous) = self.terms(&colors);
        let report = check_constraints(self.scene, &colors, &self.cfg);
        ScoreBreakdown {
            e_wa,
            e_bd,
            e_cs,
            total: self.cfg.total(e_wa, e_bd, e_cs),
            constraints_ok: report.ok,
            region_colors: colors,
            violations: report.violations,
            vacuous,
        }
    }
}
