//! Independent checks for the fast paths: a literal nested-loop objective
//! and a brute-force search over small discrete design spaces.
//!
//! Nothing here calls into [`crate::objective`] beyond its data types; the
//! pair-share matrix, class weights, name lookups and cosines are all
//! recomputed from the region signatures and the raw term counts.

use rayon::prelude::*;
use thiserror::Error;

use crate::color::{ciede2000, lch_hue, Lab, Srgb8};
use crate::composite::{over, RenderOrder, Rgba};
use crate::names::{NameModel, SimilarityMeasure};
use crate::objective::{
    ObjectiveConfig, ObjectiveError, RegionColor, ScoreBreakdown, SeparabilityScale, Solution, VacuousTerms, Violation,
};
use crate::scene::SceneStructure;

pub const DEFAULT_GRID_CAP: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("grid has {count} combinations, above the cap of {cap}")]
    GridTooLarge { count: u128, cap: u64 },
    #[error("grid axis {0} is empty or does not match the scene")]
    BadAxis(&'static str),
    #[error("no grid combination satisfies the constraints")]
    InfeasibleGrid,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Discrete design space: a color per class from its anchors, an opacity per
/// class from the shared levels, and one of the listed orders.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateGrid {
    pub anchors: Vec<Vec<Srgb8>>,
    pub opacity_levels: Vec<f64>,
    /// `None` enumerates every permutation.
    pub orders: Option<Vec<RenderOrder>>,
}

impl CandidateGrid {
    pub fn m(&self) -> usize {
        self.anchors.len()
    }

    pub fn order_list(&self) -> Vec<RenderOrder> {
        match &self.orders {
            Some(o) => o.clone(),
            None => permutations(self.m()).into_iter().map(|p| RenderOrder::new(p).unwrap()).collect(),
        }
    }

    /// Number of combinations, without overflow.
    pub fn count(&self) -> u128 {
        let orders = match &self.orders {
            Some(o) => o.len() as u128,
            None => (1..=self.m() as u128).product(),
        };
        let colors: u128 = self.anchors.iter().map(|a| a.len() as u128).product();
        let levels = (self.opacity_levels.len() as u128).saturating_pow(self.m() as u32);
        colors.saturating_mul(levels).saturating_mul(orders)
    }

    /// Decodes the `k`-th combination: colors vary slowest, then opacities,
    /// then orders.
    pub fn combination(&self, mut k: u64, orders: &[RenderOrder]) -> Solution {
        let m = self.m();
        let order = orders[(k % orders.len() as u64) as usize].clone();
        k /= orders.len() as u64;
        let levels = self.opacity_levels.len() as u64;
        let mut opacities = vec![0.0; m];
        for c in (0..m).rev() {
            opacities[c] = self.opacity_levels[(k % levels) as usize];
            k /= levels;
        }
        let mut palette = vec![Srgb8::BLACK; m];
        for c in (0..m).rev() {
            let n = self.anchors[c].len() as u64;
            palette[c] = self.anchors[c][(k % n) as usize];
            k /= n;
        }
        Solution {
            palette,
            opacities,
            order,
        }
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

fn nearest_bin(model: &NameModel, c: Lab) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &b) in model.bins().iter().enumerate() {
        let d = ciede2000(c, b);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn dense_row(model: &NameModel, bin: usize) -> Vec<f64> {
    let mut v = vec![0.0; model.term_count()];
    for &(t, n) in model.row(bin).iter() {
        v[t as usize] = n as f64;
    }
    v
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

fn sim(kind: SimilarityMeasure, rows: &[Vec<f64>], labs: &[Lab], i: usize, j: usize) -> f64 {
    match kind {
        SimilarityMeasure::Name => cosine(&rows[i], &rows[j]),
        SimilarityMeasure::Color => (1.0 - ciede2000(labs[i], labs[j]) / 100.0).clamp(0.0, 1.0),
        SimilarityMeasure::Luminance => (1.0 - 0.01 * (labs[i].l - labs[j].l).abs()).clamp(0.0, 1.0),
        SimilarityMeasure::Hue => {
            let d = (lch_hue(labs[i]) - lch_hue(labs[j])).abs();
            1.0 - d.min(360.0 - d) / 180.0
        }
    }
}

fn composite(scene: &SceneStructure, sol: &Solution, region: usize, cfg: &ObjectiveConfig) -> Srgb8 {
    let space = cfg.blend_space;
    let sig = scene.regions[region].signature;
    let mut acc = Rgba::opaque(space.decode(scene.background));
    for &c in sol.order.as_slice() {
        if sig.contains(c) {
            acc = over(Rgba::new(space.decode(sol.palette[c]), sol.opacities[c]), acc);
        }
    }
    space.encode(acc.color)
}

/// Scores a solution by evaluating every sum and extremum literally.
pub fn reference_score(
    scene: &SceneStructure,
    model: &NameModel,
    sol: &Solution,
    cfg: &ObjectiveConfig,
) -> Result<ScoreBreakdown, ObjectiveError> {
    cfg.validate()?;
    let (m, n) = (scene.m, scene.regions.len());
    if sol.palette.len() != m || sol.opacities.len() != m || sol.order.len() != m {
        return Err(ObjectiveError::DimensionMismatch {
            expected: m,
            got: sol.palette.len(),
        });
    }

    let colors: Vec<RegionColor> = (0..n).map(|r| RegionColor::new(composite(scene, sol, r, cfg))).collect();
    let labs: Vec<Lab> = colors.iter().map(|c| c.lab).collect();
    let rows: Vec<Vec<f64>> = match cfg.similarity {
        SimilarityMeasure::Name => labs.iter().map(|&l| dense_row(model, nearest_bin(model, l))).collect(),
        _ => Vec::new(),
    };
    let s = |i: usize, j: usize| sim(cfg.similarity, &rows, &labs, i, j);

    let member = |r: usize, c: usize| scene.regions[r].signature.contains(c) as u32;
    let w = |i: usize, j: usize| (0..m).map(|c| member(i, c) * member(j, c)).sum::<u32>();
    let size = |r: usize| scene.regions[r].size;

    let column = |c: usize| (0..n).map(|r| member(r, c)).sum::<u32>() as f64;
    let mut busiest = 0.0f64;
    for c in 0..m {
        busiest = busiest.max(column(c));
    }
    let psi = |i: usize| {
        let mut aggregate = 0.0;
        for j in 0..n {
            aggregate += w(i, j) as f64 * size(j);
        }
        column(i) / busiest * (1.0 - size(i) / aggregate)
    };

    // Within-class association.
    let (mut num, mut den, mut min_s) = (0.0, 0.0, f64::INFINITY);
    for i in 0..m {
        let weight = psi(i).sqrt();
        for j in m..n {
            let wij = w(i, j) as f64;
            num += weight * wij * s(i, j);
            den += wij;
            if wij > 0.0 {
                min_s = min_s.min(s(i, j));
            }
        }
    }
    let vac_wa = den == 0.0;
    let e_wa = if vac_wa { 1.0 } else { num / den + min_s };

    // Between-class disassociation.
    let (mut sum, mut count, mut max_s) = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let delta = if w(i, j) == 0 { 1.0 } else { 0.0 };
            sum += delta * s(i, j);
            count += delta;
            if delta == 1.0 {
                max_s = max_s.max(s(i, j));
            }
        }
    }
    let vac_bd = count == 0.0;
    let e_bd = if vac_bd { 0.0 } else { sum / count + max_s };

    // Separability.
    let scale = match cfg.separability_scale {
        SeparabilityScale::Raw => 1.0,
        SeparabilityScale::Normalized => 0.01,
    };
    let mut min_d = f64::INFINITY;
    for i in 0..n {
        for &j in &scene.adjacency[i] {
            min_d = min_d.min(ciede2000(labs[i], labs[j]) * (1.0 + size(i)));
        }
    }
    let vac_cs = min_d == f64::INFINITY;
    let e_cs = if vac_cs { 100.0 * scale } else { min_d * scale };

    let bg = scene.background.to_lab();
    let mut violations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let distance = ciede2000(labs[i], labs[j]);
            // Negated so a NaN distance counts as a violation.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(distance > cfg.jnd_threshold) {
                violations.push(Violation::Jnd { i, j, distance });
            }
        }
    }
    for (region, lab) in labs.iter().enumerate() {
        let delta_l = (lab.l - bg.l).abs();
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(delta_l >= cfg.bg_contrast) {
            violations.push(Violation::Contrast { region, delta_l });
        }
    }

    let [w1, w2, w3] = cfg.weights;
    Ok(ScoreBreakdown {
        e_wa,
        e_bd,
        e_cs,
        total: w1 * e_wa - w2 * e_bd + w3 * e_cs,
        constraints_ok: violations.is_empty(),
        region_colors: colors,
        violations,
        vacuous: VacuousTerms {
            e_wa: vac_wa,
            e_bd: vac_bd,
            e_cs: vac_cs,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustiveResult {
    pub solution: Solution,
    pub score: f64,
    /// Enumeration index of the winner.
    pub index: u64,
    pub feasible: u64,
    pub total: u64,
}

/// Scores every feasible grid point and returns the best one. Ties go to
/// the lowest enumeration index, however the work is split across threads.
pub fn exhaustive_best(
    scene: &SceneStructure,
    model: &NameModel,
    grid: &CandidateGrid,
    cfg: &ObjectiveConfig,
    cap: u64,
) -> Result<ExhaustiveResult, OracleError> {
    if grid.m() != scene.m || grid.anchors.iter().any(|a| a.is_empty()) {
        return Err(OracleError::BadAxis("anchors"));
    }
    if grid.opacity_levels.is_empty() {
        return Err(OracleError::BadAxis("opacity_levels"));
    }
    let orders = grid.order_list();
    if orders.is_empty() || orders.iter().any(|o| o.len() != scene.m) {
        return Err(OracleError::BadAxis("orders"));
    }
    let count = grid.count();
    if count > cap as u128 {
        return Err(OracleError::GridTooLarge { count, cap });
    }
    let total = count as u64;
    cfg.validate()?;

    let scored: Vec<Option<(f64, u64)>> = (0..total)
        .into_par_iter()
        .map(|k| {
            let sol = grid.combination(k, &orders);
            let b = reference_score(scene, model, &sol, cfg).ok()?;
            b.constraints_ok.then_some((b.total, k))
        })
        .collect();
    let feasible = scored.iter().flatten().count() as u64;
    let (score, index) = scored
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .ok_or(OracleError::InfeasibleGrid)?;
    Ok(ExhaustiveResult {
        solution: grid.combination(index, &orders),
        score,
        index,
        feasible,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::total_score;
    use crate::scene::{scene_from_histograms, HistogramSpec};

    const TINY: &str = include_str!("../tests/fixtures/tiny_names.json");

    fn two_class() -> SceneStructure {
        scene_from_histograms(&HistogramSpec {
            class_labels: vec!["A".into(), "B".into()],
            bin_edges: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            heights: vec![vec![3.0, 2.0, 1.0, 0.0], vec![0.0, 1.0, 3.0, 2.0]],
            background: Srgb8::WHITE,
        })
        .unwrap()
    }

    fn grid() -> CandidateGrid {
        let hex = |v: &[&str]| v.iter().map(|h| h.parse().unwrap()).collect::<Vec<Srgb8>>();
        CandidateGrid {
            anchors: vec![
                hex(&["#d62728", "#ff7f0e", "#8c564b", "#e377c2"]),
                hex(&["#1f77b4", "#2ca02c", "#17becf", "#9467bd"]),
            ],
            opacity_levels: vec![0.3, 0.5, 0.7],
            orders: None,
        }
    }

    #[test]
    fn permutations_are_complete_and_sorted() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[0], vec![0, 1, 2]);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn grid_decoding_covers_every_combination_once() {
        let g = grid();
        assert_eq!(g.count(), 288);
        let orders = g.order_list();
        let mut seen = std::collections::HashSet::new();
        for k in 0..288 {
            let s = g.combination(k, &orders);
            seen.insert(format!("{:?}", s));
        }
        assert_eq!(seen.len(), 288);
    }

    #[test]
    fn reference_matches_objective_on_fixture() {
        let model = NameModel::from_json(TINY).unwrap();
        let scene = two_class();
        let g = grid();
        let orders = g.order_list();
        for sim in [
            SimilarityMeasure::Name,
            SimilarityMeasure::Color,
            SimilarityMeasure::Luminance,
            SimilarityMeasure::Hue,
        ] {
            let cfg = ObjectiveConfig {
                similarity: sim,
                ..Default::default()
            };
            for k in (0..288).step_by(7) {
                let sol = g.combination(k, &orders);
                let a = total_score(&scene, &model, &sol, &cfg).unwrap();
                let b = reference_score(&scene, &model, &sol, &cfg).unwrap();
                assert!((a.total - b.total).abs() < 1e-9, "{sim} #{k}: {} vs {}", a.total, b.total);
                assert_eq!(a.constraints_ok, b.constraints_ok);
                assert_eq!(a.region_colors, b.region_colors);
            }
        }
    }

    #[test]
    fn exhaustive_winner_dominates_every_feasible_point() {
        let model = NameModel::from_json(TINY).unwrap();
        let scene = two_class();
        let cfg = ObjectiveConfig::default();
        let g = grid();
        let best = exhaustive_best(&scene, &model, &g, &cfg, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(best.total, 288);
        let orders = g.order_list();
        for k in 0..best.total {
            let b = reference_score(&scene, &model, &g.combination(k, &orders), &cfg).unwrap();
            if b.constraints_ok {
                assert!(b.total <= best.score);
                if b.total == best.score {
                    assert!(k >= best.index);
                }
            }
        }
    }

    #[test]
    fn planted_optimum_is_found() {
        let model = NameModel::from_json(TINY).unwrap();
        let scene = two_class();
        let cfg = ObjectiveConfig::default();
        let g = grid();
        let best = exhaustive_best(&scene, &model, &g, &cfg, DEFAULT_GRID_CAP).unwrap();
        // Shrink the grid around the winner plus infeasible decoys: near-white
        // anchors fail the background contrast for every opacity.
        let decoy: Srgb8 = "#fafafa".parse().unwrap();
        let planted = CandidateGrid {
            anchors: vec![
                vec![decoy, best.solution.palette[0]],
                vec![best.solution.palette[1], decoy],
            ],
            opacity_levels: g.opacity_levels.clone(),
            orders: Some(vec![best.solution.order.clone()]),
        };
        let again = exhaustive_best(&scene, &model, &planted, &cfg, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(again.solution, best.solution);
        assert_eq!(again.score, best.score);
    }

    #[test]
    fn single_combination_grid() {
        let model = NameModel::from_json(TINY).unwrap();
        let scene = two_class();
        let cfg = ObjectiveConfig::default();
        let one = |a: &str, b: &str| CandidateGrid {
            anchors: vec![vec![a.parse().unwrap()], vec![b.parse().unwrap()]],
            opacity_levels: vec![0.5],
            orders: Some(vec![RenderOrder::identity(2)]),
        };
        let r = exhaustive_best(&scene, &model, &one("#d62728", "#1f77b4"), &cfg, 10).unwrap();
        assert_eq!(r.total, 1);
        assert_eq!(r.index, 0);
        assert_eq!(
            exhaustive_best(&scene, &model, &one("#fafafa", "#1f77b4"), &cfg, 10),
            Err(OracleError::InfeasibleGrid)
        );
        assert!(matches!(
            exhaustive_best(&scene, &model, &grid(), &cfg, 100),
            Err(OracleError::GridTooLarge { count: 288, cap: 100 })
        ));
    }
}
