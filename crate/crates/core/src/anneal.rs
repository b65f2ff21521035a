//! Simulated annealing over palette, opacities and rendering order.
//!
//! Each iteration perturbs the current state with one of three moves (shift
//! a color, nudge an opacity, swap two layers), redrawing until the
//! composite colors satisfy the hard constraints, then accepts by the
//! Metropolis rule on the objective difference. The best state seen is
//! returned, not the last one.

use std::fmt;
use std::io;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::Srgb8;
use crate::composite::RenderOrder;
use crate::objective::{ConstraintReport, Objective, ObjectiveError, RegionColor, ScoreBreakdown, Solution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSchedule {
    pub t_start: f64,
    pub t_end: f64,
    /// Cooling coefficient, `T ← γ·T` per iteration.
    pub gamma: f64,
    /// Largest per-channel RGB offset of a color move.
    pub rgb_step: u8,
    pub alpha_step: f64,
    pub alpha_bounds: [f64; 2],
    /// Redraws allowed per iteration (and for the initial state) before
    /// giving up on finding a feasible candidate.
    pub max_candidate_retries: u32,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            t_start: 100_000.0,
            t_end: 0.001,
            gamma: 0.99,
            rgb_step: 10,
            alpha_step: 0.1,
            alpha_bounds: [0.1, 0.9],
            max_candidate_retries: 100,
            seed: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AnnealError> {
        let bad = |field: &'static str, reason: String| Err(AnnealError::InvalidSchedule { field, reason });
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", format!("{} is not in (0, 1)", self.gamma));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end", format!("{} must be positive", self.t_end));
        }
        if !(self.t_start.is_finite() && self.t_start > self.t_end) {
            return bad("t_start", format!("{} must exceed t_end", self.t_start));
        }
        if self.rgb_step == 0 {
            return bad("rgb_step", "must be positive".into());
        }
        if !(self.alpha_step > 0.0 && self.alpha_step.is_finite()) {
            return bad("alpha_step", format!("{} must be positive", self.alpha_step));
        }
        let [lo, hi] = self.alpha_bounds;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return bad("alpha_bounds", format!("[{lo}, {hi}] is not an interval inside [0, 1]"));
        }
        Ok(())
    }

    /// Number of cooling steps until the temperature reaches `t_end`.
    pub fn iteration_count(&self) -> usize {
        ((self.t_start / self.t_end).ln() / (1.0 / self.gamma).ln()).ceil() as usize
    }

    /// Temperature at iteration `t`.
    pub fn temperature(&self, t: usize) -> f64 {
        self.t_start * self.gamma.powi(t as i32)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AnnealError {
    #[error("{field}: {reason}")]
    InvalidSchedule { field: &'static str, reason: String },
    #[error("{0}")]
    InvalidMoves(String),
    #[error("no feasible starting point after {attempts} attempts")]
    InfeasibleStart { attempts: u32, report: ConstraintReport },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Color,
    Opacity,
    Swap,
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Color => "color",
            Self::Opacity => "opacity",
            Self::Swap => "swap",
        })
    }
}

/// Neighborhood of the search.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MoveSet {
    /// RGB offsets and opacity steps from the schedule.
    #[default]
    Continuous,
    /// Colors restricted to per-class anchors and opacities to fixed levels;
    /// moves jump to a different anchor or level.
    Discrete {
        anchors: Vec<Vec<Srgb8>>,
        opacity_levels: Vec<f64>,
    },
}

/// What the search may change.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub moves: MoveSet,
    /// Per-class locked colors; `None` entries stay free.
    pub fixed_palette: Option<Vec<Option<Srgb8>>>,
}

impl SearchSpace {
    pub fn locked_palette(palette: Vec<Srgb8>) -> Self {
        Self {
            moves: MoveSet::Continuous,
            fixed_palette: Some(palette.into_iter().map(Some).collect()),
        }
    }

    fn locked(&self, class: usize) -> Option<Srgb8> {
        self.fixed_palette.as_ref().and_then(|p| p[class])
    }

    pub fn validate(&self, m: usize) -> Result<(), AnnealError> {
        if let Some(p) = &self.fixed_palette {
            if p.len() != m {
                return Err(AnnealError::InvalidMoves(format!(
                    "fixed palette has {} entries for {m} classes",
                    p.len()
                )));
            }
        }
        if let MoveSet::Discrete { anchors, opacity_levels } = &self.moves {
            if anchors.len() != m || anchors.iter().any(|a| a.is_empty()) {
                return Err(AnnealError::InvalidMoves(format!("need non-empty anchors for each of {m} classes")));
            }
            if opacity_levels.is_empty() || opacity_levels.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(AnnealError::InvalidMoves("opacity levels must be non-empty and in [0, 1]".into()));
            }
        }
        Ok(())
    }

    fn color_movable(&self, m: usize) -> Vec<usize> {
        (0..m)
            .filter(|&c| self.locked(c).is_none())
            .filter(|&c| match &self.moves {
                MoveSet::Continuous => true,
                MoveSet::Discrete { anchors, .. } => anchors[c].len() > 1,
            })
            .collect()
    }

    fn opacity_movable(&self) -> bool {
        match &self.moves {
            MoveSet::Continuous => true,
            MoveSet::Discrete { opacity_levels, .. } => opacity_levels.len() > 1,
        }
    }
}

/// Draws a random starting state, retrying until it is feasible.
pub fn init_solution(
    objective: &Objective,
    schedule: &AnnealSchedule,
    space: &SearchSpace,
    rng: &mut ChaCha8Rng,
) -> Result<(Solution, Vec<RegionColor>), AnnealError> {
    let m = objective.scene().m;
    let mut last = None;
    for _ in 0..=schedule.max_candidate_retries {
        let sol = random_solution(m, schedule, space, rng);
        let colors = objective.colors(&sol)?;
        if objective.feasible(&colors) {
            return Ok((sol, colors));
        }
        last = Some(colors);
    }
    let colors = last.expect("at least one attempt");
    Err(AnnealError::InfeasibleStart {
        attempts: schedule.max_candidate_retries + 1,
        report: crate::objective::check_constraints(objective.scene(), &colors, objective.config()),
    })
}

fn random_solution(m: usize, schedule: &AnnealSchedule, space: &SearchSpace, rng: &mut ChaCha8Rng) -> Solution {
    let palette = (0..m)
        .map(|c| {
            let free = match &space.moves {
                MoveSet::Continuous => Srgb8::new(rng.gen(), rng.gen(), rng.gen()),
                MoveSet::Discrete { anchors, .. } => *anchors[c].choose(rng).expect("validated"),
            };
            space.locked(c).unwrap_or(free)
        })
        .collect();
    let [lo, hi] = schedule.alpha_bounds;
    let opacities = (0..m)
        .map(|_| match &space.moves {
            MoveSet::Continuous => rng.gen_range(lo..=hi),
            MoveSet::Discrete { opacity_levels, .. } => *opacity_levels.choose(rng).expect("validated"),
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    Solution {
        palette,
        opacities,
        order: RenderOrder::new(order).expect("shuffled identity"),
    }
}

/// Applies exactly one move, each available kind equally likely. Returns
/// `None` when nothing can move (one class, every color and opacity fixed).
pub fn perturb(
    sol: &Solution,
    schedule: &AnnealSchedule,
    space: &SearchSpace,
    rng: &mut ChaCha8Rng,
) -> Option<(Solution, MoveKind)> {
    let m = sol.m();
    let colorable = space.color_movable(m);
    let mut kinds = Vec::with_capacity(3);
    if !colorable.is_empty() {
        kinds.push(MoveKind::Color);
    }
    if space.opacity_movable() {
        kinds.push(MoveKind::Opacity);
    }
    if m > 1 {
        kinds.push(MoveKind::Swap);
    }
    let kind = *kinds.choose(rng)?;
    let mut next = sol.clone();
    match kind {
        MoveKind::Color => {
            let c = *colorable.choose(rng).expect("non-empty");
            next.palette[c] = match &space.moves {
                MoveSet::Continuous => {
                    let step = schedule.rgb_step as i32;
                    let ch = sol.palette[c]
                        .channels()
                        .map(|v| (v as i32 + rng.gen_range(-step..=step)).clamp(0, 255) as u8);
                    Srgb8::from_channels(ch)
                }
                MoveSet::Discrete { anchors, .. } => other_choice(&anchors[c], &sol.palette[c], rng),
            };
        }
        MoveKind::Opacity => {
            let c = rng.gen_range(0..m);
            next.opacities[c] = match &space.moves {
                MoveSet::Continuous => {
                    let [lo, hi] = schedule.alpha_bounds;
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    (sol.opacities[c] + sign * schedule.alpha_step).clamp(lo, hi)
                }
                MoveSet::Discrete { opacity_levels, .. } => other_choice(opacity_levels, &sol.opacities[c], rng),
            };
        }
        MoveKind::Swap => {
            let i = rng.gen_range(0..m);
            let j = (i + rng.gen_range(1..m)) % m;
            next.order.swap(i, j);
        }
    }
    Some((next, kind))
}

/// A uniformly chosen option different from `current`, if one exists.
fn other_choice<T: Copy + PartialEq>(options: &[T], current: &T, rng: &mut ChaCha8Rng) -> T {
    let others: Vec<T> = options.iter().copied().filter(|o| o != current).collect();
    others.choose(rng).copied().unwrap_or(*current)
}

/// Outcome of one constrained proposal.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub solution: Solution,
    pub colors: Vec<RegionColor>,
    /// Move that produced the candidate; `None` when retries ran out.
    pub kind: Option<MoveKind>,
    pub draws: u32,
}

impl Candidate {
    pub fn exhausted(&self) -> bool {
        self.kind.is_none()
    }
}

/// Perturbs `current` until the candidate is feasible. After
/// `max_candidate_retries` failed draws the current state comes back
/// unchanged and the iteration is a no-op.
pub fn generate_candidate(
    objective: &Objective,
    current: &Solution,
    current_colors: &[RegionColor],
    schedule: &AnnealSchedule,
    space: &SearchSpace,
    rng: &mut ChaCha8Rng,
) -> Result<Candidate, AnnealError> {
    for draw in 1..=schedule.max_candidate_retries.max(1) {
        let Some((sol, kind)) = perturb(current, schedule, space, rng) else {
            break;
        };
        let colors = objective.colors(&sol)?;
        if objective.feasible(&colors) {
            return Ok(Candidate {
                solution: sol,
                colors,
                kind: Some(kind),
                draws: draw,
            });
        }
    }
    Ok(Candidate {
        solution: current.clone(),
        colors: current_colors.to_vec(),
        kind: None,
        draws: schedule.max_candidate_retries,
    })
}

/// Metropolis rule: improvements always pass, others with `exp(ΔE/T)`.
pub fn accept(delta_e: f64, temperature: f64, rng: &mut ChaCha8Rng) -> bool {
    delta_e > 0.0 || rng.gen::<f64>() < (delta_e / temperature).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub temperature: f64,
    pub candidate_score: f64,
    pub current_score: f64,
    pub best_score: f64,
    /// `None` for iterations skipped after exhausting the retries.
    #[serde(rename = "move")]
    pub kind: Option<MoveKind>,
    pub accepted: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnealTrace {
    pub initial_score: f64,
    pub records: Vec<TraceRecord>,
}

impl AnnealTrace {
    pub fn best_so_far(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_score).collect()
    }

    pub fn skipped(&self) -> usize {
        self.records.iter().filter(|r| r.kind.is_none()).count()
    }

    pub fn accepted(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }

    /// Writes `iteration,temperature,candidate_score,best_score,move,accepted`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "temperature", "candidate_score", "best_score", "move", "accepted"])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.temperature.to_string(),
                r.candidate_score.to_string(),
                r.best_score.to_string(),
                r.kind.map_or_else(|| "skipped".to_string(), |k| k.to_string()),
                r.accepted.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[derive(Clone, Debug)]
pub struct AnnealOutcome {
    pub solution: Solution,
    pub breakdown: ScoreBreakdown,
    pub trace: AnnealTrace,
    pub seed: u64,
}

/// Runs the full schedule from a random feasible start.
pub fn optimize(objective: &Objective, schedule: &AnnealSchedule, space: &SearchSpace) -> Result<AnnealOutcome, AnnealError> {
    schedule.validate()?;
    space.validate(objective.scene().m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let (mut current, mut current_colors) = init_solution(objective, schedule, space, &mut rng)?;
    let mut current_score = objective.score_colors(&current_colors);
    let mut best = current.clone();
    let mut best_score = current_score;
    let iterations = schedule.iteration_count();
    let mut trace = AnnealTrace {
        initial_score: current_score,
        records: Vec::with_capacity(iterations),
    };

    for t in 0..iterations {
        let temperature = schedule.temperature(t);
        let cand = generate_candidate(objective, &current, &current_colors, schedule, space, &mut rng)?;
        if cand.exhausted() {
            trace.records.push(TraceRecord {
                iteration: t,
                temperature,
                candidate_score: current_score,
                current_score,
                best_score,
                kind: None,
                accepted: false,
            });
            continue;
        }
        let score = objective.score_colors(&cand.colors);
        let accepted = accept(score - current_score, temperature, &mut rng);
        if accepted {
            current = cand.solution;
            current_colors = cand.colors;
            current_score = score;
            if current_score > best_score {
                best = current.clone();
                best_score = current_score;
            }
        }
        trace.records.push(TraceRecord {
            iteration: t,
            temperature,
            candidate_score: score,
            current_score,
            best_score,
            kind: cand.kind,
            accepted,
        });
    }

    let breakdown = objective.breakdown(&best)?;
    log::debug!(
        "seed {}: best {:.6} after {iterations} iterations ({} accepted, {} skipped)",
        schedule.seed,
        best_score,
        trace.accepted(),
        trace.skipped()
    );
    Ok(AnnealOutcome {
        solution: best,
        breakdown,
        trace,
        seed: schedule.seed,
    })
}

/// Runs one independent search per seed in parallel. Results come back in
/// seed order.
pub fn optimize_seeds(
    objective: &Objective,
    schedule: &AnnealSchedule,
    space: &SearchSpace,
    seeds: &[u64],
) -> Vec<Result<AnnealOutcome, AnnealError>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let s = AnnealSchedule {
                seed,
                ..schedule.clone()
            };
            optimize(objective, &s, space)
        })
        .collect()
}

/// Best run of a multi-seed batch; ties go to the earlier seed. Fails only
/// if every run fails, with the first error.
pub fn optimize_batch(
    objective: &Objective,
    schedule: &AnnealSchedule,
    space: &SearchSpace,
    seeds: &[u64],
) -> Result<AnnealOutcome, AnnealError> {
    let mut best: Option<AnnealOutcome> = None;
    let mut first_err = None;
    for r in optimize_seeds(objective, schedule, space, seeds) {
        match r {
            Ok(o) => {
                if best.as_ref().is_none_or(|b| o.breakdown.total > b.breakdown.total) {
                    best = Some(o);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(AnnealError::InvalidMoves("no seeds given".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::NameModel;
    use crate::objective::{check_constraints, ObjectiveConfig};
    use crate::scene::{scene_from_histograms, HistogramSpec, SceneStructure};

    const TINY: &str = include_str!("../tests/fixtures/tiny_names.json");

    fn scene(heights: Vec<Vec<f64>>) -> SceneStructure {
        let bins = heights[0].len();
        scene_from_histograms(&HistogramSpec {
            class_labels: (0..heights.len()).map(|c| format!("c{c}")).collect(),
            bin_edges: (0..=bins).map(|e| e as f64).collect(),
            heights,
            background: Srgb8::WHITE,
        })
        .unwrap()
    }

    fn two() -> SceneStructure {
        scene(vec![vec![3.0, 2.0, 1.0, 0.0], vec![0.0, 1.0, 3.0, 2.0]])
    }

    fn quick() -> AnnealSchedule {
        AnnealSchedule {
            t_start: 1.0,
            t_end: 0.01,
            gamma: 0.9,
            ..AnnealSchedule::with_seed(3)
        }
    }

    #[test]
    fn default_iteration_count() {
        assert_eq!(AnnealSchedule::default().iteration_count(), 1833);
        let s = AnnealSchedule::default();
        assert!(s.temperature(1832) > s.t_end);
        assert!(s.temperature(1833) <= s.t_end);
    }

    #[test]
    fn schedule_validation() {
        let bad = AnnealSchedule {
            gamma: 1.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(AnnealError::InvalidSchedule { field: "gamma", .. })));
        let bad = AnnealSchedule {
            alpha_bounds: [0.5, 0.5],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(AnnealSchedule::default().validate().is_ok());
    }

    #[test]
    fn acceptance_rule_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(accept(0.1, 1e-9, &mut rng));
            assert!(accept(0.0, 1e-9, &mut rng));
        }
        assert!(!accept(-1.0, 1e-6, &mut rng));
    }

    #[test]
    fn acceptance_rate_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = 3.7;
        let hits = (0..10_000).filter(|_| accept(-t * 2f64.ln(), t, &mut rng)).count();
        let rate = hits as f64 / 10_000.0;
        assert!((rate - 0.5).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn single_class_never_swaps() {
        let sol = Solution {
            palette: vec![Srgb8::new(10, 20, 30)],
            opacities: vec![0.5],
            order: RenderOrder::identity(1),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = AnnealSchedule::default();
        for _ in 0..300 {
            let (_, kind) = perturb(&sol, &s, &SearchSpace::default(), &mut rng).unwrap();
            assert_ne!(kind, MoveKind::Swap);
        }
        let locked = SearchSpace::locked_palette(vec![Srgb8::new(10, 20, 30)]);
        for _ in 0..50 {
            assert_eq!(perturb(&sol, &s, &locked, &mut rng).unwrap().1, MoveKind::Opacity);
        }
    }

    #[test]
    fn moves_respect_bounds_and_steps() {
        let sol = Solution {
            palette: vec![Srgb8::new(250, 3, 128), Srgb8::new(0, 255, 9)],
            opacities: vec![0.9, 0.1],
            order: RenderOrder::identity(2),
        };
        let s = AnnealSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = [false; 3];
        for _ in 0..2000 {
            let (next, kind) = perturb(&sol, &s, &SearchSpace::default(), &mut rng).unwrap();
            seen[kind as usize] = true;
            let changed_colors = (0..2).filter(|&c| next.palette[c] != sol.palette[c]).count();
            let changed_alpha = (0..2).filter(|&c| next.opacities[c] != sol.opacities[c]).count();
            match kind {
                MoveKind::Color => {
                    assert!(changed_colors <= 1 && changed_alpha == 0);
                    for c in 0..2 {
                        for (a, b) in next.palette[c].channels().iter().zip(sol.palette[c].channels()) {
                            assert!((*a as i32 - b as i32).abs() <= 10);
                        }
                    }
                }
                MoveKind::Opacity => {
                    assert!(changed_colors == 0 && changed_alpha <= 1);
                    assert!(next.opacities.iter().all(|a| (0.1..=0.9).contains(a)));
                }
                MoveKind::Swap => assert_eq!(next.order.as_slice(), &[1, 0]),
            }
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn seeded_runs_are_reproducible_and_feasible() {
        let model = NameModel::from_json(TINY).unwrap();
        let s = two();
        let obj = Objective::new(&s, &model, ObjectiveConfig::default()).unwrap();
        let a = optimize(&obj, &quick(), &SearchSpace::default()).unwrap();
        let b = optimize(&obj, &quick(), &SearchSpace::default()).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.trace, b.trace);
        assert!(check_constraints(&s, &a.breakdown.region_colors, obj.config()).ok);
        let best = a.trace.best_so_far();
        assert!(best.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*best.last().unwrap(), a.breakdown.total);
        assert!(a.breakdown.total >= a.trace.initial_score);
    }

    #[test]
    fn fixed_palette_is_kept() {
        let model = NameModel::from_json(TINY).unwrap();
        let s = two();
        let obj = Objective::new(&s, &model, ObjectiveConfig::default()).unwrap();
        let palette: Vec<Srgb8> = vec!["#1f77b4".parse().unwrap(), "#ff7f0e".parse().unwrap()];
        let out = optimize(&obj, &quick(), &SearchSpace::locked_palette(palette.clone())).unwrap();
        assert_eq!(out.solution.palette, palette);
    }

    #[test]
    fn impossible_start_is_reported() {
        let model = NameModel::from_json(TINY).unwrap();
        let s = two();
        let obj = Objective::new(&s, &model, ObjectiveConfig::default()).unwrap();
        let white = vec![Srgb8::WHITE, Srgb8::WHITE];
        let err = optimize(&obj, &quick(), &SearchSpace::locked_palette(white)).unwrap_err();
        match err {
            AnnealError::InfeasibleStart { attempts, report } => {
                assert_eq!(attempts, 101);
                assert!(!report.ok);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exhausted_retries_return_current_state() {
        let model = NameModel::from_json(TINY).unwrap();
        let s = two();
        let cfg = ObjectiveConfig {
            jnd_threshold: 1e-6,
            bg_contrast: 0.0,
            ..Default::default()
        };
        let obj = Objective::new(&s, &model, cfg).unwrap();
        let sol = Solution {
            palette: vec![Srgb8::new(200, 0, 0), Srgb8::new(0, 0, 200)],
            opacities: vec![0.5, 0.5],
            order: RenderOrder::identity(2),
        };
        let colors = obj.colors(&sol).unwrap();
        let strict = Objective::new(
            &s,
            &model,
            ObjectiveConfig {
                bg_contrast: 100.0,
                ..Default::default()
            },
        )
        .unwrap();
        // No color is 100 L* units from white, so every proposal fails.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = generate_candidate(&strict, &sol, &colors, &AnnealSchedule::default(), &SearchSpace::default(), &mut rng)
            .unwrap();
        assert!(c.exhausted());
        assert_eq!(c.solution, sol);
        let c = generate_candidate(&obj, &sol, &colors, &AnnealSchedule::default(), &SearchSpace::default(), &mut rng)
            .unwrap();
        assert!(!c.exhausted());
        assert_eq!(c.draws, 1);
    }

    #[test]
    fn discrete_moves_stay_on_the_grid() {
        let model = NameModel::from_json(TINY).unwrap();
        let s = two();
        let obj = Objective::new(&s, &model, ObjectiveConfig::default()).unwrap();
        let anchors: Vec<Vec<Srgb8>> = vec![
            vec!["#d62728".parse().unwrap(), "#ff7f0e".parse().unwrap()],
            vec!["#1f77b4".parse().unwrap(), "#2ca02c".parse().unwrap()],
        ];
        let space = SearchSpace {
            moves: MoveSet::Discrete {
                anchors: anchors.clone(),
                opacity_levels: vec![0.3, 0.5, 0.7],
            },
            fixed_palette: None,
        };
        let out = optimize(&obj, &quick(), &space).unwrap();
        for c in 0..2 {
            assert!(anchors[c].contains(&out.solution.palette[c]));
            assert!([0.3, 0.5, 0.7].contains(&out.solution.opacities[c]));
        }
    }

    #[test]
    fn batch_picks_the_best_seed() {
        let model = NameModel::from_json(TINY).unwrap();
        let s = two();
        let obj = Objective::new(&s, &model, ObjectiveConfig::default()).unwrap();
        let runs = optimize_seeds(&obj, &quick(), &SearchSpace::default(), &[1, 2, 3]);
        let best = optimize_batch(&obj, &quick(), &SearchSpace::default(), &[1, 2, 3]).unwrap();
        let top = runs
            .iter()
            .map(|r| r.as_ref().unwrap().breakdown.total)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best.breakdown.total, top);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let model = NameModel::from_json(TINY).unwrap();
        let s = two();
        let obj = Objective::new(&s, &model, ObjectiveConfig::default()).unwrap();
        let out = optimize(&obj, &quick(), &SearchSpace::default()).unwrap();
        let csv = out.trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("iteration,temperature,candidate_score,best_score,move,accepted"));
        assert_eq!(lines.count(), quick().iteration_count());
    }
}
