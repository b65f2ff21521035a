//! Request types and the operations behind both the CLI and the service.
//! Keeping a single code path is what makes their results identical.

use blendpal::anneal::{optimize as anneal, AnnealSchedule, AnnealTrace, SearchSpace};
use blendpal::names::NameModel;
use blendpal::objective::{Objective, ObjectiveConfig, ScoreBreakdown, Solution};
use blendpal::report::SolutionDocument;
use blendpal::scene::{scene_from_histograms, validate_scene, HistogramSpec, SceneStructure};
use blendpal::stimulus::{gen_stimulus, Stimulus, StimulusParams};
use serde::{Deserialize, Serialize};

use crate::error::{scene_violations, ApiError};

/// A chart to optimize: histogram bars, or a prebuilt region structure
/// (e.g. from layer masks).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneInput {
    Histogram(HistogramSpec),
    Structure(SceneStructure),
}

impl SceneInput {
    pub fn build(&self) -> Result<SceneStructure, ApiError> {
        match self {
            SceneInput::Histogram(spec) => scene_from_histograms(spec).map_err(|e| ApiError::from(e).under("scene.histogram")),
            SceneInput::Structure(s) => {
                let v = validate_scene(s);
                if v.is_empty() {
                    Ok(s.clone())
                } else {
                    Err(scene_violations(v).under("scene.structure"))
                }
            }
        }
    }

    pub fn histogram(&self) -> Option<&HistogramSpec> {
        match self {
            SceneInput::Histogram(spec) => Some(spec),
            SceneInput::Structure(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRequest {
    pub scene: SceneInput,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub schedule: AnnealSchedule,
    #[serde(default)]
    pub search: SearchSpace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub scene: SceneInput,
    pub solution: Solution,
    #[serde(default)]
    pub objective: ObjectiveConfig,
}

/// Trace figures returned alongside a document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub accepted: usize,
    pub skipped: usize,
    pub initial_score: f64,
    pub best_score: f64,
}

impl TraceSummary {
    pub fn of(trace: &AnnealTrace) -> Self {
        Self {
            iterations: trace.records.len(),
            accepted: trace.accepted(),
            skipped: trace.skipped(),
            initial_score: trace.initial_score,
            best_score: trace.records.last().map_or(trace.initial_score, |r| r.best_score),
        }
    }
}

/// Checks everything that can be checked without running the search.
pub fn prepare(req: &OptimizeRequest) -> Result<SceneStructure, ApiError> {
    let scene = req.scene.build()?;
    req.objective.validate()?;
    req.schedule.validate()?;
    req.search.validate(scene.m)?;
    Ok(scene)
}

pub fn run_optimize(
    scene: &SceneStructure,
    model: &NameModel,
    req: &OptimizeRequest,
) -> Result<(SolutionDocument, AnnealTrace), ApiError> {
    let objective = Objective::new(scene, model, req.objective.clone())?;
    let out = anneal(&objective, &req.schedule, &req.search)?;
    let doc = SolutionDocument::from_outcome(&objective, model, &req.schedule, &req.search, &out);
    Ok((doc, out.trace))
}

pub fn run_score(model: &NameModel, req: &ScoreRequest) -> Result<ScoreBreakdown, ApiError> {
    let scene = req.scene.build()?;
    if req.solution.m() != scene.m {
        return Err(ApiError::bad_input(
            "invalid_solution",
            format!("solution has {} classes, scene has {}", req.solution.m(), scene.m),
        )
        .at("solution"));
    }
    let objective = Objective::new(&scene, model, req.objective.clone())?;
    Ok(objective.breakdown(&req.solution)?)
}

pub fn run_stimulus(params: &StimulusParams) -> Result<Stimulus, ApiError> {
    Ok(gen_stimulus(params)?)
}
