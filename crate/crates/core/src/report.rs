//! Solution documents: the JSON written by `optimize` and read back by
//! `score` and `render`.
//!
//! A document carries everything needed to repeat the run — palette,
//! opacities, order, the objective and schedule settings and the seed —
//! plus the score breakdown it produced. Serialization is deterministic:
//! fields are emitted in declaration order and floats use the shortest
//! round-trip representation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{AnnealOutcome, AnnealSchedule, SearchSpace};
use crate::names::NameModel;
use crate::objective::{Objective, ObjectiveConfig, ObjectiveError, ScoreBreakdown, Solution};
use crate::scene::SceneStructure;

pub const FORMAT: &str = "blendpal-solution/1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed solution document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported document format {0:?}, expected {FORMAT:?}")]
    Format(String),
    #[error("document has {doc} classes, scene has {scene}")]
    ClassCount { doc: usize, scene: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NameModelInfo {
    pub bins: usize,
    pub terms: usize,
}

impl NameModelInfo {
    pub fn of(model: &NameModel) -> Self {
        Self {
            bins: model.bin_count(),
            terms: model.term_count(),
        }
    }
}

/// One class as it appears in the legend, listed in rendering order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub class: usize,
    pub label: String,
    pub color: crate::color::Srgb8,
    pub opacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub format: String,
    pub class_labels: Vec<String>,
    pub solution: Solution,
    /// Bottom-to-top.
    pub legend: Vec<LegendEntry>,
    pub breakdown: ScoreBreakdown,
    pub objective: ObjectiveConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<AnnealSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_model: Option<NameModelInfo>,
}

pub fn legend(labels: &[String], sol: &Solution) -> Vec<LegendEntry> {
    sol.order
        .as_slice()
        .iter()
        .map(|&k| LegendEntry {
            class: k,
            label: labels.get(k).cloned().unwrap_or_else(|| format!("class {k}")),
            color: sol.palette[k],
            opacity: sol.opacities[k],
        })
        .collect()
}

impl SolutionDocument {
    /// Document for a scored, un-optimized solution.
    pub fn scored(objective: &Objective, model: &NameModel, solution: Solution) -> Result<Self, ObjectiveError> {
        let breakdown = objective.breakdown(&solution)?;
        let labels = objective.scene().class_labels.clone();
        Ok(Self {
            format: FORMAT.into(),
            legend: legend(&labels, &solution),
            class_labels: labels,
            solution,
            breakdown,
            objective: objective.config().clone(),
            schedule: None,
            search: None,
            seed: None,
            name_model: Some(NameModelInfo::of(model)),
        })
    }

    pub fn from_outcome(
        objective: &Objective,
        model: &NameModel,
        schedule: &AnnealSchedule,
        space: &SearchSpace,
        outcome: &AnnealOutcome,
    ) -> Self {
        let labels = objective.scene().class_labels.clone();
        Self {
            format: FORMAT.into(),
            legend: legend(&labels, &outcome.solution),
            class_labels: labels,
            solution: outcome.solution.clone(),
            breakdown: outcome.breakdown.clone(),
            objective: objective.config().clone(),
            schedule: Some(AnnealSchedule {
                seed: outcome.seed,
                ..schedule.clone()
            }),
            search: Some(space.clone()),
            seed: Some(outcome.seed),
            name_model: Some(NameModelInfo::of(model)),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format != FORMAT {
            return Err(ReportError::Format(doc.format));
        }
        Ok(doc)
    }

    /// Scores the stored solution again against `scene`.
    pub fn rescore(&self, scene: &SceneStructure, model: &NameModel) -> Result<ScoreBreakdown, ReportError> {
        if self.solution.m() != scene.m {
            return Err(ReportError::ClassCount {
                doc: self.solution.m(),
                scene: scene.m,
            });
        }
        let objective = Objective::new(scene, model, self.objective.clone())?;
        Ok(objective.breakdown(&self.solution)?)
    }
}
