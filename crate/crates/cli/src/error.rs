//! One error type for the CLI and the service: a stable code, a message and,
//! where it applies, the path of the offending field.

use std::fmt;

use blendpal::anneal::AnnealError;
use blendpal::objective::{ObjectiveError, Violation};
use blendpal::render::RenderError;
use blendpal::report::ReportError;
use blendpal::scene::{SceneError, SceneViolation};
use blendpal::stimulus::StimulusError;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// The request or input files cannot be used as given.
    BadInput,
    /// Inputs were fine but no feasible starting solution exists.
    Infeasible,
    /// Generation ran out of attempts.
    Exhausted,
    NotFound,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Detail {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub kind: Kind,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Detail>,
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{field}: {}", self.message)?,
            None => write!(f, "{}", self.message)?,
        }
        for v in &self.violations {
            write!(f, "\n  {}: {}", v.code, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ApiError {}

impl ApiError {
    pub fn new(kind: Kind, code: &str, message: impl Into<String>) -> Self {
        Self {
            kind,
            code: code.into(),
            message: message.into(),
            field: None,
            violations: Vec::new(),
        }
    }

    pub fn bad_input(code: &str, message: impl Into<String>) -> Self {
        Self::new(Kind::BadInput, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(Kind::Internal, "internal", message)
    }

    pub fn at(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    /// Prefixes the field path, e.g. `heights` becomes `scene.histogram.heights`.
    pub fn under(mut self, prefix: &str) -> Self {
        self.field = Some(match self.field.take() {
            Some(f) if !f.is_empty() => format!("{prefix}.{f}"),
            _ => prefix.to_string(),
        });
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::BadInput | Kind::NotFound => 2,
            Kind::Infeasible => 3,
            Kind::Exhausted | Kind::Internal => 1,
        }
    }

    pub fn http_status(&self) -> u16 {
        match self.kind {
            Kind::BadInput => 400,
            Kind::NotFound => 404,
            Kind::Infeasible | Kind::Exhausted => 422,
            Kind::Internal => 500,
        }
    }

    /// Parses JSON, reporting the path of the first field that fails.
    pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ApiError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let err = ApiError::bad_input("malformed_json", e.into_inner().to_string());
            if path == "." { err } else { err.at(path) }
        })
    }
}

impl From<SceneError> for ApiError {
    fn from(e: SceneError) -> Self {
        let err = ApiError::bad_input("invalid_scene", e.to_string());
        match e {
            SceneError::InvalidInput { field, reason } => ApiError::bad_input("invalid_scene", reason).at(field),
            SceneError::EmptyClass(k) | SceneError::NoRepresentative(k) => err.at(format!("heights[{k}]")),
            SceneError::DimensionMismatch { index, .. } => err.at(format!("masks[{index}]")),
            _ => err,
        }
    }
}

pub fn scene_violations(v: Vec<SceneViolation>) -> ApiError {
    let mut err = ApiError::bad_input("invalid_scene", format!("scene breaks {} invariant(s)", v.len()));
    err.violations = v
        .into_iter()
        .map(|v| Detail {
            code: v.code.into(),
            message: v.message,
            field: None,
        })
        .collect();
    err
}

impl From<ObjectiveError> for ApiError {
    fn from(e: ObjectiveError) -> Self {
        match e {
            ObjectiveError::InvalidConfig { field, reason } => {
                ApiError::bad_input("invalid_config", reason).at(format!("objective.{field}"))
            }
            ObjectiveError::DimensionMismatch { .. } | ObjectiveError::Composite(_) => {
                ApiError::bad_input("invalid_solution", e.to_string()).at("solution")
            }
        }
    }
}

fn violation_detail(v: &Violation) -> Detail {
    let code = match v {
        Violation::Jnd { .. } => "jnd",
        Violation::Contrast { .. } => "contrast",
    };
    Detail {
        code: code.into(),
        message: v.to_string(),
        field: None,
    }
}

impl From<AnnealError> for ApiError {
    fn from(e: AnnealError) -> Self {
        match e {
            AnnealError::InvalidSchedule { field, reason } => {
                ApiError::bad_input("invalid_schedule", reason).at(format!("schedule.{field}"))
            }
            AnnealError::InvalidMoves(reason) => ApiError::bad_input("invalid_search", reason).at("search"),
            AnnealError::InfeasibleStart { attempts, report } => {
                let mut err = ApiError::new(
                    Kind::Infeasible,
                    "infeasible_start",
                    format!("no solution satisfying the constraints found in {attempts} attempts"),
                );
                err.violations = report.violations.iter().map(violation_detail).collect();
                err
            }
            AnnealError::Objective(e) => e.into(),
        }
    }
}

impl From<StimulusError> for ApiError {
    fn from(e: StimulusError) -> Self {
        match e {
            StimulusError::InvalidParams { field, reason } => ApiError::bad_input("invalid_params", reason).at(field),
            other => ApiError::new(Kind::Exhausted, "generation_failed", other.to_string()),
        }
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Objective(e) => e.into(),
            ReportError::ClassCount { .. } => ApiError::bad_input("invalid_solution", e.to_string()).at("solution"),
            other => ApiError::bad_input("invalid_document", other.to_string()),
        }
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::Scene(e) => e.into(),
            RenderError::Composite(_) | RenderError::ClassCount { .. } => {
                ApiError::bad_input("invalid_solution", e.to_string()).at("solution")
            }
            RenderError::NoPlotArea => ApiError::bad_input("invalid_render_options", e.to_string()),
        }
    }
}
