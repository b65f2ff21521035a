//! JSON file format for name models, plus a converter for the flattened
//! color-term survey export (`color` Lab triples, `terms`, sparse `T`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::NameModel;
use crate::color::Lab;

pub const MODEL_FORMAT: &str = "blendpal-name-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NameModelError {
    #[error("name model parse error: {0}")]
    Parse(String),
    #[error("name model record {section}[{index}]: {reason}")]
    Record {
        section: &'static str,
        index: usize,
        reason: String,
    },
    #[error("invalid name model: {0}")]
    Invalid(String),
}

/// On-disk layout: `bins` is a flat list of L,a,b triples and `counts` holds
/// sparse `[bin, term, count]` records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NameModelFile {
    pub format: String,
    pub version: u32,
    pub terms: Vec<String>,
    pub bins: Vec<f64>,
    pub counts: Vec<Vec<f64>>,
}

impl NameModelFile {
    pub fn parse(text: &str) -> Result<Self, NameModelError> {
        let file: NameModelFile =
            serde_json::from_str(text).map_err(|e| NameModelError::Parse(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(NameModelError::Parse(format!(
                "unexpected format tag {:?}, expected {MODEL_FORMAT:?}",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(NameModelError::Parse(format!(
                "unsupported version {}, expected {MODEL_VERSION}",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn into_model(self) -> Result<NameModel, NameModelError> {
        if !self.bins.len().is_multiple_of(3) {
            return Err(NameModelError::Record {
                section: "bins",
                index: self.bins.len() / 3,
                reason: format!("{} values is not a whole number of L,a,b triples", self.bins.len()),
            });
        }
        let bins: Vec<Lab> = self
            .bins
            .chunks_exact(3)
            .map(|c| Lab::new(c[0], c[1], c[2]))
            .collect();
        if bins.is_empty() || self.counts.is_empty() {
            return Err(NameModelError::Invalid("empty count matrix".into()));
        }
        let mut rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); bins.len()];
        for (index, rec) in self.counts.iter().enumerate() {
            let bad = |reason: String| NameModelError::Record {
                section: "counts",
                index,
                reason,
            };
            if rec.len() != 3 {
                return Err(bad(format!("expected [bin, term, count], got {} values", rec.len())));
            }
            let as_index = |v: f64, what: &str, limit: usize| {
                if v.fract() != 0.0 || v < 0.0 || v >= limit as f64 {
                    Err(bad(format!("{what} index {v} out of range 0..{limit}")))
                } else {
                    Ok(v as usize)
                }
            };
            let bin = as_index(rec[0], "bin", bins.len())?;
            let term = as_index(rec[1], "term", self.terms.len())?;
            let count = rec[2];
            if count.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&count) {
                return Err(bad(format!("count {count} is not a non-negative integer")));
            }
            let row = &mut rows[bin];
            if row.iter().any(|&(t, _)| t as usize == term) {
                return Err(bad(format!("duplicate entry for bin {bin}, term {term}")));
            }
            if count > 0.0 {
                row.push((term as u32, count as u32));
            }
        }
        NameModel::from_sparse(bins, self.terms, rows)
    }

    pub fn from_model(model: &NameModel) -> Self {
        let bins = model.bins().iter().flat_map(|b| [b.l, b.a, b.b]).collect();
        let counts = (0..model.bin_count())
            .flat_map(|i| {
                model
                    .row(i)
                    .iter()
                    .map(move |&(t, c)| vec![i as f64, t as f64, c as f64])
            })
            .collect();
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            terms: model.terms().to_vec(),
            bins,
            counts,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model file serializes")
    }
}

#[derive(Debug, Deserialize)]
struct SurveyExport {
    color: Vec<f64>,
    terms: Vec<String>,
    #[serde(rename = "T")]
    t: Vec<f64>,
}

/// Summary of a survey-export conversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionStats {
    pub bins: usize,
    pub terms: usize,
    pub dropped_empty_bins: usize,
}

/// Converts the survey export layout, where `T` alternates flat indices
/// (`bin * term_count + term`) and counts. Bins with no counts are dropped.
pub fn convert_survey_export(text: &str) -> Result<(NameModel, ConversionStats), NameModelError> {
    let export: SurveyExport =
        serde_json::from_str(text).map_err(|e| NameModelError::Parse(e.to_string()))?;
    if !export.color.len().is_multiple_of(3) {
        return Err(NameModelError::Record {
            section: "color",
            index: export.color.len() / 3,
            reason: "color list is not a whole number of L,a,b triples".into(),
        });
    }
    if !export.t.len().is_multiple_of(2) {
        return Err(NameModelError::Record {
            section: "T",
            index: export.t.len() / 2,
            reason: "T must alternate index and count".into(),
        });
    }
    let n_bins = export.color.len() / 3;
    let n_terms = export.terms.len();
    if n_terms == 0 {
        return Err(NameModelError::Invalid("export has no terms".into()));
    }
    let mut rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n_bins];
    for (index, pair) in export.t.chunks_exact(2).enumerate() {
        let (flat, count) = (pair[0], pair[1]);
        if flat.fract() != 0.0 || flat < 0.0 || flat >= (n_bins * n_terms) as f64 {
            return Err(NameModelError::Record {
                section: "T",
                index,
                reason: format!("flat index {flat} out of range"),
            });
        }
        if count.fract() != 0.0 || count < 0.0 {
            return Err(NameModelError::Record {
                section: "T",
                index,
                reason: format!("count {count} is not a non-negative integer"),
            });
        }
        let flat = flat as usize;
        if count > 0.0 {
            let row = &mut rows[flat / n_terms];
            let term = (flat % n_terms) as u32;
            match row.iter_mut().find(|(t, _)| *t == term) {
                Some(entry) => entry.1 += count as u32,
                None => row.push((term, count as u32)),
            }
        }
    }
    let mut bins = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = 0;
    for (i, row) in rows.into_iter().enumerate() {
        if row.is_empty() {
            dropped += 1;
            continue;
        }
        let c = &export.color[3 * i..3 * i + 3];
        bins.push(Lab::new(c[0], c[1], c[2]));
        kept.push(row);
    }
    let model = NameModel::from_sparse(bins, export.terms, kept)?;
    let stats = ConversionStats {
        bins: model.bin_count(),
        terms: model.term_count(),
        dropped_empty_bins: dropped,
    };
    Ok((model, stats))
}
