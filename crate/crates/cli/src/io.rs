//! Input files: histogram specs, mask manifests, name models.

use std::path::{Path, PathBuf};

use blendpal::color::Srgb8;
use blendpal::names::NameModel;
use blendpal::scene::{
    scene_from_masks, validate_scene, HistogramSpec, LayerMask, LayerMaskSet, MaskScene, SceneStructure,
    DEFAULT_MIN_REGION_FRACTION,
};
use serde::{Deserialize, Serialize};

use crate::engine::SceneInput;
use crate::error::{scene_violations, ApiError};

/// Layer masks on disk: one grayscale PNG per class, listed bottom-up in
/// class order. Paths are relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskManifest {
    #[serde(default = "white")]
    pub background: Srgb8,
    pub masks: Vec<MaskEntry>,
    #[serde(default)]
    pub min_region_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskEntry {
    pub label: String,
    pub path: PathBuf,
}

fn white() -> Srgb8 {
    Srgb8::WHITE
}

/// A scene file after loading, with whatever geometry it came with.
pub struct LoadedScene {
    pub structure: SceneStructure,
    pub histogram: Option<HistogramSpec>,
    pub raster: Option<MaskScene>,
}

impl LoadedScene {
    /// What the service would receive for the same chart.
    pub fn input(&self) -> SceneInput {
        match &self.histogram {
            Some(spec) => SceneInput::Histogram(spec.clone()),
            None => SceneInput::Structure(self.structure.clone()),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, ApiError> {
    std::fs::read_to_string(path)
        .map_err(|e| ApiError::bad_input("unreadable_file", format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ApiError> {
    std::fs::write(path, text).map_err(|e| ApiError::internal(format!("cannot write {}: {e}", path.display())))
}

/// Accepts a histogram spec, a mask manifest or a serialized scene structure.
pub fn load_scene(path: &Path) -> Result<LoadedScene, ApiError> {
    let text = read_text(path)?;
    let value: serde_json::Value = ApiError::parse_json(&text)?;
    let has = |k: &str| value.get(k).is_some();
    if has("masks") {
        let manifest: MaskManifest = ApiError::parse_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let raster = load_masks(&manifest, base)?;
        Ok(LoadedScene {
            structure: raster.scene.clone(),
            histogram: None,
            raster: Some(raster),
        })
    } else if has("regions") {
        let structure: SceneStructure = ApiError::parse_json(&text)?;
        let v = validate_scene(&structure);
        if !v.is_empty() {
            return Err(scene_violations(v));
        }
        Ok(LoadedScene {
            structure,
            histogram: None,
            raster: None,
        })
    } else {
        let spec: HistogramSpec = ApiError::parse_json(&text)?;
        let structure = blendpal::scene::scene_from_histograms(&spec)?;
        Ok(LoadedScene {
            structure,
            histogram: Some(spec),
            raster: None,
        })
    }
}

pub fn load_masks(manifest: &MaskManifest, base: &Path) -> Result<MaskScene, ApiError> {
    let mut masks = Vec::with_capacity(manifest.masks.len());
    for (i, entry) in manifest.masks.iter().enumerate() {
        let path = base.join(&entry.path);
        let img = image::open(&path)
            .map_err(|e| ApiError::bad_input("unreadable_mask", format!("{}: {e}", path.display())).at(format!("masks[{i}].path")))?
            .to_luma8();
        let (w, h) = img.dimensions();
        masks.push(LayerMask::from_gray(w, h, img.as_raw()).map_err(|e| ApiError::from(e).at(format!("masks[{i}]")))?);
    }
    let set = LayerMaskSet {
        class_labels: manifest.masks.iter().map(|m| m.label.clone()).collect(),
        masks,
        background: manifest.background,
    };
    Ok(scene_from_masks(&set, manifest.min_region_fraction.unwrap_or(DEFAULT_MIN_REGION_FRACTION))?)
}

/// The model file at `path`, or the built-in prototype model.
pub fn load_model(path: Option<&Path>) -> Result<NameModel, ApiError> {
    match path {
        None => Ok(NameModel::prototype()),
        Some(p) => NameModel::from_json(&read_text(p)?)
            .map_err(|e| ApiError::bad_input("invalid_name_model", format!("{}: {e}", p.display()))),
    }
}

pub fn write_png(path: &Path, width: u32, height: u32, rgb: Vec<u8>) -> Result<(), ApiError> {
    let img = image::RgbImage::from_raw(width, height, rgb).ok_or_else(|| ApiError::internal("pixel buffer size mismatch"))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| ApiError::internal(format!("cannot write {}: {e}", path.display())))
}
