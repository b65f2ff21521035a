//! Study-style stimuli: overlapped Gaussian histograms with controlled
//! roughness, graded by the KL divergence from their ideal shape.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::Srgb8;
use crate::scene::{scene_from_histograms, HistogramSpec};

/// Additive smoothing applied to both distributions before taking logs.
pub const KL_SMOOTHING: f64 = 1e-9;
/// Perturbation draws allowed per class.
pub const MAX_ATTEMPTS: u32 = 10_000;
/// Layouts redrawn when some class ends up without an exclusive region.
const MAX_LAYOUTS: u32 = 100;
/// Ideal bins below this share of the class peak are dropped, so classes
/// have finite support.
const TAIL_CUTOFF: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothness {
    Smooth,
    Moderate,
    Unsmooth,
}

impl Smoothness {
    pub const ALL: [Smoothness; 3] = [Self::Smooth, Self::Moderate, Self::Unsmooth];

    /// Inclusive KL band.
    pub fn band(self) -> (f64, f64) {
        match self {
            Self::Smooth => (0.0, 0.0),
            Self::Moderate => (0.02, 0.04),
            Self::Unsmooth => (0.07, 0.1),
        }
    }

    fn start_amplitude(self) -> f64 {
        match self {
            Self::Smooth => 0.0,
            Self::Moderate => 0.4,
            Self::Unsmooth => 0.65,
        }
    }
}

impl FromStr for Smoothness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "smooth" => Ok(Self::Smooth),
            "moderate" => Ok(Self::Moderate),
            "unsmooth" => Ok(Self::Unsmooth),
            other => Err(format!("unknown smoothness {other:?}")),
        }
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Smooth => "smooth",
            Self::Moderate => "moderate",
            Self::Unsmooth => "unsmooth",
        })
    }
}

fn default_bins() -> usize {
    25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusParams {
    pub classes: usize,
    pub smoothness: Smoothness,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum StimulusError {
    #[error("{field}: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("class {class}: KL band not reached in {attempts} attempts (last {last_kl})")]
    GenerationFailed { class: usize, attempts: u32, last_kl: f64 },
    #[error("no layout with an exclusive region for every class in {0} tries")]
    NoExclusiveLayout(u32),
}

/// A generated histogram set with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub params: StimulusParams,
    pub spec: HistogramSpec,
    /// Measured KL of each class against its ideal Gaussian.
    pub kl: Vec<f64>,
    pub means: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

/// `KL(p || q)` over bin masses, each normalized and smoothed.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions differ in length");
    let norm = |v: &[f64]| -> Vec<f64> {
        let total: f64 = v.iter().sum();
        let denom = total + KL_SMOOTHING * v.len() as f64;
        v.iter().map(|x| (x + KL_SMOOTHING) / denom).collect()
    };
    let (p, q) = (norm(p), norm(q));
    p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum()
}

fn ideal(bins: usize, mean: f64, sigma: f64, amplitude: f64) -> Vec<f64> {
    let mut h: Vec<f64> = (0..bins)
        .map(|b| {
            let x = b as f64 + 0.5 - mean;
            amplitude * (-0.5 * (x / sigma).powi(2)).exp()
        })
        .collect();
    let peak = h.iter().copied().fold(0.0, f64::max);
    for v in &mut h {
        if *v < TAIL_CUTOFF * peak {
            *v = 0.0;
        }
    }
    h
}

/// Multiplies each occupied bin by `1 + a·u`, `u ~ U[-1, 1]`, rescaling to
/// the original mass. The amplitude grows while the KL is below the band
/// and shrinks while above.
fn perturb(
    ideal: &[f64],
    smoothness: Smoothness,
    class: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64), StimulusError> {
    if smoothness == Smoothness::Smooth {
        return Ok((ideal.to_vec(), kl_divergence(ideal, ideal)));
    }
    let (lo, hi) = smoothness.band();
    let mass: f64 = ideal.iter().sum();
    let mut a = smoothness.start_amplitude();
    let mut last_kl = 0.0;
    for _ in 0..MAX_ATTEMPTS {
        let mut h: Vec<f64> = ideal
            .iter()
            .map(|&v| if v > 0.0 { v * (1.0 + a * rng.gen_range(-1.0..=1.0)) } else { 0.0 })
            .collect();
        let scale = mass / h.iter().sum::<f64>();
        for v in &mut h {
            *v *= scale;
        }
        last_kl = kl_divergence(&h, ideal);
        if (lo..=hi).contains(&last_kl) {
            return Ok((h, last_kl));
        }
        a = if last_kl < lo { (a * 1.1).min(0.95) } else { a * 0.95 };
    }
    Err(StimulusError::GenerationFailed {
        class,
        attempts: MAX_ATTEMPTS,
        last_kl,
    })
}

pub fn gen_stimulus(p: &StimulusParams) -> Result<Stimulus, StimulusError> {
    if !(2..=4).contains(&p.classes) {
        return Err(StimulusError::InvalidParams {
            field: "classes",
            reason: format!("{} is not in 2..=4", p.classes),
        });
    }
    if !(10..=1000).contains(&p.bins) {
        return Err(StimulusError::InvalidParams {
            field: "bins",
            reason: format!("{} is not in 10..=1000", p.bins),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let m = p.classes;
    let span = p.bins as f64;
    for _ in 0..MAX_LAYOUTS {
        let mut means = Vec::with_capacity(m);
        let mut sigmas = Vec::with_capacity(m);
        let mut amplitudes = Vec::with_capacity(m);
        let mut heights = Vec::with_capacity(m);
        let mut kl = Vec::with_capacity(m);
        for k in 0..m {
            let jitter = span / (m as f64 + 1.0) * 0.25;
            let mean = span * (k as f64 + 1.0) / (m as f64 + 1.0) + rng.gen_range(-jitter..=jitter);
            let sigma = rng.gen_range(3.0..=5.0);
            let amplitude = rng.gen_range(0.8..=1.2);
            let base = ideal(p.bins, mean, sigma, amplitude);
            let (h, d) = perturb(&base, p.smoothness, k, &mut rng)?;
            means.push(mean);
            sigmas.push(sigma);
            amplitudes.push(amplitude);
            heights.push(h);
            kl.push(d);
        }
        let spec = HistogramSpec {
            class_labels: (0..m).map(|k| ((b'A' + k as u8) as char).to_string()).collect(),
            bin_edges: (0..=p.bins).map(|e| e as f64).collect(),
            heights,
            background: Srgb8::WHITE,
        };
        match scene_from_histograms(&spec) {
            Ok(scene) if scene.warnings.is_empty() => {
                return Ok(Stimulus {
                    params: p.clone(),
                    spec,
                    kl,
                    means,
                    sigmas,
                    amplitudes,
                })
            }
            _ => log::debug!("stimulus seed {}: redrawing layout", p.seed),
        }
    }
    Err(StimulusError::NoExclusiveLayout(MAX_LAYOUTS))
}

/// The 18-stimulus study design: 2, 3 and 4 classes × three smoothness
/// levels × two repetitions, seeded from `base_seed`.
pub fn corpus_params(base_seed: u64) -> Vec<StimulusParams> {
    let mut out = Vec::with_capacity(18);
    for classes in 2..=4 {
        for smoothness in Smoothness::ALL {
            for _ in 0..2 {
                out.push(StimulusParams {
                    classes,
                    smoothness,
                    bins: default_bins(),
                    seed: base_seed + out.len() as u64,
                });
            }
        }
    }
    out
}

pub fn corpus(base_seed: u64) -> Result<Vec<Stimulus>, StimulusError> {
    corpus_params(base_seed).iter().map(gen_stimulus).collect()
}
