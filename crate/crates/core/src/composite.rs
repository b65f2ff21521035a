//! Porter-Duff `over` compositing and per-region color resolution.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{encode_channel, LinearRgb, Srgb8};
use crate::scene::ClassSet;

/// A color with coverage. `color` is in whatever space blending happens in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rgba {
    pub color: LinearRgb,
    pub alpha: f64,
}

impl Rgba {
    pub const fn new(color: LinearRgb, alpha: f64) -> Self {
        Self { color, alpha }
    }

    pub const fn opaque(color: LinearRgb) -> Self {
        Self { color, alpha: 1.0 }
    }
}

/// Porter-Duff `src over dst` with non-premultiplied colors.
///
/// `α' = α_s + α_d (1 - α_s)`, `c' = (α_s c_s + α_d c_d (1 - α_s)) / α'`.
/// A fully transparent result is black with zero alpha.
pub fn over(src: Rgba, dst: Rgba) -> Rgba {
    let alpha = src.alpha + dst.alpha * (1.0 - src.alpha);
    if alpha == 0.0 {
        return Rgba::new(LinearRgb::new(0.0, 0.0, 0.0), 0.0);
    }
    let dst_w = dst.alpha * (1.0 - src.alpha);
    let mix = |s: f64, d: f64| (src.alpha * s + dst_w * d) / alpha;
    Rgba::new(
        LinearRgb::new(
            mix(src.color.r, dst.color.r),
            mix(src.color.g, dst.color.g),
            mix(src.color.b, dst.color.b),
        ),
        alpha,
    )
}

/// Space in which layer colors are interpolated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendSpace {
    /// Linear-light intensities.
    #[default]
    Linear,
    /// Gamma-encoded sRGB values, as most plotting libraries and browsers do.
    Gamma,
}

impl BlendSpace {
    pub fn decode(self, c: Srgb8) -> LinearRgb {
        match self {
            BlendSpace::Linear => c.to_linear(),
            BlendSpace::Gamma => LinearRgb::from_array(c.to_unit()),
        }
    }

    pub fn encode(self, c: LinearRgb) -> Srgb8 {
        match self {
            BlendSpace::Linear => c.to_srgb8(),
            BlendSpace::Gamma => Srgb8::from_unit(c.to_array()),
        }
    }
}

impl std::str::FromStr for BlendSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "gamma" => Ok(Self::Gamma),
            other => Err(format!("unknown blend space {other:?}")),
        }
    }
}

/// Bottom-to-top drawing sequence of the classes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct RenderOrder(Vec<usize>);

#[derive(Debug, Error, PartialEq)]
pub enum CompositeError {
    #[error("render order {0:?} is not a permutation of 0..{1}")]
    NotAPermutation(Vec<usize>, usize),
    #[error("region signature is empty")]
    EmptySignature,
    #[error("palette has {palette} colors, opacities {opacities}, order {order}")]
    LengthMismatch {
        palette: usize,
        opacities: usize,
        order: usize,
    },
    #[error("signature references class {0} but only {1} classes exist")]
    ClassOutOfRange(usize, usize),
    #[error("opacity {0} outside [0, 1]")]
    BadOpacity(f64),
}

impl RenderOrder {
    pub fn new(order: Vec<usize>) -> Result<Self, CompositeError> {
        let m = order.len();
        let mut seen = vec![false; m];
        for &c in &order {
            if c >= m || seen[c] {
                return Err(CompositeError::NotAPermutation(order, m));
            }
            seen[c] = true;
        }
        Ok(Self(order))
    }

    pub fn identity(m: usize) -> Self {
        Self((0..m).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Swaps the classes at two positions.
    pub fn swap(&mut self, i: usize, j: usize) {
        self.0.swap(i, j);
    }

    /// Drawing position of each class (0 = bottom).
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (p, &c) in self.0.iter().enumerate() {
            pos[c] = p;
        }
        pos
    }
}

impl TryFrom<Vec<usize>> for RenderOrder {
    type Error = CompositeError;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<RenderOrder> for Vec<usize> {
    fn from(o: RenderOrder) -> Self {
        o.0
    }
}

impl fmt::Display for RenderOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Composites the layers of `signature` over the opaque background, bottom
/// to top in `order`, and returns the blended value in the blend space.
pub fn composite_signature(
    signature: ClassSet,
    palette: &[Srgb8],
    opacities: &[f64],
    order: &RenderOrder,
    background: Srgb8,
    space: BlendSpace,
) -> Result<Rgba, CompositeError> {
    let m = palette.len();
    if opacities.len() != m || order.len() != m {
        return Err(CompositeError::LengthMismatch {
            palette: m,
            opacities: opacities.len(),
            order: order.len(),
        });
    }
    if signature.is_empty() {
        return Err(CompositeError::EmptySignature);
    }
    if let Some(c) = signature.iter().find(|&c| c >= m) {
        return Err(CompositeError::ClassOutOfRange(c, m));
    }
    let mut acc = Rgba::opaque(space.decode(background));
    for &class in order.as_slice() {
        if !signature.contains(class) {
            continue;
        }
        let a = opacities[class];
        if !(0.0..=1.0).contains(&a) {
            return Err(CompositeError::BadOpacity(a));
        }
        acc = over(Rgba::new(space.decode(palette[class]), a), acc);
    }
    Ok(acc)
}

/// Final display color of a region with the given class signature.
pub fn region_color(
    signature: ClassSet,
    palette: &[Srgb8],
    opacities: &[f64],
    order: &RenderOrder,
    background: Srgb8,
    space: BlendSpace,
) -> Result<Srgb8, CompositeError> {
    composite_signature(signature, palette, opacities, order, background, space).map(|c| space.encode(c.color))
}

/// sRGB encoding of a linear color without quantization, for tolerance checks.
pub fn encode_unquantized(c: LinearRgb) -> [f64; 3] {
    c.to_array().map(|v| encode_channel(v.clamp(0.0, 1.0)) * 255.0)
}
