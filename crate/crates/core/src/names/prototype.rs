//! Synthetic name model used when no survey data is supplied.
//!
//! Bins sit on a regular Lab grid clipped to the sRGB gamut. Each term has a prototype color and
//! contributes counts that fall off as a Gaussian in CIEDE2000 distance.

use super::NameModel;
use crate::color::{ciede2000, lab_to_srgb, Lab, Srgb8};

const PEAK_COUNT: f64 = 100.0;
const SPREAD: f64 = 15.0;

const TERMS: &[(&str, Srgb8)] = &[
    ("red", Srgb8::new(0xe5, 0x00, 0x00)),
    ("green", Srgb8::new(0x15, 0xb0, 0x1a)),
    ("blue", Srgb8::new(0x03, 0x43, 0xdf)),
    ("yellow", Srgb8::new(0xff, 0xff, 0x14)),
    ("orange", Srgb8::new(0xf9, 0x73, 0x06)),
    ("purple", Srgb8::new(0x7e, 0x1e, 0x9c)),
    ("pink", Srgb8::new(0xff, 0x81, 0xc0)),
    ("brown", Srgb8::new(0x65, 0x37, 0x00)),
    ("grey", Srgb8::new(0x92, 0x95, 0x91)),
    ("black", Srgb8::new(0x00, 0x00, 0x00)),
    ("white", Srgb8::new(0xff, 0xff, 0xff)),
    ("teal", Srgb8::new(0x02, 0x93, 0x86)),
    ("light blue", Srgb8::new(0x95, 0xd0, 0xfc)),
    ("light green", Srgb8::new(0x96, 0xf9, 0x7b)),
    ("magenta", Srgb8::new(0xc2, 0x00, 0x78)),
    ("dark blue", Srgb8::new(0x00, 0x03, 0x5b)),
    ("lavender", Srgb8::new(0xc7, 0x9f, 0xef)),
    ("beige", Srgb8::new(0xe6, 0xda, 0xa6)),
    ("maroon", Srgb8::new(0x65, 0x00, 0x21)),
    ("olive", Srgb8::new(0x6e, 0x75, 0x0e)),
    ("tan", Srgb8::new(0xd1, 0xb2, 0x6f)),
    ("cyan", Srgb8::new(0x00, 0xff, 0xff)),
    ("lime", Srgb8::new(0xaa, 0xff, 0x32)),
    ("dark green", Srgb8::new(0x03, 0x35, 0x00)),
    ("salmon", Srgb8::new(0xff, 0x79, 0x6c)),
    ("sky blue", Srgb8::new(0x75, 0xbb, 0xfd)),
    ("violet", Srgb8::new(0x9a, 0x0e, 0xea)),
    ("gold", Srgb8::new(0xdb, 0xb4, 0x0c)),
    ("peach", Srgb8::new(0xff, 0xb0, 0x7c)),
    ("light grey", Srgb8::new(0xd8, 0xdc, 0xd6)),
];

/// In-gamut points of a regular Lab grid with spacing `step`.
fn lab_grid(step: f64) -> Vec<Lab> {
    let mut out = Vec::new();
    let span = |lo: f64, hi: f64| {
        let n = ((hi - lo) / step).floor() as i64;
        (0..=n).map(move |k| lo + k as f64 * step)
    };
    for l in span(0.0, 100.0) {
        for a in span(-130.0, 130.0) {
            for b in span(-130.0, 130.0) {
                let lab = Lab::new(l, a, b);
                if !lab_to_srgb(lab).1 {
                    out.push(lab);
                }
            }
        }
    }
    out
}

pub(super) fn build_with_step(step: f64) -> NameModel {
    let anchors: Vec<Lab> = TERMS.iter().map(|(_, c)| c.to_lab()).collect();
    let bins = lab_grid(step);
    let rows = bins
        .iter()
        .map(|&lab| {
            let dists: Vec<f64> = anchors.iter().map(|&a| ciede2000(lab, a)).collect();
            let mut row: Vec<(u32, u32)> = dists
                .iter()
                .enumerate()
                .filter_map(|(t, &d)| {
                    let count = (PEAK_COUNT * (-0.5 * (d / SPREAD).powi(2)).exp()).round() as u32;
                    (count > 0).then_some((t as u32, count))
                })
                .collect();
            if row.is_empty() {
                let nearest = dists
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(t, _)| t as u32)
                    .expect("terms non-empty");
                row.push((nearest, 1));
            }
            row
        })
        .collect();
    let terms = TERMS.iter().map(|(n, _)| n.to_string()).collect();
    NameModel::from_sparse(bins, terms, rows).expect("prototype model is valid")
}
