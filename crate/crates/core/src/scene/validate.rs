use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::SceneStructure;

/// One broken scene invariant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SceneViolation {
    pub code: &'static str,
    pub message: String,
}

impl fmt::Display for SceneViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Checks every structural invariant of a scene and lists the violations.
pub fn validate_scene(s: &SceneStructure) -> Vec<SceneViolation> {
    let mut out = Vec::new();
    let mut flag = |code: &'static str, message: String| out.push(SceneViolation { code, message });
    let m = s.m;
    let n = s.regions.len();

    if m == 0 {
        flag("no_classes", "scene has no classes".into());
    }
    if s.class_labels.len() != m {
        flag("labels", format!("{} labels for {m} classes", s.class_labels.len()));
    }
    if n < m {
        flag("region_count", format!("{n} regions for {m} classes"));
    }

    let mut seen = BTreeSet::new();
    for (i, r) in s.regions.iter().enumerate() {
        if r.id != i {
            flag("region_id", format!("region at position {i} has id {}", r.id));
        }
        if r.signature.is_empty() {
            flag("empty_signature", format!("region {i} has an empty signature"));
        }
        if r.signature.iter().any(|c| c >= m) {
            flag("signature_range", format!("region {i} references a class >= {m}"));
        }
        if !seen.insert(r.signature) {
            flag("duplicate_signature", format!("region {i} repeats signature {:?}", r.signature));
        }
        if !(r.size.is_finite() && r.size > 0.0) {
            flag("region_size", format!("region {i} has size {}", r.size));
        }
    }
    let total: f64 = s.regions.iter().map(|r| r.size).sum();
    if total > 1.0 + 1e-9 {
        flag("size_sum", format!("region sizes sum to {total}"));
    }

    let membership_ok = s.membership.len() == n && s.membership.iter().all(|row| row.len() == m);
    if !membership_ok {
        flag("membership_shape", format!("membership is not {n}x{m}"));
    } else {
        for (i, r) in s.regions.iter().enumerate() {
            let expected: Vec<u8> = (0..m).map(|c| r.signature.contains(c) as u8).collect();
            if s.membership[i] != expected {
                flag("membership", format!("membership row {i} disagrees with signature {:?}", r.signature));
            }
        }
        for i in 0..m.min(n) {
            let row = &s.membership[i];
            if row[i] != 1 {
                flag("base_region", format!("region {i} does not belong to class {i}"));
            } else if row.iter().map(|&v| v as usize).sum::<usize>() != 1 && !s.exclusive_missing(i) {
                flag("base_region", format!("base region {i} belongs to more than one class"));
            }
        }
    }

    if s.pair_share.len() != n || s.pair_share.iter().any(|row| row.len() != n) {
        flag("pair_share_shape", format!("pair_share is not {n}x{n}"));
    } else if membership_ok {
        for i in 0..n {
            for j in 0..n {
                let dot: u32 = s.membership[i]
                    .iter()
                    .zip(&s.membership[j])
                    .map(|(&a, &b)| (a * b) as u32)
                    .sum();
                if s.pair_share[i][j] != dot {
                    flag(
                        "pair_share",
                        format!("W[{i}][{j}] = {} but M_i·M_j = {dot}", s.pair_share[i][j]),
                    );
                }
            }
        }
    }

    if s.adjacency.len() != n {
        flag("adjacency_shape", format!("{} neighbor lists for {n} regions", s.adjacency.len()));
    } else {
        for (i, ns) in s.adjacency.iter().enumerate() {
            for &j in ns {
                if j >= n {
                    flag("adjacency_range", format!("region {i} lists neighbor {j}"));
                } else if j == i {
                    flag("adjacency_reflexive", format!("region {i} is its own neighbor"));
                } else if !s.adjacency[j].contains(&i) {
                    flag("adjacency_symmetry", format!("{i} lists {j} but not vice versa"));
                }
            }
        }
    }
    out
}
