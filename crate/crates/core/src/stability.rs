//! Rigid Procrustes alignment of a fresh component layout onto the previous
//! frame's positions.

use std::collections::BTreeMap;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, Point};
use crate::layout::ComponentLayout;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("alignment needs at least 2 shared nodes, got {0}")]
    TooFewCorrespondences(usize),
}

/// `p ↦ R·p + t` with `R` orthogonal (reflections allowed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    /// Row-major 2×2.
    pub rotation: [[f64; 2]; 2],
    pub translation: Point,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: [[1.0, 0.0], [0.0, 1.0]],
        translation: Point::ORIGIN,
    };

    /// Rotation by `angle` radians, optionally preceded by the reflection
    /// `y ↦ −y`, followed by `translation`.
    pub fn from_angle(angle: f64, reflect: bool, translation: Point) -> Self {
        let (s, c) = angle.sin_cos();
        let f = if reflect { -1.0 } else { 1.0 };
        RigidTransform {
            rotation: [[c, -s * f], [s, c * f]],
            translation,
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        let r = &self.rotation;
        Point::new(
            r[0][0] * p.x + r[0][1] * p.y + self.translation.x,
            r[1][0] * p.x + r[1][1] * p.y + self.translation.y,
        )
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rotation;
        r[0][0] * r[1][1] - r[0][1] * r[1][0]
    }

    /// Max-norm deviation of `RᵀR` from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let r = Matrix2::new(
            self.rotation[0][0],
            self.rotation[0][1],
            self.rotation[1][0],
            self.rotation[1][1],
        );
        (r.transpose() * r - Matrix2::identity()).amax()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// Root-mean-square of `‖T(new_i) − old_i‖` over the pairs.
pub fn rms_residual(t: &RigidTransform, pairs: &[(Point, Point)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs.iter().map(|&(new, old)| t.apply(new).dist2(old)).sum();
    (sum / pairs.len() as f64).sqrt()
}

/// Mean Euclidean distance `‖T(new_i) − old_i‖`.
pub fn mean_displacement(t: &RigidTransform, pairs: &[(Point, Point)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|&(new, old)| t.apply(new).dist(old)).sum::<f64>() / pairs.len() as f64
}

/// Least-squares rigid transform mapping `new` points onto `old` points.
///
/// `pairs` holds `(new, old)` correspondences. Solved through the SVD of the
/// centered cross-covariance `H = Σ a_i b_iᵀ = U Σ Vᵀ`, giving `R = V Uᵀ`
/// (no determinant correction, so reflections are admitted). Returns the
/// transform and its RMS residual.
pub fn procrustes_align(pairs: &[(Point, Point)]) -> Result<(RigidTransform, f64), AlignError> {
    if pairs.len() < 2 {
        return Err(AlignError::TooFewCorrespondences(pairs.len()));
    }
    let cn = geom::centroid(pairs.iter().map(|p| p.0)).expect("non-empty");
    let co = geom::centroid(pairs.iter().map(|p| p.1)).expect("non-empty");

    if pairs.iter().all(|&(new, _)| new == pairs[0].0) {
        let t = RigidTransform {
            translation: co.sub(cn),
            ..RigidTransform::IDENTITY
        };
        return Ok((t, rms_residual(&t, pairs)));
    }

    let mut h = Matrix2::<f64>::zeros();
    for &(new, old) in pairs {
        let a = new.sub(cn);
        let b = old.sub(co);
        h[(0, 0)] += a.x * b.x;
        h[(0, 1)] += a.x * b.y;
        h[(1, 0)] += a.y * b.x;
        h[(1, 1)] += a.y * b.y;
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let r = v_t.transpose() * u.transpose();
    let rotation = [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]];
    let rc = RigidTransform {
        rotation,
        translation: Point::ORIGIN,
    }
    .apply(cn);
    let t = RigidTransform {
        rotation,
        translation: co.sub(rc),
    };
    Ok((t, rms_residual(&t, pairs)))
}

/// Maps every position through `t`.
pub fn apply_transform(layout: &ComponentLayout, t: &RigidTransform) -> ComponentLayout {
    if t.is_identity() {
        return layout.clone();
    }
    ComponentLayout {
        component_id: layout.component_id.clone(),
        positions: layout
            .positions
            .iter()
            .map(|(id, &p)| (id.clone(), t.apply(p)))
            .collect(),
        stress: layout.stress,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub layout: ComponentLayout,
    pub transform: RigidTransform,
    pub shared: usize,
}

/// Aligns `layout` onto `previous` over their shared node ids.
///
/// Fewer than two shared nodes leaves the layout untouched. The transform is
/// also dropped when it would not lower the mean displacement of the shared
/// nodes, so alignment never moves shared nodes further on average.
pub fn align_to_previous(layout: &ComponentLayout, previous: &BTreeMap<String, Point>) -> Alignment {
    let pairs: Vec<(Point, Point)> = layout
        .positions
        .iter()
        .filter_map(|(id, &p)| previous.get(id).map(|&q| (p, q)))
        .collect();
    let keep = |shared| Alignment {
        layout: layout.clone(),
        transform: RigidTransform::IDENTITY,
        shared,
    };
    let Ok((t, _)) = procrustes_align(&pairs) else {
        return keep(pairs.len());
    };
    if mean_displacement(&t, &pairs) >= mean_displacement(&RigidTransform::IDENTITY, &pairs) {
        return keep(pairs.len());
    }
    Alignment {
        layout: apply_transform(layout, &t),
        transform: t,
        shared: pairs.len(),
    }
}
