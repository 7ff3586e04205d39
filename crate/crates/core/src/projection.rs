//! Euclidean projection onto a sparsity model intersected with a ball.
//!
//! The production path picks the generator `S` maximising `‖v|_S‖` and then
//! pulls `v|_S` back onto the sphere of radius `r` when it lies outside.
//! [`brute_force_project`] instead minimises the distance over every
//! generator and serves as the oracle for it.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelKind, SparsityModel, Support};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionResult {
    #[serde(serialize_with = "serialize_dvector")]
    pub vector: DVector<f64>,
    /// Non-zero coordinates of `vector`.
    pub support: Support,
    /// Maximal generator the projection was restricted to.
    pub chosen_generator: Support,
    /// Whether the sphere rescaling fired.
    pub scaled: bool,
}

pub(crate) fn serialize_dvector<S: serde::Serializer>(
    v: &DVector<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// Euclidean norm accumulated in index order.
pub fn norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projects `v` onto the closed ball of radius `radius`. The result's
/// computed norm never exceeds `radius`, so projecting twice is a no-op.
pub fn rescale_to_ball(v: DVector<f64>, radius: f64) -> (DVector<f64>, bool) {
    let n = norm(&v);
    if n <= radius {
        return (v, false);
    }
    let mut scale = radius / n;
    loop {
        let w = &v * scale;
        if norm(&w) <= radius {
            return (w, true);
        }
        scale = scale.next_down();
    }
}

fn check_input(model: &SparsityModel, v: &DVector<f64>) -> Result<()> {
    if v.len() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            got: v.len(),
        });
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("projection input coordinate {i}")));
    }
    Ok(())
}

fn check_radius(radius: f64) -> Result<()> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    Ok(())
}

/// Generator maximising `‖v|_S‖`; ties go to the lexicographically smallest
/// generator.
fn best_generator(model: &SparsityModel, v: &DVector<f64>) -> Support {
    match model.kind() {
        ModelKind::PlainK { k } => {
            let mut order: Vec<usize> = (0..v.len()).collect();
            // Larger magnitude first, smaller index wins among equals.
            order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
            order.truncate(*k);
            order.sort_unstable();
            Support::from_sorted(order)
        }
        ModelKind::DisjointGroups { cells, active } => {
            let energy: Vec<f64> = cells.iter().map(|c| c.restricted_norm_squared(v)).collect();
            let mut order: Vec<usize> = (0..cells.len()).collect();
            order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));
            order[..*active]
                .iter()
                .fold(Support::empty(), |acc, &c| acc.union(&cells[c]))
        }
        ModelKind::Explicit { generators } => {
            let mut best = 0;
            let mut best_energy = generators[0].restricted_norm_squared(v);
            for (i, g) in generators.iter().enumerate().skip(1) {
                let e = g.restricted_norm_squared(v);
                if e > best_energy {
                    best = i;
                    best_energy = e;
                }
            }
            generators[best].clone()
        }
    }
}

fn finish(generator: Support, vector: DVector<f64>, scaled: bool) -> ProjectionResult {
    ProjectionResult {
        support: Support::of_vector(&vector),
        vector,
        chosen_generator: generator,
        scaled,
    }
}

/// Projection onto `M(C)` with no norm constraint.
pub fn project_unbounded(model: &SparsityModel, v: &DVector<f64>) -> Result<ProjectionResult> {
    check_input(model, v)?;
    let generator = best_generator(model, v);
    let vector = generator.restrict(v);
    Ok(finish(generator, vector, false))
}

/// Projection onto `M(C)` intersected with the ball of radius `radius`
/// (`f64::INFINITY` allowed): the unbounded projection pulled back onto the
/// sphere when it lies outside the ball.
pub fn project_bounded(model: &SparsityModel, radius: f64, v: &DVector<f64>) -> Result<ProjectionResult> {
    check_radius(radius)?;
    let unbounded = project_unbounded(model, v)?;
    let (vector, scaled) = rescale_to_ball(unbounded.vector, radius);
    Ok(finish(unbounded.chosen_generator, vector, scaled))
}

/// Direct minimisation of `‖w - v‖` over all feasible candidates, one per
/// enumerated generator. Ties go to the lexicographically smallest
/// generator.
pub fn brute_force_project(
    model: &SparsityModel,
    radius: f64,
    v: &DVector<f64>,
    cap: usize,
) -> Result<ProjectionResult> {
    check_radius(radius)?;
    check_input(model, v)?;
    let mut best: Option<(f64, Support, DVector<f64>, bool)> = None;
    for s in model.enumerate_supports(cap)? {
        let (candidate, scaled) = rescale_to_ball(s.restrict(v), radius);
        let dist2: f64 = v.iter().zip(candidate.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, ..)| dist2 < *d) {
            best = Some((dist2, s, candidate, scaled));
        }
    }
    let (_, generator, vector, scaled) = best.expect("canonical models have at least one generator");
    Ok(finish(generator, vector, scaled))
}

/// Selection score `‖v_S‖² - (‖v_S‖ - r)₊²`; maximising it over generators
/// selects the same support as minimising the projection distance.
pub fn selection_score(v: &DVector<f64>, s: &Support, radius: f64) -> f64 {
    let n2 = s.restricted_norm_squared(v);
    let excess = (n2.sqrt() - radius).max(0.0);
    n2 - excess * excess
}
