//! Evaluation metrics. These never enter the training objective.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::geometry::vec3::{self, Vec3};
use crate::geometry::{KnnIndex, Surface};

/// Chamfer distance (squared), Hausdorff distance and mean distance to a
/// reference surface when one is known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cd: f64,
    pub hd: f64,
    pub p2f: Option<f64>,
}

fn check(p: &[Vec3], q: &[Vec3]) -> Result<()> {
    if p.is_empty() || q.is_empty() {
        return contract("metrics need two nonempty clouds");
    }
    Ok(())
}

/// Squared distance from every point of `p` to its nearest point of `q`.
fn nearest_sq(p: &[Vec3], q: &KnnIndex) -> Result<Vec<f64>> {
    p.iter()
        .map(|&x| Ok(q.knn_with_dist2(x, 1)?[0].0))
        .collect()
}

fn nearest_sq_brute(p: &[Vec3], q: &[Vec3]) -> Vec<f64> {
    p.iter()
        .map(|&x| q.iter().map(|&y| vec3::dist2(x, y)).fold(f64::INFINITY, f64::min))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// `mean_p min_q |p-q|^2 + mean_q min_p |p-q|^2`
pub fn chamfer(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    check(p, q)?;
    let (ip, iq) = (KnnIndex::build(p), KnnIndex::build(q));
    Ok(mean(&nearest_sq(p, &iq)?) + mean(&nearest_sq(q, &ip)?))
}

pub fn chamfer_brute_force(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    check(p, q)?;
    Ok(mean(&nearest_sq_brute(p, q)) + mean(&nearest_sq_brute(q, p)))
}

/// Larger of the two directed max-min Euclidean distances.
pub fn hausdorff(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    check(p, q)?;
    let (ip, iq) = (KnnIndex::build(p), KnnIndex::build(q));
    Ok(max(&nearest_sq(p, &iq)?).max(max(&nearest_sq(q, &ip)?)).sqrt())
}

pub fn hausdorff_brute_force(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    check(p, q)?;
    Ok(max(&nearest_sq_brute(p, q)).max(max(&nearest_sq_brute(q, p))).sqrt())
}

/// Mean unsigned distance of `p` to `surface`.
pub fn point_to_surface(p: &[Vec3], surface: Option<&Surface>) -> Result<f64> {
    let Some(surface) = surface else {
        return contract("point-to-surface distance needs a reference surface");
    };
    if p.is_empty() {
        return contract("point-to-surface distance of an empty cloud");
    }
    let d = match surface {
        Surface::Mesh(mesh) => mesh.distances(p),
        s => p.iter().map(|&x| s.distance(x)).collect(),
    };
    Ok(mean(&d))
}

pub fn evaluate(pred: &[Vec3], gt: &[Vec3], surface: Option<&Surface>) -> Result<MetricReport> {
    Ok(MetricReport {
        cd: chamfer(pred, gt)?,
        hd: hausdorff(pred, gt)?,
        p2f: surface.map(|s| point_to_surface(pred, Some(s))).transpose()?,
    })
}
