//! Projection-based distances and the training objective.
//!
//! Every distance here goes through the soft projection; nothing matches
//! points to their single closest counterpart.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{contract, Result};
use crate::field::proj_graph;
use crate::geometry::vec3::{self, Vec3};
use crate::geometry::KnnIndex;
use crate::integrate::{neighbor_centers, project_onto_patches};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub normal: f64,
    pub integration: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            normal: 0.01,
            integration: 0.3,
        }
    }
}

/// Scalar values of the three terms and their weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub shape: f64,
    pub normal: f64,
    pub integration: f64,
    pub total: f64,
}

impl LossReport {
    pub fn combine(shape: f64, normal: f64, integration: f64, w: &LossWeights) -> Self {
        Self {
            shape,
            normal,
            integration,
            total: shape + w.normal * normal + w.integration * integration,
        }
    }
}

/// Points with matching unit normals on a graph.
#[derive(Clone, Copy, Debug)]
pub struct Oriented {
    pub points: Var,
    pub normals: Var,
}

/// Soft projection settings shared by every distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjSettings {
    pub k: usize,
    pub alpha: f64,
}

impl Default for ProjSettings {
    fn default() -> Self {
        Self { k: 4, alpha: 1e3 }
    }
}

fn mean_row_sq(g: &mut Graph, d: Var) -> Result<Var> {
    let sq = g.square(d);
    let rows = g.sum_reduce(sq, 1)?;
    Ok(g.mean_all(rows))
}

fn nonempty(g: &Graph, v: Var, what: &str) -> Result<()> {
    if g.shape(v).first().copied().unwrap_or(0) == 0 {
        return contract(format!("{what} is empty"));
    }
    Ok(())
}

/// `mean_s |p_s - Proj(p_s, Q)|^2`
pub fn proj_distance(g: &mut Graph, p: Var, q: Var, s: ProjSettings) -> Result<Var> {
    nonempty(g, p, "P")?;
    nonempty(g, q, "Q")?;
    let b = proj_graph(g, p, q, None, s.k, s.alpha)?;
    let d = g.sub(p, b.points)?;
    mean_row_sq(g, d)
}

/// `mean_s |n_s - sigma_s n(Proj(p_s, Q))|^2` where `sigma_s` flips the
/// projected normal onto the side of `n_s`.
pub fn proj_normal_distance(g: &mut Graph, p: Oriented, q: Oriented, s: ProjSettings) -> Result<Var> {
    Ok(proj_distances(g, p, q, s)?.1)
}

/// Point and normal distances from one shared projection of `P` onto `Q`.
pub fn proj_distances(g: &mut Graph, p: Oriented, q: Oriented, s: ProjSettings) -> Result<(Var, Var)> {
    nonempty(g, p.points, "P")?;
    nonempty(g, q.points, "Q")?;
    let b = proj_graph(g, p.points, q.points, Some(q.normals), s.k, s.alpha)?;
    let d = g.sub(p.points, b.points)?;
    let dist = mean_row_sq(g, d)?;
    let pn = b.normals.expect("normals requested");
    let own = g.value(p.normals).to_points();
    let projected = g.value(pn).to_points();
    let mut signs = Tensor::full(&[own.len(), 3], 1.0);
    for (i, (a, b)) in own.iter().zip(&projected).enumerate() {
        if vec3::dot(*a, *b) < 0.0 {
            signs.data_mut()[i * 3..i * 3 + 3].fill(-1.0);
        }
    }
    let aligned = g.mul_const(pn, &signs)?;
    let d = g.sub(p.normals, aligned)?;
    Ok((dist, mean_row_sq(g, d)?))
}

/// Both directions between two oriented sets: `(d(A,B) + d(B,A),
/// d_n(A,B) + d_n(B,A))`.
pub fn symmetric_terms(g: &mut Graph, a: Oriented, b: Oriented, s: ProjSettings) -> Result<(Var, Var)> {
    let (d1, n1) = proj_distances(g, a, b, s)?;
    let (d2, n2) = proj_distances(g, b, a, s)?;
    Ok((g.add(d1, d2)?, g.add(n1, n2)?))
}

/// `d(X_R, Z) + d(Z, X_R) + d(Y, Z) + d(Z, Y)`
pub fn shape_loss(g: &mut Graph, x_r: Var, y: Var, z: Var, s: ProjSettings) -> Result<Var> {
    let a = proj_distance(g, x_r, z, s)?;
    let b = proj_distance(g, z, x_r, s)?;
    let c = proj_distance(g, y, z, s)?;
    let d = proj_distance(g, z, y, s)?;
    let ab = g.add(a, b)?;
    let cd = g.add(c, d)?;
    g.add(ab, cd)
}

/// The same four directions with normal differences.
pub fn normal_loss(g: &mut Graph, x_r: Oriented, y: Oriented, z: Oriented, s: ProjSettings) -> Result<Var> {
    let a = proj_normal_distance(g, x_r, z, s)?;
    let b = proj_normal_distance(g, z, x_r, s)?;
    let c = proj_normal_distance(g, y, z, s)?;
    let d = proj_normal_distance(g, z, y, s)?;
    let ab = g.add(a, b)?;
    let cd = g.add(c, d)?;
    g.add(ab, cd)
}

/// Per-center patches as graph rows `i*R .. i*R+R` of `points`.
#[derive(Clone, Copy, Debug)]
pub struct PatchRows<'a> {
    pub points: Var,
    pub per_patch: usize,
    pub centers: &'a KnnIndex,
    /// One tree per patch over the current sample values.
    pub indexes: &'a [KnnIndex],
}

/// Mean over the pairs `(j, k in N(y_j))` of `|y_j - Proj(y_j, patch_k)|^2`,
/// with `N(y_j)` the `knn_blend` nearest centers of `y_j`.
pub fn integration_loss(
    g: &mut Graph,
    y: Var,
    patches: PatchRows<'_>,
    knn_blend: usize,
    s: ProjSettings,
) -> Result<Var> {
    nonempty(g, y, "Y")?;
    let (pairs, k) = neighbor_centers(g, y, patches.centers, knn_blend)?;
    let query_rows: Vec<usize> = (0..pairs.len()).map(|p| p / k).collect();
    let b = project_onto_patches(
        g,
        y,
        &query_rows,
        &pairs,
        patches.points,
        None,
        patches.indexes,
        s.k,
        s.alpha,
    )?;
    let rep = g.gather_rows(y, &query_rows)?;
    let d = g.sub(rep, b.points)?;
    mean_row_sq(g, d)
}

/// Graph handles of the three terms and the total.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub shape: Var,
    pub normal: Var,
    pub integration: Var,
    pub total: Var,
}

/// Inputs of the training objective for one item.
#[derive(Clone, Copy, Debug)]
pub struct LossInputs<'a> {
    pub x_r: Oriented,
    pub y: Oriented,
    pub z: Oriented,
    pub patches: PatchRows<'a>,
    pub knn_blend: usize,
}

/// `L_shape + w_n L_normal + w_i L_integration`
pub fn total_loss(
    g: &mut Graph,
    inputs: &LossInputs<'_>,
    weights: &LossWeights,
    s: ProjSettings,
) -> Result<(LossTerms, LossReport)> {
    if !(weights.normal >= 0.0 && weights.integration >= 0.0) {
        return contract("loss weights must be nonnegative");
    }
    let (sx, nx) = symmetric_terms(g, inputs.x_r, inputs.z, s)?;
    let (sy, ny) = symmetric_terms(g, inputs.y, inputs.z, s)?;
    let shape = g.add(sx, sy)?;
    let normal = g.add(nx, ny)?;
    let integration = integration_loss(g, inputs.y.points, inputs.patches, inputs.knn_blend, s)?;
    let wn = g.scale(normal, weights.normal);
    let wi = g.scale(integration, weights.integration);
    let t = g.add(shape, wn)?;
    let total = g.add(t, wi)?;
    let report = LossReport {
        shape: g.value(shape).item(),
        normal: g.value(normal).item(),
        integration: g.value(integration).item(),
        total: g.value(total).item(),
    };
    Ok((
        LossTerms {
            shape,
            normal,
            integration,
            total,
        },
        report,
    ))
}

/// [`proj_distance`] on plain point sets.
pub fn proj_distance_points(p: &[Vec3], q: &[Vec3], s: ProjSettings) -> Result<f64> {
    let mut g = Graph::inference();
    let pv = g.constant(Tensor::from_points(p));
    let qv = g.constant(Tensor::from_points(q));
    let d = proj_distance(&mut g, pv, qv, s)?;
    Ok(g.value(d).item())
}

/// [`proj_normal_distance`] on plain oriented point sets.
pub fn proj_normal_distance_points(
    p: (&[Vec3], &[Vec3]),
    q: (&[Vec3], &[Vec3]),
    s: ProjSettings,
) -> Result<f64> {
    if p.0.len() != p.1.len() || q.0.len() != q.1.len() {
        return contract("every point needs a normal");
    }
    let mut g = Graph::inference();
    let a = Oriented {
        points: g.constant(Tensor::from_points(p.0)),
        normals: g.constant(Tensor::from_points(p.1)),
    };
    let b = Oriented {
        points: g.constant(Tensor::from_points(q.0)),
        normals: g.constant(Tensor::from_points(q.1)),
    };
    let d = proj_normal_distance(&mut g, a, b, s)?;
    Ok(g.value(d).item())
}
