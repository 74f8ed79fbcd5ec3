//! Blending of neighbouring patches into one global surface.

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{contract, Result};
use crate::field::{
    blend_graph, blend_normals, blend_points, exp_weights, phi_psi, relative_weights, FieldSample,
    GraphBlend, ProjectionTarget,
};
use crate::geometry::vec3::Vec3;
use crate::geometry::KnnIndex;
use crate::model::ModelConfig;

/// Neighbour counts and sharpness values used when blending.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendParams {
    pub knn_blend: usize,
    pub knn_proj: usize,
    pub alpha_blend: f64,
    pub alpha_proj: f64,
}

impl From<&ModelConfig> for BlendParams {
    fn from(c: &ModelConfig) -> Self {
        Self {
            knn_blend: c.knn_blend,
            knn_proj: c.knn_proj,
            alpha_blend: c.alpha_blend,
            alpha_proj: c.alpha_proj,
        }
    }
}

impl Default for BlendParams {
    fn default() -> Self {
        (&ModelConfig::default()).into()
    }
}

/// Weights `exp(-alpha |x - x_k|^2)` of the given centers. When all of them
/// underflow the nearest (first) center gets weight one and the flag is set.
pub fn blend_weights(x: Vec3, neighbor_centers: &[Vec3], alpha: f64) -> Result<(Vec<f64>, bool)> {
    if neighbor_centers.is_empty() {
        return contract("blend needs at least one neighbouring center");
    }
    Ok(exp_weights(x, neighbor_centers, alpha))
}

/// Sampled patches around every center, ready for blending queries.
#[derive(Clone, Debug)]
pub struct GlobalField {
    centers: KnnIndex,
    patches: Vec<ProjectionTarget>,
    per_patch: usize,
    params: BlendParams,
}

/// A point pulled onto the blended surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePoint {
    pub point: Vec3,
    pub normal: Vec3,
    /// Contributing centers, nearest first.
    pub centers: Vec<usize>,
    /// Relative blend weights, the nearest center at 1.
    pub weights: Vec<f64>,
    /// Blend or projection weights underflowed somewhere.
    pub fallback: bool,
    /// A blended normal vanished and a neighbour's normal was used.
    pub degenerate_normal: bool,
}

impl GlobalField {
    /// `samples[i]` must belong to `centers[i]`; every patch holds the same
    /// number of samples.
    pub fn new(centers: &[Vec3], samples: &[FieldSample], params: BlendParams) -> Result<Self> {
        if centers.is_empty() {
            return contract("global field needs at least one center");
        }
        if centers.len() != samples.len() {
            return contract(format!("{} centers but {} patches", centers.len(), samples.len()));
        }
        let per_patch = samples[0].len();
        if samples.iter().any(|s| s.len() != per_patch) {
            return contract("every patch must hold the same number of samples");
        }
        if !(params.alpha_blend > 0.0 && params.alpha_proj > 0.0) {
            return contract("blend sharpness must be positive");
        }
        Ok(Self {
            centers: KnnIndex::build(centers),
            patches: samples
                .iter()
                .map(ProjectionTarget::from_sample)
                .collect::<Result<_>>()?,
            per_patch,
            params,
        })
    }

    pub fn centers(&self) -> &[Vec3] {
        self.centers.points()
    }

    pub fn patch(&self, i: usize) -> &ProjectionTarget {
        &self.patches[i]
    }

    pub fn per_patch(&self) -> usize {
        self.per_patch
    }

    pub fn params(&self) -> BlendParams {
        self.params
    }

    /// Blends the projections of `x` onto the nearest patches.
    pub fn pull(&self, x: Vec3) -> Result<SurfacePoint> {
        let p = self.params;
        let centers = self.centers.knn(x, p.knn_blend)?;
        let anchors: Vec<Vec3> = centers.iter().map(|&i| self.centers()[i]).collect();
        let (weights, mut fallback) = relative_weights(x, &anchors, p.alpha_blend);
        let mut pts = Vec::with_capacity(centers.len());
        let mut nrm = Vec::with_capacity(centers.len());
        let mut degenerate_normal = false;
        for &c in &centers {
            let b = phi_psi(x, &self.patches[c], p.knn_proj, p.alpha_proj)?;
            fallback |= b.fallback;
            degenerate_normal |= b.degenerate_normal;
            pts.push(b.point);
            nrm.push(b.normal.expect("patches carry normals"));
        }
        let point = blend_points(&pts, &weights);
        let (normal, deg) = blend_normals(&nrm, &weights);
        Ok(SurfacePoint {
            point,
            normal,
            centers,
            weights,
            fallback,
            degenerate_normal: degenerate_normal || deg,
        })
    }
}

/// Point on the blended surface for query `x`.
pub fn rho(x: Vec3, g: &GlobalField) -> Result<Vec3> {
    Ok(g.pull(x)?.point)
}

/// Unit normal of the blended surface for query `x`.
pub fn rho_normal(x: Vec3, g: &GlobalField) -> Result<Vec3> {
    Ok(g.pull(x)?.normal)
}

// ---- graph versions ----

/// One kd-tree per patch over the current sample values; rows
/// `i*R .. i*R+R` of `points` form patch `i`.
pub fn patch_indexes(points: &Tensor, per_patch: usize) -> Vec<KnnIndex> {
    points
        .to_points()
        .chunks(per_patch)
        .map(KnnIndex::build)
        .collect()
}

/// Projects query row `query_rows[p]` onto patch `patch_rows[p]` for every
/// pair `p`, on the graph.
#[allow(clippy::too_many_arguments)]
pub fn project_onto_patches(
    g: &mut Graph,
    queries: Var,
    query_rows: &[usize],
    patch_rows: &[usize],
    patch_points: Var,
    patch_normals: Option<Var>,
    indexes: &[KnnIndex],
    k: usize,
    alpha: f64,
) -> Result<GraphBlend> {
    if query_rows.len() != patch_rows.len() {
        return contract("query and patch lists differ in length");
    }
    let per_patch = indexes.first().map_or(0, KnnIndex::len);
    if per_patch == 0 {
        return contract("no patches to project onto");
    }
    let k = k.min(per_patch);
    let qv = g.value(queries).to_points();
    let mut rep = Vec::with_capacity(query_rows.len() * k);
    let mut rows = Vec::with_capacity(query_rows.len() * k);
    for (&q, &patch) in query_rows.iter().zip(patch_rows) {
        for local in indexes[patch].knn(qv[q], k)? {
            rep.push(q);
            rows.push(patch * per_patch + local);
        }
    }
    let q = g.gather_rows(queries, &rep)?;
    let t = g.gather_rows(patch_points, &rows)?;
    let n = match patch_normals {
        Some(nv) => Some(g.gather_rows(nv, &rows)?),
        None => None,
    };
    blend_graph(g, q, t, t, n, k, alpha)
}

/// Nearest `k` centers of every query row, flattened, nearest first.
pub fn neighbor_centers(g: &Graph, queries: Var, centers: &KnnIndex, k: usize) -> Result<(Vec<usize>, usize)> {
    let k = k.min(centers.len());
    let mut out = Vec::new();
    for q in g.value(queries).to_points() {
        out.extend(centers.knn(q, k)?);
    }
    Ok((out, k))
}

/// The blended surface map on the graph for every row of `queries`.
#[allow(clippy::too_many_arguments)]
pub fn rho_graph(
    g: &mut Graph,
    queries: Var,
    centers: &KnnIndex,
    patch_points: Var,
    patch_normals: Var,
    indexes: &[KnnIndex],
    params: &BlendParams,
) -> Result<GraphBlend> {
    let (pairs, k) = neighbor_centers(g, queries, centers, params.knn_blend)?;
    let query_rows: Vec<usize> = (0..pairs.len()).map(|p| p / k).collect();
    let projected = project_onto_patches(
        g,
        queries,
        &query_rows,
        &pairs,
        patch_points,
        Some(patch_normals),
        indexes,
        params.knn_proj,
        params.alpha_proj,
    )?;
    let c = g.constant(Tensor::from_points(centers.points()));
    let anchors = g.gather_rows(c, &pairs)?;
    let q = g.gather_rows(queries, &query_rows)?;
    let mut out = blend_graph(
        g,
        q,
        anchors,
        projected.points,
        projected.normals,
        k,
        params.alpha_blend,
    )?;
    out.fallbacks += projected.fallbacks;
    out.degenerate_normals += projected.degenerate_normals;
    Ok(out)
}
