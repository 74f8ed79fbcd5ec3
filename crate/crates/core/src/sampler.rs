//! Resampling a cloud through its neural patches at any target count.

use crate::autodiff::Graph;
use crate::encoder::encode;
use crate::error::{contract, Result};
use crate::field::{batch_samples, eval_field, patch_grid, FieldSample};
use crate::geometry::vec3::Vec3;
use crate::geometry::{farthest_point_sample, normalize_unit_ball, KnnIndex, PointCloud};
use crate::integrate::{BlendParams, GlobalField};
use crate::model::NeuralPointsModel;

/// Union of all patch samples with the `(center, sample)` each came from.
#[derive(Clone, Debug, PartialEq)]
pub struct UnionCloud {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub provenance: Vec<(usize, usize)>,
}

impl UnionCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn build_union(samples: &[FieldSample]) -> Result<UnionCloud> {
    let r = samples.first().map_or(0, FieldSample::len);
    if samples.iter().any(|s| s.len() != r) {
        return contract("every patch must be sampled with the same count");
    }
    let mut u = UnionCloud {
        points: Vec::with_capacity(samples.len() * r),
        normals: Vec::with_capacity(samples.len() * r),
        provenance: Vec::with_capacity(samples.len() * r),
    };
    for s in samples {
        u.points.extend_from_slice(&s.points);
        u.normals.extend_from_slice(&s.normals);
        u.provenance.extend((0..r).map(|k| (s.center_index, k)));
    }
    Ok(u)
}

/// `j` well-spread indices of `points` by farthest point sampling.
pub fn subsample_targets(points: &[Vec3], j: usize, seed: u64) -> Result<Vec<usize>> {
    if j > points.len() {
        return contract(format!("cannot pick {j} of {} points", points.len()));
    }
    farthest_point_sample(points, j, seed)
}

/// Points pulled onto the blended surface, with flag counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Pulled {
    pub cloud: PointCloud,
    pub fallbacks: usize,
    pub degenerate_normals: usize,
}

pub fn pull_to_surface(points: &[Vec3], g: &GlobalField) -> Result<Pulled> {
    let mut pos = Vec::with_capacity(points.len());
    let mut nrm = Vec::with_capacity(points.len());
    let (mut fallbacks, mut degenerate_normals) = (0, 0);
    for &p in points {
        let s = g.pull(p)?;
        pos.push(s.point);
        nrm.push(s.normal);
        fallbacks += s.fallback as usize;
        degenerate_normals += s.degenerate_normal as usize;
    }
    Ok(Pulled {
        cloud: PointCloud::with_normals(pos, nrm)?,
        fallbacks,
        degenerate_normals,
    })
}

/// Requested output size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    /// `round(f * I)` points.
    Factor(f64),
    Count(usize),
}

impl Target {
    pub fn resolve(self, input: usize) -> Result<usize> {
        let j = match self {
            Target::Count(j) => j,
            Target::Factor(f) => {
                if !(f.is_finite() && f > 0.0) {
                    return contract(format!("sampling factor must be positive, got {f}"));
                }
                (f * input as f64).round() as usize
            }
        };
        if j == 0 {
            return contract("target point count must be at least 1");
        }
        Ok(j)
    }
}

/// Default per-patch count `max(1, floor(4J / I))`, raised when the union
/// would be smaller than `J`.
pub fn samples_per_patch(input: usize, j: usize) -> usize {
    let r = (4 * j / input).max(1);
    if input * r < j {
        j.div_ceil(input) + 1
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpsampleRequest {
    pub cloud: PointCloud,
    pub target: Target,
    /// Overrides the per-patch sample count.
    pub samples_per_patch: Option<usize>,
    /// Anchor count for clouds larger than `max_patch_points`.
    pub anchors: Option<usize>,
    pub max_patch_points: usize,
    pub seed: u64,
}

impl UpsampleRequest {
    pub fn new(cloud: PointCloud, target: Target) -> Self {
        Self {
            cloud,
            target,
            samples_per_patch: None,
            anchors: None,
            max_patch_points: 256,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpsampleOutput {
    pub cloud: PointCloud,
    pub samples_per_patch: usize,
    pub patches: usize,
    pub fallbacks: usize,
    pub degenerate_normals: usize,
}

/// Patch membership for clouds that exceed the patch size: anchors by
/// farthest point sampling, each owning its nearest `size` points, with
/// extra anchors added until every point is covered. Returns the patches
/// and the patch that provides each point's chart.
pub fn anchor_patches(
    points: &[Vec3],
    size: usize,
    anchors: Option<usize>,
    seed: u64,
) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    let n = points.len();
    if n <= size {
        return Ok((vec![(0..n).collect()], vec![0; n]));
    }
    let count = anchors.unwrap_or_else(|| (2 * n).div_ceil(size)).clamp(1, n);
    let index = KnnIndex::build(points);
    let mut chosen = farthest_point_sample(points, count, seed)?;
    let mut patches: Vec<Vec<usize>> = Vec::new();
    let mut covered = vec![false; n];
    let mut k = 0;
    loop {
        while k < chosen.len() {
            let members = index.knn(points[chosen[k]], size)?;
            for &m in &members {
                covered[m] = true;
            }
            patches.push(members);
            k += 1;
        }
        match covered.iter().position(|c| !c) {
            Some(i) => chosen.push(i),
            None => break,
        }
    }
    let mut owner = vec![usize::MAX; n];
    let mut best = vec![f64::INFINITY; n];
    for (p, members) in patches.iter().enumerate() {
        let a = points[chosen[p]];
        for &m in members {
            let d = crate::geometry::vec3::dist2(points[m], a);
            if d < best[m] {
                best[m] = d;
                owner[m] = p;
            }
        }
    }
    Ok((patches, owner))
}

/// Per-point charts sampled at `r` grid points, in the frame of `points`.
/// Large clouds are split into anchor patches that are each normalized to
/// the unit ball before encoding.
pub fn sample_all_patches(
    model: &NeuralPointsModel,
    points: &[Vec3],
    r: usize,
    max_patch_points: usize,
    anchors: Option<usize>,
    seed: u64,
) -> Result<(Vec<FieldSample>, usize)> {
    let uv = patch_grid(r);
    let (patches, owner) = anchor_patches(points, max_patch_points, anchors, seed)?;
    let mut samples: Vec<Option<FieldSample>> = vec![None; points.len()];
    for (p, members) in patches.iter().enumerate() {
        let owned: Vec<usize> = (0..members.len()).filter(|&l| owner[members[l]] == p).collect();
        if owned.is_empty() {
            continue;
        }
        let local = PointCloud::new(members.iter().map(|&m| points[m]).collect())?;
        let (local, transform) = if patches.len() == 1 {
            (local, None)
        } else {
            let (c, t) = normalize_unit_ball(&local)?;
            (c, Some(t))
        };
        let mut g = Graph::inference();
        let (enc, field) = model.register(&mut g)?;
        let encoded = encode(&mut g, &enc, &model.config, local.positions())?;
        let f = g.gather_rows(encoded.f, &owned)?;
        let centers: Vec<Vec3> = owned.iter().map(|&l| local.positions()[l]).collect();
        let batch = eval_field(&mut g, &field, &model.config.pos_encoding, f, &centers, &uv, true)?;
        for (s, &l) in batch_samples(&g, &batch, &uv).into_iter().zip(&owned) {
            let mut s = s;
            s.center_index = members[l];
            if let Some(t) = &transform {
                s.points.iter_mut().for_each(|q| *q = t.invert(*q));
            }
            samples[members[l]] = Some(s);
        }
    }
    let samples = samples
        .into_iter()
        .map(|s| s.expect("every point has an owning patch"))
        .collect();
    Ok((samples, patches.len()))
}

/// Normalize, sample every chart, take the union, pick `J` points by
/// farthest point sampling, pull them onto the blended surface and map
/// back to the input frame.
pub fn upsample(request: &UpsampleRequest, model: &NeuralPointsModel) -> Result<UpsampleOutput> {
    let input = request.cloud.len();
    if input == 0 {
        return contract("cannot upsample an empty cloud");
    }
    let j = request.target.resolve(input)?;
    let mut r = match request.samples_per_patch {
        Some(0) => return contract("samples per patch must be positive"),
        Some(r) => r,
        None => samples_per_patch(input, j),
    };
    if input * r < j {
        r = j.div_ceil(input) + 1;
    }
    let (normalized, transform) = normalize_unit_ball(&request.cloud)?;
    let points = normalized.positions();
    let (samples, patches) = sample_all_patches(
        model,
        points,
        r,
        request.max_patch_points,
        request.anchors,
        request.seed,
    )?;
    let union = build_union(&samples)?;
    let picks = subsample_targets(&union.points, j, request.seed)?;
    let starts: Vec<Vec3> = picks.iter().map(|&i| union.points[i]).collect();
    let field = GlobalField::new(points, &samples, BlendParams::from(&model.config))?;
    let pulled = pull_to_surface(&starts, &field)?;
    if pulled.fallbacks > 0 {
        log::warn!("{} points fell back to their nearest neighbour", pulled.fallbacks);
    }
    if pulled.degenerate_normals > 0 {
        log::warn!("{} points have degenerate blended normals", pulled.degenerate_normals);
    }
    let cloud = transform.invert_cloud(&pulled.cloud);
    Ok(UpsampleOutput {
        cloud,
        samples_per_patch: r,
        patches,
        fallbacks: pulled.fallbacks,
        degenerate_normals: pulled.degenerate_normals,
    })
}

