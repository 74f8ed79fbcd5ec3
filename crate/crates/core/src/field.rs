//! The shared neural field, per-point charts, patch sampling and the soft
//! projection operator.
//!
//! Patch normals come from the exact partials of the chart. The partials are
//! propagated forward through the MLP as ordinary graph values, so they stay
//! differentiable with respect to the parameters.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{contract, Result};
use crate::geometry::vec3::{self, Vec3};
use crate::geometry::KnnIndex;
use crate::model::{FieldParams, NeuralPointsModel};

/// Below this length a cross product or blended normal counts as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Fallback normal for charts with parallel partials.
pub const FALLBACK_NORMAL: Vec3 = [0.0, 0.0, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosEncodingConfig {
    pub num_frequencies: usize,
    pub include_input: bool,
}

impl Default for PosEncodingConfig {
    fn default() -> Self {
        Self {
            num_frequencies: 6,
            include_input: true,
        }
    }
}

impl PosEncodingConfig {
    pub fn output_dim(&self) -> usize {
        4 * self.num_frequencies + if self.include_input { 2 } else { 0 }
    }
}

/// `[sin(2^l pi u), cos(2^l pi u)]` for each frequency, then the same for
/// `v`, then the raw coordinates when configured.
pub fn pos_encode(uv: [f64; 2], cfg: &PosEncodingConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(cfg.output_dim());
    for c in uv {
        for l in 0..cfg.num_frequencies {
            let a = 2f64.powi(l as i32) * std::f64::consts::PI * c;
            out.push(a.sin());
            out.push(a.cos());
        }
    }
    if cfg.include_input {
        out.extend_from_slice(&uv);
    }
    out
}

/// Derivatives of [`pos_encode`] with respect to `u` and `v`.
fn pos_encode_partials(uv: [f64; 2], cfg: &PosEncodingConfig) -> [Vec<f64>; 2] {
    let dim = cfg.output_dim();
    let mut du = vec![0.0; dim];
    let mut dv = vec![0.0; dim];
    let l_count = cfg.num_frequencies;
    for (axis, c) in uv.into_iter().enumerate() {
        let d = if axis == 0 { &mut du } else { &mut dv };
        for l in 0..l_count {
            let f = 2f64.powi(l as i32) * std::f64::consts::PI;
            let a = f * c;
            let base = axis * 2 * l_count + 2 * l;
            d[base] = f * a.cos();
            d[base + 1] = -f * a.sin();
        }
        if cfg.include_input {
            d[4 * l_count + axis] = 1.0;
        }
    }
    [du, dv]
}

/// Cell centers of a `ceil(sqrt(R))` square grid over `[-1, 1]^2`, row
/// major in `u`, truncated to `R` entries.
pub fn patch_grid(r: usize) -> Vec<[f64; 2]> {
    let side = (1..).find(|s| s * s >= r).unwrap_or(1);
    let coord = |i: usize| -1.0 + 2.0 * (i as f64 + 0.5) / side as f64;
    (0..r).map(|k| [coord(k / side), coord(k % side)]).collect()
}

/// Field evaluated at `R` parameter values for each of `I` centers.
/// Row `i * R + r` holds center `i`, sample `r`.
#[derive(Clone, Debug)]
pub struct PatchBatch {
    pub points: Var,
    pub normals: Var,
    pub du: Var,
    pub dv: Var,
    pub patches: usize,
    pub per_patch: usize,
    /// Rows whose partials were parallel and got [`FALLBACK_NORMAL`].
    pub degenerate: Vec<usize>,
}

fn rows_tensor(rows: &[Vec<f64>]) -> Result<Tensor> {
    let w = rows.first().map_or(0, Vec::len);
    Tensor::new(vec![rows.len(), w], rows.concat())
}

fn relu_mask(g: &Graph, z: Var) -> Tensor {
    let t = g.value(z);
    let data = t.data().iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
    Tensor::new(t.shape().to_vec(), data).expect("same shape")
}

/// Evaluates every chart `x_i + MLP(pe(uv) ++ f_i)` on the graph together
/// with its partials and unit normals. With `orient` set, normals inside
/// each patch are flipped to agree with the patch's mean normal.
pub fn eval_field(
    g: &mut Graph,
    field: &FieldParams,
    pe: &PosEncodingConfig,
    features: Var,
    centers: &[Vec3],
    uv: &[[f64; 2]],
    orient: bool,
) -> Result<PatchBatch> {
    let (n_c, r) = (centers.len(), uv.len());
    if n_c == 0 || r == 0 {
        return contract("field evaluation needs at least one center and one sample");
    }
    if g.shape(features).first() != Some(&n_c) {
        return contract(format!(
            "{} feature rows for {} centers",
            g.shape(features).first().copied().unwrap_or(0),
            n_c
        ));
    }
    let pe_dim = pe.output_dim();
    let codes: Vec<Vec<f64>> = uv.iter().map(|&c| pos_encode(c, pe)).collect();
    let partials: Vec<[Vec<f64>; 2]> = uv.iter().map(|&c| pos_encode_partials(c, pe)).collect();
    let code_t = g.constant(rows_tensor(&codes)?);
    let du_t = g.constant(rows_tensor(&partials.iter().map(|p| p[0].clone()).collect::<Vec<_>>())?);
    let dv_t = g.constant(rows_tensor(&partials.iter().map(|p| p[1].clone()).collect::<Vec<_>>())?);

    let [l0, l1, l2] = field.layers;
    let w_in = g.shape(l0.weight)[0];
    let w_code = g.slice_rows(l0.weight, 0, pe_dim)?;
    let w_feat = g.slice_rows(l0.weight, pe_dim, w_in)?;

    let center_of: Vec<usize> = (0..n_c * r).map(|row| row / r).collect();
    let sample_of: Vec<usize> = (0..n_c * r).map(|row| row % r).collect();

    // The first layer splits into a per-center and a per-sample term.
    let fz = g.matmul(features, w_feat)?;
    let cz = g.matmul(code_t, w_code)?;
    let fz = g.gather_rows(fz, &center_of)?;
    let cz = g.gather_rows(cz, &sample_of)?;
    let z0 = g.add(fz, cz)?;
    let z0 = g.add(z0, l0.bias)?;
    let tu = g.matmul(du_t, w_code)?;
    let tv = g.matmul(dv_t, w_code)?;
    let mut tu = g.gather_rows(tu, &sample_of)?;
    let mut tv = g.gather_rows(tv, &sample_of)?;

    let mask = relu_mask(g, z0);
    let mut h = g.relu(z0);
    tu = g.mul_const(tu, &mask)?;
    tv = g.mul_const(tv, &mask)?;

    let z1 = g.matmul(h, l1.weight)?;
    let z1 = g.add(z1, l1.bias)?;
    let mask = relu_mask(g, z1);
    h = g.relu(z1);
    let tu1 = g.matmul(tu, l1.weight)?;
    let tv1 = g.matmul(tv, l1.weight)?;
    tu = g.mul_const(tu1, &mask)?;
    tv = g.mul_const(tv1, &mask)?;

    let out = g.matmul(h, l2.weight)?;
    let out = g.add(out, l2.bias)?;
    let du = g.matmul(tu, l2.weight)?;
    let dv = g.matmul(tv, l2.weight)?;

    let base = g.constant(Tensor::from_points(centers));
    let base = g.gather_rows(base, &center_of)?;
    let points = g.add(base, out)?;

    let cross = g.cross3(du, dv)?;
    let mut normals = g.normalize3(cross)?;
    let degenerate: Vec<usize> = g
        .value(cross)
        .to_points()
        .iter()
        .enumerate()
        .filter(|(_, c)| !(vec3::norm(**c) >= DEGENERATE_NORM))
        .map(|(i, _)| i)
        .collect();
    if !degenerate.is_empty() {
        let mut keep = Tensor::full(&[n_c * r, 3], 1.0);
        let mut fill = Tensor::zeros(&[n_c * r, 3]);
        for &row in &degenerate {
            keep.data_mut()[row * 3..row * 3 + 3].fill(0.0);
            fill.data_mut()[row * 3..row * 3 + 3].copy_from_slice(&FALLBACK_NORMAL);
        }
        let kept = g.mul_const(normals, &keep)?;
        let fill = g.constant(fill);
        normals = g.add(kept, fill)?;
    }
    if orient {
        let ns = g.value(normals).to_points();
        let mut signs = Tensor::full(&[n_c * r, 3], 1.0);
        let mut any = false;
        for (i, patch) in ns.chunks(r).enumerate() {
            let mean = patch.iter().fold([0.0; 3], |a, &n| vec3::add(a, n));
            for (s, &n) in patch.iter().enumerate() {
                if vec3::dot(n, mean) < 0.0 {
                    let row = i * r + s;
                    signs.data_mut()[row * 3..row * 3 + 3].fill(-1.0);
                    any = true;
                }
            }
        }
        if any {
            normals = g.mul_const(normals, &signs)?;
        }
    }
    Ok(PatchBatch {
        points,
        normals,
        du,
        dv,
        patches: n_c,
        per_patch: r,
        degenerate,
    })
}

fn single_point(
    model: &NeuralPointsModel,
    uv: [f64; 2],
    feature: &[f64],
    center: Vec3,
) -> Result<(Graph, PatchBatch)> {
    if feature.len() != model.config.feature_dim() {
        return contract(format!(
            "feature has {} entries, model expects {}",
            feature.len(),
            model.config.feature_dim()
        ));
    }
    let mut g = Graph::inference();
    let field = model.register_field(&mut g)?;
    let f = g.constant(Tensor::new(vec![1, feature.len()], feature.to_vec())?);
    let batch = eval_field(&mut g, &field, &model.config.pos_encoding, f, &[center], &[uv], false)?;
    Ok((g, batch))
}

/// The chart `x_i + MLP(pe(uv) ++ f_i)` at one parameter value.
pub fn phi(model: &NeuralPointsModel, uv: [f64; 2], feature: &[f64], center: Vec3) -> Result<Vec3> {
    let (g, b) = single_point(model, uv, feature, center)?;
    Ok(g.value(b.points).point(0))
}

/// Partial derivatives of [`phi`] with respect to `u` and `v`.
pub fn phi_partials(
    model: &NeuralPointsModel,
    uv: [f64; 2],
    feature: &[f64],
    center: Vec3,
) -> Result<(Vec3, Vec3)> {
    let (g, b) = single_point(model, uv, feature, center)?;
    Ok((g.value(b.du).point(0), g.value(b.dv).point(0)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalEstimate {
    pub normal: Vec3,
    /// Set when the partials were parallel and the fallback was used.
    pub degenerate: bool,
}

/// Unit normal of the chart from the cross product of its partials.
pub fn phi_normal(
    model: &NeuralPointsModel,
    uv: [f64; 2],
    feature: &[f64],
    center: Vec3,
) -> Result<NormalEstimate> {
    let (g, b) = single_point(model, uv, feature, center)?;
    Ok(NormalEstimate {
        normal: g.value(b.normals).point(0),
        degenerate: !b.degenerate.is_empty(),
    })
}

/// `R` samples of one chart.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub center_index: usize,
    pub uv: Vec<[f64; 2]>,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub degenerate: usize,
}

impl FieldSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Splits a batch evaluated on `g` into per-center samples.
pub fn batch_samples(g: &Graph, batch: &PatchBatch, uv: &[[f64; 2]]) -> Vec<FieldSample> {
    let pts = g.value(batch.points).to_points();
    let nrm = g.value(batch.normals).to_points();
    let r = batch.per_patch;
    (0..batch.patches)
        .map(|i| FieldSample {
            center_index: i,
            uv: uv.to_vec(),
            points: pts[i * r..(i + 1) * r].to_vec(),
            normals: nrm[i * r..(i + 1) * r].to_vec(),
            degenerate: batch.degenerate.iter().filter(|&&row| row / r == i).count(),
        })
        .collect()
}

/// Samples the chart of one center on the `R`-point grid.
pub fn sample_patch(
    model: &NeuralPointsModel,
    center_index: usize,
    center: Vec3,
    feature: &[f64],
    r: usize,
) -> Result<FieldSample> {
    if r == 0 {
        return contract("patch sample count must be positive");
    }
    let uv = patch_grid(r);
    let mut g = Graph::inference();
    let field = model.register_field(&mut g)?;
    let f = g.constant(Tensor::new(vec![1, feature.len()], feature.to_vec())?);
    let batch = eval_field(&mut g, &field, &model.config.pos_encoding, f, &[center], &uv, true)?;
    let mut s = batch_samples(&g, &batch, &uv).remove(0);
    s.center_index = center_index;
    Ok(s)
}

// ---- soft projection ----

/// A point set prepared for repeated projections.
#[derive(Clone, Debug)]
pub struct ProjectionTarget {
    normals: Option<Vec<Vec3>>,
    index: KnnIndex,
}

impl ProjectionTarget {
    pub fn new(points: Vec<Vec3>, normals: Option<Vec<Vec3>>) -> Result<Self> {
        if points.is_empty() {
            return contract("projection target is empty");
        }
        if let Some(n) = &normals {
            if n.len() != points.len() {
                return contract(format!("{} normals for {} points", n.len(), points.len()));
            }
        }
        Ok(Self {
            index: KnnIndex::build(&points),
            normals,
        })
    }

    pub fn from_sample(s: &FieldSample) -> Result<Self> {
        Self::new(s.points.clone(), Some(s.normals.clone()))
    }

    pub fn points(&self) -> &[Vec3] {
        self.index.points()
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn index(&self) -> &KnnIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// Result of blending neighbours with exponential weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Blend {
    pub point: Vec3,
    pub normal: Option<Vec3>,
    /// Neighbour indices, nearest first.
    pub neighbors: Vec<usize>,
    /// Relative weights actually used, aligned with `neighbors`.
    pub weights: Vec<f64>,
    /// All raw weights underflowed; the nearest neighbour was used.
    pub fallback: bool,
    /// The blended normal vanished; the dominant neighbour's normal was used.
    pub degenerate_normal: bool,
}

/// `exp(-alpha * |x - a|^2)` for each anchor. When every weight underflows
/// the result is one-hot on the first anchor and the flag is set.
pub fn exp_weights(x: Vec3, anchors: &[Vec3], alpha: f64) -> (Vec<f64>, bool) {
    let mut w: Vec<f64> = anchors.iter().map(|&a| (-alpha * vec3::dist2(x, a)).exp()).collect();
    let sum: f64 = w.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        (w, false)
    } else {
        w.iter_mut().enumerate().for_each(|(i, v)| *v = if i == 0 { 1.0 } else { 0.0 });
        (w, true)
    }
}

/// Weights `exp(-alpha * (|x - a|^2 - m))` with `m` the smallest squared
/// distance, so the nearest anchor weighs 1 and normalized blends equal
/// those of [`exp_weights`]. The flag reports that the unshifted weights
/// would all underflow.
pub fn relative_weights(x: Vec3, anchors: &[Vec3], alpha: f64) -> (Vec<f64>, bool) {
    let d2: Vec<f64> = anchors.iter().map(|&a| vec3::dist2(x, a)).collect();
    let m = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let w = d2.iter().map(|&d| (d - m) * -alpha).map(f64::exp).collect();
    (w, (m * -alpha).exp() == 0.0)
}

/// Index of the largest weight; ties go to the earliest entry.
pub fn dominant(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > weights[best] {
            best = i;
        }
    }
    best
}

/// `sum_k w_k v_k / sum_k w_k`
pub fn blend_points(values: &[Vec3], weights: &[f64]) -> Vec3 {
    if values.len() == 1 {
        return values[0];
    }
    let mut acc = [0.0; 3];
    let mut sum = 0.0;
    for (v, &w) in values.iter().zip(weights) {
        acc = vec3::add(acc, vec3::scale(*v, w));
        sum += w;
    }
    [acc[0] / sum, acc[1] / sum, acc[2] / sum]
}

/// Orients each normal against the dominant neighbour's, blends with the
/// same weights and normalizes. Returns the normal and a degeneracy flag.
pub fn blend_normals(normals: &[Vec3], weights: &[f64]) -> (Vec3, bool) {
    let d = dominant(weights);
    let reference = normals[d];
    let oriented: Vec<Vec3> = normals
        .iter()
        .map(|&n| if vec3::dot(n, reference) < 0.0 { vec3::scale(n, -1.0) } else { n })
        .collect();
    let raw = blend_points(&oriented, weights);
    let len = vec3::norm(raw);
    if len >= DEGENERATE_NORM {
        ([raw[0] / len, raw[1] / len, raw[2] / len], false)
    } else {
        (reference, true)
    }
}

/// Soft projection of `p` onto the `k` nearest members of `target`.
pub fn proj(p: Vec3, target: &ProjectionTarget, k: usize, alpha: f64) -> Result<Blend> {
    let neighbors = target.index().knn(p, k)?;
    let pts: Vec<Vec3> = neighbors.iter().map(|&i| target.points()[i]).collect();
    let (weights, fallback) = relative_weights(p, &pts, alpha);
    let point = blend_points(&pts, &weights);
    let (normal, degenerate_normal) = match target.normals() {
        Some(ns) => {
            let nn: Vec<Vec3> = neighbors.iter().map(|&i| ns[i]).collect();
            let (n, d) = blend_normals(&nn, &weights);
            (Some(n), d)
        }
        None => (None, false),
    };
    Ok(Blend {
        point,
        normal,
        neighbors,
        weights,
        fallback,
        degenerate_normal,
    })
}

/// The chart composed with its inverse: projection onto the sampled patch.
pub fn phi_psi(p: Vec3, patch: &ProjectionTarget, k: usize, alpha: f64) -> Result<Blend> {
    proj(p, patch, k, alpha)
}

// ---- graph versions ----

/// Differentiable blend over groups of `k` consecutive rows.
#[derive(Clone, Debug)]
pub struct GraphBlend {
    pub points: Var,
    pub normals: Option<Var>,
    pub weights: Var,
    pub fallbacks: usize,
    pub degenerate_normals: usize,
}

/// Blends `values` (and `normals`) with the weights of [`relative_weights`],
/// where rows `s*k .. s*k+k` of `queries`, `anchors`, `values` belong to
/// output row `s`. Mirrors [`relative_weights`], [`blend_points`] and
/// [`blend_normals`] operation for operation.
pub fn blend_graph(
    g: &mut Graph,
    queries: Var,
    anchors: Var,
    values: Var,
    normals: Option<Var>,
    k: usize,
    alpha: f64,
) -> Result<GraphBlend> {
    let rows = g.shape(queries)[0];
    if k == 0 || rows % k != 0 {
        return contract(format!("{rows} rows do not split into groups of {k}"));
    }
    let s = rows / k;
    let diff = g.sub(queries, anchors)?;
    let sq = g.square(diff);
    let d2 = g.sum_reduce(sq, 1)?;
    let d2v = g.value(d2).data().to_vec();
    let mut shift = Tensor::zeros(&[rows]);
    let mut fallbacks = 0;
    for i in 0..s {
        let m = d2v[i * k..(i + 1) * k].iter().copied().fold(f64::INFINITY, f64::min);
        shift.data_mut()[i * k..(i + 1) * k].fill(m);
        fallbacks += usize::from((m * -alpha).exp() == 0.0);
    }
    let shift = g.constant(shift);
    let rel = g.sub(d2, shift)?;
    let logits = g.scale(rel, -alpha);
    let w = g.exp(logits);
    let wv = g.value(w).data().to_vec();

    if k == 1 {
        // a single neighbour is returned as is
        return Ok(GraphBlend {
            points: values,
            normals: match normals {
                Some(nv) => Some(g.normalize3(nv)?),
                None => None,
            },
            weights: w,
            fallbacks,
            degenerate_normals: 0,
        });
    }
    let w2 = g.reshape(w, &[s, k])?;
    let wsum = g.sum_reduce(w2, 1)?;
    let weighted = g.mul_col(values, w)?;
    let weighted = g.reshape(weighted, &[s, k, 3])?;
    let acc = g.sum_reduce(weighted, 1)?;
    let points = g.div_col(acc, wsum)?;

    let mut degenerate_normals = 0;
    let normals = match normals {
        None => None,
        Some(nv) => {
            let nvals = g.value(nv).to_points();
            let mut signs = Tensor::full(&[rows, 3], 1.0);
            let mut dom_rows = Vec::with_capacity(s);
            for i in 0..s {
                let d = i * k + dominant(&wv[i * k..(i + 1) * k]);
                dom_rows.push(d);
                for j in i * k..(i + 1) * k {
                    if vec3::dot(nvals[j], nvals[d]) < 0.0 {
                        signs.data_mut()[j * 3..j * 3 + 3].fill(-1.0);
                    }
                }
            }
            let oriented = g.mul_const(nv, &signs)?;
            let wn = g.mul_col(oriented, w)?;
            let wn = g.reshape(wn, &[s, k, 3])?;
            let nacc = g.sum_reduce(wn, 1)?;
            let nraw = g.div_col(nacc, wsum)?;
            let mut unit = g.normalize3(nraw)?;
            let bad_n: Vec<usize> = g
                .value(nraw)
                .to_points()
                .iter()
                .enumerate()
                .filter(|(_, n)| !(vec3::norm(**n) >= DEGENERATE_NORM))
                .map(|(i, _)| i)
                .collect();
            degenerate_normals = bad_n.len();
            if !bad_n.is_empty() {
                let mut keep = Tensor::full(&[s, 3], 1.0);
                let mut take = Tensor::zeros(&[s, 3]);
                for &i in &bad_n {
                    keep.data_mut()[i * 3..i * 3 + 3].fill(0.0);
                    take.data_mut()[i * 3..i * 3 + 3].fill(1.0);
                }
                let kept = g.mul_const(unit, &keep)?;
                let dom = g.gather_rows(oriented, &dom_rows)?;
                let dom = g.mul_const(dom, &take)?;
                unit = g.add(kept, dom)?;
            }
            Some(unit)
        }
    };
    Ok(GraphBlend {
        points,
        normals,
        weights: w,
        fallbacks,
        degenerate_normals,
    })
}

/// Projects each row of `queries` onto target rows listed in `neighbors`
/// (`k` per query, nearest first).
pub fn proj_graph_rows(
    g: &mut Graph,
    queries: Var,
    targets: Var,
    target_normals: Option<Var>,
    neighbors: &[usize],
    k: usize,
    alpha: f64,
) -> Result<GraphBlend> {
    let n_q = g.shape(queries)[0];
    if neighbors.len() != n_q * k {
        return contract(format!("{} neighbour rows for {} queries", neighbors.len(), n_q));
    }
    let rep: Vec<usize> = (0..n_q * k).map(|r| r / k).collect();
    let q = g.gather_rows(queries, &rep)?;
    let t = g.gather_rows(targets, neighbors)?;
    let n = match target_normals {
        Some(nv) => Some(g.gather_rows(nv, neighbors)?),
        None => None,
    };
    blend_graph(g, q, t, t, n, k, alpha)
}

/// Projects every row of `queries` onto the whole point set `targets`.
pub fn proj_graph(
    g: &mut Graph,
    queries: Var,
    targets: Var,
    target_normals: Option<Var>,
    k: usize,
    alpha: f64,
) -> Result<GraphBlend> {
    let tv = g.value(targets).to_points();
    if tv.is_empty() {
        return contract("projection target is empty");
    }
    let k = k.min(tv.len());
    let index = KnnIndex::build(&tv);
    let mut neighbors = Vec::new();
    for q in g.value(queries).to_points() {
        neighbors.extend(index.knn(q, k)?);
    }
    proj_graph_rows(g, queries, targets, target_normals, &neighbors, k, alpha)
}
