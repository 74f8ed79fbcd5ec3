//! Local feature extraction with EdgeConv layers over dynamic graphs.

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{contract, Result};
use crate::geometry::vec3::{self, Vec3};
use crate::geometry::{KnnIndex, PointCloud};
use crate::model::{EncoderParams, LinearVars, ModelConfig, NeuralPointsModel};

/// `k` nearest rows (self included) for every row, searched only inside
/// consecutive groups of `group` rows. Ties go to the lower row.
pub fn dynamic_graph(values: &Tensor, group: usize, k: usize) -> Result<Vec<usize>> {
    let n = values.rows();
    if group == 0 || n % group != 0 {
        return contract(format!("{n} rows do not split into groups of {group}"));
    }
    if k == 0 || k > group {
        return contract(format!("edge graph needs 1 <= k <= {group}, got {k}"));
    }
    let mut out = Vec::with_capacity(n * k);
    let mut d = Vec::with_capacity(group);
    for start in (0..n).step_by(group) {
        for a in start..start + group {
            let fa = values.row(a);
            d.clear();
            for b in start..start + group {
                let fb = values.row(b);
                let s: f64 = fa.iter().zip(fb).map(|(x, y)| (x - y) * (x - y)).sum();
                d.push((s, b));
            }
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            out.extend(d[..k].iter().map(|&(_, b)| b));
        }
    }
    Ok(out)
}

/// One EdgeConv layer: for row `a`, `relu(max_b (W^T [f_a ; f_b - f_a] + c))`
/// over its `k` graph neighbours `b`.
pub fn edge_conv(
    g: &mut Graph,
    features: Var,
    neighbors: &[usize],
    k: usize,
    layer: LinearVars,
) -> Result<Var> {
    let s = g.shape(features).to_vec();
    if s.len() != 2 {
        return contract(format!("edge_conv expects a matrix, got {s:?}"));
    }
    let (n, c) = (s[0], s[1]);
    if k == 0 || k > n {
        return contract(format!("edge_conv needs 1 <= k <= {n}, got {k}"));
    }
    if neighbors.len() != n * k {
        return contract(format!("{} neighbour entries for {n} rows and k={k}", neighbors.len()));
    }
    if g.shape(layer.weight).first() != Some(&(2 * c)) {
        return contract(format!(
            "edge_conv weight {:?} does not take {c}-wide features",
            g.shape(layer.weight)
        ));
    }
    // [f_a ; f_b - f_a] W = f_a (W_top - W_bot) + f_b W_bot
    let top = g.slice_rows(layer.weight, 0, c)?;
    let bot = g.slice_rows(layer.weight, c, 2 * c)?;
    let self_w = g.sub(top, bot)?;
    let a = g.matmul(features, self_w)?;
    let b = g.matmul(features, bot)?;
    let m = g.neighbor_max(a, b, neighbors, k)?;
    let m = g.add(m, layer.bias)?;
    Ok(g.relu(m))
}

/// Encoder outputs on a graph.
#[derive(Clone, Debug)]
pub struct EncodedCloud {
    /// Per-point feature before neighbour pooling, `I x C`.
    pub f_star: Var,
    /// Final feature `f_star ++ maxpool(f_star over the neighbourhood)`, `I x 2C`.
    pub f: Var,
    /// Spatial neighbourhood of each point, nearest first, self included.
    pub neighborhoods: Vec<Vec<usize>>,
}

/// Runs the encoder over every point of `points` on `g`.
pub fn encode(
    g: &mut Graph,
    enc: &EncoderParams,
    cfg: &ModelConfig,
    points: &[Vec3],
) -> Result<EncodedCloud> {
    let n = points.len();
    if n == 0 {
        return contract("cannot encode an empty cloud");
    }
    let k = cfg.knn_feature;
    if k > n {
        return contract(format!("neighbourhood size {k} exceeds the {n} input points"));
    }
    let index = KnnIndex::build(points);
    let neighborhoods = points
        .iter()
        .map(|&p| index.knn(p, k))
        .collect::<Result<Vec<_>>>()?;
    let mut local = Vec::with_capacity(n * k * 3);
    for (i, nb) in neighborhoods.iter().enumerate() {
        for &j in nb {
            local.extend_from_slice(&vec3::sub(points[j], points[i]));
        }
    }
    let mut h = g.constant(Tensor::new(vec![n * k, 3], local)?);
    let ek = cfg.edge_k.min(k);
    let mut outs = Vec::with_capacity(enc.convs.len());
    for &layer in &enc.convs {
        let graph = dynamic_graph(g.value(h), k, ek)?;
        h = edge_conv(g, h, &graph, ek, layer)?;
        outs.push(h);
    }
    let cat = g.concat(&outs, 1)?;
    let graph = dynamic_graph(g.value(cat), k, ek)?;
    let agg = edge_conv(g, cat, &graph, ek, enc.aggregate)?;
    let c = g.shape(agg)[1];
    let agg = g.reshape(agg, &[n, k, c])?;
    let f_star = g.max_reduce(agg, 1)?;

    let flat: Vec<usize> = neighborhoods.iter().flatten().copied().collect();
    let pooled = g.gather_rows(f_star, &flat)?;
    let pooled = g.reshape(pooled, &[n, k, c])?;
    let pooled = g.max_reduce(pooled, 1)?;
    let f = g.concat(&[f_star, pooled], 1)?;
    Ok(EncodedCloud {
        f_star,
        f,
        neighborhoods,
    })
}

/// Plain feature values for every point of a cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFeatures {
    pub f_star: Tensor,
    pub f: Tensor,
}

impl LocalFeatures {
    pub fn len(&self) -> usize {
        self.f.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.f.rows() == 0
    }

    /// Final feature of point `i`.
    pub fn feature(&self, i: usize) -> &[f64] {
        self.f.row(i)
    }
}

/// Features of every point of `cloud` with the model's encoder.
pub fn extract_local_features(model: &NeuralPointsModel, cloud: &PointCloud) -> Result<LocalFeatures> {
    let mut g = Graph::inference();
    let (enc, _) = model.register(&mut g)?;
    let out = encode(&mut g, &enc, &model.config, cloud.positions())?;
    Ok(LocalFeatures {
        f_star: g.value(out.f_star).clone(),
        f: g.value(out.f).clone(),
    })
}
