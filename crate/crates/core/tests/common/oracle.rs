//! Direct evaluations of the blending formulas with unshifted weights,
//! written independently of the library code paths.

use neural_points::field::FieldSample;
use neural_points::geometry::vec3::{self, Vec3};

/// Indices of the `k` nearest members of `q`, ties to the lower index.
pub fn nearest(p: Vec3, q: &[Vec3], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| vec3::dist2(p, q[a]).total_cmp(&vec3::dist2(p, q[b])).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// `exp(-alpha |x - a|^2)` per anchor.
pub fn weights(x: Vec3, anchors: &[Vec3], alpha: f64) -> Vec<f64> {
    anchors.iter().map(|&a| (-alpha * vec3::dist2(x, a)).exp()).collect()
}

/// Weighted mean of `values`; normals are flipped onto the highest-weight
/// one (first on ties), averaged and normalized.
pub fn blend(x: Vec3, anchors: &[Vec3], values: &[Vec3], normals: Option<&[Vec3]>, alpha: f64) -> (Vec3, Option<Vec3>) {
    let w = weights(x, anchors, alpha);
    let sum: f64 = w.iter().sum();
    let mut p = [0.0; 3];
    for i in 0..w.len() {
        for c in 0..3 {
            p[c] += w[i] * values[i][c] / sum;
        }
    }
    let n = normals.map(|n| {
        let best = (0..w.len()).fold(0, |b, i| if w[i] > w[b] { i } else { b });
        let mut acc = [0.0; 3];
        for i in 0..w.len() {
            let s = if vec3::dot(n[i], n[best]) < 0.0 { -1.0 } else { 1.0 };
            for c in 0..3 {
                acc[c] += s * w[i] * n[i][c] / sum;
            }
        }
        let len = vec3::norm(acc);
        [acc[0] / len, acc[1] / len, acc[2] / len]
    });
    (p, n)
}

/// Soft projection of `p` onto its `k` nearest members of `q`.
pub fn proj(p: Vec3, q: &[Vec3], normals: Option<&[Vec3]>, k: usize, alpha: f64) -> (Vec3, Option<Vec3>) {
    let idx = nearest(p, q, k);
    let pts: Vec<Vec3> = idx.iter().map(|&i| q[i]).collect();
    let nrm: Option<Vec<Vec3>> = normals.map(|n| idx.iter().map(|&i| n[i]).collect());
    blend(p, &pts, &pts, nrm.as_deref(), alpha)
}

/// Blend over the `knn_blend` nearest centers of the projections onto
/// their patches.
pub fn rho(
    x: Vec3,
    centers: &[Vec3],
    samples: &[FieldSample],
    knn_blend: usize,
    knn_proj: usize,
    alpha_blend: f64,
    alpha_proj: f64,
) -> (Vec3, Vec3) {
    let near = nearest(x, centers, knn_blend);
    let mut pts = Vec::new();
    let mut nrm = Vec::new();
    for &c in &near {
        let s = &samples[c];
        let (a, b) = proj(x, &s.points, Some(&s.normals), knn_proj, alpha_proj);
        pts.push(a);
        nrm.push(b.unwrap());
    }
    let anchors: Vec<Vec3> = near.iter().map(|&c| centers[c]).collect();
    let (p, n) = blend(x, &anchors, &pts, Some(&nrm), alpha_blend);
    (p, n.unwrap())
}

/// `mean_s |p_s - Proj(p_s, Q)|^2`
pub fn proj_distance(p: &[Vec3], q: &[Vec3], k: usize, alpha: f64) -> f64 {
    p.iter()
        .map(|&x| vec3::dist2(x, proj(x, q, None, k, alpha).0))
        .sum::<f64>()
        / p.len() as f64
}

/// `mean_s |n_s - sigma_s n(Proj(p_s, Q))|^2` with the sign chosen to agree
/// with `n_s`.
pub fn proj_normal_distance(p: (&[Vec3], &[Vec3]), q: (&[Vec3], &[Vec3]), k: usize, alpha: f64) -> f64 {
    p.0.iter()
        .zip(p.1)
        .map(|(&x, &nx)| {
            let m = proj(x, q.0, Some(q.1), k, alpha).1.unwrap();
            let m = if vec3::dot(nx, m) < 0.0 { vec3::scale(m, -1.0) } else { m };
            vec3::dist2(nx, m)
        })
        .sum::<f64>()
        / p.0.len() as f64
}

/// Mean over `(y_j, k in N(y_j))` of the squared distance from `y_j` to its
/// projection onto patch `k`; patch `k` is rows `k*per .. k*per+per`.
pub fn integration(y: &[Vec3], centers: &[Vec3], patches: &[Vec3], per: usize, knn_blend: usize, k: usize, alpha: f64) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0;
    for &yj in y {
        for c in nearest(yj, centers, knn_blend) {
            let patch = &patches[c * per..(c + 1) * per];
            sum += vec3::dist2(yj, proj(yj, patch, None, k, alpha).0);
            pairs += 1;
        }
    }
    sum / pairs as f64
}
