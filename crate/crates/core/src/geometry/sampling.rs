//! Subsampling: farthest point sampling and Poisson-disk-like elimination.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cloud::PointCloud;
use super::knn::KnnIndex;
use super::vec3::{dist2, Vec3};
use crate::error::{contract, Result};

/// Greedy farthest point sampling. The first index is drawn from `seed`;
/// each later pick maximizes the distance to the selected set, ties going
/// to the smaller index.
pub fn farthest_point_sample(points: &[Vec3], m: usize, seed: u64) -> Result<Vec<usize>> {
    if points.is_empty() {
        return contract("farthest point sampling on an empty cloud");
    }
    let start = ChaCha8Rng::seed_from_u64(seed).gen_range(0..points.len());
    farthest_point_sample_from(points, m, start)
}

/// Farthest point sampling from an explicit first index.
pub fn farthest_point_sample_from(points: &[Vec3], m: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return contract(format!("cannot sample {m} of {n} points"));
    }
    if start >= n {
        return contract(format!("start index {start} out of {n}"));
    }
    let mut selected = Vec::with_capacity(m);
    let mut min_d = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut current = start;
    loop {
        selected.push(current);
        taken[current] = true;
        if selected.len() == m {
            break;
        }
        let c = points[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, (p, d)) in points.iter().zip(min_d.iter_mut()).enumerate() {
            if taken[i] {
                continue;
            }
            let nd = dist2(*p, c);
            if nd < *d {
                *d = nd;
            }
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        current = best;
    }
    Ok(selected)
}

const NEIGHBOURS: usize = 12;

/// Squared distance from `i` to its closest surviving candidate, refilling
/// the neighbour list from the tree once every cached neighbour is gone.
fn nearest_alive(
    i: usize,
    pts: &[Vec3],
    index: &KnnIndex,
    alive: &[bool],
    adjacency: &mut [Vec<usize>],
    reverse: &mut [Vec<usize>],
) -> Result<f64> {
    adjacency[i].retain(|&j| alive[j]);
    if adjacency[i].is_empty() {
        let mut k = 4 * NEIGHBOURS;
        loop {
            let found: Vec<usize> = index
                .knn(pts[i], k)?
                .into_iter()
                .filter(|&j| j != i && alive[j])
                .take(NEIGHBOURS)
                .collect();
            if !found.is_empty() || k >= pts.len() {
                for &j in &found {
                    reverse[j].push(i);
                }
                adjacency[i] = found;
                break;
            }
            k *= 4;
        }
    }
    Ok(adjacency[i]
        .iter()
        .map(|&j| dist2(pts[i], pts[j]))
        .fold(f64::INFINITY, f64::min))
}

#[derive(PartialEq)]
struct Crowding {
    nn_dist2: f64,
    priority: u64,
    idx: usize,
}

impl Eq for Crowding {}

impl Ord for Crowding {
    // max-heap on "most crowded": smallest neighbour distance first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .nn_dist2
            .total_cmp(&self.nn_dist2)
            .then(other.priority.cmp(&self.priority))
            .then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Crowding {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Blue-noise subset of a dense candidate cloud by sample elimination:
/// repeatedly drop the candidate with the closest surviving neighbour until
/// `m` remain. Normals are carried over from the source.
pub fn poisson_like_sample(source: &PointCloud, m: usize, seed: u64) -> Result<PointCloud> {
    let n = source.len();
    if m == 0 {
        return contract("poisson sampling needs m >= 1");
    }
    if n < m {
        return contract(format!("{n} candidates cannot yield {m} samples"));
    }
    if n == m {
        return Ok(source.clone());
    }
    let pts = source.positions();
    let index = KnnIndex::build(pts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let priority: Vec<u64> = (0..n).map(|_| rng.gen()).collect();

    let mut alive = vec![true; n];
    // neighbour lists let removals refresh only the affected candidates
    let mut adjacency: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &p) in pts.iter().enumerate() {
        let nb: Vec<usize> = index
            .knn(p, NEIGHBOURS + 1)?
            .into_iter()
            .filter(|&j| j != i)
            .collect();
        for &j in &nb {
            reverse[j].push(i);
        }
        adjacency.push(nb);
    }
    let mut current = vec![0.0; n];
    let mut heap = BinaryHeap::with_capacity(n);
    for i in 0..n {
        current[i] = nearest_alive(i, pts, &index, &alive, &mut adjacency, &mut reverse)?;
        heap.push(Crowding {
            nn_dist2: current[i],
            priority: priority[i],
            idx: i,
        });
    }
    let mut remaining = n;
    while remaining > m {
        let Some(top) = heap.pop() else { break };
        if !alive[top.idx] || top.nn_dist2 != current[top.idx] {
            continue;
        }
        alive[top.idx] = false;
        remaining -= 1;
        let affected = std::mem::take(&mut reverse[top.idx]);
        for &j in &affected {
            if alive[j] {
                let d = nearest_alive(j, pts, &index, &alive, &mut adjacency, &mut reverse)?;
                if d != current[j] {
                    current[j] = d;
                    heap.push(Crowding {
                        nn_dist2: d,
                        priority: priority[j],
                        idx: j,
                    });
                }
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    Ok(source.select(&keep))
}
