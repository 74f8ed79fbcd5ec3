//! Point clouds, spatial search, normalization and sampling.

mod cloud;
pub mod io;
mod knn;
mod normalize;
mod sampling;
mod surface;
pub mod vec3;

pub use cloud::{PointCloud, NORMAL_TOLERANCE};
pub use knn::{knn_brute_force, KnnIndex};
pub use normalize::{normalize_unit_ball, UnitBallTransform};
pub use sampling::{farthest_point_sample, farthest_point_sample_from, poisson_like_sample};
pub use surface::{point_triangle_distance, Surface, TriangleMesh, POISSON_OVERSAMPLING};
pub use vec3::Vec3;

/// The `min(k, n)` nearest indices of `query` in the index, nearest first.
pub fn knn(index: &KnnIndex, query: Vec3, k: usize) -> crate::Result<Vec<usize>> {
    index.knn(query, k)
}
