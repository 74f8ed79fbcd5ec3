use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use super::vec3::{self, Vec3};
use crate::error::{contract, Result};

/// Similarity transform `p -> (p - center) / scale` mapping a cloud into
/// the closed unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitBallTransform {
    pub center: Vec3,
    pub scale: f64,
    /// Set when the source cloud had zero extent and `scale` fell back to 1.
    #[serde(default)]
    pub degenerate: bool,
}

impl UnitBallTransform {
    pub fn identity() -> Self {
        Self {
            center: [0.0; 3],
            scale: 1.0,
            degenerate: false,
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let d = vec3::sub(p, self.center);
        [d[0] / self.scale, d[1] / self.scale, d[2] / self.scale]
    }

    pub fn invert(&self, p: Vec3) -> Vec3 {
        vec3::add(vec3::scale(p, self.scale), self.center)
    }

    /// Maps positions; normals are direction-only and pass through.
    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        map_positions(cloud, |p| self.apply(p))
    }

    pub fn invert_cloud(&self, cloud: &PointCloud) -> PointCloud {
        map_positions(cloud, |p| self.invert(p))
    }
}

fn map_positions(cloud: &PointCloud, f: impl Fn(Vec3) -> Vec3) -> PointCloud {
    let pos = cloud.positions().iter().map(|&p| f(p)).collect();
    let mut out = PointCloud::new(pos).expect("finite in, finite out");
    if let Some(n) = cloud.normals() {
        out.set_normals(n.to_vec()).expect("normals unchanged");
    }
    out
}

/// Centers the cloud on its centroid and divides by the largest radius.
pub fn normalize_unit_ball(cloud: &PointCloud) -> Result<(PointCloud, UnitBallTransform)> {
    if cloud.is_empty() {
        return contract("cannot normalize an empty cloud");
    }
    let center = cloud.centroid();
    let radius = cloud
        .positions()
        .iter()
        .map(|&p| vec3::dist(p, center))
        .fold(0.0, f64::max);
    let t = if radius > 0.0 {
        UnitBallTransform {
            center,
            scale: radius,
            degenerate: false,
        }
    } else {
        log::warn!("normalizing a cloud whose points all coincide; using scale 1");
        UnitBallTransform {
            center,
            scale: 1.0,
            degenerate: true,
        }
    };
    Ok((t.apply_cloud(cloud), t))
}
