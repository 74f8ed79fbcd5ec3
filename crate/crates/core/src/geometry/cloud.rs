use super::vec3::{self, Vec3};
use crate::error::{contract, Result};

/// Tolerance on `|n| - 1` accepted for stored normals.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

/// Points in 3D with optional per-point unit normals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return contract(format!("point {i} has a non-finite coordinate"));
        }
        Ok(Self {
            positions,
            normals: None,
        })
    }

    pub fn with_normals(positions: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        let mut c = Self::new(positions)?;
        c.set_normals(normals)?;
        Ok(c)
    }

    pub fn set_normals(&mut self, normals: Vec<Vec3>) -> Result<()> {
        if normals.len() != self.positions.len() {
            return contract(format!(
                "{} normals for {} points",
                normals.len(),
                self.positions.len()
            ));
        }
        if let Some(i) = normals
            .iter()
            .position(|n| !((vec3::norm(*n) - 1.0).abs() <= NORMAL_TOLERANCE))
        {
            return contract(format!("normal {i} is not unit length"));
        }
        self.normals = Some(normals);
        Ok(())
    }

    pub fn clear_normals(&mut self) {
        self.normals = None;
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn position(&self, i: usize) -> Vec3 {
        self.positions[i]
    }

    /// Sub-cloud of the given indices, normals included.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            positions: idx.iter().map(|&i| self.positions[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| idx.iter().map(|&i| n[i]).collect()),
        }
    }

    pub fn translated(&self, t: Vec3) -> Self {
        Self {
            positions: self.positions.iter().map(|&p| vec3::add(p, t)).collect(),
            normals: self.normals.clone(),
        }
    }

    /// Applies `p -> R p + t`, rotating normals as well.
    pub fn transformed(&self, rot: &[[f64; 3]; 3], t: Vec3) -> Self {
        Self {
            positions: self
                .positions
                .iter()
                .map(|&p| vec3::add(vec3::mat_vec(rot, p), t))
                .collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|&n| vec3::mat_vec(rot, n)).collect()),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        let n = self.positions.len().max(1) as f64;
        let s = self
            .positions
            .iter()
            .fold([0.0; 3], |acc, &p| vec3::add(acc, p));
        [s[0] / n, s[1] / n, s[2] / n]
    }
}
