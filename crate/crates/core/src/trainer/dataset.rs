use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::DatasetConfig;
use crate::error::{Error, Result};
use crate::geometry::io::{format_xyz, read_cloud};
use crate::geometry::vec3::Vec3;
use crate::geometry::{farthest_point_sample, normalize_unit_ball, KnnIndex, PointCloud, Surface};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub surface: String,
    pub anchor: usize,
    /// Index of the anchor in the whole input cloud.
    pub anchor_point: usize,
    pub input: String,
    pub gt: String,
    pub input_points: usize,
    pub gt_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub entries: Vec<ManifestEntry>,
}

/// One training pair, normalized so the input patch fits the unit ball.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSample {
    pub id: String,
    pub input: Vec<Vec3>,
    pub gt: PointCloud,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over the combined key
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cuts anchor patches from one sampled surface. The ground-truth patch
/// holds the GT points whose nearest input point lies in the input patch.
pub fn cut_patches(
    input: &PointCloud,
    gt: &PointCloud,
    patch_size: usize,
    anchors: usize,
    seed: u64,
) -> Result<Vec<(usize, PointCloud, PointCloud)>> {
    let index = KnnIndex::build(input.positions());
    let owner: Vec<usize> = gt
        .positions()
        .iter()
        .map(|&p| Ok(index.knn(p, 1)?[0]))
        .collect::<Result<_>>()?;
    let picks = farthest_point_sample(input.positions(), anchors, seed)?;
    let mut out = Vec::with_capacity(picks.len());
    for a in picks {
        let mut members = index.knn(input.position(a), patch_size)?;
        members.sort_unstable();
        let mut inside = vec![false; input.len()];
        members.iter().for_each(|&m| inside[m] = true);
        let gt_idx: Vec<usize> = (0..gt.len()).filter(|&j| inside[owner[j]]).collect();
        out.push((a, input.select(&members), gt.select(&gt_idx)));
    }
    Ok(out)
}

/// Samples every configured surface and writes `inputs/`, `gt/` and
/// `manifest.json` under the output directory.
pub fn gen_dataset(cfg: &DatasetConfig) -> Result<Manifest> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir.join("inputs"))?;
    fs::create_dir_all(dir.join("gt"))?;
    let gt_points = (cfg.factor * cfg.input_points as f64).round() as usize;
    let mut entries = Vec::new();
    for (si, spec) in cfg.surfaces.iter().enumerate() {
        let surface = Surface::parse(spec)?;
        let name: String = spec
            .split(':')
            .next()
            .unwrap_or("surface")
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        let input = surface.sample_poisson(cfg.input_points, mix(cfg.seed, si as u64, 1))?;
        let mut input = input;
        input.clear_normals();
        let gt = surface.sample_poisson(gt_points, mix(cfg.seed, si as u64, 2))?;
        let patches = cut_patches(&input, &gt, cfg.patch_size, cfg.anchors, mix(cfg.seed, si as u64, 3))?;
        for (a, (anchor_point, inp, g)) in patches.into_iter().enumerate() {
            let id = format!("{si:03}_{name}_{a:03}");
            let input_file = format!("inputs/{id}.xyz");
            let gt_file = format!("gt/{id}.xyz");
            fs::write(dir.join(&input_file), format_xyz(&inp))?;
            fs::write(dir.join(&gt_file), format_xyz(&g))?;
            entries.push(ManifestEntry {
                id,
                surface: spec.clone(),
                anchor: a,
                anchor_point,
                input: input_file,
                gt: gt_file,
                input_points: inp.len(),
                gt_points: g.len(),
            });
        }
    }
    let mut config = cfg.clone();
    config.output_dir = ".".into();
    let manifest = Manifest { config, entries };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Normalizes an input patch to the unit ball and carries its ground truth
/// along with the same transform.
pub fn prepare_sample(id: impl Into<String>, input: &PointCloud, gt: &PointCloud) -> Result<TrainSample> {
    if gt.normals().is_none() {
        return Err(Error::Format("ground-truth patch has no normals".into()));
    }
    if gt.is_empty() || input.is_empty() {
        return Err(Error::Format("empty training patch".into()));
    }
    let (inp, t) = normalize_unit_ball(input)?;
    Ok(TrainSample {
        id: id.into(),
        input: inp.positions().to_vec(),
        gt: t.apply_cloud(gt),
    })
}

pub fn load_dataset(dir: &Path) -> Result<Vec<TrainSample>> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.entries.is_empty() {
        return Err(Error::Config("dataset has no entries".into()));
    }
    manifest
        .entries
        .iter()
        .map(|e| {
            let input = read_cloud(&dir.join(&e.input))?;
            let gt = read_cloud(&dir.join(&e.gt))?;
            prepare_sample(e.id.clone(), &input, &gt)
        })
        .collect()
}
