//! Synthetic datasets, the training loop and checkpoints.

mod checkpoint;
mod config;
mod dataset;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::Checkpoint;
pub use config::{DatasetConfig, Optimizer, TrainConfig};
pub use dataset::{cut_patches, gen_dataset, load_dataset, prepare_sample, Manifest, ManifestEntry, TrainSample};

use crate::autodiff::{adam_step, sgd_step, AdamMoments, Gradients, Graph, SgdState, Tensor};
use crate::encoder::encode;
use crate::error::{contract, Error, Result};
use crate::field::{eval_field, patch_grid};
use crate::geometry::{farthest_point_sample, KnnIndex};
use crate::integrate::{patch_indexes, rho_graph, BlendParams};
use crate::autodiff::Var;
use crate::loss::{
    integration_loss, symmetric_terms, total_loss, LossInputs, LossReport, LossTerms, LossWeights, Oriented, PatchRows,
    ProjSettings,
};
use crate::model::{ModelConfig, NeuralPointsModel};
use crate::sampler::samples_per_patch;

/// The full forward pass of one training item, kept on its graph.
pub struct ItemGraph {
    pub graph: Graph,
    pub terms: LossTerms,
    pub report: LossReport,
    pub samples_per_patch: usize,
    pub outputs: usize,
}

/// Encoder and field outputs of one sample, shared by every item drawn
/// from it.
struct Forward {
    graph: Graph,
    x_r: Oriented,
    z: Oriented,
    centers: KnnIndex,
    indexes: Vec<KnnIndex>,
    r: usize,
    j: usize,
}

fn forward(model: &NeuralPointsModel, sample: &TrainSample, train_points: Option<usize>) -> Result<Forward> {
    let cfg = &model.config;
    let mut g = Graph::new();
    let (enc, field) = model.register(&mut g)?;
    let encoded = encode(&mut g, &enc, cfg, &sample.input)?;
    let n = sample.input.len();
    let j = train_points.unwrap_or(sample.gt.len());
    let r = samples_per_patch(n, j);
    let uv = patch_grid(r);
    let batch = eval_field(&mut g, &field, &cfg.pos_encoding, encoded.f, &sample.input, &uv, true)?;
    let z = Oriented {
        points: g.constant(Tensor::from_points(sample.gt.positions())),
        normals: g.constant(Tensor::from_points(sample.gt.normals().expect("checked on load"))),
    };
    let indexes = patch_indexes(g.value(batch.points), r);
    Ok(Forward {
        x_r: Oriented {
            points: batch.points,
            normals: batch.normals,
        },
        z,
        centers: KnnIndex::build(&sample.input),
        indexes,
        r,
        j,
        graph: g,
    })
}

impl Forward {
    /// `J` points of the chart union by farthest point sampling, pulled onto
    /// the blended surface.
    fn pull(&mut self, cfg: &ModelConfig, fps_seed: u64) -> Result<Oriented> {
        let g = &mut self.graph;
        let xr_values = g.value(self.x_r.points).to_points();
        let picks = farthest_point_sample(&xr_values, self.j, fps_seed)?;
        let y_star = g.gather_rows(self.x_r.points, &picks)?;
        let blend = BlendParams::from(cfg);
        let y = rho_graph(
            g,
            y_star,
            &self.centers,
            self.x_r.points,
            self.x_r.normals,
            &self.indexes,
            &blend,
        )?;
        Ok(Oriented {
            points: y.points,
            normals: y.normals.expect("patch normals given"),
        })
    }
}

fn proj_settings(cfg: &ModelConfig) -> ProjSettings {
    ProjSettings {
        k: cfg.knn_proj,
        alpha: cfg.alpha_proj,
    }
}

/// Encodes the input patch, samples every chart, picks `J` points of the
/// union by farthest point sampling, pulls them onto the blended surface and
/// evaluates the loss against the ground truth.
pub fn item_graph(
    model: &NeuralPointsModel,
    sample: &TrainSample,
    train_points: Option<usize>,
    weights: &LossWeights,
    fps_seed: u64,
) -> Result<ItemGraph> {
    let cfg = &model.config;
    let mut fw = forward(model, sample, train_points)?;
    let y = fw.pull(cfg, fps_seed)?;
    let inputs = LossInputs {
        x_r: fw.x_r,
        y,
        z: fw.z,
        patches: PatchRows {
            points: fw.x_r.points,
            per_patch: fw.r,
            centers: &fw.centers,
            indexes: &fw.indexes,
        },
        knn_blend: cfg.knn_blend,
    };
    let (terms, report) = total_loss(&mut fw.graph, &inputs, weights, proj_settings(cfg))?;
    Ok(ItemGraph {
        terms,
        report,
        samples_per_patch: fw.r,
        outputs: fw.j,
        graph: fw.graph,
    })
}

/// Several items drawn from the same sample on one graph. `terms` hold the
/// mean over the items, so its gradient equals the mean of the per-item
/// gradients. Only the farthest point sampling differs between items; the
/// encoder, the charts and the `X_R` terms are computed once.
pub fn group_graph(
    model: &NeuralPointsModel,
    sample: &TrainSample,
    train_points: Option<usize>,
    weights: &LossWeights,
    fps_seeds: &[u64],
) -> Result<ItemGraph> {
    if fps_seeds.is_empty() {
        return contract("a group needs at least one item");
    }
    if !(weights.normal >= 0.0 && weights.integration >= 0.0) {
        return contract("loss weights must be nonnegative");
    }
    let cfg = &model.config;
    let s = proj_settings(cfg);
    let mut fw = forward(model, sample, train_points)?;
    let (x_r, z) = (fw.x_r, fw.z);
    let (shape_x, normal_x) = symmetric_terms(&mut fw.graph, x_r, z, s)?;
    let mut ys = Vec::with_capacity(fps_seeds.len());
    for &seed in fps_seeds {
        let y = fw.pull(cfg, seed)?;
        let (sy, ny) = symmetric_terms(&mut fw.graph, y, z, s)?;
        let patches = PatchRows {
            points: x_r.points,
            per_patch: fw.r,
            centers: &fw.centers,
            indexes: &fw.indexes,
        };
        let iy = integration_loss(&mut fw.graph, y.points, patches, cfg.knn_blend, s)?;
        ys.push((sy, ny, iy));
    }
    let g = &mut fw.graph;
    let inv = 1.0 / fps_seeds.len() as f64;
    let mean = |g: &mut Graph, pick: fn(&(Var, Var, Var)) -> Var| -> Result<Var> {
        let mut acc = pick(&ys[0]);
        for t in &ys[1..] {
            acc = g.add(acc, pick(t))?;
        }
        Ok(g.scale(acc, inv))
    };
    let sy = mean(g, |t| t.0)?;
    let ny = mean(g, |t| t.1)?;
    let integration = mean(g, |t| t.2)?;
    let shape = g.add(shape_x, sy)?;
    let normal = g.add(normal_x, ny)?;
    let wn = g.scale(normal, weights.normal);
    let wi = g.scale(integration, weights.integration);
    let t = g.add(shape, wn)?;
    let total = g.add(t, wi)?;
    let report = LossReport {
        shape: g.value(shape).item(),
        normal: g.value(normal).item(),
        integration: g.value(integration).item(),
        total: g.value(total).item(),
    };
    Ok(ItemGraph {
        terms: LossTerms {
            shape,
            normal,
            integration,
            total,
        },
        report,
        samples_per_patch: fw.r,
        outputs: fw.j,
        graph: fw.graph,
    })
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iter: u64,
    pub shape: f64,
    pub normal: f64,
    pub integration: f64,
    pub total: f64,
    pub lr: f64,
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(e.to_string())))
        .collect()
}

/// Outcome of a completed training run.
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub seconds: f64,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.npck";
pub const LOG_FILE: &str = "train_log.csv";

fn accumulate(sum: &mut Gradients, g: Gradients, scale: f64) {
    for (name, t) in g {
        match sum.get_mut(&name) {
            Some(acc) => acc
                .data_mut()
                .iter_mut()
                .zip(t.data())
                .for_each(|(a, b)| *a += scale * b),
            None => {
                let mut t = t;
                t.data_mut().iter_mut().for_each(|v| *v *= scale);
                sum.insert(name, t);
            }
        }
    }
}

/// Loads the configured dataset and trains from a fresh initialization.
pub fn train(cfg: &TrainConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let samples = load_dataset(&cfg.dataset)?;
    train_on(cfg, &samples)
}

/// Trains on in-memory samples, writing the log and checkpoints under
/// `cfg.output_dir`. A non-finite loss aborts the run and leaves the last
/// written checkpoint in place.
pub fn train_on(cfg: &TrainConfig, samples: &[TrainSample]) -> Result<TrainSummary> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("no training samples".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.input.len() > cfg.patch_size) {
        return Err(Error::Config(format!(
            "sample {} has {} input points, above patch_size {}",
            s.id,
            s.input.len(),
            cfg.patch_size
        )));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let ckpt_path = cfg.output_dir.join(CHECKPOINT_FILE);
    let log_path = cfg.output_dir.join(LOG_FILE);
    let mut log_writer = csv::Writer::from_path(&log_path).map_err(|e| Error::Format(e.to_string()))?;

    let mut ckpt = Checkpoint {
        model: NeuralPointsModel::init(cfg.model.clone(), cfg.seed)?,
        train: cfg.clone(),
        iteration: 0,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)),
        schedule: SgdState::new(cfg.learning_rate, cfg.lr_decay, cfg.decay_interval)?,
        adam: (cfg.optimizer == Optimizer::Adam).then(AdamMoments::new),
    };
    let start = Instant::now();
    let mut log = Vec::with_capacity(cfg.iterations as usize);
    for it in 1..=cfg.iterations {
        let mut grads = Gradients::new();
        let mut sums = [0.0; 3];
        let scale = 1.0 / cfg.batch_size as f64;
        let mut draws: Vec<(usize, Vec<u64>)> = Vec::new();
        for _ in 0..cfg.batch_size {
            let pick = ckpt.rng.gen_range(0..samples.len());
            let seed: u64 = ckpt.rng.gen();
            match draws.iter_mut().find(|d| d.0 == pick) {
                Some(d) => d.1.push(seed),
                None => draws.push((pick, vec![seed])),
            }
        }
        for (pick, seeds) in &draws {
            let item = group_graph(&ckpt.model, &samples[*pick], cfg.train_points, &cfg.loss, seeds)?;
            if !item.report.total.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at iteration {it} on sample {}",
                    samples[*pick].id
                )));
            }
            let w = seeds.len() as f64 * scale;
            accumulate(&mut grads, item.graph.backward(item.terms.total)?, w);
            sums[0] += item.report.shape * w;
            sums[1] += item.report.normal * w;
            sums[2] += item.report.integration * w;
        }
        let report = LossReport::combine(sums[0], sums[1], sums[2], &cfg.loss);
        let row = LogRow {
            iter: it,
            shape: report.shape,
            normal: report.normal,
            integration: report.integration,
            total: report.total,
            lr: ckpt.schedule.effective_rate(),
        };
        log_writer.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
        log.push(row);
        match ckpt.adam.as_mut() {
            Some(m) => adam_step(&mut ckpt.model.params, &grads, &mut ckpt.schedule, m)?,
            None => sgd_step(&mut ckpt.model.params, &grads, &mut ckpt.schedule)?,
        }
        ckpt.iteration = it;
        if it % cfg.checkpoint_every == 0 {
            log_writer.flush()?;
            ckpt.save(&ckpt_path)?;
        }
        if it % 50 == 0 || it == 1 {
            log::info!(
                "iter {it}: total {:.6e} (shape {:.3e}, normal {:.3e}, integration {:.3e}), {:.1}s",
                report.total,
                report.shape,
                report.normal,
                report.integration,
                start.elapsed().as_secs_f64()
            );
        }
    }
    log_writer.flush()?;
    ckpt.save(&ckpt_path)?;
    Ok(TrainSummary {
        checkpoint: ckpt,
        log,
        checkpoint_path: ckpt_path,
        log_path,
        seconds: start.elapsed().as_secs_f64(),
    })
}
