//! Fixtures shared by the benchmarks.

use neural_points::trainer::{prepare_sample, TrainSample};
use neural_points::{ModelConfig, NeuralPointsModel, PointCloud, Surface};

/// Unit-sphere input of `n` points without normals and its training sample
/// with `4n` ground-truth points.
pub fn sphere(n: usize) -> (PointCloud, TrainSample) {
    let s = Surface::unit_sphere();
    let mut input = s.sample_poisson(n, 1).expect("sphere sampling");
    input.clear_normals();
    let gt = s.sample_poisson(4 * n, 2).expect("sphere sampling");
    let sample = prepare_sample("sphere", &input, &gt).expect("valid sample");
    (input, sample)
}

/// The reduced widths used for desk-scale training.
pub fn desk_model() -> NeuralPointsModel {
    let mut cfg = ModelConfig {
        conv_widths: vec![8, 8, 16, 16, 32],
        aggregate_width: 32,
        field_hidden: vec![32, 32],
        ..ModelConfig::default()
    };
    cfg.pos_encoding.num_frequencies = 1;
    NeuralPointsModel::init(cfg, 0).expect("valid config")
}
