pub mod autodiff;
pub mod encoder;
pub mod error;
pub mod field;
pub mod geometry;
pub mod integrate;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
pub use geometry::{PointCloud, Surface, TriangleMesh, Vec3};
pub use loss::{LossReport, LossWeights};
pub use metrics::MetricReport;
pub use model::{ModelConfig, NeuralPointsModel};
pub use sampler::{Target, UpsampleOutput, UpsampleRequest};
pub use trainer::{Checkpoint, DatasetConfig, Optimizer, TrainConfig};
