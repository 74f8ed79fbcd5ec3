//! Model configuration, parameter layout and initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::field::PosEncodingConfig;

/// Architecture and geometric hyperparameters shared by training and
/// inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Spatial neighbourhood size used to build each local patch.
    pub knn_feature: usize,
    /// Neighbours per point in the dynamic EdgeConv graphs.
    pub edge_k: usize,
    /// Output widths of the stacked EdgeConv layers.
    pub conv_widths: Vec<usize>,
    /// Width of the EdgeConv applied to the concatenated layer outputs.
    pub aggregate_width: usize,
    pub pos_encoding: PosEncodingConfig,
    /// Hidden widths of the field MLP (two hidden layers, three linear layers).
    pub field_hidden: Vec<usize>,
    /// Half-width of the uniform init of the last field layer.
    pub last_layer_scale: f64,
    /// Neighbours used by every soft projection.
    pub knn_proj: usize,
    /// Neighbouring patches blended per query point.
    pub knn_blend: usize,
    /// Sharpness of the patch blending weights.
    pub alpha_blend: f64,
    /// Sharpness of the soft projection weights.
    pub alpha_proj: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            knn_feature: 10,
            edge_k: 5,
            conv_widths: vec![32, 32, 64, 64, 128],
            aggregate_width: 128,
            pos_encoding: PosEncodingConfig::default(),
            field_hidden: vec![256, 256],
            last_layer_scale: 1e-2,
            knn_proj: 4,
            knn_blend: 4,
            alpha_blend: 1e2,
            alpha_proj: 1e3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.knn_feature == 0 || self.edge_k == 0 || self.knn_proj == 0 || self.knn_blend == 0 {
            return bad("neighbour counts must be positive");
        }
        if self.edge_k > self.knn_feature {
            return bad("edge_k cannot exceed knn_feature (the patch size)");
        }
        if self.conv_widths.is_empty() || self.conv_widths.contains(&0) || self.aggregate_width == 0 {
            return bad("encoder widths must be positive");
        }
        if self.field_hidden.len() != 2 || self.field_hidden.contains(&0) {
            return bad("field_hidden must hold exactly two positive widths");
        }
        if self.pos_encoding.num_frequencies == 0 {
            return bad("positional encoding needs at least one frequency");
        }
        if !(self.alpha_blend > 0.0 && self.alpha_proj > 0.0) {
            return bad("blend sharpness values must be positive");
        }
        if !(self.last_layer_scale >= 0.0) {
            return bad("last_layer_scale must be nonnegative");
        }
        Ok(())
    }

    /// Dimension of the per-point feature fed to the field.
    pub fn feature_dim(&self) -> usize {
        2 * self.aggregate_width
    }

    /// Parameter names and shapes in a fixed order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut c_in = 3;
        for (l, &c) in self.conv_widths.iter().enumerate() {
            out.push((format!("encoder.conv{l}.weight"), vec![2 * c_in, c]));
            out.push((format!("encoder.conv{l}.bias"), vec![c]));
            c_in = c;
        }
        let cat: usize = self.conv_widths.iter().sum();
        out.push(("encoder.aggregate.weight".into(), vec![2 * cat, self.aggregate_width]));
        out.push(("encoder.aggregate.bias".into(), vec![self.aggregate_width]));
        let mut d_in = self.pos_encoding.output_dim() + self.feature_dim();
        let widths = [self.field_hidden[0], self.field_hidden[1], 3];
        for (l, &w) in widths.iter().enumerate() {
            out.push((format!("field.layer{l}.weight"), vec![d_in, w]));
            out.push((format!("field.layer{l}.bias"), vec![w]));
            d_in = w;
        }
        out
    }
}

/// A linear layer registered on a graph.
#[derive(Clone, Copy, Debug)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

/// Encoder weights on a graph: the stacked EdgeConv layers plus the
/// aggregation layer.
#[derive(Clone, Debug)]
pub struct EncoderParams {
    pub convs: Vec<LinearVars>,
    pub aggregate: LinearVars,
}

/// The three linear layers of the shared field MLP.
#[derive(Clone, Debug)]
pub struct FieldParams {
    pub layers: [LinearVars; 3],
}

/// Encoder and field parameters with the configuration that shapes them.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralPointsModel {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl NeuralPointsModel {
    /// He-uniform weights and zero biases; the last field layer is drawn
    /// from `[-last_layer_scale, last_layer_scale]` so initial patches stay
    /// close to their centers.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape) in config.layout() {
            let t = if name.ends_with(".bias") {
                Tensor::zeros(&shape)
            } else {
                let bound = if name == "field.layer2.weight" {
                    config.last_layer_scale
                } else {
                    (6.0 / shape[0] as f64).sqrt()
                };
                let n = shape.iter().product();
                let data = (0..n)
                    .map(|_| if bound > 0.0 { rng.gen_range(-bound..bound) } else { 0.0 })
                    .collect();
                Tensor::new(shape, data)?
            };
            params.insert(name, t);
        }
        Ok(Self { config, params })
    }

    /// Checks that the parameter store matches the configured layout.
    pub fn check_layout(&self) -> Result<()> {
        let layout = self.config.layout();
        if layout.len() != self.params.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                layout.len(),
                self.params.len()
            )));
        }
        for (name, shape) in layout {
            let t = self.params.expect(&name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    t.shape(),
                    shape
                )));
            }
        }
        Ok(())
    }

    /// Sets the last field layer to zero so that every patch collapses onto
    /// its center.
    pub fn zero_last_field_layer(&mut self) {
        for name in ["field.layer2.weight", "field.layer2.bias"] {
            if let Some(t) = self.params.get_mut(name) {
                t.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    fn linear(&self, g: &mut Graph, prefix: &str) -> Result<LinearVars> {
        let w = format!("{prefix}.weight");
        let b = format!("{prefix}.bias");
        Ok(LinearVars {
            weight: g.param(&w, self.params.expect(&w)?.clone()),
            bias: g.param(&b, self.params.expect(&b)?.clone()),
        })
    }

    /// Places only the field parameters on `g`.
    pub fn register_field(&self, g: &mut Graph) -> Result<FieldParams> {
        Ok(FieldParams {
            layers: [
                self.linear(g, "field.layer0")?,
                self.linear(g, "field.layer1")?,
                self.linear(g, "field.layer2")?,
            ],
        })
    }

    /// Places every parameter on `g` as a named leaf.
    pub fn register(&self, g: &mut Graph) -> Result<(EncoderParams, FieldParams)> {
        let convs = (0..self.config.conv_widths.len())
            .map(|l| self.linear(g, &format!("encoder.conv{l}")))
            .collect::<Result<Vec<_>>>()?;
        let aggregate = self.linear(g, "encoder.aggregate")?;
        let layers = [
            self.linear(g, "field.layer0")?,
            self.linear(g, "field.layer1")?,
            self.linear(g, "field.layer2")?,
        ];
        Ok((EncoderParams { convs, aggregate }, FieldParams { layers }))
    }
}
