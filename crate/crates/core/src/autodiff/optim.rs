use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::Gradients;
use super::tensor::Tensor;
use crate::error::{contract, Error, Result};

/// Named trainable tensors, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    /// Looks up a tensor that the model layout guarantees exists.
    pub fn expect(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Contract(format!("missing parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }
}

/// Learning-rate schedule state for plain gradient descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdState {
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_interval: u64,
    pub step: u64,
}

impl SgdState {
    pub fn new(learning_rate: f64, decay_factor: f64, decay_interval: u64) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return contract(format!("learning rate must be positive, got {learning_rate}"));
        }
        if !(decay_factor > 0.0 && decay_factor <= 1.0) {
            return contract(format!("decay factor must lie in (0, 1], got {decay_factor}"));
        }
        if decay_interval == 0 {
            return contract("decay interval must be positive");
        }
        Ok(Self {
            learning_rate,
            decay_factor,
            decay_interval,
            step: 0,
        })
    }

    /// `learning_rate * decay_factor ^ floor(step / decay_interval)`
    pub fn effective_rate(&self) -> f64 {
        let k = (self.step / self.decay_interval) as i32;
        self.learning_rate * self.decay_factor.powi(k)
    }
}

fn check_grads(params: &ParamStore, grads: &Gradients) -> Result<()> {
    for (name, p) in params.iter() {
        let g = grads
            .get(name)
            .ok_or_else(|| Error::Contract(format!("no gradient for parameter {name}")))?;
        if g.shape() != p.shape() {
            return contract(format!(
                "gradient shape {:?} does not match parameter {name} {:?}",
                g.shape(),
                p.shape()
            ));
        }
        if !g.all_finite() {
            return Err(Error::Training(format!("non-finite gradient for {name}")));
        }
    }
    Ok(())
}

/// One gradient-descent update with the scheduled rate; advances the step.
pub fn sgd_step(params: &mut ParamStore, grads: &Gradients, state: &mut SgdState) -> Result<()> {
    check_grads(params, grads)?;
    let rate = state.effective_rate();
    for (name, p) in params.tensors.iter_mut() {
        let g = &grads[name];
        for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
            *w -= rate * d;
        }
    }
    state.step += 1;
    Ok(())
}

/// First/second moment estimates for the adaptive optimizer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamMoments {
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl AdamMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tensors(&self) -> impl Iterator<Item = (String, Vec<f64>)> + '_ {
        self.m
            .iter()
            .map(|(k, v)| (format!("adam.m.{k}"), v.clone()))
            .chain(self.v.iter().map(|(k, v)| (format!("adam.v.{k}"), v.clone())))
    }

    pub fn restore(&mut self, name: &str, data: Vec<f64>) -> bool {
        if let Some(k) = name.strip_prefix("adam.m.") {
            self.m.insert(k.to_string(), data);
            true
        } else if let Some(k) = name.strip_prefix("adam.v.") {
            self.v.insert(k.to_string(), data);
            true
        } else {
            false
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Adam update sharing the step-decay schedule of [`SgdState`].
pub fn adam_step(
    params: &mut ParamStore,
    grads: &Gradients,
    state: &mut SgdState,
    moments: &mut AdamMoments,
) -> Result<()> {
    check_grads(params, grads)?;
    let rate = state.effective_rate();
    let t = (state.step + 1) as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (name, p) in params.tensors.iter_mut() {
        let g = grads[name].data();
        let m = moments
            .m
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; g.len()]);
        let v = moments
            .v
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; g.len()]);
        for (((w, &d), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m).zip(v) {
            *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * d;
            *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * d * d;
            *w -= rate * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
        }
    }
    state.step += 1;
    Ok(())
}
