//! Dense reverse-mode automatic differentiation and optimizers.

mod graph;
pub mod io;
mod optim;
mod tensor;

pub use graph::{Gradients, Graph, OpKind, Var};
pub use optim::{adam_step, sgd_step, AdamMoments, ParamStore, SgdState};
pub use tensor::Tensor;
