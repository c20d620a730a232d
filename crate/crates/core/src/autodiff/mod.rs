//! Dense tensors, a reverse-mode tape, optimizers, and gradient checking.

pub mod gradcheck;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, relative_error};
pub use optim::{clip_global_norm, Optimizer, OptimizerKind};
pub use tape::{GradMap, ParamId, ParamStore, Tape, ValueId};
pub use tensor::Tensor;
