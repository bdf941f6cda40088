//! Gaussian-process regression and variational classification on Hodgelet
//! representations.

pub mod checkpoint;
pub mod kernel;
pub mod likelihood;
pub mod model;
pub mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use kernel::{base_kernel, hodgelet_kernel, BaseKernel, CompositeKernel, KernelConfig, KernelFamily, KernelMode};
pub use likelihood::Likelihood;
pub use model::{cholesky_jittered, GpConfig, GpModel, Inference, Predictive, Standardizer, Variational};
pub use optim::{adamw_maximize, OptimConfig, ParamGroups, Trace};
