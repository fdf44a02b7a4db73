//! Numeric core: arrays, parameters, the affine/activation/concat primitives
//! with analytic gradients, initialisation, the finite-difference oracle and
//! parameter blob storage.

mod activation;
mod affine;
mod array;
pub mod blob;
mod concat;
mod fdiff;
mod init;
pub mod linalg;
mod param;
mod rng;

pub use activation::{relu, sigmoid, tanh_act, Activation, ActivationLayer};
pub use affine::Affine;
pub use array::Array;
pub use concat::{concat_batch, concat_flatten, concat_flatten_backward, split_batch};
pub use fdiff::{finite_diff_entries, finite_diff_grad, max_relative_error, relative_error};
pub use init::{fans, glorot_limit, init_params, InitScheme};
pub use param::{Parameter, Parameterized};
pub use rng::Rng;
