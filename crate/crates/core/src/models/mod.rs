//! Loss functions with analytic gradients, a small square MLP with manual
//! backpropagation, synthetic data generators and datasets.

mod dataset;
pub mod loss;
pub mod mlp;
mod oracle;
pub mod synth;

pub use dataset::Dataset;
pub use loss::{
    hinge_loss_grad, least_squares_grad, smoothed_hinge, smoothed_hinge_loss_grad,
    smoothed_hinge_slope, Batch, LinearModel, LossKind,
};
pub use mlp::{mlp_forward_grad, Activation, MlpModel};
pub use oracle::{min_norm_ls_oracle, RowSpaceProjector};
pub use synth::{FeatureBlock, StreamSpec, SyntheticStream};
