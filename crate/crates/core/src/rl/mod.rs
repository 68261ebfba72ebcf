//! Pixel-wise actor-critic deraining.
//!
//! Every pixel is an agent that picks one of the nine filter actions at each
//! step. One network shared by all pixels outputs a per-pixel action
//! distribution and value. Rewards combine the squared-error improvement
//! against a pseudo reference with the drop in the quality score. Training is
//! synchronous and single-worker, so a seed fixes the entire run.

mod config;
mod episode;
mod net;
mod optim;
mod real;
mod train;
mod weights;

pub use self::config::TrainConfig;
pub use self::episode::{
    brisque_reward, derain, loss_and_gradients, losses, mse_reward, n_step_returns, objective,
    rollout, select_actions, step_state, total_reward, LossReport, Mode, StepRecord, Trajectory,
};
pub use self::net::{
    input_tensor, log_softmax_at, softmax_into, Conv, ConvGrad, ForwardCache, Gradients, Network,
    PolicyOutput, Tensor, LAYER_NAMES, TRUNK_DILATIONS,
};
pub use self::optim::{clip_global_norm, Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, CLIP_NORM};
pub use self::real::Real;
pub use self::train::{backprop_and_update, train, train_from, LogRow, TrainingLog};
pub use self::weights::{from_bytes, load_params, save_params, to_bytes, MAGIC, VERSION};
