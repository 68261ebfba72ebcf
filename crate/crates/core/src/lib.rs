//! Self-supervised single-image deraining.
//!
//! The pipeline has three stages:
//!
//! 1. [`mask`] locates rain-streak pixels by learning a patch dictionary on the
//!    high-frequency band of the input and keeping the atoms whose gradient
//!    histograms cluster tightly.
//! 2. [`pseudo_ref`] builds stochastic stand-ins for the clean image by copying
//!    nearby non-rain pixels over every rain pixel.
//! 3. [`rl`] trains one small fully-convolutional actor-critic per image. Every
//!    pixel is an agent choosing one of nine filter actions ([`filters::Action`]);
//!    rewards come from the pseudo references and a no-reference
//!    [`brisque`] score.
//!
//! Full-reference metrics used for evaluation live in [`metrics`].

pub mod brisque;
pub mod error;
pub mod filters;
pub mod image;
pub mod mask;
pub mod metrics;
pub mod pseudo_ref;
pub mod rl;
pub mod rng;

pub use crate::error::{Error, Result};
pub use crate::image::{Image, Plane};
pub use crate::mask::RainMask;
