//! Reward-guided decoding for exactly tractable toy diffusion models.
//!
//! The engine samples from reward-tilted distributions of small pre-trained
//! diffusion models without fine-tuning or gradients. Two families are
//! supported end to end: masked token sequences over an explicit data
//! table and a 1-D Gaussian chain over a mixture, both with exact Bayes
//! posterior predictors. Because the models are exactly tractable, every
//! sampler can be validated against enumerated ground truth: the model
//! marginal by dynamic programming, soft values by Bellman recursion, and
//! the tilted target in closed form.
//!
//! Modules map onto the pipeline: [`model`] defines the chains, [`rewards`]
//! the terminal objectives, [`values`] the look-ahead value estimators,
//! [`decoders`] the guided samplers, and [`oracle`] the ground truth they
//! are compared against.

pub mod decoders;
pub mod error;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod rewards;
pub mod rng;
pub mod schedule;
pub mod state;
pub mod table;
pub mod values;

pub use error::{Error, Result};
