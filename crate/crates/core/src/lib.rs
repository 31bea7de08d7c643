//! In-context linear regression with linear attention.
//!
//! Three predictor families (one-step GD with learnable initialisation,
//! linear self-attention and the linear transformer block), their exact
//! population risks, the optimal parameters, the LSA approximation gap,
//! the Bayes-optimal baseline and the gradient flow of the GD-β risk. Every
//! closed form has a seeded Monte-Carlo counterpart for cross-checking.

pub mod bayes;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod predictors;
pub mod risk;
pub mod runner;
pub mod task;

pub use error::{IclError, Result};
pub use linalg::{Mat, PsdMatrix, Vector};
pub use predictors::{GdBetaParams, LsaParamsReduced, LtbParamsReduced, LtbWeights};
pub use task::{Prompt, TaskSpec, TokenMatrix};
