//! Learn-to-decide toolkit for multi-stage (stochastic) mixed-integer programs.
//!
//! The crate covers the whole loop at desk scale:
//!
//! - [`scenario`]: full scenario trees and the bundle (information set) structure
//!   that non-anticipativity is defined over.
//! - [`instances`]: lot-sizing (MCLSP) and multi-stage knapsack (MSMK) generators,
//!   stochastic variants, subset restriction and solution evaluation.
//! - [`solver`]: node-indexed extensive form, dense simplex, branch-and-bound and an
//!   exhaustive verification oracle.
//! - [`seqmodel`]: bidirectional LSTM encoder with an attention decoder, bundle
//!   averaging of encoder states, and analytic backpropagation through time.
//! - [`expand`]: horizon and item-wise expansion of a trained model.
//! - [`pipeline`]: dataset production, feasibility screening and the
//!   predict/screen/optimize flow with its evaluation metrics.

// Index loops mirror the math in numeric kernels; `!(a <= b)` keeps NaN on the failing side.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expand;
pub mod instances;
pub mod jsonl;
pub mod pipeline;
pub mod scenario;
pub mod seqmodel;
pub mod solver;

pub use error::{Error, Result};
