//! Blockwise adaptive gradient methods.
//!
//! The crate provides the two blockwise optimizers, [`optim::BagState`] for online
//! convex learning and [`optim::BagmState`] for stochastic nonconvex optimization,
//! together with the pieces they are built from (parameter layouts and block
//! partitions, weight/stepsize/momentum schedules) and a set of reproducible
//! synthetic experiments in [`experiments`].
//!
//! A blockwise optimizer shares one adaptive stepsize among all coordinates of
//! a block. With one coordinate per block it reduces to the familiar
//! coordinatewise methods (Adagrad, Adam); with a single block it uses one
//! global adaptive stepsize.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Blocks are lists of ranges; a one-range block is the common case.
#![allow(clippy::single_range_in_vec_init)]

pub mod error;
pub mod experiments;
pub mod layout;
pub mod linalg;
pub mod models;
pub mod optim;
pub mod param;
pub mod rng;
pub mod schedules;

pub use error::{Error, Result};
pub use layout::{Block, BlockPartition, ModelLayout, Strategy, TensorKind, TensorSpec};
pub use param::ParamVector;
pub use rng::Rng;
