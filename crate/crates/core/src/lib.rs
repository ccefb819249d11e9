// SPDX-License-Identifier: Apache-2.0

//! Social machine learning: agents train local classifiers, turn their
//! logits into debiased statistics and reach a joint decision by social
//! learning over a graph.

// negated float comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod model;
pub mod seed;
pub mod social;
pub mod statistics;
pub mod theory;

pub use error::{Error, Result};
