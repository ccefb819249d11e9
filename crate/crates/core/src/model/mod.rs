// SPDX-License-Identifier: Apache-2.0

//! Per-agent classifiers: multilayer perceptrons with softmax outputs,
//! risk functions and empirical-risk minimization.

pub mod dataset;
pub mod mlp;
pub mod risk;
pub mod train;

pub use dataset::{class_of_sign, sign_of_class, LabeledDataset, MINUS, PLUS};
pub use mlp::{Activation, ForwardOutput, Gradients, MlpArchitecture, MlpModel, ModelFile};
pub use risk::{cross_entropy_risk, log_sum_exp, logistic_risk, logistic_risk_values, softplus};
pub use train::{gradient_check, train_erm, train_weighted, TrainedModel, TrainingHyperparameters};
