//! Conditional Bayesian quadrature (CBQ) for parametric expectations
//! `I(theta) = E_{X ~ P_theta}[f(X, theta)]`.
//!
//! Stage 1 runs Bayesian quadrature at each sampled parameter `theta_t`,
//! giving a Gaussian posterior `N(I_BQ(theta_t), sigma2_BQ(theta_t))`. Stage 2
//! regresses those means over `theta` with a heteroscedastic Gaussian process
//! whose per-point noise is the stage-1 variance. The crate also ships the
//! usual comparison estimators (Monte Carlo, importance sampling, polynomial and
//! kernel least-squares Monte Carlo, multi-output BQ), four benchmark problems,
//! and an experiment harness that writes plot-ready CSV.

pub mod baselines;
pub mod bq;
pub mod cache;
pub mod cbq;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod hyperopt;
pub mod kernels;
pub mod measure;
pub mod pipeline;
pub mod problems;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
