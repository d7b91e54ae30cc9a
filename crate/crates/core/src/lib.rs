//! # auglab
//!
//! A desk-scale laboratory for augmentation graphs built on sampled manifolds.
//!
//! The pipeline is:
//!
//! ```text
//! manifold ──sample──▶ natural points ──Gaussian noise──▶ augmented cloud
//!                                                              │
//!            secondary-similarity weights over the natural sample
//!                                                              ▼
//!                          ε-graph ──▶ scaled unnormalized Laplacian ──▶ low spectrum
//! ```
//!
//! and the experiments in [`consistency`] and [`embedding`] compare what comes out
//! against analytic limits from [`continuum`].
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`manifold`] | circle, sphere, torus and dumbbell: sampling, projection, Laplace–Beltrami |
//! | [`augmentation`] | parameter schedule, Gaussian augmentation, near-manifold checks |
//! | [`graph`] | ε-neighbourhood graph with averaged-likelihood weights, Laplacian matvec |
//! | [`spectral`] | Lanczos eigensolver, dense oracle, Courant–Fischer checks, alignment |
//! | [`continuum`] | α, β constants and closed-form spectra of the limit operator |
//! | [`consistency`] | pointwise / spectral / rate / dumbbell experiments |
//! | [`embedding`] | Eckart–Young minimizer, factorization descent, ReLU realizability |

pub mod augmentation;
pub mod consistency;
pub mod continuum;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod manifold;
pub mod points;
pub mod rng;
pub mod spectral;
pub mod svg;

pub use error::{Error, Result};
pub use points::PointCloud;
