//! Multi-step ship roll forecasting.
//!
//! The crate is organised bottom-up:
//!
//! * [`seastate`] synthesizes long-crested irregular seas from a modified
//!   Pierson-Moskowitz spectrum and samples wave elevation at probe points.
//! * [`rollsurrogate`] integrates a nonlinear single-degree-of-freedom roll
//!   oscillator forced by that wave field and produces [`MotionRecord`]s.
//! * [`gradcore`] holds the dense array type, parameters, affine and
//!   activation primitives, initialisation, a finite-difference oracle and
//!   the parameter blob format.
//! * [`layers`] implements the LSTM and 1-D convolution feature extractors
//!   with exact backward passes.
//! * [`models`] assembles the parallel LSTM/Conv1D fusion network and the two
//!   single-branch baselines.
//! * [`datapipe`] turns records into normalized sliding-window datasets.
//! * [`trainer`] minimizes MSE with Adam or SGD and handles checkpoints.
//! * [`evaluator`] computes per-step and average RMSE in degrees and renders
//!   reports.

pub mod datapipe;
pub mod error;
pub mod evaluator;
pub mod gradcore;
pub mod layers;
pub mod models;
pub mod rollsurrogate;
pub mod seastate;
pub mod textio;
pub mod trainer;

pub use error::{Error, Result};
pub use rollsurrogate::MotionRecord;
