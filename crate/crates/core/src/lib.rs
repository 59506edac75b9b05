//! Candidate-for-job recommendation experiments.
//!
//! The pipeline parses structured profiles ([`profile`]), turns a chosen
//! field subset into features ([`text`], [`embed`]), optionally reduces them
//! with a truncated SVD ([`dimred`]), and trains one of eight binary
//! classifiers ([`classify`]) to predict whether a user's first job carries a
//! target title. A rating-matrix route ([`cf`]) does the same with SVD++ and
//! asymmetric SVD++. [`eval`] scores the predictions and [`harness`] runs
//! whole experiment grids, usually on corpora from [`datagen`].

pub mod cf;
pub mod classify;
pub mod datagen;
pub mod dimred;
pub mod embed;
pub mod error;
pub mod eval;
pub mod features;
pub mod harness;
pub mod kv;
pub mod linalg;
pub mod profile;
pub mod tensor;
pub mod text;

pub use error::{Error, Result};
