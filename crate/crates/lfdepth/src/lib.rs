//! Disparity estimation from 4D light field video.
//!
//! A light field video records a scene from a 9x9 grid of viewpoints over
//! time. Scene points trace straight lines across the angular dimension of
//! such a recording (epipolar-plane-image structure), and the slope of those
//! lines is the per-pixel disparity. This crate implements the full pipeline
//! for learning that mapping:
//!
//! - [`lf`] — light-field containers, EPI-stack slicing, normalization,
//!   padding and spatio-temporal patch extraction.
//! - [`scene`] — a procedural generator for desk-scale synthetic LF videos
//!   with exact ground-truth disparity.
//! - [`dataset`] — on-disk dataset format (PNG views + PFM disparity),
//!   manifest handling and sample indexing.
//! - [`model`] — the network: per-frame two-stream 3D CNN over horizontal and
//!   vertical view stacks, a 2D fusion stack, and a convolutional LSTM with a
//!   refine head (plus a non-recurrent baseline variant).
//! - [`objective`] — the three-term training loss (absolute disparity error,
//!   gradient error, surface-normal error) with analytic gradients.
//! - [`evaluation`] — MSE x100 / BadPix metrics, full-map reassembly from
//!   patch predictions, textureless-region masking and report serialization.
//! - [`training`] — Adam training loop with the step learning-rate schedule,
//!   checkpointing and deterministic resume.
//!
//! The `examples/` directory has one runnable example per capability; the
//! `lfdepth` binary wires the same functions into `generate` / `train` /
//! `eval` / `infer` / `report` subcommands.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod lf;
pub mod model;
pub mod nn;
pub mod objective;
pub mod scene;
pub mod training;

pub use error::{Error, Result};
