//! Algorithmic core of an occlusion-aware video instance segmenter.
//!
//! The learned parts of such a model (backbone, decoder, heads) are taken as
//! given arrays; this crate implements everything around them:
//!
//! - [`mask`]: masks, boxes, RLE, IoU, box-overlap neighbor sets and the
//!   complementary inter-instance mask.
//! - [`query`]: grid-guided query selection and windowed inter-frame
//!   query association.
//! - [`losses`]: mask, repulsion, focal, contrastive and box losses with
//!   closed-form gradients plus a finite-difference oracle.
//! - [`clip`]: clip-level query aggregation and mask synthesis.
//! - [`tracker`]: the near-online tracker with its memory pool.
//! - [`synthetic`]: seeded occlusion scenarios and tracking metrics.
//! - [`io`]: clip records, track dumps, config files, PPM/SVG rendering.

pub mod clip;
pub mod error;
pub mod hungarian;
pub mod io;
pub mod losses;
pub mod mask;
pub mod oracles;
pub mod query;
pub mod rng;
pub mod selftest;
pub mod synthetic;
pub mod tracker;

pub use error::{Error, Result};
