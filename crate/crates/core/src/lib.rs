//! Lane detection built on differentiable Hough transforms.
//!
//! The crate provides:
//! - [`hough`]: the analytic `(theta, r)` parameterization, quantization
//!   conventions and ground-truth Hough label construction from lane polylines;
//! - [`dht`]: the deep Hough transform accumulator, its exact adjoint (the
//!   reverse Hough transform) and hierarchical multi-scale aggregation;
//! - [`instance`]: Hough-map peak selection, dynamic-convolution kernels and
//!   row-wise lane decoding;
//! - [`losses`]: the five training loss terms and their weighted total;
//! - [`pipeline`]: a toy end-to-end trainable model with a synthetic lane
//!   scene generator;
//! - [`data`]: TuSimple/CULane annotation formats and the official metrics.

pub mod data;
pub mod dht;
pub mod error;
pub mod grid;
pub mod hough;
pub mod instance;
pub mod io;
pub mod losses;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{Grid, Tensor3};
pub use hough::{HoughLabel, HoughPoint, HoughSpec, LanePolyline, LaneSet, Line, Origin};
