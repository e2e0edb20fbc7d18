//! Cost-optimal shipping box suite recommendation.
//!
//! The pipeline has two halves. The fitting half decides, for every
//! (shipment, candidate box) pair, whether the shipment's rigid cartons can be
//! packed into the box with axis-aligned rotations ([`fitting`], [`fitmatrix`]).
//! The selection half turns the resulting fit matrix into a penalized cost
//! matrix ([`cost`]) and picks `p` boxes by solving a p-median problem
//! ([`pmedian`]). [`pipeline`] wires both halves together and produces the
//! suite reports.

pub mod cost;
mod error;
pub mod fitmatrix;
pub mod fitting;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod pmedian;
pub mod synth;

pub use error::{Error, Result};
pub use model::{BoxSet, CandidateBox, Carton, Dims3, FoldableItem, Shipment};
