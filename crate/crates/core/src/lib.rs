//! Higher-order node embeddings built from edge-orbit motif matrices.
//!
//! The pipeline counts the thirteen connected edge orbits on 2–4 vertices for
//! every edge ([`orbits`]), turns each orbit into a weighted graph and one of
//! five motif matrices ([`motif`]), factorizes implicit k-step powers of
//! those matrices into local embeddings ([`linop`], [`factorize`]), and fuses
//! the local embeddings into one global embedding ([`pipeline`]). The
//! [`eval`] module runs the link-prediction protocol on top.

pub mod bench;
pub mod error;
pub mod eval;
pub mod factorize;
pub mod generators;
pub mod graph;
pub mod linop;
pub mod motif;
pub mod orbits;
pub mod pipeline;
pub mod sparse;

pub use error::{Error, Result, ResultExt};
pub use graph::{EdgeId, Graph, LoadOptions, NodeId};
pub use motif::MotifMatrixKind;
pub use orbits::{EdgeOrbitCounts, Orbit};
/// Dense matrix type used throughout the public API.
pub use nalgebra::DMatrix;
