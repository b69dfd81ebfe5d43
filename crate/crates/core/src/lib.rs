//! Multiscale detrended cross-correlation networks for financial returns.
//!
//! The crate turns a panel of daily prices into rolling-window indicators:
//! DCCA coefficient matrices over several time scales, minimum spanning tree
//! lengths and their cross-scale ratio, the dominant eigenvalue of the tree,
//! and moments of the tree's edge-length distribution. A VAR-based
//! connectedness measure is included for comparison.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod connectedness;
pub mod dcca;
pub mod garch;
pub mod ingest;
pub mod netgraph;
pub mod optim;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod stats;

pub use dcca::{BoxScheme, DccaMatrix, DistanceMatrix};
pub use ingest::{AlignmentPolicy, PricePanel, RawSeries, ReturnPanel};
pub use pipeline::{IndicatorSeries, RollingConfig};
