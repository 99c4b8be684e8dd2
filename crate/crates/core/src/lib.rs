//! Indoor point-cloud processing pipeline.
//!
//! Building interiors captured by laser scanning arrive as raw point clouds:
//! noisy, outlier-ridden, unlabeled. This crate takes such a cloud through
//! three stages:
//!
//! 1. outlier cleaning ([`cleaning`]): axis-wise z-score filtration with a
//!    histogram-guided threshold, plus two classical neighborhood baselines;
//! 2. structural extraction ([`planes`]): seeded RANSAC plane fitting with
//!    least-squares refinement, sequential multi-plane extraction, and
//!    floor / ceiling / wall classification;
//! 3. semantic classification ([`features`], [`classify`]): a forward-only
//!    point-wise feature network pooled into a global descriptor, feeding a
//!    kernel SVM evaluated under k-fold cross-validation.
//!
//! [`synth`] generates labeled box rooms with known ground truth for testing
//! the stages end to end; [`io`] reads and writes PLY / XYZ clouds, network
//! weight files, and JSON reports.
//!
//! Every seeded operation is deterministic: equal inputs and seeds produce
//! identical outputs, independent of thread count.

pub mod classify;
pub mod cleaning;
pub mod cloud;
mod error;
pub mod features;
pub mod grid;
pub mod io;
pub mod planes;
pub mod synth;

pub use cloud::{Aabb, Axis, Point3, PointCloud};
pub use error::{Error, Result};
