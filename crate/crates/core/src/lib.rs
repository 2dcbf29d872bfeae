//! Atlas-based segmentation of white-matter tractography datasets.
//!
//! Subject fibers are labeled with their closest atlas bundle under a
//! length-normalized maximum-Euclidean-distance metric. Each (fiber,
//! centroid) pair runs through a four-stage discard cascade — center point,
//! endpoints, four intermediate points, full metric — so that the vast
//! majority of pairs is rejected after one or a handful of point distances.
//! The endpoint stage also fixes the fiber orientation, halving the work of
//! the later stages. Classification is embarrassingly parallel over subject
//! fibers and needs memory proportional to the subject plus the atlas,
//! never their product.
//!
//! The crate ships the segmentation engine ([`classifier`]), the binary
//! fiber file format and atlas manifest ([`io`]), brute-force reference
//! classifiers plus a seeded synthetic data generator and benchmark support
//! ([`validation`]), and the `fibseg` command-line front end ([`cli`]).

pub mod classifier;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod validation;

pub use classifier::{segment, CascadeConfig, CascadeStats, WorkerCount};
pub use error::{Error, Result};
pub use geometry::{Fiber, Orientation, Point3, ResampledFiber, RESAMPLE_POINTS};
pub use io::{Assignment, Atlas, AtlasBundle, BundleMatch, FiberDataset};
