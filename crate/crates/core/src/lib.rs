//! Constructive triangle factors in pseudorandom graphs.
//!
//! The pipeline builds levels of K4⁻ chains as absorbers, covers everything
//! outside them with triangles, and then resolves the levels top-down with
//! disjoint-representative searches. Every factor it returns has passed
//! [`verify_triangle_factor`]. Alongside it sit spectral and bijumbledness
//! certification and an exact brute-force oracle for small instances.

pub mod absorber;
pub mod chains;
pub mod error;
pub mod factor;
pub mod generators;
pub mod graph;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod spectral;

pub use chains::{Chain, DfsState};
pub use error::{Error, Result};
pub use factor::{check_triangle_factor, verify_triangle_factor, FactorViolation, TriangleFactor};
pub use generators::GenSpec;
pub use graph::{Graph, VertexSet};
pub use pipeline::{triangle_factor, PipelineConfig, PipelineOutcome, RunReport};
pub use spectral::{JumbledParams, SpectralReport};
