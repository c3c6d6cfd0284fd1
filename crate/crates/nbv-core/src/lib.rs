//! Projection-based next-best-view planning.
//!
//! The pipeline scans a triangle mesh with a synthetic depth camera, maintains
//! a five-state voxel map, fits ellipsoids to occupied/frontier voxel clusters,
//! and scores candidate viewpoints by weighted dual-quadric projection instead
//! of per-voxel ray-casting. A ray-casting evaluator is kept as the speed
//! baseline.

pub mod geometry;
pub mod mesh;
pub mod sensor;
pub mod voxel;
pub mod gmm;
pub mod mvee;
pub mod sampling;
pub mod config;
pub mod evaluator;
pub mod planner;

pub use config::{EvaluatorKind, RunConfig};
pub use evaluator::EllipsoidScene;
pub use geometry::{Aabb, CameraModel, Conic, ConicKind, Ellipsoid, Quadric, ViewPose};
