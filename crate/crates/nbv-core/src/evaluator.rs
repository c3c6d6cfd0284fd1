//! Candidate-view scoring.
//!
//! The projection evaluator ranks scene ellipsoids by camera-frame depth,
//! attenuates each by 0.5^rank, projects them to image conics, and scores a
//! view as weighted frontier area minus weighted occupied area. The ray-cast
//! evaluator walks one ray per pixel through the voxel grid and exists as the
//! speed baseline; it never sees the ellipsoid scene, and the projection
//! scorer never sees the grid.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    camera_matrix, conic_pixel_area, ellipsoid_to_quadric, project_quadric, world_to_camera,
    CameraModel, ConicKind, Ellipsoid, ViewPose,
};
use crate::voxel::{traverse_ray, VoxState, VoxelGrid};

/// Centers at or behind this camera-frame depth are excluded from ranking.
pub const Z_NEAR: f64 = 0.01;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no candidates to select from")]
    NoCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EllipsoidClass {
    Occupied,
    Frontier,
}

/// The fitted ellipsoids the projection evaluator scores against.
#[derive(Debug, Clone, Default)]
pub struct EllipsoidScene {
    pub occupied: Vec<Ellipsoid>,
    pub frontier: Vec<Ellipsoid>,
}

impl EllipsoidScene {
    pub fn len(&self) -> usize {
        self.occupied.len() + self.frontier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Joint iteration order fixing ellipsoid identity: occupied first.
    pub fn iter(&self) -> impl Iterator<Item = (EllipsoidClass, usize, &Ellipsoid)> {
        self.occupied
            .iter()
            .enumerate()
            .map(|(i, e)| (EllipsoidClass::Occupied, i, e))
            .chain(
                self.frontier
                    .iter()
                    .enumerate()
                    .map(|(i, e)| (EllipsoidClass::Frontier, i, e)),
            )
    }
}

/// Rank and observability weight of one scene ellipsoid under one view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedEllipsoid {
    pub class: EllipsoidClass,
    pub index: usize,
    /// Depth rank (0 = nearest); `None` when the center is at or behind the
    /// near plane.
    pub rank: Option<usize>,
    pub weight: f64,
}

/// Joint depth ranking of all scene ellipsoids (occupied and frontier in one
/// order): centers are moved to the camera frame, centers with z <= Z_NEAR
/// are excluded with weight 0, the rest sorted by z ascending get weight
/// 0.5^rank. Ties break by ellipsoid id.
pub fn rank_weights(scene: &EllipsoidScene, pose: &ViewPose) -> Vec<RankedEllipsoid> {
    let mut entries: Vec<RankedEllipsoid> = Vec::with_capacity(scene.len());
    let mut visible: Vec<(f64, usize)> = Vec::with_capacity(scene.len());
    for (joint_id, (class, index, e)) in scene.iter().enumerate() {
        let z = world_to_camera(pose, &e.center).z;
        entries.push(RankedEllipsoid {
            class,
            index,
            rank: None,
            weight: 0.0,
        });
        if z > Z_NEAR {
            visible.push((z, joint_id));
        }
    }
    visible.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    for (rank, (_, joint_id)) in visible.into_iter().enumerate() {
        entries[joint_id].rank = Some(rank);
        entries[joint_id].weight = 0.5f64.powi(rank as i32);
    }
    entries
}

/// Per-ellipsoid contribution to a view score.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EllipsoidContribution {
    pub class: EllipsoidClass,
    pub index: usize,
    pub rank: Option<usize>,
    pub weight: f64,
    /// Projected area in pixels (0 for degenerate or excluded projections).
    pub area: u64,
    /// Weighted area `area * weight`.
    pub weighted: f64,
}

/// Score of one candidate view.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewScore {
    /// Weighted frontier area minus weighted occupied area.
    pub f: f64,
    pub per_ellipsoid: Vec<EllipsoidContribution>,
    pub eval_seconds: f64,
}

/// Projection-based quality of a single view.
///
/// Each ranked ellipsoid goes quadric -> dual projection -> pixel count;
/// degenerate or behind-camera projections contribute zero area.
pub fn score_view(scene: &EllipsoidScene, pose: &ViewPose, cam: &CameraModel) -> ViewScore {
    let started = Instant::now();
    let ranked = rank_weights(scene, pose);
    let projection = camera_matrix(pose, cam);
    let mut per_ellipsoid = Vec::with_capacity(ranked.len());
    let mut f = 0.0;
    for (entry, (_, _, ellipsoid)) in ranked.iter().zip(scene.iter()) {
        let area = if entry.rank.is_some() {
            match project_quadric(&ellipsoid_to_quadric(ellipsoid), &projection) {
                Ok(conic) if conic.kind == ConicKind::Ellipse => {
                    conic_pixel_area(&conic, cam).unwrap_or(0)
                }
                _ => 0,
            }
        } else {
            0
        };
        let weighted = area as f64 * entry.weight;
        match entry.class {
            EllipsoidClass::Frontier => f += weighted,
            EllipsoidClass::Occupied => f -= weighted,
        }
        per_ellipsoid.push(EllipsoidContribution {
            class: entry.class,
            index: entry.index,
            rank: entry.rank,
            weight: entry.weight,
            area,
            weighted,
        });
    }
    ViewScore {
        f,
        per_ellipsoid,
        eval_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Index of the best candidate plus its score; ties break toward the lowest
/// candidate index. Candidates are evaluated in input order.
pub fn select_best_index(
    candidates: &[ViewPose],
    scene: &EllipsoidScene,
    cam: &CameraModel,
) -> Result<(usize, ViewScore), EvalError> {
    let mut best: Option<(usize, ViewScore)> = None;
    for (i, pose) in candidates.iter().enumerate() {
        let score = score_view(scene, pose, cam);
        let replace = match &best {
            None => true,
            Some((_, b)) => score.f > b.f,
        };
        if replace {
            best = Some((i, score));
        }
    }
    best.ok_or(EvalError::NoCandidates)
}

/// The candidate with maximal F.
pub fn select_best(
    candidates: &[ViewPose],
    scene: &EllipsoidScene,
    cam: &CameraModel,
) -> Result<(ViewPose, ViewScore), EvalError> {
    let (i, score) = select_best_index(candidates, scene, cam)?;
    Ok((candidates[i], score))
}

/// Ray-casting baseline: one ray per pixel through the grid, counting
/// Unknown and Frontier cells encountered before the first Occupied cell,
/// deduplicated across rays. Returns the gain and the evaluation time in
/// seconds. This is the comparison workload, not used by projection planning.
pub fn baseline_raycast_score(
    grid: &VoxelGrid,
    pose: &ViewPose,
    cam: &CameraModel,
) -> (u64, f64) {
    let started = Instant::now();
    let dims = grid.dims();
    let mut visited = vec![false; dims[0] * dims[1] * dims[2]];
    let mut gain = 0u64;
    for v in 0..cam.height {
        for u in 0..cam.width {
            let dir = pose.rotation * cam.pixel_ray(u as f64, v as f64);
            for cell in traverse_ray(&pose.translation, &dir, grid, f64::INFINITY) {
                let state = grid.state(cell);
                if state == VoxState::Occupied {
                    break;
                }
                if state == VoxState::Unknown || state == VoxState::Frontier {
                    let flat = (cell[2] * dims[1] + cell[1]) * dims[0] + cell[0];
                    if !visited[flat] {
                        visited[flat] = true;
                        gain += 1;
                    }
                }
            }
        }
    }
    (gain, started.elapsed().as_secs_f64())
}
