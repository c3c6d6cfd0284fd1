//! Five-state voxel map over a growing, lattice-aligned bounding box.
//!
//! States follow the scan semantics: Empty and Occupied are absorbing once
//! written, Unknown voxels flip to Frontier (and back) during frontier
//! extraction, and None marks never-touched cells added by box growth.

use std::io::Write;

use thiserror::Error;

use crate::geometry::{Aabb, CameraModel, Vec3, ViewPose};
use crate::sensor::DepthImage;

#[derive(Debug, Error)]
pub enum VoxelError {
    #[error("camera origin {0:?} is inside the voxel bounding box")]
    PoseOutsideWorkspace(Vec3),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum VoxState {
    None = 0,
    Empty = 1,
    Occupied = 2,
    Unknown = 3,
    Frontier = 4,
}

impl VoxState {
    pub fn name(&self) -> &'static str {
        match self {
            VoxState::None => "NONE",
            VoxState::Empty => "EMPTY",
            VoxState::Occupied => "OCCUPIED",
            VoxState::Unknown => "UNKNOWN",
            VoxState::Frontier => "FRONTIER",
        }
    }
}

/// Radius of the expansion sphere grown around each frontier voxel when the
/// bounding box is updated.
#[derive(Debug, Clone, Copy)]
pub struct FrontierSphereParam {
    pub gamma: f64,
}

impl FrontierSphereParam {
    pub fn new(gamma: f64) -> Self {
        assert!(gamma > 0.0, "gamma must be positive");
        Self { gamma }
    }
}

/// Counts of state transitions applied by one scan integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanSummary {
    pub new_empty: usize,
    pub new_occupied: usize,
    pub new_unknown: usize,
}

/// Dense voxel grid; cell `(i, j, k)` spans
/// `[(min_cell + idx) * res, (min_cell + idx + 1) * res)` per axis in world
/// coordinates, so every grid ever produced shares one global lattice.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    resolution: f64,
    min_cell: [i64; 3],
    dims: [usize; 3],
    states: Vec<VoxState>,
}

/// One cell pierced by a ray, with its entry/exit ray parameters.
#[derive(Debug, Clone, Copy)]
pub struct TraversedCell {
    pub cell: [usize; 3],
    pub t_in: f64,
    pub t_out: f64,
}

impl VoxelGrid {
    pub fn new(resolution: f64, min_cell: [i64; 3], dims: [usize; 3]) -> Self {
        assert!(resolution > 0.0);
        assert!(dims.iter().all(|&d| d > 0));
        Self {
            resolution,
            min_cell,
            dims,
            states: vec![VoxState::None; dims[0] * dims[1] * dims[2]],
        }
    }

    /// Grid from explicit states; used by tooling and tests that need to
    /// synthesize maps without replaying scans.
    pub fn from_raw_states(
        resolution: f64,
        min_cell: [i64; 3],
        dims: [usize; 3],
        states: Vec<VoxState>,
    ) -> Self {
        assert_eq!(states.len(), dims[0] * dims[1] * dims[2]);
        Self {
            resolution,
            min_cell,
            dims,
            states,
        }
    }

    /// Tight lattice-aligned grid over a point cloud with every point's cell
    /// marked Occupied. This seeds the map from the first scan.
    pub fn bootstrap_from_cloud(resolution: f64, points: &[Vec3]) -> Option<Self> {
        let first = points.first()?;
        let cell_of = |p: &Vec3| {
            [
                (p.x / resolution).floor() as i64,
                (p.y / resolution).floor() as i64,
                (p.z / resolution).floor() as i64,
            ]
        };
        let mut lo = cell_of(first);
        let mut hi = lo;
        for p in points {
            let c = cell_of(p);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        let dims = [
            (hi[0] - lo[0] + 1) as usize,
            (hi[1] - lo[1] + 1) as usize,
            (hi[2] - lo[2] + 1) as usize,
        ];
        let mut grid = Self::new(resolution, lo, dims);
        for p in points {
            let c = cell_of(p);
            let local = [
                (c[0] - lo[0]) as usize,
                (c[1] - lo[1]) as usize,
                (c[2] - lo[2]) as usize,
            ];
            grid.set_state(local, VoxState::Occupied);
        }
        Some(grid)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn world_bbox(&self) -> Aabb {
        let min = Vec3::new(
            self.min_cell[0] as f64 * self.resolution,
            self.min_cell[1] as f64 * self.resolution,
            self.min_cell[2] as f64 * self.resolution,
        );
        let size = Vec3::new(
            self.dims[0] as f64 * self.resolution,
            self.dims[1] as f64 * self.resolution,
            self.dims[2] as f64 * self.resolution,
        );
        Aabb::new(min, min + size)
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    pub fn state(&self, c: [usize; 3]) -> VoxState {
        self.states[self.flat(c)]
    }

    /// Local cell containing a world point, or `None` outside the box.
    pub fn cell_of_point(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let idx = (p[a] / self.resolution).floor() as i64 - self.min_cell[a];
            if idx < 0 || idx >= self.dims[a] as i64 {
                return None;
            }
            out[a] = idx as usize;
        }
        Some(out)
    }

    pub fn cell_center(&self, c: [usize; 3]) -> Vec3 {
        Vec3::new(
            (self.min_cell[0] + c[0] as i64) as f64 * self.resolution + 0.5 * self.resolution,
            (self.min_cell[1] + c[1] as i64) as f64 * self.resolution + 0.5 * self.resolution,
            (self.min_cell[2] + c[2] as i64) as f64 * self.resolution + 0.5 * self.resolution,
        )
    }

    /// Apply a state transition, enforcing the allowed state machine in debug
    /// builds: None -> {E, O, U}; U <-> F; {U, F} -> {E, O}; E, O absorbing.
    pub fn set_state(&mut self, c: [usize; 3], new: VoxState) -> bool {
        let idx = self.flat(c);
        let old = self.states[idx];
        if old == new {
            return false;
        }
        let allowed = match (old, new) {
            (VoxState::None, VoxState::Empty | VoxState::Occupied | VoxState::Unknown) => true,
            (VoxState::Unknown, VoxState::Frontier | VoxState::Empty | VoxState::Occupied) => true,
            (VoxState::Frontier, VoxState::Unknown | VoxState::Empty | VoxState::Occupied) => true,
            _ => false,
        };
        debug_assert!(allowed, "illegal transition {old:?} -> {new:?}");
        if !allowed {
            return false;
        }
        self.states[idx] = new;
        true
    }

    pub fn count(&self, s: VoxState) -> usize {
        self.states.iter().filter(|&&x| x == s).count()
    }

    pub fn cells_in_state(&self, s: VoxState) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    if self.state([i, j, k]) == s {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }

    pub fn centers_in_state(&self, s: VoxState) -> Vec<Vec3> {
        self.cells_in_state(s)
            .into_iter()
            .map(|c| self.cell_center(c))
            .collect()
    }

    /// Debug text dump: `res <m> bbox <x0 y0 z0 x1 y1 z1>` then one
    /// `i j k STATE` line per non-None cell.
    pub fn write_dump<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let bb = self.world_bbox();
        writeln!(
            w,
            "res {} bbox {} {} {} {} {} {}",
            self.resolution, bb.min.x, bb.min.y, bb.min.z, bb.max.x, bb.max.y, bb.max.z
        )?;
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    let s = self.state([i, j, k]);
                    if s != VoxState::None {
                        writeln!(w, "{} {} {} {}", i, j, k, s.name())?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Grow the bounding box, preserving existing states under re-indexing.
    ///
    /// First frame: the box of Occupied cells is extended along the viewing
    /// direction until its diagonal doubles, entirely on the far side.
    /// Later frames: the box grows (never shrinks) to cover Occupied cells
    /// and a gamma-sphere around every Frontier cell.
    pub fn update_bounding_box(
        &mut self,
        gamma: FrontierSphereParam,
        current_view: &ViewPose,
        first_frame: bool,
    ) {
        let res = self.resolution;
        let (new_lo, new_hi_excl) = if first_frame {
            // Lattice bounds of the occupied region (exclusive upper).
            let occ = self.cells_in_state(VoxState::Occupied);
            assert!(!occ.is_empty(), "first-frame box update requires occupied cells");
            let mut lo = [i64::MAX; 3];
            let mut hi = [i64::MIN; 3];
            for c in occ {
                for a in 0..3 {
                    let g = self.min_cell[a] + c[a] as i64;
                    lo[a] = lo[a].min(g);
                    hi[a] = hi[a].max(g + 1);
                }
            }
            let size = [
                (hi[0] - lo[0]) as f64 * res,
                (hi[1] - lo[1]) as f64 * res,
                (hi[2] - lo[2]) as f64 * res,
            ];
            let d = current_view.optical_axis();
            // Extend by s along |d| per axis so the diagonal doubles:
            // sum (size_i + s |d_i|)^2 = 4 sum size_i^2.
            let diag_sq: f64 = size.iter().map(|x| x * x).sum();
            let dot: f64 = (0..3).map(|a| size[a] * d[a].abs()).sum();
            let s = -dot + (dot * dot + 3.0 * diag_sq).sqrt();
            for a in 0..3 {
                let cells = (s * d[a].abs() / res).ceil() as i64;
                if d[a] > 0.0 {
                    hi[a] += cells;
                } else {
                    lo[a] -= cells;
                }
            }
            (lo, hi)
        } else {
            let mut lo = self.min_cell;
            let mut hi = [
                self.min_cell[0] + self.dims[0] as i64,
                self.min_cell[1] + self.dims[1] as i64,
                self.min_cell[2] + self.dims[2] as i64,
            ];
            for c in self.cells_in_state(VoxState::Frontier) {
                let center = self.cell_center(c);
                for a in 0..3 {
                    lo[a] = lo[a].min(((center[a] - gamma.gamma) / res).floor() as i64);
                    hi[a] = hi[a].max(((center[a] + gamma.gamma) / res).ceil() as i64);
                }
            }
            (lo, hi)
        };

        let new_dims = [
            (new_hi_excl[0] - new_lo[0]) as usize,
            (new_hi_excl[1] - new_lo[1]) as usize,
            (new_hi_excl[2] - new_lo[2]) as usize,
        ];
        if new_lo == self.min_cell && new_dims == self.dims {
            return;
        }
        let mut next = VoxelGrid::new(res, new_lo, new_dims);
        let off = [
            self.min_cell[0] - new_lo[0],
            self.min_cell[1] - new_lo[1],
            self.min_cell[2] - new_lo[2],
        ];
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    let s = self.state([i, j, k]);
                    if s != VoxState::None {
                        let tgt = [
                            (i as i64 + off[0]) as usize,
                            (j as i64 + off[1]) as usize,
                            (k as i64 + off[2]) as usize,
                        ];
                        let flat = next.flat(tgt);
                        next.states[flat] = s;
                    }
                }
            }
        }
        *self = next;
    }
}

/// Amanatides-Woo traversal: cells pierced by the ray in increasing distance
/// order, from the box entry to `max_range` or box exit. Consecutive cells
/// share a face. A ray that misses the box yields an empty list.
pub fn traverse_ray(
    origin: &Vec3,
    direction: &Vec3,
    grid: &VoxelGrid,
    max_range: f64,
) -> Vec<[usize; 3]> {
    traverse_ray_cells(origin, direction, grid, max_range)
        .into_iter()
        .map(|tc| tc.cell)
        .collect()
}

/// Traversal with per-cell entry/exit ray parameters.
pub fn traverse_ray_cells(
    origin: &Vec3,
    direction: &Vec3,
    grid: &VoxelGrid,
    max_range: f64,
) -> Vec<TraversedCell> {
    debug_assert!((direction.norm() - 1.0).abs() < 1e-9, "direction must be unit");
    let bb = grid.world_bbox();
    let Some((t0, t1)) = bb.intersect_ray(origin, direction) else {
        return Vec::new();
    };
    let t_end = t1.min(max_range);
    if t0 > t_end {
        return Vec::new();
    }
    let res = grid.resolution;
    let dims = grid.dims;
    let entry = origin + direction * t0;
    let mut cell = [0i64; 3];
    for a in 0..3 {
        let idx = ((entry[a] / res).floor() as i64 - grid.min_cell[a])
            .clamp(0, dims[a] as i64 - 1);
        cell[a] = idx;
    }
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        if direction[a] > 0.0 {
            step[a] = 1;
            t_delta[a] = res / direction[a];
            let boundary = (grid.min_cell[a] + cell[a] + 1) as f64 * res;
            t_max[a] = (boundary - origin[a]) / direction[a];
        } else if direction[a] < 0.0 {
            step[a] = -1;
            t_delta[a] = -res / direction[a];
            let boundary = (grid.min_cell[a] + cell[a]) as f64 * res;
            t_max[a] = (boundary - origin[a]) / direction[a];
        }
    }
    let mut out = Vec::new();
    let mut t = t0;
    loop {
        // Exit parameter of the current cell is the nearest boundary ahead.
        let axis = (0..3).min_by(|&x, &y| t_max[x].total_cmp(&t_max[y])).unwrap();
        let t_next = t_max[axis];
        out.push(TraversedCell {
            cell: [cell[0] as usize, cell[1] as usize, cell[2] as usize],
            t_in: t,
            t_out: t_next.min(t_end),
        });
        if t_next > t_end {
            break;
        }
        cell[axis] += step[axis];
        if cell[axis] < 0 || cell[axis] >= dims[axis] as i64 {
            break;
        }
        t_max[axis] += t_delta[axis];
        t = t_next;
    }
    out
}

/// Fold one depth image into the map.
///
/// Every back-projected hit cell becomes Occupied first, then a uniform
/// angular subgrid of pixel rays sweeps Empty ahead of each hit and Unknown
/// behind it (no-hit rays sweep Empty out to `depth_max`). Precedence within
/// a scan is Occupied > Empty > Unknown; Empty and Occupied written by any
/// earlier scan are never overwritten.
pub fn integrate_scan(
    grid: &mut VoxelGrid,
    img: &DepthImage,
    cam: &CameraModel,
) -> Result<ScanSummary, VoxelError> {
    let pose = &img.pose;
    let origin = pose.translation;
    if grid.world_bbox().contains(&origin) {
        return Err(VoxelError::PoseOutsideWorkspace(origin));
    }
    let mut summary = ScanSummary::default();

    // Occupied pass: all finite pixels, so occupied cells always contain a
    // cloud point.
    for v in 0..img.height {
        for u in 0..img.width {
            let z = img.at(u, v);
            if !z.is_finite() {
                continue;
            }
            let p_c = Vec3::new(
                (u as f64 - cam.cx) / cam.fx * z,
                (v as f64 - cam.cy) / cam.fy * z,
                z,
            );
            let p_w = pose.camera_to_world(&p_c);
            if let Some(cell) = grid.cell_of_point(&p_w) {
                if grid.state(cell) != VoxState::Empty && grid.set_state(cell, VoxState::Occupied) {
                    summary.new_occupied += 1;
                }
            }
        }
    }

    // Ray sweep at roughly one ray per voxel angular size at depth_max
    // ("several rays at equal angles"), never coarser than the pixel grid.
    let voxel_angle = grid.resolution / cam.depth_max;
    let step_u = ((voxel_angle * cam.fx).floor() as u32).max(1);
    let step_v = ((voxel_angle * cam.fy).floor() as u32).max(1);
    let mut v = step_v / 2;
    while v < img.height {
        let mut u = step_u / 2;
        while u < img.width {
            integrate_pixel_ray(grid, img, cam, u, v, &mut summary);
            u += step_u;
        }
        v += step_v;
    }
    Ok(summary)
}

fn integrate_pixel_ray(
    grid: &mut VoxelGrid,
    img: &DepthImage,
    cam: &CameraModel,
    u: u32,
    v: u32,
    summary: &mut ScanSummary,
) {
    let pose = &img.pose;
    let dir_c = cam.pixel_ray(u as f64, v as f64);
    let dir_w = pose.rotation * dir_c;
    let z = img.at(u, v);
    let (hit, limit) = if z.is_finite() {
        let t_hit = z / dir_c.z;
        let p_c = Vec3::new(
            (u as f64 - cam.cx) / cam.fx * z,
            (v as f64 - cam.cy) / cam.fy * z,
            z,
        );
        (Some((t_hit, pose.camera_to_world(&p_c))), f64::INFINITY)
    } else {
        (None, cam.depth_max / dir_c.z)
    };
    let hit_cell = hit.and_then(|(_, p)| grid.cell_of_point(&p));
    let t_hit = hit.map(|(t, _)| t);

    let mut behind = false;
    for tc in traverse_ray_cells(&pose.translation, &dir_w, grid, limit) {
        let reached_hit = match (hit_cell, t_hit) {
            (Some(hc), _) if tc.cell == hc => true,
            // Fallback when the hit point's cell was missed numerically.
            (_, Some(th)) if tc.t_in > th => true,
            _ => false,
        };
        if reached_hit {
            behind = true;
        }
        if hit_cell == Some(tc.cell) {
            continue; // already marked occupied from the cloud pass
        }
        let target = if !behind { VoxState::Empty } else { VoxState::Unknown };
        match (grid.state(tc.cell), target) {
            (VoxState::Occupied | VoxState::Empty, _) => {}
            // Frontier cells keep their label until the next extraction pass.
            (VoxState::Frontier, VoxState::Unknown) => {}
            (VoxState::Unknown, VoxState::Unknown) => {}
            (old, VoxState::Empty) => {
                // Unknown/Frontier/None may all be certified free by a ray.
                let _ = old;
                if grid.set_state(tc.cell, VoxState::Empty) {
                    summary.new_empty += 1;
                }
            }
            (VoxState::None, VoxState::Unknown) => {
                if grid.set_state(tc.cell, VoxState::Unknown) {
                    summary.new_unknown += 1;
                }
            }
            _ => {}
        }
    }
}

/// Relabel Unknown cells with at least one Empty and one Occupied cell in
/// their 26-neighborhood as Frontier; Frontier cells failing the test revert
/// to Unknown. Returns the frontier cells in index order.
pub fn extract_frontiers(grid: &mut VoxelGrid) -> Vec<[usize; 3]> {
    let dims = grid.dims;
    let mut frontiers = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let s = grid.state([i, j, k]);
                if s != VoxState::Unknown && s != VoxState::Frontier {
                    continue;
                }
                let mut has_empty = false;
                let mut has_occupied = false;
                'nbhd: for dk in -1i64..=1 {
                    for dj in -1i64..=1 {
                        for di in -1i64..=1 {
                            if di == 0 && dj == 0 && dk == 0 {
                                continue;
                            }
                            let (ni, nj, nk) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                            if ni < 0
                                || nj < 0
                                || nk < 0
                                || ni >= dims[0] as i64
                                || nj >= dims[1] as i64
                                || nk >= dims[2] as i64
                            {
                                continue;
                            }
                            match grid.state([ni as usize, nj as usize, nk as usize]) {
                                VoxState::Empty => has_empty = true,
                                VoxState::Occupied => has_occupied = true,
                                _ => {}
                            }
                            if has_empty && has_occupied {
                                break 'nbhd;
                            }
                        }
                    }
                }
                let is_frontier = has_empty && has_occupied;
                if is_frontier {
                    grid.set_state([i, j, k], VoxState::Frontier);
                    frontiers.push([i, j, k]);
                } else if s == VoxState::Frontier {
                    grid.set_state([i, j, k], VoxState::Unknown);
                }
            }
        }
    }
    frontiers
}
