//! Synthetic structured-light camera: renders depth images of a triangle mesh
//! from arbitrary poses and back-projects them to world-frame point clouds.
//!
//! Depth is measured along the optical axis (camera-frame z), and no-hit
//! pixels carry a quiet NaN sentinel.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::geometry::{Aabb, CameraModel, Vec3, ViewPose};
use crate::mesh::TriangleMesh;

/// Depth image with the pose it was captured from.
#[derive(Debug, Clone)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    /// Row-major z-depths in meters; NaN marks no-hit/invalid pixels.
    pub depth: Vec<f64>,
    pub pose: ViewPose,
}

impl DepthImage {
    pub fn at(&self, u: u32, v: u32) -> f64 {
        self.depth[(v * self.width + u) as usize]
    }

    pub fn finite_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }
}

const BVH_LEAF_SIZE: usize = 8;

struct BvhNode {
    bbox: Aabb,
    /// Child pair for interior nodes, triangle range for leaves.
    kind: BvhNodeKind,
}

enum BvhNodeKind {
    Interior { left: usize, right: usize },
    Leaf { start: usize, end: usize },
}

/// Mesh plus a median-split BVH for nearest-hit ray queries.
///
/// Build once, render from many poses; the planner holds one per run.
pub struct Renderer<'a> {
    mesh: &'a TriangleMesh,
    nodes: Vec<BvhNode>,
    /// Triangle indices permuted by BVH construction.
    order: Vec<u32>,
}

struct Hit {
    t: f64,
    tri: u32,
}

impl<'a> Renderer<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        let mut order: Vec<u32> = (0..mesh.triangles.len() as u32).collect();
        let centroids: Vec<Vec3> = (0..mesh.triangles.len())
            .map(|i| {
                let [a, b, c] = mesh.triangle_vertices(i);
                (a + b + c) / 3.0
            })
            .collect();
        let mut nodes = Vec::new();
        build_bvh(mesh, &centroids, &mut order, 0, mesh.triangles.len(), &mut nodes);
        Self { mesh, nodes, order }
    }

    fn triangle_bbox(mesh: &TriangleMesh, i: usize) -> Aabb {
        let [a, b, c] = mesh.triangle_vertices(i);
        Aabb::new(a.inf(&b).inf(&c), a.sup(&b).sup(&c))
    }

    /// Nearest intersection along `dir` (unit) from `origin`; ties on exactly
    /// equal t are broken by the lowest triangle index.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, u32)> {
        let mut best: Option<Hit> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            match node.bbox.intersect_ray(origin, dir) {
                None => continue,
                Some((t_in, _)) => {
                    if let Some(ref b) = best {
                        if t_in > b.t {
                            continue;
                        }
                    }
                }
            }
            match node.kind {
                BvhNodeKind::Interior { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
                BvhNodeKind::Leaf { start, end } => {
                    for &tri in &self.order[start..end] {
                        let [a, b, c] = self.mesh.triangle_vertices(tri as usize);
                        if let Some(t) = ray_triangle(origin, dir, &a, &b, &c) {
                            let better = match &best {
                                None => true,
                                Some(h) => t < h.t || (t == h.t && tri < h.tri),
                            };
                            if better {
                                best = Some(Hit { t, tri });
                            }
                        }
                    }
                }
            }
        }
        best.map(|h| (h.t, h.tri))
    }

    /// Render a z-depth image; hits outside `[depth_min, depth_max]` become
    /// no-hit. Deterministic for fixed inputs.
    pub fn render(&self, pose: &ViewPose, cam: &CameraModel) -> DepthImage {
        let rows: Vec<Vec<f64>> = (0..cam.height)
            .into_par_iter()
            .map(|v| {
                let mut row = Vec::with_capacity(cam.width as usize);
                for u in 0..cam.width {
                    let dir_c = cam.pixel_ray(u as f64, v as f64);
                    let dir_w = pose.rotation * dir_c;
                    let z = self
                        .raycast(&pose.translation, &dir_w)
                        .map(|(t, _)| t * dir_c.z)
                        .filter(|z| *z >= cam.depth_min && *z <= cam.depth_max)
                        .unwrap_or(f64::NAN);
                    row.push(z);
                }
                row
            })
            .collect();
        DepthImage {
            width: cam.width,
            height: cam.height,
            depth: rows.concat(),
            pose: *pose,
        }
    }

    /// Render with additive Gaussian depth noise of the given sigma.
    /// Out-of-range noisy depths are dropped like any other invalid reading.
    pub fn render_noisy<R: Rng>(
        &self,
        pose: &ViewPose,
        cam: &CameraModel,
        sigma: f64,
        rng: &mut R,
    ) -> DepthImage {
        let mut img = self.render(pose, cam);
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("sigma >= 0");
            for d in img.depth.iter_mut() {
                if d.is_finite() {
                    let noisy = *d + normal.sample(rng);
                    *d = if (cam.depth_min..=cam.depth_max).contains(&noisy) {
                        noisy
                    } else {
                        f64::NAN
                    };
                }
            }
        }
        img
    }
}

fn build_bvh(
    mesh: &TriangleMesh,
    centroids: &[Vec3],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let mut bbox = Renderer::triangle_bbox(mesh, order[start] as usize);
    for &t in &order[start + 1..end] {
        bbox = bbox.union(&Renderer::triangle_bbox(mesh, t as usize));
    }
    let node_index = nodes.len();
    if end - start <= BVH_LEAF_SIZE {
        nodes.push(BvhNode {
            bbox,
            kind: BvhNodeKind::Leaf { start, end },
        });
        return node_index;
    }
    // Split at the median centroid along the widest axis.
    let size = bbox.size();
    let axis = if size.x >= size.y && size.x >= size.z {
        0
    } else if size.y >= size.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a as usize][axis]
            .partial_cmp(&centroids[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    nodes.push(BvhNode {
        bbox,
        kind: BvhNodeKind::Leaf { start: 0, end: 0 }, // patched below
    });
    let left = build_bvh(mesh, centroids, order, start, mid, nodes);
    let right = build_bvh(mesh, centroids, order, mid, end, nodes);
    nodes[node_index].kind = BvhNodeKind::Interior { left, right };
    node_index
}

/// Moller-Trumbore with inclusive edge comparisons so rays through shared
/// edges and vertices still register a hit.
fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv_det;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    (t > 1e-12).then_some(t)
}

/// One world point per finite-depth pixel, via inverse intrinsics then pose.
pub fn depth_to_world_cloud(img: &DepthImage, cam: &CameraModel) -> Vec<Vec3> {
    assert_eq!((img.width, img.height), (cam.width, cam.height));
    let mut cloud = Vec::with_capacity(img.finite_count());
    for v in 0..img.height {
        for u in 0..img.width {
            let z = img.at(u, v);
            if z.is_finite() {
                let p_c = Vec3::new(
                    (u as f64 - cam.cx) / cam.fx * z,
                    (v as f64 - cam.cy) / cam.fy * z,
                    z,
                );
                cloud.push(img.pose.camera_to_world(&p_c));
            }
        }
    }
    cloud
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::synth;
    use crate::mesh::TriangleMesh;
    use approx::assert_relative_eq;

    fn small_camera() -> CameraModel {
        CameraModel {
            fx: 120.0,
            fy: 120.0,
            cx: 64.0,
            cy: 48.0,
            width: 128,
            height: 96,
            d_c: 0.4,
            depth_min: 0.05,
            depth_max: 100.0,
        }
    }

    #[test]
    fn fronto_parallel_plane_renders_constant_depth() {
        let d = 2.5;
        let half = 100.0;
        let mesh = TriangleMesh::from_buffers(
            vec![
                Vec3::new(-half, -half, d),
                Vec3::new(half, -half, d),
                Vec3::new(half, half, d),
                Vec3::new(-half, half, d),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let cam = small_camera();
        let img = Renderer::new(&mesh).render(&ViewPose::identity(), &cam);
        assert_eq!(img.finite_count(), (cam.width * cam.height) as usize);
        for v in 0..cam.height {
            for u in 0..cam.width {
                assert_relative_eq!(img.at(u, v), d, epsilon = 1e-9);
            }
        }
        assert_relative_eq!(img.at(64, 48), d, epsilon = 1e-12);
    }

    #[test]
    fn mesh_behind_camera_renders_empty() {
        let mesh = synth::uv_sphere(Vec3::new(0.0, 0.0, -5.0), 1.0, 16, 12);
        let img = Renderer::new(&mesh).render(&ViewPose::identity(), &small_camera());
        assert_eq!(img.finite_count(), 0);
    }

    #[test]
    fn sphere_center_pixel_depth_matches_analytic() {
        // Unit sphere at distance 5 on-axis; analytic ray-sphere hit at t = 4.
        // The tessellation puts a pole vertex exactly on the optical axis, so
        // the center ray hits at exactly z = 4.
        let mesh = synth::uv_sphere(Vec3::new(0.0, 0.0, 5.0), 1.0, 64, 48);
        // Pole is along mesh +z which coincides with the view axis here.
        let cam = small_camera();
        let img = Renderer::new(&mesh).render(&ViewPose::identity(), &cam);
        assert_relative_eq!(img.at(64, 48), 4.0, epsilon = 1e-6);
    }

    #[test]
    fn depth_clamping_to_range() {
        let mesh = synth::uv_sphere(Vec3::new(0.0, 0.0, 5.0), 1.0, 32, 24);
        let mut cam = small_camera();
        cam.depth_max = 3.0; // sphere front face is at 4.0
        let img = Renderer::new(&mesh).render(&ViewPose::identity(), &cam);
        assert_eq!(img.finite_count(), 0);
    }

    #[test]
    fn principal_pixel_back_projects_on_axis() {
        let cam = small_camera();
        let mut depth = vec![f64::NAN; (cam.width * cam.height) as usize];
        depth[(48 * cam.width + 64) as usize] = 2.0;
        let img = DepthImage {
            width: cam.width,
            height: cam.height,
            depth,
            pose: ViewPose::identity(),
        };
        let cloud = depth_to_world_cloud(&img, &cam);
        assert_eq!(cloud.len(), 1);
        assert_relative_eq!(cloud[0], Vec3::new(0.0, 0.0, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn empty_image_gives_empty_cloud() {
        let cam = small_camera();
        let img = DepthImage {
            width: cam.width,
            height: cam.height,
            depth: vec![f64::NAN; (cam.width * cam.height) as usize],
            pose: ViewPose::identity(),
        };
        assert!(depth_to_world_cloud(&img, &cam).is_empty());
    }

    #[test]
    fn render_back_project_round_trip_stays_on_surface() {
        let mesh = synth::bunny();
        let cam = small_camera();
        let eye = Vec3::new(0.35, 0.2, 0.3);
        let pose = ViewPose::look_at(eye, Vec3::zeros());
        let renderer = Renderer::new(&mesh);
        let img = renderer.render(&pose, &cam);
        assert!(img.finite_count() > 500);
        let cloud = depth_to_world_cloud(&img, &cam);
        // Point-to-mesh distance oracle on a deterministic subsample.
        for p in cloud.iter().step_by(97) {
            assert!(mesh.distance_to_surface(p) < 1e-4, "point {p:?} off surface");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let mesh = synth::sphere_with_handle();
        let cam = small_camera();
        let pose = ViewPose::look_at(Vec3::new(0.3, 0.1, 0.25), Vec3::zeros());
        let renderer = Renderer::new(&mesh);
        let a = renderer.render(&pose, &cam);
        let b = renderer.render(&pose, &cam);
        assert!(a
            .depth
            .iter()
            .zip(&b.depth)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn bvh_raycast_matches_linear_scan() {
        let mesh = synth::sphere_with_handle();
        let renderer = Renderer::new(&mesh);
        let origin = Vec3::new(0.4, 0.3, 0.2);
        let mut checked = 0;
        for k in 0..200 {
            let phi = k as f64 * 0.37;
            let dir = (Vec3::new(phi.cos(), phi.sin(), -0.6 + 0.006 * k as f64) - Vec3::zeros())
                .normalize();
            let dir = (Vec3::zeros() - origin + dir * 0.05).normalize();
            let fast = renderer.raycast(&origin, &dir);
            let mut slow: Option<(f64, u32)> = None;
            for i in 0..mesh.triangles.len() {
                let [a, b, c] = mesh.triangle_vertices(i);
                if let Some(t) = ray_triangle(&origin, &dir, &a, &b, &c) {
                    let better = match slow {
                        None => true,
                        Some((bt, bi)) => t < bt || (t == bt && (i as u32) < bi),
                    };
                    if better {
                        slow = Some((t, i as u32));
                    }
                }
            }
            match (fast, slow) {
                (None, None) => {}
                (Some((tf, _)), Some((ts, _))) => {
                    assert_relative_eq!(tf, ts, epsilon = 1e-12);
                    checked += 1;
                }
                other => panic!("bvh/linear disagree: {other:?}"),
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn noisy_render_perturbs_depth() {
        let mesh = synth::uv_sphere(Vec3::new(0.0, 0.0, 5.0), 1.0, 32, 24);
        let cam = small_camera();
        let renderer = Renderer::new(&mesh);
        let clean = renderer.render(&ViewPose::identity(), &cam);
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        use rand::SeedableRng;
        let noisy = renderer.render_noisy(&ViewPose::identity(), &cam, 0.01, &mut rng);
        let mut diffs = 0;
        for (a, b) in clean.depth.iter().zip(&noisy.depth) {
            if a.is_finite() && b.is_finite() && a != b {
                diffs += 1;
            }
        }
        assert!(diffs > 100);
    }
}
