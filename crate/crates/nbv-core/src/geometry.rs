//! Rigid transforms, homogeneous quadric/conic algebra, and projection of
//! ellipsoids to image-plane conics.
//!
//! Conventions: camera looks along +z in its own frame, x right, y down.
//! A [`ViewPose`] stores the camera-to-world rotation and the camera origin
//! in world coordinates. Quadrics are sign-normalized so interior points
//! evaluate negative.

use nalgebra::{Matrix3, Matrix4, SMatrix, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;
/// 3x4 camera projection matrix.
pub type ProjectionMatrix = SMatrix<f64, 3, 4>;

/// Orthonormality / determinant slack accepted for rotations.
pub const ROTATION_TOL: f64 = 1e-9;
/// Smallest singular-value ratio below which a quadric counts as singular.
pub const QUADRIC_COND_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("rotation is not orthonormal with determinant +1 (defect {defect:.3e})")]
    InvalidRotation { defect: f64 },
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("shape matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("quadric is singular within conditioning tolerance {QUADRIC_COND_TOL:e}")]
    SingularQuadric,
    #[error("conic is not a real ellipse")]
    DegenerateConic,
}

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Smallest box containing all points. Returns `None` on an empty slice.
    pub fn from_points(points: &[Vec3]) -> Option<Self> {
        let first = *points.first()?;
        let mut bb = Aabb::new(first, first);
        for p in &points[1..] {
            bb.min = bb.min.inf(p);
            bb.max = bb.max.sup(p);
        }
        Some(bb)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.size().norm()
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Slab test. Returns the `[t_in, t_out]` ray parameter interval, or
    /// `None` when the ray misses. `t_in` is clamped to 0 for interior origins.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i] != 0.0 {
                let inv = 1.0 / dir[i];
                let mut a = (self.min[i] - origin[i]) * inv;
                let mut b = (self.max[i] - origin[i]) * inv;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
            } else if origin[i] < self.min[i] || origin[i] > self.max[i] {
                return None;
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

/// Rigid camera pose: rotation (camera-to-world) and camera origin in world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewPose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl ViewPose {
    /// Build a pose, checking orthonormality and det +1 within `ROTATION_TOL`.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        let defect = (rotation * rotation.transpose() - Mat3::identity()).norm();
        let det_defect = (rotation.determinant() - 1.0).abs();
        if defect > ROTATION_TOL || det_defect > ROTATION_TOL {
            return Err(GeometryError::InvalidRotation {
                defect: defect.max(det_defect),
            });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Camera at `eye` with the optical axis aimed at `target`.
    ///
    /// The image x axis is kept horizontal (world z is "up"); when the view
    /// direction is within ~1e-9 of vertical the world x axis seeds the basis
    /// instead.
    pub fn look_at(eye: Vec3, target: Vec3) -> Self {
        let forward = (target - eye).normalize();
        let up_hint = if forward.z.abs() > 1.0 - 1e-9 {
            Vec3::x()
        } else {
            Vec3::z()
        };
        let right = forward.cross(&up_hint).normalize();
        let down = forward.cross(&right).normalize();
        let rotation = Mat3::from_columns(&[right, down, forward]);
        Self {
            rotation,
            translation: eye,
        }
    }

    /// Optical axis direction in world coordinates (camera +z).
    pub fn optical_axis(&self) -> Vec3 {
        self.rotation.column(2).into()
    }

    /// Map a camera-frame point to world coordinates.
    pub fn camera_to_world(&self, p_c: &Vec3) -> Vec3 {
        self.rotation * p_c + self.translation
    }

    /// Compose a rigid world transform `(g_rot, g_t)` with this pose.
    pub fn transformed(&self, g_rot: &Mat3, g_t: &Vec3) -> Self {
        Self {
            rotation: g_rot * self.rotation,
            translation: g_rot * self.translation + g_t,
        }
    }
}

/// Pinhole camera intrinsics plus working-distance and depth-range metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Optimal standoff distance of the sensor, meters.
    pub d_c: f64,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidCamera(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad("cx out of image bounds");
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("cy out of image bounds");
        }
        if !(self.depth_min > 0.0 && self.depth_min < self.depth_max) {
            return bad("require 0 < depth_min < depth_max");
        }
        if self.d_c <= 0.0 {
            return bad("working distance must be positive");
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Perspective projection of a camera-frame point; `None` when z <= 0.
    pub fn project(&self, p_c: &Vec3) -> Option<Vector2<f64>> {
        (p_c.z > 0.0).then(|| {
            Vector2::new(
                self.fx * p_c.x / p_c.z + self.cx,
                self.fy * p_c.y / p_c.z + self.cy,
            )
        })
    }

    /// Unit ray direction in the camera frame through pixel center (u, v).
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0).normalize()
    }
}

/// Solid ellipsoid `{x : (x-c)^T A (x-c) <= 1}` with A symmetric positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec3,
    pub shape: Mat3,
}

impl Ellipsoid {
    pub fn new(center: Vec3, shape: Mat3) -> Result<Self, GeometryError> {
        let sym = (shape + shape.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        if eig.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(GeometryError::NotPositiveDefinite);
        }
        Ok(Self { center, shape: sym })
    }

    /// Sphere of the given radius.
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Self {
            center,
            shape: Mat3::identity() / (radius * radius),
        }
    }

    /// Build from principal axes: `rotation` columns are axis directions.
    pub fn from_axes(center: Vec3, rotation: &Mat3, semi_axes: &[f64; 3]) -> Self {
        let d = Mat3::from_diagonal(&Vec3::new(
            1.0 / (semi_axes[0] * semi_axes[0]),
            1.0 / (semi_axes[1] * semi_axes[1]),
            1.0 / (semi_axes[2] * semi_axes[2]),
        ));
        Self {
            center,
            shape: rotation * d * rotation.transpose(),
        }
    }

    /// Semi-axis lengths in ascending order.
    pub fn semi_axes(&self) -> [f64; 3] {
        let mut eig: Vec<f64> = self
            .shape
            .symmetric_eigenvalues()
            .iter()
            .map(|l| 1.0 / l.sqrt())
            .collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        [eig[0], eig[1], eig[2]]
    }

    pub fn volume(&self) -> f64 {
        let [a, b, c] = self.semi_axes();
        4.0 / 3.0 * std::f64::consts::PI * a * b * c
    }

    /// Mahalanobis-squared value; <= 1 inside, == 1 on the surface.
    pub fn level(&self, p: &Vec3) -> f64 {
        let d = p - self.center;
        (self.shape * d).dot(&d)
    }

    /// Apply a rigid transform: center moves, shape conjugates.
    pub fn transformed(&self, g_rot: &Mat3, g_t: &Vec3) -> Self {
        Self {
            center: g_rot * self.center + g_t,
            shape: g_rot * self.shape * g_rot.transpose(),
        }
    }
}

/// Homogeneous quadric `X^T Q X = 0` in world coordinates, stored symmetric
/// and sign-normalized so interior points evaluate negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadric {
    q: Mat4,
}

impl Quadric {
    /// Symmetrize and store. The sign convention (interior negative) is the
    /// caller's responsibility when constructing from raw matrices.
    pub fn from_matrix(m: Mat4) -> Self {
        Self {
            q: (m + m.transpose()) * 0.5,
        }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.q
    }

    /// Evaluate `X^T Q X` at a world point.
    pub fn evaluate(&self, p: &Vec3) -> f64 {
        let x = Vector4::new(p.x, p.y, p.z, 1.0);
        (self.q * x).dot(&x)
    }

    /// Dual (adjoint) matrix `Q* = Q^{-1}`, rejecting ill-conditioned inputs.
    pub fn dual(&self) -> Result<Mat4, GeometryError> {
        let svd = self.q.svd(false, false);
        let max_sv = svd.singular_values.max();
        let min_sv = svd.singular_values.min();
        if !(min_sv > max_sv * QUADRIC_COND_TOL) {
            return Err(GeometryError::SingularQuadric);
        }
        self.q
            .try_inverse()
            .ok_or(GeometryError::SingularQuadric)
    }
}

/// Classification of a projected conic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicKind {
    Ellipse,
    Degenerate,
}

/// Homogeneous conic `x^T Phi x = 0` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conic {
    pub phi: Mat3,
    pub kind: ConicKind,
}

impl Conic {
    /// Classify a symmetric 3x3 conic matrix and sign-normalize real
    /// ellipses so interior points evaluate negative.
    pub fn classify(m: Mat3) -> Self {
        let phi = (m + m.transpose()) * 0.5;
        let a = phi[(0, 0)];
        let b = phi[(0, 1)];
        let c = phi[(1, 1)];
        let det2 = a * c - b * b;
        if !(det2 > 0.0) || !phi.iter().all(|v| v.is_finite()) {
            return Self {
                phi,
                kind: ConicKind::Degenerate,
            };
        }
        // Center of the ellipse, then the value there: a real ellipse dips
        // across zero at its center, an imaginary one never does.
        let uc = (b * phi[(1, 2)] - c * phi[(0, 2)]) / det2;
        let vc = (b * phi[(0, 2)] - a * phi[(1, 2)]) / det2;
        let center_val = Self::eval_raw(&phi, uc, vc);
        if !(a * center_val < 0.0) {
            return Self {
                phi,
                kind: ConicKind::Degenerate,
            };
        }
        let phi = if a < 0.0 { -phi } else { phi };
        Self {
            phi,
            kind: ConicKind::Ellipse,
        }
    }

    fn eval_raw(phi: &Mat3, u: f64, v: f64) -> f64 {
        phi[(0, 0)] * u * u
            + 2.0 * phi[(0, 1)] * u * v
            + phi[(1, 1)] * v * v
            + 2.0 * phi[(0, 2)] * u
            + 2.0 * phi[(1, 2)] * v
            + phi[(2, 2)]
    }

    /// Evaluate `(u, v, 1)^T Phi (u, v, 1)`; negative inside an ellipse.
    pub fn evaluate(&self, u: f64, v: f64) -> f64 {
        Self::eval_raw(&self.phi, u, v)
    }

    /// Ellipse center in pixel coordinates.
    pub fn center(&self) -> Option<Vector2<f64>> {
        if self.kind != ConicKind::Ellipse {
            return None;
        }
        let a = self.phi[(0, 0)];
        let b = self.phi[(0, 1)];
        let c = self.phi[(1, 1)];
        let det2 = a * c - b * b;
        Some(Vector2::new(
            (b * self.phi[(1, 2)] - c * self.phi[(0, 2)]) / det2,
            (b * self.phi[(0, 2)] - a * self.phi[(1, 2)]) / det2,
        ))
    }

    /// Axis-aligned half-extents of the ellipse around its center.
    pub fn half_extents(&self) -> Option<Vector2<f64>> {
        let center = self.center()?;
        let a = self.phi[(0, 0)];
        let b = self.phi[(0, 1)];
        let c = self.phi[(1, 1)];
        let det2 = a * c - b * b;
        let g = -self.evaluate(center.x, center.y);
        if !(g > 0.0) {
            return None;
        }
        Some(Vector2::new((g * c / det2).sqrt(), (g * a / det2).sqrt()))
    }
}

/// Eq. `C = R^{-1}(C_w - t)`: world point into the camera frame.
pub fn world_to_camera(pose: &ViewPose, p_w: &Vec3) -> Vec3 {
    pose.rotation.transpose() * (p_w - pose.translation)
}

/// 3x4 projection `P = K [R^{-1} | -R^{-1} t]`.
///
/// The translation column carries a minus sign so that `P (p_w; 1)`
/// dehomogenizes to the pinhole projection of [`world_to_camera`].
pub fn camera_matrix(pose: &ViewPose, cam: &CameraModel) -> ProjectionMatrix {
    let r_inv = pose.rotation.transpose();
    let t_col = -(r_inv * pose.translation);
    let mut rt = SMatrix::<f64, 3, 4>::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r_inv);
    rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&t_col);
    cam.intrinsics() * rt
}

/// Homogeneous quadric of an ellipsoid, interior negative:
/// `X^T Q X = (x-c)^T A (x-c) - 1`.
pub fn ellipsoid_to_quadric(e: &Ellipsoid) -> Quadric {
    let a = e.shape;
    let ac = a * e.center;
    let mut q = Mat4::zeros();
    q.fixed_view_mut::<3, 3>(0, 0).copy_from(&a);
    q.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-ac));
    q.fixed_view_mut::<1, 3>(3, 0).copy_from(&(-ac).transpose());
    q[(3, 3)] = e.center.dot(&ac) - 1.0;
    Quadric::from_matrix(q)
}

/// Project a quadric through `P` via the dual form `Phi* = P Q* P^T`,
/// returning the point conic `Phi = (Phi*)^{-1}` with its classification.
pub fn project_quadric(q: &Quadric, p: &ProjectionMatrix) -> Result<Conic, GeometryError> {
    let dual = q.dual()?;
    let phi_star = project_dual_quadric(&dual, p);
    Ok(match phi_star.try_inverse() {
        Some(phi) => Conic::classify(phi),
        None => Conic {
            phi: phi_star,
            kind: ConicKind::Degenerate,
        },
    })
}

/// Dual-conic projection `Phi* = P Q* P^T` without inversion or classification.
pub fn project_dual_quadric(dual: &Mat4, p: &ProjectionMatrix) -> Mat3 {
    let m = p * dual * p.transpose();
    (m + m.transpose()) * 0.5
}

/// Count integer pixel centers strictly inside the ellipse, clipped to the
/// image rectangle. Work is proportional to the clipped bounding box.
pub fn conic_pixel_area(c: &Conic, cam: &CameraModel) -> Result<u64, GeometryError> {
    if c.kind != ConicKind::Ellipse {
        return Err(GeometryError::DegenerateConic);
    }
    let center = c.center().ok_or(GeometryError::DegenerateConic)?;
    let ext = c.half_extents().ok_or(GeometryError::DegenerateConic)?;
    let u_lo = (center.x - ext.x).floor().max(0.0) as i64;
    let u_hi = (center.x + ext.x).ceil().min(cam.width as f64 - 1.0) as i64;
    let v_lo = (center.y - ext.y).floor().max(0.0) as i64;
    let v_hi = (center.y + ext.y).ceil().min(cam.height as f64 - 1.0) as i64;
    let mut count = 0u64;
    for v in v_lo..=v_hi {
        for u in u_lo..=u_hi {
            if c.evaluate(u as f64, v as f64) < 0.0 {
                count += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_pose(rng: &mut StdRng) -> ViewPose {
        let axis = Vec3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()).normalize();
        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        ViewPose {
            rotation: *rot.matrix(),
            translation: Vec3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ),
        }
    }

    fn random_ellipsoid(rng: &mut StdRng) -> Ellipsoid {
        let pose = random_pose(rng);
        let axes = [
            rng.gen_range(0.2..1.5),
            rng.gen_range(0.2..1.5),
            rng.gen_range(0.2..1.5),
        ];
        Ellipsoid::from_axes(pose.translation, &pose.rotation, &axes)
    }

    fn test_camera() -> CameraModel {
        CameraModel {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            d_c: 0.4,
            depth_min: 0.05,
            depth_max: 10.0,
        }
    }

    #[test]
    fn world_to_camera_identity_pose() {
        let pose = ViewPose::identity();
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(world_to_camera(&pose, &p), p);
    }

    #[test]
    fn world_to_camera_pure_translation() {
        let pose = ViewPose {
            rotation: Mat3::identity(),
            translation: Vec3::new(1.0, 0.0, 0.0),
        };
        let p = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(world_to_camera(&pose, &p), Vec3::zeros());
    }

    #[test]
    fn world_to_camera_matches_homogeneous_inverse_oracle() {
        // Independent route: invert the full 4x4 camera-to-world matrix.
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let pose = random_pose(&mut rng);
            let p = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let mut m = Mat4::identity();
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation);
            m.fixed_view_mut::<3, 1>(0, 3).copy_from(&pose.translation);
            let inv = m.try_inverse().unwrap();
            let hp = inv * Vector4::new(p.x, p.y, p.z, 1.0);
            let expected = Vec3::new(hp.x / hp.w, hp.y / hp.w, hp.z / hp.w);
            assert_relative_eq!(world_to_camera(&pose, &p), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn world_to_camera_rotation_90deg_about_z() {
        let rot = *nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_2)
            .matrix();
        let pose = ViewPose::new(rot, Vec3::zeros()).unwrap();
        let got = world_to_camera(&pose, &Vec3::new(1.0, 0.0, 0.0));
        // Oracle via 4x4 inverse.
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
        let hp = m.try_inverse().unwrap() * Vector4::new(1.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(got, Vec3::new(hp.x, hp.y, hp.z), epsilon = 1e-12);
    }

    #[test]
    fn round_trip_world_camera_world() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let pose = random_pose(&mut rng);
            let p = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let back = pose.camera_to_world(&world_to_camera(&pose, &p));
            assert_relative_eq!(back, p, epsilon = 1e-12);
        }
    }

    #[test]
    fn camera_matrix_principal_point_on_axis() {
        let cam = test_camera();
        let pose = ViewPose::identity();
        let p = camera_matrix(&pose, &cam);
        let h = p * Vector4::new(0.0, 0.0, 5.0, 1.0);
        assert_relative_eq!(h.x / h.z, 320.0, epsilon = 1e-12);
        assert_relative_eq!(h.y / h.z, 240.0, epsilon = 1e-12);
    }

    #[test]
    fn camera_matrix_consistent_with_two_step_transform() {
        let cam = test_camera();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let pose = random_pose(&mut rng);
            let p_mat = camera_matrix(&pose, &cam);
            let p_w = Vec3::new(rng.gen(), rng.gen(), rng.gen::<f64>() + 4.0);
            let h = p_mat * Vector4::new(p_w.x, p_w.y, p_w.z, 1.0);
            let p_c = world_to_camera(&pose, &p_w);
            if let Some(px) = cam.project(&p_c) {
                assert_relative_eq!(h.x / h.z, px.x, epsilon = 1e-9, max_relative = 1e-9);
                assert_relative_eq!(h.y / h.z, px.y, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn camera_matrix_translated_pose_two_step_oracle() {
        let cam = test_camera();
        let pose = ViewPose {
            rotation: Mat3::identity(),
            translation: Vec3::new(0.0, 0.0, -5.0),
        };
        let p_w = Vec3::new(1.0, 0.0, 0.0);
        // Two-step oracle: camera frame point is (1, 0, 5).
        let p_c = world_to_camera(&pose, &p_w);
        assert_relative_eq!(p_c, Vec3::new(1.0, 0.0, 5.0), epsilon = 1e-12);
        let h = camera_matrix(&pose, &cam) * Vector4::new(p_w.x, p_w.y, p_w.z, 1.0);
        assert_relative_eq!(h.x / h.z, 600.0 / 5.0 + 320.0, epsilon = 1e-9);
        assert_relative_eq!(h.y / h.z, 240.0, epsilon = 1e-9);
    }

    #[test]
    fn unit_sphere_quadric_is_canonical() {
        let q = ellipsoid_to_quadric(&Ellipsoid::sphere(Vec3::zeros(), 1.0));
        let m = q.matrix();
        let scale = m[(0, 0)];
        assert!(scale > 0.0);
        let expected = Mat4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0)) * scale;
        assert_relative_eq!(*m, expected, epsilon = 1e-12);
    }

    #[test]
    fn quadric_surface_point_and_sign_convention() {
        let q = ellipsoid_to_quadric(&Ellipsoid::sphere(Vec3::new(0.0, 0.0, 5.0), 1.0));
        assert_relative_eq!(q.evaluate(&Vec3::new(1.0, 0.0, 5.0)), 0.0, epsilon = 1e-9);
        assert!(q.evaluate(&Vec3::new(0.0, 0.0, 5.0)) < 0.0);
        assert!(q.evaluate(&Vec3::new(3.0, 0.0, 5.0)) > 0.0);
    }

    #[test]
    fn quadric_vanishes_on_sampled_surface_points() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..5 {
            let e = random_ellipsoid(&mut rng);
            let q = ellipsoid_to_quadric(&e);
            let norm = q.matrix().norm();
            // Sample surface points by pushing unit directions through the
            // inverse-sqrt of the shape matrix.
            let eig = nalgebra::SymmetricEigen::new(e.shape);
            for _ in 0..100 {
                let d = Vec3::new(
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                )
                .normalize();
                let mut scaled = Vec3::zeros();
                for k in 0..3 {
                    let v: Vec3 = eig.eigenvectors.column(k).into();
                    scaled += v * (v.dot(&d) / eig.eigenvalues[k].sqrt());
                }
                let surface = e.center + scaled;
                assert_relative_eq!(e.level(&surface), 1.0, epsilon = 1e-9);
                assert!(q.evaluate(&surface).abs() < 1e-9 * norm);
            }
        }
    }

    #[test]
    fn on_axis_sphere_projects_to_circle_at_principal_point() {
        let cam = test_camera();
        let pose = ViewPose::identity();
        let e = Ellipsoid::sphere(Vec3::new(0.0, 0.0, 5.0), 1.0);
        let conic = project_quadric(&ellipsoid_to_quadric(&e), &camera_matrix(&pose, &cam)).unwrap();
        assert_eq!(conic.kind, ConicKind::Ellipse);
        let c = conic.center().unwrap();
        assert_relative_eq!(c.x, 320.0, epsilon = 1e-6);
        assert_relative_eq!(c.y, 240.0, epsilon = 1e-6);
        // Silhouette-cone oracle: image radius = f * tan(asin(r / d)).
        let expected_r = 600.0 * (1.0f64 / 5.0).asin().tan();
        let ext = conic.half_extents().unwrap();
        assert_relative_eq!(ext.x, expected_r, epsilon = 1e-6);
        assert_relative_eq!(ext.y, expected_r, epsilon = 1e-6);
    }

    #[test]
    fn dual_conic_tangency_identity_over_random_lines() {
        let cam = test_camera();
        let mut rng = StdRng::seed_from_u64(17);
        let e = random_ellipsoid(&mut rng);
        let q = ellipsoid_to_quadric(&e);
        let dual = q.dual().unwrap();
        let p = camera_matrix(&random_pose(&mut rng), &cam);
        let phi_star = project_dual_quadric(&dual, &p);
        for _ in 0..100 {
            let l = Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            let lhs = (phi_star * l).dot(&l);
            let ptl = p.transpose() * l;
            let rhs = (dual * ptl).dot(&ptl);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn projection_rigid_invariance() {
        let cam = test_camera();
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..10 {
            let e = random_ellipsoid(&mut rng);
            let pose = ViewPose::look_at(e.center + Vec3::new(0.3, -4.0, 1.2), e.center);
            let g = random_pose(&mut rng);
            let conic_a =
                project_quadric(&ellipsoid_to_quadric(&e), &camera_matrix(&pose, &cam)).unwrap();
            let e2 = e.transformed(&g.rotation, &g.translation);
            let pose2 = pose.transformed(&g.rotation, &g.translation);
            let conic_b =
                project_quadric(&ellipsoid_to_quadric(&e2), &camera_matrix(&pose2, &cam)).unwrap();
            assert_eq!(conic_a.kind, conic_b.kind);
            if conic_a.kind == ConicKind::Ellipse {
                let ca = conic_a.center().unwrap();
                let cb = conic_b.center().unwrap();
                assert_relative_eq!(ca, cb, epsilon = 1e-7);
                let ea = conic_a.half_extents().unwrap();
                let eb = conic_b.half_extents().unwrap();
                assert_relative_eq!(ea, eb, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn singular_quadric_rejected() {
        let q = Quadric::from_matrix(Mat4::from_diagonal(&Vector4::new(1.0, 1.0, 0.0, -1.0)));
        assert!(matches!(q.dual(), Err(GeometryError::SingularQuadric)));
    }

    #[test]
    fn camera_inside_ellipsoid_projects_degenerate() {
        let cam = test_camera();
        let e = Ellipsoid::sphere(Vec3::zeros(), 1.0);
        // Camera at the sphere center.
        let conic =
            project_quadric(&ellipsoid_to_quadric(&e), &camera_matrix(&ViewPose::identity(), &cam))
                .unwrap();
        assert_eq!(conic.kind, ConicKind::Degenerate);
    }

    #[test]
    fn pixel_area_outside_image_is_zero() {
        let cam = test_camera();
        let pose = ViewPose::identity();
        // Small sphere far off-axis: projects outside the image rectangle.
        let e = Ellipsoid::sphere(Vec3::new(50.0, 0.0, 5.0), 0.2);
        let conic = project_quadric(&ellipsoid_to_quadric(&e), &camera_matrix(&pose, &cam)).unwrap();
        assert_eq!(conic.kind, ConicKind::Ellipse);
        assert_eq!(conic_pixel_area(&conic, &cam).unwrap(), 0);
    }

    #[test]
    fn pixel_area_matches_full_image_scan_and_analytic_circle() {
        let cam = test_camera();
        let pose = ViewPose::identity();
        // Choose depth so the image radius is ~50 px: r_img = f*tan(asin(r/d)).
        let radius = 0.5f64;
        let depth = radius / (50.0f64 / 600.0).atan().sin();
        let e = Ellipsoid::sphere(Vec3::new(0.0, 0.0, depth), radius);
        let conic = project_quadric(&ellipsoid_to_quadric(&e), &camera_matrix(&pose, &cam)).unwrap();
        let fast = conic_pixel_area(&conic, &cam).unwrap();
        // Full-image brute-force oracle with an independent evaluation route.
        let mut brute = 0u64;
        for v in 0..cam.height as i64 {
            for u in 0..cam.width as i64 {
                let x = Vector3::new(u as f64, v as f64, 1.0);
                if (conic.phi * x).dot(&x) < 0.0 {
                    brute += 1;
                }
            }
        }
        assert_eq!(fast, brute);
        let analytic = std::f64::consts::PI * 50.0 * 50.0;
        assert!((fast as f64 - analytic).abs() / analytic < 0.02);
    }

    #[test]
    fn degenerate_conic_area_is_error() {
        let cam = test_camera();
        let c = Conic {
            phi: Mat3::identity(),
            kind: ConicKind::Degenerate,
        };
        assert!(matches!(
            conic_pixel_area(&c, &cam),
            Err(GeometryError::DegenerateConic)
        ));
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let eye = Vec3::new(1.0, 2.0, 3.0);
        let target = Vec3::new(-0.5, 0.3, 0.1);
        let pose = ViewPose::look_at(eye, target);
        assert!(ViewPose::new(pose.rotation, pose.translation).is_ok());
        let axis = pose.optical_axis();
        assert_relative_eq!(axis, (target - eye).normalize(), epsilon = 1e-12);
    }
}
