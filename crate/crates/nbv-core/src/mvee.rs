//! Minimum-volume enclosing ellipsoids of voxel clusters.
//!
//! The solver is the dual D-optimal-design ascent (Khachiyan) with away
//! steps, which converges linearly; a final rescale pins the farthest point
//! exactly onto the surface so containment never depends on the duality gap.
//! Degenerate clusters (coplanar, collinear, singleton) are solved in their
//! affine span and restored to full rank by the semi-axis floor.

use nalgebra::{SMatrix, SVector, Vector2};

use crate::geometry::{Ellipsoid, Mat3, Vec3};
use crate::gmm::Clustering;

/// Tolerances for the enclosing-ellipsoid solver.
#[derive(Debug, Clone, Copy)]
pub struct MveeParam {
    /// Relative volume slack; must lie in (0, 1e-3].
    pub epsilon: f64,
    /// Lower bound on every semi-axis of a returned ellipsoid, meters.
    pub min_semi_axis: f64,
}

impl MveeParam {
    pub fn new(epsilon: f64, min_semi_axis: f64) -> Self {
        assert!(epsilon > 0.0 && epsilon <= 1e-3, "epsilon must be in (0, 1e-3]");
        assert!(min_semi_axis > 0.0);
        Self { epsilon, min_semi_axis }
    }

    pub fn for_resolution(resolution: f64) -> Self {
        Self::new(1e-6, resolution / 2.0)
    }
}

/// Ellipsoid in principal-axis form before flooring/inflation; semi-axes may
/// be zero along degenerate directions.
struct RawEllipsoid {
    center: Vec3,
    /// Columns are orthonormal axis directions.
    axes: Mat3,
    semi: [f64; 3],
}

/// Dual ascent for the MVEE of full-affine-rank points in dimension D.
///
/// Returns the center and shape matrix H with all points satisfying
/// `(x - c)^T H (x - c) <= 1` exactly (rescaled), volume within the epsilon
/// certificate of optimal.
fn khachiyan_dual<const D: usize, const D1: usize>(
    points: &[SVector<f64, D>],
    epsilon: f64,
) -> (SVector<f64, D>, SMatrix<f64, D, D>) {
    let n = points.len();
    debug_assert!(n > D);
    let d1 = D1 as f64;
    let lifted: Vec<SVector<f64, D1>> = points
        .iter()
        .map(|p| {
            let mut q = SVector::<f64, D1>::zeros();
            for a in 0..D {
                q[a] = p[a];
            }
            q[D] = 1.0;
            q
        })
        .collect();

    let mut u = vec![1.0 / n as f64; n];
    let rebuild = |u: &[f64]| -> (SMatrix<f64, D1, D1>, Vec<f64>) {
        let mut x = SMatrix::<f64, D1, D1>::zeros();
        for (ui, q) in u.iter().zip(&lifted) {
            x += q * q.transpose() * *ui;
        }
        let x_inv = x.try_inverse().expect("design matrix invertible at full rank");
        let m: Vec<f64> = lifted.iter().map(|q| (x_inv * q).dot(q)).collect();
        (x_inv, m)
    };
    let (mut x_inv, mut m) = rebuild(&u);

    let max_iterations = 200_000;
    // The away-step ascent identifies the support set quickly, so driving
    // the gap to near machine precision costs little; epsilon stays the
    // caller-facing certificate.
    let tol = epsilon.min(1e-13) * d1;
    for iter in 0..max_iterations {
        let mut i_max = 0;
        let mut i_min = usize::MAX;
        for i in 0..n {
            if m[i] > m[i_max] {
                i_max = i;
            }
            if u[i] > 1e-300 && (i_min == usize::MAX || m[i] < m[i_min]) {
                i_min = i;
            }
        }
        let gap_up = m[i_max] - d1;
        let gap_down = d1 - m[i_min];
        if gap_up <= tol && gap_down <= tol {
            break;
        }
        // Pick the more violated side: add mass at i_max or retract from
        // i_min (away step), both with the exact line-search step.
        let (pivot, beta) = if gap_up >= gap_down {
            let b = gap_up / (d1 * (m[i_max] - 1.0));
            (i_max, b)
        } else {
            let b_opt = -gap_down / (d1 * (m[i_min] - 1.0)).max(1e-300);
            let b_cap = -u[i_min] / (1.0 - u[i_min]).max(1e-300);
            (i_min, b_opt.max(b_cap))
        };
        if !beta.is_finite() {
            break;
        }
        for w in u.iter_mut() {
            *w *= 1.0 - beta;
        }
        u[pivot] += beta;
        if u[pivot] < 0.0 {
            u[pivot] = 0.0;
        }
        // Sherman-Morrison update of X^{-1} and the Mahalanobis diagonal.
        let q = &lifted[pivot];
        let w = x_inv * q;
        let denom = (1.0 - beta) + beta * m[pivot];
        let scale = 1.0 / (1.0 - beta);
        x_inv = (x_inv - (w * w.transpose()) * (beta / denom)) * scale;
        for i in 0..n {
            let s = w.dot(&lifted[i]);
            m[i] = scale * (m[i] - beta * s * s / denom);
        }
        // Periodic refresh against drift from thousands of rank-1 updates.
        if iter % 512 == 511 {
            let total: f64 = u.iter().sum();
            for w in u.iter_mut() {
                *w /= total;
            }
            let (xi, mm) = rebuild(&u);
            x_inv = xi;
            m = mm;
        }
    }

    let mut center = SVector::<f64, D>::zeros();
    for (ui, p) in u.iter().zip(points) {
        center += p * *ui;
    }
    let mut sigma = SMatrix::<f64, D, D>::zeros();
    for (ui, p) in u.iter().zip(points) {
        let d = p - center;
        sigma += d * d.transpose() * *ui;
    }
    let h = sigma.try_inverse().expect("scatter invertible at full rank") / D as f64;
    // Rescale so the farthest point sits exactly on the surface.
    let mut worst = 0.0f64;
    for p in points {
        let d = p - center;
        worst = worst.max((h * d).dot(&d));
    }
    let h = if worst > 0.0 { h / worst } else { h };
    (center, h)
}

/// Principal-axis MVEE of arbitrary points, degenerate spans included.
fn raw_mvee(points: &[Vec3], epsilon: f64) -> RawEllipsoid {
    let n = points.len();
    assert!(n > 0, "point set must be non-empty");
    let mean = points.iter().sum::<Vec3>() / n as f64;
    let mut scatter = Mat3::zeros();
    for p in points {
        let d = p - mean;
        scatter += d * d.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(scatter / n as f64);
    // Axes sorted by decreasing spread.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let axes: Vec<Vec3> = order.iter().map(|&k| eig.eigenvectors.column(k).into()).collect();
    let lmax = eig.eigenvalues[order[0]].max(0.0);
    let rank = if lmax <= 0.0 {
        0
    } else {
        order
            .iter()
            .take_while(|&&k| eig.eigenvalues[k] > lmax * 1e-12)
            .count()
    };
    // The dual ascent needs strictly more points than the dimension.
    let rank = rank.min(n - 1);

    let mut axes_m = Mat3::from_columns(&[axes[0], axes[1], axes[2]]);
    // Re-orthogonalize the third axis to guard against sign/ordering quirks.
    let c2 = axes[0].cross(&axes[1]);
    if c2.norm() > 1e-12 {
        axes_m.set_column(2, &c2.normalize());
    }

    match rank {
        0 => RawEllipsoid {
            center: mean,
            axes: axes_m,
            semi: [0.0; 3],
        },
        1 => {
            let axis = axes[0];
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in points {
                let s = (p - mean).dot(&axis);
                lo = lo.min(s);
                hi = hi.max(s);
            }
            RawEllipsoid {
                center: mean + axis * (0.5 * (lo + hi)),
                axes: axes_m,
                semi: [0.5 * (hi - lo), 0.0, 0.0],
            }
        }
        2 => {
            let plane: Vec<Vector2<f64>> = points
                .iter()
                .map(|p| Vector2::new((p - mean).dot(&axes[0]), (p - mean).dot(&axes[1])))
                .collect();
            let (c2d, h2d) = khachiyan_dual::<2, 3>(&plane, epsilon);
            let sub = nalgebra::SymmetricEigen::new(h2d);
            let mut dirs = [Vec3::zeros(); 3];
            let mut semi = [0.0f64; 3];
            for k in 0..2 {
                let v = sub.eigenvectors.column(k);
                dirs[k] = axes[0] * v[0] + axes[1] * v[1];
                semi[k] = 1.0 / sub.eigenvalues[k].sqrt();
            }
            dirs[2] = dirs[0].cross(&dirs[1]).normalize();
            RawEllipsoid {
                center: mean + axes[0] * c2d[0] + axes[1] * c2d[1],
                axes: Mat3::from_columns(&[dirs[0], dirs[1], dirs[2]]),
                semi,
            }
        }
        _ => {
            let (center, h) = khachiyan_dual::<3, 4>(points, epsilon);
            let sub = nalgebra::SymmetricEigen::new(h);
            let mut dirs = [Vec3::zeros(); 3];
            let mut semi = [0.0f64; 3];
            for k in 0..3 {
                dirs[k] = sub.eigenvectors.column(k).into();
                semi[k] = 1.0 / sub.eigenvalues[k].sqrt();
            }
            RawEllipsoid {
                center,
                axes: Mat3::from_columns(&[dirs[0], dirs[1], dirs[2]]),
                semi,
            }
        }
    }
}

/// Minimum-volume enclosing ellipsoid with every semi-axis floored at
/// `param.min_semi_axis`. Degenerate point sets are handled by the floor.
pub fn min_enclosing_ellipsoid(points: &[Vec3], param: &MveeParam) -> Ellipsoid {
    let raw = raw_mvee(points, param.epsilon);
    let semi = [
        raw.semi[0].max(param.min_semi_axis),
        raw.semi[1].max(param.min_semi_axis),
        raw.semi[2].max(param.min_semi_axis),
    ];
    Ellipsoid::from_axes(raw.center, &raw.axes, &semi)
}

/// One ellipsoid per cluster, fitted on voxel centers and inflated by half
/// the voxel diagonal so the body covers voxel extents rather than centers.
pub fn fit_cluster_ellipsoids(
    clustering: &Clustering,
    voxel_centers: &[Vec3],
    resolution: f64,
    param: &MveeParam,
) -> Vec<Ellipsoid> {
    let inflation = 3f64.sqrt() * resolution / 2.0;
    clustering
        .clusters
        .iter()
        .filter(|members| !members.is_empty())
        .map(|members| {
            let pts: Vec<Vec3> = members.iter().map(|&i| voxel_centers[i]).collect();
            let raw = raw_mvee(&pts, param.epsilon);
            let semi = [
                (raw.semi[0] + inflation).max(param.min_semi_axis),
                (raw.semi[1] + inflation).max(param.min_semi_axis),
                (raw.semi[2] + inflation).max(param.min_semi_axis),
            ];
            Ellipsoid::from_axes(raw.center, &raw.axes, &semi)
        })
        .collect()
}
