//! Candidate-viewpoint generation on a hemisphere whose radius tracks the
//! object bounding box, plus the longitudinal partition bookkeeping that
//! keeps the scan sweeping instead of backtracking.

use std::collections::BTreeSet;

use crate::geometry::{Aabb, Vec3, ViewPose};

/// Hemisphere sampling configuration.
#[derive(Debug, Clone, Copy)]
pub struct SamplingParam {
    /// Number of parallels (constant-elevation circles).
    pub alpha: usize,
    /// Total candidate count distributed over the parallels.
    pub n: usize,
    /// Camera working distance, meters.
    pub d_c: f64,
    /// Elevation limits (radians above the horizon), low then high.
    pub elevation_range: (f64, f64),
    /// Longitude partition count.
    pub beta: usize,
}

impl SamplingParam {
    pub fn validate(&self) {
        assert!(self.alpha >= 1);
        assert!(self.n >= self.alpha);
        assert!(self.beta >= 2);
        let (lo, hi) = self.elevation_range;
        assert!(0.0 <= lo && lo < hi && hi <= std::f64::consts::FRAC_PI_2);
    }
}

/// Which longitude partitions have been scanned.
#[derive(Debug, Clone)]
pub struct PartitionState {
    scanned: BTreeSet<usize>,
    beta: usize,
}

impl PartitionState {
    pub fn new(beta: usize) -> Self {
        assert!(beta >= 2);
        Self {
            scanned: BTreeSet::new(),
            beta,
        }
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn mark_scanned(&mut self, partition: usize) {
        assert!(partition < self.beta);
        self.scanned.insert(partition);
    }

    pub fn scanned(&self) -> &BTreeSet<usize> {
        &self.scanned
    }

    pub fn all_scanned(&self) -> bool {
        self.scanned.len() == self.beta
    }
}

/// Sampling radius for a bounding box: working distance plus half the
/// diagonal.
pub fn hemisphere_radius(bbox: &Aabb, d_c: f64) -> f64 {
    d_c + 0.5 * bbox.diagonal()
}

/// Largest-remainder allocation of `total` into parts proportional to
/// `weights`; the rounded parts sum to `total` exactly.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..total - assigned {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

/// Candidate poses on the hemisphere above `bbox`: `alpha` equidistant
/// parallels, per-parallel counts proportional to circumference, uniform
/// azimuths, every optical axis aimed at the box center.
pub fn sample_candidates(bbox: &Aabb, param: &SamplingParam) -> Vec<ViewPose> {
    param.validate();
    let center = bbox.center();
    let radius = hemisphere_radius(bbox, param.d_c);
    let (lo, hi) = param.elevation_range;
    let elevations: Vec<f64> = if param.alpha == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..param.alpha)
            .map(|i| lo + (hi - lo) * i as f64 / (param.alpha - 1) as f64)
            .collect()
    };
    let weights: Vec<f64> = elevations.iter().map(|e| e.cos()).collect();
    let counts = largest_remainder(&weights, param.n);
    let mut poses = Vec::with_capacity(param.n);
    for (elevation, count) in elevations.iter().zip(&counts) {
        for j in 0..*count {
            let azimuth = std::f64::consts::TAU * j as f64 / *count as f64;
            let position = center
                + Vec3::new(
                    radius * elevation.cos() * azimuth.cos(),
                    radius * elevation.cos() * azimuth.sin(),
                    radius * elevation.sin(),
                );
            poses.push(ViewPose::look_at(position, center));
        }
    }
    poses
}

/// Longitude partition of a pose: `floor(azimuth / (2 pi / beta))` with the
/// azimuth measured about the vertical axis through `center`. Poses directly
/// above the center have no azimuth; they fall back to partition 0 with a
/// warning.
pub fn partition_of(pose: &ViewPose, center: &Vec3, beta: usize) -> usize {
    let dx = pose.translation.x - center.x;
    let dy = pose.translation.y - center.y;
    if dx.hypot(dy) < 1e-9 {
        log::warn!("pose directly above partition center; azimuth undefined, using partition 0");
        return 0;
    }
    let mut azimuth = dy.atan2(dx);
    if azimuth < 0.0 {
        azimuth += std::f64::consts::TAU;
    }
    let idx = (azimuth / (std::f64::consts::TAU / beta as f64)).floor() as usize;
    idx.min(beta - 1)
}

/// Indices of candidates the partition strategy allows this iteration.
///
/// While unscanned partitions remain, selection is restricted to unscanned
/// partitions longitudinally adjacent to a scanned one; if those hold no
/// candidates the filter widens to every unscanned partition, and as a last
/// resort to all candidates. Once every partition is scanned, everything is
/// admissible.
pub fn admissible_candidates(
    candidates: &[ViewPose],
    state: &PartitionState,
    center: &Vec3,
) -> Vec<usize> {
    let all: Vec<usize> = (0..candidates.len()).collect();
    if state.all_scanned() || state.scanned.is_empty() {
        return all;
    }
    let beta = state.beta;
    let parts: Vec<usize> = candidates
        .iter()
        .map(|c| partition_of(c, center, beta))
        .collect();
    let adjacent_unscanned: BTreeSet<usize> = (0..beta)
        .filter(|p| {
            !state.scanned.contains(p)
                && (state.scanned.contains(&((p + 1) % beta))
                    || state.scanned.contains(&((p + beta - 1) % beta)))
        })
        .collect();
    let preferred: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&i| adjacent_unscanned.contains(&parts[i]))
        .collect();
    if !preferred.is_empty() {
        return preferred;
    }
    let any_unscanned: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&i| !state.scanned.contains(&parts[i]))
        .collect();
    if !any_unscanned.is_empty() {
        return any_unscanned;
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn unit_box() -> Aabb {
        Aabb::new(Vec3::new(-0.1, -0.1, -0.1), Vec3::new(0.1, 0.1, 0.1))
    }

    fn param(alpha: usize, n: usize) -> SamplingParam {
        SamplingParam {
            alpha,
            n,
            d_c: 0.4,
            elevation_range: (10f64.to_radians(), 80f64.to_radians()),
            beta: 4,
        }
    }

    #[test]
    fn single_parallel_spreads_azimuths_evenly() {
        let poses = sample_candidates(&unit_box(), &param(1, 8));
        assert_eq!(poses.len(), 8);
        let center = unit_box().center();
        for (j, pose) in poses.iter().enumerate() {
            let dx = pose.translation.x - center.x;
            let dy = pose.translation.y - center.y;
            let mut az = dy.atan2(dx);
            if az < 0.0 {
                az += std::f64::consts::TAU;
            }
            assert_relative_eq!(az, j as f64 * 45f64.to_radians(), epsilon = 1e-9);
        }
    }

    #[test]
    fn poses_look_at_center_from_radius() {
        let bbox = Aabb::new(Vec3::new(0.2, -0.4, 0.1), Vec3::new(0.5, 0.0, 0.45));
        let p = param(4, 100);
        let poses = sample_candidates(&bbox, &p);
        assert_eq!(poses.len(), 100);
        let radius = hemisphere_radius(&bbox, p.d_c);
        let center = bbox.center();
        for pose in &poses {
            assert_relative_eq!((pose.translation - center).norm(), radius, epsilon = 1e-9);
            let axis = pose.optical_axis();
            assert_relative_eq!(axis, (center - pose.translation).normalize(), epsilon = 1e-9);
        }
    }

    #[test]
    fn counts_follow_cosine_largest_remainder() {
        let p = SamplingParam {
            alpha: 3,
            n: 100,
            d_c: 0.4,
            elevation_range: (20f64.to_radians(), 70f64.to_radians()),
            beta: 4,
        };
        let poses = sample_candidates(&unit_box(), &p);
        assert_eq!(poses.len(), 100);
        // Count poses per elevation band.
        let mut by_elev = std::collections::BTreeMap::new();
        for pose in &poses {
            let z = pose.translation.z - unit_box().center().z;
            let r = (pose.translation - unit_box().center()).norm();
            let elev_deg = ((z / r).asin().to_degrees() * 10.0).round() as i64;
            *by_elev.entry(elev_deg).or_insert(0usize) += 1;
        }
        let counts: Vec<usize> = by_elev.values().copied().collect();
        // Independent largest-remainder oracle over cos 20, cos 45, cos 70.
        let weights = [20f64, 45.0, 70.0].map(|d| d.to_radians().cos());
        let sum: f64 = weights.iter().sum();
        let quotas: Vec<f64> = weights.iter().map(|w| w / sum * 100.0).collect();
        let mut expected: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut rem: Vec<(usize, f64)> = quotas
            .iter()
            .enumerate()
            .map(|(i, q)| (i, q - q.floor()))
            .collect();
        rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let missing = 100 - expected.iter().sum::<usize>();
        for k in 0..missing {
            expected[rem[k].0] += 1;
        }
        // by_elev iterates ascending elevation = 20, 45, 70.
        assert_eq!(counts, expected);
        let ratio = counts[0] as f64 / counts[2] as f64;
        assert!((ratio - weights[0] / weights[2]).abs() < 0.15);
    }

    #[test]
    fn partition_boundaries_belong_to_upper_interval() {
        let center = Vec3::zeros();
        let pose_at = |az_deg: f64| {
            let az = az_deg.to_radians();
            ViewPose::look_at(Vec3::new(az.cos(), az.sin(), 0.5), center)
        };
        assert_eq!(partition_of(&pose_at(10.0), &center, 4), 0);
        assert_eq!(partition_of(&pose_at(90.0), &center, 4), 1);
        assert_eq!(partition_of(&pose_at(89.9), &center, 4), 0);
        assert_eq!(partition_of(&pose_at(359.0), &center, 4), 3);
    }

    #[test]
    fn pole_pose_resolves_to_partition_zero() {
        let center = Vec3::new(0.2, 0.3, 0.0);
        let pose = ViewPose::look_at(Vec3::new(0.2, 0.3, 1.0), center);
        assert_eq!(partition_of(&pose, &center, 4), 0);
    }

    #[test]
    fn partition_matches_independent_angle_formula() {
        let mut rng = StdRng::seed_from_u64(12);
        let center = Vec3::new(-0.1, 0.25, 0.0);
        for _ in 0..1000 {
            let az = rng.gen::<f64>() * std::f64::consts::TAU;
            let elev = rng.gen::<f64>() * 1.4;
            let r = 0.3 + rng.gen::<f64>();
            let pos = center
                + Vec3::new(
                    r * elev.cos() * az.cos(),
                    r * elev.cos() * az.sin(),
                    r * elev.sin(),
                );
            let pose = ViewPose::look_at(pos, center);
            let beta = rng.gen_range(2..9);
            // Independent route: quadrant-corrected acos instead of atan2.
            let dx = pos.x - center.x;
            let dy = pos.y - center.y;
            let h = (dx * dx + dy * dy).sqrt();
            let mut angle = (dx / h).clamp(-1.0, 1.0).acos();
            if dy < 0.0 {
                angle = std::f64::consts::TAU - angle;
            }
            let expected = ((angle / (std::f64::consts::TAU / beta as f64)).floor() as usize)
                .min(beta - 1);
            assert_eq!(partition_of(&pose, &center, beta), expected);
        }
    }

    fn poses_in_partitions(parts: &[usize], center: &Vec3) -> Vec<ViewPose> {
        parts
            .iter()
            .map(|&p| {
                let az = (p as f64 + 0.5) * std::f64::consts::TAU / 4.0;
                ViewPose::look_at(
                    center + Vec3::new(az.cos(), az.sin(), 0.7),
                    *center,
                )
            })
            .collect()
    }

    #[test]
    fn adjacency_filter_examples() {
        let center = Vec3::zeros();
        let candidates = poses_in_partitions(&[0, 1, 2, 3], &center);
        let mut state = PartitionState::new(4);
        state.mark_scanned(0);
        let got = admissible_candidates(&candidates, &state, &center);
        assert_eq!(got, vec![1, 3]);

        state.mark_scanned(2);
        let got = admissible_candidates(&candidates, &state, &center);
        assert_eq!(got, vec![1, 3]);

        state.mark_scanned(1);
        state.mark_scanned(3);
        let got = admissible_candidates(&candidates, &state, &center);
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn adjacency_set_algebra_oracle() {
        let center = Vec3::zeros();
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..200 {
            let beta = rng.gen_range(2..8);
            let mut state = PartitionState::new(beta);
            let scanned_count = rng.gen_range(1..beta);
            while state.scanned().len() < scanned_count {
                state.mark_scanned(rng.gen_range(0..beta));
            }
            // One candidate per partition at partition centers.
            let candidates: Vec<ViewPose> = (0..beta)
                .map(|p| {
                    let az = (p as f64 + 0.5) * std::f64::consts::TAU / beta as f64;
                    ViewPose::look_at(center + Vec3::new(az.cos(), az.sin(), 0.5), center)
                })
                .collect();
            let got = admissible_candidates(&candidates, &state, &center);
            let expected: Vec<usize> = (0..beta)
                .filter(|p| {
                    !state.scanned().contains(p)
                        && (state.scanned().contains(&((p + 1) % beta))
                            || state.scanned().contains(&((p + beta - 1) % beta)))
                })
                .collect();
            assert_eq!(got, expected, "beta {beta} scanned {:?}", state.scanned());
        }
    }

    #[test]
    fn fallback_widens_when_adjacent_partitions_have_no_candidates() {
        let center = Vec3::zeros();
        // Candidates only in partitions 0 (scanned) and 2 (non-adjacent).
        let candidates = poses_in_partitions(&[0, 2], &center);
        let mut state = PartitionState::new(4);
        state.mark_scanned(0);
        let got = admissible_candidates(&candidates, &state, &center);
        assert_eq!(got, vec![1]); // the partition-2 candidate

        // Candidates only in the scanned partition: last-resort fallback.
        let only_scanned = poses_in_partitions(&[0], &center);
        let got = admissible_candidates(&only_scanned, &state, &center);
        assert_eq!(got, vec![0]);
    }

    #[test]
    fn candidate_count_is_exact_for_random_params() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let alpha = rng.gen_range(1..7);
            let n = rng.gen_range(alpha..400);
            let p = param(alpha, n);
            assert_eq!(sample_candidates(&unit_box(), &p).len(), n);
        }
    }
}
