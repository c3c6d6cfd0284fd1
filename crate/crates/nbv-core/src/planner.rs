//! End-to-end planning loop: scan, map, fit, sample, score, select; plus the
//! coverage/growth metrics, the ray-cast benchmark mode, and all output
//! files (`config.echo`, `metrics.csv`, `clouds/`, `scene/`, `report.json`).

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, EvaluatorKind, RunConfig};
use crate::evaluator::{
    baseline_raycast_score, score_view, EllipsoidScene, EvalError, ViewScore,
};
use crate::geometry::{Ellipsoid, Mat3, Vec3, ViewPose};
use crate::gmm::{select_cluster_count, GmmError, GmmParams};
use crate::mesh::{load_mesh, write_ply_cloud, MeshError};
use crate::mvee::{fit_cluster_ellipsoids, MveeParam};
use crate::sampling::{admissible_candidates, partition_of, sample_candidates, PartitionState};
use crate::sensor::{depth_to_world_cloud, Renderer};
use crate::voxel::{
    extract_frontiers, integrate_scan, FrontierSphereParam, VoxState, VoxelError, VoxelGrid,
};

/// Coverage counts a model point as reconstructed when a cloud point lies
/// within this distance, and the point-count metric filters the cloud at the
/// same edge length.
pub const COVERAGE_RADIUS: f64 = 0.005;
/// Surface samples drawn from the model file for the coverage metric.
pub const COVERAGE_SAMPLES: usize = 10_000;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("mesh error: {0}")]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("growth rate undefined: previous point count is zero")]
    DivisionByZero,
    #[error("{0}")]
    Runtime(String),
}

/// Relative cloud growth `(curr - prev) / prev` between consecutive
/// iterations, both counts voxel-filtered at [`COVERAGE_RADIUS`].
pub fn growth_rate(prev_count: usize, curr_count: usize) -> Result<f64, PlannerError> {
    if prev_count == 0 {
        return Err(PlannerError::DivisionByZero);
    }
    Ok((curr_count as f64 - prev_count as f64) / prev_count as f64)
}

fn cell_key(p: &Vec3, cell: f64) -> (i64, i64, i64) {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

/// Incremental exact coverage: model points bucketed on a grid whose cell
/// size equals the coverage radius, so the 27-cell neighborhood of a cloud
/// point contains every model point it could cover.
pub struct CoverageTracker {
    radius: f64,
    model: Vec<Vec3>,
    buckets: std::collections::HashMap<(i64, i64, i64), Vec<u32>>,
    covered: Vec<bool>,
    covered_count: usize,
}

impl CoverageTracker {
    pub fn new(model_points: &[Vec3], radius: f64) -> Self {
        let mut buckets: std::collections::HashMap<(i64, i64, i64), Vec<u32>> =
            std::collections::HashMap::new();
        for (i, p) in model_points.iter().enumerate() {
            buckets.entry(cell_key(p, radius)).or_default().push(i as u32);
        }
        Self {
            radius,
            model: model_points.to_vec(),
            buckets,
            covered: vec![false; model_points.len()],
            covered_count: 0,
        }
    }

    pub fn add_cloud_points(&mut self, points: &[Vec3]) {
        let r2 = self.radius * self.radius;
        for p in points {
            let (cx, cy, cz) = cell_key(p, self.radius);
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let Some(bucket) = self.buckets.get(&(cx + dx, cy + dy, cz + dz)) else {
                            continue;
                        };
                        for &idx in bucket {
                            let idx = idx as usize;
                            if !self.covered[idx]
                                && (self.model[idx] - p).norm_squared() <= r2
                            {
                                self.covered[idx] = true;
                                self.covered_count += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.model.is_empty() {
            return 0.0;
        }
        self.covered_count as f64 / self.model.len() as f64
    }

    pub fn covered_flags(&self) -> &[bool] {
        &self.covered
    }
}

/// Fraction of model points whose nearest cloud point lies within
/// [`COVERAGE_RADIUS`]. Exact (no approximation).
pub fn coverage(model_points: &[Vec3], cloud: &[Vec3]) -> f64 {
    let mut tracker = CoverageTracker::new(model_points, COVERAGE_RADIUS);
    tracker.add_cloud_points(cloud);
    tracker.fraction()
}

/// Cloud point count after voxel filtering at the given edge length.
struct FilteredCounter {
    cell: f64,
    seen: HashSet<(i64, i64, i64)>,
}

impl FilteredCounter {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            seen: HashSet::new(),
        }
    }

    fn add(&mut self, points: &[Vec3]) {
        for p in points {
            self.seen.insert(cell_key(p, self.cell));
        }
    }

    fn count(&self) -> usize {
        self.seen.len()
    }
}

/// Wall-clock seconds spent in each planning stage of one iteration.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub map_s: f64,
    pub fit_s: f64,
    pub sampling_s: f64,
    pub scoring_s: f64,
}

/// Everything recorded about one executed iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Pose executed this iteration (hemisphere angles, degrees).
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// Longitude partition of the executed pose (fixed at selection time).
    pub partition: usize,
    /// Score of the view chosen this iteration, when planning ran.
    pub f: Option<f64>,
    pub planning_time_s: f64,
    pub coverage: f64,
    pub point_count: usize,
    pub growth_rate: Option<f64>,
    /// Partition of the view chosen this iteration and whether it satisfied
    /// the adjacency discipline at selection time.
    pub chosen_partition: Option<usize>,
    pub choice_adjacent_ok: bool,
    pub stages: StageTimings,
    /// Cloud length after this iteration (prefix of the accumulated cloud).
    pub cloud_len: usize,
    /// Ellipsoid scene fitted this iteration (empty when planning was
    /// skipped).
    pub scene: EllipsoidScene,
}

/// Accumulated planner state across iterations.
pub struct RunState {
    pub cloud: Vec<Vec3>,
    pub grid: Option<VoxelGrid>,
    pub scene: EllipsoidScene,
    pub partitions: PartitionState,
    pub history: Vec<IterationRecord>,
    /// Area-uniform model surface samples (point, outward normal) drawn with
    /// the run seed; basis of the coverage metric.
    pub model_samples: Vec<(Vec3, Vec3)>,
    pub covered_flags: Vec<bool>,
}

/// Per-iteration timings of the two evaluator arms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchIteration {
    pub iteration: usize,
    pub projection_s: f64,
    pub raycast_s: f64,
}

/// Speed comparison between the projection evaluator and the ray-cast
/// baseline over one identical scan sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub per_iteration: Vec<BenchIteration>,
    /// Means over iterations >= 2; the first iteration runs from the
    /// manually specified pose and is excluded.
    pub projection_mean_s: f64,
    pub raycast_mean_s: f64,
    pub speedup: f64,
}

fn pose_on_sphere(center: Vec3, radius: f64, azimuth_rad: f64, elevation_rad: f64) -> ViewPose {
    let position = center
        + Vec3::new(
            radius * elevation_rad.cos() * azimuth_rad.cos(),
            radius * elevation_rad.cos() * azimuth_rad.sin(),
            radius * elevation_rad.sin(),
        );
    ViewPose::look_at(position, center)
}

fn sphere_angles_deg(position: &Vec3, center: &Vec3) -> (f64, f64) {
    let d = position - center;
    let mut az = d.y.atan2(d.x).to_degrees();
    if az < 0.0 {
        az += 360.0;
    }
    let el = (d.z / d.norm()).asin().to_degrees();
    (az, el)
}

/// Fit occupied and frontier voxel clusters into ellipsoids.
fn fit_scene(
    grid: &VoxelGrid,
    config: &RunConfig,
    iteration: usize,
) -> Result<EllipsoidScene, PlannerError> {
    let gmm_params = GmmParams::for_resolution(config.resolution);
    let mvee_param = MveeParam::for_resolution(config.resolution);
    let class_seed = |class: u64| {
        config
            .seed
            .wrapping_add((iteration as u64).wrapping_mul(0x0100_0000_01b3))
            .wrapping_add(class)
    };
    let occupied_centers = grid.centers_in_state(VoxState::Occupied);
    let (_, occ_clusters) = select_cluster_count(
        &occupied_centers,
        config.t_min,
        config.t_max,
        class_seed(0),
        &gmm_params,
    )?;
    let occupied =
        fit_cluster_ellipsoids(&occ_clusters, &occupied_centers, config.resolution, &mvee_param);
    let frontier_centers = grid.centers_in_state(VoxState::Frontier);
    let frontier = if frontier_centers.is_empty() {
        Vec::new()
    } else {
        let (_, frontier_clusters) = select_cluster_count(
            &frontier_centers,
            config.t_min,
            config.t_max,
            class_seed(1),
            &gmm_params,
        )?;
        fit_cluster_ellipsoids(
            &frontier_clusters,
            &frontier_centers,
            config.resolution,
            &mvee_param,
        )
    };
    Ok(EllipsoidScene { occupied, frontier })
}

struct ChosenView {
    pose: ViewPose,
    partition: usize,
    azimuth_deg: f64,
    elevation_deg: f64,
}

/// Shared loop behind [`run`] and [`bench`].
fn execute(
    config: &RunConfig,
    bench_mode: bool,
) -> Result<(RunState, Option<BenchReport>), PlannerError> {
    config.validate()?;
    let mesh = load_mesh(&config.mesh_path)?;
    let cam = config.camera();
    let renderer = Renderer::new(&mesh);
    let gamma = FrontierSphereParam::new(config.gamma);

    let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model_samples = mesh.sample_surface(COVERAGE_SAMPLES, &mut sample_rng);
    let model_points: Vec<Vec3> = model_samples.iter().map(|(p, _)| *p).collect();
    let mut tracker = CoverageTracker::new(&model_points, COVERAGE_RADIUS);
    let mut filtered = FilteredCounter::new(COVERAGE_RADIUS);

    let mut state = RunState {
        cloud: Vec::new(),
        grid: None,
        scene: EllipsoidScene::default(),
        partitions: PartitionState::new(config.beta),
        history: Vec::new(),
        model_samples,
        covered_flags: Vec::new(),
    };

    let mesh_bb = mesh.aabb();
    let initial_radius = config.d_c + 0.5 * mesh_bb.diagonal();
    let mut next = ChosenView {
        pose: pose_on_sphere(
            mesh_bb.center(),
            initial_radius,
            config.initial_azimuth_deg.to_radians(),
            config.initial_elevation_deg.to_radians(),
        ),
        partition: 0, // resolved against the map center on first execution
        azimuth_deg: config.initial_azimuth_deg,
        elevation_deg: config.initial_elevation_deg,
    };
    let mut first_partition_pending = true;

    let mut prev_count: Option<usize> = None;
    let mut prev_rate: Option<f64> = None;
    let mut bench_rows: Vec<BenchIteration> = Vec::new();

    for iteration in 1..=config.max_iterations {
        let pose = next.pose;
        let img = renderer.render(&pose, &cam);
        let new_points = depth_to_world_cloud(&img, &cam);
        if iteration == 1 && new_points.is_empty() {
            return Err(PlannerError::Runtime(
                "initial view sees no surface; check pose and depth range".into(),
            ));
        }
        tracker.add_cloud_points(&new_points);
        filtered.add(&new_points);
        state.cloud.extend_from_slice(&new_points);
        let point_count = filtered.count();
        let rate = match prev_count {
            Some(prev) => Some(growth_rate(prev, point_count)?),
            None => None,
        };

        // Planning: map update, then (unless terminating) fit + sample +
        // score + select. Rendering and cloud merging happen before the
        // clock starts; the planner is timed from frame receipt.
        let map_started = Instant::now();
        let grid = match state.grid.as_mut() {
            None => {
                let mut g = VoxelGrid::bootstrap_from_cloud(config.resolution, &new_points)
                    .expect("first scan produced points");
                g.update_bounding_box(gamma, &pose, true);
                state.grid = Some(g);
                state.grid.as_mut().unwrap()
            }
            Some(g) => g,
        };
        integrate_scan(grid, &img, &cam)?;
        extract_frontiers(grid);
        grid.update_bounding_box(gamma, &pose, false);
        let map_s = map_started.elapsed().as_secs_f64();

        let center = grid.world_bbox().center();
        if first_partition_pending {
            next.partition = partition_of(&pose, &center, config.beta);
            first_partition_pending = false;
        }
        let exec_partition = next.partition;
        let exec_angles = (next.azimuth_deg, next.elevation_deg);
        state.partitions.mark_scanned(exec_partition);

        let stop_after_this = iteration == config.max_iterations
            || (iteration >= 5
                && matches!((rate, prev_rate), (Some(r), Some(p)) if r < config.growth_epsilon
                    && p < config.growth_epsilon));

        let mut stages = StageTimings {
            map_s,
            ..Default::default()
        };
        let mut f_chosen = None;
        let mut chosen_partition = None;
        let mut choice_adjacent_ok = true;
        let mut scene_snapshot = EllipsoidScene::default();

        if !stop_after_this {
            // Ellipsoid fitting feeds only the projection evaluator.
            if config.evaluator == EvaluatorKind::Projection || bench_mode {
                let fit_started = Instant::now();
                state.scene = fit_scene(grid, config, iteration)?;
                stages.fit_s = fit_started.elapsed().as_secs_f64();
                scene_snapshot = state.scene.clone();
            }

            let sampling_started = Instant::now();
            let candidates = sample_candidates(&grid.world_bbox(), &config.sampling());
            let admissible = admissible_candidates(&candidates, &state.partitions, &center);
            stages.sampling_s = sampling_started.elapsed().as_secs_f64();

            let scoring_started = Instant::now();
            let (best_idx, best_f) = match config.evaluator {
                EvaluatorKind::Projection => {
                    let mut best: Option<(usize, f64)> = None;
                    for &i in &admissible {
                        let s = score_view(&state.scene, &candidates[i], &cam);
                        if best.map_or(true, |(_, bf)| s.f > bf) {
                            best = Some((i, s.f));
                        }
                    }
                    best.ok_or(EvalError::NoCandidates)?
                }
                EvaluatorKind::Raycast => {
                    let mut best: Option<(usize, f64)> = None;
                    for &i in &admissible {
                        let (gain, _) = baseline_raycast_score(grid, &candidates[i], &cam);
                        if best.map_or(true, |(_, bf)| gain as f64 > bf) {
                            best = Some((i, gain as f64));
                        }
                    }
                    best.ok_or(EvalError::NoCandidates)?
                }
            };
            stages.scoring_s = scoring_started.elapsed().as_secs_f64();

            if bench_mode {
                // Baseline arm: ray-cast scoring of the same candidate set,
                // on top of the same shared map-update work.
                let ray_started = Instant::now();
                for &i in &admissible {
                    let _ = baseline_raycast_score(grid, &candidates[i], &cam);
                }
                let ray_s = ray_started.elapsed().as_secs_f64();
                bench_rows.push(BenchIteration {
                    iteration,
                    projection_s: map_s + stages.fit_s + stages.sampling_s + stages.scoring_s,
                    raycast_s: map_s + stages.sampling_s + ray_s,
                });
            }

            let chosen = candidates[best_idx];
            let part = partition_of(&chosen, &center, config.beta);
            let adjacent_ok = state.partitions.all_scanned()
                || (!state.partitions.scanned().contains(&part)
                    && (state.partitions.scanned().contains(&((part + 1) % config.beta))
                        || state
                            .partitions
                            .scanned()
                            .contains(&((part + config.beta - 1) % config.beta))));
            let (az, el) = sphere_angles_deg(&chosen.translation, &center);
            f_chosen = Some(best_f);
            chosen_partition = Some(part);
            choice_adjacent_ok = adjacent_ok;
            next = ChosenView {
                pose: chosen,
                partition: part,
                azimuth_deg: az,
                elevation_deg: el,
            };
        } else if bench_mode {
            bench_rows.push(BenchIteration {
                iteration,
                projection_s: map_s,
                raycast_s: map_s,
            });
        }

        let planning_time_s = stages.map_s + stages.fit_s + stages.sampling_s + stages.scoring_s;
        state.history.push(IterationRecord {
            iteration,
            azimuth_deg: exec_angles.0,
            elevation_deg: exec_angles.1,
            partition: exec_partition,
            f: f_chosen,
            planning_time_s,
            coverage: tracker.fraction(),
            point_count,
            growth_rate: rate,
            chosen_partition,
            choice_adjacent_ok,
            stages,
            cloud_len: state.cloud.len(),
            scene: scene_snapshot,
        });

        prev_count = Some(point_count);
        prev_rate = rate;
        if stop_after_this {
            break;
        }
    }

    state.covered_flags = tracker.covered_flags().to_vec();
    let bench_report = bench_mode.then(|| {
        let tail: Vec<&BenchIteration> =
            bench_rows.iter().filter(|r| r.iteration >= 2).collect();
        let n = tail.len().max(1) as f64;
        let projection_mean_s = tail.iter().map(|r| r.projection_s).sum::<f64>() / n;
        let raycast_mean_s = tail.iter().map(|r| r.raycast_s).sum::<f64>() / n;
        BenchReport {
            per_iteration: bench_rows,
            projection_mean_s,
            raycast_mean_s,
            speedup: raycast_mean_s / projection_mean_s,
        }
    });
    Ok((state, bench_report))
}

/// Run the planning loop with the configured evaluator.
pub fn run(config: &RunConfig) -> Result<RunState, PlannerError> {
    execute(config, false).map(|(state, _)| state)
}

/// Run the projection-planned scan sequence while also timing the ray-cast
/// baseline over the same candidates each iteration.
pub fn bench(config: &RunConfig) -> Result<(RunState, BenchReport), PlannerError> {
    let (state, report) = execute(config, true)?;
    Ok((state, report.expect("bench mode produces a report")))
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SceneFileEllipsoid {
    class: String,
    center: [f64; 3],
    shape: [[f64; 3]; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    iteration: usize,
    ellipsoids: Vec<SceneFileEllipsoid>,
}

fn scene_to_file(scene: &EllipsoidScene, iteration: usize) -> SceneFile {
    let pack = |e: &Ellipsoid, class: &str| SceneFileEllipsoid {
        class: class.to_string(),
        center: [e.center.x, e.center.y, e.center.z],
        shape: [
            [e.shape[(0, 0)], e.shape[(0, 1)], e.shape[(0, 2)]],
            [e.shape[(1, 0)], e.shape[(1, 1)], e.shape[(1, 2)]],
            [e.shape[(2, 0)], e.shape[(2, 1)], e.shape[(2, 2)]],
        ],
    };
    SceneFile {
        iteration,
        ellipsoids: scene
            .occupied
            .iter()
            .map(|e| pack(e, "occupied"))
            .chain(scene.frontier.iter().map(|e| pack(e, "frontier")))
            .collect(),
    }
}

fn scene_from_file(file: &SceneFile) -> Result<EllipsoidScene, PlannerError> {
    let mut scene = EllipsoidScene::default();
    for e in &file.ellipsoids {
        let shape = Mat3::new(
            e.shape[0][0], e.shape[0][1], e.shape[0][2],
            e.shape[1][0], e.shape[1][1], e.shape[1][2],
            e.shape[2][0], e.shape[2][1], e.shape[2][2],
        );
        let ellipsoid = Ellipsoid::new(Vec3::new(e.center[0], e.center[1], e.center[2]), shape)
            .map_err(|err| PlannerError::Runtime(format!("bad scene ellipsoid: {err}")))?;
        match e.class.as_str() {
            "occupied" => scene.occupied.push(ellipsoid),
            "frontier" => scene.frontier.push(ellipsoid),
            other => {
                return Err(PlannerError::Runtime(format!(
                    "unknown ellipsoid class '{other}'"
                )))
            }
        }
    }
    Ok(scene)
}

#[derive(Debug, Serialize)]
struct ReportIteration {
    iteration: usize,
    azimuth_deg: f64,
    elevation_deg: f64,
    partition: usize,
    f: Option<f64>,
    planning_time_s: f64,
    coverage: f64,
    point_count: usize,
    growth_rate: Option<f64>,
    chosen_partition: Option<usize>,
    choice_adjacent_ok: bool,
    stages: StageTimings,
}

#[derive(Debug, Serialize)]
struct Report {
    iterations: usize,
    final_coverage: f64,
    final_point_count: usize,
    partition_discipline_ok: bool,
    per_iteration: Vec<ReportIteration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bench: Option<BenchReport>,
}

fn format_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render `metrics.csv` content for a run.
pub fn metrics_csv(state: &RunState) -> String {
    let mut out =
        String::from("iteration,azimuth_deg,elevation_deg,F,planning_time_s,coverage,point_count,growth_rate\n");
    for r in &state.history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.azimuth_deg,
            r.elevation_deg,
            format_opt(r.f),
            r.planning_time_s,
            r.coverage,
            r.point_count,
            format_opt(r.growth_rate),
        ));
    }
    out
}

/// Write the full output directory for a completed run.
pub fn write_outputs(
    out_dir: &Path,
    config: &RunConfig,
    state: &RunState,
    bench_report: Option<&BenchReport>,
) -> Result<(), PlannerError> {
    std::fs::create_dir_all(out_dir.join("clouds"))?;
    std::fs::create_dir_all(out_dir.join("scene"))?;
    std::fs::write(out_dir.join("config.echo"), config.to_string())?;
    std::fs::write(out_dir.join("metrics.csv"), metrics_csv(state))?;
    for r in &state.history {
        write_ply_cloud(
            &out_dir.join("clouds").join(format!("iter_{}.ply", r.iteration)),
            &state.cloud[..r.cloud_len],
        )?;
        let scene_json = serde_json::to_string_pretty(&scene_to_file(&r.scene, r.iteration))
            .expect("scene serializes");
        let mut f =
            std::fs::File::create(out_dir.join("scene").join(format!("iter_{}.json", r.iteration)))?;
        f.write_all(scene_json.as_bytes())?;
    }
    let report = Report {
        iterations: state.history.len(),
        final_coverage: state.history.last().map(|r| r.coverage).unwrap_or(0.0),
        final_point_count: state.history.last().map(|r| r.point_count).unwrap_or(0),
        partition_discipline_ok: state.history.iter().all(|r| r.choice_adjacent_ok),
        per_iteration: state
            .history
            .iter()
            .map(|r| ReportIteration {
                iteration: r.iteration,
                azimuth_deg: r.azimuth_deg,
                elevation_deg: r.elevation_deg,
                partition: r.partition,
                f: r.f,
                planning_time_s: r.planning_time_s,
                coverage: r.coverage,
                point_count: r.point_count,
                growth_rate: r.growth_rate,
                chosen_partition: r.chosen_partition,
                choice_adjacent_ok: r.choice_adjacent_ok,
                stages: r.stages,
            })
            .collect(),
        bench: bench_report.cloned(),
    };
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(())
}

/// Run and write outputs; the CLI `run` subcommand.
pub fn run_to_dir(config: &RunConfig, out_dir: &Path) -> Result<RunState, PlannerError> {
    let state = run(config)?;
    write_outputs(out_dir, config, &state, None)?;
    Ok(state)
}

/// Bench and write outputs (including the speedup report); the CLI `bench`
/// subcommand.
pub fn bench_to_dir(
    config: &RunConfig,
    out_dir: &Path,
) -> Result<(RunState, BenchReport), PlannerError> {
    let (state, report) = bench(config)?;
    write_outputs(out_dir, config, &state, Some(&report))?;
    Ok((state, report))
}

/// Score a single debug view against the last fitted scene of a finished run
/// directory. The pose is given as camera position plus look-at target.
pub fn eval_view(state_dir: &Path, eye: Vec3, target: Vec3) -> Result<ViewScore, PlannerError> {
    let config = RunConfig::load(&state_dir.join("config.echo"))?;
    let scene_dir = state_dir.join("scene");
    let mut latest: Option<(usize, PathBuf)> = None;
    for entry in std::fs::read_dir(&scene_dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(k) = name
            .strip_prefix("iter_")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            if latest.as_ref().map_or(true, |(best, _)| k > *best) {
                latest = Some((k, path));
            }
        }
    }
    let (_, path) = latest.ok_or_else(|| {
        PlannerError::Runtime(format!("no scene files in {}", scene_dir.display()))
    })?;
    let file: SceneFile = serde_json::from_str(&std::fs::read_to_string(&path)?)
        .map_err(|e| PlannerError::Runtime(format!("cannot parse {}: {e}", path.display())))?;
    let scene = scene_from_file(&file)?;
    let pose = ViewPose::look_at(eye, target);
    Ok(score_view(&scene, &pose, &config.camera()))
}

/// Check the partition discipline over a run history: every chosen view
/// (after the first) must lie in an unscanned partition adjacent to a
/// scanned one until all partitions are scanned.
pub fn partition_discipline_ok(state: &RunState) -> bool {
    state.history.iter().all(|r| r.choice_adjacent_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn growth_rate_formula() {
        assert_relative_eq!(growth_rate(100, 182).unwrap(), 0.82, epsilon = 1e-12);
        assert_relative_eq!(growth_rate(150, 150).unwrap(), 0.0);
        assert_relative_eq!(growth_rate(200, 150).unwrap(), -0.25, epsilon = 1e-12);
        assert!(matches!(
            growth_rate(0, 10),
            Err(PlannerError::DivisionByZero)
        ));
    }

    #[test]
    fn coverage_trivial_cases() {
        let mut rng = StdRng::seed_from_u64(1);
        let model: Vec<Vec3> = (0..500)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        assert_relative_eq!(coverage(&model, &model), 1.0);
        assert_relative_eq!(coverage(&model, &[]), 0.0);
    }

    #[test]
    fn coverage_half_split() {
        // First half of the model is covered exactly; the rest sits far away.
        let mut model: Vec<Vec3> = (0..100)
            .map(|i| Vec3::new(i as f64 * 0.1, 0.0, 0.0))
            .collect();
        let cloud: Vec<Vec3> = model[..50].to_vec();
        model[50..].iter_mut().for_each(|p| p.y += 1.0);
        assert_relative_eq!(coverage(&model, &cloud), 0.5);
    }

    #[test]
    fn coverage_radius_boundary() {
        let model = vec![Vec3::zeros()];
        assert_relative_eq!(coverage(&model, &[Vec3::new(0.0049, 0.0, 0.0)]), 1.0);
        assert_relative_eq!(coverage(&model, &[Vec3::new(0.0051, 0.0, 0.0)]), 0.0);
    }

    #[test]
    fn tracker_matches_batch_coverage() {
        let mut rng = StdRng::seed_from_u64(2);
        let model: Vec<Vec3> = (0..1000)
            .map(|_| Vec3::new(rng.gen::<f64>() * 0.2, rng.gen::<f64>() * 0.2, rng.gen::<f64>() * 0.2))
            .collect();
        let cloud: Vec<Vec3> = (0..3000)
            .map(|_| Vec3::new(rng.gen::<f64>() * 0.2, rng.gen::<f64>() * 0.2, rng.gen::<f64>() * 0.2))
            .collect();
        let batch = coverage(&model, &cloud);
        let mut tracker = CoverageTracker::new(&model, COVERAGE_RADIUS);
        for chunk in cloud.chunks(700) {
            tracker.add_cloud_points(chunk);
        }
        assert_relative_eq!(tracker.fraction(), batch);
    }

    #[test]
    fn sphere_pose_angles_round_trip() {
        let center = Vec3::new(0.1, -0.2, 0.05);
        for (az, el) in [(0.0f64, 45.0f64), (90.0, 10.0), (227.0, 62.5), (359.0, 80.0)] {
            let pose = pose_on_sphere(center, 0.7, az.to_radians(), el.to_radians());
            let (got_az, got_el) = sphere_angles_deg(&pose.translation, &center);
            assert_relative_eq!(got_az, az, epsilon = 1e-9);
            assert_relative_eq!(got_el, el, epsilon = 1e-9);
            assert_relative_eq!((pose.translation - center).norm(), 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn scene_file_round_trip() {
        let scene = EllipsoidScene {
            occupied: vec![Ellipsoid::sphere(Vec3::new(0.1, 0.2, 0.3), 0.05)],
            frontier: vec![Ellipsoid::from_axes(
                Vec3::new(-0.1, 0.0, 0.4),
                &Mat3::identity(),
                &[0.02, 0.03, 0.04],
            )],
        };
        let file = scene_to_file(&scene, 3);
        let json = serde_json::to_string(&file).unwrap();
        let parsed: SceneFile = serde_json::from_str(&json).unwrap();
        let back = scene_from_file(&parsed).unwrap();
        assert_eq!(back.occupied.len(), 1);
        assert_eq!(back.frontier.len(), 1);
        assert_relative_eq!(back.occupied[0].center, scene.occupied[0].center);
        assert_relative_eq!(back.frontier[0].shape, scene.frontier[0].shape);
    }
}
