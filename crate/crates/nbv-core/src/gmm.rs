//! Gaussian mixture clustering of voxel centers: seeded k-means++
//! initialization, full-covariance EM, and BIC-driven component-count
//! selection.

use nalgebra::Cholesky;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Mat3, Vec3};

#[derive(Debug, Error)]
pub enum GmmError {
    #[error("{got} points cannot support {needed} mixture components")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("cannot cluster an empty point set")]
    EmptyInput,
}

/// Numerical knobs shared by all fits in a run.
#[derive(Debug, Clone, Copy)]
pub struct GmmParams {
    /// Lower bound applied to every covariance eigenvalue; typically
    /// `(voxel_resolution / 2)^2` so coplanar voxel sheets stay non-singular.
    pub cov_floor: f64,
    pub max_iterations: usize,
    /// Relative log-likelihood change below which EM stops.
    pub rel_tolerance: f64,
}

impl GmmParams {
    pub fn for_resolution(resolution: f64) -> Self {
        Self {
            cov_floor: (resolution / 2.0) * (resolution / 2.0),
            max_iterations: 100,
            rel_tolerance: 1e-5,
        }
    }
}

/// Fitted mixture. Weights sum to 1; covariance eigenvalues respect the floor.
#[derive(Debug, Clone)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec3>,
    pub covariances: Vec<Mat3>,
    /// Total log-likelihood of the training points at convergence.
    pub log_likelihood: f64,
    /// Log-likelihood after each EM iteration (first entry: initial params).
    pub log_likelihood_history: Vec<f64>,
}

impl GmmModel {
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }
}

/// Hard assignment of points to mixture components.
#[derive(Debug, Clone)]
pub struct Clustering {
    /// Component index per point.
    pub assignments: Vec<usize>,
    /// Point indices per component; no cluster is empty.
    pub clusters: Vec<Vec<usize>>,
}

struct ComponentCache {
    inv: Mat3,
    log_norm: f64,
}

const LOG_TAU: f64 = 1.8378770664093453; // ln(2*pi)

fn component_cache(weight: f64, cov: &Mat3) -> ComponentCache {
    let chol = Cholesky::new(*cov).expect("floored covariance is SPD");
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    ComponentCache {
        inv: chol.inverse(),
        log_norm: weight.ln() - 0.5 * (3.0 * LOG_TAU + log_det),
    }
}

/// Per-point responsibilities and the total log-likelihood of `points`.
pub fn responsibilities(model: &GmmModel, points: &[Vec3]) -> (Vec<Vec<f64>>, f64) {
    let caches: Vec<ComponentCache> = model
        .weights
        .iter()
        .zip(&model.covariances)
        .map(|(&w, c)| component_cache(w.max(1e-300), c))
        .collect();
    let t = caches.len();
    let mut resp = Vec::with_capacity(points.len());
    let mut total_ll = 0.0;
    let mut logp = vec![0.0f64; t];
    for p in points {
        let mut max_lp = f64::NEG_INFINITY;
        for (j, cache) in caches.iter().enumerate() {
            let d = p - model.means[j];
            let maha = (cache.inv * d).dot(&d);
            logp[j] = cache.log_norm - 0.5 * maha;
            max_lp = max_lp.max(logp[j]);
        }
        let sum_exp: f64 = logp.iter().map(|lp| (lp - max_lp).exp()).sum();
        let lse = max_lp + sum_exp.ln();
        total_ll += lse;
        resp.push(logp.iter().map(|lp| (lp - lse).exp()).collect());
    }
    (resp, total_ll)
}

/// Total log-likelihood of `points` under `model`.
pub fn log_likelihood(model: &GmmModel, points: &[Vec3]) -> f64 {
    responsibilities(model, points).1
}

fn floor_covariance(cov: &Mat3, floor: f64) -> Mat3 {
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut rebuilt = Mat3::zeros();
    for k in 0..3 {
        let l = eig.eigenvalues[k].max(floor);
        let v: Vec3 = eig.eigenvectors.column(k).into();
        rebuilt += v * v.transpose() * l;
    }
    (rebuilt + rebuilt.transpose()) * 0.5
}

fn sample_mean_covariance(points: &[Vec3]) -> (Vec3, Mat3) {
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let mut cov = Mat3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    (mean, cov / n)
}

/// k-means++ seeding: spread the initial means with D^2 sampling.
fn kmeanspp_means(points: &[Vec3], t: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut means = Vec::with_capacity(t);
    means.push(points[rng.gen_range(0..points.len())]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| (p - means[0]).norm_squared())
        .collect();
    while means.len() < t {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..points.len())
        };
        means.push(points[next]);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min((p - means[means.len() - 1]).norm_squared());
        }
    }
    means
}

/// Fit a `t`-component mixture with EM.
///
/// Runs to convergence (relative log-likelihood change below the tolerance)
/// or `max_iterations`, whichever comes first; deterministic for a fixed
/// seed.
pub fn fit_gmm(
    points: &[Vec3],
    t: usize,
    seed: u64,
    params: &GmmParams,
) -> Result<GmmModel, GmmError> {
    if points.is_empty() {
        return Err(GmmError::EmptyInput);
    }
    if points.len() < t || t == 0 {
        return Err(GmmError::InsufficientPoints {
            needed: t.max(1),
            got: points.len(),
        });
    }
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = kmeanspp_means(points, t, &mut rng);
    let (_, pooled) = sample_mean_covariance(points);
    let init_cov = floor_covariance(&pooled, params.cov_floor);
    let mut covariances = vec![init_cov; t];
    let mut weights = vec![1.0 / t as f64; t];

    let mut history = Vec::new();
    let mut resp = vec![vec![0.0f64; t]; n];
    let mut logp = vec![0.0f64; t];
    for _ in 0..params.max_iterations {
        // E-step.
        let caches: Vec<ComponentCache> = weights
            .iter()
            .zip(&covariances)
            .map(|(&w, c)| component_cache(w.max(1e-300), c))
            .collect();
        let mut total_ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            let mut max_lp = f64::NEG_INFINITY;
            for (j, cache) in caches.iter().enumerate() {
                let d = p - means[j];
                logp[j] = cache.log_norm - 0.5 * (cache.inv * d).dot(&d);
                max_lp = max_lp.max(logp[j]);
            }
            let sum_exp: f64 = logp.iter().map(|lp| (lp - max_lp).exp()).sum();
            let lse = max_lp + sum_exp.ln();
            total_ll += lse;
            for j in 0..t {
                resp[i][j] = (logp[j] - lse).exp();
            }
        }
        history.push(total_ll);
        if history.len() >= 2 {
            let prev = history[history.len() - 2];
            let rel = (total_ll - prev).abs() / prev.abs().max(1e-300);
            if rel < params.rel_tolerance {
                break;
            }
        }

        // M-step: responsibility-weighted means, then centered covariances.
        for j in 0..t {
            let nk: f64 = (0..n).map(|i| resp[i][j]).sum();
            if nk < 1e-12 {
                // Starved component: keep its parameters, set a tiny weight.
                weights[j] = nk / n as f64;
                continue;
            }
            let mut mean = Vec3::zeros();
            for (i, p) in points.iter().enumerate() {
                mean += p * resp[i][j];
            }
            mean /= nk;
            let mut cov = Mat3::zeros();
            for (i, p) in points.iter().enumerate() {
                let d = p - mean;
                cov += d * d.transpose() * resp[i][j];
            }
            weights[j] = nk / n as f64;
            means[j] = mean;
            covariances[j] = floor_covariance(&(cov / nk), params.cov_floor);
        }
        let wsum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }
    }
    let log_likelihood = *history.last().expect("at least one EM iteration");
    Ok(GmmModel {
        weights,
        means,
        covariances,
        log_likelihood,
        log_likelihood_history: history,
    })
}

/// Bayesian Information Criterion `k ln(n) - 2 ln(L)`.
pub fn bic_value(k_params: usize, n: usize, ln_l: f64) -> f64 {
    k_params as f64 * (n as f64).ln() - 2.0 * ln_l
}

/// BIC of a fitted model on `points`, with `k = 10T - 1` free parameters for
/// a full-covariance 3D mixture (T-1 weights, 3T means, 6T covariances).
pub fn bic(model: &GmmModel, points: &[Vec3]) -> f64 {
    let t = model.component_count();
    bic_value(10 * t - 1, points.len(), log_likelihood(model, points))
}

/// Hard-assign points by maximum responsibility, dropping empty components
/// from both the model and the clustering (weights renormalized).
pub fn hard_assign(model: &GmmModel, points: &[Vec3]) -> (GmmModel, Clustering) {
    let (resp, _) = responsibilities(model, points);
    let t = model.component_count();
    let mut raw_assign = Vec::with_capacity(points.len());
    for r in &resp {
        let mut best = 0;
        for j in 1..t {
            if r[j] > r[best] {
                best = j;
            }
        }
        raw_assign.push(best);
    }
    let mut keep: Vec<usize> = (0..t)
        .filter(|&j| raw_assign.iter().any(|&a| a == j))
        .collect();
    keep.sort_unstable();
    let remap: std::collections::HashMap<usize, usize> =
        keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let weights_raw: Vec<f64> = keep.iter().map(|&j| model.weights[j]).collect();
    let wsum: f64 = weights_raw.iter().sum();
    let reduced = GmmModel {
        weights: weights_raw.iter().map(|w| w / wsum).collect(),
        means: keep.iter().map(|&j| model.means[j]).collect(),
        covariances: keep.iter().map(|&j| model.covariances[j]).collect(),
        log_likelihood: model.log_likelihood,
        log_likelihood_history: model.log_likelihood_history.clone(),
    };
    let assignments: Vec<usize> = raw_assign.iter().map(|a| remap[a]).collect();
    let mut clusters = vec![Vec::new(); keep.len()];
    for (i, &a) in assignments.iter().enumerate() {
        clusters[a].push(i);
    }
    (reduced, Clustering { assignments, clusters })
}

/// Candidate component counts: `T_min, T_min+5, ...` up to `T_max`, each
/// capped at the point count. A full sweep of every T would dominate the
/// planner's runtime.
fn search_schedule(n: usize, t_min: usize, t_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut t = t_min.max(1);
    while t <= t_max {
        let capped = t.min(n);
        if out.last() != Some(&capped) {
            out.push(capped);
        }
        if capped == n {
            break;
        }
        t += 5;
    }
    if out.is_empty() {
        out.push(t_min.min(n).max(1));
    }
    out
}

/// Fit every schedule entry and return the model with the smallest BIC plus
/// its hard clustering. Candidate fits run in parallel; the result does not
/// depend on scheduling because fits are seeded per component count and
/// compared in schedule order.
pub fn select_cluster_count(
    points: &[Vec3],
    t_min: usize,
    t_max: usize,
    seed: u64,
    params: &GmmParams,
) -> Result<(GmmModel, Clustering), GmmError> {
    if points.is_empty() {
        return Err(GmmError::EmptyInput);
    }
    let schedule = search_schedule(points.len(), t_min, t_max);
    let fits: Vec<(GmmModel, f64)> = schedule
        .par_iter()
        .map(|&t| {
            let fit_seed = seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let model = fit_gmm(points, t, fit_seed, params).expect("schedule is capped at n");
            let score = bic(&model, points);
            (model, score)
        })
        .collect();
    let mut best = 0;
    for i in 1..fits.len() {
        if fits[i].1 < fits[best].1 {
            best = i;
        }
    }
    let (model, _) = fits.into_iter().nth(best).expect("non-empty schedule");
    Ok(hard_assign(&model, points))
}
