//! Run configuration: a flat `key = value` text format with strict keys.
//!
//! Unknown keys are errors so typos cannot silently fall back to defaults.
//! `config.echo` written into every output directory uses the same format.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::geometry::CameraModel;
use crate::sampling::SamplingParam;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluatorKind {
    Projection,
    Raycast,
}

impl EvaluatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvaluatorKind::Projection => "projection",
            EvaluatorKind::Raycast => "raycast",
        }
    }
}

impl std::str::FromStr for EvaluatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "projection" => Ok(EvaluatorKind::Projection),
            "raycast" => Ok(EvaluatorKind::Raycast),
            other => Err(format!("unknown evaluator '{other}' (projection|raycast)")),
        }
    }
}

/// Full planner configuration. Defaults reproduce the reference simulation
/// settings: 0.01 m voxels, 400 candidates, 4 partitions, component range
/// [5, 50], ten iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh_path: PathBuf,
    pub resolution: f64,
    pub alpha: usize,
    pub n: usize,
    pub beta: usize,
    pub gamma: f64,
    pub d_c: f64,
    pub t_min: usize,
    pub t_max: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub depth_min: f64,
    pub depth_max: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub initial_azimuth_deg: f64,
    pub initial_elevation_deg: f64,
    pub max_iterations: usize,
    pub growth_epsilon: f64,
    pub seed: u64,
    pub evaluator: EvaluatorKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh_path: PathBuf::new(),
            resolution: 0.01,
            alpha: 4,
            n: 400,
            beta: 4,
            gamma: 0.04,
            d_c: 0.45,
            t_min: 5,
            t_max: 50,
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            depth_min: 0.1,
            depth_max: 2.0,
            elevation_min_deg: 10.0,
            elevation_max_deg: 80.0,
            initial_azimuth_deg: 0.0,
            initial_elevation_deg: 45.0,
            max_iterations: 10,
            growth_epsilon: 0.02,
            seed: 1,
            evaluator: EvaluatorKind::Projection,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

impl RunConfig {
    pub fn camera(&self) -> CameraModel {
        CameraModel {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            d_c: self.d_c,
            depth_min: self.depth_min,
            depth_max: self.depth_max,
        }
    }

    pub fn sampling(&self) -> SamplingParam {
        SamplingParam {
            alpha: self.alpha,
            n: self.n,
            d_c: self.d_c,
            elevation_range: (
                self.elevation_min_deg.to_radians(),
                self.elevation_max_deg.to_radians(),
            ),
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        if self.mesh_path.as_os_str().is_empty() {
            return fail("mesh_path is required".into());
        }
        if !(self.resolution > 0.0) {
            return fail("resolution must be positive".into());
        }
        if self.alpha < 1 {
            return fail("alpha must be >= 1".into());
        }
        if self.n < self.alpha {
            return fail("n must be >= alpha".into());
        }
        if self.beta < 2 {
            return fail("beta must be >= 2".into());
        }
        if !(self.gamma > 0.0) {
            return fail("gamma must be positive".into());
        }
        if self.t_min < 1 || self.t_min > self.t_max {
            return fail("require 1 <= t_min <= t_max".into());
        }
        if !(0.0 <= self.elevation_min_deg
            && self.elevation_min_deg < self.elevation_max_deg
            && self.elevation_max_deg <= 90.0)
        {
            return fail("require 0 <= elevation_min_deg < elevation_max_deg <= 90".into());
        }
        if self.max_iterations < 1 {
            return fail("max_iterations must be >= 1".into());
        }
        if self.growth_epsilon < 0.0 {
            return fail("growth_epsilon must be >= 0".into());
        }
        self.camera()
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }

    /// Parse the flat `key = value` format. `#` starts a comment; unknown
    /// keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            cfg.set(key, value)
                .map_err(|e| ConfigError(format!("line {}: {}", lineno + 1, e)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse()
                .map_err(|_| format!("invalid value '{v}' for {key}"))
        }
        match key {
            "mesh_path" => self.mesh_path = PathBuf::from(value),
            "resolution" => self.resolution = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "d_c" => self.d_c = num(key, value)?,
            "t_min" => self.t_min = num(key, value)?,
            "t_max" => self.t_max = num(key, value)?,
            "fx" => self.fx = num(key, value)?,
            "fy" => self.fy = num(key, value)?,
            "cx" => self.cx = num(key, value)?,
            "cy" => self.cy = num(key, value)?,
            "width" => self.width = num(key, value)?,
            "height" => self.height = num(key, value)?,
            "depth_min" => self.depth_min = num(key, value)?,
            "depth_max" => self.depth_max = num(key, value)?,
            "elevation_min_deg" => self.elevation_min_deg = num(key, value)?,
            "elevation_max_deg" => self.elevation_max_deg = num(key, value)?,
            "initial_azimuth_deg" => self.initial_azimuth_deg = num(key, value)?,
            "initial_elevation_deg" => self.initial_elevation_deg = num(key, value)?,
            "max_iterations" => self.max_iterations = num(key, value)?,
            "growth_epsilon" => self.growth_epsilon = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "evaluator" => self.evaluator = value.parse()?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Ordered key/value view used for `config.echo`.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        m.insert("mesh_path", self.mesh_path.display().to_string());
        m.insert("resolution", self.resolution.to_string());
        m.insert("alpha", self.alpha.to_string());
        m.insert("n", self.n.to_string());
        m.insert("beta", self.beta.to_string());
        m.insert("gamma", self.gamma.to_string());
        m.insert("d_c", self.d_c.to_string());
        m.insert("t_min", self.t_min.to_string());
        m.insert("t_max", self.t_max.to_string());
        m.insert("fx", self.fx.to_string());
        m.insert("fy", self.fy.to_string());
        m.insert("cx", self.cx.to_string());
        m.insert("cy", self.cy.to_string());
        m.insert("width", self.width.to_string());
        m.insert("height", self.height.to_string());
        m.insert("depth_min", self.depth_min.to_string());
        m.insert("depth_max", self.depth_max.to_string());
        m.insert("elevation_min_deg", self.elevation_min_deg.to_string());
        m.insert("elevation_max_deg", self.elevation_max_deg.to_string());
        m.insert("initial_azimuth_deg", self.initial_azimuth_deg.to_string());
        m.insert("initial_elevation_deg", self.initial_elevation_deg.to_string());
        m.insert("max_iterations", self.max_iterations.to_string());
        m.insert("growth_epsilon", self.growth_epsilon.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("evaluator", self.evaluator.as_str().to_string());
        m
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
