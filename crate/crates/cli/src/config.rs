//! JSON run configuration.
//!
//! ```json
//! {
//!   "run_id": "two-bubble",
//!   "seed": 0,
//!   "geometry": {"dimension": 1, "sizes": [4096], "lengths": [200.0], "mode": "radial-3d"},
//!   "initial": {"profile": {"bubbles": [{"weight": 1.0, "delay": 10.0}]}},
//!   "solver": {"dt": 0.005, "t_end": 50.0, "snapshot_stride": 20},
//!   "observe": {"norms": ["hdot0.5"], "probe_times": [40.0, 50.0], "tail_s": [10.0, 20.0],
//!               "duhamel": {"t": 25.0, "delay": 10.0, "m": 2.0}},
//!   "fit": {"window": [10.0, 40.0], "epsilon": 0.1},
//!   "output": "runs/two-bubble"
//! }
//! ```
//!
//! `initial` is either `{"profile": ProfileSpec}` or `{"snapshot": PATH}`;
//! snapshot paths are resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use nlsdecay_core::observe::{self, NormKind, MIN_TAIL_SNAPSHOTS, MIN_WINDOW_CELLS};
use nlsdecay_core::profiles::build_profile;
use nlsdecay_core::ratefit::RateTarget;
use nlsdecay_core::{Field, Geometry, GeometrySpec, ProfileSpec, SolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::snapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run_id: String,
    /// Only consumed by randomized suites.
    #[serde(default)]
    pub seed: u64,
    pub geometry: GeometrySpec,
    pub initial: Initial,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub observe: ObserveConfig,
    #[serde(default)]
    pub fit: FitConfig,
    /// Excluded from the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    Profile(ProfileSpec),
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserveConfig {
    /// Extra columns after `l2,linf,l4,energy`.
    pub norms: Vec<String>,
    pub probe_times: Option<[f64; 2]>,
    pub tail_s: Vec<f64>,
    pub duhamel: Option<DuhamelConfig>,
}

/// Windows are either listed in `boundaries` or generated from `delay` and
/// `m` around a bubble focusing at `t₀ + delay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuhamelConfig {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
}

impl DuhamelConfig {
    pub fn resolve(&self, t0: f64) -> std::result::Result<Vec<f64>, String> {
        match (&self.boundaries, self.delay, self.m) {
            (Some(b), None, None) => Ok(b.clone()),
            (None, Some(delay), Some(m)) => {
                observe::focus_windows(t0, delay, m, self.t).map_err(|e| e.to_string())
            }
            _ => Err("give either `boundaries` or both `delay` and `m`".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Defaults to the standard targets on `window`, restricted to the
    /// series the run produced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<RateTarget>>,
    pub window: [f64; 2],
    /// Weight exponent for the `sup_t t^ε d(t)` diagnostic.
    pub epsilon: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            targets: None,
            window: [10.0, 100.0],
            epsilon: 0.1,
        }
    }
}

/// A parsed and validated configuration plus the data it implies.
pub struct Prepared {
    pub config: RunConfig,
    pub hash: String,
    pub geometry: Geometry,
    pub initial: Field,
    pub norms: Vec<NormKind>,
}

impl Prepared {
    pub fn final_time(&self) -> f64 {
        self.initial.time() + self.config.solver.steps() as f64 * self.config.solver.dt
    }
}

/// sha256 of the canonical JSON form (sorted keys, `output` removed).
pub fn config_hash(config: &RunConfig) -> String {
    let mut value = serde_json::to_value(config).expect("config serializes");
    if let Some(map) = value.as_object_mut() {
        map.remove("output");
    }
    let canonical = serde_json::to_vec(&value).expect("value serializes");
    hex::encode(Sha256::digest(&canonical))
}

/// The standard columns followed by the configured extras, duplicates dropped.
pub fn norm_request(observe: &ObserveConfig) -> nlsdecay_core::Result<Vec<NormKind>> {
    let mut norms = NormKind::STANDARD.to_vec();
    for name in &observe.norms {
        let kind: NormKind = name.parse()?;
        if !norms.contains(&kind) {
            norms.push(kind);
        }
    }
    Ok(norms)
}

/// Line of the first occurrence of `"key"`, or 1.
fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map_or(1, |pos| text[..pos].matches('\n').count() + 1)
}

struct Anchor<'a> {
    origin: &'a Path,
    text: &'a str,
}

impl Anchor<'_> {
    fn err(&self, key: &str, message: impl std::fmt::Display) -> CliError {
        CliError::Config(format!(
            "{}:{}: {key}: {message}",
            self.origin.display(),
            key_line(self.text, key)
        ))
    }
}

pub fn load(path: &Path) -> Result<Prepared> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, path, base)
}

/// Parses and validates `text`; `origin` labels messages, `base` anchors
/// relative snapshot paths.
pub fn parse(text: &str, origin: &Path, base: &Path) -> Result<Prepared> {
    let mut config: RunConfig = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        let message = message
            .rsplit_once(" at line ")
            .map_or(message.as_str(), |(m, _)| m);
        CliError::Config(format!("{}:{}: {message}", origin.display(), e.line().max(1)))
    })?;
    if let Initial::Snapshot(p) = &mut config.initial {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    prepare(config, &Anchor { origin, text })
}

/// Validates an in-memory configuration; errors are anchored to line 1.
pub fn prepare_config(config: RunConfig) -> Result<Prepared> {
    prepare(config, &Anchor { origin: Path::new("<config>"), text: "" })
}

fn prepare(config: RunConfig, at: &Anchor) -> Result<Prepared> {
    if !config
        .run_id
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
    {
        return Err(at.err("run_id", "only ASCII letters, digits, '-', '_' and '.' are allowed"));
    }
    let geometry = config.geometry.build().map_err(|e| at.err("geometry", e))?;
    let initial = match &config.initial {
        Initial::Profile(spec) => {
            spec.validate().map_err(|e| at.err("initial", e))?;
            build_profile(spec, &geometry).map_err(|e| at.err("initial", e))?
        }
        Initial::Snapshot(path) => {
            let field = snapshot::read(path)?;
            if !field.geometry().same_as(&geometry) {
                return Err(at.err("snapshot", "snapshot geometry differs from the `geometry` block"));
            }
            field
        }
    };
    config.solver.validate(&geometry).map_err(|e| at.err("solver", e))?;

    let norms = norm_request(&config.observe).map_err(|e| at.err("norms", e))?;

    let plan = SnapshotPlan::new(initial.time(), &config.solver);
    let obs = &config.observe;
    if let Some([t1, t2]) = obs.probe_times {
        if !(t1 < t2) {
            return Err(at.err("probe_times", format!("need t1 < t2, got [{t1}, {t2}]")));
        }
        for t in [t1, t2] {
            plan.require(t).map_err(|m| at.err("probe_times", m))?;
        }
    }
    if !obs.tail_s.is_empty() {
        if obs.probe_times.is_none() {
            return Err(at.err("tail_s", "tail values are reported with the final state; set probe_times"));
        }
        for &s in &obs.tail_s {
            plan.check_tail(s).map_err(|m| at.err("tail_s", m))?;
        }
    }
    if let Some(d) = &obs.duhamel {
        let boundaries = d.resolve(plan.t0).map_err(|m| at.err("duhamel", m))?;
        plan.check_windows(d.t, &boundaries).map_err(|m| at.err("duhamel", m))?;
    }

    let fit = &config.fit;
    let [w0, w1] = fit.window;
    if !(w0 > 0.0 && w0 < w1) {
        return Err(at.err("window", format!("need 0 < start < end, got [{w0}, {w1}]")));
    }
    if !(fit.epsilon.is_finite() && fit.epsilon >= 0.0) {
        return Err(at.err("epsilon", format!("must be >= 0, got {}", fit.epsilon)));
    }
    for target in fit.targets.iter().flatten() {
        let (a, b) = target.window;
        if !(a > 0.0 && a < b) || !(target.tolerance >= 0.0) {
            return Err(at.err(
                "targets",
                format!("target for {:?} needs 0 < start < end and tolerance >= 0", target.series),
            ));
        }
    }

    Ok(Prepared {
        hash: config_hash(&config),
        config,
        geometry,
        initial,
        norms,
    })
}

/// Snapshot times a solver configuration will produce, computed the same
/// way `evolve` does.
struct SnapshotPlan {
    t0: f64,
    times: Vec<f64>,
}

impl SnapshotPlan {
    fn new(t0: f64, solver: &SolverConfig) -> Self {
        let steps = solver.steps();
        let times = (0..=steps)
            .filter(|&s| s % solver.snapshot_stride == 0 || s == steps)
            .map(|s| t0 + s as f64 * solver.dt)
            .collect();
        SnapshotPlan { t0, times }
    }

    fn end(&self) -> f64 {
        *self.times.last().expect("at least the initial snapshot")
    }

    fn tol(&self) -> f64 {
        1e-9 * self.end().abs().max(1.0)
    }

    fn index(&self, t: f64) -> std::result::Result<usize, String> {
        let end = self.end();
        if t > end + self.tol() {
            return Err(format!("time {t} lies beyond the final time {end}"));
        }
        if t < self.t0 - self.tol() {
            return Err(format!("time {t} precedes the start time {}", self.t0));
        }
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= self.tol())
            .ok_or_else(|| format!("time {t} is not a snapshot time (see solver.snapshot_stride)"))
    }

    fn require(&self, t: f64) -> std::result::Result<(), String> {
        self.index(t).map(|_| ())
    }

    fn check_tail(&self, s: f64) -> std::result::Result<(), String> {
        let end = self.end();
        if s > end + self.tol() || s < self.t0 - self.tol() {
            return Err(format!("tail start {s} outside [{}, {end}]", self.t0));
        }
        if s >= end - self.tol() {
            return Ok(());
        }
        let count = self.times.iter().filter(|&&t| t >= s - self.tol()).count();
        if count < MIN_TAIL_SNAPSHOTS {
            return Err(format!(
                "tail from {s} holds {count} snapshots, need {MIN_TAIL_SNAPSHOTS}"
            ));
        }
        Ok(())
    }

    fn check_windows(&self, t: f64, boundaries: &[f64]) -> std::result::Result<(), String> {
        let t_index = self.index(t)?;
        let idx = boundaries
            .iter()
            .map(|&b| self.index(b))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if idx.len() < 2 || idx[0] != 0 || *idx.last().unwrap() != t_index {
            return Err(format!("windows must run from {} to {t}", self.t0));
        }
        for w in idx.windows(2) {
            if w[1] < w[0] {
                return Err("window boundaries must be nondecreasing".into());
            }
            let cells = w[1] - w[0];
            if cells > 0 && cells < MIN_WINDOW_CELLS {
                return Err(format!(
                    "window [{}, {}] spans {cells} snapshot intervals, need {MIN_WINDOW_CELLS}",
                    self.times[w[0]], self.times[w[1]]
                ));
            }
        }
        Ok(())
    }
}
