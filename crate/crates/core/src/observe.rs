//! Time-dependent measurements on trajectories: norm series, the final
//! state estimate `u⁺` and the distance `‖u(t) − e^{itΔ}u⁺‖_{Ḣ^{1/2}}`,
//! truncated `L⁵_{t,x}` tails, and the five-window Duhamel split.
//!
//! Time integrals use the trapezoid rule over stored snapshots, so any
//! window boundary must be a snapshot time.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, sobolev_from_coefficients, Field};
use crate::propagate::Trajectory;

/// Minimum number of snapshots a non-empty tail interval must contain.
pub const MIN_TAIL_SNAPSHOTS: usize = 8;
/// Minimum trapezoid cells per Duhamel window of positive length.
pub const MIN_WINDOW_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    Linf,
    L4,
    Energy,
    Lp(f64),
    Hdot(f64),
    Sobolev(f64),
}

impl NormKind {
    pub const STANDARD: [NormKind; 4] = [NormKind::L2, NormKind::Linf, NormKind::L4, NormKind::Energy];
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::L2 => write!(f, "l2"),
            NormKind::Linf => write!(f, "linf"),
            NormKind::L4 => write!(f, "l4"),
            NormKind::Energy => write!(f, "energy"),
            NormKind::Lp(p) => write!(f, "lp{p}"),
            NormKind::Hdot(s) => write!(f, "hdot{s}"),
            NormKind::Sobolev(s) => write!(f, "h{s}"),
        }
    }
}

impl FromStr for NormKind {
    type Err = Error;

    /// Accepts `l2`, `linf`, `l4`, `energy`, `lpP`, `hdotS`, `hS`.
    fn from_str(s: &str) -> Result<Self> {
        let number = |rest: &str, what: &str| -> Result<f64> {
            rest.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("bad {what} in norm name {s:?}")))
        };
        let kind = match s {
            "l2" => NormKind::L2,
            "linf" => NormKind::Linf,
            "l4" => NormKind::L4,
            "energy" => NormKind::Energy,
            _ if s.starts_with("lp") => {
                let p = number(&s[2..], "exponent")?;
                if p < 1.0 {
                    return Err(Error::InvalidArgument(format!("L^p exponent must be >= 1 in {s:?}")));
                }
                NormKind::Lp(p)
            }
            _ if s.starts_with("hdot") => NormKind::Hdot(non_negative(number(&s[4..], "order")?, s)?),
            _ if s.starts_with('h') => NormKind::Sobolev(non_negative(number(&s[1..], "order")?, s)?),
            _ => return Err(Error::InvalidArgument(format!("unknown norm {s:?}"))),
        };
        Ok(kind)
    }
}

fn non_negative(v: f64, name: &str) -> Result<f64> {
    if v < 0.0 {
        Err(Error::InvalidArgument(format!("Sobolev order must be >= 0 in {name:?}")))
    } else {
        Ok(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub run_id: Option<String>,
    pub config_hash: Option<String>,
}

/// One row per snapshot; `columns` names the values in each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: SeriesMetadata,
}

impl ObservableSeries {
    pub fn column(&self, name: &str) -> Option<Vec<(f64, f64)>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.times.iter().zip(&self.rows).map(|(&t, row)| (t, row[j])).collect())
    }
}

fn evaluate(field: &Field, coef: &[Complex64], kind: NormKind) -> Result<f64> {
    Ok(match kind {
        NormKind::L2 => fields::norm_lp(field, 2.0)?,
        NormKind::Linf => fields::norm_linf(field),
        NormKind::L4 => fields::norm_lp(field, 4.0)?,
        NormKind::Energy => fields::energy_with_coefficients(field, coef),
        NormKind::Lp(p) => fields::norm_lp(field, p)?,
        NormKind::Hdot(s) => sobolev_from_coefficients(field, coef, s, true),
        NormKind::Sobolev(s) => sobolev_from_coefficients(field, coef, s, false),
    })
}

/// Evaluates the requested norms on every snapshot.
pub fn measure(trajectory: &Trajectory, request: &[NormKind]) -> Result<ObservableSeries> {
    let mut rows = Vec::with_capacity(trajectory.snapshots().len());
    let needs_spectrum = request
        .iter()
        .any(|k| matches!(k, NormKind::Energy | NormKind::Hdot(_) | NormKind::Sobolev(_)));
    let mut ws = trajectory.geometry().workspace();
    for snap in trajectory.snapshots() {
        let mut coef = Vec::new();
        if needs_spectrum {
            coef = snap.values().to_vec();
            ws.forward(&mut coef)?;
        }
        let row = request
            .iter()
            .map(|&k| evaluate(snap, &coef, k))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Observe(format!("non-finite norm {bad} at t = {}", snap.time())));
        }
        rows.push(row);
    }
    Ok(ObservableSeries {
        times: trajectory.times(),
        columns: request.iter().map(ToString::to_string).collect(),
        rows,
        metadata: SeriesMetadata::default(),
    })
}

/// `M₁`: the largest `H⁴` norm over the stored snapshots.
pub fn max_h4_norm(trajectory: &Trajectory) -> f64 {
    trajectory
        .snapshots()
        .iter()
        .map(|f| sobolev_from_coefficients(f, &f.spectral(), 4.0, false))
        .fold(0.0, f64::max)
}

fn snapshot(trajectory: &Trajectory, t: f64, what: &str) -> Result<usize> {
    trajectory.index_of(t).ok_or_else(|| {
        Error::Observe(format!(
            "{what} {t} is not a snapshot time of the trajectory [{}, {}]",
            trajectory.start_time(),
            trajectory.end_time()
        ))
    })
}

/// Spectral coefficients of `e^{-itΔ}u(t)`.
fn pulled_back(field: &Field) -> Vec<Complex64> {
    let t = field.time();
    let mut coef = field.spectral();
    for (c, &k2) in coef.iter_mut().zip(field.geometry().lattice().k_squared()) {
        *c *= Complex64::from_polar(1.0, k2 * t);
    }
    coef
}

fn hdot_half_distance(field: &Field, a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    sobolev_from_coefficients(field, &diff, 0.5, true)
}

#[derive(Debug, Clone)]
pub struct FinalState {
    /// `e^{-it₂Δ}u(t₂)`, stored at time 0.
    pub u_plus: Field,
    pub probe_times: (f64, f64),
    /// `‖e^{-it₂Δ}u(t₂) − e^{-it₁Δ}u(t₁)‖_{Ḣ^{1/2}}`
    pub cauchy_gap: f64,
}

pub fn estimate_final_state(trajectory: &Trajectory, t1: f64, t2: f64) -> Result<FinalState> {
    if !(t1 < t2) {
        return Err(Error::Observe(format!("probe times must satisfy t1 < t2, got {t1} and {t2}")));
    }
    let i1 = snapshot(trajectory, t1, "probe time")?;
    let i2 = snapshot(trajectory, t2, "probe time")?;
    if t1 < 0.5 * t2 {
        warn!("probe t1 = {t1} is earlier than t2/2 = {}; the Cauchy gap may overstate the error", 0.5 * t2);
    }
    let (f1, f2) = (&trajectory.snapshots()[i1], &trajectory.snapshots()[i2]);
    let (w1, w2) = (pulled_back(f1), pulled_back(f2));
    let cauchy_gap = hdot_half_distance(f2, &w2, &w1);
    let u_plus = Field::from_spectral(f2.geometry().clone(), 0.0, w2)?;
    Ok(FinalState {
        u_plus,
        probe_times: (f1.time(), f2.time()),
        cauchy_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub t: f64,
    pub distance: f64,
    /// `distance < cauchy_gap`: not resolved by the `u⁺` estimate.
    pub at_floor: bool,
}

/// `‖u(t) − e^{itΔ}u⁺‖_{Ḣ^{1/2}}` at the given snapshot times (all snapshots
/// when `times` is `None`).
pub fn convergence_distance(
    trajectory: &Trajectory,
    final_state: &FinalState,
    times: Option<&[f64]>,
) -> Result<Vec<ConvergencePoint>> {
    if !trajectory.geometry().same_as(final_state.u_plus.geometry()) {
        return Err(Error::GeometryMismatch);
    }
    let indices: Vec<usize> = match times {
        None => (0..trajectory.snapshots().len()).collect(),
        Some(ts) => ts
            .iter()
            .map(|&t| snapshot(trajectory, t, "sample time"))
            .collect::<Result<_>>()?,
    };
    let plus = final_state.u_plus.spectral();
    Ok(indices
        .into_iter()
        .map(|i| {
            let f = &trajectory.snapshots()[i];
            let distance = hdot_half_distance(f, &pulled_back(f), &plus);
            ConvergencePoint {
                t: f.time(),
                distance,
                at_floor: distance < final_state.cauchy_gap,
            }
        })
        .collect())
}

/// Truncated `(∫_s^{T}∫|u|⁵ dx dt)^{1/5}`, `T` the last snapshot time.
/// Partial cells use the linear interpolant of `‖u(t)‖₅⁵`.
pub fn spacetime_tail(trajectory: &Trajectory, s_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let times = trajectory.times();
    let g: Vec<f64> = trajectory
        .snapshots()
        .iter()
        .map(|f| fields::norm_lp(f, 5.0).map(|n| n.powi(5)))
        .collect::<Result<_>>()?;
    let (t_start, t_end) = (trajectory.start_time(), trajectory.end_time());
    let tol = 1e-9 * t_end.abs().max(1.0);

    // suffix[j] = ∫_{t_j}^{T} g
    let mut suffix = vec![0.0; times.len()];
    for j in (0..times.len().saturating_sub(1)).rev() {
        suffix[j] = suffix[j + 1] + 0.5 * (times[j + 1] - times[j]) * (g[j] + g[j + 1]);
    }

    s_values
        .iter()
        .map(|&s| {
            if !(s >= t_start - tol && s <= t_end + tol) {
                return Err(Error::Observe(format!("tail start {s} outside [{t_start}, {t_end}]")));
            }
            if s >= t_end - tol {
                return Ok((s, 0.0));
            }
            let first_inside = times.partition_point(|&t| t < s - tol);
            let count = times.len() - first_inside;
            if count < MIN_TAIL_SNAPSHOTS {
                return Err(Error::Observe(format!(
                    "snapshot stride too coarse: tail from s = {s} holds {count} snapshots, need {MIN_TAIL_SNAPSHOTS}"
                )));
            }
            let j = first_inside;
            let mut integral = suffix[j];
            if (times[j] - s).abs() > tol && j > 0 {
                let (ta, tb) = (times[j - 1], times[j]);
                let gs = g[j - 1] + (g[j] - g[j - 1]) * (s - ta) / (tb - ta);
                integral += 0.5 * (tb - s) * (gs + g[j]);
            }
            Ok((s, integral.max(0.0).powf(0.2)))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ScatterReport {
    pub final_state: FinalState,
    pub convergence: Vec<ConvergencePoint>,
    pub tail: Vec<(f64, f64)>,
    pub truncation_horizon: f64,
}

impl ScatterReport {
    pub fn build(trajectory: &Trajectory, t1: f64, t2: f64, tail_s: &[f64]) -> Result<Self> {
        let final_state = estimate_final_state(trajectory, t1, t2)?;
        let convergence = convergence_distance(trajectory, &final_state, None)?;
        let tail = spacetime_tail(trajectory, tail_s)?;
        Ok(ScatterReport {
            final_state,
            convergence,
            tail,
            truncation_horizon: trajectory.end_time(),
        })
    }

    /// Run constant `K` in `d(t) ≤ K·max(tail(t)³, tail(t))`, over the tail
    /// sample points that coincide with convergence samples and have a
    /// positive tail. Reported only.
    pub fn strichartz_constant(&self) -> Option<f64> {
        self.tail
            .iter()
            .filter(|&&(_, tail)| tail > 0.0)
            .filter_map(|&(s, tail)| {
                let tol = 1e-9 * s.abs().max(1.0);
                self.convergence
                    .iter()
                    .find(|p| (p.t - s).abs() <= tol)
                    .map(|p| p.distance / tail.powi(3).max(tail))
            })
            .reduce(f64::max)
    }
}

/// The five windows `[t₀, t₀+M], [t₀+M, t₀+D−M], [t₀+D−M, t₀+D+M],
/// [t₀+D+M, t₀+2D−M], [t₀+2D−M, t]` around a bubble focusing at `t₀ + D`.
pub fn focus_windows(t_start: f64, delay: f64, m: f64, t: f64) -> Result<Vec<f64>> {
    let b = [
        t_start,
        t_start + m,
        t_start + delay - m,
        t_start + delay + m,
        t_start + 2.0 * delay - m,
        t,
    ];
    if !(m > 0.0) || b.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Observe(format!(
            "windows for delay {delay}, M = {m}, t = {t} are not ordered (need 0 < 2M <= D and t >= 2D - M)"
        )));
    }
    Ok(b.to_vec())
}

#[derive(Debug, Clone)]
pub struct DuhamelReport {
    pub t: f64,
    pub boundaries: Vec<f64>,
    /// `e^{i(t−t₀)Δ}u(t₀)`
    pub linear: Field,
    /// `Fᵢ = −i∫_{window i} e^{i(t−s)Δ}|u|²u(s) ds`
    pub pieces: Vec<Field>,
    pub residual: f64,
    pub relative_residual: f64,
}

impl DuhamelReport {
    pub fn piece_norms(&self) -> Vec<f64> {
        self.pieces.iter().map(|f| fields::norm_lp(f, 2.0).unwrap_or(f64::NAN)).collect()
    }
}

/// Splits `u(t) = e^{i(t−t₀)Δ}u(t₀) + ΣFᵢ` over the windows delimited by
/// `boundaries` (which must run from the first snapshot to `t`).
pub fn duhamel_decompose(trajectory: &Trajectory, t: f64, boundaries: &[f64]) -> Result<DuhamelReport> {
    if boundaries.len() < 2 {
        return Err(Error::Observe("need at least one window".into()));
    }
    let idx: Vec<usize> = boundaries
        .iter()
        .map(|&b| snapshot(trajectory, b, "window boundary"))
        .collect::<Result<_>>()?;
    let t_index = snapshot(trajectory, t, "evaluation time")?;
    if idx[0] != 0 || *idx.last().unwrap() != t_index {
        return Err(Error::Observe(format!(
            "windows must partition [{}, {t}]",
            trajectory.start_time()
        )));
    }
    if idx.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Observe("window boundaries must be nondecreasing".into()));
    }
    for w in idx.windows(2) {
        let cells = w[1] - w[0];
        if cells > 0 && cells < MIN_WINDOW_CELLS {
            return Err(Error::Observe(format!(
                "snapshot stride too coarse: window [{}, {}] spans {cells} cells, need {MIN_WINDOW_CELLS}",
                trajectory.snapshots()[w[0]].time(),
                trajectory.snapshots()[w[1]].time()
            )));
        }
    }

    let snaps = trajectory.snapshots();
    let geometry = trajectory.geometry().clone();
    let k2 = geometry.lattice().k_squared().to_vec();
    let mut ws = geometry.workspace();
    let t_eval = snaps[t_index].time();

    // Interaction-picture integrand e^{-isΔ}N(u(s)), N(u) = |u|²u.
    let mut integrand = |field: &Field| -> Result<Vec<Complex64>> {
        let s = field.time();
        let mut coef: Vec<Complex64> = match geometry.is_radial() {
            false => field.values().iter().map(|u| u * u.norm_sqr()).collect(),
            true => field
                .values()
                .iter()
                .zip(geometry.radii())
                .map(|(v, r)| v * (v.norm_sqr() / (r * r)))
                .collect(),
        };
        ws.forward(&mut coef)?;
        for (c, &k) in coef.iter_mut().zip(&k2) {
            *c *= Complex64::from_polar(1.0, k * s);
        }
        Ok(coef)
    };

    let mut pieces = Vec::with_capacity(idx.len() - 1);
    let mut prev = integrand(&snaps[idx[0]])?;
    let outgoing: Vec<Complex64> = k2
        .iter()
        .map(|&k| Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, -k * t_eval))
        .collect();
    for w in idx.windows(2) {
        let mut acc = vec![Complex64::default(); geometry.len()];
        for j in w[0]..w[1] {
            let next = integrand(&snaps[j + 1])?;
            let half = 0.5 * (snaps[j + 1].time() - snaps[j].time());
            for ((a, p), n) in acc.iter_mut().zip(&prev).zip(&next) {
                *a += (p + n) * half;
            }
            prev = next;
        }
        for (a, o) in acc.iter_mut().zip(&outgoing) {
            *a *= o;
        }
        pieces.push(Field::from_spectral(geometry.clone(), t_eval, acc)?);
    }

    let start = &snaps[0];
    let linear = crate::propagate::free_propagate(start, t_eval - start.time());
    let mut remainder = snaps[t_index].checked_sub(&linear)?;
    for p in &pieces {
        remainder = remainder.checked_sub(p)?;
    }
    let residual = fields::norm_lp(&remainder, 2.0)?;
    let scale = fields::norm_lp(&snaps[t_index], 2.0)?;
    Ok(DuhamelReport {
        t: t_eval,
        boundaries: idx.iter().map(|&i| snaps[i].time()).collect(),
        linear,
        pieces,
        residual,
        relative_residual: if scale > 0.0 { residual / scale } else { residual },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayedBump {
    /// Largest interior local maximum inside the peak window, if any.
    pub peak: Option<(f64, f64)>,
    pub baseline_median: f64,
    /// `peak / baseline_median` (0 without a peak).
    pub ratio: f64,
}

/// Looks for a local maximum of `series` inside `peak_window` and compares it
/// with the median of the values in `baseline_window`.
pub fn delayed_bump(series: &[(f64, f64)], peak_window: (f64, f64), baseline_window: (f64, f64)) -> Result<DelayedBump> {
    let mut baseline: Vec<f64> = series
        .iter()
        .filter(|(t, _)| *t >= baseline_window.0 && *t <= baseline_window.1)
        .map(|&(_, y)| y)
        .collect();
    if baseline.is_empty() {
        return Err(Error::Observe(format!(
            "no samples in the baseline window [{}, {}]",
            baseline_window.0, baseline_window.1
        )));
    }
    baseline.sort_by(f64::total_cmp);
    let n = baseline.len();
    let median = if n % 2 == 1 {
        baseline[n / 2]
    } else {
        0.5 * (baseline[n / 2 - 1] + baseline[n / 2])
    };
    let peak = (1..series.len().saturating_sub(1))
        .filter(|&i| series[i].0 >= peak_window.0 && series[i].0 <= peak_window.1)
        .filter(|&i| series[i].1 >= series[i - 1].1 && series[i].1 >= series[i + 1].1)
        .map(|i| series[i])
        .fold(None::<(f64, f64)>, |best, p| match best {
            Some(b) if b.1 >= p.1 => Some(b),
            _ => Some(p),
        });
    let ratio = match peak {
        Some((_, y)) if median > 0.0 => y / median,
        Some(_) => f64::INFINITY,
        None => 0.0,
    };
    Ok(DelayedBump {
        peak,
        baseline_median: median,
        ratio,
    })
}
