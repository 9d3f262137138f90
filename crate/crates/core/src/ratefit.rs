//! Power-law fits on measured series and one-sided comparisons against
//! target decay exponents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observe::{ObservableSeries, ScatterReport};

/// Values at or below this are treated as numerically zero by `rate_report`.
pub const ABSOLUTE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub log_amplitude: f64,
    pub residual_rms: f64,
    pub window: (f64, f64),
    pub point_count: usize,
    pub stderr_exponent: f64,
}

/// Least squares for `log y = log A + p·log t` over the samples with
/// `t ∈ [window.0, window.1]`.
pub fn fit_power_law(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "window [{}, {}] holds {} points, need at least 3",
            window.0,
            window.1,
            points.len()
        )));
    }
    if let Some(&(t, y)) = points.iter().find(|&&(t, y)| !(t > 0.0 && y > 0.0 && t.is_finite() && y.is_finite())) {
        return Err(Error::Fit(format!("cannot fit a power law through ({t}, {y})")));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(t, y)| (t.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all sample times coincide".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let exponent = sxy / sxx;
    let log_amplitude = mean_y - exponent * mean_x;
    let ssr: f64 = logs
        .iter()
        .map(|p| (p.1 - log_amplitude - exponent * p.0).powi(2))
        .sum();
    Ok(RateFit {
        exponent,
        log_amplitude,
        residual_rms: (ssr / n).sqrt(),
        window: (points[0].0, points[points.len() - 1].0),
        point_count: points.len(),
        stderr_exponent: (ssr / (n - 2.0) / sxx).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupWeighted {
    pub value: f64,
    pub argmax_t: f64,
}

/// `max tᵋ·y(t)` over the samples; ties go to the earliest `t`.
pub fn sup_weighted(series: &[(f64, f64)], epsilon: f64) -> Result<SupWeighted> {
    if series.is_empty() {
        return Err(Error::Fit("sup over an empty series".into()));
    }
    let mut best: Option<SupWeighted> = None;
    for &(t, y) in series {
        if !(t > 0.0) {
            return Err(Error::Fit(format!("weighted sup needs t > 0, got {t}")));
        }
        let value = if epsilon == 0.0 { y } else { t.powf(epsilon) * y };
        if best.is_none_or(|b| value > b.value) {
            best = Some(SupWeighted { value, argmax_t: t });
        }
    }
    Ok(best.expect("series is nonempty"))
}

/// `-d(1/2 - 1/p)`: the free-flow `Lᵖ` decay exponent in dimension `d`.
pub fn lp_decay_exponent(p: f64, dimension: usize) -> f64 {
    -(dimension as f64) * (0.5 - 1.0 / p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTarget {
    /// Series name: an observable column, `convergence` or `tail`.
    pub series: String,
    pub target: f64,
    pub tolerance: f64,
    pub window: (f64, f64),
    /// Points below `floor_factor × floor` are dropped before fitting.
    #[serde(default = "one")]
    pub floor_factor: f64,
}

fn one() -> f64 {
    1.0
}

/// Targets for the `L^∞`, `L⁴`, convergence and tail series on `window`.
pub fn default_targets(window: (f64, f64)) -> Vec<RateTarget> {
    [
        ("linf", lp_decay_exponent(f64::INFINITY, 3), 0.1),
        ("l4", lp_decay_exponent(4.0, 3), 0.1),
        ("convergence", -2.0, 1.0),
        ("tail", -0.7, 0.2),
    ]
    .into_iter()
    .map(|(series, target, tolerance)| RateTarget {
        series: series.into(),
        target,
        tolerance,
        window,
        floor_factor: 1.0,
    })
    .collect()
}

/// Named series plus, where one exists, the resolution floor below which
/// their values are not trusted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesSet {
    pub series: BTreeMap<String, Vec<(f64, f64)>>,
    pub floors: BTreeMap<String, f64>,
}

impl SeriesSet {
    pub fn from_reports(scatter: Option<&ScatterReport>, observables: Option<&ObservableSeries>) -> Self {
        let mut set = SeriesSet::default();
        if let Some(obs) = observables {
            for name in &obs.columns {
                set.series.insert(name.clone(), obs.column(name).expect("column exists"));
            }
        }
        if let Some(sc) = scatter {
            set.insert_convergence(
                sc.convergence.iter().map(|p| (p.t, p.distance)).collect(),
                sc.final_state.cauchy_gap,
            );
            set.series.insert("tail".into(), sc.tail.clone());
        }
        set
    }

    pub fn insert_convergence(&mut self, series: Vec<(f64, f64)>, cauchy_gap: f64) {
        self.series.insert("convergence".into(), series);
        self.floors.insert("convergence".into(), cauchy_gap);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Pass,
    Fail,
    /// Too few points above the resolution floor to fit.
    BelowFloor,
    /// Fewer than three samples in the window at all.
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateComparison {
    pub target: RateTarget,
    pub fit: Option<RateFit>,
    pub status: FitStatus,
    pub excluded_below_floor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub entries: Vec<RateComparison>,
}

impl RateReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.status == FitStatus::Pass)
    }
}

/// Fits each target's series on its window and checks the one-sided bound
/// `exponent ≤ target + tolerance`.
pub fn rate_report(set: &SeriesSet, targets: &[RateTarget]) -> Result<RateReport> {
    let mut entries = Vec::with_capacity(targets.len());
    for target in targets {
        let series = set
            .series
            .get(&target.series)
            .ok_or_else(|| Error::Fit(format!("no series named {:?}", target.series)))?;
        let floor = (target.floor_factor * set.floors.get(&target.series).copied().unwrap_or(0.0)).max(ABSOLUTE_FLOOR);
        let in_window: Vec<(f64, f64)> = series
            .iter()
            .copied()
            .filter(|&(t, _)| t >= target.window.0 && t <= target.window.1)
            .collect();
        let kept: Vec<(f64, f64)> = in_window.iter().copied().filter(|&(_, y)| y >= floor).collect();
        let excluded = in_window.len() - kept.len();
        let (fit, status) = if kept.len() < 3 {
            let status = if excluded > 0 { FitStatus::BelowFloor } else { FitStatus::InsufficientData };
            (None, status)
        } else {
            let fit = fit_power_law(&kept, target.window)?;
            let ok = fit.exponent <= target.target + target.tolerance;
            (Some(fit), if ok { FitStatus::Pass } else { FitStatus::Fail })
        };
        entries.push(RateComparison {
            target: target.clone(),
            fit,
            status,
            excluded_below_floor: excluded,
        });
    }
    Ok(RateReport { entries })
}
