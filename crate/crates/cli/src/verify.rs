//! Built-in verification suites. Each returns a deterministic report; no
//! timings or other run-dependent values are recorded.

use std::collections::BTreeMap;

use nlsdecay_core::fields::{self, interpolation_check};
use nlsdecay_core::observe::{self, NormKind, ScatterReport};
use nlsdecay_core::profiles::{build_profile, make_base};
use nlsdecay_core::propagate::free_trajectory;
use nlsdecay_core::ratefit::{self, RateTarget};
use nlsdecay_core::{
    evolve, make_geometry, BaseProfile, Complex64, Field, Geometry, Mode, ProfileSpec, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::output::format_float;

pub const SUITES: [&str; 11] = [
    "conservation",
    "propagator",
    "dispersive",
    "refocusing",
    "interpolated-decay",
    "scattering-rate",
    "delayed-bump",
    "interpolation",
    "duhamel",
    "ratefit",
    "order",
];

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Between(f64, f64),
}

impl Bound {
    fn admits(self, v: f64) -> bool {
        match self {
            Bound::AtMost(hi) => v <= hi,
            Bound::AtLeast(lo) => v >= lo,
            Bound::Between(lo, hi) => v >= lo && v <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// `null` in JSON when the quantity could not be measured.
    pub value: f64,
    pub bound: Bound,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        SuiteReport {
            suite: suite.into(),
            passed: true,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, value: f64, bound: Bound) {
        let passed = bound.admits(value);
        self.passed &= passed;
        self.checks.push(Check {
            name: name.into(),
            value,
            bound,
            passed,
        });
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    match name {
        "conservation" => conservation(),
        "propagator" => propagator(),
        "dispersive" => dispersive(),
        "refocusing" => refocusing(),
        "interpolated-decay" => interpolated_decay(),
        "scattering-rate" => scattering_rate(),
        "delayed-bump" => delayed_bump(),
        "interpolation" => Ok(interpolation(seed, 1000)),
        "duhamel" => duhamel(),
        "ratefit" => Ok(ratefit_oracle()),
        "order" => order(),
        _ => Err(CliError::UnknownSuite {
            name: name.into(),
            available: SUITES.join(", "),
        }),
    }
}

fn radial(n: usize, radius: f64) -> Geometry {
    make_geometry(1, &[n], &[radius], Mode::Radial3d).expect("suite geometry is valid")
}

fn gaussian(amplitude: f64) -> BaseProfile {
    BaseProfile::Gaussian { amplitude, width: 1.0 }
}

/// The two-bubble datum with `c = {1, 1/4}`, `a = {10, 100}`.
fn two_bubbles(g: &Geometry) -> Result<Field> {
    Ok(build_profile(&ProfileSpec::default_bubbles(gaussian(1.0), 2), g)?)
}

fn solver(dt: f64, t_end: f64, snapshot_stride: usize) -> SolverConfig {
    SolverConfig {
        dt,
        t_end,
        snapshot_stride,
        conservation_stride: 100,
        ..SolverConfig::default()
    }
}

fn conservation() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("conservation");
    let g = radial(4096, 200.0);
    let cfg = SolverConfig {
        conservation_stride: 1,
        ..solver(0.005, 50.0, 1000)
    };
    let traj = evolve(&two_bubbles(&g)?, &cfg)?;
    r.check("mass_drift", traj.mass_drift(), Bound::AtMost(1e-10));
    r.check("energy_drift", traj.energy_drift(), Bound::AtMost(1e-6));
    r.metric("mass_excursion", traj.mass_excursion());
    r.metric("energy_excursion", traj.energy_excursion());
    r.metric("mass", fields::mass(traj.first()));
    r.metric("energy", fields::energy(traj.first()));
    r.notes.push("drift compares t_end with t = 0; excursion is the largest deviation over all steps".into());
    Ok(r)
}

/// Free evolution of the unit Gaussian sampled every 0.1 on `[0, 40]`.
fn free_gaussian_peaks() -> Result<Vec<(f64, f64)>> {
    let g = radial(4096, 400.0);
    let phi = make_base(&gaussian(1.0), &g)?;
    let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.1).collect();
    let traj = free_trajectory(&phi, &times)?;
    Ok(traj.snapshots().iter().map(|f| (f.time(), fields::norm_linf(f))).collect())
}

fn propagator() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("propagator");
    let peaks = free_gaussian_peaks()?;
    let (worst_t, worst) = peaks
        .iter()
        .filter(|(t, _)| *t <= 20.0 + 1e-9)
        .map(|&(t, peak)| {
            let exact = (1.0 + 4.0 * t * t).powf(-0.75);
            (t, (peak - exact).abs() / exact)
        })
        .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    r.check("peak_relative_error", worst, Bound::AtMost(1e-5));
    r.metric("worst_time", worst_t);
    Ok(r)
}

fn dispersive() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("dispersive");
    let fit = ratefit::fit_power_law(&free_gaussian_peaks()?, (5.0, 40.0))?;
    r.check("linf_exponent", fit.exponent, Bound::Between(-1.55, -1.45));
    r.metric("stderr_exponent", fit.stderr_exponent);
    r.metric("residual_rms", fit.residual_rms);
    Ok(r)
}

fn refocusing() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("refocusing");
    let delays = [4.0, 8.0, 16.0, 32.0];
    let scaled = delays
        .par_iter()
        .map(|&a| {
            let g = radial(4096, 400.0);
            let u0 = build_profile(&ProfileSpec::single(gaussian(0.5), 1.0, a), &g)?;
            let steps = (2.0 * a / 0.005).round() as usize;
            let traj = evolve(&u0, &solver(0.005, 2.0 * a, steps))?;
            Ok(a.powf(1.5) * fields::norm_linf(traj.last()))
        })
        .collect::<Result<Vec<f64>>>()?;
    for (a, s) in delays.iter().zip(&scaled) {
        r.metric(&format!("scaled_peak_a{a}"), *s);
    }
    let max = scaled.iter().copied().fold(f64::MIN, f64::max);
    let min = scaled.iter().copied().fold(f64::MAX, f64::min);
    r.check("scaled_peak_spread", max / min, Bound::AtMost(2.0));
    Ok(r)
}

fn interpolated_decay() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("interpolated-decay");
    let g = radial(4096, 400.0);
    let u0 = build_profile(&ProfileSpec::single(gaussian(1.0), 1.0, 10.0), &g)?;
    let traj = evolve(&u0, &solver(0.005, 50.0, 20))?;
    let series = observe::measure(&traj, &[NormKind::L4, NormKind::Linf])?;
    let window = (20.0, 50.0);
    let l4 = ratefit::fit_power_law(&series.column("l4").unwrap(), window)?;
    let linf = ratefit::fit_power_law(&series.column("linf").unwrap(), window)?;
    r.check("l4_exponent", l4.exponent, Bound::AtMost(-0.75 + 0.1));
    r.check("linf_exponent", linf.exponent, Bound::AtMost(-1.5 + 0.1));
    Ok(r)
}

fn scattering_rate() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("scattering-rate");
    let g = radial(8192, 800.0);
    let u0 = build_profile(&ProfileSpec::single(gaussian(0.5), 1.0, 0.0), &g)?;
    let traj = evolve(&u0, &solver(0.005, 200.0, 20))?;
    let s_values: Vec<f64> = (10..=100).map(f64::from).collect();
    let report = ScatterReport::build(&traj, 150.0, 200.0, &s_values)?;

    let set = ratefit::SeriesSet::from_reports(Some(&report), None);
    let targets = [
        RateTarget {
            series: "convergence".into(),
            target: -2.0,
            tolerance: 1.0,
            window: (10.0, 100.0),
            floor_factor: 10.0,
        },
        RateTarget {
            series: "tail".into(),
            target: -0.7,
            tolerance: 0.2,
            window: (10.0, 100.0),
            floor_factor: 1.0,
        },
    ];
    let rates = ratefit::rate_report(&set, &targets)?;
    let exponent = |i: usize| rates.entries[i].fit.map_or(f64::NAN, |f| f.exponent);
    r.check("convergence_exponent", exponent(0), Bound::AtMost(-1.0));
    let increases = report.tail.windows(2).filter(|w| w[1].1 > w[0].1).count();
    r.check("tail_increases", increases as f64, Bound::AtMost(0.0));
    r.check("tail_exponent", exponent(1), Bound::AtMost(-0.5));
    r.metric("cauchy_gap", report.final_state.cauchy_gap);
    r.metric("convergence_points_below_floor", rates.entries[0].excluded_below_floor as f64);
    r.metric("strichartz_constant", report.strichartz_constant().unwrap_or(f64::NAN));
    Ok(r)
}

fn delayed_bump() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("delayed-bump");
    let g = radial(8192, 800.0);
    let traj = evolve(&two_bubbles(&g)?, &solver(0.005, 200.0, 20))?;
    let fs = observe::estimate_final_state(&traj, 150.0, 200.0)?;
    let d: Vec<(f64, f64)> = observe::convergence_distance(&traj, &fs, None)?
        .iter()
        .map(|p| (p.t, p.distance))
        .collect();
    let bump = observe::delayed_bump(&d, (95.0, 105.0), (20.0, 50.0))?;
    let positive: Vec<(f64, f64)> = d.iter().copied().filter(|p| p.0 > 0.0).collect();
    let sup = ratefit::sup_weighted(&positive, 0.1)?;

    r.check("bump_ratio", bump.ratio, Bound::AtLeast(3.0));
    r.check("sup_weighted_argmax", sup.argmax_t, Bound::Between(95.0, 105.0));
    r.metric("baseline_median", bump.baseline_median);
    r.metric("cauchy_gap", fs.cauchy_gap);
    r.metric("sup_weighted_value", sup.value);
    match bump.peak {
        Some((t, y)) => {
            r.metric("peak_time", t);
            r.metric("peak_value", y);
        }
        None => r.notes.push("no local maximum of d(t) in [95, 105]".into()),
    }
    Ok(r)
}

/// Random fields on a `16³` box of side `2π` with modes `|m_a| ≤ 4`.
fn interpolation(seed: u64, count: usize) -> SuiteReport {
    const N: usize = 16;
    const BAND: i64 = 4;
    let mut r = SuiteReport::new("interpolation");
    let l = 2.0 * std::f64::consts::PI;
    let g = make_geometry(3, &[N; 3], &[l; 3], Mode::PeriodicCartesian).expect("valid box");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..count).map(|_| rng.gen()).collect();
    let signed = |j: usize| if j <= N / 2 { j as i64 } else { j as i64 - N as i64 };

    let ratios: Vec<f64> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let coef = (0..N * N * N)
                .map(|i| {
                    let m = [signed(i / (N * N)), signed((i / N) % N), signed(i % N)];
                    if m.iter().all(|x| x.abs() <= BAND) && m.iter().any(|&x| x != 0) {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    } else {
                        Complex64::default()
                    }
                })
                .collect();
            let f = Field::from_spectral(g.clone(), 0.0, coef).expect("length matches");
            interpolation_check(&f).ratio()
        })
        .collect();

    let mut beyond = 0usize;
    for (i, &ratio) in ratios.iter().enumerate() {
        if ratio > 1.0 {
            r.notes.push(format!("field {i}: lhs/rhs = {}", format_float(ratio)));
        }
        if ratio > 1.1 {
            beyond += 1;
        }
    }
    r.check("violations_beyond_tolerance", beyond as f64, Bound::AtMost(0.0));
    r.metric("fields", count as f64);
    r.metric("seed", seed as f64);
    r.metric("worst_ratio", ratios.iter().copied().fold(0.0, f64::max));
    r.metric("strict_violations", ratios.iter().filter(|&&x| x > 1.0).count() as f64);
    r
}

fn duhamel() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("duhamel");
    let g = radial(4096, 200.0);
    let u0 = build_profile(&ProfileSpec::single(gaussian(1.0), 1.0, 10.0), &g)?;
    // Fine dt keeps splitting error well below the quadrature error.
    let traj = evolve(&u0, &solver(0.000625, 25.0, 40))?;
    let b = observe::focus_windows(0.0, 10.0, 2.0, 25.0)?;
    let fine = observe::duhamel_decompose(&traj, 25.0, &b)?;
    let coarse = observe::duhamel_decompose(&traj.thinned(2), 25.0, &b)?;
    r.check("relative_residual_stride_0.05", coarse.relative_residual, Bound::AtMost(1e-4));
    r.check("residual_ratio_on_halving", coarse.residual / fine.residual, Bound::AtLeast(3.5));
    r.metric("relative_residual_stride_0.025", fine.relative_residual);
    for (i, n) in coarse.piece_norms().iter().enumerate() {
        r.metric(&format!("piece_l2_{}", i + 1), *n);
    }
    Ok(r)
}

fn ratefit_oracle() -> SuiteReport {
    let mut r = SuiteReport::new("ratefit");
    let times: Vec<f64> = (0..200).map(|i| 10f64.powf(3.0 * i as f64 / 199.0)).collect();
    let mut worst_exp: f64 = 0.0;
    let mut worst_amp: f64 = 0.0;
    let mut worst_csv: f64 = 0.0;
    for &p in &[-2.0, -1.5, -0.7, -0.25, 0.5, 1.0] {
        for &c in &[1.0, 3.7, 1e-3] {
            let series: Vec<(f64, f64)> = times.iter().map(|&t| (t, c * t.powf(p))).collect();
            let fit = ratefit::fit_power_law(&series, (1.0, 1000.0)).expect("clean series");
            worst_exp = worst_exp.max((fit.exponent - p).abs());
            worst_amp = worst_amp.max((fit.log_amplitude - f64::ln(c)).abs());
            let text: Vec<(f64, f64)> = series
                .iter()
                .map(|&(t, y)| (format_float(t).parse().unwrap(), format_float(y).parse().unwrap()))
                .collect();
            let refit = ratefit::fit_power_law(&text, (1.0, 1000.0)).expect("clean series");
            worst_csv = worst_csv.max((refit.exponent - p).abs());
        }
    }
    r.check("exponent_error", worst_exp, Bound::AtMost(1e-12));
    r.check("log_amplitude_error", worst_amp, Bound::AtMost(1e-12));
    r.check("exponent_error_after_text_round_trip", worst_csv, Bound::AtMost(1e-12));
    r
}

fn order() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("order");
    let g = radial(4096, 200.0);
    let u0 = two_bubbles(&g)?;
    let finals = [0.005f64, 0.0025, 0.00125]
        .par_iter()
        .map(|&dt| {
            let steps = (50.0 / dt).round() as usize;
            let cfg = SolverConfig {
                conservation_stride: steps,
                ..solver(dt, 50.0, steps)
            };
            Ok(evolve(&u0, &cfg)?.last().clone())
        })
        .collect::<Result<Vec<Field>>>()?;
    let e1 = fields::norm_lp(&finals[0].checked_sub(&finals[1])?, 2.0)?;
    let e2 = fields::norm_lp(&finals[1].checked_sub(&finals[2])?, 2.0)?;
    r.check("self_convergence_ratio", e1 / e2, Bound::Between(3.5, 4.5));
    r.metric("error_dt", e1);
    r.metric("error_dt_half", e2);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        let err = run_suite("nope", 0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("conservation"));
    }

    #[test]
    fn ratefit_oracle_passes() {
        let r = ratefit_oracle();
        assert!(r.passed, "{}", r.to_json());
    }

    #[test]
    fn interpolation_is_seeded() {
        let a = interpolation(3, 20);
        let b = interpolation(3, 20);
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.passed);
        let c = interpolation(4, 20);
        assert_ne!(a.metrics["worst_ratio"], c.metrics["worst_ratio"]);
    }

    #[test]
    fn failed_check_fails_suite() {
        let mut r = SuiteReport::new("x");
        r.check("a", 1.0, Bound::AtMost(2.0));
        assert!(r.passed);
        r.check("b", f64::NAN, Bound::AtLeast(0.0));
        assert!(!r.passed);
        assert!(r.to_json().contains("null"));
    }
}
