//! Acceptance criteria 1-12. Each test prints one PASS/FAIL line to stdout
//! (bypassing the harness capture) and then asserts.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nlsdecay::verify::{run_suite, Bound, Check, SuiteReport, DEFAULT_SEED};

struct Timed {
    report: SuiteReport,
    elapsed: Duration,
}

fn timed(name: &str) -> Timed {
    let start = Instant::now();
    let report = run_suite(name, DEFAULT_SEED).unwrap_or_else(|e| panic!("suite {name}: {e}"));
    Timed {
        report,
        elapsed: start.elapsed(),
    }
}

/// Criteria 6 and 7 share one run.
fn scattering() -> &'static Timed {
    static CELL: OnceLock<Timed> = OnceLock::new();
    CELL.get_or_init(|| timed("scattering-rate"))
}

fn pick(report: &SuiteReport, name: &str) -> Check {
    report
        .get(name)
        .unwrap_or_else(|| panic!("suite {} has no check {name}", report.suite))
        .clone()
}

fn extra(name: &str, value: f64, bound: Bound) -> Check {
    let passed = match bound {
        Bound::AtMost(hi) => value <= hi,
        Bound::AtLeast(lo) => value >= lo,
        Bound::Between(lo, hi) => value >= lo && value <= hi,
    };
    Check {
        name: name.into(),
        value,
        bound,
        passed,
    }
}

fn describe(c: &Check) -> String {
    let bound = match c.bound {
        Bound::AtMost(hi) => format!("<= {hi:e}"),
        Bound::AtLeast(lo) => format!(">= {lo:e}"),
        Bound::Between(lo, hi) => format!("in [{lo}, {hi}]"),
    };
    format!("{}={:.6e} {bound}", c.name, c.value)
}

fn criterion(number: u32, title: &str, checks: &[Check]) {
    criterion_with(number, title, checks, &[]);
}

/// `info` values are printed with the line but not judged.
fn criterion_with(number: u32, title: &str, checks: &[Check], info: &[(&str, f64)]) {
    let ok = checks.iter().all(|c| c.passed);
    let mut detail: Vec<String> = checks.iter().map(describe).collect();
    detail.extend(info.iter().map(|(k, v)| format!("{k}={v:.6e}")));
    let line = format!(
        "\ncriterion {number:>2} {:<4} {title}: {}\n",
        if ok { "PASS" } else { "FAIL" },
        detail.join("; ")
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "{}", line.trim_end());
}

#[test]
fn c01_conservation() {
    let t = timed("conservation");
    criterion(
        1,
        "conservation",
        &[
            pick(&t.report, "mass_drift"),
            pick(&t.report, "energy_drift"),
            extra("runtime_s", t.elapsed.as_secs_f64(), Bound::AtMost(120.0)),
        ],
    );
}

#[test]
fn c02_linear_propagator_oracle() {
    let t = timed("propagator");
    criterion(2, "linear propagator", &[pick(&t.report, "peak_relative_error")]);
}

#[test]
fn c03_dispersive_exponent() {
    let t = timed("dispersive");
    criterion(3, "dispersive decay", &[pick(&t.report, "linf_exponent")]);
}

#[test]
fn c04_refocusing() {
    let t = timed("refocusing");
    criterion(
        4,
        "single-bubble refocusing",
        &[
            pick(&t.report, "scaled_peak_spread"),
            extra("runtime_s", t.elapsed.as_secs_f64(), Bound::AtMost(600.0)),
        ],
    );
}

#[test]
fn c05_interpolated_decay() {
    let t = timed("interpolated-decay");
    criterion(
        5,
        "interpolated decay",
        &[pick(&t.report, "l4_exponent"), pick(&t.report, "linf_exponent")],
    );
}

#[test]
fn c06_convergence_rate() {
    let r = &scattering().report;
    criterion_with(
        6,
        "convergence rate",
        &[pick(r, "convergence_exponent")],
        &[("cauchy_gap", r.metrics["cauchy_gap"])],
    );
}

#[test]
fn c07_tail_rate() {
    let r = &scattering().report;
    criterion(7, "tail rate", &[pick(r, "tail_increases"), pick(r, "tail_exponent")]);
}

#[test]
fn c08_delayed_bump() {
    let t = timed("delayed-bump");
    criterion_with(
        8,
        "delayed bump",
        &[pick(&t.report, "bump_ratio"), pick(&t.report, "sup_weighted_argmax")],
        &[("baseline_median", t.report.metrics["baseline_median"])],
    );
}

#[test]
fn c09_interpolation_inequality() {
    let a = timed("interpolation").report;
    let b = timed("interpolation").report;
    let same = if a.to_json() == b.to_json() { 1.0 } else { 0.0 };
    criterion(
        9,
        "interpolation inequality",
        &[
            pick(&a, "violations_beyond_tolerance"),
            extra("worst_ratio", a.metrics["worst_ratio"], Bound::AtMost(1.1)),
            extra("deterministic", same, Bound::AtLeast(1.0)),
        ],
    );
}

#[test]
fn c10_duhamel_reconstruction() {
    let t = timed("duhamel");
    criterion(
        10,
        "Duhamel reconstruction",
        &[
            pick(&t.report, "relative_residual_stride_0.05"),
            pick(&t.report, "residual_ratio_on_halving"),
        ],
    );
}

#[test]
fn c11_rate_fitter_and_determinism() {
    let a = timed("ratefit").report;
    let b = timed("ratefit").report;
    // `verify` prints exactly this JSON; the CLI tests also diff the binary's stdout.
    let identical = a.to_json() == b.to_json()
        && timed("interpolation").report.to_json() == timed("interpolation").report.to_json();
    criterion(
        11,
        "rate fitter and determinism",
        &[
            pick(&a, "exponent_error"),
            pick(&a, "exponent_error_after_text_round_trip"),
            extra("verify_byte_identical", f64::from(u8::from(identical)), Bound::AtLeast(1.0)),
        ],
    );
}

#[test]
fn c12_solver_order() {
    let t = timed("order");
    criterion(12, "Strang order", &[pick(&t.report, "self_convergence_ratio")]);
}
