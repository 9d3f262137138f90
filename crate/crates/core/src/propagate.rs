//! Free Schrödinger flow and the Strang split-step integrator for
//! `i∂ₜu + Δu = |u|²u`.
//!
//! Sign convention: `e^{itΔ}` multiplies mode `k` by `e^{-i|k|²t}`, so
//! `free_propagate(u₀, t)` solves `i∂ₜu + Δu = 0`. The nonlinear substep
//! `i∂ₜu = |u|²u` keeps `|u|` fixed pointwise and is integrated exactly as
//! `u ↦ u·e^{-i|u|²τ}`.

use log::warn;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, Field};
use crate::grid::{Geometry, Mode, SpectralWorkspace};

/// Applies `e^{itΔ}`. `t` may be negative.
pub fn free_propagate(field: &Field, t: f64) -> Field {
    let geometry = field.geometry().clone();
    let mut values = field.values().to_vec();
    let mut ws = geometry.workspace();
    ws.forward(&mut values).expect("field matches geometry");
    for (c, &k2) in values.iter_mut().zip(geometry.lattice().k_squared()) {
        *c *= Complex64::from_polar(1.0, -k2 * t);
    }
    ws.inverse(&mut values).expect("field matches geometry");
    Field::new(geometry, field.time() + t, values).expect("free flow keeps samples finite")
}

/// Snapshots of the free evolution of `initial` at the given absolute times.
pub fn free_trajectory(initial: &Field, times: &[f64]) -> Result<Trajectory> {
    let snapshots = times
        .iter()
        .map(|&t| free_propagate(initial, t - initial.time()))
        .collect();
    Trajectory::from_snapshots(snapshots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    #[default]
    Strang,
}

/// Smooth absorbing layer for radial runs: after every step the samples with
/// `r > start_radius` are damped by `exp(-strength·dt·ρ²)`, `ρ` the relative
/// depth into the layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sponge {
    pub start_radius: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub splitting: Splitting,
    /// Store every `snapshot_stride`-th step (the final step is always kept).
    pub snapshot_stride: usize,
    pub dealias: bool,
    pub sponge: Option<Sponge>,
    /// Record mass and energy every this many steps.
    pub conservation_stride: usize,
    /// Abort when `|M(t) - M(0)| / M(0)` exceeds this. Ignored with a sponge.
    pub max_mass_drift: Option<f64>,
    pub max_energy_drift: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 0.005,
            t_end: 50.0,
            splitting: Splitting::Strang,
            snapshot_stride: 20,
            dealias: true,
            sponge: None,
            conservation_stride: 1,
            max_mass_drift: Some(1e-8),
            max_energy_drift: Some(1e-2),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, geometry: &Geometry) -> Result<()> {
        let bad = |msg: String| Err(Error::SolverConfig(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if self.snapshot_stride == 0 || self.conservation_stride == 0 {
            return bad("snapshot_stride and conservation_stride must be >= 1".into());
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!(
                "t_end = {} is not an integer multiple of dt = {}",
                self.t_end, self.dt
            ));
        }
        if let Some(sponge) = self.sponge {
            if geometry.mode() != Mode::Radial3d {
                return bad("the sponge layer is only available in radial-3d mode".into());
            }
            let radius = geometry.lengths()[0];
            if !(sponge.start_radius >= 0.0 && sponge.start_radius < radius) {
                return bad(format!(
                    "sponge start radius {} must lie in [0, {radius})",
                    sponge.start_radius
                ));
            }
            if !(sponge.strength.is_finite() && sponge.strength >= 0.0) {
                return bad(format!("sponge strength must be >= 0, got {}", sponge.strength));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Reusable state for repeated Strang steps of fixed size.
pub struct Stepper {
    workspace: SpectralWorkspace,
    dt: f64,
    linear_phase: Vec<Complex64>,
    /// `1/r²` for radial geometries (the nonlinearity sees `|v/r|²`).
    inv_r2: Option<Vec<f64>>,
    sponge_damping: Option<Vec<f64>>,
}

impl Stepper {
    pub fn new(geometry: &Geometry, dt: f64, dealias: bool, sponge: Option<Sponge>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::SolverConfig(format!("dt must be positive, got {dt}")));
        }
        let lattice = geometry.lattice();
        let linear_phase = lattice
            .k_squared()
            .iter()
            .zip(lattice.dealias_mask())
            .map(|(&k2, &keep)| {
                if dealias && !keep {
                    Complex64::default()
                } else {
                    Complex64::from_polar(1.0, -k2 * dt)
                }
            })
            .collect();
        let inv_r2 = geometry
            .is_radial()
            .then(|| geometry.radii().iter().map(|r| 1.0 / (r * r)).collect());
        let sponge_damping = sponge.map(|s| {
            let outer = geometry.lengths()[0];
            geometry
                .radii()
                .iter()
                .map(|&r| {
                    if r <= s.start_radius {
                        1.0
                    } else {
                        let depth = (r - s.start_radius) / (outer - s.start_radius);
                        (-s.strength * dt * depth * depth).exp()
                    }
                })
                .collect()
        });
        Ok(Stepper {
            workspace: geometry.workspace(),
            dt,
            linear_phase,
            inv_r2,
            sponge_damping,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn nonlinear_half(&self, values: &mut [Complex64]) {
        let tau = 0.5 * self.dt;
        match &self.inv_r2 {
            None => {
                for u in values.iter_mut() {
                    *u *= Complex64::from_polar(1.0, -u.norm_sqr() * tau);
                }
            }
            Some(inv_r2) => {
                for (v, w) in values.iter_mut().zip(inv_r2) {
                    *v *= Complex64::from_polar(1.0, -v.norm_sqr() * w * tau);
                }
            }
        }
    }

    /// One Strang step: half nonlinear phase, full free flow, half nonlinear phase.
    pub fn step(&mut self, field: &mut Field) -> Result<()> {
        let values = field.values_mut();
        self.nonlinear_half(values);
        self.workspace.forward(values)?;
        for (c, p) in values.iter_mut().zip(&self.linear_phase) {
            *c *= p;
        }
        self.workspace.inverse(values)?;
        self.nonlinear_half(values);
        if let Some(damping) = &self.sponge_damping {
            for (v, d) in values.iter_mut().zip(damping) {
                *v *= d;
            }
        }
        field.set_time(field.time() + self.dt);
        field.check_finite()
    }

    fn energy(&mut self, field: &Field) -> f64 {
        let mut coef = field.values().to_vec();
        self.workspace.forward(&mut coef).expect("field matches geometry");
        fields::energy_with_coefficients(field, &coef)
    }
}

/// One Strang step of size `dt`.
pub fn nls_step(field: &Field, dt: f64, dealias: bool) -> Result<Field> {
    let mut stepper = Stepper::new(field.geometry(), dt, dealias, None)?;
    let mut out = field.clone();
    stepper.step(&mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationRecord {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    snapshots: Vec<Field>,
    conservation: Vec<ConservationRecord>,
    config: Option<SolverConfig>,
}

impl Trajectory {
    /// Wraps externally produced snapshots (synthetic data, loaded files).
    pub fn from_snapshots(snapshots: Vec<Field>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InvalidArgument("a trajectory needs at least one snapshot".into()));
        }
        for pair in snapshots.windows(2) {
            if !pair[0].geometry().same_as(pair[1].geometry()) {
                return Err(Error::GeometryMismatch);
            }
            if pair[1].time() <= pair[0].time() {
                return Err(Error::InvalidArgument(format!(
                    "snapshot times must increase strictly ({} then {})",
                    pair[0].time(),
                    pair[1].time()
                )));
            }
        }
        Ok(Trajectory {
            snapshots,
            conservation: Vec::new(),
            config: None,
        })
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn into_snapshots(self) -> Vec<Field> {
        self.snapshots
    }

    pub fn conservation(&self) -> &[ConservationRecord] {
        &self.conservation
    }

    pub fn config(&self) -> Option<&SolverConfig> {
        self.config.as_ref()
    }

    pub fn geometry(&self) -> &Geometry {
        self.snapshots[0].geometry()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Field::time).collect()
    }

    pub fn start_time(&self) -> f64 {
        self.snapshots[0].time()
    }

    pub fn end_time(&self) -> f64 {
        self.snapshots[self.snapshots.len() - 1].time()
    }

    pub fn first(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Field {
        &self.snapshots[self.snapshots.len() - 1]
    }

    pub fn sponge_active(&self) -> bool {
        self.config.as_ref().is_some_and(|c| c.sponge.is_some())
    }

    /// Index of the snapshot whose time is within a relative `1e-9` of `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * (self.end_time().abs().max(1.0));
        let i = self.snapshots.partition_point(|f| f.time() < t - tol);
        (i < self.snapshots.len() && (self.snapshots[i].time() - t).abs() <= tol).then_some(i)
    }

    pub fn at(&self, t: f64) -> Option<&Field> {
        self.index_of(t).map(|i| &self.snapshots[i])
    }

    /// Keeps every `factor`-th snapshot (the first is always kept).
    pub fn thinned(&self, factor: usize) -> Trajectory {
        let factor = factor.max(1);
        Trajectory {
            snapshots: self.snapshots.iter().step_by(factor).cloned().collect(),
            conservation: self.conservation.clone(),
            config: self.config.clone(),
        }
    }

    /// `|M(T) − M(0)| / M(0)` between the first and last logged records.
    pub fn mass_drift(&self) -> f64 {
        end_drift(self.conservation.iter().map(|r| r.mass))
    }

    pub fn energy_drift(&self) -> f64 {
        end_drift(self.conservation.iter().map(|r| r.energy))
    }

    /// Largest relative deviation of the logged mass from its initial value.
    pub fn mass_excursion(&self) -> f64 {
        max_excursion(self.conservation.iter().map(|r| r.mass))
    }

    pub fn energy_excursion(&self) -> f64 {
        max_excursion(self.conservation.iter().map(|r| r.energy))
    }
}

fn end_drift(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    match (v.first(), v.last()) {
        (Some(&a), Some(&b)) => (b - a).abs() / a.abs().max(f64::MIN_POSITIVE),
        _ => 0.0,
    }
}

fn max_excursion(mut values: impl Iterator<Item = f64>) -> f64 {
    let Some(first) = values.next() else {
        return 0.0;
    };
    let scale = first.abs().max(f64::MIN_POSITIVE);
    values.map(|v| (v - first).abs() / scale).fold(0.0, f64::max)
}

/// Runs the split-step scheme from `initial` to `initial.time() + t_end`.
pub fn evolve(initial: &Field, config: &SolverConfig) -> Result<Trajectory> {
    let geometry = initial.geometry().clone();
    config.validate(&geometry)?;
    initial.check_finite()?;
    let steps = config.steps();
    let t0 = initial.time();
    let mut stepper = Stepper::new(&geometry, config.dt, config.dealias, config.sponge)?;

    let mut state = initial.clone();
    let mass0 = fields::mass(&state);
    let energy0 = stepper.energy(&state);
    let mut conservation = vec![ConservationRecord {
        step: 0,
        time: t0,
        mass: mass0,
        energy: energy0,
    }];
    let mut snapshots = vec![state.clone()];
    if config.sponge.is_some() {
        warn!("sponge layer active: mass is not conserved in this run");
    }

    for step in 1..=steps {
        stepper.step(&mut state)?;
        let time = t0 + step as f64 * config.dt;
        state.set_time(time);

        if step % config.conservation_stride == 0 || step == steps {
            let mass = fields::mass(&state);
            let energy = stepper.energy(&state);
            if config.sponge.is_none() {
                if let Some(limit) = config.max_mass_drift {
                    let drift = (mass - mass0).abs() / mass0.max(f64::MIN_POSITIVE);
                    if drift > limit {
                        return Err(Error::NumericAbort {
                            time,
                            reason: format!("relative mass drift {drift:.3e} exceeds {limit:.3e}"),
                        });
                    }
                }
                if let Some(limit) = config.max_energy_drift {
                    let drift = (energy - energy0).abs() / energy0.abs().max(f64::MIN_POSITIVE);
                    if drift > limit {
                        return Err(Error::NumericAbort {
                            time,
                            reason: format!("relative energy drift {drift:.3e} exceeds {limit:.3e}"),
                        });
                    }
                }
            }
            conservation.push(ConservationRecord {
                step,
                time,
                mass,
                energy,
            });
        }
        if step % config.snapshot_stride == 0 || step == steps {
            snapshots.push(state.clone());
        }
    }

    Ok(Trajectory {
        snapshots,
        conservation,
        config: Some(config.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{norm_linf, norm_lp, norm_sobolev};
    use crate::grid::make_geometry;

    fn rel_diff(a: &Field, b: &Field) -> f64 {
        let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.values().iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    fn gaussian(geometry: Geometry, amp: f64) -> Field {
        Field::from_fn(geometry, 0.0, |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            Complex64::from(amp * (-r2 / 2.0).exp())
        })
        .unwrap()
    }

    fn radial() -> Geometry {
        make_geometry(1, &[2048], &[100.0], Mode::Radial3d).unwrap()
    }

    fn periodic1d() -> Geometry {
        make_geometry(1, &[256], &[40.0], Mode::PeriodicCartesian).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let f = gaussian(radial(), 1.0);
        assert!(rel_diff(&free_propagate(&f, 0.0), &f) < 1e-15);
    }

    #[test]
    fn gaussian_peak_decays_in_closed_form() {
        // (σ⁴/(σ⁴+4t²))^{d/4}, σ = 1, d = 3
        let f = gaussian(radial(), 1.0);
        for t in [0.5f64, 2.0, 10.0] {
            let expected = (1.0 + 4.0 * t * t).powf(-0.75);
            let got = norm_linf(&free_propagate(&f, t));
            assert!((got - expected).abs() / expected < 1e-6, "t={t}: {got} vs {expected}");
        }
        assert!((401.0f64.powf(-0.75) - 0.0111594).abs() < 5e-7);
    }

    #[test]
    fn group_law_and_unitarity() {
        for g in [radial(), periodic1d(), make_geometry(2, &[32, 32], &[20.0, 20.0], Mode::PeriodicCartesian).unwrap()] {
            let f = gaussian(g, 0.8);
            let (s, t) = (1.3, -4.1);
            let a = free_propagate(&free_propagate(&f, s), t);
            let b = free_propagate(&f, s + t);
            assert!(rel_diff(&a, &b) < 1e-12);
            let back = free_propagate(&free_propagate(&f, 7.0), -7.0);
            assert!(rel_diff(&back, &f) < 1e-12);
            let moved = free_propagate(&f, 3.0);
            for s in [0.0, 0.5, 1.0, 2.0] {
                let (n0, n1) = (norm_sobolev(&f, s, true).unwrap(), norm_sobolev(&moved, s, true).unwrap());
                assert!((n0 - n1).abs() / n0 < 1e-12);
            }
        }
    }

    #[test]
    fn step_of_zero_field_is_zero() {
        let f = Field::zeros(radial(), 0.0);
        let out = nls_step(&f, 0.01, true).unwrap();
        assert!(out.values().iter().all(|z| z.norm() == 0.0));
        assert!((out.time() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn constant_data_follows_exact_ode() {
        let g = make_geometry(2, &[16, 16], &[5.0, 5.0], Mode::PeriodicCartesian).unwrap();
        let c = Complex64::new(0.6, -0.3);
        let f = Field::from_fn(g, 0.0, |_| c).unwrap();
        let dt = 0.37;
        let out = nls_step(&f, dt, true).unwrap();
        let exact = c * Complex64::from_polar(1.0, -c.norm_sqr() * dt);
        assert!(out.values().iter().all(|z| (z - exact).norm() < 1e-14));
    }

    #[test]
    fn step_preserves_mass() {
        for g in [radial(), periodic1d()] {
            let f = free_propagate(&gaussian(g, 1.5), -3.0);
            let out = nls_step(&f, 0.01, false).unwrap();
            let (m0, m1) = (norm_lp(&f, 2.0).unwrap(), norm_lp(&out, 2.0).unwrap());
            assert!((m0 - m1).abs() / m0 < 1e-12);
        }
    }

    #[test]
    fn zero_horizon_returns_input() {
        let f = gaussian(radial(), 1.0);
        let cfg = SolverConfig {
            t_end: 0.0,
            ..SolverConfig::default()
        };
        let traj = evolve(&f, &cfg).unwrap();
        assert_eq!(traj.snapshots().len(), 1);
        assert!(rel_diff(traj.first(), &f) == 0.0);
    }

    #[test]
    fn invalid_configs() {
        let g = periodic1d();
        let bad = [
            SolverConfig { dt: 0.0, ..Default::default() },
            SolverConfig { t_end: -1.0, ..Default::default() },
            SolverConfig { snapshot_stride: 0, ..Default::default() },
            SolverConfig { dt: 0.3, t_end: 1.0, ..Default::default() },
            SolverConfig {
                sponge: Some(Sponge { start_radius: 1.0, strength: 1.0 }),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate(&g).is_err(), "{cfg:?}");
        }
        let too_far = SolverConfig {
            sponge: Some(Sponge { start_radius: 150.0, strength: 1.0 }),
            ..Default::default()
        };
        assert!(too_far.validate(&radial()).is_err());
    }

    #[test]
    fn small_data_stays_close_to_free_flow() {
        let g = radial();
        let t_end = 4.0;
        for amp in [0.02, 0.04] {
            let f = gaussian(g.clone(), amp);
            let cfg = SolverConfig { t_end, dt: 0.01, snapshot_stride: 100, ..Default::default() };
            let traj = evolve(&f, &cfg).unwrap();
            let free = free_propagate(&f, t_end);
            let gap = norm_lp(&traj.last().checked_sub(&free).unwrap(), 2.0).unwrap();
            // O(A³ t): the cubic term has L² size ≤ A³ ‖e^{-r²}·e^{-r²/2}‖₂ per unit time
            assert!(gap <= amp.powi(3) * t_end, "amp={amp}: {gap}");
            assert!(gap > 0.0);
        }
    }

    #[test]
    fn defocusing_peak_never_exceeds_free_peak() {
        let g = radial();
        let f = free_propagate(&gaussian(g, 0.3), -5.0);
        let cfg = SolverConfig { t_end: 10.0, dt: 0.01, snapshot_stride: 10, ..Default::default() };
        let traj = evolve(&f, &cfg).unwrap();
        for snap in traj.snapshots() {
            let free = free_propagate(&f, snap.time() - f.time());
            assert!(norm_linf(snap) <= 1.05 * norm_linf(&free));
        }
    }

    #[test]
    fn strang_is_second_order() {
        let g = periodic1d();
        let f = gaussian(g, 1.0);
        let t_end = 2.0;
        let run = |dt: f64| {
            let cfg = SolverConfig { t_end, dt, snapshot_stride: 100_000, ..Default::default() };
            evolve(&f, &cfg).unwrap().last().clone()
        };
        let reference = run(0.02 / 32.0);
        let e1 = rel_diff(&run(0.02), &reference);
        let e2 = rel_diff(&run(0.01), &reference);
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn conservation_log_and_trajectory_shape() {
        let f = free_propagate(&gaussian(radial(), 1.0), -2.0).with_time(0.0);
        let cfg = SolverConfig { t_end: 4.0, dt: 0.01, snapshot_stride: 50, ..Default::default() };
        let traj = evolve(&f, &cfg).unwrap();
        assert_eq!(traj.conservation().len(), 401);
        assert_eq!(traj.snapshots().len(), 9);
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.start_time(), 0.0);
        assert!((traj.end_time() - 4.0).abs() < 1e-12);
        assert!(traj.mass_drift() < 1e-12);
        assert!(traj.energy_drift() < 1e-4);
        assert!(traj.mass_excursion() < 1e-12);
        assert!(traj.energy_excursion() < 1e-4);
        assert!(traj.energy_drift() <= traj.energy_excursion());
        assert_eq!(traj.index_of(2.0), Some(4));
        assert_eq!(traj.index_of(2.01), None);
    }

    #[test]
    fn sponge_absorbs_outgoing_mass() {
        let g = make_geometry(1, &[512], &[30.0], Mode::Radial3d).unwrap();
        let f = gaussian(g, 0.5);
        let cfg = SolverConfig {
            t_end: 20.0,
            dt: 0.01,
            sponge: Some(Sponge { start_radius: 20.0, strength: 5.0 }),
            max_mass_drift: Some(1e-10),
            ..Default::default()
        };
        let traj = evolve(&f, &cfg).unwrap();
        assert!(traj.sponge_active());
        let (m0, m1) = (fields::mass(traj.first()), fields::mass(traj.last()));
        assert!(m1 < 0.5 * m0, "{m0} -> {m1}");
    }
}
