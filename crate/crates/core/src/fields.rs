//! The `Field` value type and the norms measured on it.
//!
//! Radial fields store `v = r·u`; every norm here is a norm of the
//! reconstructed three-dimensional `u`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{multi_indices, Geometry, Mode};

/// Lagrange weights at `r = 0` for an even quadratic-in-`r²` fit through the
/// first three staggered radii `h/2, 3h/2, 5h/2`.
const ORIGIN_WEIGHTS: [f64; 3] = [225.0 / 192.0, -25.0 / 128.0, 9.0 / 384.0];

/// Interpolation exponents as twenty-fifths: 2/5, 6/25, 9/25.
const INTERP_EXPONENTS_25: [u32; 3] = [10, 6, 9];
const _: () = assert!(
    INTERP_EXPONENTS_25[0] + INTERP_EXPONENTS_25[1] + INTERP_EXPONENTS_25[2] == 25,
    "interpolation exponents must sum to one"
);

#[derive(Debug, Clone)]
pub struct Field {
    geometry: Geometry,
    time: f64,
    values: Vec<Complex64>,
}

impl Field {
    /// Wraps raw stored samples (`v = r·u` in radial mode).
    pub fn new(geometry: Geometry, time: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::SizeMismatch {
                expected: geometry.len(),
                got: values.len(),
            });
        }
        let field = Field {
            geometry,
            time,
            values,
        };
        field.check_finite()?;
        Ok(field)
    }

    pub fn zeros(geometry: Geometry, time: f64) -> Self {
        let values = vec![Complex64::default(); geometry.len()];
        Field {
            geometry,
            time,
            values,
        }
    }

    /// Samples a physical profile `u(x)`. The closure receives the sample's
    /// coordinates (`[r]` in radial mode).
    pub fn from_fn(geometry: Geometry, time: f64, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let coords: Vec<Vec<f64>> = (0..geometry.dimension()).map(|a| geometry.coordinates(a)).collect();
        let values = match geometry.mode() {
            Mode::Radial3d => coords[0].iter().map(|&r| f(&[r]) * r).collect(),
            Mode::PeriodicCartesian => {
                let mut point = vec![0.0; geometry.dimension()];
                multi_indices(geometry.sizes())
                    .map(|idx| {
                        for (a, &j) in idx.iter().enumerate() {
                            point[a] = coords[a][j];
                        }
                        f(&point)
                    })
                    .collect()
            }
        };
        Field::new(geometry, time, values)
    }

    pub fn from_spectral(geometry: Geometry, time: f64, coefficients: Vec<Complex64>) -> Result<Self> {
        let mut values = coefficients;
        geometry.workspace().inverse(&mut values)?;
        Field::new(geometry, time, values)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Stored samples (`v = r·u` in radial mode).
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub(crate) fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    /// Samples of `u` itself.
    pub fn physical_values(&self) -> Vec<Complex64> {
        match self.geometry.mode() {
            Mode::PeriodicCartesian => self.values.clone(),
            Mode::Radial3d => self
                .values
                .iter()
                .zip(self.geometry.radii())
                .map(|(v, r)| v / r)
                .collect(),
        }
    }

    pub fn spectral(&self) -> Vec<Complex64> {
        let mut coef = self.values.clone();
        self.geometry
            .workspace()
            .forward(&mut coef)
            .expect("field length matches its geometry");
        coef
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NumericAbort {
                time: self.time,
                reason: format!("non-finite sample at index {i}"),
            });
        }
        Ok(())
    }

    fn ensure_compatible(&self, other: &Field) -> Result<()> {
        if self.geometry.same_as(&other.geometry) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }

    pub fn checked_add(&self, other: &Field) -> Result<Field> {
        self.ensure_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Field {
            geometry: self.geometry.clone(),
            time: self.time,
            values,
        })
    }

    pub fn checked_sub(&self, other: &Field) -> Result<Field> {
        self.ensure_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field {
            geometry: self.geometry.clone(),
            time: self.time,
            values,
        })
    }

    pub fn scaled(&self, factor: Complex64) -> Field {
        Field {
            geometry: self.geometry.clone(),
            time: self.time,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, factor: Complex64, other: &Field) -> Result<()> {
        self.ensure_compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Value of `u` at the origin. Radial fields extrapolate evenly in `r`
    /// from the three innermost nodes; periodic fields read the sample at the
    /// box centre.
    pub fn origin_value(&self) -> Complex64 {
        match self.geometry.mode() {
            Mode::Radial3d => {
                let radii = self.geometry.coordinates(0);
                (0..3)
                    .map(|i| self.values[i] / radii[i] * ORIGIN_WEIGHTS[i])
                    .sum()
            }
            Mode::PeriodicCartesian => {
                let sizes = self.geometry.sizes();
                let flat = sizes.iter().fold(0, |acc, &n| acc * n + n / 2);
                self.values[flat]
            }
        }
    }
}

fn quadrature_weights(geometry: &Geometry) -> QuadratureWeights {
    match geometry.mode() {
        Mode::PeriodicCartesian => {
            QuadratureWeights::Uniform((0..geometry.dimension()).map(|a| geometry.spacing(a)).product())
        }
        Mode::Radial3d => QuadratureWeights::Radial {
            radii: geometry.coordinates(0),
            h: geometry.spacing(0),
        },
    }
}

enum QuadratureWeights {
    Uniform(f64),
    Radial { radii: Vec<f64>, h: f64 },
}

/// `∫ |u|^p dx` by the grid's midpoint rule.
fn integral_abs_pow(field: &Field, p: f64) -> f64 {
    match quadrature_weights(field.geometry()) {
        QuadratureWeights::Uniform(dv) => dv * field.values().iter().map(|z| z.norm().powf(p)).sum::<f64>(),
        QuadratureWeights::Radial { radii, h } => {
            4.0 * PI
                * h
                * field
                    .values()
                    .iter()
                    .zip(&radii)
                    .map(|(v, r)| r * r * (v.norm() / r).powf(p))
                    .sum::<f64>()
        }
    }
}

pub fn norm_linf(field: &Field) -> f64 {
    let grid_max = match field.geometry().mode() {
        Mode::PeriodicCartesian => field.values().iter().map(|z| z.norm()).fold(0.0, f64::max),
        Mode::Radial3d => field
            .values()
            .iter()
            .zip(field.geometry().coordinates(0))
            .map(|(v, r)| v.norm() / r)
            .fold(0.0, f64::max),
    };
    match field.geometry().mode() {
        Mode::Radial3d => grid_max.max(field.origin_value().norm()),
        Mode::PeriodicCartesian => grid_max,
    }
}

/// `‖u‖_{L^p}` for `p ∈ [1, ∞]`.
pub fn norm_lp(field: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("L^p exponent must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(norm_linf(field));
    }
    if p == 2.0 {
        return Ok(integral_abs_pow(field, 2.0).sqrt());
    }
    Ok(integral_abs_pow(field, p).powf(1.0 / p))
}

pub fn mass(field: &Field) -> f64 {
    integral_abs_pow(field, 2.0)
}

pub(crate) fn sobolev_from_coefficients(field: &Field, coef: &[Complex64], s: f64, homogeneous: bool) -> f64 {
    let lattice = field.geometry().lattice();
    let multiplier = lattice.power_multiplier(s);
    coef.iter()
        .zip(lattice.weights())
        .zip(multiplier)
        .map(|((c, w), m)| {
            let m = if homogeneous { m } else { 1.0 + m };
            w * m * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Homogeneous (`|k|^{2s}`) or inhomogeneous (`1 + |k|^{2s}`) Sobolev norm.
pub fn norm_sobolev(field: &Field, s: f64, homogeneous: bool) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::InvalidArgument(format!("Sobolev order must be >= 0, got {s}")));
    }
    Ok(sobolev_from_coefficients(field, &field.spectral(), s, homogeneous))
}

/// `½‖∇u‖₂² + ¼‖u‖₄⁴`.
pub fn energy(field: &Field) -> f64 {
    let grad = sobolev_from_coefficients(field, &field.spectral(), 1.0, true);
    0.5 * grad * grad + 0.25 * integral_abs_pow(field, 4.0)
}

/// Energy from precomputed coefficients; used by the stepper.
pub(crate) fn energy_with_coefficients(field: &Field, coef: &[Complex64]) -> f64 {
    let grad = sobolev_from_coefficients(field, coef, 1.0, true);
    0.5 * grad * grad + 0.25 * integral_abs_pow(field, 4.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub l1: f64,
    pub l2: f64,
    pub l4: f64,
    pub linf: f64,
    pub energy: f64,
    /// `(p, ‖u‖_{L^p})`
    pub lp: Vec<(f64, f64)>,
    /// `(s, ‖u‖_{Ḣ^s})`
    pub hdot: Vec<(f64, f64)>,
    /// `(s, ‖u‖_{H^s})`
    pub h_full: Vec<(f64, f64)>,
}

impl NormReport {
    pub fn compute(field: &Field, lp: &[f64], sobolev: &[f64]) -> Result<Self> {
        let coef = field.spectral();
        let mut hdot = Vec::with_capacity(sobolev.len());
        let mut h_full = Vec::with_capacity(sobolev.len());
        for &s in sobolev {
            if s.is_nan() || s < 0.0 {
                return Err(Error::InvalidArgument(format!("Sobolev order must be >= 0, got {s}")));
            }
            hdot.push((s, sobolev_from_coefficients(field, &coef, s, true)));
            h_full.push((s, sobolev_from_coefficients(field, &coef, s, false)));
        }
        let lp = lp
            .iter()
            .map(|&p| norm_lp(field, p).map(|v| (p, v)))
            .collect::<Result<Vec<_>>>()?;
        let l4 = norm_lp(field, 4.0)?;
        let grad = sobolev_from_coefficients(field, &coef, 1.0, true);
        Ok(NormReport {
            l1: norm_lp(field, 1.0)?,
            l2: norm_lp(field, 2.0)?,
            l4,
            linf: norm_linf(field),
            energy: 0.5 * grad * grad + 0.25 * l4.powi(4),
            lp,
            hdot,
            h_full,
        })
    }
}

/// Outcome of testing `‖f‖_∞ ≤ ‖f‖₂^{2/5} ‖∇f‖₂^{6/25} ‖f‖_{H⁴}^{9/25}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub l2: f64,
    pub grad_l2: f64,
    pub h4: f64,
    pub satisfied: bool,
}

impl InterpolationCheck {
    /// `lhs / rhs`; 0 for the zero field.
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }
}

pub fn interpolation_check(field: &Field) -> InterpolationCheck {
    let coef = field.spectral();
    let l2 = sobolev_from_coefficients(field, &coef, 0.0, true);
    let grad_l2 = sobolev_from_coefficients(field, &coef, 1.0, true);
    let h4 = sobolev_from_coefficients(field, &coef, 4.0, false);
    let [e1, e2, e3] = INTERP_EXPONENTS_25.map(|e| e as f64 / 25.0);
    let rhs = l2.powf(e1) * grad_l2.powf(e2) * h4.powf(e3);
    let lhs = norm_linf(field);
    InterpolationCheck {
        lhs,
        rhs,
        l2,
        grad_l2,
        h4,
        satisfied: lhs <= rhs * (1.0 + 1e-9),
    }
}
