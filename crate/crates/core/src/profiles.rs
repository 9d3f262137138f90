//! Initial data built from a base bump and backward-propagated bubbles
//! `cₙ·e^{-iaₙΔ}φ`, each of which refocuses into `cₙφ` at `t = aₙ`.

use log::warn;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::grid::Geometry;
use crate::propagate::free_propagate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseProfile {
    /// `amplitude·exp(-|x|²/(2·width²))`
    Gaussian { amplitude: f64, width: f64 },
}

impl Default for BaseProfile {
    fn default() -> Self {
        BaseProfile::Gaussian {
            amplitude: 1.0,
            width: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bubble {
    pub weight: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default)]
    pub base: BaseProfile,
    pub bubbles: Vec<Bubble>,
}

impl ProfileSpec {
    /// `count` bubbles with `cₙ = 1/n²`, `aₙ = 10ⁿ`, `n = 1..=count`.
    pub fn default_bubbles(base: BaseProfile, count: usize) -> Self {
        let bubbles = (1..=count)
            .map(|n| Bubble {
                weight: 1.0 / (n * n) as f64,
                delay: 10f64.powi(n as i32),
            })
            .collect();
        ProfileSpec { base, bubbles }
    }

    pub fn single(base: BaseProfile, weight: f64, delay: f64) -> Self {
        ProfileSpec {
            base,
            bubbles: vec![Bubble { weight, delay }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let BaseProfile::Gaussian { amplitude, width } = self.base;
        if !amplitude.is_finite() || !(width.is_finite() && width > 0.0) {
            return Err(Error::Profile(format!(
                "gaussian needs finite amplitude and positive width, got ({amplitude}, {width})"
            )));
        }
        for (i, b) in self.bubbles.iter().enumerate() {
            if !(b.weight.is_finite() && b.weight > 0.0) {
                return Err(Error::Profile(format!("bubble {}: weight must be > 0, got {}", i + 1, b.weight)));
            }
            if !(b.delay.is_finite() && b.delay >= 0.0) {
                return Err(Error::Profile(format!("bubble {}: delay must be >= 0, got {}", i + 1, b.delay)));
            }
        }
        if let Some(pair) = self.bubbles.windows(2).find(|p| p[1].delay <= p[0].delay) {
            return Err(Error::Profile(format!(
                "delays must increase strictly ({} then {})",
                pair[0].delay, pair[1].delay
            )));
        }
        Ok(())
    }

    pub fn max_delay(&self) -> f64 {
        self.bubbles.last().map_or(0.0, |b| b.delay)
    }
}

/// Samples the base bump at `t = 0`.
pub fn make_base(base: &BaseProfile, geometry: &Geometry) -> Result<Field> {
    let BaseProfile::Gaussian { amplitude, width } = *base;
    let spacing = geometry.min_spacing();
    if !(width >= 4.0 * spacing) {
        return Err(Error::Profile(format!(
            "gaussian width {width} is under-resolved (needs >= 4 x spacing = {})",
            4.0 * spacing
        )));
    }
    let extent = geometry.min_extent();
    if width > extent / 8.0 {
        return Err(Error::Profile(format!(
            "gaussian width {width} exceeds extent/8 = {}",
            extent / 8.0
        )));
    }
    if !amplitude.is_finite() {
        return Err(Error::Profile(format!("amplitude must be finite, got {amplitude}")));
    }
    let inv = 1.0 / (2.0 * width * width);
    Field::from_fn(geometry.clone(), 0.0, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        Complex64::from(amplitude * (-r2 * inv).exp())
    })
}

/// Radius reached by a Gaussian of width `σ` after free time `t`, taking
/// `3/σ` as the effective frequency cutoff and group speed `2|k|`.
pub fn spreading_radius(width: f64, t: f64) -> f64 {
    width + 2.0 * (3.0 / width) * t.abs()
}

/// Room available to a profile centred at the origin.
fn half_extent(geometry: &Geometry) -> f64 {
    if geometry.is_radial() {
        geometry.lengths()[0]
    } else {
        0.5 * geometry.min_extent()
    }
}

/// `weight · e^{-i·delay·Δ}φ`.
pub fn build_bubble(phi: &Field, weight: f64, delay: f64) -> Field {
    warn_if_spread_exceeds_box(phi.geometry(), estimate_width(phi), delay);
    let moved = if delay == 0.0 {
        phi.clone()
    } else {
        free_propagate(phi, -delay).with_time(phi.time())
    };
    moved.scaled(Complex64::from(weight))
}

fn warn_if_spread_exceeds_box(geometry: &Geometry, width: f64, delay: f64) {
    let reach = spreading_radius(width, delay);
    if reach > half_extent(geometry) {
        warn!(
            "bubble with delay {delay} spreads to radius {reach:.1}, beyond the box half-extent {:.1}",
            half_extent(geometry)
        );
    }
}

/// RMS width of `|u|²` divided by `sqrt(d/2)`, which is exactly `σ` for a
/// Gaussian `exp(-|x|²/(2σ²))`.
fn estimate_width(phi: &Field) -> f64 {
    let dim = phi.geometry().physical_dimension() as f64;
    let values = phi.physical_values();
    let (mut m0, mut m2) = (0.0, 0.0);
    if phi.geometry().is_radial() {
        for (u, r) in values.iter().zip(phi.geometry().radii()) {
            let w = u.norm_sqr() * r * r;
            m0 += w;
            m2 += w * r * r;
        }
    } else {
        let geometry = phi.geometry();
        let coords: Vec<Vec<f64>> = (0..geometry.dimension()).map(|a| geometry.coordinates(a)).collect();
        for (u, idx) in values.iter().zip(crate::grid::multi_indices(geometry.sizes())) {
            let r2: f64 = idx.iter().enumerate().map(|(a, &j)| coords[a][j].powi(2)).sum();
            m0 += u.norm_sqr();
            m2 += u.norm_sqr() * r2;
        }
    }
    if m0 == 0.0 {
        return 0.0;
    }
    (m2 / m0 / (dim / 2.0)).sqrt()
}

pub fn build_profile(spec: &ProfileSpec, geometry: &Geometry) -> Result<Field> {
    spec.validate()?;
    let phi = make_base(&spec.base, geometry)?;
    sum_bubbles(&phi, &spec.bubbles)
}

fn sum_bubbles(phi: &Field, bubbles: &[Bubble]) -> Result<Field> {
    let mut total = Field::zeros(phi.geometry().clone(), 0.0);
    for b in bubbles {
        total.add_scaled(Complex64::from(1.0), &build_bubble(phi, b.weight, b.delay))?;
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Bubbles `1..=n`.
    pub below: Field,
    /// Bubble `n` alone.
    pub at: Field,
    /// Bubbles `n+1..`.
    pub above: Field,
}

/// Splits the profile at bubble `n` (1-based).
pub fn decompose_profile(spec: &ProfileSpec, geometry: &Geometry, n: usize) -> Result<Decomposition> {
    spec.validate()?;
    let count = spec.bubbles.len();
    if n == 0 || n > count {
        return Err(Error::InvalidArgument(format!(
            "bubble index {n} outside 1..={count}"
        )));
    }
    let phi = make_base(&spec.base, geometry)?;
    let below = sum_bubbles(&phi, &spec.bubbles[..n])?;
    let at = sum_bubbles(&phi, &spec.bubbles[n - 1..n])?;
    let above = sum_bubbles(&phi, &spec.bubbles[n..])?;
    Ok(Decomposition { below, at, above })
}
