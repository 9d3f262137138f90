//! Discrete geometries, their frequency lattices and the spectral transforms.
//!
//! Two layouts are supported:
//!
//! * `PeriodicCartesian`: a box `[-L/2, L/2)^d` with `d ∈ {1, 2, 3}` sampled at
//!   `x_j = -L/2 + j L/N`. The forward transform returns Fourier-series
//!   coefficients `û(k) = (1/N) Σ_j u(x_j) e^{-i k·x_j}`, so a plane wave
//!   `e^{i k₀·x}` maps to a unit coefficient at `k₀`. The inverse carries no
//!   factor. With this convention `‖u‖₂² = V Σ_k |û(k)|²`.
//!
//! * `Radial3d`: radially symmetric functions on the ball of radius `R` in ℝ³.
//!   The stored samples are `v(r) = r·u(r)` on the staggered nodes
//!   `r_j = (j + ½) R/N`. `v` is expanded in the sine series
//!   `v(r) = Σ_{m=1}^{N} b_m sin(k_m r)`, `k_m = π m / R`, which vanishes at
//!   `r = 0` and `r = R`. The forward transform returns `b_m`.
//!   Here `‖u‖₂² = 4π ∫ |v|² dr = 4π (R/2) Σ_{m<N} |b_m|² + 4π R |b_N|²`.
//!
//! The 3D radial Laplacian acts on `v` as `∂²_r`, so every Fourier multiplier
//! below (free flow, `|∇|^s`, dealiasing) is diagonal in both layouts.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PeriodicCartesian,
    #[serde(rename = "radial-3d")]
    Radial3d,
}

impl Mode {
    /// Tag used by the binary snapshot format.
    pub fn tag(self) -> u32 {
        match self {
            Mode::PeriodicCartesian => 0,
            Mode::Radial3d => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Mode::PeriodicCartesian),
            1 => Some(Mode::Radial3d),
            _ => None,
        }
    }
}

/// Plain descriptor of a geometry, suitable for configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub dimension: usize,
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub mode: Mode,
}

impl GeometrySpec {
    pub fn build(&self) -> Result<Geometry> {
        make_geometry(self.dimension, &self.sizes, &self.lengths, self.mode)
    }
}

/// Validated discretization. Cheap to clone; immutable and shareable.
#[derive(Clone)]
pub struct Geometry {
    inner: Arc<Inner>,
}

struct Inner {
    spec: GeometrySpec,
    len: usize,
    lattice: FrequencyLattice,
    plans: Plans,
}

enum Plans {
    Periodic {
        forward: Vec<Arc<dyn Fft<f64>>>,
        inverse: Vec<Arc<dyn Fft<f64>>>,
        /// `(-1)^{Σ_a j_a}`: shifts the DFT origin to the box centre.
        negate: Vec<bool>,
        scratch_len: usize,
    },
    Radial {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        analysis_twiddle: Vec<Complex64>,
        synthesis_twiddle: Vec<Complex64>,
        scratch_len: usize,
    },
}

pub fn make_geometry(
    dimension: usize,
    sizes: &[usize],
    lengths: &[f64],
    mode: Mode,
) -> Result<Geometry> {
    if !(1..=3).contains(&dimension) {
        return Err(Error::Geometry(format!(
            "dimension must be 1, 2 or 3, got {dimension}"
        )));
    }
    if mode == Mode::Radial3d && dimension != 1 {
        return Err(Error::Geometry(format!(
            "radial-3d mode uses exactly one (radial) axis, got dimension {dimension}"
        )));
    }
    if sizes.len() != dimension || lengths.len() != dimension {
        return Err(Error::Geometry(format!(
            "expected {dimension} sizes and lengths, got {} and {}",
            sizes.len(),
            lengths.len()
        )));
    }
    for &n in sizes {
        if n < MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::Geometry(format!(
                "axis size {n} is not a power of two >= {MIN_POINTS}"
            )));
        }
    }
    for &l in lengths {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Geometry(format!(
                "axis extent {l} is not strictly positive"
            )));
        }
    }
    let spec = GeometrySpec {
        dimension,
        sizes: sizes.to_vec(),
        lengths: lengths.to_vec(),
        mode,
    };
    let len = sizes.iter().product();
    let lattice = FrequencyLattice::new(&spec);
    let plans = Plans::new(&spec);
    Ok(Geometry {
        inner: Arc::new(Inner {
            spec,
            len,
            lattice,
            plans,
        }),
    })
}

impl Plans {
    fn new(spec: &GeometrySpec) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        match spec.mode {
            Mode::PeriodicCartesian => {
                let forward: Vec<_> = spec.sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect();
                let inverse: Vec<_> = spec.sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
                let scratch_len = forward
                    .iter()
                    .chain(inverse.iter())
                    .map(|p| p.get_inplace_scratch_len())
                    .max()
                    .unwrap_or(0);
                let negate = multi_indices(&spec.sizes)
                    .map(|idx| idx.iter().sum::<usize>() % 2 == 1)
                    .collect();
                Plans::Periodic {
                    forward,
                    inverse,
                    negate,
                    scratch_len,
                }
            }
            Mode::Radial3d => {
                let n = spec.sizes[0];
                let forward = planner.plan_fft_forward(2 * n);
                let inverse = planner.plan_fft_inverse(2 * n);
                let scratch_len = forward
                    .get_inplace_scratch_len()
                    .max(inverse.get_inplace_scratch_len());
                let nf = n as f64;
                let analysis_twiddle = (1..=n)
                    .map(|m| {
                        let scale = if m < n { 1.0 / nf } else { 0.5 / nf };
                        Complex64::new(0.0, scale) * Complex64::from_polar(1.0, -PI * m as f64 / (2.0 * nf))
                    })
                    .collect();
                let synthesis_twiddle = (1..=n)
                    .map(|m| Complex64::from_polar(1.0, PI * m as f64 / (2.0 * nf)))
                    .collect();
                Plans::Radial {
                    forward,
                    inverse,
                    analysis_twiddle,
                    synthesis_twiddle,
                    scratch_len,
                }
            }
        }
    }
}

/// Row-major iteration over multi-indices of an array of the given shape.
pub(crate) fn multi_indices(sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = sizes.iter().product();
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; sizes.len()];
        for (a, &n) in sizes.iter().enumerate().rev() {
            idx[a] = flat % n;
            flat /= n;
        }
        idx
    })
}

impl Geometry {
    pub fn spec(&self) -> &GeometrySpec {
        &self.inner.spec
    }

    pub fn dimension(&self) -> usize {
        self.inner.spec.dimension
    }

    /// Dimension of the physical space the samples represent (3 for radial).
    pub fn physical_dimension(&self) -> usize {
        match self.mode() {
            Mode::PeriodicCartesian => self.dimension(),
            Mode::Radial3d => 3,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.inner.spec.sizes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.inner.spec.lengths
    }

    pub fn mode(&self) -> Mode {
        self.inner.spec.mode
    }

    pub fn is_radial(&self) -> bool {
        self.mode() == Mode::Radial3d
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths()[axis] / self.sizes()[axis] as f64
    }

    /// Smallest grid spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dimension())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest extent. For radial geometries this is the outer radius.
    pub fn min_extent(&self) -> f64 {
        self.lengths().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Measure of the computational domain.
    pub fn volume(&self) -> f64 {
        match self.mode() {
            Mode::PeriodicCartesian => self.lengths().iter().product(),
            Mode::Radial3d => 4.0 / 3.0 * PI * self.lengths()[0].powi(3),
        }
    }

    /// Grid coordinates along one axis (radial: the staggered radii).
    pub fn coordinates(&self, axis: usize) -> Vec<f64> {
        let n = self.sizes()[axis];
        let h = self.spacing(axis);
        match self.mode() {
            Mode::PeriodicCartesian => {
                let half = 0.5 * self.lengths()[axis];
                (0..n).map(|j| -half + j as f64 * h).collect()
            }
            Mode::Radial3d => (0..n).map(|j| (j as f64 + 0.5) * h).collect(),
        }
    }

    /// Distance from the origin of every sample, in storage order.
    pub fn radii(&self) -> Vec<f64> {
        match self.mode() {
            Mode::Radial3d => self.coordinates(0),
            Mode::PeriodicCartesian => {
                let coords: Vec<Vec<f64>> = (0..self.dimension()).map(|a| self.coordinates(a)).collect();
                multi_indices(self.sizes())
                    .map(|idx| {
                        idx.iter()
                            .enumerate()
                            .map(|(a, &j)| coords[a][j].powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            }
        }
    }

    pub fn lattice(&self) -> &FrequencyLattice {
        &self.inner.lattice
    }

    pub fn workspace(&self) -> SpectralWorkspace {
        SpectralWorkspace::new(self.clone())
    }

    /// Allocating forward transform. See the module docs for the convention.
    pub fn forward(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = values.to_vec();
        self.workspace().forward(&mut out)?;
        Ok(out)
    }

    /// Allocating inverse transform.
    pub fn inverse(&self, coefficients: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = coefficients.to_vec();
        self.workspace().inverse(&mut out)?;
        Ok(out)
    }

    pub fn same_as(&self, other: &Geometry) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.spec() == other.spec()
    }
}

impl PartialEq for Geometry {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Geometry")
            .field("mode", &self.mode())
            .field("sizes", &self.sizes())
            .field("lengths", &self.lengths())
            .finish()
    }
}

/// Wavenumber tables laid out like the transform output.
pub struct FrequencyLattice {
    axes: Vec<Vec<f64>>,
    k_squared: Vec<f64>,
    weights: Vec<f64>,
    dealias: Vec<bool>,
}

impl FrequencyLattice {
    fn new(spec: &GeometrySpec) -> Self {
        match spec.mode {
            Mode::PeriodicCartesian => {
                let axes: Vec<Vec<f64>> = spec
                    .sizes
                    .iter()
                    .zip(&spec.lengths)
                    .map(|(&n, &l)| (0..n).map(|i| 2.0 * PI * signed_index(i, n) as f64 / l).collect())
                    .collect();
                let volume: f64 = spec.lengths.iter().product();
                let mut k_squared = Vec::new();
                let mut dealias = Vec::new();
                for idx in multi_indices(&spec.sizes) {
                    k_squared.push(idx.iter().enumerate().map(|(a, &i)| axes[a][i].powi(2)).sum());
                    dealias.push(
                        idx.iter()
                            .zip(&spec.sizes)
                            .all(|(&i, &n)| signed_index(i, n).unsigned_abs() as usize <= n / 3),
                    );
                }
                let weights = vec![volume; k_squared.len()];
                FrequencyLattice {
                    axes,
                    k_squared,
                    weights,
                    dealias,
                }
            }
            Mode::Radial3d => {
                let n = spec.sizes[0];
                let r = spec.lengths[0];
                let k: Vec<f64> = (1..=n).map(|m| PI * m as f64 / r).collect();
                let k_squared = k.iter().map(|k| k * k).collect();
                let weights = (1..=n)
                    .map(|m| if m < n { 2.0 * PI * r } else { 4.0 * PI * r })
                    .collect();
                let dealias = (1..=n).map(|m| 3 * m <= 2 * n).collect();
                FrequencyLattice {
                    axes: vec![k],
                    k_squared,
                    weights,
                    dealias,
                }
            }
        }
    }

    /// Wavenumbers along one axis in transform order.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.axes[axis]
    }

    pub fn k_squared(&self) -> &[f64] {
        &self.k_squared
    }

    /// Parseval weights: `‖u‖₂² = Σ weights[i] |coef[i]|²`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `true` where a mode survives the 2/3 rule.
    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias
    }

    /// `|k|^{2s}`. For `s > 0` the zero mode is exactly 0; for `s = 0` every
    /// mode (zero mode included) gets weight 1.
    pub fn power_multiplier(&self, s: f64) -> Vec<f64> {
        if s == 0.0 {
            return vec![1.0; self.k_squared.len()];
        }
        self.k_squared
            .iter()
            .map(|&k2| if k2 == 0.0 { 0.0 } else { k2.powf(s) })
            .collect()
    }

    pub fn max_wavenumber(&self) -> f64 {
        self.k_squared.iter().copied().fold(0.0, f64::max).sqrt()
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Reusable buffers for in-place transforms on one geometry.
pub struct SpectralWorkspace {
    geometry: Geometry,
    scratch: Vec<Complex64>,
    lane: Vec<Complex64>,
}

impl SpectralWorkspace {
    pub fn new(geometry: Geometry) -> Self {
        let (scratch_len, lane_len) = match &geometry.inner.plans {
            Plans::Periodic { scratch_len, .. } => (*scratch_len, geometry.sizes().iter().copied().max().unwrap_or(0)),
            Plans::Radial { scratch_len, .. } => (*scratch_len, 2 * geometry.sizes()[0]),
        };
        SpectralWorkspace {
            geometry,
            scratch: vec![Complex64::default(); scratch_len],
            lane: vec![Complex64::default(); lane_len],
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn check(&self, data: &[Complex64]) -> Result<()> {
        if data.len() != self.geometry.len() {
            return Err(Error::SizeMismatch {
                expected: self.geometry.len(),
                got: data.len(),
            });
        }
        Ok(())
    }

    /// Samples to coefficients, in place.
    pub fn forward(&mut self, data: &mut [Complex64]) -> Result<()> {
        self.check(data)?;
        let inner = Arc::clone(&self.geometry.inner);
        match &inner.plans {
            Plans::Periodic { forward, negate, .. } => {
                self.fft_all_axes(data, forward);
                let scale = 1.0 / data.len() as f64;
                for (c, &neg) in data.iter_mut().zip(negate) {
                    *c *= if neg { -scale } else { scale };
                }
            }
            Plans::Radial {
                forward,
                analysis_twiddle,
                ..
            } => {
                let n = data.len();
                let ext = &mut self.lane;
                for (j, &v) in data.iter().enumerate() {
                    ext[j] = v;
                    ext[2 * n - 1 - j] = -v;
                }
                forward.process_with_scratch(ext, &mut self.scratch);
                for (m, c) in data.iter_mut().enumerate() {
                    *c = analysis_twiddle[m] * ext[m + 1];
                }
            }
        }
        Ok(())
    }

    /// Coefficients to samples, in place.
    pub fn inverse(&mut self, data: &mut [Complex64]) -> Result<()> {
        self.check(data)?;
        let inner = Arc::clone(&self.geometry.inner);
        match &inner.plans {
            Plans::Periodic { inverse, negate, .. } => {
                for (c, &neg) in data.iter_mut().zip(negate) {
                    if neg {
                        *c = -*c;
                    }
                }
                self.fft_all_axes(data, inverse);
            }
            Plans::Radial {
                inverse,
                synthesis_twiddle,
                ..
            } => {
                let n = data.len();
                let ext = &mut self.lane;
                ext[0] = Complex64::default();
                for m in 1..n {
                    let b = data[m - 1];
                    ext[m] = b * synthesis_twiddle[m - 1];
                    ext[2 * n - m] = -b * synthesis_twiddle[m - 1].conj();
                }
                ext[n] = Complex64::new(0.0, 2.0) * data[n - 1];
                inverse.process_with_scratch(ext, &mut self.scratch);
                let half_over_i = Complex64::new(0.0, -0.5);
                for (j, v) in data.iter_mut().enumerate() {
                    *v = ext[j] * half_over_i;
                }
            }
        }
        Ok(())
    }

    fn fft_all_axes(&mut self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let sizes = self.geometry.sizes().to_vec();
        let total = data.len();
        for (axis, plan) in plans.iter().enumerate() {
            let n = sizes[axis];
            let stride: usize = sizes[axis + 1..].iter().product();
            if stride == 1 {
                plan.process_with_scratch(data, &mut self.scratch);
                continue;
            }
            let lane = &mut self.lane[..n];
            for outer in 0..total / (n * stride) {
                for inner in 0..stride {
                    let base = outer * n * stride + inner;
                    for (j, slot) in lane.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(lane, &mut self.scratch);
                    for (j, &value) in lane.iter().enumerate() {
                        data[base + j * stride] = value;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    fn geometries() -> Vec<Geometry> {
        vec![
            make_geometry(1, &[256], &[100.0], Mode::PeriodicCartesian).unwrap(),
            make_geometry(2, &[16, 32], &[10.0, 20.0], Mode::PeriodicCartesian).unwrap(),
            make_geometry(3, &[8, 16, 8], &[5.0, 6.0, 7.0], Mode::PeriodicCartesian).unwrap(),
            make_geometry(1, &[64], &[20.0], Mode::Radial3d).unwrap(),
        ]
    }

    #[test]
    fn constructor_cases() {
        assert!(make_geometry(1, &[256], &[100.0], Mode::PeriodicCartesian).is_ok());
        assert!(make_geometry(3, &[64, 64, 64], &[50.0, 50.0, 50.0], Mode::PeriodicCartesian).is_ok());
        assert!(matches!(
            make_geometry(1, &[100], &[50.0], Mode::PeriodicCartesian),
            Err(Error::Geometry(_))
        ));
        assert!(make_geometry(1, &[4], &[50.0], Mode::PeriodicCartesian).is_err());
        assert!(make_geometry(1, &[64], &[0.0], Mode::PeriodicCartesian).is_err());
        assert!(make_geometry(1, &[64], &[-3.0], Mode::Radial3d).is_err());
        assert!(make_geometry(2, &[64, 64], &[1.0, 1.0], Mode::Radial3d).is_err());
        assert!(make_geometry(4, &[8; 4], &[1.0; 4], Mode::PeriodicCartesian).is_err());
    }

    #[test]
    fn constant_field_lands_in_zero_mode() {
        let g = make_geometry(2, &[16, 8], &[3.0, 4.0], Mode::PeriodicCartesian).unwrap();
        let c = Complex64::new(0.7, -1.2);
        let coef = g.forward(&vec![c; g.len()]).unwrap();
        assert!((coef[0] - c).norm() < 1e-14);
        assert!(coef[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn plane_wave_gives_unit_coefficient() {
        let g = make_geometry(2, &[16, 32], &[10.0, 20.0], Mode::PeriodicCartesian).unwrap();
        let (kx, ky) = (g.lattice().wavenumbers(0)[3], g.lattice().wavenumbers(1)[29]);
        let xs = g.coordinates(0);
        let ys = g.coordinates(1);
        let values: Vec<Complex64> = multi_indices(g.sizes())
            .map(|idx| Complex64::from_polar(1.0, kx * xs[idx[0]] + ky * ys[idx[1]]))
            .collect();
        let coef = g.forward(&values).unwrap();
        let target = 3 * 32 + 29;
        for (i, c) in coef.iter().enumerate() {
            let expected = if i == target { 1.0 } else { 0.0 };
            assert!((c - expected).norm() <= 1e-13, "mode {i}: {c}");
        }
    }

    #[test]
    fn single_sine_mode_gives_unit_coefficient() {
        let g = make_geometry(1, &[64], &[20.0], Mode::Radial3d).unwrap();
        for m in [1usize, 7, 63, 64] {
            let k = g.lattice().wavenumbers(0)[m - 1];
            let values: Vec<Complex64> = g.coordinates(0).iter().map(|r| Complex64::from((k * r).sin())).collect();
            let coef = g.forward(&values).unwrap();
            for (i, c) in coef.iter().enumerate() {
                let expected = if i == m - 1 { 1.0 } else { 0.0 };
                assert!((c - expected).norm() <= 1e-13, "m={m} mode {i}: {c}");
            }
        }
    }

    #[test]
    fn zero_coefficients_give_zero_field() {
        for g in geometries() {
            let out = g.inverse(&vec![Complex64::default(); g.len()]).unwrap();
            assert!(out.iter().all(|z| *z == Complex64::default()));
        }
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let g = make_geometry(1, &[16], &[1.0], Mode::PeriodicCartesian).unwrap();
        assert_eq!(
            g.forward(&[Complex64::default(); 15]),
            Err(Error::SizeMismatch { expected: 16, got: 15 })
        );
        assert!(g.inverse(&[Complex64::default(); 17]).is_err());
    }

    #[test]
    fn lattice_invariants() {
        for g in geometries() {
            let lat = g.lattice();
            assert!(lat.k_squared().iter().all(|&k| k >= 0.0 && k.is_finite()));
            let m = lat.power_multiplier(0.5);
            for (&k2, &w) in lat.k_squared().iter().zip(&m) {
                if k2 == 0.0 {
                    assert_eq!(w, 0.0);
                }
            }
            // monotone in |k|
            let mut pairs: Vec<(f64, f64)> = lat.k_squared().iter().copied().zip(m).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            assert!(pairs.windows(2).all(|w| w[1].1 >= w[0].1));
        }
    }

    #[test]
    fn k_squared_symmetric_under_reflection() {
        let g = make_geometry(2, &[8, 16], &[2.0, 3.0], Mode::PeriodicCartesian).unwrap();
        let (nx, ny) = (8, 16);
        let k2 = g.lattice().k_squared();
        for i in 0..nx {
            for j in 0..ny {
                let (ri, rj) = ((nx - i) % nx, (ny - j) % ny);
                assert_eq!(k2[i * ny + j], k2[ri * ny + rj]);
            }
        }
    }

    fn random_values(len: usize, seed: &[f64]) -> Vec<Complex64> {
        (0..len)
            .map(|i| {
                let a = seed[i % seed.len()];
                Complex64::new((a * (i as f64 + 1.3)).sin(), (a * 0.7 * i as f64 + 0.1).cos())
            })
            .collect()
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(seed in proptest::collection::vec(0.1f64..10.0, 1..6)) {
            for g in geometries() {
                let values = random_values(g.len(), &seed);
                let coef = g.forward(&values).unwrap();
                let back = g.inverse(&coef).unwrap();
                prop_assert!(rel_l2(&back, &values) <= 1e-13);

                let physical: f64 = match g.mode() {
                    Mode::PeriodicCartesian => {
                        let dv: f64 = (0..g.dimension()).map(|a| g.spacing(a)).product();
                        dv * values.iter().map(|v| v.norm_sqr()).sum::<f64>()
                    }
                    Mode::Radial3d => 4.0 * PI * g.spacing(0) * values.iter().map(|v| v.norm_sqr()).sum::<f64>(),
                };
                let spectral: f64 = coef.iter().zip(g.lattice().weights()).map(|(c, w)| w * c.norm_sqr()).sum();
                prop_assert!(((physical - spectral) / physical).abs() <= 1e-13);
            }
        }
    }
}
