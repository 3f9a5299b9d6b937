//! Torus geometry, uniform grids and spectral synthesis.
//!
//! Fourier coefficients follow the torus convention
//! `f̂(n) = ∫ f(x) exp(-i 2π n·x / L) dx`, so that
//! `f(x) = L^{-d} Σ_n f̂(n) exp(i 2π n·x / L)`. Grid nodes sit at
//! `x_j = -L/2 + j L / N` along every axis; with `N` even, node `N/2` is the
//! origin.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The continuum torus `T_L^d`, the product of `d` circles of length `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Torus {
    #[serde(rename = "d")]
    dimension: usize,
    #[serde(rename = "L")]
    size: f64,
}

impl Torus {
    pub fn new(dimension: usize, size: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter(
                "torus dimension must be >= 1".into(),
            ));
        }
        if !(size.is_finite() && size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "torus size must be positive and finite, got {size}"
            )));
        }
        Ok(Self { dimension, size })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn size(&self) -> f64 {
        self.size
    }

    /// `L^d`.
    pub fn volume(&self) -> f64 {
        self.size.powi(self.dimension as i32)
    }
}

/// A torus together with a uniform grid of `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTorusSpec", into = "RawTorusSpec")]
pub struct TorusSpec {
    torus: Torus,
    grid_points: usize,
}

#[derive(Serialize, Deserialize)]
struct RawTorusSpec {
    d: usize,
    #[serde(rename = "L")]
    size: f64,
    #[serde(rename = "N")]
    grid_points: usize,
}

impl TryFrom<RawTorusSpec> for TorusSpec {
    type Error = Error;

    fn try_from(raw: RawTorusSpec) -> Result<Self> {
        TorusSpec::new(raw.d, raw.size, raw.grid_points)
    }
}

impl From<TorusSpec> for RawTorusSpec {
    fn from(spec: TorusSpec) -> Self {
        RawTorusSpec {
            d: spec.dimension(),
            size: spec.size(),
            grid_points: spec.grid_points,
        }
    }
}

impl TorusSpec {
    pub fn new(dimension: usize, size: f64, grid_points: usize) -> Result<Self> {
        let torus = Torus::new(dimension, size)?;
        if grid_points < 4 || !grid_points.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "grid points per axis must be even and >= 4, got {grid_points}"
            )));
        }
        let total = (grid_points as u128).checked_pow(dimension as u32);
        if total.is_none_or(|t| t > (1u128 << 32)) {
            return Err(Error::InvalidParameter(format!(
                "grid of {grid_points}^{dimension} points is too large"
            )));
        }
        Ok(Self { torus, grid_points })
    }

    pub fn torus(&self) -> Torus {
        self.torus
    }

    pub fn dimension(&self) -> usize {
        self.torus.dimension
    }

    pub fn size(&self) -> f64 {
        self.torus.size
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    /// Total number of grid nodes, `N^d`.
    pub fn len(&self) -> usize {
        self.grid_points.pow(self.dimension() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.size() / self.grid_points as f64
    }

    /// Volume of one grid cell, `(L/N)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension() as i32)
    }

    /// Coordinate of node `j` along one axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.size() + j as f64 * self.spacing()
    }

    /// Row-major multi-index of a flat index (axis 0 varies slowest).
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        let n = self.grid_points;
        for slot in out.iter_mut().rev() {
            *slot = flat % n;
            flat /= n;
        }
    }

    pub fn flatten(&self, index: &[usize]) -> usize {
        index.iter().fold(0, |acc, &j| acc * self.grid_points + j)
    }

    /// Node coordinates of a flat index.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dimension()];
        self.unflatten(flat, &mut idx);
        idx.iter().map(|&j| self.coordinate(j)).collect()
    }

    /// Signed Fourier mode carried by DFT index `k` along one axis. The Nyquist
    /// index maps to `+N/2`.
    pub fn signed_mode(&self, k: usize) -> i64 {
        let n = self.grid_points;
        if k <= n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// Flat index of the node reflected through the origin, `x -> -x`.
    pub fn reflect(&self, flat: usize) -> usize {
        let n = self.grid_points;
        let mut idx = vec![0; self.dimension()];
        self.unflatten(flat, &mut idx);
        for j in idx.iter_mut() {
            *j = (n - *j) % n;
        }
        self.flatten(&idx)
    }

    /// Flat index of the origin node.
    pub fn origin(&self) -> usize {
        self.flatten(&vec![self.grid_points / 2; self.dimension()])
    }

    /// Signed mode vectors for every DFT slot, in flat order.
    pub fn mode_table(&self) -> Vec<Vec<i64>> {
        let d = self.dimension();
        let mut idx = vec![0; d];
        (0..self.len())
            .map(|flat| {
                self.unflatten(flat, &mut idx);
                idx.iter().map(|&k| self.signed_mode(k)).collect()
            })
            .collect()
    }
}

/// A real field sampled on the grid of a [`TorusSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: TorusSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: TorusSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidParameter(format!(
                "grid field needs {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid field value at index {bad} is not finite"
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn constant(spec: TorusSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    pub fn spec(&self) -> &TorusSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        self.values[self.spec.flatten(index)]
    }

    /// Value at the origin node.
    pub fn at_origin(&self) -> f64 {
        self.values[self.spec.origin()]
    }

    /// Grid average `N^{-d} Σ_j f_j`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Riemann sum `Σ_j f_j (L/N)^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Discrete `L²(T_L^d)` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.spec.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise `self - other`; panics on mismatched grids.
    pub fn sub(&self, other: &GridField) -> GridField {
        assert_eq!(self.spec, other.spec, "grid mismatch");
        GridField {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// In-place complex FFTs over an `N^d` row-major array.
pub struct GridFft {
    spec: TorusSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFft").field("spec", &self.spec).finish()
    }
}

impl GridFft {
    pub fn new(spec: TorusSpec) -> Self {
        let mut planner = FftPlanner::new();
        let n = spec.grid_points();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            spec,
            forward,
            inverse,
            line: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    /// Unnormalized forward transform, `X_k = Σ_j x_j e^{-2πi k·j/N}`.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.forward);
        self.apply(plan.as_ref(), data);
    }

    /// Unnormalized inverse transform, `x_j = Σ_k X_k e^{+2πi k·j/N}`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.inverse);
        self.apply(plan.as_ref(), data);
    }

    fn apply(&mut self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        let n = self.spec.grid_points();
        let d = self.spec.dimension();
        debug_assert_eq!(data.len(), self.spec.len());
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut self.scratch);
                }
                continue;
            }
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (i, slot) in self.line.iter_mut().enumerate() {
                        *slot = data[start + i * stride];
                    }
                    plan.process_with_scratch(&mut self.line, &mut self.scratch);
                    for (i, v) in self.line.iter().enumerate() {
                        data[start + i * stride] = *v;
                    }
                }
            }
        }
    }
}

/// `(-1)^{n_1 + … + n_d}`, the phase picked up by the node offset `-L/2`.
pub(crate) fn offset_phase(modes: &[i64]) -> f64 {
    if modes.iter().sum::<i64>().rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Evaluates `L^{-d} Σ_n c(n) e^{i2π n·x/L}` on the grid, summing over the
/// grid's DFT modes. `coefficient` must be real and even in `n`; the result is
/// then real and symmetric under `x -> -x`.
pub fn spectral_synthesis(spec: TorusSpec, coefficient: impl Fn(&[i64]) -> f64) -> GridField {
    let coefficients: Vec<f64> = spec.mode_table().iter().map(|n| coefficient(n)).collect();
    synthesize_from_slots(spec, &coefficients)
}

/// As [`spectral_synthesis`], with the coefficients listed in DFT slot order.
pub fn synthesize_from_slots(spec: TorusSpec, coefficients: &[f64]) -> GridField {
    assert_eq!(
        coefficients.len(),
        spec.len(),
        "one coefficient per grid mode"
    );
    let scale = 1.0 / spec.torus().volume();
    let mut data: Vec<Complex64> = spec
        .mode_table()
        .iter()
        .zip(coefficients)
        .map(|(n, c)| Complex64::new(scale * c * offset_phase(n), 0.0))
        .collect();
    GridFft::new(spec).inverse(&mut data);
    let mut values: Vec<f64> = data.iter().map(|c| c.re).collect();
    symmetrize(&spec, &mut values);
    GridField { spec, values }
}

/// Replaces `v` by `(v(x) + v(-x)) / 2`, which makes the reflection symmetry
/// exact in floating point.
pub(crate) fn symmetrize(spec: &TorusSpec, values: &mut [f64]) {
    for flat in 0..values.len() {
        let mirror = spec.reflect(flat);
        if mirror > flat {
            let avg = 0.5 * (values[flat] + values[mirror]);
            values[flat] = avg;
            values[mirror] = avg;
        }
    }
}

/// Second-order central-difference Laplacian with periodic wrap.
pub fn fd_laplacian(field: &GridField) -> GridField {
    let spec = *field.spec();
    let n = spec.grid_points();
    let d = spec.dimension();
    let inv_h2 = 1.0 / (spec.spacing() * spec.spacing());
    let mut idx = vec![0; d];
    let values = (0..spec.len())
        .map(|flat| {
            spec.unflatten(flat, &mut idx);
            let centre = field.values[flat];
            let mut acc = 0.0;
            for axis in 0..d {
                let j = idx[axis];
                let mut probe = idx.clone();
                probe[axis] = (j + 1) % n;
                let up = field.values[spec.flatten(&probe)];
                probe[axis] = (j + n - 1) % n;
                let down = field.values[spec.flatten(&probe)];
                acc += (up - 2.0 * centre + down) * inv_h2;
            }
            acc
        })
        .collect();
    GridField { spec, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusSpec::new(1, 1.0, 3).is_err());
        assert!(TorusSpec::new(1, 1.0, 2).is_err());
        assert!(TorusSpec::new(0, 1.0, 8).is_err());
        assert!(TorusSpec::new(1, -1.0, 8).is_err());
        assert!(TorusSpec::new(2, 1.0, 8).is_ok());
    }

    #[test]
    fn origin_and_reflection() {
        let spec = TorusSpec::new(2, 4.0, 8).unwrap();
        let o = spec.origin();
        assert_eq!(spec.node(o), vec![0.0, 0.0]);
        assert_eq!(spec.reflect(o), o);
        let flat = spec.flatten(&[1, 5]);
        let r = spec.reflect(flat);
        let (x, xr) = (spec.node(flat), spec.node(r));
        for (a, b) in x.iter().zip(&xr) {
            // -x equals x_r modulo L
            let diff = (a + b).rem_euclid(4.0);
            assert!(diff.abs() < 1e-12 || (diff - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_of_a_single_cosine() {
        let spec = TorusSpec::new(1, 2.0, 16).unwrap();
        // c(±1) = L/2 gives cos(2π x / L)
        let f = spectral_synthesis(spec, |n| if n[0].abs() == 1 { 1.0 } else { 0.0 });
        for j in 0..16 {
            let x = spec.coordinate(j);
            let expect = (2.0 * std::f64::consts::PI * x / 2.0).cos();
            assert!((f.values()[j] - expect).abs() < 1e-13, "j={j}");
        }
    }

    #[test]
    fn fft_round_trip_2d() {
        let spec = TorusSpec::new(2, 1.0, 8).unwrap();
        let mut fft = GridFft::new(spec);
        let orig: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / 64.0 - b).norm() < 1e-13);
        }
    }

    #[test]
    fn fd_laplacian_of_cosine() {
        let spec = TorusSpec::new(1, 1.0, 256).unwrap();
        let f = spectral_synthesis(spec, |n| if n[0].abs() == 1 { 0.5 } else { 0.0 });
        let lap = fd_laplacian(&f);
        let k2 = (2.0 * std::f64::consts::PI).powi(2);
        for j in 0..256 {
            assert!((lap.values()[j] + k2 * f.values()[j]).abs() < 1e-2);
        }
    }
}
