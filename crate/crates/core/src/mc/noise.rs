//! Spatial noise slices with covariance `R_per`.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::covariance::{CovarianceModel, Family};
use crate::error::{Error, Result};
use crate::grid::{GridFft, GridField, TorusSpec};

/// Reusable sampler for one grid and covariance.
///
/// Each draw fills the DFT slots with independent Gaussians of variance
/// `L^d R̂(n/L)`, pairs `n` with `-n` so the field is real, and inverts. The
/// resulting field has covariance `L^{-d} Σ_n R̂(n/L) e^{i2πn·(x-y)/L}` exactly on
/// the grid, i.e. the band-limited `R_per`.
#[derive(Debug)]
pub struct NoiseSampler {
    spec: TorusSpec,
    /// `(slot, partner, amplitude)` for each slot that draws randomness.
    plan: Vec<(usize, usize, f64)>,
    fft: GridFft,
    buffer: Vec<Complex64>,
}

impl NoiseSampler {
    pub fn new(model: &CovarianceModel, spec: &TorusSpec) -> Result<Self> {
        if model.family() == Family::FlatSpectrum {
            return Err(Error::UnsupportedModel(
                "the flat spectrum has no pointwise noise field".into(),
            ));
        }
        let torus = spec.torus();
        model.check_fits(&torus)?;
        let volume = torus.volume();
        let n = spec.grid_points();
        let modes = spec.mode_table();
        let mut slots = vec![0usize; spec.dimension()];
        let mut plan = Vec::new();
        for (k, mode) in modes.iter().enumerate() {
            spec.unflatten(k, &mut slots);
            let mirrored: Vec<usize> = slots.iter().map(|&s| (n - s) % n).collect();
            let partner = spec.flatten(&mirrored);
            if partner < k {
                continue;
            }
            let variance = volume * model.coefficient_unchecked(torus.size(), mode);
            let amplitude = if partner == k {
                variance.sqrt()
            } else {
                (0.5 * variance).sqrt()
            };
            plan.push((k, partner, amplitude));
        }
        Ok(Self {
            spec: *spec,
            plan,
            fft: GridFft::new(*spec),
            buffer: vec![Complex64::new(0.0, 0.0); spec.len()],
        })
    }

    pub fn spec(&self) -> &TorusSpec {
        &self.spec
    }

    /// Writes one noise slice into `out`.
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.spec.len());
        for &(k, partner, amplitude) in &self.plan {
            if k == partner {
                let g: f64 = rng.sample(StandardNormal);
                self.buffer[k] = Complex64::new(amplitude * g, 0.0);
            } else {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                self.buffer[k] = Complex64::new(amplitude * re, amplitude * im);
                self.buffer[partner] = Complex64::new(amplitude * re, -amplitude * im);
            }
        }
        self.fft.inverse(&mut self.buffer);
        let scale = 1.0 / self.spec.torus().volume();
        for (o, c) in out.iter_mut().zip(&self.buffer) {
            *o = scale * c.re;
        }
    }
}

/// One noise slice as a grid field.
pub fn sample_noise_field<R: Rng + ?Sized>(
    model: &CovarianceModel,
    spec: &TorusSpec,
    rng: &mut R,
) -> Result<GridField> {
    let mut sampler = NoiseSampler::new(model, spec)?;
    let mut values = vec![0.0; spec.len()];
    sampler.fill(rng, &mut values);
    GridField::new(*spec, values)
}
