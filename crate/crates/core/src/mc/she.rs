//! Pseudospectral simulation of the stochastic heat equation
//! `∂_t u = ½Δu + β u ξ` on the torus, started from `u ≡ 1`.
//!
//! One step is Strang-split: an exact heat half-step in Fourier space, the
//! Itô-corrected multiplicative update `u ← u exp(β√dt ξ - ½β² R_per(0) dt)`,
//! and another heat half-step. The field is then renormalized to mean one and
//! the logarithm of the removed mean is added to `log_z`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::noise::NoiseSampler;
use crate::covariance::{CovarianceModel, Family, DEFAULT_ALIAS_TOL};
use crate::error::{Error, Result};
use crate::grid::{synthesize_from_slots, GridFft, GridField, TorusSpec};
use crate::stats::{mean_estimate, MeanEstimate};

fn default_replicas() -> usize {
    1
}
fn default_alias_tol() -> f64 {
    DEFAULT_ALIAS_TOL
}
fn default_min_batches() -> usize {
    16
}
fn default_trace_points() -> usize {
    1000
}
fn default_test_modes() -> Vec<u32> {
    vec![1, 2, 3]
}
fn default_q3_points() -> usize {
    8
}

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub torus: TorusSpec,
    pub model: CovarianceModel,
    pub beta: f64,
    pub dt: f64,
    /// Defaults to `max(5, L²)`.
    #[serde(default)]
    pub t_burn: Option<f64>,
    pub t_total: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub seed: u64,
    #[serde(default = "default_alias_tol")]
    pub alias_tol: f64,
    /// Lower bound on the total number of batches behind every error bar.
    #[serde(default = "default_min_batches")]
    pub min_batches: usize,
    /// Approximate number of trace rows per replica.
    #[serde(default = "default_trace_points")]
    pub trace_points: usize,
    /// Wave numbers `m` of the test functions `cos(2π m x₁ / L)` used by the
    /// hierarchy residual.
    #[serde(default = "default_test_modes")]
    pub test_modes: Vec<u32>,
    /// Points per axis of the coarse three-point grid (d = 1 only; 0 disables).
    #[serde(default = "default_q3_points")]
    pub q3_points: usize,
}

/// Step counts derived from a validated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunPlan {
    pub burn_steps: u64,
    pub total_steps: u64,
    pub batches_per_replica: usize,
    pub batch_steps: u64,
    pub trace_stride: u64,
}

impl SimConfig {
    /// A configuration with `dt = 0.01`, default burn-in and 100 time units of
    /// sampling.
    pub fn new(torus: TorusSpec, model: CovarianceModel, beta: f64, seed: u64) -> Self {
        let t_burn = default_burn_in(torus.size());
        Self {
            torus,
            model,
            beta,
            dt: 0.01,
            t_burn: None,
            t_total: t_burn + 100.0,
            replicas: 1,
            seed,
            alias_tol: DEFAULT_ALIAS_TOL,
            min_batches: default_min_batches(),
            trace_points: default_trace_points(),
            test_modes: default_test_modes(),
            q3_points: default_q3_points(),
        }
    }

    pub fn burn_in(&self) -> f64 {
        self.t_burn
            .unwrap_or_else(|| default_burn_in(self.torus.size()))
    }

    /// Largest admissible step, `0.1 / max(1, β² R_per(0))`.
    pub fn max_dt(&self) -> f64 {
        let r0 = self.model.grid_variance(&self.torus);
        0.1 / (self.beta * self.beta * r0).max(1.0)
    }

    /// Checks every invariant and derives step counts.
    pub fn plan(&self) -> Result<RunPlan> {
        if self.model.family() == Family::FlatSpectrum {
            return Err(Error::UnsupportedModel(
                "the simulator needs a B-spline covariance".into(),
            ));
        }
        self.model.check_fits(&self.torus.torus())?;
        self.model.check_resolution(&self.torus, self.alias_tol)?;
        if !(self.beta.is_finite() && (0.0..1.0).contains(&self.beta)) {
            return Err(Error::InvalidParameter(format!(
                "β must lie in [0, 1), got {}",
                self.beta
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.dt > self.max_dt() {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds the splitting limit {}",
                self.dt,
                self.max_dt()
            )));
        }
        let t_burn = self.burn_in();
        if !(t_burn.is_finite() && t_burn >= 0.0 && self.t_total.is_finite()) {
            return Err(Error::InvalidParameter(
                "times must be finite and nonnegative".into(),
            ));
        }
        if self.t_total - t_burn < 16.0 * self.dt {
            return Err(Error::InvalidParameter(format!(
                "sampling window t_total - t_burn = {} is shorter than 16 dt",
                self.t_total - t_burn
            )));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidParameter(
                "at least one replica is required".into(),
            ));
        }
        if self.min_batches < 2 {
            return Err(Error::InvalidParameter(
                "min_batches must be at least 2".into(),
            ));
        }
        let half = self.torus.grid_points() as u32 / 2;
        if let Some(&m) = self.test_modes.iter().find(|&&m| m == 0 || m >= half) {
            return Err(Error::InvalidParameter(format!(
                "test mode {m} is outside 1..{half}"
            )));
        }
        if self.q3_points > 0 && !self.torus.grid_points().is_multiple_of(self.q3_points) {
            return Err(Error::InvalidParameter(format!(
                "q3_points = {} does not divide N = {}",
                self.q3_points,
                self.torus.grid_points()
            )));
        }
        let burn_steps = (t_burn / self.dt).round() as u64;
        let total_steps = (self.t_total / self.dt).round() as u64;
        let post = total_steps - burn_steps;
        let batches_per_replica = self.min_batches.div_ceil(self.replicas).max(1);
        let batch_steps = post / batches_per_replica as u64;
        if batch_steps == 0 {
            return Err(Error::InvalidParameter(format!(
                "{post} sampling steps cannot fill {batches_per_replica} batches"
            )));
        }
        let trace_stride = (total_steps / self.trace_points.max(1) as u64).max(1);
        Ok(RunPlan {
            burn_steps,
            total_steps,
            batches_per_replica,
            batch_steps,
            trace_stride,
        })
    }

    /// Stable 64-bit FNV-1a digest of the configuration, in hex.
    pub fn fingerprint(&self) -> String {
        let text = format!("{self:?}");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in text.bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

pub fn default_burn_in(size: f64) -> f64 {
    (size * size).max(5.0)
}

/// The RNG stream of one replica.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Snapshot of a running simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// `u` divided by its extracted mass; mean one.
    pub field: GridField,
    /// Accumulated logarithm of the extracted means.
    pub log_z: f64,
    pub time: f64,
}

impl SimState {
    pub fn flat(spec: TorusSpec) -> Self {
        Self {
            field: GridField::constant(spec, 1.0),
            log_z: 0.0,
            time: 0.0,
        }
    }

    /// The endpoint density `ρ = u / ∫u`.
    pub fn density(&self) -> GridField {
        let volume = self.field.spec().torus().volume();
        let mean = self.field.mean();
        self.field.map(|v| v / (mean * volume))
    }
}

/// The time-stepping engine of one replica.
#[derive(Debug)]
pub struct Simulator<R: Rng = ChaCha8Rng> {
    spec: TorusSpec,
    beta: f64,
    dt: f64,
    fft: GridFft,
    sampler: NoiseSampler,
    rng: R,
    /// Heat half-step multiplier divided by `N^d`.
    heat: Vec<f64>,
    r_hat: Vec<f64>,
    amplitude: f64,
    drift: f64,
    u: Vec<f64>,
    xi: Vec<f64>,
    buffer: Vec<Complex64>,
    /// Mean-normalized DFT of `u` at the end of the last step.
    fourier: Vec<Complex64>,
    flat: bool,
    log_z: f64,
    time: f64,
}

impl<R: Rng> Simulator<R> {
    /// Starts from `state`; the configuration must already be valid.
    pub fn new(config: &SimConfig, state: &SimState, rng: R) -> Result<Self> {
        let spec = config.torus;
        if state.field.spec() != &spec {
            return Err(Error::InvalidParameter(
                "state grid differs from the configuration".into(),
            ));
        }
        if state.field.values().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter(
                "state field must be strictly positive".into(),
            ));
        }
        let size = spec.size();
        let count = spec.len() as f64;
        let modes = spec.mode_table();
        let heat = modes
            .iter()
            .map(|n| {
                let norm2: i64 = n.iter().map(|m| m * m).sum();
                (-PI * PI * norm2 as f64 * config.dt / (size * size)).exp() / count
            })
            .collect();
        let r_hat = modes
            .iter()
            .map(|n| config.model.coefficient_unchecked(size, n))
            .collect();
        let r0 = config.model.grid_variance(&spec);
        let u = state.field.values().to_vec();
        let flat = u.iter().all(|&v| v == u[0]);
        let mut fourier: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut fft = GridFft::new(spec);
        fft.forward(&mut fourier);
        let zero = fourier[0].re;
        fourier.iter_mut().for_each(|c| *c /= zero);
        Ok(Self {
            spec,
            beta: config.beta,
            dt: config.dt,
            fft,
            sampler: NoiseSampler::new(&config.model, &spec)?,
            rng,
            heat,
            r_hat,
            amplitude: config.beta * config.dt.sqrt(),
            drift: 0.5 * config.beta * config.beta * r0 * config.dt,
            u,
            xi: vec![0.0; spec.len()],
            buffer: vec![Complex64::new(0.0, 0.0); spec.len()],
            fourier,
            flat,
            log_z: state.log_z,
            time: state.time,
        })
    }

    fn heat_half_step(&mut self) {
        for (b, &v) in self.buffer.iter_mut().zip(&self.u) {
            *b = Complex64::new(v, 0.0);
        }
        self.fft.forward(&mut self.buffer);
        for (b, &h) in self.buffer.iter_mut().zip(&self.heat) {
            *b *= h;
        }
        self.fft.inverse(&mut self.buffer);
        for (v, b) in self.u.iter_mut().zip(&self.buffer) {
            *v = b.re;
        }
    }

    fn check_positive(&self, stage: &str) -> Result<()> {
        if let Some(v) = self.u.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::Stability {
                time: self.time,
                reason: format!(
                    "field value {v:e} after the {stage}; refine the grid (larger N) or reduce dt"
                ),
            });
        }
        Ok(())
    }

    /// Advances one step and returns the log-mass increment.
    pub fn step(&mut self) -> Result<f64> {
        if self.beta == 0.0 && self.flat {
            // the flat state is a fixed point of the heat flow
            self.time += self.dt;
            return Ok(0.0);
        }
        let mut xi = std::mem::take(&mut self.xi);
        self.sampler.fill(&mut self.rng, &mut xi);
        let result = self.advance(&xi);
        self.xi = xi;
        result
    }

    /// Advances one step with a caller-supplied unit-time noise slice `xi`
    /// (covariance `R_per`), bypassing the internal stream.
    pub fn step_with_noise(&mut self, xi: &[f64]) -> Result<f64> {
        assert_eq!(xi.len(), self.u.len());
        self.advance(xi)
    }

    /// Draws the next noise slice from the internal stream without using it.
    pub fn draw_noise(&mut self, out: &mut [f64]) {
        self.sampler.fill(&mut self.rng, out);
    }

    fn advance(&mut self, xi: &[f64]) -> Result<f64> {
        self.heat_half_step();
        self.check_positive("first heat half-step")?;
        for (v, &x) in self.u.iter_mut().zip(xi) {
            *v *= (self.amplitude * x - self.drift).exp();
        }
        for (b, &v) in self.buffer.iter_mut().zip(&self.u) {
            *b = Complex64::new(v, 0.0);
        }
        self.fft.forward(&mut self.buffer);
        for (b, &h) in self.buffer.iter_mut().zip(&self.heat) {
            *b *= h;
        }
        let zero = self.buffer[0].re;
        for (f, b) in self.fourier.iter_mut().zip(&self.buffer) {
            *f = *b / zero;
        }
        self.fft.inverse(&mut self.buffer);
        for (v, b) in self.u.iter_mut().zip(&self.buffer) {
            *v = b.re;
        }
        self.check_positive("second heat half-step")?;
        let mean = self.u.iter().sum::<f64>() / self.u.len() as f64;
        self.u.iter_mut().for_each(|v| *v /= mean);
        let increment = if self.beta == 0.0 { 0.0 } else { mean.ln() };
        self.log_z += increment;
        self.time += self.dt;
        self.flat = false;
        Ok(increment)
    }

    pub fn state(&self) -> SimState {
        SimState {
            field: GridField::new(self.spec, self.u.clone()).expect("finite field"),
            log_z: self.log_z,
            time: self.time,
        }
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `|ρ̂(n)|²` per DFT slot; the zero slot is exactly one.
    pub fn density_power(&self, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.fourier) {
            *o = c.norm_sqr();
        }
        out[0] = 1.0;
    }

    /// The instantaneous overlap `-½β² L^{-d} Σ_n R̂(n/L) |ρ̂(n)|²`.
    pub fn overlap(&self) -> f64 {
        let sum: f64 = self
            .fourier
            .iter()
            .zip(&self.r_hat)
            .skip(1)
            .map(|(c, r)| r * c.norm_sqr())
            .sum::<f64>()
            + self.r_hat[0];
        -0.5 * self.beta * self.beta * sum / self.spec.torus().volume()
    }

    /// For each test function `f`, the pair
    /// `(∫ f ρ (R*ρ), ∫ f ρ · ∫ ρ (R*ρ))`.
    pub fn hierarchy_terms(&mut self, tests: &[Vec<f64>], out: &mut [(f64, f64)]) {
        for ((b, c), r) in self.buffer.iter_mut().zip(&self.fourier).zip(&self.r_hat) {
            *b = *c * *r;
        }
        self.fft.inverse(&mut self.buffer);
        let volume = self.spec.torus().volume();
        let count = self.u.len() as f64;
        // ρ = u / L^d and R*ρ = Re(buffer) / L^d
        let pair: f64 = self.u.iter().zip(&self.buffer).map(|(u, g)| u * g.re).sum();
        let energy = pair / (count * volume);
        for (f, o) in tests.iter().zip(out.iter_mut()) {
            let mut a = 0.0;
            let mut m = 0.0;
            for ((fj, uj), gj) in f.iter().zip(&self.u).zip(&self.buffer) {
                a += fj * uj * gj.re;
                m += fj * uj;
            }
            *o = (a / (count * volume), m / count * energy);
        }
    }

    /// Translation-averaged `ρ(x)ρ(x+r_a)ρ(x+r_b)` for `a ≤ b` on a coarse
    /// separation grid (d = 1), added to `out` in row-major upper-triangle order.
    fn accumulate_q3(&self, points: usize, out: &mut [f64]) {
        let n = self.u.len();
        let stride = n / points;
        let volume = self.spec.torus().volume();
        let scale = 1.0 / (n as f64 * volume.powi(3));
        let mut idx = 0;
        for a in 0..points {
            for b in a..points {
                let (ra, rb) = (a * stride, b * stride);
                let s: f64 = (0..n)
                    .map(|j| self.u[j] * self.u[(j + ra) % n] * self.u[(j + rb) % n])
                    .sum();
                out[idx] += s * scale;
                idx += 1;
            }
        }
    }
}

/// One step of the simulation from an arbitrary valid state.
pub fn she_step<R: Rng>(state: &SimState, config: &SimConfig, rng: &mut R) -> Result<SimState> {
    config.plan()?;
    let mut sim = Simulator::new(config, state, rng)?;
    sim.step()?;
    Ok(sim.state())
}

/// Per-batch sums of one replica.
#[derive(Debug, Clone, PartialEq)]
struct BatchSums {
    steps: u64,
    increments: f64,
    overlap: f64,
    power: Vec<f64>,
    lhs: Vec<f64>,
    rhs: Vec<f64>,
    q3: Vec<f64>,
    q3_slices: u64,
}

impl BatchSums {
    fn new(len: usize, modes: usize, q3_len: usize) -> Self {
        Self {
            steps: 0,
            increments: 0.0,
            overlap: 0.0,
            power: vec![0.0; len],
            lhs: vec![0.0; modes],
            rhs: vec![0.0; modes],
            q3: vec![0.0; q3_len],
            q3_slices: 0,
        }
    }
}

/// A row of the time trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub time: f64,
    pub replica: usize,
    pub log_z: f64,
    pub overlap: f64,
}

#[derive(Debug)]
struct ReplicaRun {
    batches: Vec<BatchSums>,
    trace: Vec<TraceRow>,
}

const Q3_STRIDE: u64 = 10;

fn q3_points(config: &SimConfig) -> usize {
    if config.torus.dimension() == 1 {
        config.q3_points
    } else {
        0
    }
}

fn test_functions(config: &SimConfig) -> Vec<Vec<f64>> {
    let spec = config.torus;
    let size = spec.size();
    let mut index = vec![0usize; spec.dimension()];
    config
        .test_modes
        .iter()
        .map(|&m| {
            (0..spec.len())
                .map(|j| {
                    spec.unflatten(j, &mut index);
                    (2.0 * PI * m as f64 * spec.coordinate(index[0]) / size).cos()
                })
                .collect()
        })
        .collect()
}

fn run_replica(config: &SimConfig, plan: &RunPlan, replica: usize) -> Result<ReplicaRun> {
    let spec = config.torus;
    let rng = replica_rng(config.seed, replica as u64);
    let mut sim = Simulator::new(config, &SimState::flat(spec), rng)?;
    let tests = test_functions(config);
    let q3_points = q3_points(config);
    let q3_len = q3_points * (q3_points + 1) / 2;
    let skip =
        plan.total_steps - plan.burn_steps - plan.batch_steps * plan.batches_per_replica as u64;
    let start = plan.burn_steps + skip;
    let mut batches =
        vec![BatchSums::new(spec.len(), tests.len(), q3_len); plan.batches_per_replica];
    let mut trace = Vec::new();
    let mut power = vec![0.0; spec.len()];
    let mut terms = vec![(0.0, 0.0); tests.len()];
    for step in 0..plan.total_steps {
        if step % plan.trace_stride == 0 {
            trace.push(trace_row(&sim, replica));
        }
        let increment = sim.step()?;
        if step < start {
            continue;
        }
        let k = step - start;
        let batch = &mut batches[(k / plan.batch_steps) as usize];
        batch.steps += 1;
        batch.increments += increment;
        batch.overlap += sim.overlap();
        sim.density_power(&mut power);
        for (acc, p) in batch.power.iter_mut().zip(&power) {
            *acc += p;
        }
        if !tests.is_empty() {
            sim.hierarchy_terms(&tests, &mut terms);
            for (i, (a, b)) in terms.iter().enumerate() {
                batch.lhs[i] += a;
                batch.rhs[i] += b;
            }
        }
        if q3_points > 0 && k.is_multiple_of(Q3_STRIDE) {
            sim.accumulate_q3(q3_points, &mut batch.q3);
            batch.q3_slices += 1;
        }
    }
    trace.push(trace_row(&sim, replica));
    Ok(ReplicaRun { batches, trace })
}

fn trace_row<R: Rng>(sim: &Simulator<R>, replica: usize) -> TraceRow {
    TraceRow {
        time: sim.time(),
        replica,
        log_z: sim.log_z(),
        overlap: sim.overlap(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeEnergyMethod {
    LogSlope,
    Overlap,
}

/// A Monte Carlo estimate of `γ_L(β)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: FreeEnergyMethod,
    pub fingerprint: String,
    pub batches: usize,
}

/// Three-point function on a coarse separation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Q3Estimate {
    pub points: usize,
    /// Separations `r_a`, `a = 0..points`.
    pub separations: Vec<f64>,
    /// `q₃(r_a, r_b)`, full `points × points` row-major matrix.
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub slices: u64,
}

/// Translation-averaged correlation functions of the endpoint density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    /// `q₂(r)` at the grid nodes read as separations.
    #[serde(skip)]
    pub q2: GridField,
    /// Time-averaged `|ρ̂(n)|²` in DFT slot order.
    pub power: Vec<f64>,
    pub power_stderr: Vec<f64>,
    /// Per-batch averages of `|ρ̂(n)|²`, in replica-major order.
    #[serde(skip)]
    pub power_batches: Vec<Vec<f64>>,
    pub q3: Option<Q3Estimate>,
    pub slices: u64,
    pub batches: usize,
}

/// The n = 1 hierarchy identity for one test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HierarchyResidual {
    pub mode: u32,
    /// `∫ f(x₁) R(x₁-x₂) Q₂(x₁,x₂)`.
    pub lhs: MeanEstimate,
    /// `∫ f(x₁) R(x₂-x₃) Q₃(x₁,x₂,x₃)`.
    pub rhs: MeanEstimate,
    /// `lhs - rhs`, estimated slice by slice.
    pub residual: MeanEstimate,
}

/// Everything one simulation run produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub plan: RunPlan,
    pub log_slope: FreeEnergyEstimate,
    pub overlap: FreeEnergyEstimate,
    pub correlation: CorrelationEstimate,
    pub hierarchy: Vec<HierarchyResidual>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Runs all replicas and reduces them in replica order.
pub fn run_simulation(config: &SimConfig) -> Result<SimulationReport> {
    let plan = config.plan()?;
    let runs: Vec<ReplicaRun> = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, &plan, r))
        .collect::<Result<_>>()?;
    let batches: Vec<&BatchSums> = runs.iter().flat_map(|r| r.batches.iter()).collect();
    let count = batches.len();
    let fingerprint = config.fingerprint();

    let slopes: Vec<f64> = batches
        .iter()
        .map(|b| b.increments / (b.steps as f64 * config.dt))
        .collect();
    let overlaps: Vec<f64> = batches.iter().map(|b| b.overlap / b.steps as f64).collect();
    let estimate = |values: &[f64], method| {
        let e = mean_estimate(values);
        FreeEnergyEstimate {
            value: e.mean,
            stderr: e.stderr,
            method,
            fingerprint: fingerprint.clone(),
            batches: count,
        }
    };
    let log_slope = estimate(&slopes, FreeEnergyMethod::LogSlope);
    let overlap = estimate(&overlaps, FreeEnergyMethod::Overlap);

    let spec = config.torus;
    let power_batches: Vec<Vec<f64>> = batches
        .iter()
        .map(|b| b.power.iter().map(|p| p / b.steps as f64).collect())
        .collect();
    let mut power = vec![0.0; spec.len()];
    let mut power_stderr = vec![0.0; spec.len()];
    let mut column = vec![0.0; count];
    for k in 0..spec.len() {
        for (c, b) in column.iter_mut().zip(&power_batches) {
            *c = b[k];
        }
        let e = mean_estimate(&column);
        power[k] = e.mean;
        power_stderr[k] = e.stderr;
    }
    let volume = spec.torus().volume();
    let coefficients: Vec<f64> = power.iter().map(|p| p / volume).collect();
    let q2 = synthesize_from_slots(spec, &coefficients);

    let q3 = {
        let points = q3_points(config);
        (points > 0).then(|| {
            let per_batch: Vec<Vec<f64>> = batches
                .iter()
                .map(|b| b.q3.iter().map(|v| v / b.q3_slices as f64).collect())
                .collect();
            let mut values = vec![0.0; points * points];
            let mut stderr = vec![0.0; points * points];
            let mut idx = 0;
            for a in 0..points {
                for b in a..points {
                    let col: Vec<f64> = per_batch.iter().map(|v| v[idx]).collect();
                    let e = mean_estimate(&col);
                    for (i, j) in [(a, b), (b, a)] {
                        values[i * points + j] = e.mean;
                        stderr[i * points + j] = e.stderr;
                    }
                    idx += 1;
                }
            }
            let step = spec.size() / points as f64;
            Q3Estimate {
                points,
                separations: (0..points).map(|a| a as f64 * step).collect(),
                values,
                stderr,
                slices: batches.iter().map(|b| b.q3_slices).sum(),
            }
        })
    };

    let hierarchy = config
        .test_modes
        .iter()
        .enumerate()
        .map(|(i, &mode)| {
            let per = |f: &dyn Fn(&BatchSums) -> f64| -> MeanEstimate {
                let v: Vec<f64> = batches.iter().map(|b| f(b) / b.steps as f64).collect();
                mean_estimate(&v)
            };
            HierarchyResidual {
                mode,
                lhs: per(&|b| b.lhs[i]),
                rhs: per(&|b| b.rhs[i]),
                residual: per(&|b| b.lhs[i] - b.rhs[i]),
            }
        })
        .collect();

    let slices = batches.iter().map(|b| b.steps).sum();
    let trace = runs.into_iter().flat_map(|r| r.trace).collect();
    Ok(SimulationReport {
        plan,
        log_slope,
        overlap,
        correlation: CorrelationEstimate {
            q2,
            power,
            power_stderr,
            power_batches,
            q3,
            slices,
            batches: count,
        },
        hierarchy,
        trace,
    })
}

pub fn estimate_free_energy_log_slope(config: &SimConfig) -> Result<FreeEnergyEstimate> {
    Ok(run_simulation(config)?.log_slope)
}

pub fn estimate_free_energy_overlap(config: &SimConfig) -> Result<FreeEnergyEstimate> {
    Ok(run_simulation(config)?.overlap)
}

pub fn estimate_q2(config: &SimConfig) -> Result<CorrelationEstimate> {
    Ok(run_simulation(config)?.correlation)
}

/// Residuals of the n = 1 hierarchy identity for the given test wave numbers.
pub fn hierarchy_residual_n1(
    config: &SimConfig,
    test_modes: &[u32],
) -> Result<Vec<HierarchyResidual>> {
    let mut config = config.clone();
    config.test_modes = test_modes.to_vec();
    Ok(run_simulation(&config)?.hierarchy)
}
