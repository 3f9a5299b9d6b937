//! Closed forms for `d = 1` spacetime white noise.
//!
//! With `Y_λ = ∫_0^1 e^{λB(x)} dx` for a standard Brownian bridge `B`, the free
//! energy is `γ_L(β) = -(β²/2L) E Y_λ^{-2}` at `λ = β√L`, and
//!
//! `E Y_λ^{-2} = (λ⁴/2π) e^{2π²/λ²} ∫_0^∞ (e^y - e^{-y}) / (e^{y/2} + e^{-y/2})⁶
//!               · e^{-2y²/λ²} sin(4πy/λ²) dy`.
//!
//! The prefactor cancels an integral of size `e^{-2π²/λ²}`, so the method is
//! chosen by `λ`: double-precision quadrature for `λ ≥ λ*`, a short power
//! series for `λ < λ_s`, and extended precision in between.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{inverse_square_moment_extended, DEFAULT_DIGITS};
use crate::quadrature::{integrate, QuadConfig};

/// Published value of the `λ⁴` series coefficient, `1781/420`.
pub const PUBLISHED_A4: f64 = 1781.0 / 420.0;

/// `λ` values of the extended-precision evaluations behind the fitted series.
pub const FIT_LAMBDAS: [f64; 4] = [0.1, 0.15, 0.2, 0.3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    Published,
    OracleFit,
}

/// Coefficients of `E Y_λ^{-2} ≈ 1 + a₂λ² + a₄λ⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub a2: f64,
    pub a4: f64,
    pub source: CoefficientSource,
    /// One-standard-error uncertainties; zero for the published values.
    #[serde(default)]
    pub a2_uncertainty: f64,
    #[serde(default)]
    pub a4_uncertainty: f64,
}

impl SeriesCoefficients {
    /// `a₂ = 1/12`, `a₄ = 1781/420`.
    pub fn published() -> Self {
        Self {
            a2: 1.0 / 12.0,
            a4: PUBLISHED_A4,
            source: CoefficientSource::Published,
            a2_uncertainty: 0.0,
            a4_uncertainty: 0.0,
        }
    }

    /// Coefficients fitted once per process from extended-precision
    /// evaluations at [`FIT_LAMBDAS`].
    pub fn fitted() -> Result<Self> {
        static FITTED: OnceLock<std::result::Result<SeriesCoefficients, Error>> = OnceLock::new();
        FITTED
            .get_or_init(|| {
                let evals = FIT_LAMBDAS
                    .iter()
                    .map(|&l| {
                        let r = inverse_square_moment_extended(l, DEFAULT_DIGITS)?;
                        Ok(PrecisionEval {
                            lambda: l,
                            excess: r.excess,
                            error: r.error,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                fit_series_coefficient(&evals)
            })
            .clone()
    }

    pub fn evaluate(&self, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        1.0 + l2 * (self.a2 + self.a4 * l2)
    }
}

impl Default for SeriesCoefficients {
    fn default() -> Self {
        Self::published()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    Quadrature,
    Series,
    ExtendedPrecision,
}

/// Method choice for [`inverse_square_moment_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Quadrature,
    Series,
    ExtendedPrecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    /// `λ*`: quadrature is trusted at and above this value.
    pub quadrature_threshold: f64,
    /// `λ_s`: the series is used below this value.
    pub series_threshold: f64,
    /// Relative accuracy requested from double-precision quadrature.
    pub quadrature_rel_tol: f64,
    /// Series coefficients; `None` uses [`SeriesCoefficients::fitted`].
    pub series: Option<SeriesCoefficients>,
    pub extended_digits: u32,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            quadrature_threshold: 1.0,
            series_threshold: 0.5,
            quadrature_rel_tol: 1e-12,
            series: None,
            extended_digits: DEFAULT_DIGITS,
        }
    }
}

impl MomentConfig {
    fn coefficients(&self) -> Result<SeriesCoefficients> {
        match self.series {
            Some(c) => Ok(c),
            None => SeriesCoefficients::fitted(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YorMomentResult {
    pub lambda: f64,
    /// `E Y_λ^{-2}`.
    pub value: f64,
    pub method: MomentMethod,
    pub error_estimate: f64,
}

/// `(e^y - e^{-y}) / (e^{y/2} + e^{-y/2})⁶` without overflow.
fn bridge_kernel(y: f64) -> f64 {
    let e = (-y).exp();
    let e2 = e * e;
    e2 * (1.0 - e2) / (1.0 + e).powi(6)
}

/// `∫_0^∞ bridge_kernel(y) dy = 1/32`; used to bound rounding error.
const KERNEL_MASS: f64 = 1.0 / 32.0;

/// `(λ⁴/2π) e^{2π²/λ²}`.
fn moment_prefactor(lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    l2 * l2 / (2.0 * PI) * (2.0 * PI * PI / l2).exp()
}

/// `E Y_λ^{-2}` with automatic method selection and default settings.
pub fn inverse_square_moment(lambda: f64) -> Result<YorMomentResult> {
    inverse_square_moment_with(lambda, MethodChoice::Auto, &MomentConfig::default())
}

pub fn inverse_square_moment_with(
    lambda: f64,
    choice: MethodChoice,
    config: &MomentConfig,
) -> Result<YorMomentResult> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "λ must be positive, got {lambda}"
        )));
    }
    let method = match choice {
        MethodChoice::Auto if lambda >= config.quadrature_threshold => MomentMethod::Quadrature,
        MethodChoice::Auto if lambda < config.series_threshold => MomentMethod::Series,
        MethodChoice::Auto => MomentMethod::ExtendedPrecision,
        MethodChoice::Quadrature => MomentMethod::Quadrature,
        MethodChoice::Series => MomentMethod::Series,
        MethodChoice::ExtendedPrecision => MomentMethod::ExtendedPrecision,
    };
    match method {
        MomentMethod::Quadrature => {
            if lambda < config.quadrature_threshold {
                return Err(Error::Precision(format!(
                    "double-precision quadrature at λ = {lambda} < λ* = {} loses more than {:.0} \
                     of 16 digits to cancellation; use extended_precision",
                    config.quadrature_threshold,
                    2.0 * PI * PI / (lambda * lambda * std::f64::consts::LN_10)
                )));
            }
            moment_by_quadrature(lambda, config.quadrature_rel_tol)
        }
        MomentMethod::Series => {
            let c = config.coefficients()?;
            let l2 = lambda * lambda;
            let error = l2 * l2 * l2 + c.a2_uncertainty * l2 + c.a4_uncertainty * l2 * l2;
            Ok(YorMomentResult {
                lambda,
                value: c.evaluate(lambda),
                method,
                error_estimate: error,
            })
        }
        MomentMethod::ExtendedPrecision => {
            let r = inverse_square_moment_extended(lambda, config.extended_digits)?;
            Ok(YorMomentResult {
                lambda,
                value: r.value,
                method,
                error_estimate: r.error,
            })
        }
    }
}

/// Upper limit beyond which `|integrand| · prefactor < e^{-45}`.
fn moment_cutoff(lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    // 2y + 2y²/λ² = 2π²/λ² + 4 ln λ + 45
    let rhs = 2.0 * PI * PI / l2 + 4.0 * lambda.ln().max(0.0) + 45.0;
    let a = 2.0 / l2;
    (-2.0 + (4.0 + 4.0 * a * rhs).sqrt()) / (2.0 * a)
}

fn moment_by_quadrature(lambda: f64, rel_tol: f64) -> Result<YorMomentResult> {
    let l2 = lambda * lambda;
    let prefactor = moment_prefactor(lambda);
    let roundoff = 8.0 * f64::EPSILON * KERNEL_MASS;
    let cfg = QuadConfig::absolute((rel_tol / prefactor).max(roundoff))
        .with_max_panel_length(l2 / 8.0)
        .with_max_panels(200_000);
    let omega = 4.0 * PI / l2;
    let r = integrate(
        |y| bridge_kernel(y) * (-2.0 * y * y / l2).exp() * (omega * y).sin(),
        0.0,
        moment_cutoff(lambda),
        &cfg,
    )?;
    Ok(YorMomentResult {
        lambda,
        value: prefactor * r.value,
        method: MomentMethod::Quadrature,
        error_estimate: prefactor * (r.error + roundoff),
    })
}

/// Density `f_λ(z)` of `Y_λ`.
pub fn yor_density(lambda: f64, z: f64, abs_tol: f64) -> Result<f64> {
    yor_density_with(lambda, z, abs_tol, 1.0)
}

/// As [`yor_density`] with an explicit cancellation threshold `λ*`.
pub fn yor_density_with(lambda: f64, z: f64, abs_tol: f64, threshold: f64) -> Result<f64> {
    if !(lambda > 0.0 && z > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "the density needs λ > 0 and z > 0, got λ = {lambda}, z = {z}"
        )));
    }
    if lambda < threshold {
        return Err(Error::Precision(format!(
            "density at λ = {lambda} < λ* = {threshold} cancels more digits than double \
             precision holds; use extended_precision"
        )));
    }
    let l2 = lambda * lambda;
    let lead = 4.0 / (PI * l2 * z * z);
    let shift = 2.0 * PI * PI / l2;
    let omega = 4.0 * PI / l2;
    let integrand = |y: f64| {
        let expo = shift - 2.0 * y * y / l2 - 4.0 * (1.0 + y.cosh()) / (l2 * z);
        expo.exp() * y.sinh() * (omega * y).sin()
    };
    // the integrand is below e^{-60} of its scale once the Gaussian and the
    // sinh growth balance far out
    let cutoff = 0.25 * l2 * (1.0 + (1.0 + 8.0 * (shift + 60.0) / l2).sqrt());
    let cfg = QuadConfig::absolute(abs_tol / lead)
        .with_max_panel_length(l2 / 8.0)
        .with_max_panels(100_000);
    let r = integrate(integrand, 0.0, cutoff, &cfg)?;
    Ok(lead * r.value)
}

/// Distribution function of `Y_λ`, tabulated from the density on a
/// logarithmic grid and interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct YorCdf {
    log_z: Vec<f64>,
    cdf: Vec<f64>,
    /// Integrated density over the table; one up to truncation.
    pub mass: f64,
}

impl YorCdf {
    /// Tabulates on `nodes` points in `[z_min, z_max]` using Simpson panels in
    /// `s = ln z`.
    pub fn new(lambda: f64, z_min: f64, z_max: f64, nodes: usize) -> Result<Self> {
        if !(z_min > 0.0 && z_max > z_min) || nodes < 3 {
            return Err(Error::InvalidParameter(
                "the table needs 0 < z_min < z_max and at least 3 nodes".into(),
            ));
        }
        let (a, b) = (z_min.ln(), z_max.ln());
        let step = (b - a) / (nodes - 1) as f64;
        let log_z: Vec<f64> = (0..nodes).map(|i| a + step * i as f64).collect();
        let weight = |s: f64| -> Result<f64> {
            let z = s.exp();
            Ok(yor_density(lambda, z, 1e-13)? * z)
        };
        let mut cdf = vec![0.0; nodes];
        let mut left = weight(log_z[0])?;
        for i in 1..nodes {
            let mid = weight(log_z[i - 1] + 0.5 * step)?;
            let right = weight(log_z[i])?;
            cdf[i] = cdf[i - 1] + step / 6.0 * (left + 4.0 * mid + right);
            left = right;
        }
        let mass = cdf[nodes - 1];
        Ok(Self { log_z, cdf, mass })
    }

    pub fn eval(&self, z: f64) -> f64 {
        let n = self.log_z.len();
        if !(z > 0.0) || z.ln() <= self.log_z[0] {
            return 0.0;
        }
        let s = z.ln();
        if s >= self.log_z[n - 1] {
            return self.mass;
        }
        let step = self.log_z[1] - self.log_z[0];
        let i = (((s - self.log_z[0]) / step) as usize).min(n - 2);
        let t = (s - self.log_z[i]) / step;
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }
}

/// `γ_L(β) = -(β²/2L) E Y_{β√L}^{-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WhiteNoiseFreeEnergy {
    pub gamma: f64,
    pub lambda: f64,
    pub method: MomentMethod,
    pub error_estimate: f64,
}

pub fn free_energy_white_noise(beta: f64, size: f64) -> Result<WhiteNoiseFreeEnergy> {
    free_energy_white_noise_with(beta, size, MethodChoice::Auto, &MomentConfig::default())
}

pub fn free_energy_white_noise_with(
    beta: f64,
    size: f64,
    choice: MethodChoice,
    config: &MomentConfig,
) -> Result<WhiteNoiseFreeEnergy> {
    if !(beta > 0.0 && size > 0.0 && beta.is_finite() && size.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "white-noise free energy needs β > 0 and L > 0, got β = {beta}, L = {size}"
        )));
    }
    let lambda = beta * size.sqrt();
    let m = inverse_square_moment_with(lambda, choice, config)?;
    let scale = beta * beta / (2.0 * size);
    Ok(WhiteNoiseFreeEnergy {
        gamma: -scale * m.value,
        lambda,
        method: m.method,
        error_estimate: scale * m.error_estimate,
    })
}

/// The single-integral form
/// `γ_L(β) = -(β⁶L/4π) e^{2π²/(β²L)} ∫_0^∞ … dy` in the variables `β, L`.
pub fn free_energy_white_noise_direct(beta: f64, size: f64, rel_tol: f64) -> Result<QuadValue> {
    if !(beta > 0.0 && size > 0.0) {
        return Err(Error::InvalidParameter("β and L must be positive".into()));
    }
    let b2l = beta * beta * size;
    let prefactor = beta.powi(6) * size / (4.0 * PI) * (2.0 * PI * PI / b2l).exp();
    let roundoff = 8.0 * f64::EPSILON * KERNEL_MASS;
    let cfg = QuadConfig::absolute((rel_tol * beta * beta / size / prefactor).max(roundoff))
        .with_max_panel_length(b2l / 8.0)
        .with_max_panels(200_000);
    let r = integrate(
        |y| bridge_kernel(y) * (-2.0 * y * y / b2l).exp() * (4.0 * PI * y / b2l).sin(),
        0.0,
        moment_cutoff(b2l.sqrt()),
        &cfg,
    )?;
    Ok(QuadValue {
        value: -prefactor * r.value,
        error: prefactor * (r.error + roundoff),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadValue {
    pub value: f64,
    pub error: f64,
}

/// `c = ∫_0^∞ y (e^y - e^{-y}) / (e^{y/2} + e^{-y/2})⁶ dy`.
pub fn constant_c() -> QuadValue {
    constant_c_with_tol(1e-13)
}

pub fn constant_c_with_tol(tol: f64) -> QuadValue {
    // y e^{-2y} < 1e-32 beyond y = 40
    let r = integrate(
        |y| y * bridge_kernel(y),
        0.0,
        40.0,
        &QuadConfig::absolute(tol),
    )
    .expect("smooth integrand on a finite interval");
    QuadValue {
        value: r.value,
        error: r.error,
    }
}

/// Jensen lower bound `(E Y_λ)^{-2}` with `E Y_λ = ∫_0^1 e^{λ²x(1-x)/2} dx`.
pub fn jensen_lower_bound(lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    let mean = integrate(
        |x| (0.5 * l2 * x * (1.0 - x)).exp(),
        0.0,
        1.0,
        &QuadConfig {
            rel_tol: 1e-14,
            ..QuadConfig::absolute(0.0)
        },
    )
    .expect("smooth integrand on [0, 1]")
    .value;
    mean.powi(-2)
}

/// One extended-precision evaluation used by [`fit_series_coefficient`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEval {
    pub lambda: f64,
    /// `E Y_λ^{-2} - 1`.
    pub excess: f64,
    pub error: f64,
}

/// Fits `(E Y_λ^{-2} - 1)/λ² = a₂ + a₄λ² + a₆λ⁴` by weighted least squares.
/// Dividing by `λ²` removes the constant term; the fitted slope in `λ²` is
/// `a₄`. Uncertainties propagate the per-point error estimates.
pub fn fit_series_coefficient(evals: &[PrecisionEval]) -> Result<SeriesCoefficients> {
    if evals.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "the a4 fit needs at least 3 evaluations, got {}",
            evals.len()
        )));
    }
    if evals
        .iter()
        .any(|e| !(e.lambda > 0.0) || !e.excess.is_finite())
    {
        return Err(Error::InvalidParameter(
            "evaluations must have λ > 0 and finite values".into(),
        ));
    }
    let x: Vec<f64> = evals.iter().map(|e| e.lambda * e.lambda).collect();
    let y: Vec<f64> = evals.iter().zip(&x).map(|(e, x)| e.excess / x).collect();
    // floor keeps the weights finite when an error estimate underflows
    let sigma: Vec<f64> = evals
        .iter()
        .zip(&x)
        .zip(&y)
        .map(|((e, x), y)| (e.error / x).max(4.0 * f64::EPSILON * y.abs().max(1e-300)))
        .collect();
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    // normal equations for basis (1, x, x²), scaled by the largest x
    let xs = x.iter().cloned().fold(0.0, f64::max);
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for i in 0..x.len() {
        let t = x[i] / xs;
        let row = [1.0, t, t * t];
        for r in 0..3 {
            aty[r] += w[i] * row[r] * y[i];
            for c in 0..3 {
                ata[r][c] += w[i] * row[r] * row[c];
            }
        }
    }
    let inv = invert3(&ata).ok_or_else(|| Error::IllConditioned {
        condition: f64::INFINITY,
        reason: "singular normal equations; λ values must be distinct".into(),
    })?;
    let condition = norm_inf(&ata) * norm_inf(&inv);
    if condition > 1e12 {
        return Err(Error::IllConditioned {
            condition,
            reason: "λ values too close together to separate the λ² and λ⁴ terms".into(),
        });
    }
    let coef: Vec<f64> = (0..3)
        .map(|r| (0..3).map(|c| inv[r][c] * aty[c]).sum())
        .collect();
    Ok(SeriesCoefficients {
        a2: coef[0],
        a4: coef[1] / xs,
        source: CoefficientSource::OracleFit,
        a2_uncertainty: inv[0][0].sqrt(),
        a4_uncertainty: inv[1][1].sqrt() / xs,
    })
}

#[allow(clippy::needless_range_loop)]
fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Some(inv)
}

fn norm_inf(m: &[[f64; 3]; 3]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
