//! Coefficients of the high-temperature expansion
//! `γ_L(β) = γ₂ β² + γ₄ β⁴ + O(β⁶)` and their large-torus limits.
//!
//! `γ₂ = -1/(2L^d)` and
//! `γ₄ = -1/(8π² L^{2d-2}) Σ_{n≠0} R̂(n/L)² / |n|²`.
//! The lattice sum is truncated to the cube `|n|_∞ ≤ N` with `N` chosen from a
//! closed-form tail bound built on the sinc envelope of `R̂`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::covariance::{CovarianceModel, Family};
use crate::error::{Error, Result};
use crate::grid::Torus;
use crate::lattice::{shell_sum, AxisEnvelope, TruncationPlan, DEFAULT_MAX_TERMS};
use crate::quadrature::{integrate, QuadConfig};
use crate::stats::linear_fit;

/// The two leading coefficients with their truncation certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionResult {
    pub gamma2: f64,
    pub gamma4: f64,
    /// Cube radius `N_max` of the lattice sum.
    pub truncation_radius: usize,
    /// Certified bound on `|gamma4 - exact|` from the omitted modes.
    pub tail_bound: f64,
}

/// `γ₂ = -1/(2L^d)`.
pub fn gamma2(torus: &Torus) -> f64 {
    -0.5 / torus.volume()
}

/// Per-axis envelope of `R̂(n/L)²`.
pub(crate) fn squared_envelope(model: &CovarianceModel, size: f64) -> AxisEnvelope {
    match (model.knot_spacing(), model.order()) {
        (Some(h), Some(k)) => AxisEnvelope::Power {
            scale: size / (PI * h),
            power: 4 * k,
        },
        _ => AxisEnvelope::Flat,
    }
}

/// `R̂(m/L)²` for `m = 0..=n_max`.
pub(crate) fn squared_axis_table(model: &CovarianceModel, size: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|m| model.axis_transform(m as f64 / size).powi(2))
        .collect()
}

/// `Σ_{0<|n|_∞≤N} Π_i t[|n_i|] / |n|²` in shell order.
pub(crate) fn inverse_square_sum(dimension: usize, table: &[f64], n_max: usize) -> f64 {
    shell_sum(dimension, n_max, |n| {
        let mut weight = 1.0;
        let mut norm2 = 0usize;
        for &m in n {
            weight *= table[m];
            norm2 += m * m;
        }
        weight / norm2 as f64
    })
}

fn gamma4_prefactor(torus: &Torus) -> f64 {
    -1.0 / (8.0 * PI * PI * torus.size().powi(2 * torus.dimension() as i32 - 2))
}

/// `γ₄` to absolute accuracy `tol`, with the default term budget.
pub fn gamma4(model: &CovarianceModel, torus: &Torus, tol: f64) -> Result<ExpansionResult> {
    gamma4_with_budget(model, torus, tol, DEFAULT_MAX_TERMS)
}

pub fn gamma4_with_budget(
    model: &CovarianceModel,
    torus: &Torus,
    tol: f64,
    max_terms: u64,
) -> Result<ExpansionResult> {
    model.check_fits(torus)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let scale = gamma4_prefactor(torus).abs();
    let plan = squared_envelope(model, torus.size())
        .plan_for_target(torus.dimension(), tol / scale, max_terms)
        .map_err(|e| rescale_truncation(e, scale))?;
    Ok(evaluate_plan(model, torus, plan))
}

/// `γ₄` summed over the cube of radius `n_max`, with the tail bound it
/// certifies.
pub fn gamma4_at_radius(
    model: &CovarianceModel,
    torus: &Torus,
    n_max: usize,
) -> Result<ExpansionResult> {
    model.check_fits(torus)?;
    let plan = squared_envelope(model, torus.size()).plan(torus.dimension(), n_max)?;
    Ok(evaluate_plan(model, torus, plan))
}

fn evaluate_plan(model: &CovarianceModel, torus: &Torus, plan: TruncationPlan) -> ExpansionResult {
    let table = squared_axis_table(model, torus.size(), plan.n_max);
    let sum = inverse_square_sum(torus.dimension(), &table, plan.n_max) + plan.correction;
    let prefactor = gamma4_prefactor(torus);
    ExpansionResult {
        gamma2: gamma2(torus),
        gamma4: prefactor * sum,
        truncation_radius: plan.n_max,
        tail_bound: prefactor.abs() * plan.tail_bound,
    }
}

fn rescale_truncation(err: Error, scale: f64) -> Error {
    match err {
        Error::Truncation {
            requested,
            achievable,
            n_max,
            max_terms,
        } => Error::Truncation {
            requested: requested * scale,
            achievable: achievable * scale,
            n_max,
            max_terms,
        },
        other => other,
    }
}

/// `γ₄` for an arbitrary nonnegative even spectrum `n ↦ R̂(n/L)`, summed over
/// the cube of radius `n_max` without a tail certificate.
pub fn gamma4_from_spectrum<F>(torus: &Torus, n_max: usize, spectrum: F) -> f64
where
    F: Fn(&[i64]) -> f64 + Sync,
{
    let sum = shell_sum(torus.dimension(), n_max, |n| {
        let signed: Vec<i64> = n.iter().map(|&m| m as i64).collect();
        let norm2: i64 = signed.iter().map(|m| m * m).sum();
        spectrum(&signed).powi(2) / norm2 as f64
    });
    gamma4_prefactor(torus) * sum
}

/// `γ₂ β² + γ₄ β⁴`.
pub fn free_energy_expansion(
    beta: f64,
    model: &CovarianceModel,
    torus: &Torus,
    tol: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "the expansion needs 0 <= β < 1, got {beta}"
        )));
    }
    let r = gamma4(model, torus, tol)?;
    let b2 = beta * beta;
    Ok(r.gamma2 * b2 + r.gamma4 * b2 * b2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    D1Constant,
    D2LogSlope,
    D3Integral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitDiagnostics {
    pub sizes: Vec<f64>,
    pub gamma4: Vec<f64>,
    /// `γ₄` for `d = 1`, `L²γ₄` for `d = 2`, `L³γ₄` for `d = 3`.
    pub scaled: Vec<f64>,
    /// Distance to the limit (`d = 1, 3`) or fit residuals (`d = 2`).
    pub residuals: Vec<f64>,
    /// Fitted exponent of `|γ₄ + 1/24|` in `L` (`d = 1`).
    pub rate: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitResult {
    pub dimension: usize,
    pub limit_kind: LimitKind,
    pub value: f64,
    pub diagnostics: LimitDiagnostics,
}

/// The `d = 1` limit value, `-1/24`.
pub const D1_LIMIT: f64 = -1.0 / 24.0;

fn check_sizes(sizes: &[f64]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no torus sizes given".into()));
    }
    if sizes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "torus sizes must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn scaled_sequence(
    model: &CovarianceModel,
    sizes: &[f64],
    scaled_tol: f64,
    power: i32,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = model.dimension();
    let mut gamma = Vec::with_capacity(sizes.len());
    let mut scaled = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let torus = Torus::new(d, size)?;
        let tol = scaled_tol / size.powi(power);
        let g = gamma4(model, &torus, tol)?.gamma4;
        gamma.push(g);
        scaled.push(g * size.powi(power));
    }
    Ok((gamma, scaled))
}

/// `γ₄(L)` along increasing sizes in `d = 1`, with the observed convergence
/// rate toward `-1/24`.
pub fn limit_d1(model: &CovarianceModel, sizes: &[f64], tol: f64) -> Result<LimitResult> {
    if model.dimension() != 1 {
        return Err(Error::InvalidParameter(
            "limit_d1 needs a 1-dimensional model".into(),
        ));
    }
    check_sizes(sizes)?;
    let (gamma, scaled) = scaled_sequence(model, sizes, tol, 0)?;
    let residuals: Vec<f64> = gamma.iter().map(|g| g - D1_LIMIT).collect();
    let mut warnings = Vec::new();
    if residuals.windows(2).any(|w| w[1].abs() > w[0].abs()) {
        warnings.push("distance to -1/24 is not monotonically decreasing".to_string());
    }
    let usable: Vec<(f64, f64)> = sizes
        .iter()
        .zip(&residuals)
        .filter(|(_, r)| r.abs() > 10.0 * tol)
        .map(|(l, r)| (l.ln(), r.abs().ln()))
        .collect();
    let (rate, slope_stderr) = if usable.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
        let fit = linear_fit(&x, &y)?;
        (Some(fit.slope), Some(fit.slope_stderr))
    } else {
        (None, None)
    };
    Ok(LimitResult {
        dimension: 1,
        limit_kind: LimitKind::D1Constant,
        value: *gamma.last().expect("sizes is nonempty"),
        diagnostics: LimitDiagnostics {
            sizes: sizes.to_vec(),
            gamma4: gamma,
            scaled,
            residuals,
            rate,
            slope_stderr,
            warnings,
        },
    })
}

/// Least-squares slope of `L²γ₄(L)` against `log L` in `d = 2`.
pub fn limit_d2_log_slope(
    model: &CovarianceModel,
    sizes: &[f64],
    scaled_tol: f64,
) -> Result<LimitResult> {
    if model.dimension() != 2 {
        return Err(Error::InvalidParameter(
            "limit_d2_log_slope needs a 2-dimensional model".into(),
        ));
    }
    if model.family() == Family::FlatSpectrum {
        return Err(Error::UnsupportedModel(
            "Σ |n|^-2 diverges in d = 2; the flat spectrum has no log-slope limit".into(),
        ));
    }
    check_sizes(sizes)?;
    if sizes.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "the log-slope fit needs at least 4 sizes, got {}",
            sizes.len()
        )));
    }
    if sizes[sizes.len() - 1] < 8.0 * sizes[0] {
        return Err(Error::InvalidParameter(
            "sizes must span at least a factor of 8".into(),
        ));
    }
    let (gamma, scaled) = scaled_sequence(model, sizes, scaled_tol, 2)?;
    let logs: Vec<f64> = sizes.iter().map(|l| l.ln()).collect();
    let fit = linear_fit(&logs, &scaled)?;
    Ok(LimitResult {
        dimension: 2,
        limit_kind: LimitKind::D2LogSlope,
        value: fit.slope,
        diagnostics: LimitDiagnostics {
            sizes: sizes.to_vec(),
            gamma4: gamma,
            scaled,
            residuals: fit.residuals,
            rate: None,
            slope_stderr: Some(fit.slope_stderr),
            warnings: Vec::new(),
        },
    })
}

/// `L^dγ₄(L)` for `d ≥ 3` together with the continuum limit
/// `-(1/8π²) ∫ R̂(ξ)² / |ξ|² dξ`.
pub fn limit_d3_integral(
    model: &CovarianceModel,
    sizes: &[f64],
    quad_tol: f64,
) -> Result<LimitResult> {
    let d = model.dimension();
    if d < 3 {
        return Err(Error::InvalidParameter(
            "the continuum integral limit needs d >= 3".into(),
        ));
    }
    if model.family() == Family::FlatSpectrum {
        return Err(Error::UnsupportedModel(
            "the flat spectrum has no finite continuum integral".into(),
        ));
    }
    check_sizes(sizes)?;
    let integral = continuum_integral_tensor(model, quad_tol)?;
    let limit = -integral / (8.0 * PI * PI);
    let (gamma, scaled) = scaled_sequence(model, sizes, quad_tol, d as i32)?;
    let residuals: Vec<f64> = scaled.iter().map(|s| s - limit).collect();
    Ok(LimitResult {
        dimension: d,
        limit_kind: LimitKind::D3Integral,
        value: limit,
        diagnostics: LimitDiagnostics {
            sizes: sizes.to_vec(),
            gamma4: gamma,
            scaled,
            residuals,
            rate: None,
            slope_stderr: None,
            warnings: Vec::new(),
        },
    })
}

/// Radius beyond which the per-axis envelope `(πhξ)^{-4k}` integrates to
/// less than `tol`.
fn axis_cutoff(model: &CovarianceModel, tol: f64) -> f64 {
    let h = model.knot_spacing().expect("B-spline model");
    let p = 4.0 * model.order().expect("B-spline model") as f64;
    // ∫_X^∞ (πhξ)^{-p} dξ = (πh)^{-p} X^{1-p} / (p-1)
    let x = ((PI * h).powf(-p) / ((p - 1.0) * tol)).powf(1.0 / (p - 1.0));
    x.max(4.0 / h)
}

/// `∫_{ℝ^d} R̂(ξ)² / |ξ|² dξ` via `|ξ|^{-2} = ∫_0^∞ e^{-t|ξ|²} dt`, which
/// turns the integrand into `F(t)^d` with the one-dimensional
/// `F(t) = ∫ e^{-tξ²} R̂₁(ξ)² dξ`.
pub fn continuum_integral_tensor(model: &CovarianceModel, tol: f64) -> Result<f64> {
    let d = model.dimension() as i32;
    let h = model.knot_spacing().ok_or_else(|| {
        Error::UnsupportedModel("the continuum integral needs a B-spline model".into())
    })?;
    let inner_tol = tol * 1e-3;
    let cutoff = axis_cutoff(model, inner_tol);
    let inner_cfg = QuadConfig::absolute(inner_tol)
        .with_max_panel_length(0.5 / h)
        .with_max_panels(100_000);
    let axis = |t: f64| -> Result<f64> {
        let half = integrate(
            |xi| (-t * xi * xi).exp() * model.axis_transform(xi).powi(2),
            0.0,
            cutoff,
            &inner_cfg,
        )?;
        Ok(2.0 * half.value)
    };
    let failure = std::cell::RefCell::new(None);
    let guarded = |t: f64| match axis(t) {
        Ok(v) => v.powi(d),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let outer_cfg = QuadConfig::absolute(0.5 * tol).with_max_panels(10_000);
    // t ∈ [0, 1] directly; t ∈ [1, ∞) through t = u^{-2}
    let near = integrate(guarded, 0.0, 1.0, &outer_cfg)?;
    let far = integrate(
        |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                2.0 * guarded(1.0 / (u * u)) / (u * u * u)
            }
        },
        0.0,
        1.0,
        &outer_cfg,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(near.value + far.value)
}

/// `∫_{ℝ³} f(ξ) / |ξ|² dξ = ∫_0^{r_max} ∫_{S²} f(rω) dω dr` for `f` even in
/// every coordinate and vanishing beyond `r_max`.
pub fn spherical_inverse_square_integral<F>(f: F, r_max: f64, panel: f64, tol: f64) -> Result<f64>
where
    F: Fn(&[f64; 3]) -> f64,
{
    let failure = std::cell::RefCell::new(None);
    let record = |e: Error| {
        failure.borrow_mut().get_or_insert(e);
        0.0
    };
    let angle_tol = tol / (r_max * 8.0 * 4.0);
    let angle_cfg = QuadConfig::absolute(angle_tol).with_max_panels(20_000);
    let octant = |r: f64| -> f64 {
        let polar = |theta: f64| -> f64 {
            let (s, c) = theta.sin_cos();
            let azimuth = integrate(
                |phi: f64| {
                    let (sp, cp) = phi.sin_cos();
                    f(&[r * s * cp, r * s * sp, r * c])
                },
                0.0,
                0.5 * PI,
                &angle_cfg,
            );
            match azimuth {
                Ok(v) => v.value * s,
                Err(e) => record(e),
            }
        };
        match integrate(polar, 0.0, 0.5 * PI, &angle_cfg) {
            Ok(v) => 8.0 * v.value,
            Err(e) => record(e),
        }
    };
    let radial_cfg = QuadConfig::absolute(0.5 * tol)
        .with_max_panel_length(panel)
        .with_max_panels(50_000);
    let total = integrate(octant, 0.0, r_max, &radial_cfg)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(total.value)
}

/// The same continuum integral as [`continuum_integral_tensor`] for `d = 3`,
/// integrated in spherical coordinates.
pub fn continuum_integral_spherical(model: &CovarianceModel, tol: f64) -> Result<f64> {
    if model.dimension() != 3 {
        return Err(Error::InvalidParameter(
            "the spherical route is 3-dimensional".into(),
        ));
    }
    let h = model.knot_spacing().ok_or_else(|| {
        Error::UnsupportedModel("the continuum integral needs a B-spline model".into())
    })?;
    // beyond r_max the largest coordinate exceeds r_max/√3
    let p = 4.0 * model.order().expect("B-spline model") as f64;
    let r_max = 3f64.sqrt()
        * axis_cutoff(model, tol * 1e-2)
            .max(((PI * h).powf(-p) * 4.0 * PI / ((p - 1.0) * tol * 1e-2)).powf(1.0 / (p - 1.0)));
    spherical_inverse_square_integral(
        |xi| model.fourier_transform(xi).powi(2),
        r_max,
        0.5 / h,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(d: usize) -> CovarianceModel {
        CovarianceModel::bspline(d, 2, 1.0).unwrap()
    }

    #[test]
    fn gamma2_values() {
        assert_eq!(gamma2(&Torus::new(1, 1.0).unwrap()), -0.5);
        assert_eq!(gamma2(&Torus::new(2, 4.0).unwrap()), -0.03125);
        assert_eq!(gamma2(&Torus::new(3, 2.0).unwrap()), -0.0625);
    }

    #[test]
    fn flat_d1_is_minus_one_over_24() {
        let flat = CovarianceModel::flat_spectrum(1).unwrap();
        for size in [1.0, 3.0, 17.5] {
            let r = gamma4(&flat, &Torus::new(1, size).unwrap(), 1e-10).unwrap();
            assert!(r.tail_bound <= 1e-10);
            assert!((r.gamma4 + 1.0 / 24.0).abs() <= 1e-10, "{}", r.gamma4);
        }
    }

    #[test]
    fn flat_rejected_in_two_dimensions() {
        let flat = CovarianceModel::flat_spectrum(2).unwrap();
        assert!(gamma4(&flat, &Torus::new(2, 1.0).unwrap(), 1e-6).is_err());
    }

    #[test]
    fn zero_spectrum_gives_zero() {
        let torus = Torus::new(2, 3.0).unwrap();
        let g = gamma4_from_spectrum(&torus, 30, |n| {
            if n.iter().all(|&m| m == 0) {
                1.0
            } else {
                0.0
            }
        });
        assert_eq!(g, 0.0);
    }

    #[test]
    fn generic_spectrum_route_matches_tables() {
        let model = CovarianceModel::bspline(2, 1, 1.5).unwrap();
        let torus = Torus::new(2, 4.0).unwrap();
        let a = gamma4_at_radius(&model, &torus, 40).unwrap().gamma4;
        let b = gamma4_from_spectrum(&torus, 40, |n| {
            let xi: Vec<f64> = n.iter().map(|&m| m as f64 / 4.0).collect();
            model.fourier_transform(&xi)
        });
        assert!(((a - b) / a).abs() < 1e-14);
    }

    #[test]
    fn tolerance_is_honoured() {
        let model = cubic(1);
        let torus = Torus::new(1, 8.0).unwrap();
        let coarse = gamma4(&model, &torus, 1e-6).unwrap();
        let fine = gamma4(&model, &torus, 1e-14).unwrap();
        assert!(coarse.tail_bound <= 1e-6);
        assert!((coarse.gamma4 - fine.gamma4).abs() <= 1e-6 + 1e-14);
        assert!(coarse.truncation_radius < fine.truncation_radius);
        assert!(fine.gamma4 < 0.0 && fine.gamma2 < 0.0);
    }

    #[test]
    fn truncation_error_carries_gamma4_units() {
        let model = cubic(3);
        let torus = Torus::new(3, 8.0).unwrap();
        match gamma4_with_budget(&model, &torus, 1e-30, 10_000) {
            Err(Error::Truncation {
                requested,
                achievable,
                ..
            }) => {
                assert_eq!(requested, 1e-30);
                assert!(achievable > requested);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn expansion_composition() {
        let flat = CovarianceModel::flat_spectrum(1).unwrap();
        let torus = Torus::new(1, 1.0).unwrap();
        assert_eq!(
            free_energy_expansion(0.0, &flat, &torus, 1e-10).unwrap(),
            0.0
        );
        let v = free_energy_expansion(0.1, &flat, &torus, 1e-12).unwrap();
        assert!((v + 0.005 + 1e-4 / 24.0).abs() < 1e-15);
        assert!(free_energy_expansion(1.0, &flat, &torus, 1e-10).is_err());
    }

    #[test]
    fn expansion_remainder_is_quartic() {
        let model = cubic(1);
        let torus = Torus::new(1, 4.0).unwrap();
        let g2 = gamma2(&torus);
        let rem: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&b| free_energy_expansion(b, &model, &torus, 1e-14).unwrap() - g2 * b * b)
            .collect();
        for w in rem.windows(2) {
            assert!((w[0] / w[1] - 16.0).abs() < 1e-6);
        }
    }

    #[test]
    fn d2_rejects_short_or_flat_inputs() {
        let m = cubic(2);
        assert!(limit_d2_log_slope(&m, &[50.0, 100.0, 200.0], 1e-6).is_err());
        assert!(limit_d2_log_slope(&m, &[50.0, 60.0, 70.0, 80.0], 1e-6).is_err());
        let flat = CovarianceModel::flat_spectrum(2).unwrap();
        assert!(matches!(
            limit_d2_log_slope(&flat, &[1.0, 2.0, 4.0, 8.0], 1e-6),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn d1_flat_limit_is_exact_everywhere() {
        let flat = CovarianceModel::flat_spectrum(1).unwrap();
        let r = limit_d1(&flat, &[1.0, 2.0, 4.0, 8.0], 1e-11).unwrap();
        for res in &r.diagnostics.residuals {
            assert!(res.abs() <= 1e-11);
        }
        assert!(r.diagnostics.rate.is_none());
    }

    #[test]
    fn axis_factor_has_the_spline_l2_norm() {
        // F(t) = ∫ e^{-tξ²} R̂₁² dξ at t = 0 is ∫ R̂₁² = ∫ R₁², the L² norm of
        // the B-spline; for the triangle on [-1,1] it is 2/3.
        let triangle = CovarianceModel::bspline(1, 1, 2.0).unwrap();
        let v = crate::quadrature::integrate_to_infinity(
            |xi| triangle.axis_transform(xi).powi(2),
            0.0,
            &QuadConfig::absolute(1e-12),
        )
        .unwrap()
        .value;
        assert!((2.0 * v - 2.0 / 3.0).abs() < 1e-9, "{}", 2.0 * v);
    }

    #[test]
    fn ball_formula_in_three_dimensions() {
        for k in [0.7, 2.0] {
            let v = spherical_inverse_square_integral(
                |xi| {
                    if xi.iter().map(|x| x * x).sum::<f64>() < k * k {
                        1.0
                    } else {
                        0.0
                    }
                },
                k,
                k,
                1e-10,
            )
            .unwrap();
            assert!((v - 4.0 * PI * k).abs() < 1e-9, "{v}");
        }
    }
}
