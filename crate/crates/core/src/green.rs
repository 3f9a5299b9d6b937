//! The torus Poisson problem `ΔG = L^{-2d}(L^{-d} - R)` and the quantities
//! built from its solution.
//!
//! In Fourier variables the mean-zero solution is
//! `Ĝ(n) = R̂(n/L) / (4π² |n|² L^{2d-2})`, `Ĝ(0) = 0`. The solver works purely
//! spectrally with the continuum symbol; finite differences only appear as an
//! independent residual check.

use std::f64::consts::PI;

use serde::Serialize;

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::expansion::{gamma4, squared_envelope};
use crate::grid::{spectral_synthesis, GridField, Torus, TorusSpec};
use crate::lattice::{shell_sum, DEFAULT_MAX_TERMS};

/// `Ĝ(n)`; zero at `n = 0`.
pub fn green_coefficient(model: &CovarianceModel, torus: &Torus, n: &[i64]) -> f64 {
    let norm2: i64 = n.iter().map(|m| m * m).sum();
    if norm2 == 0 {
        return 0.0;
    }
    let size = torus.size();
    let r_hat = model.coefficient_unchecked(size, n);
    r_hat / (4.0 * PI * PI * norm2 as f64 * size.powi(2 * torus.dimension() as i32 - 2))
}

/// The Green function on a grid, with its Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenField {
    spec: TorusSpec,
    /// `Ĝ(n)` in DFT slot order.
    coefficients: Vec<f64>,
    grid: GridField,
}

impl GreenField {
    pub fn spec(&self) -> &TorusSpec {
        &self.spec
    }

    /// Coefficients in DFT slot order; see [`TorusSpec::mode_table`].
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `Ĝ(n)` for a mode on the grid, i.e. `-N/2 < n_i ≤ N/2`.
    pub fn coefficient(&self, n: &[i64]) -> Option<f64> {
        let half = self.spec.grid_points() as i64 / 2;
        if n.len() != self.spec.dimension() || n.iter().any(|&m| m <= -half || m > half) {
            return None;
        }
        let size = self.spec.grid_points() as i64;
        let slots: Vec<usize> = n.iter().map(|&m| m.rem_euclid(size) as usize).collect();
        Some(self.coefficients[self.spec.flatten(&slots)])
    }

    pub fn grid(&self) -> &GridField {
        &self.grid
    }
}

/// Solves for `G` on the grid.
pub fn solve_green(
    model: &CovarianceModel,
    spec: &TorusSpec,
    alias_tol: f64,
) -> Result<GreenField> {
    let torus = spec.torus();
    model.check_fits(&torus)?;
    model.check_resolution(spec, alias_tol)?;
    let coefficients: Vec<f64> = spec
        .mode_table()
        .iter()
        .map(|n| green_coefficient(model, &torus, n))
        .collect();
    let grid = spectral_synthesis(*spec, |n| green_coefficient(model, &torus, n));
    Ok(GreenField {
        spec: *spec,
        coefficients,
        grid,
    })
}

/// Right-hand side `L^{-2d}(L^{-d} - R_per)` on the grid.
pub fn poisson_rhs(model: &CovarianceModel, spec: &TorusSpec, alias_tol: f64) -> Result<GridField> {
    let r = model.periodized_on_grid(spec, alias_tol)?;
    let vol = spec.torus().volume();
    Ok(r.map(|v| (1.0 / vol - v) / (vol * vol)))
}

/// A certified value of `∫ R G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapResult {
    pub value: f64,
    pub truncation_radius: usize,
    pub tail_bound: f64,
}

/// `∫_{T_L^d} R(x) G(x) dx = L^{-d} Σ_{n≠0} Ĝ(n) R̂(n/L)` to absolute
/// accuracy `tol`.
pub fn overlap_integral(model: &CovarianceModel, torus: &Torus, tol: f64) -> Result<OverlapResult> {
    model.check_fits(torus)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let d = torus.dimension();
    let size = torus.size();
    // Ĝ R̂ / L^d = R̂² / (4π² |n|² L^{3d-2})
    let scale = 1.0 / (4.0 * PI * PI * size.powi(3 * d as i32 - 2));
    let plan = squared_envelope(model, size)
        .plan_for_target(d, tol / scale, DEFAULT_MAX_TERMS)
        .map_err(|e| match e {
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
        })?;
    let volume = torus.volume();
    let sum = shell_sum(d, plan.n_max, |n| {
        let signed: Vec<i64> = n.iter().map(|&m| m as i64).collect();
        green_coefficient(model, torus, &signed) * model.coefficient_unchecked(size, &signed)
    }) / volume;
    Ok(OverlapResult {
        value: sum + scale * plan.correction,
        truncation_radius: plan.n_max,
        tail_bound: scale * plan.tail_bound,
    })
}

/// `Σ_x R_per(x) G(x) (L/N)^d` over the grid nodes.
pub fn overlap_on_grid(model: &CovarianceModel, spec: &TorusSpec, alias_tol: f64) -> Result<f64> {
    let r = model.periodized_on_grid(spec, alias_tol)?;
    let g = solve_green(model, spec, alias_tol)?;
    let dot: crate::lattice::Neumaier = r
        .values()
        .iter()
        .zip(g.grid().values())
        .map(|(a, b)| a * b)
        .collect();
    Ok(dot.value() * spec.cell_volume())
}

/// First-order two-point function of the endpoint density,
/// `q₂(r) = L^{-2d} + β² G(r)`.
pub fn q2_first_order(
    model: &CovarianceModel,
    spec: &TorusSpec,
    beta: f64,
    alias_tol: f64,
) -> Result<GridField> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "first-order correlation needs 0 <= β < 1, got {beta}"
        )));
    }
    let g = solve_green(model, spec, alias_tol)?;
    let base = spec.torus().volume().powi(-2);
    Ok(g.grid().map(|v| base + beta * beta * v))
}

/// Cross-check of the Parseval route to `γ₄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalReport {
    /// `∫ R G` from the certified lattice sum.
    pub spectral: f64,
    /// `∫ R G` from grid quadrature.
    pub physical: f64,
    pub physical_difference: f64,
    /// `γ₄` from the expansion module.
    pub gamma4: f64,
    /// `-(L^d/2) ∫ R G`.
    pub gamma4_from_overlap: f64,
    pub identity_difference: f64,
    pub tail_bound: f64,
}

pub fn parseval_report(
    model: &CovarianceModel,
    spec: &TorusSpec,
    tol: f64,
    alias_tol: f64,
) -> Result<ParsevalReport> {
    let torus = spec.torus();
    let volume = torus.volume();
    let overlap = overlap_integral(model, &torus, tol)?;
    let physical = overlap_on_grid(model, spec, alias_tol)?;
    let g4 = gamma4(model, &torus, 0.5 * volume * tol)?;
    let from_overlap = -0.5 * volume * overlap.value;
    Ok(ParsevalReport {
        spectral: overlap.value,
        physical,
        physical_difference: (physical - overlap.value).abs(),
        gamma4: g4.gamma4,
        gamma4_from_overlap: from_overlap,
        identity_difference: (g4.gamma4 - from_overlap).abs(),
        tail_bound: overlap.tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::DEFAULT_ALIAS_TOL;
    use crate::grid::fd_laplacian;

    #[test]
    fn coefficient_examples() {
        let flat = CovarianceModel::flat_spectrum(1).unwrap();
        let unit = Torus::new(1, 1.0).unwrap();
        assert_eq!(green_coefficient(&flat, &unit, &[0]), 0.0);
        assert!((green_coefficient(&flat, &unit, &[1]) - 1.0 / (4.0 * PI * PI)).abs() < 1e-17);
        let triangle = CovarianceModel::bspline(1, 1, 2.0).unwrap();
        let two = Torus::new(1, 2.0).unwrap();
        assert!((green_coefficient(&triangle, &two, &[1]) - PI.powi(-4)).abs() < 1e-16);
    }

    #[test]
    fn flat_overlap_is_one_twelfth() {
        let flat = CovarianceModel::flat_spectrum(1).unwrap();
        let r = overlap_integral(&flat, &Torus::new(1, 1.0).unwrap(), 1e-12).unwrap();
        assert!((r.value - 1.0 / 12.0).abs() <= 1e-12);
    }

    #[test]
    fn solution_is_mean_zero_symmetric_and_peaked() {
        let model = CovarianceModel::bspline(2, 2, 1.0).unwrap();
        let spec = TorusSpec::new(2, 3.0, 64).unwrap();
        let g = solve_green(&model, &spec, DEFAULT_ALIAS_TOL).unwrap();
        assert!(g.grid().mean().abs() < 1e-13);
        for j in 0..spec.len() {
            assert_eq!(g.grid().values()[j], g.grid().values()[spec.reflect(j)]);
        }
        let max = g.grid().values().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, g.grid().at_origin());
        assert!(g.coefficients().iter().all(|&c| c >= 0.0));
        assert_eq!(g.coefficient(&[0, 0]), Some(0.0));
        assert_eq!(g.coefficient(&[3, -2]), g.coefficient(&[-3, 2]));
        assert_eq!(g.coefficient(&[-32, 0]), None);
    }

    #[test]
    fn finite_difference_residual_is_second_order() {
        let model = CovarianceModel::bspline(1, 2, 1.0).unwrap();
        let residual = |n: usize| {
            let spec = TorusSpec::new(1, 8.0, n).unwrap();
            let g = solve_green(&model, &spec, DEFAULT_ALIAS_TOL).unwrap();
            let rhs = poisson_rhs(&model, &spec, DEFAULT_ALIAS_TOL).unwrap();
            fd_laplacian(g.grid()).sub(&rhs).max_abs()
        };
        let coarse = residual(512);
        let fine = residual(1024);
        let ratio = coarse / fine;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
        assert!(coarse < 1e-4);
    }

    #[test]
    fn q2_normalization() {
        let model = CovarianceModel::bspline(1, 2, 1.0).unwrap();
        let spec = TorusSpec::new(1, 8.0, 256).unwrap();
        let base = 1.0 / 64.0;
        let zero = q2_first_order(&model, &spec, 0.0, DEFAULT_ALIAS_TOL).unwrap();
        assert!(zero.values().iter().all(|&v| v == base));
        for beta in [0.1, 0.5, 0.9] {
            let q = q2_first_order(&model, &spec, beta, DEFAULT_ALIAS_TOL).unwrap();
            assert!((q.mean() - base).abs() < 1e-13);
        }
        assert!(q2_first_order(&model, &spec, 1.0, DEFAULT_ALIAS_TOL).is_err());
    }

    #[test]
    fn physical_route_agrees() {
        let model = CovarianceModel::bspline(1, 2, 1.0).unwrap();
        let spec = TorusSpec::new(1, 8.0, 4096).unwrap();
        let r = parseval_report(&model, &spec, 1e-14, DEFAULT_ALIAS_TOL).unwrap();
        assert!(r.physical_difference < 1e-8, "{}", r.physical_difference);
        assert!(r.identity_difference < 1e-12);
    }
}
