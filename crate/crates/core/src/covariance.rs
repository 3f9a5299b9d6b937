//! Spatial covariance functions of the noise and their torus periodizations.
//!
//! The B-spline family builds the one-dimensional factor as the `2k`-fold
//! self-convolution of the normalized indicator of `[-h/2, h/2]`, with
//! `h = w / (2k)`. It is supported on `[-w/2, w/2]`, integrates to one, is
//! `C^{2k-2}`, and has the nonnegative transform `sinc^{2k}(π h ξ)`. In `d > 1`
//! the covariance is the tensor product of `d` such factors.
//!
//! The flat-spectrum family has `R̂ ≡ 1` on every torus mode (a Dirac comb).
//! It only exists for exact zeta-function cross-checks of the lattice sums.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{spectral_synthesis, GridField, Torus, TorusSpec};

/// Default bound on the spectral envelope at the Nyquist mode.
pub const DEFAULT_ALIAS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bspline,
    FlatSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Bspline { order: u32, width: f64 },
    FlatSpectrum,
}

/// An admissible spatial covariance `R` on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovarianceSpec", into = "CovarianceSpec")]
pub struct CovarianceModel {
    dimension: usize,
    shape: Shape,
}

/// Config-file form of a [`CovarianceModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceSpec {
    Bspline { d: usize, k: u32, w: f64 },
    FlatSpectrum { d: usize },
}

impl TryFrom<CovarianceSpec> for CovarianceModel {
    type Error = Error;

    fn try_from(spec: CovarianceSpec) -> Result<Self> {
        match spec {
            CovarianceSpec::Bspline { d, k, w } => CovarianceModel::bspline(d, k, w),
            CovarianceSpec::FlatSpectrum { d } => CovarianceModel::flat_spectrum(d),
        }
    }
}

impl From<CovarianceModel> for CovarianceSpec {
    fn from(model: CovarianceModel) -> Self {
        match model.shape {
            Shape::Bspline { order, width } => CovarianceSpec::Bspline {
                d: model.dimension,
                k: order,
                w: width,
            },
            Shape::FlatSpectrum => CovarianceSpec::FlatSpectrum { d: model.dimension },
        }
    }
}

impl CovarianceModel {
    /// Tensor-product B-spline covariance of smoothness order `k` and total
    /// support diameter `w`.
    pub fn bspline(dimension: usize, order: u32, width: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if order == 0 {
            return Err(Error::InvalidParameter(
                "B-spline order k must be >= 1".into(),
            ));
        }
        if order > 12 {
            return Err(Error::InvalidParameter(format!(
                "B-spline order k = {order} is not supported (max 12)"
            )));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "support width w must be positive, got {width}"
            )));
        }
        Ok(Self {
            dimension,
            shape: Shape::Bspline { order, width },
        })
    }

    pub fn flat_spectrum(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self {
            dimension,
            shape: Shape::FlatSpectrum,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn family(&self) -> Family {
        match self.shape {
            Shape::Bspline { .. } => Family::Bspline,
            Shape::FlatSpectrum => Family::FlatSpectrum,
        }
    }

    pub fn order(&self) -> Option<u32> {
        match self.shape {
            Shape::Bspline { order, .. } => Some(order),
            Shape::FlatSpectrum => None,
        }
    }

    /// Support diameter `w`; `None` for the flat spectrum.
    pub fn width(&self) -> Option<f64> {
        match self.shape {
            Shape::Bspline { width, .. } => Some(width),
            Shape::FlatSpectrum => None,
        }
    }

    /// Knot spacing `h = w / (2k)` of the B-spline factor.
    pub fn knot_spacing(&self) -> Option<f64> {
        match self.shape {
            Shape::Bspline { order, width } => Some(width / (2.0 * order as f64)),
            Shape::FlatSpectrum => None,
        }
    }

    /// Exact evaluation of `R(x)`. The flat spectrum is a Dirac comb: it
    /// evaluates to `+∞` at the origin and `0` elsewhere.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dimension, "point dimension mismatch");
        match self.shape {
            Shape::Bspline { order, width } => {
                let h = width / (2.0 * order as f64);
                x.iter()
                    .map(|&xi| {
                        let t = xi.abs() / h + order as f64;
                        cardinal_bspline(2 * order as usize, t) / h
                    })
                    .product()
            }
            Shape::FlatSpectrum => {
                if x.iter().all(|&v| v == 0.0) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// One-dimensional factor of the Fourier transform, `sinc^{2k}(π h ξ)`.
    pub fn axis_transform(&self, xi: f64) -> f64 {
        match self.shape {
            Shape::Bspline { order, width } => {
                let h = width / (2.0 * order as f64);
                sinc(PI * h * xi).powi(2 * order as i32)
            }
            Shape::FlatSpectrum => 1.0,
        }
    }

    /// `R̂(ξ) = ∫ R(x) e^{-i2π ξ·x} dx`.
    pub fn fourier_transform(&self, xi: &[f64]) -> f64 {
        assert_eq!(xi.len(), self.dimension, "frequency dimension mismatch");
        xi.iter().map(|&v| self.axis_transform(v)).product()
    }

    /// Closed-form upper envelope of the axis factor,
    /// `min(1, (π h |ξ|)^{-2k})`.
    pub fn axis_envelope(&self, xi: f64) -> f64 {
        match self.shape {
            Shape::Bspline { order, width } => {
                let h = width / (2.0 * order as f64);
                let a = PI * h * xi.abs();
                if a <= 1.0 {
                    1.0
                } else {
                    a.powi(-2 * order as i32)
                }
            }
            Shape::FlatSpectrum => 1.0,
        }
    }

    /// Checks that the model lives in the torus dimension and that its support
    /// fits inside `[-L/2, L/2]^d`.
    pub fn check_fits(&self, torus: &Torus) -> Result<()> {
        if torus.dimension() != self.dimension {
            return Err(Error::Precondition(format!(
                "covariance dimension {} does not match torus dimension {}",
                self.dimension,
                torus.dimension()
            )));
        }
        if let Some(w) = self.width() {
            if w > torus.size() {
                return Err(Error::Precondition(format!(
                    "covariance support width w = {w} exceeds torus size L = {}; \
                     the support must be contained in the torus",
                    torus.size()
                )));
            }
        }
        Ok(())
    }

    /// Fourier coefficient `R̂(n/L)` of the `L`-periodic version of `R`.
    pub fn periodized_fourier_coefficient(&self, torus: &Torus, n: &[i64]) -> Result<f64> {
        self.check_fits(torus)?;
        Ok(self.coefficient_unchecked(torus.size(), n))
    }

    pub(crate) fn coefficient_unchecked(&self, size: f64, n: &[i64]) -> f64 {
        n.iter()
            .map(|&m| self.axis_transform(m as f64 / size))
            .product()
    }

    /// Envelope of the axis factor at the grid's Nyquist frequency `N / (2L)`.
    pub fn nyquist_envelope(&self, spec: &TorusSpec) -> f64 {
        self.axis_envelope(spec.grid_points() as f64 / (2.0 * spec.size()))
    }

    /// Smallest admissible even `N` whose Nyquist envelope is below `alias_tol`.
    pub fn min_grid_points(&self, size: f64, alias_tol: f64) -> Option<usize> {
        let (order, h) = match self.shape {
            Shape::Bspline { order, width } => (order, width / (2.0 * order as f64)),
            Shape::FlatSpectrum => return None,
        };
        // (π h N / 2L)^{-2k} <= tol  <=>  N >= 2L / (π h) · tol^{-1/(2k)}
        let bound = 2.0 * size / (PI * h) * alias_tol.powf(-1.0 / (2.0 * order as f64));
        let mut n = (bound.ceil() as usize).max(4);
        n += n % 2;
        while self.axis_envelope(n as f64 / (2.0 * size)) > alias_tol {
            n += 2;
        }
        Some(n)
    }

    /// Fails with a resolution error naming the minimal `N` when the grid does
    /// not resolve the spectrum. Always succeeds for the flat spectrum.
    pub fn check_resolution(&self, spec: &TorusSpec, alias_tol: f64) -> Result<()> {
        if self.family() == Family::FlatSpectrum {
            return Ok(());
        }
        let envelope = self.nyquist_envelope(spec);
        if envelope > alias_tol {
            return Err(Error::Resolution {
                envelope,
                tolerance: alias_tol,
                min_grid_points: self
                    .min_grid_points(spec.size(), alias_tol)
                    .unwrap_or(spec.grid_points()),
            });
        }
        Ok(())
    }

    /// The periodized covariance on the grid, synthesized from its Fourier
    /// series truncated to the grid modes.
    pub fn periodized_on_grid(&self, spec: &TorusSpec, alias_tol: f64) -> Result<GridField> {
        self.check_fits(&spec.torus())?;
        self.check_resolution(spec, alias_tol)?;
        let size = spec.size();
        Ok(spectral_synthesis(*spec, |n| {
            self.coefficient_unchecked(size, n)
        }))
    }

    /// Variance of the grid-truncated periodized field at a node,
    /// `L^{-d} Σ_{grid modes} R̂(n/L)`.
    pub fn grid_variance(&self, spec: &TorusSpec) -> f64 {
        let size = spec.size();
        let axis: Vec<f64> = (0..spec.grid_points())
            .map(|k| self.axis_transform(spec.signed_mode(k) as f64 / size))
            .collect();
        let per_axis: f64 = axis.iter().sum();
        per_axis.powi(spec.dimension() as i32) / spec.torus().volume()
    }
}

/// `sin(a) / a`, continuous at zero.
pub(crate) fn sinc(a: f64) -> f64 {
    if a.abs() < 1e-4 {
        let a2 = a * a;
        1.0 - a2 / 6.0 + a2 * a2 / 120.0
    } else {
        a.sin() / a
    }
}

/// Cardinal B-spline `M_m` on `[0, m]` with unit integral, evaluated by the
/// Cox-de Boor recursion.
fn cardinal_bspline(m: usize, t: f64) -> f64 {
    if !(0.0..m as f64).contains(&t) {
        return 0.0;
    }
    let mut vals: Vec<f64> = (0..m)
        .map(|j| {
            let s = t - j as f64;
            if (0.0..1.0).contains(&s) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for r in 2..=m {
        let rf = r as f64;
        for j in 0..=(m - r) {
            let s = t - j as f64;
            vals[j] = (s * vals[j] + (rf - s) * vals[j + 1]) / (rf - 1.0);
        }
    }
    vals[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> CovarianceModel {
        CovarianceModel::bspline(1, 1, 2.0).unwrap()
    }

    #[test]
    fn triangle_is_one_minus_abs() {
        let r = triangle();
        assert_eq!(r.eval(&[0.0]), 1.0);
        assert!((r.eval(&[0.5]) - 0.5).abs() < 1e-15);
        assert!((r.eval(&[-0.25]) - 0.75).abs() < 1e-15);
        assert_eq!(r.eval(&[1.0]), 0.0);
        assert_eq!(r.eval(&[1.7]), 0.0);
    }

    #[test]
    fn triangle_transform() {
        let r = triangle();
        assert_eq!(r.fourier_transform(&[0.0]), 1.0);
        let xi: f64 = 0.3;
        let expect = ((PI * xi).sin() / (PI * xi)).powi(2);
        assert!((r.fourier_transform(&[xi]) - expect).abs() < 1e-15);
        let torus = Torus::new(1, 2.0).unwrap();
        let c = r.periodized_fourier_coefficient(&torus, &[1]).unwrap();
        assert!((c - 4.0 / (PI * PI)).abs() < 1e-15);
        assert!((c - 0.405285).abs() < 1e-6);
    }

    #[test]
    fn zero_mode_is_one() {
        let torus = Torus::new(2, 3.0).unwrap();
        for model in [
            CovarianceModel::bspline(2, 3, 1.5).unwrap(),
            CovarianceModel::flat_spectrum(2).unwrap(),
        ] {
            assert_eq!(
                model
                    .periodized_fourier_coefficient(&torus, &[0, 0])
                    .unwrap(),
                1.0
            );
        }
        let flat = CovarianceModel::flat_spectrum(2).unwrap();
        assert_eq!(
            flat.periodized_fourier_coefficient(&torus, &[7, -3])
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn support_outside_torus_is_rejected() {
        let model = CovarianceModel::bspline(1, 2, 5.0).unwrap();
        let torus = Torus::new(1, 4.0).unwrap();
        assert!(matches!(
            model.periodized_fourier_coefficient(&torus, &[1]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn invalid_parameters() {
        assert!(CovarianceModel::bspline(1, 0, 1.0).is_err());
        assert!(CovarianceModel::bspline(1, 2, 0.0).is_err());
        assert!(CovarianceModel::bspline(1, 2, -1.0).is_err());
        assert!(CovarianceModel::bspline(0, 2, 1.0).is_err());
    }

    #[test]
    fn bspline_compact_support() {
        let model = CovarianceModel::bspline(2, 2, 1.0).unwrap();
        assert_eq!(model.eval(&[0.5000001, 0.0]), 0.0);
        assert_eq!(model.eval(&[0.0, -0.6]), 0.0);
        assert!(model.eval(&[0.49, 0.0]) > 0.0);
    }

    #[test]
    fn cubic_peak_value() {
        // M_4(2) = 2/3, h = 1/4
        let model = CovarianceModel::bspline(1, 2, 1.0).unwrap();
        assert!((model.eval(&[0.0]) - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_peak_matches_inverse_transform() {
        // R(0) = ∫ R̂(ξ) dξ; composite Simpson on [0, X] plus the envelope tail.
        let model = CovarianceModel::bspline(1, 2, 1.0).unwrap();
        let x_max = 2000.0;
        let n = 2_000_000;
        let step = x_max / n as f64;
        let f = |x: f64| {
            let a = PI * 0.25 * x;
            if a == 0.0 {
                1.0
            } else {
                (a.sin() / a).powi(4)
            }
        };
        let mut s = f(0.0) + f(x_max);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * step);
        }
        let half = s * step / 3.0;
        // tail ≤ ∫_X^∞ (π h ξ)^{-4} dξ
        let tail = (PI * 0.25).powi(-4) / (3.0 * x_max.powi(3));
        assert!(tail < 1e-9);
        assert!((2.0 * half - model.eval(&[0.0])).abs() < 1e-8);
    }

    #[test]
    fn unit_integral_by_grid_quadrature_2d() {
        // trapezoid on a 1024² grid over the support
        let model = CovarianceModel::bspline(2, 2, 1.0).unwrap();
        let n = 1024;
        let step = 1.0 / n as f64;
        let axis: Vec<f64> = (0..=n)
            .map(|i| {
                let x = -0.5 + i as f64 * step;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                (x, w)
            })
            .map(|(x, w)| w * model.eval(&[x, 0.0]) / model.eval(&[0.0, 0.0]).sqrt())
            .collect();
        // tensor structure lets the double sum factor, but evaluate it honestly
        let mut total = 0.0;
        for i in 0..=n {
            let xi = -0.5 + i as f64 * step;
            let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
            for j in 0..=n {
                let xj = -0.5 + j as f64 * step;
                let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
                total += wi * wj * model.eval(&[xi, xj]);
            }
        }
        total *= step * step;
        assert!((total - 1.0).abs() < 1e-10, "integral = {total}");
        assert_eq!(axis.len(), n + 1);
    }

    #[test]
    fn unit_integral_all_orders_1d() {
        for k in 1..=5 {
            let model = CovarianceModel::bspline(1, k, 1.3).unwrap();
            let n = 1 << 16;
            let step = 1.3 / n as f64;
            let total: f64 = (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    w * model.eval(&[-0.65 + i as f64 * step])
                })
                .sum::<f64>()
                * step;
            assert!((total - 1.0).abs() < 1e-9, "k={k}: {total}");
        }
    }

    #[test]
    fn sinc_decay_bound_up_to_1e4() {
        for (k, w, l) in [(1u32, 1.0, 4.0), (2, 1.0, 8.0), (3, 0.7, 2.0)] {
            let model = CovarianceModel::bspline(1, k, w).unwrap();
            let torus = Torus::new(1, l).unwrap();
            for n in 1..=10_000i64 {
                let c = model.periodized_fourier_coefficient(&torus, &[n]).unwrap();
                let bound = (2.0 * k as f64 * l / (PI * w * n as f64)).powi(2 * k as i32);
                assert!(c <= bound * (1.0 + 1e-12), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn resolution_error_names_minimal_grid() {
        let model = CovarianceModel::bspline(1, 2, 1.0).unwrap();
        let coarse = TorusSpec::new(1, 4.0, 16).unwrap();
        match model.periodized_on_grid(&coarse, 1e-3) {
            Err(Error::Resolution {
                min_grid_points, ..
            }) => {
                let ok = TorusSpec::new(1, 4.0, min_grid_points).unwrap();
                assert!(model.check_resolution(&ok, 1e-3).is_ok());
                let below = TorusSpec::new(1, 4.0, min_grid_points - 2).unwrap();
                assert!(model.check_resolution(&below, 1e-3).is_err());
            }
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn flat_spectrum_grid_field() {
        let spec = TorusSpec::new(2, 3.0, 8).unwrap();
        let model = CovarianceModel::flat_spectrum(2).unwrap();
        let f = model.periodized_on_grid(&spec, DEFAULT_ALIAS_TOL).unwrap();
        let expect = 64.0 / 9.0;
        assert!((f.at_origin() - expect).abs() < 1e-12);
        assert!((f.mean() - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn grid_field_mean_is_zero_mode() {
        let spec = TorusSpec::new(1, 8.0, 256).unwrap();
        let model = CovarianceModel::bspline(1, 2, 1.0).unwrap();
        let f = model.periodized_on_grid(&spec, DEFAULT_ALIAS_TOL).unwrap();
        assert!((f.mean() - 1.0 / 8.0).abs() < 1e-15);
        for j in 0..spec.len() {
            assert_eq!(f.values()[j], f.values()[spec.reflect(j)]);
        }
        assert!((f.at_origin() - model.grid_variance(&spec)).abs() < 1e-12);
    }

    #[test]
    fn grid_values_match_pointwise_up_to_truncation_tail() {
        // Truncating the Fourier series at the grid modes leaves an error of at
        // most L^{-1} Σ_{|n| > N/2} R̂(n/L), bounded by the sinc envelope.
        for k in [1u32, 2, 3] {
            let model = CovarianceModel::bspline(1, k, 1.0).unwrap();
            let spec = TorusSpec::new(1, 8.0, 256).unwrap();
            let f = model.periodized_on_grid(&spec, 1.0).unwrap();
            let h = 1.0 / (2.0 * k as f64);
            let a = 8.0 / (PI * h);
            let p = 2 * k as i32;
            let m: f64 = 127.0;
            let tail = 2.0 * a.powi(p) * m.powi(1 - p) / (p as f64 - 1.0) / 8.0;
            let mut worst: f64 = 0.0;
            for j in 0..spec.len() {
                let x = spec.coordinate(j);
                if x.abs() <= 0.5 {
                    worst = worst.max((f.values()[j] - model.eval(&[x])).abs());
                }
            }
            assert!(worst <= tail, "k={k}: error {worst:e} > bound {tail:e}");
        }
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"family":"bspline","d":1,"k":2,"w":1.0}"#;
        let m: CovarianceModel = serde_json::from_str(json).unwrap();
        assert_eq!(m, CovarianceModel::bspline(1, 2, 1.0).unwrap());
        let back = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<CovarianceModel>(&back).unwrap(), m);
        let flat: CovarianceModel =
            serde_json::from_str(r#"{"family":"flat_spectrum","d":2}"#).unwrap();
        assert_eq!(flat.family(), Family::FlatSpectrum);
        assert!(serde_json::from_str::<CovarianceModel>(
            r#"{"family":"bspline","d":1,"k":0,"w":1.0}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn transform_in_unit_interval(k in 1u32..6, w in 0.1f64..3.0, xi in -50.0f64..50.0) {
            let model = CovarianceModel::bspline(1, k, w).unwrap();
            let v = model.fourier_transform(&[xi]);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(v <= model.axis_envelope(xi) * (1.0 + 1e-12));
        }

        #[test]
        fn eval_is_even(k in 1u32..6, w in 0.1f64..3.0, x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let model = CovarianceModel::bspline(2, k, w).unwrap();
            prop_assert_eq!(model.eval(&[x, y]), model.eval(&[-x, -y]));
            prop_assert!(model.eval(&[x, y]) >= 0.0);
        }
    }
}
