//! Extended-precision evaluation of `E Y_λ^{-2}` for small `λ`.
//!
//! The oscillatory integral
//! `∫_0^∞ sinh(y) / (32 cosh⁶(y/2)) e^{-2y²/λ²} sin(4πy/λ²) dy` is of size
//! `e^{-2π²/λ²}` while its integrand is of order one, so double precision
//! loses about `2π²/(λ² ln 10)` digits. The integrand is even and analytic in
//! the strip `|Im y| < π`, so the trapezoid rule converges geometrically; it is
//! evaluated with enough bits to absorb the cancellation. Exponentials and the
//! sine are advanced by multiplicative recurrences, so each node costs a few
//! multiplications.

use astro_float::{BigFloat, Consts, RoundingMode};

use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;

/// Default number of significant digits requested beyond the cancellation.
pub const DEFAULT_DIGITS: u32 = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedMoment {
    pub value: f64,
    /// `value - 1`, formed before rounding to double.
    pub excess: f64,
    pub error: f64,
    pub bits: usize,
    pub nodes: usize,
}

/// Working precision in bits for a given `λ` and target digit count.
pub fn working_bits(lambda: f64, digits: u32) -> usize {
    let lost =
        (2.0 * std::f64::consts::PI.powi(2) / (lambda * lambda * std::f64::consts::LN_10)).ceil();
    let total = lost + digits.max(20) as f64;
    (total * 3.33).ceil() as usize + 64
}

fn to_f64(x: &BigFloat) -> f64 {
    x.to_string().parse::<f64>().unwrap_or(f64::NAN)
}

/// `E Y_λ^{-2}` by the trapezoid rule in extended precision.
pub fn inverse_square_moment_extended(lambda: f64, digits: u32) -> Result<ExtendedMoment> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "λ must be positive, got {lambda}"
        )));
    }
    if lambda < 0.02 {
        return Err(Error::InvalidParameter(format!(
            "λ = {lambda} needs more than {} bits; use the series",
            working_bits(lambda, digits)
        )));
    }
    let pi = std::f64::consts::PI;
    let lam2 = lambda * lambda;
    let d = digits.max(1) as f64;
    // step with margin for the Gaussian growth off the real axis
    let step = 0.5 * lam2 / (4.5 + 5.84 * lam2 * d / 25.0);
    let cutoff = (pi * pi + lam2 * d * std::f64::consts::LN_10 / 2.0).sqrt();
    let nodes = (cutoff / step).ceil() as usize;
    let p = working_bits(lambda, digits);
    let mut cc = Consts::new().map_err(|e| Error::Precision(format!("{e:?}")))?;

    let big = |x: f64| BigFloat::from_f64(x, p);
    let one = big(1.0);
    let lam = big(lambda);
    let lam2_b = lam.mul(&lam, p, RM);
    let h = big(step);
    let h2 = h.mul(&h, p, RM);
    let pi_b = cc.pi(p, RM);

    let q = h.neg().exp(p, RM, &mut cc);
    let rho0 = h2
        .mul(&big(-2.0), p, RM)
        .div(&lam2_b, p, RM)
        .exp(p, RM, &mut cc);
    let sigma = rho0.mul(&rho0, p, RM);
    let theta = pi_b
        .mul(&big(4.0), p, RM)
        .mul(&h, p, RM)
        .div(&lam2_b, p, RM);
    let (ct, st) = (theta.cos(p, RM, &mut cc), theta.sin(p, RM, &mut cc));

    let mut gauss = one.clone();
    let mut rho = rho0;
    let mut decay = one.clone();
    let (mut c, mut s) = (one.clone(), big(0.0));
    let mut sum_all = big(0.0);
    let mut sum_even = big(0.0);
    for k in 1..=nodes {
        gauss = gauss.mul(&rho, p, RM);
        rho = rho.mul(&sigma, p, RM);
        decay = decay.mul(&q, p, RM);
        let c_next = c.mul(&ct, p, RM).sub(&s.mul(&st, p, RM), p, RM);
        s = s.mul(&ct, p, RM).add(&c.mul(&st, p, RM), p, RM);
        c = c_next;
        // (e^y - e^{-y}) / (e^{y/2} + e^{-y/2})⁶ = e^{-2y}(1 - e^{-2y}) / (1 + e^{-y})⁶
        let e2 = decay.mul(&decay, p, RM);
        let shape =
            e2.mul(&one.sub(&e2, p, RM), p, RM)
                .div(&one.add(&decay, p, RM).powi(6, p, RM), p, RM);
        let term = shape.mul(&gauss, p, RM).mul(&s, p, RM);
        sum_all = sum_all.add(&term, p, RM);
        if k % 2 == 0 {
            sum_even = sum_even.add(&term, p, RM);
        }
    }
    let fine = sum_all.mul(&h, p, RM);
    let coarse = sum_even.mul(&h, p, RM).mul(&big(2.0), p, RM);
    let two_pi2 = pi_b.mul(&pi_b, p, RM).mul(&big(2.0), p, RM);
    let prefactor = lam2_b
        .mul(&lam2_b, p, RM)
        .div(&pi_b.mul(&big(2.0), p, RM), p, RM)
        .mul(&two_pi2.div(&lam2_b, p, RM).exp(p, RM, &mut cc), p, RM);
    let value = prefactor.mul(&fine, p, RM);
    let excess = value.sub(&one, p, RM);
    let refinement = prefactor.mul(&fine.sub(&coarse, p, RM), p, RM);
    let value_f = to_f64(&value);
    if !value_f.is_finite() {
        return Err(Error::Precision(format!(
            "extended-precision evaluation at λ = {lambda} did not produce a finite value"
        )));
    }
    let error = to_f64(&refinement).abs() + value_f * 10f64.powf(-d);
    Ok(ExtendedMoment {
        value: value_f,
        excess: to_f64(&excess),
        error,
        bits: p,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `E Y_λ^{-2} = 1 + λ²/12`, obtained by shifting the contour through the
    /// fifth-order pole at `y = iπ`; used only as a reference here.
    fn closed_form(lambda: f64) -> f64 {
        1.0 + lambda * lambda / 12.0
    }

    #[test]
    fn matches_reference_across_scales() {
        for lambda in [0.1, 0.15, 0.3, 0.7, 1.0, 2.0] {
            let r = inverse_square_moment_extended(lambda, DEFAULT_DIGITS).unwrap();
            let exact = closed_form(lambda);
            assert!(
                ((r.value - exact) / exact).abs() < 1e-15,
                "λ={lambda}: {}",
                r.value
            );
            let excess = lambda * lambda / 12.0;
            assert!(((r.excess - excess) / excess).abs() < 1e-13, "λ={lambda}");
            assert!(r.error < 1e-14, "λ={lambda}: error {}", r.error);
        }
    }

    #[test]
    fn precision_grows_with_cancellation() {
        assert!(working_bits(0.1, 25) > 2900);
        assert!(working_bits(1.0, 25) < 200);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        assert!(inverse_square_moment_extended(0.0, 25).is_err());
        assert!(inverse_square_moment_extended(-1.0, 25).is_err());
    }
}
