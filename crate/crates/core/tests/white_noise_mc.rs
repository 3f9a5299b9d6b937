use torus_polymer::mc::{
    bridge_inverse_square_mc, sample_exponential_functional, series_coefficients_mc,
};
use torus_polymer::stats::ks_distance;
use torus_polymer::whitenoise::{
    inverse_square_moment, jensen_lower_bound, SeriesCoefficients, YorCdf,
};

#[test]
fn bridge_mc_matches_quadrature_at_unit_lambda() {
    let mc = bridge_inverse_square_mc(1.0, 512, 1_000_000, 21).unwrap();
    let q = inverse_square_moment(1.0).unwrap();
    assert!(
        (mc.mean - q.value).abs() < 3.0 * mc.stderr,
        "{mc:?} vs {}",
        q.value
    );
    assert!(mc.mean >= jensen_lower_bound(1.0));
}

#[test]
fn sampled_law_matches_density() {
    let cdf = YorCdf::new(2.0, 0.02, 200.0, 4001).unwrap();
    assert!((cdf.mass - 1.0).abs() < 1e-6, "mass {}", cdf.mass);
    let mut y = sample_exponential_functional(2.0, 1024, 1_000_000, 22).unwrap();
    let d = ks_distance(&mut y, |z| cdf.eval(z));
    assert!(d <= 0.002, "KS distance {d}");
}

#[test]
fn series_coefficient_oracles_agree() {
    let mc = series_coefficients_mc(256, 200_000, 23).unwrap();
    let fit = SeriesCoefficients::fitted().unwrap();
    let combined = mc.a4_uncertainty.hypot(fit.a4_uncertainty);
    assert!(
        (mc.a4.mean - fit.a4).abs() < 3.0 * combined,
        "{mc:?} vs {fit:?}"
    );
    assert!((mc.a2.mean - 1.0 / 12.0).abs() < 3.0 * mc.a2.stderr);
}
