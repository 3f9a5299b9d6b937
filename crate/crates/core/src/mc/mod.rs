//! Monte Carlo oracles: a stochastic-heat-equation simulator on the torus and
//! Brownian-bridge samplers for the white-noise closed forms.

pub mod bridge;
pub mod noise;
pub mod scaling;
pub mod she;

pub use bridge::{bridge_inverse_square_mc, sample_exponential_functional, series_coefficients_mc};
pub use noise::{sample_noise_field, NoiseSampler};
pub use scaling::{q2_deviation_norm, verify_q2_scaling};
pub use she::{
    estimate_free_energy_log_slope, estimate_free_energy_overlap, estimate_q2,
    hierarchy_residual_n1, run_simulation, she_step, SimConfig, SimState, Simulator,
};
