//! FFT-grid propagator and oscillatory-kernel quadrature.

mod field;
mod kernel;
mod propagate;

pub use field::{grid_sample, grid_sample_packet, GridField, Space};
pub use kernel::{fresnel_mass, kernel_propagate, FresnelMode};
pub use propagate::{
    commutation_residual, field_vs_packet_rel_l2, generator_apply, grid_propagate, pde_residual,
    suggest_geometry, Interpolation, PropagationSettings, ZERO_PAD_FACTOR,
};
