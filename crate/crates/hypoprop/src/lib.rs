// `!(x > 0.0)` is used on purpose in argument guards: unlike `x <= 0.0`
// it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Propagators for degenerate Schrödinger equations with drift.
//!
//! The Cauchy problem ∂t f = i tr(Q ∇²f) + ⟨Bx, ∇f⟩, f(·,0) = φ is solved
//! under the Hörmander condition Q(t) = ∫₀ᵗ e^{sB} Q e^{sB*} ds > 0 by three
//! routes that cross-validate each other:
//!
//! * [`packets`] — exact closed-form propagation of complex Gaussian wave
//!   packets (the high-precision oracle),
//! * [`gridprop`] — an FFT propagator (drift removal + unimodular Fourier
//!   multiplier + flow resampling) plus a direct oscillatory-kernel
//!   quadrature,
//! * [`analysis`] — the sharp L^p → L^{p'} dispersive bound with Beckner's
//!   constant, equality witnesses, decay-exponent fits, and the Hardy
//!   uncertainty product.
//!
//! [`matcore`] holds the dense matrix layer (matrix exponentials, covariance
//! matrices, the Kalman rank decision, the uncertainty map K(t)).

pub mod analysis;
pub mod battery;
pub mod error;
pub mod gridprop;
pub mod matcore;
pub mod packets;

pub use error::{Error, Result};
pub use matcore::{CovarianceMatrix, HypoReport, SystemPair};
pub use packets::GaussianPacket;
