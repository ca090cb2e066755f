//! The example battery and seeded random generators used by the
//! verification suites.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::matcore::{self, SystemPair};
use crate::packets::GaussianPacket;

/// Deterministic RNG for reproducible property sweeps.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The four canonical systems: free, Ornstein-Uhlenbeck (m = 1),
/// Kolmogorov (m = 2) and Kramers (m = 2).
pub fn standard_systems() -> Vec<(&'static str, SystemPair)> {
    vec![
        ("free", SystemPair::free(1)),
        ("ou", SystemPair::ornstein_uhlenbeck(1)),
        ("kolmogorov", SystemPair::kolmogorov(1)),
        ("kramers", SystemPair::kramers()),
    ]
}

/// Looks a named example system up ("free", "ou", "kolmogorov", "kramers").
pub fn system_by_name(name: &str) -> Option<SystemPair> {
    standard_systems()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
}

/// A random system with entries of order one: Q = AAᵀ/m for A with entries
/// in [-1, 1] (symmetric PSD by construction), B with entries in [-1, 1].
/// No hypoellipticity filter; the covariance identities hold regardless.
pub fn random_system(rng: &mut impl Rng, m: usize) -> SystemPair {
    let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let q = (&a * a.transpose()) / m as f64;
    let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    SystemPair::new(matcore::symmetrize(&q), b).expect("random system is valid")
}

/// A random system that passes the hypoellipticity decision (resampled
/// until both criteria agree and hold).
pub fn random_hypoelliptic_system(rng: &mut impl Rng, m: usize) -> SystemPair {
    loop {
        let sys = random_system(rng, m);
        if let Ok(report) = matcore::hypoelliptic(&sys, 1.0, matcore::HYPO_TOL) {
            if report.hypoelliptic {
                return sys;
            }
        }
    }
}

/// A random Gaussian packet: Re M = LLᵀ + 0.3·I for L with entries in
/// [-1, 1], Im M symmetric in [-1, 1], complex linear term and amplitude
/// of order one.
pub fn random_packet(rng: &mut impl Rng, m: usize) -> GaussianPacket {
    let l = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let re = &l * l.transpose() / m as f64 + DMatrix::identity(m, m) * 0.3;
    let im_raw = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let im = matcore::symmetrize(&im_raw);
    let exponent = DMatrix::from_fn(m, m, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
    let linear = DVector::from_fn(m, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let modulus: f64 = rng.random_range(0.5..2.0);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let amplitude = Complex64::from_polar(modulus, phase);
    GaussianPacket::new(exponent, linear, amplitude).expect("random packet is valid")
}
