//! Direct quadrature of the oscillatory kernel and regularized Fresnel
//! mass integrals — the third, slowest, most literal backend.
//!
//! The kernel is
//! 𝒮(x,y,t) = (4π)^{-m/2} e^{-imπ/4} (det Q(t))^{-1/2}
//!            e^{i⟨Q(t)⁻¹(y-x), y-x⟩/4},
//! and f(x,t) = ∫ 𝒮(e^{tB}x, y, t) φ(y) dy. Its mass identities
//! ∫𝒮 dy = 1 and ∫𝒮 dx = e^{-t·tr B} hold only as generalized Riemann
//! integrals; here they are regularized with a damping factor e^{-ε|·|²}
//! and recovered in the ε ↓ 0 limit (first order in ε).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matcore::{self, SystemPair, HYPO_TOL};

/// Which variable the regularized kernel integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FresnelMode {
    /// ∫ 𝒮(e^{tB}x, y, t)·e^{-ε|y|²} dy → 1
    OverY,
    /// ∫ 𝒮(e^{tB}x, y, t)·e^{-ε|x|²} dx → e^{-t·tr B} (y held fixed)
    OverX,
}

struct Kernel {
    m: usize,
    prefactor: Complex64,
    qinv: DMatrix<f64>,
}

impl Kernel {
    fn new(sys: &SystemPair, t: f64) -> Result<(Self, DMatrix<f64>, f64)> {
        let m = sys.dim();
        if m > 2 {
            return Err(Error::Dimension(format!(
                "kernel quadrature supports m <= 2, got {m}"
            )));
        }
        let report = matcore::hypoelliptic(sys, 1.0, HYPO_TOL)?;
        if !report.hypoelliptic {
            return Err(Error::Singular(
                "the kernel requires a hypoelliptic system".into(),
            ));
        }
        let cov = matcore::covariance(sys, t)?;
        let qinv = cov.inv()?.clone();
        let lam_min = cov.lambda_min();
        let mf = m as f64;
        let prefactor = Complex64::from((4.0 * PI).powf(-mf / 2.0) / cov.det().sqrt())
            * Complex64::from_polar(1.0, -mf * PI / 4.0);
        Ok((
            Self { m, prefactor, qinv },
            matcore::mat_exp(sys.b(), t)?,
            lam_min,
        ))
    }

    /// 𝒮(c, y, t) for the anchored first argument c.
    fn eval(&self, c: &[f64], y: &[f64]) -> Complex64 {
        let mut quad = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                quad += self.qinv[(i, j)] * (y[i] - c[i]) * (y[j] - c[j]);
            }
        }
        self.prefactor * Complex64::from_polar(1.0, quad / 4.0)
    }
}

/// Summation of `integrand` over the uniform box grid, weighted by the
/// cell volume.
fn box_quadrature<F>(l: &[f64], n: usize, m: usize, integrand: F) -> Complex64
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let cell: f64 = l.iter().map(|li| 2.0 * li / n as f64).product();
    let coord = |axis: usize, j: usize| -l[axis] + 2.0 * l[axis] * j as f64 / n as f64;
    let total: Complex64 = match m {
        1 => (0..n)
            .into_par_iter()
            .map(|j| integrand(&[coord(0, j)]))
            .sum(),
        _ => (0..n)
            .into_par_iter()
            .map(|j0| {
                let y0 = coord(0, j0);
                let mut acc = Complex64::default();
                for j1 in 0..n {
                    acc += integrand(&[y0, coord(1, j1)]);
                }
                acc
            })
            .sum(),
    };
    total * cell
}

fn farthest_corner_distance(l: &[f64], c: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (li, ci) in l.iter().zip(c) {
        let d = li + ci.abs();
        acc += d * d;
    }
    acc.sqrt()
}

fn check_phase_resolution(grad_max: f64, l: &[f64], n: usize) -> Result<()> {
    let step = l
        .iter()
        .map(|li| grad_max * 2.0 * li / n as f64)
        .fold(0.0, f64::max);
    if step > PI {
        return Err(Error::Resolution(format!(
            "kernel chirp changes phase by {step:.3e} rad per cell; \
             raise n or shrink the box"
        )));
    }
    Ok(())
}

/// f(x,t) by trapezoidal quadrature of the oscillatory kernel against a
/// source with negligible mass outside the box [-l, l]^m.
pub fn kernel_propagate<F>(
    source: F,
    sys: &SystemPair,
    t: f64,
    x: &[f64],
    l: &[f64],
    n: usize,
    resolution_guard: bool,
) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    if !(t > 0.0) {
        return Err(Error::Domain(format!("kernel_propagate requires t > 0, got {t}")));
    }
    let m = sys.dim();
    if x.len() != m || l.len() != m {
        return Err(Error::InvalidInput("point/box dimension mismatch".into()));
    }
    let (kernel, flow, lam_min) = Kernel::new(sys, t)?;
    let mut c = vec![0.0; m];
    for i in 0..m {
        c[i] = (0..m).map(|j| flow[(i, j)] * x[j]).sum();
    }
    if resolution_guard {
        let grad = 0.5 / lam_min * farthest_corner_distance(l, &c);
        check_phase_resolution(grad, l, n)?;
    }
    Ok(box_quadrature(l, n, m, |y| kernel.eval(&c, y) * source(y)))
}

/// Box and resolution for the regularized mass integral at a given ε:
/// the box reaches where the damping has fallen to ~1e-15 and n resolves
/// the kernel phase with a factor-2 safety margin over the π-per-cell guard.
pub fn fresnel_geometry(
    sys: &SystemPair,
    t: f64,
    point: &[f64],
    eps: f64,
    mode: FresnelMode,
) -> Result<(Vec<f64>, usize)> {
    let m = sys.dim();
    let (_, flow, lam_min) = Kernel::new(sys, t)?;
    let half = (34.5 / eps).sqrt();
    let l = vec![half; m];
    let flow_norm = matcore::spectral_norm(&flow);
    let (anchor, stretch) = match mode {
        FresnelMode::OverY => {
            let mut c = vec![0.0; m];
            for i in 0..m {
                c[i] = (0..m).map(|j| flow[(i, j)] * point[j]).sum();
            }
            (c, 1.0)
        }
        FresnelMode::OverX => (point.to_vec(), flow_norm),
    };
    let reach = stretch * farthest_corner_distance(&l, &vec![0.0; m])
        + anchor.iter().map(|a| a * a).sum::<f64>().sqrt();
    let grad = 0.5 / lam_min * stretch * reach;
    let needed = l
        .iter()
        .map(|li| 4.0 * grad * li / PI)
        .fold(16.0, f64::max);
    let n = (needed.ceil() as usize).next_power_of_two();
    if n.pow(m as u32) > 1 << 26 {
        return Err(Error::Resolution(format!(
            "regularized Fresnel integral needs {n}^{m} nodes at eps = {eps}; \
             use a larger eps for this system"
        )));
    }
    Ok((l, n))
}

/// Regularized kernel mass: the y-integral tends to 1 and the x-integral
/// to e^{-t·tr B} as ε ↓ 0, at first order in ε.
///
/// `geometry` overrides the automatic ε-scaled box; the resolution guard
/// runs either way.
pub fn fresnel_mass(
    sys: &SystemPair,
    t: f64,
    point: &[f64],
    eps: f64,
    geometry: Option<(Vec<f64>, usize)>,
    mode: FresnelMode,
) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("fresnel_mass requires t > 0, got {t}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("fresnel_mass requires eps > 0, got {eps}")));
    }
    let m = sys.dim();
    if point.len() != m {
        return Err(Error::InvalidInput("point dimension mismatch".into()));
    }
    let (kernel, flow, lam_min) = Kernel::new(sys, t)?;
    let (l, n) = match geometry {
        Some(g) => g,
        None => fresnel_geometry(sys, t, point, eps, mode)?,
    };
    if l.len() != m {
        return Err(Error::InvalidInput("box dimension mismatch".into()));
    }

    match mode {
        FresnelMode::OverY => {
            let mut c = vec![0.0; m];
            for i in 0..m {
                c[i] = (0..m).map(|j| flow[(i, j)] * point[j]).sum();
            }
            let grad = 0.5 / lam_min * farthest_corner_distance(&l, &c);
            check_phase_resolution(grad, &l, n)?;
            Ok(box_quadrature(&l, n, m, |y| {
                let damp: f64 = y.iter().map(|yi| yi * yi).sum();
                kernel.eval(&c, y) * (-eps * damp).exp()
            }))
        }
        FresnelMode::OverX => {
            let flow_norm = matcore::spectral_norm(&flow);
            let reach = flow_norm * farthest_corner_distance(&l, &vec![0.0; m])
                + point.iter().map(|a| a * a).sum::<f64>().sqrt();
            let grad = 0.5 / lam_min * flow_norm * reach;
            check_phase_resolution(grad, &l, n)?;
            Ok(box_quadrature(&l, n, m, |x| {
                let mut c = vec![0.0; m];
                for i in 0..m {
                    c[i] = (0..m).map(|j| flow[(i, j)] * x[j]).sum();
                }
                let damp: f64 = x.iter().map(|xi| xi * xi).sum();
                kernel.eval(&c, point) * (-eps * damp).exp()
            }))
        }
    }
}
