//! Exact complex Gaussian wave-packet calculus.
//!
//! A packet is c·exp(-⟨Mx,x⟩ + ⟨w,x⟩) with M complex symmetric and
//! Re M ≻ 0, so every packet is Schwartz with finite Lᵖ norms. The class
//! is closed under the Fourier transform (convention
//! ℱf(ξ) = ∫ e^{-2πi⟨ξ,x⟩} f(x) dx) and under the propagator T(t); both
//! closures are plain arithmetic on (M, w, c), which makes packets the
//! high-precision oracle the grid backends are checked against.
//!
//! All pairings below are bilinear, not sesquilinear: ⟨u,v⟩ = Σ uᵢvᵢ.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matcore::{self, SystemPair, HYPO_TOL};

pub(crate) type CMatrix = DMatrix<Complex64>;
pub(crate) type CVector = DVector<Complex64>;

pub(crate) fn complexify(mat: &DMatrix<f64>) -> CMatrix {
    mat.map(Complex64::from)
}

pub(crate) fn bilinear(u: &CVector, v: &CVector) -> Complex64 {
    u.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

fn symmetrize_c(mat: &CMatrix) -> CMatrix {
    (mat + mat.transpose()).map(|z| z * 0.5)
}

/// c·exp(-⟨Mx,x⟩ + ⟨w,x⟩) with Re M ≻ 0.
#[derive(Debug, Clone)]
pub struct GaussianPacket {
    dim: usize,
    exponent: CMatrix,
    linear: CVector,
    amplitude: Complex64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PacketJson {
    m: usize,
    #[serde(rename = "M_re")]
    m_re: Vec<Vec<f64>>,
    #[serde(rename = "M_im")]
    m_im: Vec<Vec<f64>>,
    w_re: Vec<f64>,
    w_im: Vec<f64>,
    c_re: f64,
    c_im: f64,
}

impl GaussianPacket {
    /// Validates complex symmetry of M (within 1e-12 relative) and strict
    /// positivity of Re M.
    pub fn new(exponent: CMatrix, linear: CVector, amplitude: Complex64) -> Result<Self> {
        let m = exponent.nrows();
        if m == 0 || exponent.ncols() != m || linear.len() != m {
            return Err(Error::InvalidInput("packet shape mismatch".into()));
        }
        if exponent.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
            || linear.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
            || !amplitude.re.is_finite()
            || !amplitude.im.is_finite()
        {
            return Err(Error::InvalidInput("non-finite packet data".into()));
        }
        let scale = exponent.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let asym = (&exponent - exponent.transpose())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if asym > 1e-12 * scale.max(1.0) * m as f64 {
            return Err(Error::InvalidInput(format!(
                "exponent matrix not complex-symmetric (max |M - M^T| = {asym:.3e})"
            )));
        }
        let re = exponent.map(|z| z.re);
        let lam_min = SymmetricEigen::new(matcore::symmetrize(&re)).eigenvalues.min();
        if lam_min <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "Re M must be positive definite (lambda_min = {lam_min:.3e})"
            )));
        }
        Ok(Self {
            dim: m,
            exponent: symmetrize_c(&exponent),
            linear,
            amplitude,
        })
    }

    /// The isotropic real Gaussian c = 1, w = 0, M = a·I.
    pub fn isotropic(m: usize, a: f64) -> Self {
        Self::new(
            CMatrix::identity(m, m).map(|z| z * a),
            CVector::zeros(m),
            Complex64::from(1.0),
        )
        .expect("isotropic packet is valid for a > 0")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: PacketJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("packet JSON: {e}")))?;
        let m = raw.m;
        let check = |rows: &Vec<Vec<f64>>, name: &str| -> Result<()> {
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(Error::Parse(format!("{name} must be a {m}x{m} array")));
            }
            Ok(())
        };
        check(&raw.m_re, "M_re")?;
        check(&raw.m_im, "M_im")?;
        if raw.w_re.len() != m || raw.w_im.len() != m {
            return Err(Error::Parse(format!("w_re/w_im must have length {m}")));
        }
        let exponent =
            CMatrix::from_fn(m, m, |i, j| Complex64::new(raw.m_re[i][j], raw.m_im[i][j]));
        let linear = CVector::from_fn(m, |i, _| Complex64::new(raw.w_re[i], raw.w_im[i]));
        Self::new(exponent, linear, Complex64::new(raw.c_re, raw.c_im))
    }

    pub fn to_json_string(&self) -> String {
        let m = self.dim;
        let pick = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m)
                .map(|i| (0..m).map(|j| f(&self.exponent[(i, j)])).collect())
                .collect()
        };
        let raw = PacketJson {
            m,
            m_re: pick(|z| z.re),
            m_im: pick(|z| z.im),
            w_re: self.linear.iter().map(|z| z.re).collect(),
            w_im: self.linear.iter().map(|z| z.im).collect(),
            c_re: self.amplitude.re,
            c_im: self.amplitude.im,
        };
        serde_json::to_string_pretty(&raw).expect("packet serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent(&self) -> &CMatrix {
        &self.exponent
    }

    pub fn linear(&self) -> &CVector {
        &self.linear
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    pub fn re_exponent(&self) -> DMatrix<f64> {
        matcore::symmetrize(&self.exponent.map(|z| z.re))
    }

    pub fn im_exponent(&self) -> DMatrix<f64> {
        matcore::symmetrize(&self.exponent.map(|z| z.im))
    }

    /// Pointwise value c·exp(-⟨Mx,x⟩ + ⟨w,x⟩).
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        assert_eq!(x.len(), self.dim, "evaluation point dimension mismatch");
        let xv = CVector::from_fn(self.dim, |i, _| Complex64::from(x[i]));
        let mx = &self.exponent * &xv;
        let expo = -bilinear(&mx, &xv) + bilinear(&self.linear, &xv);
        self.amplitude * expo.exp()
    }

    /// Exact Fourier transform, by completing the square:
    /// M ↦ π²M⁻¹, w ↦ -iπ M⁻¹w, c ↦ c·π^{m/2}/√det M·e^{⟨M⁻¹w,w⟩/4},
    /// with the branched square root of det M.
    pub fn fourier(&self) -> Result<Self> {
        let lam_min = SymmetricEigen::new(self.re_exponent()).eigenvalues.min();
        if lam_min <= 0.0 {
            return Err(Error::UnsupportedLimit(
                "Fourier transform of a pure chirp (Re M singular) is not a packet".into(),
            ));
        }
        let minv = self
            .exponent
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvariantViolation("exponent matrix not invertible".into()))?;
        let sd = sqrt_det_branched(&self.exponent)?;
        let m_hat = symmetrize_c(&(&minv * Complex64::from(PI * PI)));
        let minv_w = &minv * &self.linear;
        let w_hat = minv_w.map(|z| z * Complex64::new(0.0, -PI));
        let c_hat = self.amplitude * Complex64::from(PI.powf(self.dim as f64 / 2.0)) / sd.value
            * (bilinear(&minv_w, &self.linear) * 0.25).exp();
        Self::new(m_hat, w_hat, c_hat)
            .map_err(|e| Error::InvariantViolation(format!("transform left the packet class: {e}")))
    }

    /// ℱ⁻¹ = reflection after ℱ: the inverse transform of a packet is its
    /// forward transform with the linear term negated.
    pub fn inverse_fourier(&self) -> Result<Self> {
        let ft = self.fourier()?;
        Ok(Self {
            dim: ft.dim,
            exponent: ft.exponent,
            linear: -ft.linear,
            amplitude: ft.amplitude,
        })
    }

    /// Exact propagation under T(t): Fourier transform, substitution
    /// ξ ← e^{-tB*}ξ with amplitude factor e^{-t·tr B}, multiplication by
    /// the quadratic chirp, inverse transform.
    pub fn propagate(&self, sys: &SystemPair, t: f64) -> Result<Self> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Domain(format!("propagation requires t >= 0, got {t}")));
        }
        if sys.dim() != self.dim {
            return Err(Error::InvalidInput(format!(
                "packet dimension {} does not match system dimension {}",
                self.dim,
                sys.dim()
            )));
        }
        if t == 0.0 {
            return Ok(self.clone());
        }
        // hypoellipticity is scale-free; probe at t = 1 where the spectral
        // criterion stays well conditioned for degenerate Q
        let report = matcore::hypoelliptic(sys, 1.0, HYPO_TOL)?;
        if !report.hypoelliptic {
            return Err(Error::Singular(
                "propagation requires a hypoelliptic system for t > 0".into(),
            ));
        }
        let cov = matcore::covariance(sys, t)?;
        let flow_back = matcore::mat_exp(sys.b(), -t)?; // e^{-tB}
        let e = complexify(&flow_back);
        let hat = self.fourier()?;

        // substitute xi <- e^{-tB*} xi, scale by e^{-t tr B}
        let m2 = symmetrize_c(&(&e * &hat.exponent * e.transpose()));
        let w2 = &e * &hat.linear;
        let c2 = hat.amplitude * Complex64::from((-t * sys.trace_b()).exp());

        // multiply by the chirp e^{-4 pi^2 i <Q(t) e^{-tB*} xi, e^{-tB*} xi>}
        let chirp = &flow_back * cov.value() * flow_back.transpose();
        let m3 =
            &m2 + complexify(&matcore::symmetrize(&chirp)) * Complex64::new(0.0, 4.0 * PI * PI);

        let shifted = Self::new(m3, w2, c2)
            .map_err(|e| Error::InvariantViolation(format!("chirp step broke the packet: {e}")))?;
        let out = shifted.inverse_fourier()?;
        debug_assert!(
            SymmetricEigen::new(out.re_exponent()).eigenvalues.min() > 0.0,
            "Re M must stay positive definite under propagation"
        );
        Ok(out)
    }

    /// Exact Lᵖ norm of the packet for p ∈ [1, ∞]. The modulus is the real
    /// Gaussian |c|·e^{-⟨Re M x,x⟩ + ⟨Re w,x⟩}, integrated in closed form.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("Lp norm requires p >= 1, got {p}")));
        }
        let r = self.re_exponent();
        let eig = SymmetricEigen::new(r);
        let det_r: f64 = eig.eigenvalues.iter().product();
        let rv = self.linear.map(|z| z.re);
        // <R^{-1} r, r> via the eigendecomposition
        let proj = eig.eigenvectors.transpose() * &rv;
        let quad: f64 = proj
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, l)| c * c / l)
            .sum();
        let peak = self.amplitude.norm() * (quad / 4.0).exp();
        if p.is_infinite() {
            return Ok(peak);
        }
        let m = self.dim as f64;
        Ok(peak * (PI / p).powf(m / (2.0 * p)) * det_r.powf(-1.0 / (2.0 * p)))
    }

    pub fn norm_l2(&self) -> f64 {
        self.lp_norm(2.0).expect("p = 2 is always valid")
    }

    /// (ℒP)(x) for ℒφ = i·tr(Q ∇²φ) + ⟨Bx, ∇φ⟩, using
    /// ∇P = (w - 2Mx)·P and ∇²P = ((w-2Mx)(w-2Mx)ᵀ - 2M)·P.
    pub fn generator_eval(&self, sys: &SystemPair, x: &[f64]) -> Complex64 {
        assert_eq!(x.len(), self.dim, "evaluation point dimension mismatch");
        assert_eq!(sys.dim(), self.dim, "system dimension mismatch");
        let xv = CVector::from_fn(self.dim, |i, _| Complex64::from(x[i]));
        let g = &self.linear - (&self.exponent * &xv).map(|z| z * 2.0);
        let qc = complexify(sys.q());
        let qg = &qc * &g;
        let trace_qm = (&qc * &self.exponent).trace();
        let bx = complexify(sys.b()) * &xv;
        let factor =
            Complex64::new(0.0, 1.0) * (bilinear(&qg, &g) - trace_qm * 2.0) + bilinear(&bx, &g);
        factor * self.eval(x)
    }
}

/// √det of a complex symmetric matrix with Re A ⪰ 0, on the analytic
/// branch that is positive for real SPD input.
#[derive(Debug, Clone)]
pub struct BranchedDet {
    /// ∏ⱼ √λⱼ with each square root taken with argument in (-π/4, π/4].
    pub value: Complex64,
    /// Arguments of the chosen square roots.
    pub branch_args: Vec<f64>,
}

/// Eigenvalue-wise branched square root of det A. Since A is complex
/// symmetric with Re A ⪰ 0, every eigenvalue satisfies Re λ ≥ 0 (its real
/// part lies in the numerical range of Re A), so the principal square root
/// per eigenvalue is the unique analytic branch.
pub fn sqrt_det_branched(a: &CMatrix) -> Result<BranchedDet> {
    let m = a.nrows();
    if a.ncols() != m || m == 0 {
        return Err(Error::InvalidInput(
            "sqrt_det_branched requires a square matrix".into(),
        ));
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let asym = (a - a.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-10 * scale.max(1.0) * m as f64 {
        return Err(Error::InvalidInput(
            "sqrt_det_branched requires a complex-symmetric matrix".into(),
        ));
    }
    let re = matcore::symmetrize(&a.map(|z| z.re));
    let re_min = SymmetricEigen::new(re).eigenvalues.min();
    if re_min < -1e-12 * scale.max(1.0) {
        return Err(Error::Branch(format!(
            "Re A must be PSD (lambda_min = {re_min:.3e})"
        )));
    }
    let schur = a
        .clone()
        .try_schur(1e-14, 100_000)
        .ok_or_else(|| Error::InvariantViolation("complex Schur iteration failed".into()))?;
    let (_, tri) = schur.unpack();
    let mut value = Complex64::from(1.0);
    let mut branch_args = Vec::with_capacity(m);
    for j in 0..m {
        let lam = tri[(j, j)];
        if lam.re < -1e-9 * scale {
            return Err(Error::Branch(format!(
                "eigenvalue {lam} has negative real part; branch undefined"
            )));
        }
        let root = lam.sqrt();
        branch_args.push(root.arg());
        value *= root;
    }
    Ok(BranchedDet { value, branch_args })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        let p = GaussianPacket::isotropic(3, 1.0);
        assert_abs_diff_eq!(p.eval(&[0.0, 0.0, 0.0]).re, 1.0, epsilon = 1e-15);

        let p = GaussianPacket::isotropic(2, PI);
        let x = [0.6, 0.8]; // |x|^2 = 1
        assert_relative_eq!(p.eval(&x).re, (-PI).exp(), max_relative = 1e-13);

        let p = GaussianPacket::new(
            CMatrix::from_row_slice(1, 1, &[c(1.0, -1.0)]),
            CVector::zeros(1),
            c(2.0, 0.0),
        )
        .unwrap();
        let v = p.eval(&[1.0]);
        let expected = 2.0 * (-1.0_f64).exp() * c(1.0_f64.cos(), 1.0_f64.sin());
        assert_relative_eq!(v.re, expected.re, max_relative = 1e-13);
        assert_relative_eq!(v.im, expected.im, max_relative = 1e-13);
    }

    #[test]
    fn sqrt_det_identity() {
        let sd = sqrt_det_branched(&CMatrix::identity(4, 4)).unwrap();
        assert_abs_diff_eq!(sd.value.re, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(sd.value.im, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn sqrt_det_imaginary_spd() {
        // A = i*A0 with A0 real SPD: branch gives e^{i pi m/4} sqrt(det A0)
        let a0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]);
        let a = complexify(&a0) * c(0.0, 1.0);
        let sd = sqrt_det_branched(&a).unwrap();
        let expected = c(0.0, PI / 2.0).exp() * a0.determinant().sqrt();
        assert_relative_eq!(sd.value.re, expected.re, max_relative = 1e-12);
        assert_relative_eq!(sd.value.im, expected.im, max_relative = 1e-12);
    }

    #[test]
    fn sqrt_det_conjugate_pair() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, -1.0)]);
        let sd = sqrt_det_branched(&a).unwrap();
        assert_relative_eq!(sd.value.re, 2.0_f64.sqrt(), max_relative = 1e-13);
        assert_abs_diff_eq!(sd.value.im, 0.0, epsilon = 1e-13);
        let mut args = sd.branch_args.clone();
        args.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(args[0], -PI / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(args[1], PI / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_det_squares_to_det() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.3), c(0.2, -0.1), c(0.2, -0.1), c(2.0, 0.7)],
        );
        let sd = sqrt_det_branched(&a).unwrap();
        let det = a.determinant();
        let sq = sd.value * sd.value;
        assert_relative_eq!(sq.re, det.re, max_relative = 1e-10);
        assert_relative_eq!(sq.im, det.im, max_relative = 1e-10);
    }

    #[test]
    fn sqrt_det_rejects_negative_real_part() {
        let a = CMatrix::from_row_slice(1, 1, &[c(-1.0, 0.0)]);
        assert!(matches!(sqrt_det_branched(&a), Err(Error::Branch(_))));
    }

    #[test]
    fn fourier_self_dual_gaussian() {
        let p = GaussianPacket::isotropic(2, PI);
        let ft = p.fourier().unwrap();
        assert!((ft.exponent() - p.exponent()).iter().all(|z| z.norm() < 1e-13));
        assert_relative_eq!(ft.amplitude().re, 1.0, max_relative = 1e-13);
        assert_abs_diff_eq!(ft.amplitude().im, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn fourier_one_dimensional_closed_form() {
        // F(e^{-a x^2}) = sqrt(pi/a) e^{-pi^2 xi^2 / a}
        let a = 0.7;
        let p = GaussianPacket::isotropic(1, a);
        let ft = p.fourier().unwrap();
        assert_relative_eq!(ft.exponent()[(0, 0)].re, PI * PI / a, max_relative = 1e-13);
        assert_abs_diff_eq!(ft.exponent()[(0, 0)].im, 0.0, epsilon = 1e-13);
        assert_relative_eq!(ft.amplitude().re, (PI / a).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn fourier_imaginary_gaussian_limit() {
        // M = (1/4)(i A0 + eps I)^{-1}: the transform amplitude ratio tends
        // to (4 pi)^{m/2} e^{i m pi/4} sqrt(det A0) as eps -> 0.
        let a0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let eps = 1e-8;
        let a = complexify(&a0) * c(0.0, 1.0) + CMatrix::identity(2, 2) * c(eps, 0.0);
        let minv = a.try_inverse().unwrap() * c(0.25, 0.0);
        let p = GaussianPacket::new(minv, CVector::zeros(2), c(1.0, 0.0)).unwrap();
        let ft = p.fourier().unwrap();
        let ratio = ft.amplitude() / p.amplitude();
        let expected = 4.0 * PI * c(0.0, PI / 2.0).exp() * 2.0_f64.sqrt();
        assert!(
            (ratio - expected).norm() <= 1e-6 * expected.norm(),
            "ratio {ratio} vs limit {expected}"
        );
    }

    #[test]
    fn pure_chirp_is_rejected() {
        let reject = GaussianPacket::new(
            CMatrix::from_row_slice(1, 1, &[c(0.0, 1.0)]),
            CVector::zeros(1),
            c(1.0, 0.0),
        );
        assert!(matches!(reject, Err(Error::InvalidInput(_))));
        // a barely-positive chirped packet still transforms fine
        let p = GaussianPacket::new(
            CMatrix::from_row_slice(1, 1, &[c(1e-8, 1.0)]),
            CVector::zeros(1),
            c(1.0, 0.0),
        )
        .unwrap();
        assert!(p.fourier().is_ok());
    }

    #[test]
    fn propagate_at_zero_is_identity() {
        let sys = SystemPair::kolmogorov(1);
        let p = GaussianPacket::isotropic(2, 1.0);
        let out = p.propagate(&sys, 0.0).unwrap();
        assert!((out.exponent() - p.exponent()).iter().all(|z| z.norm() < 1e-15));
        assert_eq!(out.amplitude(), p.amplitude());
    }

    #[test]
    fn propagate_free_one_dimensional_decay() {
        // exact 1-D chain: Re M = a/(1+16 a^2 t^2), |c| = (1+16 a^2 t^2)^{-1/4}
        let sys = SystemPair::free(1);
        for &(a, t) in &[(1.0, 0.25), (0.5, 1.0), (2.0, 0.8)] {
            let p = GaussianPacket::isotropic(1, a);
            let out = p.propagate(&sys, t).unwrap();
            let denom = 1.0 + 16.0 * a * a * t * t;
            assert_relative_eq!(out.re_exponent()[(0, 0)], a / denom, max_relative = 1e-12);
            assert_relative_eq!(
                out.amplitude().norm(),
                denom.powf(-0.25),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn propagate_ou_norm_growth() {
        // norm identity with tr B = -m: the L2 norm grows like e^{m t / 2}
        let sys = SystemPair::ornstein_uhlenbeck(2);
        let p = GaussianPacket::isotropic(2, 1.0);
        let out = p.propagate(&sys, 1.0).unwrap();
        assert_relative_eq!(
            out.norm_l2() / p.norm_l2(),
            1.0_f64.exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn propagate_rejects_degenerate_system() {
        let degenerate = SystemPair::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let p = GaussianPacket::isotropic(2, 1.0);
        assert!(matches!(p.propagate(&degenerate, 0.5), Err(Error::Singular(_))));
    }

    #[test]
    fn lp_norm_examples() {
        let m = 3;
        let p = GaussianPacket::isotropic(m, PI);
        assert_relative_eq!(
            p.lp_norm(2.0).unwrap(),
            2.0_f64.powf(-(m as f64) / 4.0),
            max_relative = 1e-13
        );
        assert_relative_eq!(p.lp_norm(f64::INFINITY).unwrap(), 1.0, max_relative = 1e-15);
        assert!(matches!(p.lp_norm(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn chirp_leaves_all_norms_unchanged() {
        let base = GaussianPacket::isotropic(2, PI);
        let chirped = GaussianPacket::new(
            base.exponent() + CMatrix::identity(2, 2) * c(0.0, 1.0),
            CVector::zeros(2),
            c(1.0, 0.0),
        )
        .unwrap();
        for &p in &[1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            assert_relative_eq!(
                base.lp_norm(p).unwrap(),
                chirped.lp_norm(p).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn generator_pure_diffusion_at_origin() {
        let m = 3;
        let sys = SystemPair::free(m);
        let p = GaussianPacket::isotropic(m, 1.0);
        let v = p.generator_eval(&sys, &[0.0; 3]);
        assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(v.im, -2.0 * m as f64, max_relative = 1e-13);
    }

    #[test]
    fn generator_kolmogorov_example() {
        // Only the vv second derivative enters through Q, and at (1,0) it is
        // (4x_1^2 - 2)e^{-|x|^2} = +2e^{-1}; B(1,0)^T = (0,1)^T is orthogonal
        // to grad P there, so the drift contributes nothing. Cross-checked by
        // the finite-difference oracle below.
        let sys = SystemPair::kolmogorov(1);
        let p = GaussianPacket::isotropic(2, 1.0);
        let v = p.generator_eval(&sys, &[1.0, 0.0]);
        let expected = c(0.0, 2.0) * (-1.0_f64).exp();
        assert_relative_eq!(v.re, expected.re, max_relative = 1e-12);
        assert_relative_eq!(v.im, expected.im, max_relative = 1e-12);
    }

    #[test]
    fn generator_matches_finite_differences() {
        let sys = SystemPair::kramers();
        let p = GaussianPacket::new(
            CMatrix::from_row_slice(
                2,
                2,
                &[c(0.8, 0.2), c(0.1, -0.1), c(0.1, -0.1), c(1.1, 0.4)],
            ),
            CVector::from_column_slice(&[c(0.3, 0.1), c(-0.2, 0.4)]),
            c(0.9, -0.3),
        )
        .unwrap();
        let x = [0.4, -0.7];
        let h = 1e-5;
        let mut hess_tr = Complex64::from(0.0);
        let mut drift = Complex64::from(0.0);
        for i in 0..2 {
            for j in 0..2 {
                let mut xpp = x;
                let mut xpm = x;
                let mut xmp = x;
                let mut xmm = x;
                xpp[i] += h;
                xpp[j] += h;
                xpm[i] += h;
                xpm[j] -= h;
                xmp[i] -= h;
                xmp[j] += h;
                xmm[i] -= h;
                xmm[j] -= h;
                let dij =
                    (p.eval(&xpp) - p.eval(&xpm) - p.eval(&xmp) + p.eval(&xmm)) / (4.0 * h * h);
                hess_tr += sys.q()[(i, j)] * dij;
            }
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let di = (p.eval(&xp) - p.eval(&xm)) / (2.0 * h);
            let bx_i: f64 = (0..2).map(|k| sys.b()[(i, k)] * x[k]).sum();
            drift += di * bx_i;
        }
        let fd = c(0.0, 1.0) * hess_tr + drift;
        let exact = p.generator_eval(&sys, &x);
        assert_relative_eq!(exact.re, fd.re, max_relative = 1e-5);
        assert_relative_eq!(exact.im, fd.im, max_relative = 1e-5);
    }

    #[test]
    fn packet_json_round_trip() {
        let p = GaussianPacket::new(
            CMatrix::from_row_slice(1, 1, &[c(1.0, 0.5)]),
            CVector::from_column_slice(&[c(0.2, -0.3)]),
            c(1.0, 0.0),
        )
        .unwrap();
        let back = GaussianPacket::from_json_str(&p.to_json_string()).unwrap();
        assert!((back.exponent() - p.exponent()).iter().all(|z| z.norm() < 1e-15));
        assert!((back.linear() - p.linear()).iter().all(|z| z.norm() < 1e-15));
    }
}
