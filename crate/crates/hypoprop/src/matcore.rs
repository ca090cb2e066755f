//! Dense real-matrix algebra for the drifted Schrödinger semigroup.
//!
//! Everything here is driven by the pair (Q, B): the covariance matrix
//! Q(t) = ∫₀ᵗ e^{sB} Q e^{sB*} ds, the hypoellipticity decision (positivity
//! of Q(t), equivalently the Kalman rank condition), and the uncertainty
//! map K(t) = 4π t⁻¹ Q(t) e^{-tB}.
//!
//! Matrices are small and dense (desk scale, m ≤ 8); all operations are
//! pure functions on immutable values.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYM_TOL: f64 = 1e-12;

/// Default relative spectral tolerance for the hypoellipticity decision.
pub const HYPO_TOL: f64 = 1e-10;

/// The equation data: real m×m matrices Q (symmetric PSD) and B.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPair {
    dim: usize,
    q: DMatrix<f64>,
    b: DMatrix<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SystemJson {
    m: usize,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
}

impl SystemPair {
    /// Validates and builds a system. Q must be symmetric within `SYM_TOL`
    /// relative and PSD up to -1e-12·‖Q‖; both matrices must be m×m with
    /// finite entries.
    pub fn new(q: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let m = q.nrows();
        if m == 0 {
            return Err(Error::InvalidInput("dimension m must be >= 1".into()));
        }
        if q.ncols() != m || b.nrows() != m || b.ncols() != m {
            return Err(Error::InvalidInput(format!(
                "Q and B must both be {m}x{m} (got Q {}x{}, B {}x{})",
                q.nrows(),
                q.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if q.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        let scale = q.amax().max(1e-300);
        let asym = (&q - q.transpose()).amax();
        if asym > SYM_TOL * scale.max(1.0) * q.nrows() as f64 {
            return Err(Error::InvalidInput(format!(
                "Q is not symmetric: max |Q - Q^T| = {asym:.3e}"
            )));
        }
        let q = symmetrize(&q);
        let eig = SymmetricEigen::new(q.clone());
        let lam_min = eig.eigenvalues.min();
        let lam_max = eig.eigenvalues.amax();
        if lam_min < -1e-12 * lam_max.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "Q has a negative eigenvalue {lam_min:.3e}, not PSD"
            )));
        }
        Ok(Self { dim: m, q, b })
    }

    /// Parses the `{"m":…, "Q":[[…]], "B":[[…]]}` JSON schema. Rejects
    /// non-square inputs and Q asymmetric beyond 1e-9 absolute; smaller
    /// asymmetry is repaired as (Q+Qᵀ)/2.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: SystemJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("system JSON: {e}")))?;
        let m = raw.m;
        let q = rows_to_matrix(&raw.q, m, "Q")?;
        let b = rows_to_matrix(&raw.b, m, "B")?;
        let asym = (&q - q.transpose()).amax();
        if asym > 1e-9 {
            return Err(Error::Parse(format!(
                "Q asymmetric beyond 1e-9 absolute (max |Q - Q^T| = {asym:.3e})"
            )));
        }
        Self::new(symmetrize(&q), b)
    }

    pub fn to_json_string(&self) -> String {
        let raw = SystemJson {
            m: self.dim,
            q: matrix_to_rows(&self.q),
            b: matrix_to_rows(&self.b),
        };
        serde_json::to_string_pretty(&raw).expect("system serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn trace_b(&self) -> f64 {
        self.b.trace()
    }

    /// Free Schrödinger system: Q = I, B = 0.
    pub fn free(m: usize) -> Self {
        Self::new(DMatrix::identity(m, m), DMatrix::zeros(m, m)).expect("valid")
    }

    /// Schrödinger equation with Ornstein-Uhlenbeck drift: Q = I, B = -I.
    pub fn ornstein_uhlenbeck(m: usize) -> Self {
        Self::new(DMatrix::identity(m, m), -DMatrix::identity(m, m)).expect("valid")
    }

    /// Kolmogorov system in dimension m = 2n: diffusion in the first n
    /// variables, transport coupling into the last n.
    pub fn kolmogorov(n: usize) -> Self {
        let m = 2 * n;
        let mut q = DMatrix::zeros(m, m);
        let mut b = DMatrix::zeros(m, m);
        for i in 0..n {
            q[(i, i)] = 1.0;
            b[(n + i, i)] = 1.0;
        }
        Self::new(q, b).expect("valid")
    }

    /// Kramers system in m = 2: rank-one diffusion with rotational drift.
    pub fn kramers() -> Self {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        Self::new(q, b).expect("valid")
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], m: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Parse(format!("{name} must be a {m}x{m} row-major array")));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

fn matrix_to_rows(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..mat.nrows())
        .map(|i| (0..mat.ncols()).map(|j| mat[(i, j)]).collect())
        .collect()
}

pub fn symmetrize(mat: &DMatrix<f64>) -> DMatrix<f64> {
    (mat + mat.transpose()) * 0.5
}

/// The covariance matrix Q(t) with its eigendecomposition cached.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    t: f64,
    value: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
    det: f64,
    inv: Option<DMatrix<f64>>,
}

impl CovarianceMatrix {
    fn from_value(t: f64, value: DMatrix<f64>) -> Self {
        let value = symmetrize(&value);
        let eig = SymmetricEigen::new(value.clone());
        let det = eig.eigenvalues.iter().product();
        let lam_max: f64 = eig.eigenvalues.amax();
        let lam_min = eig.eigenvalues.min();
        let inv = if lam_min > 1e-14 * lam_max.max(1e-300) {
            let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
            Some(symmetrize(&(&eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())))
        } else {
            None
        };
        Self {
            t,
            value,
            eigvals: eig.eigenvalues,
            eigvecs: eig.eigenvectors,
            det,
            inv,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn value(&self) -> &DMatrix<f64> {
        &self.value
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigvals.min()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigvals.max()
    }

    /// Q(t)⁻¹; fails when the system was not hypoelliptic at this t.
    pub fn inv(&self) -> Result<&DMatrix<f64>> {
        self.inv.as_ref().ok_or_else(|| {
            Error::Singular(format!(
                "Q(t) singular at t = {} (lambda_min = {:.3e})",
                self.t,
                self.lambda_min()
            ))
        })
    }

    /// Eigenvalues of Q(t) in nalgebra's order, paired with `eigvecs`.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }
}

/// Outcome of the hypoellipticity decision at one probe time.
#[derive(Debug, Clone, Serialize)]
pub struct HypoReport {
    pub kalman_rank: usize,
    pub lambda_min_at_t: f64,
    pub hypoelliptic: bool,
    pub t_probe: f64,
}

/// e^{tM} by scaling and squaring with diagonal Padé approximants
/// (degrees 3/5/7/9/13 selected from the 1-norm of tM).
pub fn mat_exp(mat: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if mat.nrows() != mat.ncols() {
        return Err(Error::InvalidInput("mat_exp requires a square matrix".into()));
    }
    if !t.is_finite() || mat.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite input to mat_exp".into()));
    }
    let a = mat * t;
    Ok(expm(&a))
}

const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = one_norm(a);
    if norm <= THETA_3 {
        return pade_low(a, &PADE_3);
    }
    if norm <= THETA_5 {
        return pade_low(a, &PADE_5);
    }
    if norm <= THETA_7 {
        return pade_low(a, &PADE_7);
    }
    if norm <= THETA_9 {
        return pade_low(a, &PADE_9);
    }
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as u32;
    let scaled = a / 2f64.powi(s as i32);
    let mut f = pade_13(&scaled);
    for _ in 0..s {
        f = &f * &f;
    }
    f
}

/// Diagonal Padé for degrees 3..9: U = A·(odd powers), V = even powers.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let a2 = a * a;
    let ident = DMatrix::identity(n, n);
    let mut even = &ident * b[0];
    let mut odd = &ident * b[1];
    let mut pow = ident; // A^{2k}
    for k in 1..=(b.len() - 1) / 2 {
        pow = &pow * &a2;
        even += &pow * b[2 * k];
        if 2 * k + 1 < b.len() {
            odd += &pow * b[2 * k + 1];
        }
    }
    let u = a * odd;
    pade_solve(&even, &u)
}

fn pade_13(a: &DMatrix<f64>) -> DMatrix<f64> {
    let b = &PADE_13;
    let n = a.nrows();
    let ident = DMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u_lo = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = a * (u_hi + u_lo);
    let v_hi = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    pade_solve(&v, &u)
}

/// Solves (V - U) F = V + U.
fn pade_solve(v: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    let lhs = v - u;
    let rhs = v + u;
    lhs.lu().solve(&rhs).expect("Padé denominator is invertible")
}

/// Q(t) by the Van Loan block-exponential method: exponentiate
/// [[-B, Q], [0, Bᵀ]] and read the integral off the top-right block.
///
/// For large ‖tB‖ the block exponential mixes huge and tiny scales (the
/// top-left block carries e^{-tB}), so t is halved until the block norm is
/// moderate and Q(t) is rebuilt through the additivity law
/// Q(2s) = Q(s) + e^{sB} Q(s) e^{sBᵀ}.
pub fn covariance(sys: &SystemPair, t: f64) -> Result<CovarianceMatrix> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("covariance requires t > 0, got {t}")));
    }
    let m = sys.dim();
    let mut block = DMatrix::zeros(2 * m, 2 * m);
    block.view_mut((0, 0), (m, m)).copy_from(&(-sys.b()));
    block.view_mut((0, m), (m, m)).copy_from(sys.q());
    block.view_mut((m, m), (m, m)).copy_from(&sys.b().transpose());

    let norm_t = one_norm(&block) * t;
    let doublings = if norm_t > 20.0 {
        (norm_t / 20.0).log2().ceil() as u32
    } else {
        0
    };
    let s = t / 2f64.powi(doublings as i32);

    let f = mat_exp(&block, s)?;
    let f12 = f.view((0, m), (m, m)).into_owned();
    let f22 = f.view((m, m), (m, m)).into_owned();
    let mut qt = symmetrize(&(f22.transpose() * f12));
    let mut flow = mat_exp(sys.b(), s)?;
    for _ in 0..doublings {
        qt = symmetrize(&(&qt + &flow * &qt * flow.transpose()));
        flow = &flow * &flow;
    }
    Ok(CovarianceMatrix::from_value(t, qt))
}

/// Independent oracle for Q(t): composite 8-point Gauss-Legendre
/// quadrature of e^{sB} Q e^{sBᵀ} over n subdivisions of [0, t].
pub fn covariance_quad(sys: &SystemPair, t: f64, n: usize) -> Result<DMatrix<f64>> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("covariance_quad requires t > 0, got {t}")));
    }
    if n < 4 {
        return Err(Error::Domain(format!("need at least 4 subdivisions, got {n}")));
    }
    let m = sys.dim();
    let (nodes, weights) = gauss_legendre(8);
    let h = t / n as f64;
    let mut acc = DMatrix::zeros(m, m);
    for panel in 0..n {
        let left = panel as f64 * h;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            let s = left + 0.5 * h * (x + 1.0);
            let e = mat_exp(sys.b(), s)?;
            acc += &e * sys.q() * e.transpose() * (0.5 * h * w);
        }
    }
    Ok(symmetrize(&acc))
}

/// Nodes and weights of k-point Gauss-Legendre quadrature on [-1, 1],
/// by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k.div_ceil(2) {
        // Chebyshev-based initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Symmetric PSD square root, clamping eigenvalues in [-1e-12·‖Q‖, 0) to 0.
pub fn sqrt_psd(mat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(mat));
    let lam_max: f64 = eig.eigenvalues.amax();
    let floor = -1e-12 * lam_max.max(1.0);
    let mut roots = eig.eigenvalues.clone();
    for l in roots.iter_mut() {
        if *l < floor {
            return Err(Error::InvalidInput(format!(
                "matrix not PSD: eigenvalue {l:.3e} below clamp threshold"
            )));
        }
        *l = l.max(0.0).sqrt();
    }
    let d = DMatrix::from_diagonal(&roots);
    Ok(symmetrize(&(&eig.eigenvectors * d * eig.eigenvectors.transpose())))
}

/// Rank of the controllability matrix [A, BA, …, B^{m-1}A], A = Q^{1/2}.
///
/// Rank is decided from the SVD with threshold m·σ_max·ε·64; the factor
/// keeps the decision deterministic on the example battery.
pub fn kalman_rank(sys: &SystemPair) -> Result<usize> {
    let m = sys.dim();
    let a = sqrt_psd(sys.q())?;
    let mut ctrb = DMatrix::zeros(m, m * m);
    let mut block = a;
    for k in 0..m {
        ctrb.view_mut((0, k * m), (m, m)).copy_from(&block);
        if k + 1 < m {
            block = sys.b() * block;
        }
    }
    let svd = ctrb.svd(false, false);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Ok(0);
    }
    let eps_rank = m as f64 * sigma_max * f64::EPSILON * 64.0;
    Ok(svd.singular_values.iter().filter(|&&s| s > eps_rank).count())
}

/// Decides hypoellipticity by both the spectral criterion
/// λ_min(Q(t_probe)) > tol·‖Q(t_probe)‖ and the Kalman rank condition;
/// the two must agree or the tolerances are misconfigured.
pub fn hypoelliptic(sys: &SystemPair, t_probe: f64, tol: f64) -> Result<HypoReport> {
    if !(t_probe > 0.0) {
        return Err(Error::Domain(format!("t_probe must be positive, got {t_probe}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol must be positive, got {tol}")));
    }
    let cov = covariance(sys, t_probe)?;
    let lam_min = cov.lambda_min();
    let scale = cov.eigvals.amax().max(1e-300);
    let spectral = lam_min > tol * scale;
    let rank = kalman_rank(sys)?;
    let by_rank = rank == sys.dim();
    if spectral != by_rank {
        return Err(Error::Inconsistency(format!(
            "spectral criterion ({spectral}, lambda_min = {lam_min:.3e}) disagrees \
             with Kalman rank {rank}/{} at t = {t_probe}",
            sys.dim()
        )));
    }
    Ok(HypoReport {
        kalman_rank: rank,
        lambda_min_at_t: lam_min,
        hypoelliptic: spectral,
        t_probe,
    })
}

/// The invertible map K(t) = 4π t⁻¹ Q(t) e^{-tB} from the uncertainty
/// principle. det K(t) = (4π)^m t^{-m} e^{-t·tr B} det Q(t) > 0.
pub fn k_matrix(sys: &SystemPair, t: f64) -> Result<DMatrix<f64>> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("k_matrix requires t > 0, got {t}")));
    }
    let report = hypoelliptic(sys, t, HYPO_TOL)?;
    if !report.hypoelliptic {
        return Err(Error::Singular(
            "K(t) is only defined for hypoelliptic systems".into(),
        ));
    }
    let cov = covariance(sys, t)?;
    let k = cov.value() * mat_exp(sys.b(), -t)? * (4.0 * PI / t);
    let det = k.determinant();
    if det <= 0.0 {
        return Err(Error::InvariantViolation(format!(
            "det K(t) = {det:.3e} must be positive"
        )));
    }
    Ok(k)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(mat: &DMatrix<f64>) -> f64 {
    mat.clone().svd(false, false).singular_values.max()
}

/// Smallest eigenvalue of a (symmetrized) real matrix.
pub fn sym_lambda_min(mat: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(mat)).eigenvalues.min()
}
