//! Transfer operators and the covariance kernel of the centred resolvent
//! traces `ξ_N(z) = Tr (z − P(W,D))⁻¹ − E Tr (z − P(W,D))⁻¹`.
//!
//! With `A_t = (ω(β₁) − tγ₂)⁻¹ γ₁` and `B_t = γ₁ (ω(β₂) − tγ₂)⁻¹` the
//! transfer operator on `M_m ⊗ M_m` is
//!
//! ```text
//! T(x) = ∫ (A_t ⊗ 1) · x · (1 ⊗ B_t) dν(t),
//! ```
//!
//! and the log-kernel is
//!
//! ```text
//! γ(z₁,z₂) = −(Tr⊗Tr) log(1 − σ²T)(1⊗1) − (Tr⊗Tr) log(1 − θT)(1⊗1)
//!            + (σ̃² − σ² − θ)(Tr⊗Tr) T(1⊗1) + (κ/2)(Tr⊗Tr) T²(1⊗1),
//! ```
//!
//! whose mixed derivative `Γ = ∂²γ/∂z₁∂z₂` is the limiting covariance
//! `E[ξ(z₁) ξ(z₂)]`.
//!
//! Every trace `(Tr⊗Tr) Tᵏ(1⊗1)` equals `Tr Kᵏ` for the `m² × m²` matrix
//! `K = ∫ B_tᵀ ⊗ A_t dν(t)`, and `σ²T` is similar to `σ²K ⊗ 1`; the kernel
//! is therefore evaluated on `K`, while the full `m⁴ × m⁴` matrix of `T` is
//! available for diagnostics through [`KernelOperator::t_mat`] and
//! [`log_term`].

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freeconv::{solve_omega, ModelParams, SolverConfig, SpectralMeasure, SubordinationPoint};
use crate::linalg::{self, CMat, CVec, ONE, ZERO};
use crate::linearize::Linearization;

/// Cluster tolerance (relative) when diagonalizing the transfer matrix.
const CLUSTER_TOL: f64 = 1e-8;
/// Eigenvector bases worse conditioned than this fall back to the series.
const MAX_CONDITION: f64 = 1e8;
/// Term budget of the logarithm series.
const SERIES_BUDGET: usize = 1_000_000;

/// Matrices of the transfer operator at a pair of spectral parameters.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    /// `m⁴ × m⁴` matrix of `T` acting on column-major `vec(x)`,
    /// `x ∈ M_m ⊗ M_m = M_{m²}`.
    pub t_mat: CMat,
    /// `m² × m²` matrix of `u(b) = σ² ∫ A_t b B_t dν(t)`.
    pub u_mat: CMat,
    /// `K = ∫ B_tᵀ ⊗ A_t dν(t)`, so that `u_mat = σ² K`.
    pub transfer: CMat,
    pub sigma2: f64,
}

fn sandwich_factors(lin: &Linearization, nu: &SpectralMeasure, omega1: &CMat, omega2: &CMat) -> Result<Vec<(CMat, CMat, f64)>> {
    let g1 = lin.gamma1();
    let g2 = lin.gamma2();
    nu.atoms()
        .iter()
        .map(|&(t, w)| {
            let shift = g2 * Complex64::new(t, 0.0);
            let r1 = linalg::inverse(&(omega1 - &shift)).ok_or(Error::Singular("transfer operator resolvent"))?;
            let r2 = linalg::inverse(&(omega2 - &shift)).ok_or(Error::Singular("transfer operator resolvent"))?;
            Ok((r1 * g1, g1 * r2, w))
        })
        .collect()
}

/// `K = ∫ B_tᵀ ⊗ A_t dν(t)` from two subordination values.
pub fn transfer_matrix(lin: &Linearization, nu: &SpectralMeasure, omega1: &CMat, omega2: &CMat) -> Result<CMat> {
    let m = lin.dim();
    let mut k = CMat::zeros(m * m, m * m);
    for (a, b, w) in sandwich_factors(lin, nu, omega1, omega2)? {
        k += linalg::kron(&b.transpose(), &a) * Complex64::new(w, 0.0);
    }
    Ok(k)
}

impl KernelOperator {
    /// Builds all operator matrices from solved subordination points.
    pub fn from_points(
        lin: &Linearization,
        sigma2: f64,
        nu: &SpectralMeasure,
        p1: &SubordinationPoint,
        p2: &SubordinationPoint,
    ) -> Result<Self> {
        let m = lin.dim();
        let id = linalg::identity(m);
        let mut t_mat = CMat::zeros(m * m * m * m, m * m * m * m);
        let mut transfer = CMat::zeros(m * m, m * m);
        for (a, b, w) in sandwich_factors(lin, nu, &p1.omega, &p2.omega)? {
            let w = Complex64::new(w, 0.0);
            // x ↦ (A ⊗ 1) x (1 ⊗ B)  ⇔  vec ↦ ((1 ⊗ B)ᵀ ⊗ (A ⊗ 1)) vec
            let right = linalg::kron(&id, &b).transpose();
            let left = linalg::kron(&a, &id);
            t_mat += linalg::kron(&right, &left) * w;
            transfer += linalg::kron(&b.transpose(), &a) * w;
        }
        Ok(Self {
            t_mat,
            u_mat: &transfer * Complex64::new(sigma2, 0.0),
            transfer,
            sigma2,
        })
    }

    /// `σ² T` as a matrix.
    pub fn sigma2_t(&self) -> CMat {
        &self.t_mat * Complex64::new(self.sigma2, 0.0)
    }
}

/// Solves the fixed point at `z1` and `z2` and builds the transfer operator.
pub fn build_operators(
    lin: &Linearization,
    sigma2: f64,
    nu: &SpectralMeasure,
    z1: Complex64,
    z2: Complex64,
) -> Result<KernelOperator> {
    let cfg = SolverConfig::default();
    let p1 = solve_omega(lin, sigma2, nu, z1, &cfg)?;
    let p2 = solve_omega(lin, sigma2, nu, z2, &cfg)?;
    KernelOperator::from_points(lin, sigma2, nu, &p1, &p2)
}

/// Spectral radius `ρ(σ²T)`, computed on the reduced matrix `u`.
pub fn spectral_radius(op: &KernelOperator) -> Result<f64> {
    linalg::spectral_radius(&op.u_mat)
}

/// Relative cluster tolerance for [`transfer_spectra`].
pub const SPECTRUM_CLUSTER_TOL: f64 = 1e-6;

/// Cluster-resolved eigenvalues (see [`linalg::eigenvalue_clusters`]) of
/// `σ²T` and of `u`, as plain point sets.
pub fn transfer_spectra(op: &KernelOperator) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let points = |a: &CMat| -> Result<Vec<Complex64>> {
        Ok(linalg::eigenvalue_clusters(a, SPECTRUM_CLUSTER_TOL)?
            .into_iter()
            .map(|(mu, _)| mu)
            .collect())
    };
    Ok((points(&op.sigma2_t())?, points(&op.u_mat)?))
}

/// Trace functional `x ↦ (Tr⊗Tr)(x)` on column-major `vec(x)`, `x ∈ M_d`.
fn vec_trace(v: &CVec, d: usize) -> Complex64 {
    (0..d).map(|i| v[i * d + i]).sum()
}

fn side(n: usize) -> Result<usize> {
    let d = libm::round(libm::sqrt(n as f64)) as usize;
    if d * d != n {
        return Err(Error::DimensionMismatch(alloc::format!(
            "transfer matrix of size {} is not the square of an integer",
            n
        )));
    }
    Ok(d)
}

/// `(Tr⊗Tr) log(1 − cT)(1⊗1)` for the matrix `t` of an operator on
/// `M_d`, `d² = t.nrows()`.
///
/// Requires `ρ(cT) < 1`. The value is computed from a clustered
/// eigendecomposition when one is available and well conditioned, and from
/// the power series `−Σ_k (Tr⊗Tr) (cT)ᵏ(1⊗1) / k` otherwise.
pub fn log_term(c: Complex64, t: &CMat) -> Result<Complex64> {
    if c == ZERO {
        return Ok(ZERO);
    }
    let ct = t * c;
    let rho = linalg::spectral_radius(&ct)?;
    if !(rho < 1.0) {
        return Err(Error::RadiusTooLarge { radius: rho });
    }
    match log_term_eigen(c, t)? {
        Some(v) => Ok(v),
        None => log_term_series(c, t, rho),
    }
}

/// Eigen route of [`log_term`]; `None` when `t` is not reliably
/// diagonalizable.
pub fn log_term_eigen(c: Complex64, t: &CMat) -> Result<Option<Complex64>> {
    let d = side(t.nrows())?;
    let Some(ce) = linalg::clustered_eigen(t, CLUSTER_TOL, MAX_CONDITION)? else {
        return Ok(None);
    };
    let s = linalg::vectorize(&linalg::identity(d));
    let coords = &ce.inverse_vectors * &s;
    let mut total = linalg::CompensatedSum::default();
    for (range, block) in &ce.blocks {
        let k = range.len();
        let mu = linalg::trace(block) / k as f64;
        let one_minus = ONE - c * mu;
        if one_minus.norm() == 0.0 {
            return Err(Error::RadiusTooLarge { radius: (c * mu).norm() });
        }
        // f(B) ≈ f(μ)·1 + f′(μ)(B − μ), exact up to O(‖B − μ‖²)
        let f = one_minus.ln();
        let df = -c / one_minus;
        let fb = CMat::identity(k, k) * f + (block - CMat::identity(k, k) * mu) * df;
        let w = coords.rows(range.start, k).into_owned();
        let image = fb * w;
        for (j, col) in range.clone().enumerate() {
            let left = vec_trace(&ce.vectors.column(col).into_owned(), d);
            total.add(left * image[j]);
        }
    }
    Ok(Some(total.value()))
}

/// Series route of [`log_term`]. `rho` is the spectral radius of `c·t`.
/// Summation stops once the current term, scaled by the geometric tail
/// factor `1/(1 − ρ)`, is below `1e-14‖vec(1⊗1)‖`.
pub fn log_term_series(c: Complex64, t: &CMat, rho: f64) -> Result<Complex64> {
    if !(rho < 1.0) {
        return Err(Error::RadiusTooLarge { radius: rho });
    }
    let d = side(t.nrows())?;
    let s = linalg::vectorize(&linalg::identity(d));
    let threshold = 1e-14 * s.norm() * (1.0 - rho);
    let mut y = s;
    let mut total = linalg::CompensatedSum::default();
    for k in 1..=SERIES_BUDGET {
        y = t * &y * c;
        let kf = k as f64;
        total.add(-vec_trace(&y, d) / kf);
        if y.norm() / kf < threshold {
            return Ok(total.value());
        }
    }
    Err(Error::SeriesBudget { terms: SERIES_BUDGET })
}

fn check_radius(lambdas: &[Complex64], c: f64) -> Result<f64> {
    let rho = lambdas.iter().fold(0.0f64, |m, l| m.max(l.norm())) * c.abs();
    if !(rho < 1.0) {
        return Err(Error::RadiusTooLarge { radius: rho });
    }
    Ok(rho)
}

/// `γ` and `ρ(σ²T)` from the transfer matrix `K`.
fn gamma_from_transfer(params: &ModelParams, k: &CMat) -> Result<(Complex64, f64)> {
    let lambdas = linalg::eigenvalues(k)?;
    let rho = check_radius(&lambdas, params.sigma2)?;
    check_radius(&lambdas, params.theta)?;
    let s2 = Complex64::new(params.sigma2, 0.0);
    let th = Complex64::new(params.theta, 0.0);
    let mut total = linalg::CompensatedSum::default();
    for &l in &lambdas {
        total.add(-(ONE - s2 * l).ln());
        if params.theta != 0.0 {
            total.add(-(ONE - th * l).ln());
        }
    }
    let tr1 = linalg::trace(k);
    let tr2 = linalg::trace(&(k * k));
    total.add(tr1 * (params.sigma_tilde2 - params.sigma2 - params.theta));
    total.add(tr2 * (0.5 * params.kappa));
    Ok((total.value(), rho))
}

/// `γ(z₁, z₂)` from solved subordination points; also returns `ρ(σ²T)`.
pub fn gamma_from_points(
    lin: &Linearization,
    params: &ModelParams,
    nu: &SpectralMeasure,
    p1: &SubordinationPoint,
    p2: &SubordinationPoint,
) -> Result<(Complex64, f64)> {
    let k = transfer_matrix(lin, nu, &p1.omega, &p2.omega)?;
    gamma_from_transfer(params, &k)
}

/// The log-kernel `γ(z₁, z₂)`.
pub fn gamma_value(
    lin: &Linearization,
    params: &ModelParams,
    nu: &SpectralMeasure,
    z1: Complex64,
    z2: Complex64,
) -> Result<Complex64> {
    params.validate()?;
    let cfg = SolverConfig::default();
    let p1 = solve_omega(lin, params.sigma2, nu, z1, &cfg)?;
    let p2 = solve_omega(lin, params.sigma2, nu, z2, &cfg)?;
    Ok(gamma_from_points(lin, params, nu, &p1, &p2)?.0)
}

/// Kernel values at one pair of spectral parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub z1: Complex64,
    pub z2: Complex64,
    /// `γ(z₁, z₂)`
    pub gamma: Complex64,
    /// `Γ(z₁, z₂) = ∂²γ/∂z₁∂z₂`
    pub covariance: Complex64,
    /// `ρ(σ²T)` at `(z₁, z₂)`
    pub rho_sigma2t: f64,
    /// `|Γ_h − Γ_{h/2}|` between the two finite-difference step sizes.
    pub fd_discrepancy: f64,
}

/// Fourth-order central-difference stencil offsets and weights (times 12h).
const STENCIL: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// Relative tolerance on the disagreement of the two step sizes.
const FD_TOLERANCE: f64 = 1e-6;

/// Evaluates `γ` and `Γ = ∂²γ/∂z₁∂z₂` at `(z₁, z₂)`.
///
/// `Γ` uses a tensor-product fourth-order central stencil with step
/// `h = 1e-3·min(1, |Im z₁|, |Im z₂|)` and again with `h/2`; the returned
/// value is the Richardson combination `(16Γ_{h/2} − Γ_h)/15`. When the two
/// estimates disagree by more than `1e-6(1 + |Γ|)` the derivative is
/// reported as unreliable.
pub fn covariance_value(
    lin: &Linearization,
    params: &ModelParams,
    nu: &SpectralMeasure,
    z1: Complex64,
    z2: Complex64,
) -> Result<KernelValue> {
    params.validate()?;
    if z1.im == 0.0 || z2.im == 0.0 {
        return Err(Error::InvalidInput("kernel needs Im z1 != 0 and Im z2 != 0".into()));
    }
    let cfg = SolverConfig::default();
    let solve = |z: Complex64| solve_omega(lin, params.sigma2, nu, z, &cfg);
    let centre1 = solve(z1)?;
    let centre2 = solve(z2)?;
    let (gamma, rho) = gamma_from_points(lin, params, nu, &centre1, &centre2)?;

    let h = 1e-3 * 1f64.min(z1.im.abs()).min(z2.im.abs());
    let estimate = |step: f64| -> Result<Complex64> {
        let row: Vec<SubordinationPoint> = STENCIL
            .iter()
            .map(|&(o, _)| solve(z1 + o * step))
            .collect::<Result<_>>()?;
        let col: Vec<SubordinationPoint> = STENCIL
            .iter()
            .map(|&(o, _)| solve(z2 + o * step))
            .collect::<Result<_>>()?;
        let mut acc = linalg::CompensatedSum::default();
        for (p1, &(_, wa)) in row.iter().zip(&STENCIL) {
            for (p2, &(_, wb)) in col.iter().zip(&STENCIL) {
                acc.add(gamma_from_points(lin, params, nu, p1, p2)?.0 * (wa * wb));
            }
        }
        Ok(acc.value() / (144.0 * step * step))
    };
    let coarse = estimate(h)?;
    let fine = estimate(0.5 * h)?;
    let covariance = (fine * 16.0 - coarse) / 15.0;
    let discrepancy = (coarse - fine).norm();
    if !(discrepancy <= FD_TOLERANCE * (1.0 + covariance.norm())) {
        return Err(Error::DerivativeUnreliable {
            coarse,
            fine,
            discrepancy,
        });
    }
    Ok(KernelValue {
        z1,
        z2,
        gamma,
        covariance,
        rho_sigma2t: rho,
        fd_discrepancy: discrepancy,
    })
}

/// All pairs `(z_i, z_j)` and `(z_i, z̄_j)` with `i ≤ j`, in that order per
/// pair — the layout expected by the covariance comparison.
pub fn comparison_pairs(zs: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    let mut out = Vec::new();
    for i in 0..zs.len() {
        for j in i..zs.len() {
            out.push((zs[i], zs[j]));
            out.push((zs[i], zs[j].conj()));
        }
    }
    out
}
