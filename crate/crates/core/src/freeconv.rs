//! Operator-valued subordination for `P(s, d)` with `s` semicircular of
//! variance σ² and `d` free from `s` with distribution ν.
//!
//! With `β = z e₁₁ − γ₀` the subordination function solves
//!
//! ```text
//! ω = β − σ² γ₁ G(ω) γ₁,    G(ω) = ∫ (ω − t γ₂)⁻¹ dν(t),
//! ```
//!
//! and `G(ω)₁₁` is the Cauchy transform of `P(s, d)` at `z`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, I, ONE};
use crate::linearize::Linearization;

/// Finite atomic probability measure on ℝ with strictly increasing atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
}

impl SpectralMeasure {
    /// `atoms` are `(location, weight)` pairs; weights must be positive and
    /// sum to 1 within 1e-12, locations strictly increasing.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("spectral measure needs at least one atom".into()));
        }
        let mut total = 0.0;
        for (k, &(t, w)) in atoms.iter().enumerate() {
            if !t.is_finite() || !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidInput(alloc::format!(
                    "atom {} = ({}, {}) needs a finite location and a positive weight",
                    k,
                    t,
                    w
                )));
            }
            if k > 0 && atoms[k - 1].0 >= t {
                return Err(Error::InvalidInput("atom locations must be strictly increasing".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(alloc::format!("atom weights sum to {}, not 1", total)));
        }
        Ok(Self { atoms })
    }

    /// Sorts the atoms and merges repeated locations before validating.
    pub fn from_unsorted(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (t, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == t => last.1 += w,
                _ => merged.push((t, w)),
            }
        }
        Self::new(merged)
    }

    pub fn dirac(c: f64) -> Self {
        Self { atoms: alloc::vec![(c, 1.0)] }
    }

    /// Empirical measure `(1/N) Σ δ_{values[k]}`.
    pub fn empirical(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len() as f64;
        let mut m = Self::from_unsorted(values.iter().map(|&v| (v, w)).collect())?;
        // renormalize away the rounding of repeated additions of 1/N
        let total: f64 = m.atoms.iter().map(|a| a.1).sum();
        m.atoms.iter_mut().for_each(|a| a.1 /= total);
        Ok(m)
    }

    /// Uniform law on `[a, b]` discretized to `n` equal-weight midpoint atoms.
    pub fn uniform_discretized(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 || !(b > a) {
            return Err(Error::InvalidInput("uniform discretization needs a < b and n >= 1".into()));
        }
        let h = (b - a) / n as f64;
        Self::new((0..n).map(|k| (a + (k as f64 + 0.5) * h, 1.0 / n as f64)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, a| m.max(a.0.abs()))
    }

    /// Smallest atom location `t` with cumulative weight `F(t) ≥ u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut cum = 0.0;
        for &(t, w) in &self.atoms {
            cum += w;
            if u <= cum + 1e-12 {
                return t;
            }
        }
        self.atoms[self.atoms.len() - 1].0
    }
}

/// Limiting second- and fourth-moment parameters of the Wigner entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// `lim N E|W_ij|²`
    pub sigma2: f64,
    /// `lim N E[W_ij²]`
    pub theta: f64,
    /// `lim N E[W_ii²]`
    pub sigma_tilde2: f64,
    /// `lim N² (E|W_ij|⁴ − 2σ_N⁴ − |θ_N|²)`
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(sigma2: f64, theta: f64, sigma_tilde2: f64, kappa: f64) -> Result<Self> {
        let p = Self {
            sigma2,
            theta,
            sigma_tilde2,
            kappa,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            sigma2,
            theta,
            sigma_tilde2,
            kappa,
        } = *self;
        if !(sigma2 > 0.0 && sigma2.is_finite()) || !(sigma_tilde2 > 0.0 && sigma_tilde2.is_finite()) {
            return Err(Error::InvalidInput("sigma2 and sigma_tilde2 must be positive and finite".into()));
        }
        if !theta.is_finite() || theta.abs() > sigma2 {
            return Err(Error::InvalidInput("|theta| must not exceed sigma2".into()));
        }
        if !kappa.is_finite() || kappa < -2.0 * sigma2 * sigma2 - theta * theta {
            return Err(Error::InvalidInput(
                "kappa must be at least -2 sigma2^2 - theta^2 (nonnegative fourth moment)".into(),
            ));
        }
        Ok(())
    }

    /// Complex Gaussian entries (GUE-type).
    pub fn gue(sigma2: f64) -> Self {
        Self {
            sigma2,
            theta: 0.0,
            sigma_tilde2: sigma2,
            kappa: 0.0,
        }
    }

    /// Real Gaussian entries (GOE-type).
    pub fn goe(sigma2: f64) -> Self {
        Self {
            sigma2,
            theta: sigma2,
            sigma_tilde2: 2.0 * sigma2,
            kappa: 0.0,
        }
    }
}

/// Numerical knobs of the fixed-point solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Frobenius-norm residual target at every continuation stage.
    pub tol: f64,
    /// Iteration budget per continuation stage.
    pub max_iter: usize,
    /// First continuation shift η.
    pub eta_start: f64,
    /// Ratio of successive shifts.
    pub eta_ratio: f64,
    /// The ladder jumps to η = 0 once the next shift would fall below this.
    pub eta_floor: f64,
    /// Smallest damping factor.
    pub alpha_floor: f64,
    /// Try a Newton step before every damped step.
    pub newton: bool,
    /// Extra Newton steps after convergence at η = 0.
    pub polish_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            eta_start: 1.0,
            eta_ratio: 0.5,
            eta_floor: 1e-6,
            alpha_floor: 1.0 / 64.0,
            newton: true,
            polish_steps: 3,
        }
    }
}

/// Diagnostics of one continuation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub eta: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Smallest eigenvalue of `Im ω − Im β_η`; recorded for η > 0.
    pub min_imag_gap: Option<f64>,
}

/// Solution of the subordination fixed point at one spectral parameter.
#[derive(Debug, Clone)]
pub struct SubordinationPoint {
    pub z: Complex64,
    pub beta: CMat,
    pub omega: CMat,
    /// `∫ (ω − t γ₂)⁻¹ dν(t)`
    pub g: CMat,
    pub residual: f64,
    pub iterations: usize,
    pub stages: Vec<StageRecord>,
}

impl SubordinationPoint {
    /// Cauchy transform of `P(s, d)` at `z`.
    pub fn cauchy(&self) -> Complex64 {
        self.g[(0, 0)]
    }
}

/// Fixed-point problem data: `Φ(ω) = target − σ² γ₁ G(ω) γ₁`.
struct FixedPoint<'a> {
    lin: &'a Linearization,
    sigma2: f64,
    nu: &'a SpectralMeasure,
}

impl FixedPoint<'_> {
    fn resolvents(&self, omega: &CMat) -> Option<Vec<CMat>> {
        let g2 = self.lin.gamma2();
        self.nu
            .atoms()
            .iter()
            .map(|&(t, _)| linalg::inverse(&(omega - g2 * Complex64::new(t, 0.0))))
            .collect()
    }

    fn g_of(&self, resolvents: &[CMat]) -> CMat {
        let m = self.lin.dim();
        let mut g = CMat::zeros(m, m);
        for (r, &(_, w)) in resolvents.iter().zip(self.nu.atoms()) {
            g += r * Complex64::new(w, 0.0);
        }
        g
    }

    /// Returns `(Φ(ω), G(ω))`.
    fn map(&self, omega: &CMat, target: &CMat) -> Option<(CMat, CMat)> {
        let rs = self.resolvents(omega)?;
        let g = self.g_of(&rs);
        let g1 = self.lin.gamma1();
        let phi = target - g1 * &g * g1 * Complex64::new(self.sigma2, 0.0);
        Some((phi, g))
    }

    fn residual(&self, omega: &CMat, target: &CMat) -> Option<f64> {
        let (phi, _) = self.map(omega, target)?;
        Some((omega - phi).norm())
    }

    /// `V = σ² Σ_t w_t (R_t γ₁)ᵀ ⊗ (γ₁ R_t)`, the linearization of `c ↦
    /// σ² γ₁ (∫ R c R dν) γ₁` in column-major vectorized form.
    fn derivative_operator(&self, resolvents: &[CMat]) -> CMat {
        let m = self.lin.dim();
        let g1 = self.lin.gamma1();
        let mut v = CMat::zeros(m * m, m * m);
        for (r, &(_, w)) in resolvents.iter().zip(self.nu.atoms()) {
            let left = g1 * r;
            let right = (r * g1).transpose();
            v += linalg::kron(&right, &left) * Complex64::new(self.sigma2 * w, 0.0);
        }
        v
    }

    fn newton_step(&self, omega: &CMat, target: &CMat) -> Option<CMat> {
        let m = self.lin.dim();
        let rs = self.resolvents(omega)?;
        let g = self.g_of(&rs);
        let g1 = self.lin.gamma1();
        let f = omega - target + g1 * &g * g1 * Complex64::new(self.sigma2, 0.0);
        let jac = CMat::identity(m * m, m * m) - self.derivative_operator(&rs);
        let delta = linalg::solve(&jac, &(-linalg::vectorize(&f)))?;
        Some(omega + linalg::unvectorize(&delta, m))
    }
}

fn min_imag_gap(omega: &CMat, target: &CMat) -> f64 {
    let gap = linalg::imag_part(&(omega - target));
    linalg::hermitian_eigenvalues(&gap).first().copied().unwrap_or(0.0)
}

struct StageOutcome {
    omega: CMat,
    residual: f64,
    iterations: usize,
}

fn solve_stage(fp: &FixedPoint<'_>, start: CMat, target: &CMat, guard_imag: bool, cfg: &SolverConfig) -> Result<StageOutcome> {
    let mut omega = start;
    let mut res = fp.residual(&omega, target).ok_or(Error::Singular("subordination resolvent"))?;
    let mut alpha = 1.0f64;
    let mut iterations = 0;
    while res > cfg.tol {
        if iterations >= cfg.max_iter {
            return Err(Error::NoConvergence {
                residual: res,
                iterations,
            });
        }
        iterations += 1;

        if cfg.newton {
            if let Some(cand) = fp.newton_step(&omega, target) {
                let admissible = !guard_imag || min_imag_gap(&cand, target) >= -1e-10;
                if admissible {
                    if let Some(r) = fp.residual(&cand, target) {
                        if r < res {
                            omega = cand;
                            res = r;
                            continue;
                        }
                    }
                }
            }
        }

        let step = fp.map(&omega, target).map(|(phi, _)| {
            let a = Complex64::new(alpha, 0.0);
            &omega * (ONE - a) + phi * a
        });
        let evaluated = step.and_then(|cand| fp.residual(&cand, target).map(|r| (cand, r)));
        match evaluated {
            Some((cand, r)) if r <= res || alpha <= cfg.alpha_floor => {
                omega = cand;
                res = r;
            }
            Some(_) => alpha = (alpha * 0.5).max(cfg.alpha_floor),
            None if alpha > cfg.alpha_floor => alpha = (alpha * 0.5).max(cfg.alpha_floor),
            None => return Err(Error::Singular("subordination resolvent")),
        }
    }
    Ok(StageOutcome {
        omega,
        residual: res,
        iterations,
    })
}

/// Solves `ω = β − σ² γ₁ G(ω) γ₁` at `β = z e₁₁ − γ₀`.
///
/// For `Im z > 0` the shift `β + iηI` is walked down a geometric ladder to
/// `η = 0`, warm-starting each stage from the previous one. For `Im z < 0`
/// the solution is the conjugate transpose of the one at `z̄`.
pub fn solve_omega(
    lin: &Linearization,
    sigma2: f64,
    nu: &SpectralMeasure,
    z: Complex64,
    cfg: &SolverConfig,
) -> Result<SubordinationPoint> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        return Err(Error::InvalidInput("solve_omega needs a finite z with Im z != 0".into()));
    }
    if !(cfg.tol > 0.0) || !(sigma2 >= 0.0) {
        return Err(Error::InvalidInput("solve_omega needs tol > 0 and sigma2 >= 0".into()));
    }
    if z.im < 0.0 {
        let up = solve_omega(lin, sigma2, nu, z.conj(), cfg)?;
        return Ok(SubordinationPoint {
            z,
            beta: lin.beta(z),
            omega: up.omega.adjoint(),
            g: up.g.adjoint(),
            residual: up.residual,
            iterations: up.iterations,
            stages: up.stages,
        });
    }

    let fp = FixedPoint { lin, sigma2, nu };
    let beta = lin.beta(z);
    let m = lin.dim();

    if sigma2 == 0.0 {
        let (_, g) = fp.map(&beta, &beta).ok_or(Error::Singular("subordination resolvent"))?;
        return Ok(SubordinationPoint {
            z,
            beta: beta.clone(),
            omega: beta,
            g,
            residual: 0.0,
            iterations: 1,
            stages: alloc::vec![StageRecord {
                eta: 0.0,
                iterations: 1,
                residual: 0.0,
                min_imag_gap: None,
            }],
        });
    }

    let mut ladder = Vec::new();
    let mut eta = cfg.eta_start;
    while eta >= cfg.eta_floor && eta > 0.0 {
        ladder.push(eta);
        eta *= cfg.eta_ratio;
    }
    ladder.push(0.0);

    let shifted = |eta: f64| &beta + CMat::identity(m, m) * (I * eta);
    let mut omega = shifted(ladder[0]);
    let mut stages = Vec::with_capacity(ladder.len());
    let mut total = 0;
    for &eta in &ladder {
        let target = shifted(eta);
        let out = solve_stage(&fp, omega, &target, eta > 0.0, cfg).map_err(|e| match e {
            Error::NoConvergence { residual, iterations } => Error::NoConvergence {
                residual,
                iterations: total + iterations,
            },
            other => other,
        })?;
        total += out.iterations;
        omega = out.omega;
        stages.push(StageRecord {
            eta,
            iterations: out.iterations,
            residual: out.residual,
            min_imag_gap: (eta > 0.0).then(|| min_imag_gap(&omega, &target)),
        });
    }

    let mut residual = fp.residual(&omega, &beta).ok_or(Error::Singular("subordination resolvent"))?;
    for _ in 0..cfg.polish_steps {
        match fp.newton_step(&omega, &beta) {
            Some(cand) => match fp.residual(&cand, &beta) {
                Some(r) if r < residual => {
                    omega = cand;
                    residual = r;
                    total += 1;
                }
                _ => break,
            },
            None => break,
        }
    }
    let (_, g) = fp.map(&omega, &beta).ok_or(Error::Singular("subordination resolvent"))?;
    Ok(SubordinationPoint {
        z,
        beta,
        omega,
        g,
        residual,
        iterations: total,
        stages,
    })
}

/// `g(z) = τ((z − P(s,d))⁻¹)` with the default solver settings.
pub fn cauchy_transform(lin: &Linearization, sigma2: f64, nu: &SpectralMeasure, z: Complex64) -> Result<Complex64> {
    Ok(solve_omega(lin, sigma2, nu, z, &SolverConfig::default())?.cauchy())
}

/// Stieltjes inversion `−Im g(x + iε)/π` on a grid.
pub fn density(lin: &Linearization, sigma2: f64, nu: &SpectralMeasure, xs: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("density needs epsilon > 0".into()));
    }
    let cfg = SolverConfig::default();
    xs.iter()
        .map(|&x| {
            let g = solve_omega(lin, sigma2, nu, Complex64::new(x, epsilon), &cfg)?.cauchy();
            Ok(-g.im / core::f64::consts::PI)
        })
        .collect()
}

/// `dω/dz = ω′(β)(e₁₁)`, from `(id − V) x = vec(e₁₁)` at a solved point.
pub fn omega_derivative_at(lin: &Linearization, sigma2: f64, nu: &SpectralMeasure, point: &SubordinationPoint) -> Result<CMat> {
    let m = lin.dim();
    let fp = FixedPoint { lin, sigma2, nu };
    let rs = fp.resolvents(&point.omega).ok_or(Error::Singular("subordination resolvent"))?;
    let sys = CMat::identity(m * m, m * m) - fp.derivative_operator(&rs);
    let rhs = linalg::vectorize(&linalg::unit(m, 0, 0));
    let x = linalg::solve(&sys, &rhs).ok_or(Error::DerivativeSingular)?;
    Ok(linalg::unvectorize(&x, m))
}

/// [`omega_derivative_at`] after solving at `z` with default settings.
pub fn omega_derivative(lin: &Linearization, sigma2: f64, nu: &SpectralMeasure, z: Complex64) -> Result<CMat> {
    let point = solve_omega(lin, sigma2, nu, z, &SolverConfig::default())?;
    omega_derivative_at(lin, sigma2, nu, &point)
}
