//! Monte Carlo sampling of resolvent traces of `P(W_N, D_N)` and comparison
//! of their empirical covariances with the limiting kernel.
//!
//! Every trial draws its Wigner matrix from its own generator, seeded from
//! the master seed and the trial index, so trials can be evaluated in any
//! order (or in parallel) and [`SimResult::from_trials`] reduces them in
//! trial order: results do not depend on how the work was scheduled.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::freeconv::{solve_omega, ModelParams, SolverConfig, SpectralMeasure};
use crate::kernel::KernelValue;
use crate::linalg::{self, CMat, CompensatedSum, ONE, ZERO};
use crate::linearize::Linearization;
use crate::ncpoly::{Letter, NcPolynomial};

/// Entry distributions of the Wigner matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Off-diagonal `(g₁ + i g₂)·σ/√(2N)`, diagonal `N(0, σ̃²/N)`.
    GaussianComplex,
    /// Off-diagonal `N(0, σ²/N)`, diagonal `N(0, σ̃²/N)`.
    GaussianReal,
    /// Off-diagonal `±σ/√N`, diagonal `±σ̃/√N`.
    RademacherReal,
    /// Off-diagonal `0` with probability `1 − p`, otherwise `c·{1, i, −1, −i}`
    /// uniformly, with `p` chosen to realize the requested `κ`; diagonal
    /// `±σ̃/√N`.
    FourPointComplex,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::GaussianComplex,
        Preset::GaussianReal,
        Preset::RademacherReal,
        Preset::FourPointComplex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::GaussianComplex => "gaussian-complex",
            Preset::GaussianReal => "gaussian-real",
            Preset::RademacherReal => "rademacher-real",
            Preset::FourPointComplex => "four-point-complex",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("unknown entry model '{}'", s)))
    }
}

/// A preset together with its variance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryModel {
    pub preset: Preset,
    pub sigma2: f64,
    pub sigma_tilde2: f64,
    /// Fourth cumulant parameter; only free for
    /// [`Preset::FourPointComplex`].
    pub kappa: f64,
}

impl EntryModel {
    /// `sigma_tilde2` defaults to `σ²` for complex presets and `2σ²` for
    /// real ones; `kappa` may only be given for the four-point preset
    /// (default 0), where it must satisfy `κ ≥ −σ⁴`.
    pub fn new(preset: Preset, sigma2: f64, sigma_tilde2: Option<f64>, kappa: Option<f64>) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidInput("sigma2 must be positive".into()));
        }
        let sigma_tilde2 = sigma_tilde2.unwrap_or(match preset {
            Preset::GaussianComplex | Preset::FourPointComplex => sigma2,
            Preset::GaussianReal | Preset::RademacherReal => 2.0 * sigma2,
        });
        if !(sigma_tilde2 > 0.0 && sigma_tilde2.is_finite()) {
            return Err(Error::InvalidInput("sigma_tilde2 must be positive".into()));
        }
        let natural = match preset {
            Preset::GaussianComplex | Preset::GaussianReal => 0.0,
            Preset::RademacherReal => -2.0 * sigma2 * sigma2,
            Preset::FourPointComplex => kappa.unwrap_or(0.0),
        };
        if let Some(k) = kappa {
            if preset != Preset::FourPointComplex && k != natural {
                return Err(Error::InvalidInput(alloc::format!(
                    "entry model {} has kappa = {}; only four-point-complex takes a kappa",
                    preset,
                    natural
                )));
            }
        }
        if preset == Preset::FourPointComplex && !(natural >= -sigma2 * sigma2 && natural.is_finite()) {
            return Err(Error::InvalidInput("four-point-complex needs kappa >= -sigma2^2".into()));
        }
        Ok(Self {
            preset,
            sigma2,
            sigma_tilde2,
            kappa: natural,
        })
    }

    /// The limiting moment parameters realized by this model.
    pub fn params(&self) -> ModelParams {
        let theta = match self.preset {
            Preset::GaussianComplex | Preset::FourPointComplex => 0.0,
            Preset::GaussianReal | Preset::RademacherReal => self.sigma2,
        };
        ModelParams {
            sigma2: self.sigma2,
            theta,
            sigma_tilde2: self.sigma_tilde2,
            kappa: self.kappa,
        }
    }

    /// Probability of a nonzero off-diagonal entry (four-point preset).
    fn four_point_p(&self) -> f64 {
        let s4 = self.sigma2 * self.sigma2;
        s4 / (self.kappa + 2.0 * s4)
    }
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Draws an `n × n` Hermitian Wigner matrix. Entries are drawn row by row:
/// for each `i` the diagonal `W_ii`, then `W_ij` for `j > i`.
pub fn sample_wigner<R: Rng + ?Sized>(n: usize, model: &EntryModel, rng: &mut R) -> CMat {
    let nf = n as f64;
    let off = libm::sqrt(model.sigma2 / nf);
    let diag = libm::sqrt(model.sigma_tilde2 / nf);
    let p = model.four_point_p();
    let four_point_scale = off / libm::sqrt(p);
    let mut w = CMat::zeros(n, n);
    for i in 0..n {
        let d = match model.preset {
            Preset::GaussianComplex | Preset::GaussianReal => diag * rng.sample::<f64, _>(StandardNormal),
            Preset::RademacherReal | Preset::FourPointComplex => diag * sign(rng),
        };
        w[(i, i)] = Complex64::new(d, 0.0);
        for j in (i + 1)..n {
            let v = match model.preset {
                Preset::GaussianComplex => {
                    let s = off * core::f64::consts::FRAC_1_SQRT_2;
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(s * re, s * im)
                }
                Preset::GaussianReal => Complex64::new(off * rng.sample::<f64, _>(StandardNormal), 0.0),
                Preset::RademacherReal => Complex64::new(off * sign(rng), 0.0),
                Preset::FourPointComplex => {
                    if rng.random::<f64>() < p {
                        let phase = [ONE, linalg::I, -ONE, -linalg::I][rng.random_range(0..4usize)];
                        phase * four_point_scale
                    } else {
                        ZERO
                    }
                }
            };
            w[(i, j)] = v;
            w[(j, i)] = v.conj();
        }
    }
    w
}

/// Diagonal entries `D_kk = F_ν⁻¹((k − ½)/N)`, `k = 1..N`.
pub fn build_diag(nu: &SpectralMeasure, n: usize) -> Vec<f64> {
    (1..=n).map(|k| nu.quantile((k as f64 - 0.5) / n as f64)).collect()
}

/// `Tr (z − λ)⁻¹` summed over the given eigenvalues, for each `z`.
pub fn traces_from_eigenvalues(eigenvalues: &[f64], zs: &[Complex64]) -> Vec<Complex64> {
    zs.iter()
        .map(|&z| {
            let mut s = CompensatedSum::default();
            for &l in eigenvalues {
                s.add((z - l).inv());
            }
            s.value()
        })
        .collect()
}

/// `Tr (z − X)⁻¹` for Hermitian `X`.
pub fn resolvent_trace(x: &CMat, z: Complex64) -> Complex64 {
    traces_from_eigenvalues(&linalg::hermitian_eigenvalues(x), &[z])[0]
}

/// `(β ⊗ 1 − γ₁ ⊗ W − γ₂ ⊗ D)⁻¹`, of size `mN`.
pub fn linearized_resolvent(lin: &Linearization, w: &CMat, d: &[f64], beta: &CMat) -> Result<CMat> {
    let n = w.nrows();
    if d.len() != n || w.ncols() != n || beta.nrows() != lin.dim() {
        return Err(Error::DimensionMismatch("linearized resolvent operands".into()));
    }
    let dm = CMat::from_diagonal(&linalg::CVec::from_iterator(n, d.iter().map(|&v| Complex64::new(v, 0.0))));
    let pencil = linalg::kron(beta, &linalg::identity(n))
        - linalg::kron(lin.gamma1(), w)
        - linalg::kron(lin.gamma2(), &dm);
    linalg::inverse(&pencil).ok_or(Error::Singular("linearized resolvent"))
}

/// `(id ⊗ N⁻¹Tr)` of an `mN × mN` matrix with `N × N` blocks.
pub fn partial_trace(r: &CMat, m: usize) -> CMat {
    let n = r.nrows() / m;
    CMat::from_fn(m, m, |a, b| {
        let s: Complex64 = (0..n).map(|k| r[(a * n + k, b * n + k)]).sum();
        s / n as f64
    })
}

/// `Tr (z − P(W, D))⁻¹` read off the (1,1) block of the linearized
/// resolvent at `β = z e₁₁ − γ₀`.
pub fn linearized_resolvent_trace(lin: &Linearization, w: &CMat, d: &[f64], z: Complex64) -> Result<Complex64> {
    let r = linearized_resolvent(lin, w, d, &lin.beta(z))?;
    Ok((0..w.nrows()).map(|k| r[(k, k)]).sum())
}

/// Per-trial generator: ChaCha8 seeded by the master seed, on stream `trial`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Equal-width histogram with out-of-range counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Self {
            lo,
            hi,
            counts: alloc::vec![0; bins],
            below: 0,
            above: 0,
        }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn add(&mut self, x: f64) {
        if x < self.lo {
            self.below += 1;
        } else if x > self.hi {
            self.above += 1;
        } else {
            let k = ((x - self.lo) / self.width()) as usize;
            let last = self.counts.len() - 1;
            self.counts[k.min(last)] += 1;
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.below += other.below;
        self.above += other.above;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.below + self.above
    }

    /// `(left edge, right edge, density)` per bin, normalized by the total
    /// count including out-of-range samples.
    pub fn densities(&self) -> Vec<(f64, f64, f64)> {
        let total = self.total().max(1) as f64;
        let w = self.width();
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let left = self.lo + w * k as f64;
                (left, left + w, c as f64 / (total * w))
            })
            .collect()
    }
}

/// Simulation parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub z_grid: Vec<Complex64>,
    pub model: EntryModel,
    pub nu: SpectralMeasure,
    pub histogram_bins: usize,
    /// Eigenvalue histogram range; derived from a norm bound on `P(W, D)`
    /// when absent.
    pub histogram_range: Option<(f64, f64)>,
}

/// Outputs of one trial.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub traces: Vec<Complex64>,
    pub histogram: Histogram,
}

/// A validated simulation ready to run trials.
#[derive(Debug, Clone)]
pub struct Simulation {
    poly: NcPolynomial,
    config: SimConfig,
    diag: Vec<f64>,
    range: (f64, f64),
}

/// Bound on `‖P(W, D)‖` from `‖W‖ ≲ 2σ` (with a 25% margin) and `‖D‖ ≤
/// max|supp ν|`.
fn norm_bound(p: &NcPolynomial, sigma2: f64, nu: &SpectralMeasure) -> f64 {
    let a = 2.5 * libm::sqrt(sigma2);
    let b = nu.max_abs();
    p.terms()
        .map(|(w, c)| {
            let nx = w.letters().iter().filter(|&&l| l == Letter::X).count() as i32;
            let ny = w.len() as i32 - nx;
            c.norm() * libm::pow(a, nx as f64) * libm::pow(b, ny as f64)
        })
        .sum()
}

impl Simulation {
    pub fn new(p: &NcPolynomial, config: SimConfig) -> Result<Self> {
        if !p.is_selfadjoint() {
            return Err(Error::NotSelfadjoint);
        }
        if config.n == 0 || config.trials < 2 {
            return Err(Error::InvalidInput("simulation needs n >= 1 and at least 2 trials".into()));
        }
        if config.z_grid.is_empty() || config.z_grid.iter().any(|z| !(z.im.abs() >= 0.1)) {
            return Err(Error::InvalidInput("every z must satisfy |Im z| >= 0.1".into()));
        }
        if config.histogram_bins == 0 {
            return Err(Error::InvalidInput("histogram needs at least one bin".into()));
        }
        let range = match config.histogram_range {
            Some((lo, hi)) if lo < hi => (lo, hi),
            Some(_) => return Err(Error::InvalidInput("histogram range must have lo < hi".into())),
            None => {
                let b = norm_bound(p, config.model.sigma2, &config.nu);
                if b > 0.0 {
                    (-b, b)
                } else {
                    (-1.0, 1.0)
                }
            }
        };
        let diag = build_diag(&config.nu, config.n);
        Ok(Self {
            poly: p.clone(),
            config,
            diag,
            range,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn histogram_range(&self) -> (f64, f64) {
        self.range
    }

    /// Eigenvalues of `P(W, D)` for trial `trial`, ascending.
    pub fn trial_eigenvalues(&self, trial: usize) -> Result<Vec<f64>> {
        let mut rng = trial_rng(self.config.seed, trial as u64);
        let w = sample_wigner(self.config.n, &self.config.model, &mut rng);
        let x = self.poly.evaluate_diag(&w, &self.diag)?;
        let herm = (&x + x.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(linalg::hermitian_eigenvalues(&herm))
    }

    pub fn run_trial(&self, trial: usize) -> Result<TrialOutput> {
        let evals = self.trial_eigenvalues(trial)?;
        let mut histogram = Histogram::new(self.range.0, self.range.1, self.config.histogram_bins);
        evals.iter().for_each(|&l| histogram.add(l));
        Ok(TrialOutput {
            traces: traces_from_eigenvalues(&evals, &self.config.z_grid),
            histogram,
        })
    }

    /// Runs every trial sequentially.
    pub fn run(&self) -> Result<SimResult> {
        let outputs: Vec<TrialOutput> = (0..self.config.trials).map(|t| self.run_trial(t)).collect::<Result<_>>()?;
        SimResult::from_trials(&self.config, outputs)
    }
}

/// Runs a full simulation sequentially.
pub fn run_simulation(p: &NcPolynomial, config: SimConfig) -> Result<SimResult> {
    Simulation::new(p, config)?.run()
}

/// Reduced Monte Carlo output.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub n: usize,
    pub trials: usize,
    pub z_grid: Vec<Complex64>,
    /// Sample mean of `Tr (z − P)⁻¹` at each grid point.
    pub mean_trace: Vec<Complex64>,
    /// Standard error of each mean.
    pub mean_trace_se: Vec<f64>,
    /// Centred samples `ξ_t(z_i)`, indexed `[trial][i]`.
    pub xi: Vec<Vec<Complex64>>,
    /// `C_ij = Σ_t ξ_t(z_i) ξ_t(z_j) / (T − 1)`, row-major.
    pub cov: Vec<Complex64>,
    pub cov_se: Vec<f64>,
    /// `C*_ij = Σ_t ξ_t(z_i) conj ξ_t(z_j) / (T − 1)`, row-major.
    pub cov_conj: Vec<Complex64>,
    pub cov_conj_se: Vec<f64>,
    pub histogram: Histogram,
}

/// Mean of `values` and the standard error of that mean; the complex
/// standard error is `sqrt(se_re² + se_im²)`.
fn mean_and_se(values: &[Complex64]) -> (Complex64, f64) {
    let t = values.len() as f64;
    let mut s = CompensatedSum::default();
    values.iter().for_each(|&v| s.add(v));
    let mean = s.value() / t;
    let mut dev = CompensatedSum::default();
    values.iter().for_each(|&v| dev.add(Complex64::new((v - mean).norm_sqr(), 0.0)));
    let var = dev.value().re / (t - 1.0);
    (mean, libm::sqrt(var / t))
}

impl SimResult {
    /// Reduces trial outputs, in trial order.
    pub fn from_trials(config: &SimConfig, outputs: Vec<TrialOutput>) -> Result<Self> {
        let nz = config.z_grid.len();
        let t = outputs.len();
        if t < 2 || outputs.iter().any(|o| o.traces.len() != nz) {
            return Err(Error::DimensionMismatch("trial outputs do not match the configuration".into()));
        }
        let mut histogram = outputs[0].histogram.clone();
        outputs[1..].iter().for_each(|o| histogram.merge(&o.histogram));

        let mut mean_trace = Vec::with_capacity(nz);
        let mut mean_trace_se = Vec::with_capacity(nz);
        for i in 0..nz {
            let column: Vec<Complex64> = outputs.iter().map(|o| o.traces[i]).collect();
            let (m, se) = mean_and_se(&column);
            mean_trace.push(m);
            mean_trace_se.push(se);
        }
        let xi: Vec<Vec<Complex64>> = outputs
            .iter()
            .map(|o| o.traces.iter().zip(&mean_trace).map(|(&v, &m)| v - m).collect())
            .collect();

        let scale = t as f64 / (t as f64 - 1.0);
        let mut cov = alloc::vec![ZERO; nz * nz];
        let mut cov_se = alloc::vec![0.0; nz * nz];
        let mut cov_conj = alloc::vec![ZERO; nz * nz];
        let mut cov_conj_se = alloc::vec![0.0; nz * nz];
        for i in 0..nz {
            for j in 0..nz {
                let plain: Vec<Complex64> = xi.iter().map(|x| x[i] * x[j]).collect();
                let conj: Vec<Complex64> = xi.iter().map(|x| x[i] * x[j].conj()).collect();
                let (m, se) = mean_and_se(&plain);
                cov[i * nz + j] = m * scale;
                cov_se[i * nz + j] = se * scale;
                let (m, se) = mean_and_se(&conj);
                cov_conj[i * nz + j] = m * scale;
                cov_conj_se[i * nz + j] = se * scale;
            }
        }
        Ok(Self {
            n: config.n,
            trials: t,
            z_grid: config.z_grid.clone(),
            mean_trace,
            mean_trace_se,
            xi,
            cov,
            cov_se,
            cov_conj,
            cov_conj_se,
            histogram,
        })
    }

    /// `ξ_t(z_i)` over all trials.
    pub fn xi_column(&self, i: usize) -> Vec<Complex64> {
        self.xi.iter().map(|x| x[i]).collect()
    }
}

/// Which empirical covariance a comparison row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovKind {
    /// `E[ξ(z_i) ξ(z_j)]` against `Γ(z_i, z_j)`.
    Plain,
    /// `E[ξ(z_i) conj ξ(z_j)]` against `Γ(z_i, z̄_j)`.
    Conjugate,
}

impl CovKind {
    pub fn name(self) -> &'static str {
        match self {
            CovKind::Plain => "CC",
            CovKind::Conjugate => "Cstar",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "CC" => Some(CovKind::Plain),
            "Cstar" => Some(CovKind::Conjugate),
            _ => None,
        }
    }
}

/// One entry of a covariance comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub i: usize,
    pub j: usize,
    pub kind: CovKind,
    /// The kernel arguments `(z_i, z_j)` or `(z_i, z̄_j)`.
    pub z1: Complex64,
    pub z2: Complex64,
    pub empirical: Complex64,
    pub theory: Complex64,
    pub se: f64,
    /// `|empirical − theory| / se`.
    pub z_score: f64,
    pub rel_error: f64,
    pub within: bool,
}

/// Agreement summary of empirical covariances with the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub rows: Vec<CompareRow>,
    /// Standard errors allowed per row.
    pub threshold: f64,
    pub fraction_within: f64,
    /// At least 90% of rows within the threshold.
    pub pass: bool,
}

fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-9 * (1.0 + a.norm())
}

/// Looks up `Γ(a, b)` in `theory`, using `Γ(a, b) = Γ(b, a)` and
/// `Γ(ā, b̄) = conj Γ(a, b)`.
fn lookup(theory: &[KernelValue], a: Complex64, b: Complex64) -> Option<Complex64> {
    theory.iter().find_map(|k| {
        if (close(k.z1, a) && close(k.z2, b)) || (close(k.z1, b) && close(k.z2, a)) {
            Some(k.covariance)
        } else if (close(k.z1, a.conj()) && close(k.z2, b.conj())) || (close(k.z1, b.conj()) && close(k.z2, a.conj())) {
            Some(k.covariance.conj())
        } else {
            None
        }
    })
}

/// Empirical covariances on a grid, row-major `nz × nz`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTable {
    pub z_grid: Vec<Complex64>,
    pub cov: Vec<Complex64>,
    pub cov_se: Vec<f64>,
    pub cov_conj: Vec<Complex64>,
    pub cov_conj_se: Vec<f64>,
}

impl SimResult {
    pub fn covariance_table(&self) -> CovarianceTable {
        CovarianceTable {
            z_grid: self.z_grid.clone(),
            cov: self.cov.clone(),
            cov_se: self.cov_se.clone(),
            cov_conj: self.cov_conj.clone(),
            cov_conj_se: self.cov_conj_se.clone(),
        }
    }
}

/// Compares `C_ij` with `Γ(z_i, z_j)` and `C*_ij` with `Γ(z_i, z̄_j)` for
/// all `i ≤ j`, counting rows within 3 standard errors.
pub fn compare_covariance(sim: &SimResult, theory: &[KernelValue]) -> Result<CovarianceReport> {
    compare_table(&sim.covariance_table(), theory)
}

/// [`compare_covariance`] on a bare covariance table.
pub fn compare_table(sim: &CovarianceTable, theory: &[KernelValue]) -> Result<CovarianceReport> {
    const THRESHOLD: f64 = 3.0;
    let nz = sim.z_grid.len();
    if [sim.cov.len(), sim.cov_se.len(), sim.cov_conj.len(), sim.cov_conj_se.len()]
        .iter()
        .any(|&l| l != nz * nz)
    {
        return Err(Error::GridMismatch("covariance table does not match its z grid".into()));
    }
    let mut rows = Vec::new();
    for i in 0..nz {
        for j in i..nz {
            let (zi, zj) = (sim.z_grid[i], sim.z_grid[j]);
            for (kind, second, emp, se) in [
                (CovKind::Plain, zj, sim.cov[i * nz + j], sim.cov_se[i * nz + j]),
                (CovKind::Conjugate, zj.conj(), sim.cov_conj[i * nz + j], sim.cov_conj_se[i * nz + j]),
            ] {
                let th = lookup(theory, zi, second).ok_or_else(|| {
                    Error::GridMismatch(alloc::format!("no kernel value for ({}, {})", zi, second))
                })?;
                let diff = (emp - th).norm();
                let z_score = if se > 0.0 {
                    diff / se
                } else if diff <= 1e-8 * (1.0 + th.norm()) {
                    0.0
                } else {
                    f64::INFINITY
                };
                rows.push(CompareRow {
                    i,
                    j,
                    kind,
                    z1: zi,
                    z2: second,
                    empirical: emp,
                    theory: th,
                    se,
                    z_score,
                    rel_error: if th.norm() > 0.0 { diff / th.norm() } else { diff },
                    within: z_score <= THRESHOLD,
                });
            }
        }
    }
    let fraction_within = rows.iter().filter(|r| r.within).count() as f64 / rows.len() as f64;
    Ok(CovarianceReport {
        rows,
        threshold: THRESHOLD,
        fraction_within,
        pass: fraction_within >= 0.9,
    })
}

/// Sample skewness `m₃ / m₂^{3/2}` (central moments, `1/T` normalization).
pub fn skewness(xs: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(xs);
    m3 / libm::pow(m2, 1.5)
}

/// Sample excess kurtosis `m₄ / m₂² − 3`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(xs);
    m4 / (m2 * m2) - 3.0
}

fn central_moments(xs: &[f64]) -> (f64, f64, f64) {
    let t = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / t;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    (m2 / t, m3 / t, m4 / t)
}

/// Distance between the averaged partial trace of the linearized resolvent
/// and its free-probability prediction.
#[derive(Debug, Clone)]
pub struct FreenessGap {
    pub n: usize,
    /// `E_emp[(id ⊗ N⁻¹Tr) R_N]`
    pub empirical: CMat,
    /// `G(ω)` for the empirical measure of `D_N`.
    pub theory: CMat,
    /// Frobenius norm of the difference.
    pub gap: f64,
}

/// Averages `(id ⊗ N⁻¹Tr)(β ⊗ 1 − γ₁ ⊗ W − γ₂ ⊗ D)⁻¹` over `trials`
/// samples and compares it with `G(ω(β))`.
pub fn freeness_gap(
    lin: &Linearization,
    model: &EntryModel,
    nu: &SpectralMeasure,
    n: usize,
    trials: usize,
    seed: u64,
    z: Complex64,
) -> Result<FreenessGap> {
    if trials == 0 || n == 0 {
        return Err(Error::InvalidInput("freeness gap needs n >= 1 and trials >= 1".into()));
    }
    let m = lin.dim();
    let d = build_diag(nu, n);
    let beta = lin.beta(z);
    let mut acc = CMat::zeros(m, m);
    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let w = sample_wigner(n, model, &mut rng);
        acc += partial_trace(&linearized_resolvent(lin, &w, &d, &beta)?, m);
    }
    let empirical = acc / Complex64::new(trials as f64, 0.0);
    let nu_n = SpectralMeasure::empirical(&d)?;
    let theory = solve_omega(lin, model.sigma2, &nu_n, z, &SolverConfig::default())?.g;
    let gap = (&empirical - &theory).norm();
    Ok(FreenessGap {
        n,
        empirical,
        theory,
        gap,
    })
}

/// Human-readable name of a preset list, for messages.
pub fn preset_names() -> String {
    let mut s = String::new();
    for (k, p) in Preset::ALL.iter().enumerate() {
        if k > 0 {
            s.push_str(", ");
        }
        s.push_str(p.name());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{comparison_pairs, covariance_value};
    use crate::linearize::build_linearization;
    use crate::ncpoly::parse;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bernoulli() -> SpectralMeasure {
        SpectralMeasure::new(alloc::vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn config(n: usize, trials: usize, model: EntryModel, zs: Vec<Complex64>) -> SimConfig {
        SimConfig {
            n,
            trials,
            seed: 7,
            z_grid: zs,
            model,
            nu: bernoulli(),
            histogram_bins: 50,
            histogram_range: None,
        }
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("gaussian".parse::<Preset>().is_err());
        assert!(preset_names().contains("rademacher-real"));
    }

    #[test]
    fn model_parameters() {
        let m = EntryModel::new(Preset::GaussianReal, 2.0, None, None).unwrap();
        assert_eq!(m.params(), ModelParams::goe(2.0));
        let m = EntryModel::new(Preset::GaussianComplex, 2.0, None, None).unwrap();
        assert_eq!(m.params(), ModelParams::gue(2.0));
        let m = EntryModel::new(Preset::RademacherReal, 1.0, None, None).unwrap();
        assert_eq!(m.params().kappa, -2.0);
        assert!(EntryModel::new(Preset::RademacherReal, 1.0, None, Some(0.0)).is_err());
        assert!(EntryModel::new(Preset::FourPointComplex, 1.0, None, Some(-1.5)).is_err());
        let m = EntryModel::new(Preset::FourPointComplex, 1.0, None, Some(2.0)).unwrap();
        assert_eq!(m.params().kappa, 2.0);
        assert!((m.four_point_p() - 0.25).abs() < 1e-15);
        for p in Preset::ALL {
            EntryModel::new(p, 1.0, None, None).unwrap().params().validate().unwrap();
        }
    }

    #[test]
    fn wigner_samples_are_hermitian_with_right_moments() {
        let n = 300;
        for preset in Preset::ALL {
            let model = EntryModel::new(preset, 1.0, None, Some(if preset == Preset::FourPointComplex { 1.0 } else { model_kappa(preset) })).unwrap();
            let w = sample_wigner(n, &model, &mut trial_rng(1, 0));
            assert!(linalg::is_hermitian_exact(&w));
            let (mut abs2, mut sq, mut abs4, mut diag2) = (0.0, ZERO, 0.0, 0.0);
            let mut count = 0.0;
            for i in 0..n {
                diag2 += w[(i, i)].norm_sqr();
                for j in (i + 1)..n {
                    let v = w[(i, j)] * libm::sqrt(n as f64);
                    abs2 += v.norm_sqr();
                    sq += v * v;
                    abs4 += v.norm_sqr() * v.norm_sqr();
                    count += 1.0;
                }
            }
            let p = model.params();
            let (abs2, sq, abs4) = (abs2 / count, sq / count, abs4 / count);
            assert!((abs2 - p.sigma2).abs() < 0.02, "{} {}", preset, abs2);
            assert!((sq.re - p.theta).abs() < 0.03 && sq.im.abs() < 0.03, "{} {}", preset, sq);
            let kappa = abs4 - 2.0 - p.theta * p.theta;
            assert!((kappa - p.kappa).abs() < 0.25, "{} kappa {}", preset, kappa);
            assert!((diag2 - p.sigma_tilde2).abs() < 0.6, "{} {}", preset, diag2);
        }
    }

    fn model_kappa(p: Preset) -> f64 {
        match p {
            Preset::RademacherReal => -2.0,
            _ => 0.0,
        }
    }

    #[test]
    fn diagonal_quantiles() {
        assert_eq!(build_diag(&bernoulli(), 4), alloc::vec![-1.0, -1.0, 1.0, 1.0]);
        let nu = SpectralMeasure::new(alloc::vec![(0.0, 0.25), (2.0, 0.75)]).unwrap();
        assert_eq!(build_diag(&nu, 4), alloc::vec![0.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn linearized_trace_matches_direct_trace() {
        let p = parse("x*y+y*x+x^2").unwrap();
        let lin = build_linearization(&p).unwrap();
        let model = EntryModel::new(Preset::GaussianComplex, 1.0, None, None).unwrap();
        let w = sample_wigner(20, &model, &mut trial_rng(3, 0));
        let d = build_diag(&bernoulli(), 20);
        let x = p.evaluate_diag(&w, &d).unwrap();
        let x = (&x + x.adjoint()) * Complex64::new(0.5, 0.0);
        for z in [c(0.0, 1.0), c(1.5, -0.4)] {
            let direct = resolvent_trace(&x, z);
            let lin_tr = linearized_resolvent_trace(&lin, &w, &d, z).unwrap();
            let dense = linalg::trace(&linalg::inverse(&(CMat::identity(20, 20) * z - &x)).unwrap());
            assert!((direct - dense).norm() < 1e-10);
            assert!((direct - lin_tr).norm() < 1e-10);
        }
    }

    #[test]
    fn trials_are_reproducible_and_order_independent() {
        let p = parse("x*y+y*x").unwrap();
        let model = EntryModel::new(Preset::RademacherReal, 1.0, None, None).unwrap();
        let cfg = config(30, 6, model, alloc::vec![c(0.0, 2.0), c(1.0, 1.5)]);
        let sim = Simulation::new(&p, cfg.clone()).unwrap();
        let forward = sim.run().unwrap();
        let mut outputs: Vec<(usize, TrialOutput)> = (0..6).rev().map(|t| (t, sim.run_trial(t).unwrap())).collect();
        outputs.sort_by_key(|o| o.0);
        let backward = SimResult::from_trials(&cfg, outputs.into_iter().map(|o| o.1).collect()).unwrap();
        assert_eq!(forward.cov, backward.cov);
        assert_eq!(forward.mean_trace, backward.mean_trace);
        assert_eq!(forward.histogram, backward.histogram);
        assert_eq!(forward.histogram.total(), 6 * 30);
    }

    #[test]
    fn covariance_reduction_definitions() {
        let cfg = config(4, 3, EntryModel::new(Preset::GaussianComplex, 1.0, None, None).unwrap(), alloc::vec![c(0.0, 1.0)]);
        let out = |v: Complex64| TrialOutput {
            traces: alloc::vec![v],
            histogram: Histogram::new(-1.0, 1.0, 2),
        };
        let r = SimResult::from_trials(&cfg, alloc::vec![out(c(1.0, 0.0)), out(c(2.0, 1.0)), out(c(3.0, 2.0))]).unwrap();
        assert!((r.mean_trace[0] - c(2.0, 1.0)).norm() < 1e-15);
        // ξ = (−1−i, 0, 1+i): Σξ² = 2·(2i) = 4i, Σ|ξ|² = 4
        assert!((r.cov[0] - c(0.0, 2.0)).norm() < 1e-15);
        assert!((r.cov_conj[0] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn simulation_rejects_bad_input() {
        let model = EntryModel::new(Preset::GaussianComplex, 1.0, None, None).unwrap();
        let p = parse("x*y").unwrap();
        assert!(matches!(
            Simulation::new(&p, config(10, 4, model, alloc::vec![c(0.0, 1.0)])),
            Err(Error::NotSelfadjoint)
        ));
        let p = parse("x").unwrap();
        assert!(Simulation::new(&p, config(10, 4, model, alloc::vec![c(0.0, 0.05)])).is_err());
        assert!(Simulation::new(&p, config(10, 1, model, alloc::vec![c(0.0, 1.0)])).is_err());
    }

    #[test]
    fn histogram_bins_and_overflow() {
        let mut h = Histogram::new(-1.0, 1.0, 4);
        for x in [-2.0, -1.0, -0.1, 0.0, 0.99, 1.0, 3.0] {
            h.add(x);
        }
        assert_eq!(h.counts, alloc::vec![1, 1, 1, 2]);
        assert_eq!((h.below, h.above), (1, 1));
        let total: f64 = h.densities().iter().map(|d| d.2 * (d.1 - d.0)).sum();
        assert!((total - 5.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn moments_of_symmetric_sample() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        assert!(skewness(&xs).abs() < 1e-15);
        assert!((excess_kurtosis(&xs) - (6.8 / 4.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn comparison_uses_symmetries_and_reports_missing_points() {
        let cfg = config(4, 3, EntryModel::new(Preset::GaussianComplex, 1.0, None, None).unwrap(), alloc::vec![c(0.0, 1.0), c(1.0, 1.0)]);
        let out = |a: f64| TrialOutput {
            traces: alloc::vec![c(a, 0.0), c(0.0, a)],
            histogram: Histogram::new(-1.0, 1.0, 2),
        };
        let sim = SimResult::from_trials(&cfg, alloc::vec![out(1.0), out(2.0), out(4.0)]).unwrap();
        let kv = |z1, z2, g| KernelValue {
            z1,
            z2,
            gamma: ZERO,
            covariance: g,
            rho_sigma2t: 0.0,
            fd_discrepancy: 0.0,
        };
        let zs = &sim.z_grid;
        let theory: Vec<KernelValue> = comparison_pairs(zs)
            .into_iter()
            .map(|(a, b)| {
                // stored in conjugated and swapped form to exercise lookup
                let (i, j) = (zs.iter().position(|&z| z == a).unwrap(), zs.iter().position(|&z| z == b || z == b.conj()).unwrap());
                let emp = if b == zs[j] { sim.cov[i * 2 + j] } else { sim.cov_conj[i * 2 + j] };
                kv(b.conj(), a.conj(), emp.conj())
            })
            .collect();
        let report = compare_covariance(&sim, &theory).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert!(report.pass);
        assert!(report.rows.iter().all(|r| r.z_score < 1e-9));
        assert!(matches!(compare_covariance(&sim, &theory[..2]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn small_gue_simulation_is_close_to_kernel() {
        // Coarse sanity check; the stringent statistical comparisons live in
        // the acceptance suite.
        let p = parse("x").unwrap();
        let lin = build_linearization(&p).unwrap();
        let model = EntryModel::new(Preset::GaussianComplex, 1.0, None, None).unwrap();
        let zs = alloc::vec![c(0.0, 2.0), c(1.0, 1.5)];
        let mut cfg = config(60, 400, model, zs.clone());
        cfg.nu = SpectralMeasure::dirac(0.0);
        let sim = run_simulation(&p, cfg).unwrap();
        let theory: Vec<KernelValue> = comparison_pairs(&zs)
            .into_iter()
            .map(|(a, b)| covariance_value(&lin, &model.params(), &SpectralMeasure::dirac(0.0), a, b).unwrap())
            .collect();
        let report = compare_covariance(&sim, &theory).unwrap();
        assert!(report.rows.iter().all(|r| r.z_score < 5.0), "{:?}", report.rows);
    }
}
