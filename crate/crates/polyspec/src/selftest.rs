//! Built-in checks of the numerical machinery against closed forms.

use polyspec_core::linalg::CMat;
use polyspec_core::oracle::{gue_covariance, semicircle_cauchy, semicircle_plus_bernoulli_cauchy};
use polyspec_core::{
    build_linearization, cauchy_transform, covariance_value, density, parse, verify_corner, Complex64, ModelParams,
    SpectralMeasure,
};

use crate::error::{CliError, CliResult};

/// Outcome of one check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub metric_name: &'static str,
    pub metric: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, metric_name: &'static str, metric: f64, tolerance: f64) -> Self {
        Self {
            name,
            metric_name,
            metric,
            tolerance,
            pass: metric <= tolerance,
        }
    }
}

pub fn failure(c: &Check) -> CliError {
    CliError::Check(format!(
        "self test '{}' failed: {} = {:e} exceeds {:e}",
        c.name, c.metric_name, c.metric, c.tolerance
    ))
}

fn probe_points() -> Vec<Complex64> {
    vec![
        Complex64::new(0.0, 1.0),
        Complex64::new(1.5, 0.2),
        Complex64::new(-2.5, 0.5),
        Complex64::new(0.3, -0.7),
    ]
}

fn bernoulli() -> SpectralMeasure {
    SpectralMeasure::new(vec![(-1.0, 0.5), (1.0, 0.5)]).expect("valid measure")
}

/// Runs every check; an `Err` means a check could not be evaluated at all.
pub fn run_checks() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    let x = build_linearization(&parse("x")?)?;
    let x_plus_y = build_linearization(&parse("x + y")?)?;
    let zero = SpectralMeasure::dirac(0.0);

    let mut err: f64 = 0.0;
    for z in probe_points() {
        err = err.max((cauchy_transform(&x, 1.0, &zero, z)? - semicircle_cauchy(z)).norm());
    }
    checks.push(Check::new("semicircle", "max |g - g_sc|", err, 1e-10));

    let d = density(&x, 1.0, &zero, &[0.0, 1.0], 1e-10)?;
    let exact = [1.0 / std::f64::consts::PI, 3f64.sqrt() / (2.0 * std::f64::consts::PI)];
    let err = d.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::new("semicircle_density", "max |rho - rho_sc|", err, 1e-8));

    let nu = bernoulli();
    let mut err: f64 = 0.0;
    for z in probe_points() {
        err = err.max((cauchy_transform(&x_plus_y, 1.0, &nu, z)? - semicircle_plus_bernoulli_cauchy(z)?).norm());
    }
    checks.push(Check::new("free_convolution", "max |g - g_ref|", err, 1e-10));

    let params = ModelParams::gue(1.0);
    let zs = probe_points();
    let mut err: f64 = 0.0;
    for (k, &z1) in zs.iter().enumerate() {
        for &z2 in &zs[k..] {
            let exact = gue_covariance(z1, z2);
            let v = covariance_value(&x, &params, &zero, z1, z2)?;
            err = err.max((v.covariance - exact).norm() / exact.norm().max(1e-300));
        }
    }
    checks.push(Check::new("gue_kernel", "max relative error", err, 1e-6));

    let p = parse("x*y*x + y*x*y - x*x + 0.5*y")?;
    let lin = build_linearization(&p)?;
    let n = 4;
    let a = CMat::from_fn(n, n, |i, j| {
        let (lo, hi) = (i.min(j) as f64, i.max(j) as f64);
        let sign = if i <= j { 1.0 } else { -1.0 };
        Complex64::new(0.3 * (lo + hi) - 0.5, if i == j { 0.0 } else { sign * 0.1 * (hi - lo) })
    });
    let b = CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(i as f64 - 1.5, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let err = verify_corner(&lin, &p, &a, &b, Complex64::new(0.4, 0.9))?;
    checks.push(Check::new("corner_identity", "relative residual", err, 1e-10));

    Ok(checks)
}
