//! Subcommand implementations. Every command validates its inputs and
//! checks its output files before computing, computes everything, and only
//! then writes, so failed runs leave no partial outputs behind.

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use polyspec_core::kernel::comparison_pairs;
use polyspec_core::linalg::CMat;
use polyspec_core::sim::{self, CovKind, CovarianceTable, EntryModel, Preset, SimConfig, SimResult, Simulation};
use polyspec_core::{
    build_linearization_with, covariance_value, density as density_values, parse, Complex64, KernelValue,
    Linearization, ModelParams, NcPolynomial, SpectralMeasure, Strategy,
};

use crate::cli::{
    CompareArgs, DensityArgs, KernelArgs, LinearizeArgs, ModelArgs, PairsArg, SelftestArgs, SimulateArgs, StrategyArg,
};
use crate::error::{CliError, CliResult};
use crate::io::{num, sidecar, write_csv, write_json, OutputDir, Table, VERSION};
use crate::parse::{parse_complex, parse_complex_list, parse_measure};
use crate::selftest;

fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn measure_json(nu: &SpectralMeasure) -> Value {
    Value::Array(nu.atoms().iter().map(|&(t, w)| json!([t, w])).collect())
}

fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn polynomial(text: &str) -> CliResult<NcPolynomial> {
    let p = parse(text)?;
    if !p.is_selfadjoint() {
        return Err(polyspec_core::Error::NotSelfadjoint.into());
    }
    Ok(p)
}

struct Model {
    poly: NcPolynomial,
    lin: Linearization,
    nu: SpectralMeasure,
    sigma2: f64,
}

fn model(args: &ModelArgs) -> CliResult<Model> {
    let poly = polynomial(&args.poly)?;
    let lin = build_linearization_with(&poly, Strategy::Paired)?;
    let nu = parse_measure(&args.nu)?;
    if !(args.sigma2 >= 0.0 && args.sigma2.is_finite()) {
        return Err(CliError::Usage("--sigma2 must be a nonnegative number".into()));
    }
    Ok(Model {
        poly,
        lin,
        nu,
        sigma2: args.sigma2,
    })
}

pub fn linearize(args: LinearizeArgs, threads: usize) -> CliResult<()> {
    let poly = polynomial(&args.poly)?;
    let strategy = match args.strategy {
        StrategyArg::Paired => Strategy::Paired,
        StrategyArg::Unpaired => Strategy::Unpaired,
    };
    let out = args.out.map(|dir| OutputDir::new(dir, args.force));
    if let Some(out) = &out {
        out.check(&["linearization.json", "linearize.run.json"])?;
    }
    let lin = build_linearization_with(&poly, strategy)?;
    let config = json!({
        "polynomial": poly.to_string(),
        "strategy": format!("{:?}", strategy).to_lowercase(),
    });
    let doc = json!({
        "m": lin.dim(),
        "gamma0": matrix_json(lin.gamma0()),
        "gamma1": matrix_json(lin.gamma1()),
        "gamma2": matrix_json(lin.gamma2()),
        "config": config,
        "version": VERSION,
    });
    if let Some(out) = &out {
        out.create()?;
        write_json(&out.path("linearization.json"), &doc)?;
        write_json(
            &out.path("linearize.run.json"),
            &sidecar("linearize", config, &["linearization.json"], threads),
        )?;
    }
    println!("{}", serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

pub fn density(args: DensityArgs, threads: usize) -> CliResult<()> {
    let m = model(&args.model)?;
    if args.npoints == 0 || !(args.xmin <= args.xmax) || (args.npoints > 1 && args.xmin == args.xmax) {
        return Err(CliError::Usage("density grid needs npoints >= 1 and xmin < xmax".into()));
    }
    if !(args.eps > 0.0) {
        return Err(CliError::Usage("--eps must be positive".into()));
    }
    let out = OutputDir::new(args.output.out.clone(), args.output.force);
    out.check(&["density.csv", "density.run.json"])?;

    let n = args.npoints;
    let xs: Vec<f64> = (0..n)
        .map(|i| if n == 1 { args.xmin } else { args.xmin + (args.xmax - args.xmin) * i as f64 / (n - 1) as f64 })
        .collect();
    let values: Vec<f64> = xs
        .par_iter()
        .map(|&x| Ok(density_values(&m.lin, m.sigma2, &m.nu, &[x], args.eps)?[0]))
        .collect::<CliResult<_>>()?;

    out.create()?;
    let rows: Vec<Vec<String>> = xs.iter().zip(&values).map(|(&x, &d)| vec![num(x), num(d)]).collect();
    write_csv(&out.path("density.csv"), &["x", "density"], &rows)?;
    let config = json!({
        "polynomial": m.poly.to_string(),
        "m": m.lin.dim(),
        "sigma2": m.sigma2,
        "nu": measure_json(&m.nu),
        "xmin": args.xmin,
        "xmax": args.xmax,
        "npoints": n,
        "eps": args.eps,
    });
    write_json(&out.path("density.run.json"), &sidecar("density", config, &["density.csv"], threads))
}

const KERNEL_HEADER: [&str; 10] = [
    "z1_re",
    "z1_im",
    "z2_re",
    "z2_im",
    "gamma_re",
    "gamma_im",
    "Gamma_re",
    "Gamma_im",
    "rho_sigma2T",
    "fd_discrepancy",
];

pub fn kernel(args: KernelArgs, threads: usize) -> CliResult<()> {
    let m = model(&args.model)?;
    let params = ModelParams::new(m.sigma2, args.theta, args.sigma_tilde2.unwrap_or(m.sigma2), args.kappa)?;
    let zs = parse_complex_list(&args.z)?;
    let out = OutputDir::new(args.output.out.clone(), args.output.force);
    out.check(&["kernel.csv", "kernel.run.json"])?;

    let pairs = match args.pairs {
        PairsArg::Compare => comparison_pairs(&zs),
        PairsArg::All => zs.iter().flat_map(|&a| zs.iter().map(move |&b| (a, b))).collect(),
    };
    let values: Vec<KernelValue> = pairs
        .par_iter()
        .map(|&(z1, z2)| covariance_value(&m.lin, &params, &m.nu, z1, z2))
        .collect::<Result<_, _>>()?;

    out.create()?;
    let rows: Vec<Vec<String>> = values
        .iter()
        .map(|v| {
            vec![
                num(v.z1.re),
                num(v.z1.im),
                num(v.z2.re),
                num(v.z2.im),
                num(v.gamma.re),
                num(v.gamma.im),
                num(v.covariance.re),
                num(v.covariance.im),
                num(v.rho_sigma2t),
                num(v.fd_discrepancy),
            ]
        })
        .collect();
    write_csv(&out.path("kernel.csv"), &KERNEL_HEADER, &rows)?;
    let config = json!({
        "polynomial": m.poly.to_string(),
        "m": m.lin.dim(),
        "sigma2": params.sigma2,
        "theta": params.theta,
        "sigma_tilde2": params.sigma_tilde2,
        "kappa": params.kappa,
        "nu": measure_json(&m.nu),
        "z": zs.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
        "pairs": format!("{:?}", args.pairs).to_lowercase(),
    });
    write_json(&out.path("kernel.run.json"), &sidecar("kernel", config, &["kernel.csv"], threads))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ThetaSpec {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ZSpec {
    Pair([f64; 2]),
    Text(String),
}

/// JSON configuration of `simulate`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    polynomial: String,
    preset: String,
    sigma2: f64,
    #[serde(default)]
    sigma_tilde2: Option<f64>,
    #[serde(default)]
    theta: Option<ThetaSpec>,
    #[serde(default)]
    kappa: Option<f64>,
    nu_atoms: Vec<[f64; 2]>,
    #[serde(rename = "N")]
    n: usize,
    trials: usize,
    #[serde(alias = "master_seed")]
    seed: u64,
    z_grid: Vec<ZSpec>,
    #[serde(default)]
    histogram_bins: Option<usize>,
    #[serde(default)]
    histogram_range: Option<[f64; 2]>,
}

const SIM_OUTPUTS: [&str; 5] = ["traces.csv", "covariance.csv", "histogram.csv", "xi.csv", "simulate.run.json"];

fn resolve_simulation(cfg: SimulateConfig) -> CliResult<(NcPolynomial, SimConfig)> {
    let poly = polynomial(&cfg.polynomial)?;
    let preset: Preset = cfg
        .preset
        .parse()
        .map_err(|_| CliError::Usage(format!("unknown preset '{}'; expected one of {}", cfg.preset, sim::preset_names())))?;
    let model = EntryModel::new(preset, cfg.sigma2, cfg.sigma_tilde2, cfg.kappa)?;
    let theta = model.params().theta;
    match cfg.theta {
        None => {}
        Some(ThetaSpec::Complex([_, im])) if im != 0.0 => {
            return Err(CliError::Usage("complex theta is not supported; theta must be real".into()))
        }
        Some(ThetaSpec::Real(t)) | Some(ThetaSpec::Complex([t, _])) if t != theta => {
            return Err(CliError::Usage(format!(
                "preset {} realizes theta = {}, but the configuration asks for {}",
                preset, theta, t
            )))
        }
        Some(_) => {}
    }
    let nu = SpectralMeasure::from_unsorted(cfg.nu_atoms.iter().map(|&[t, w]| (t, w)).collect())?;
    let z_grid = cfg
        .z_grid
        .iter()
        .map(|z| match z {
            ZSpec::Pair([re, im]) => Ok(Complex64::new(*re, *im)),
            ZSpec::Text(s) => parse_complex(s),
        })
        .collect::<CliResult<Vec<_>>>()?;
    let config = SimConfig {
        n: cfg.n,
        trials: cfg.trials,
        seed: cfg.seed,
        z_grid,
        model,
        nu,
        histogram_bins: cfg.histogram_bins.unwrap_or(200),
        histogram_range: cfg.histogram_range.map(|[lo, hi]| (lo, hi)),
    };
    Ok((poly, config))
}

fn simulation_rows(result: &SimResult) -> [Vec<Vec<String>>; 4] {
    let nz = result.z_grid.len();
    let traces = result
        .z_grid
        .iter()
        .enumerate()
        .map(|(i, z)| {
            vec![
                num(z.re),
                num(z.im),
                num(result.mean_trace[i].re),
                num(result.mean_trace[i].im),
                num(result.mean_trace_se[i]),
            ]
        })
        .collect();
    let mut covariance = Vec::new();
    for (kind, values, se) in [
        (CovKind::Plain, &result.cov, &result.cov_se),
        (CovKind::Conjugate, &result.cov_conj, &result.cov_conj_se),
    ] {
        for i in 0..nz {
            for j in 0..nz {
                let v = values[i * nz + j];
                covariance.push(vec![
                    i.to_string(),
                    j.to_string(),
                    kind.name().to_string(),
                    num(v.re),
                    num(v.im),
                    num(se[i * nz + j]),
                ]);
            }
        }
    }
    let histogram = result
        .histogram
        .densities()
        .into_iter()
        .map(|(l, r, d)| vec![num(l), num(r), num(d)])
        .collect();
    let xi = result
        .xi
        .iter()
        .enumerate()
        .flat_map(|(t, row)| {
            row.iter()
                .enumerate()
                .map(move |(i, x)| vec![t.to_string(), i.to_string(), num(x.re), num(x.im)])
        })
        .collect();
    [traces, covariance, histogram, xi]
}

pub fn simulate(args: SimulateArgs, threads: usize) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {}", args.config.display(), e)))?;
    let raw: SimulateConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid simulation config: {}", e)))?;
    let (poly, config) = resolve_simulation(raw)?;
    let simulation = Simulation::new(&poly, config.clone())?;
    let out = OutputDir::new(args.output.out.clone(), args.output.force);
    out.check(&SIM_OUTPUTS)?;

    let outputs = (0..config.trials)
        .into_par_iter()
        .map(|t| simulation.run_trial(t))
        .collect::<Result<Vec<_>, _>>()?;
    let result = SimResult::from_trials(&config, outputs)?;

    out.create()?;
    let [traces, covariance, histogram, xi] = simulation_rows(&result);
    write_csv(&out.path("traces.csv"), &["z_re", "z_im", "mean_re", "mean_im", "se"], &traces)?;
    write_csv(&out.path("covariance.csv"), &["i", "j", "kind", "cov_re", "cov_im", "se"], &covariance)?;
    write_csv(&out.path("histogram.csv"), &["bin_left", "bin_right", "density"], &histogram)?;
    write_csv(&out.path("xi.csv"), &["trial", "i", "xi_re", "xi_im"], &xi)?;
    let params = config.model.params();
    let (lo, hi) = simulation.histogram_range();
    let resolved = json!({
        "polynomial": poly.to_string(),
        "preset": config.model.preset.name(),
        "sigma2": params.sigma2,
        "sigma_tilde2": params.sigma_tilde2,
        "theta": params.theta,
        "kappa": params.kappa,
        "nu_atoms": measure_json(&config.nu),
        "N": config.n,
        "trials": config.trials,
        "seed": config.seed,
        "z_grid": config.z_grid.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
        "histogram_bins": config.histogram_bins,
        "histogram_range": [lo, hi],
        "histogram_below": result.histogram.below,
        "histogram_above": result.histogram.above,
    });
    write_json(
        &out.path("simulate.run.json"),
        &sidecar("simulate", resolved, &SIM_OUTPUTS[..4], threads),
    )
}

fn read_covariance_table(dir: &std::path::Path) -> CliResult<CovarianceTable> {
    let traces = Table::read(&dir.join("traces.csv"))?;
    let z_grid: Vec<Complex64> = traces
        .rows
        .iter()
        .map(|r| Ok(Complex64::new(traces.float(r, "z_re")?, traces.float(r, "z_im")?)))
        .collect::<CliResult<_>>()?;
    let nz = z_grid.len();
    let mut table = CovarianceTable {
        z_grid,
        cov: vec![Complex64::new(f64::NAN, f64::NAN); nz * nz],
        cov_se: vec![f64::NAN; nz * nz],
        cov_conj: vec![Complex64::new(f64::NAN, f64::NAN); nz * nz],
        cov_conj_se: vec![f64::NAN; nz * nz],
    };
    let cov = Table::read(&dir.join("covariance.csv"))?;
    let mut seen = vec![[false; 2]; nz * nz];
    for r in &cov.rows {
        let (i, j) = (cov.index(r, "i")?, cov.index(r, "j")?);
        if i >= nz || j >= nz {
            return Err(polyspec_core::Error::GridMismatch(format!("covariance index ({}, {}) outside the z grid", i, j)).into());
        }
        let kind_text = cov.text(r, "kind")?;
        let kind = CovKind::from_name(kind_text)
            .ok_or_else(|| CliError::Usage(format!("unknown covariance kind '{}'", kind_text)))?;
        let value = Complex64::new(cov.float(r, "cov_re")?, cov.float(r, "cov_im")?);
        let se = cov.float(r, "se")?;
        let k = i * nz + j;
        match kind {
            CovKind::Plain => {
                table.cov[k] = value;
                table.cov_se[k] = se;
                seen[k][0] = true;
            }
            CovKind::Conjugate => {
                table.cov_conj[k] = value;
                table.cov_conj_se[k] = se;
                seen[k][1] = true;
            }
        }
    }
    for i in 0..nz {
        for j in i..nz {
            if !seen[i * nz + j].iter().all(|&s| s) {
                return Err(polyspec_core::Error::GridMismatch(format!("covariance.csv lacks entries for ({}, {})", i, j)).into());
            }
        }
    }
    Ok(table)
}

fn read_kernel(path: &std::path::Path) -> CliResult<Vec<KernelValue>> {
    let t = Table::read(path)?;
    t.rows
        .iter()
        .map(|r| {
            Ok(KernelValue {
                z1: Complex64::new(t.float(r, "z1_re")?, t.float(r, "z1_im")?),
                z2: Complex64::new(t.float(r, "z2_re")?, t.float(r, "z2_im")?),
                gamma: Complex64::new(t.float(r, "gamma_re")?, t.float(r, "gamma_im")?),
                covariance: Complex64::new(t.float(r, "Gamma_re")?, t.float(r, "Gamma_im")?),
                rho_sigma2t: t.float(r, "rho_sigma2T")?,
                fd_discrepancy: t.float(r, "fd_discrepancy")?,
            })
        })
        .collect()
}

pub fn compare(args: CompareArgs, threads: usize) -> CliResult<()> {
    let out = OutputDir::new(args.output.out.clone(), args.output.force);
    out.check(&["report.csv", "compare.run.json"])?;
    let table = read_covariance_table(&args.sim)?;
    let theory = read_kernel(&args.kernel)?;
    let report = sim::compare_table(&table, &theory)?;

    out.create()?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.i.to_string(),
                r.j.to_string(),
                r.kind.name().to_string(),
                num(r.z1.re),
                num(r.z1.im),
                num(r.z2.re),
                num(r.z2.im),
                num(r.empirical.re),
                num(r.empirical.im),
                num(r.theory.re),
                num(r.theory.im),
                num(r.se),
                num(r.z_score),
                num(r.rel_error),
                r.within.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.path("report.csv"),
        &[
            "i", "j", "kind", "z1_re", "z1_im", "z2_re", "z2_im", "cov_re", "cov_im", "Gamma_re", "Gamma_im", "se",
            "z_score", "rel_error", "within",
        ],
        &rows,
    )?;
    let summary = json!({
        "rows": report.rows.len(),
        "threshold_se": report.threshold,
        "fraction_within": report.fraction_within,
        "pass": report.pass,
    });
    let config = json!({
        "sim": args.sim.display().to_string(),
        "kernel": args.kernel.display().to_string(),
        "summary": summary,
    });
    write_json(&out.path("compare.run.json"), &sidecar("compare", config, &["report.csv"], threads))?;
    println!("{}", summary);
    Ok(())
}

pub fn selftest(args: SelftestArgs, threads: usize) -> CliResult<()> {
    let out = args.out.map(|dir| OutputDir::new(dir, args.force));
    if let Some(out) = &out {
        out.check(&["selftest.csv", "selftest.run.json"])?;
    }
    let checks = selftest::run_checks()?;
    for c in &checks {
        println!(
            "{:<20} {}  {} = {:e} (tolerance {:e})",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.metric_name,
            c.metric,
            c.tolerance
        );
    }
    if let Some(out) = &out {
        out.create()?;
        let rows: Vec<Vec<String>> = checks
            .iter()
            .map(|c| vec![c.name.to_string(), c.metric_name.to_string(), num(c.metric), num(c.tolerance), c.pass.to_string()])
            .collect();
        write_csv(&out.path("selftest.csv"), &["check", "metric", "value", "tolerance", "pass"], &rows)?;
        write_json(
            &out.path("selftest.run.json"),
            &sidecar("selftest", json!({ "checks": checks.len() }), &["selftest.csv"], threads),
        )?;
    }
    match checks.iter().find(|c| !c.pass) {
        None => Ok(()),
        Some(c) => Err(selftest::failure(c)),
    }
}
