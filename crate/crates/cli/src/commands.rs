//! Subcommand implementations. Every table is CSV with a versioned `#` header and floats
//! written with 17 significant digits.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use rayon::prelude::*;
use thermometry_core::decoherence::decay_factors;
use thermometry_core::distributions::MeasurementConfig;
use thermometry_core::error::Error;
use thermometry_core::estimation::{
    fisher_analytic, fisher_exact, fit_scaling_exponent, independent_fisher, optimize_time, time_grid,
    DistributionFamily, FisherObjective, Regime, FD_REL_STEP,
};
use thermometry_core::oracle::DEFAULT_CAP;
use thermometry_core::presets;
use thermometry_core::sampling::{empirical_fisher, sample_readouts, StorageMode};

use crate::config::Params;

/// Grid searched for the optimal evolution time in `fig2`.
pub const FIG2_TIME_GRID: (f64, f64, f64) = (0.01, 1.0, 0.01);
/// Range of N used for the fitted exponents in `fig2`.
pub const FIT_RANGE: (usize, usize) = (2, 32);

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical { .. } | Error::Degenerate(_) => CliError::Numerical(e.to_string()),
            Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    High,
    Low,
    /// Single-spin formula with the total derivative.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fig2Objective {
    /// The closed form of the panel's regime.
    Analytic,
    /// Finite-difference Fisher of the collective-field readout law.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    N,
    Beta,
    Time,
    Theta,
    Alpha,
    OmegaC,
    OmegaCo,
    GammaWhite,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::Beta => "beta",
            SweepParam::Time => "time",
            SweepParam::Theta => "theta",
            SweepParam::Alpha => "alpha",
            SweepParam::OmegaC => "omega_c",
            SweepParam::OmegaCo => "omega_co",
            SweepParam::GammaWhite => "gamma_white",
        }
    }

    fn apply(self, params: &Params, value: f64) -> Result<Params, CliError> {
        let mut p = params.clone();
        match self {
            SweepParam::N => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(CliError::Config(format!("n must be a positive integer, got {value}")));
                }
                p.n = value as usize;
            }
            SweepParam::Beta => p.beta = value,
            SweepParam::Time => p.time = value,
            SweepParam::Theta => p.theta = value,
            SweepParam::Alpha => p.alpha = value,
            SweepParam::OmegaC => p.omega_c = value,
            SweepParam::OmegaCo => p.omega_co = value,
            SweepParam::GammaWhite => p.gamma_white = value,
        }
        p.validate().map_err(|e| CliError::Config(e.0))?;
        Ok(p)
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_table(
    out: &mut dyn Write,
    schema: &str,
    params: &Params,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    writeln!(out, "# thermometry {schema} v1")?;
    writeln!(out, "# {}", params.describe())?;
    writeln!(out, "{}", columns.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn on_axis(theta: f64) -> bool {
    theta.abs() < 1e-12 || (theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12
}

pub fn gamma(params: &Params, betas: &[f64], times: &[f64], out: Option<&Path>) -> Result<(), CliError> {
    let model = params.model().map_err(|e| CliError::Config(e.0))?;
    let mut betas = if betas.is_empty() { vec![params.beta] } else { betas.to_vec() };
    let mut times = if times.is_empty() { vec![params.time] } else { times.to_vec() };
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0)) {
        return Err(CliError::Config(format!("beta must be > 0, got {b}")));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(CliError::Config(format!("time must be finite and >= 0, got {t}")));
    }
    betas.sort_by(f64::total_cmp);
    times.sort_by(f64::total_cmp);
    let points: Vec<(f64, f64)> = betas.iter().flat_map(|&b| times.iter().map(move |&t| (b, t))).collect();
    let rows = points
        .par_iter()
        .map(|&(b, t)| {
            let d = decay_factors(&model, b, t)?;
            Ok(vec![
                num(b),
                num(t),
                num(d.gamma_l),
                num(d.gamma_h),
                num(d.d_gamma_l_d_beta),
                num(d.d_gamma_h_d_beta),
            ])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    write_table(
        &mut open_out(out)?,
        "gamma",
        params,
        &["beta", "time", "gamma_l", "gamma_h", "d_gamma_l_d_beta", "d_gamma_h_d_beta"],
        &rows,
    )
}

struct Fig2Point {
    n: usize,
    theta: f64,
    time: f64,
    fisher: f64,
    precision: f64,
}

pub fn fig2(params: &Params, n_max: usize, objective: Fig2Objective, out: Option<&Path>) -> Result<(), CliError> {
    if n_max == 0 {
        return Err(CliError::Config("n_max must be >= 1".into()));
    }
    let model = params.model().map_err(|e| CliError::Config(e.0))?;
    let dir = out.unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let grid = time_grid(FIG2_TIME_GRID.0, FIG2_TIME_GRID.1, FIG2_TIME_GRID.2)?;
    let ns: Vec<usize> = std::iter::successors(Some(1usize), |n| Some(n * 2))
        .take_while(|&n| n <= n_max)
        .collect();
    let panels = [
        ("high_t", presets::HIGH_T_BETA, Regime::HighTemperature),
        ("low_t", presets::LOW_T_BETA, Regime::LowTemperature),
    ];
    let mut exponents = Vec::new();
    for (label, beta, regime) in panels {
        let objective = match objective {
            Fig2Objective::Exact => FisherObjective::Exact(DistributionFamily::CollectiveField),
            Fig2Objective::Analytic => FisherObjective::Analytic(regime),
        };
        let mut points = Vec::new();
        for theta in [0.0, std::f64::consts::FRAC_PI_2] {
            for &n in &ns {
                let best = optimize_time(&model, beta, n, theta, objective, &grid)?;
                log::info!("fig2 {label} theta={theta:.4} n={n}: t*={:.2} F={:.6e}", best.time, best.report.fisher);
                points.push(Fig2Point {
                    n,
                    theta,
                    time: best.time,
                    fisher: best.report.fisher,
                    precision: best.report.precision_figure,
                });
            }
            let fit_points: Vec<(f64, f64)> = points
                .iter()
                .filter(|p| p.theta == theta && (FIT_RANGE.0..=FIT_RANGE.1).contains(&p.n))
                .map(|p| (p.n as f64, p.fisher))
                .collect();
            if fit_points.len() >= 3 {
                let fit = fit_scaling_exponent(&fit_points)?;
                exponents.push(vec![
                    label.to_string(),
                    num(theta),
                    fit_points.len().to_string(),
                    num(fit.exponent),
                    num(fit.max_abs_residual),
                    num(fit.r_squared),
                ]);
            }
        }
        let rows: Vec<Vec<String>> = points
            .iter()
            .map(|p| vec![p.n.to_string(), num(p.theta), num(p.time), num(p.fisher), num(p.precision)])
            .collect();
        let mut file = open_out(Some(&dir.join(format!("fig2_{label}.csv"))))?;
        let panel_params = Params {
            beta,
            ..params.clone()
        };
        write_table(
            &mut file,
            &format!("fig2.{label}"),
            &panel_params,
            &["n", "theta", "t_opt", "fisher", "beta2_fisher"],
            &rows,
        )?;
    }
    write_table(
        &mut open_out(Some(&dir.join("fig2_exponents.csv")))?,
        "fig2.exponents",
        params,
        &["panel", "theta", "points", "exponent", "max_abs_residual", "r_squared"],
        &exponents,
    )
}

pub fn fisher(params: &Params, regime: Option<RegimeArg>, out: Option<&Path>) -> Result<(), CliError> {
    let model = params.model().map_err(|e| CliError::Config(e.0))?;
    let (n, theta, beta, t) = (params.n, params.theta, params.beta, params.time);
    let decay = decay_factors(&model, beta, t)?;
    let config = MeasurementConfig::new(n, theta, decay)?;
    let regime = regime.unwrap_or(match Regime::heuristic(beta, params.omega_co) {
        Regime::HighTemperature => RegimeArg::High,
        Regime::LowTemperature => RegimeArg::Low,
    });
    let analytic = if on_axis(theta) {
        match regime {
            RegimeArg::High => fisher_analytic(&config, Regime::HighTemperature)?.fisher,
            RegimeArg::Low => fisher_analytic(&config, Regime::LowTemperature)?.fisher,
            RegimeArg::Independent => independent_fisher(n, &decay).fisher,
        }
    } else {
        f64::NAN
    };
    let exact = fisher_exact(DistributionFamily::CollectiveField, n, theta, &model, beta, t)?;
    let enumerated = if n <= DEFAULT_CAP {
        fisher_exact(DistributionFamily::Enumerated, n, theta, &model, beta, t)?.fisher
    } else {
        f64::NAN
    };
    let (emp, se, lo, hi) = if on_axis(theta) && params.shots >= 2 {
        let e = empirical_fisher(&model, beta, t, n, theta, params.shots, params.seed, FD_REL_STEP * beta)?;
        (e.fisher, e.standard_error, e.ci_low, e.ci_high)
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };
    let regime_name = match regime {
        RegimeArg::High => "high",
        RegimeArg::Low => "low",
        RegimeArg::Independent => "independent",
    };
    let row = vec![
        n.to_string(),
        num(theta),
        num(beta),
        num(t),
        regime_name.to_string(),
        num(analytic),
        num(exact.fisher),
        num(enumerated),
        num(emp),
        num(se),
        num(lo),
        num(hi),
        params.shots.to_string(),
        num(exact.precision_figure),
    ];
    write_table(
        &mut open_out(out)?,
        "fisher",
        params,
        &[
            "n",
            "theta",
            "beta",
            "time",
            "regime",
            "fisher_analytic",
            "fisher_exact",
            "fisher_enumerated",
            "fisher_empirical",
            "empirical_se",
            "empirical_ci_low",
            "empirical_ci_high",
            "shots",
            "beta2_fisher_exact",
        ],
        &[row],
    )
}

pub fn sample(params: &Params, full: bool, out: Option<&Path>) -> Result<(), CliError> {
    let model = params.model().map_err(|e| CliError::Config(e.0))?;
    let decay = decay_factors(&model, params.beta, params.time)?;
    let config = MeasurementConfig::new(params.n, params.theta, decay)?;
    let mode = if full { StorageMode::Full } else { StorageMode::Compressed };
    let batch = sample_readouts(&config, params.shots, params.seed, mode)?;
    log::info!("sampled {} shots ({mode})", batch.len());
    let mut w = open_out(out)?;
    batch.write_text(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn sweep(params: &Params, param: SweepParam, values: &[f64], out: Option<&Path>) -> Result<(), CliError> {
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let points = values
        .iter()
        .map(|&v| param.apply(params, v).map(|p| (v, p)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = points
        .par_iter()
        .map(|(v, p)| -> Result<(f64, Vec<String>), CliError> {
            let model = p.model().map_err(|e| CliError::Config(e.0))?;
            let decay = decay_factors(&model, p.beta, p.time)?;
            let config = MeasurementConfig::new(p.n, p.theta, decay)?;
            let analytic = if on_axis(p.theta) {
                fisher_analytic(&config, Regime::heuristic(p.beta, p.omega_co))?.fisher
            } else {
                f64::NAN
            };
            let exact = fisher_exact(DistributionFamily::CollectiveField, p.n, p.theta, &model, p.beta, p.time)?;
            log::info!("sweep {}={v}: F_exact={:.6e}", param.name(), exact.fisher);
            Ok((
                *v,
                vec![
                    num(*v),
                    p.n.to_string(),
                    num(p.theta),
                    num(p.beta),
                    num(p.time),
                    num(decay.gamma_l),
                    num(decay.gamma_h),
                    num(analytic),
                    num(exact.fisher),
                    num(exact.precision_figure),
                ],
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rows: Vec<Vec<String>> = rows.into_iter().map(|r| r.1).collect();
    write_table(
        &mut open_out(out)?,
        &format!("sweep.{}", param.name()),
        params,
        &[
            "value",
            "n",
            "theta",
            "beta",
            "time",
            "gamma_l",
            "gamma_h",
            "fisher_analytic",
            "fisher_exact",
            "beta2_fisher_exact",
        ],
        &rows,
    )
}
