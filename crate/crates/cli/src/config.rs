//! Run parameters: defaults, `key=value` config files and command-line overrides.
//!
//! Precedence is command line, then config file, then defaults. Defaults reproduce the
//! low-temperature correlation-measurement working point.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Path, PathBuf};

use thermometry_core::presets;
use thermometry_core::spectral::{SpectralModel, TabulatedSpectrum};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub alpha: f64,
    pub omega_c: f64,
    pub omega_co: f64,
    pub gamma_white: f64,
    pub beta: f64,
    pub n: usize,
    pub theta: f64,
    pub time: f64,
    pub shots: usize,
    pub seed: u64,
    pub threads: usize,
    /// Two-column `ω J(ω)` file replacing the Ohmic spectrum.
    pub spectrum: Option<PathBuf>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: presets::ALPHA,
            omega_c: presets::OMEGA_C,
            omega_co: presets::OMEGA_CO,
            gamma_white: presets::GAMMA_WHITE,
            beta: presets::LOW_T_BETA,
            n: 8,
            theta: FRAC_PI_2,
            time: presets::LOW_T_TIME_CORRELATION,
            shots: 100_000,
            seed: 0,
            threads: 0,
            spectrum: None,
        }
    }
}

/// Optional per-parameter overrides, as collected from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub omega_c: Option<f64>,
    pub omega_co: Option<f64>,
    pub gamma_white: Option<f64>,
    pub beta: Option<f64>,
    pub n: Option<usize>,
    pub theta: Option<f64>,
    pub time: Option<f64>,
    pub shots: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub spectrum: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse()
        .map_err(|_| ConfigError(format!("invalid value for {key}: {raw:?}")))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key=value", i + 1)))?;
        let key = key.trim().replace('-', "_");
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(ConfigError(format!("line {}: duplicate key {key}", i + 1)));
        }
    }
    Ok(out)
}

impl Params {
    fn apply_file(&mut self, entries: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        for (key, raw) in entries {
            match key.as_str() {
                "alpha" => self.alpha = parse_value(key, raw)?,
                "omega_c" => self.omega_c = parse_value(key, raw)?,
                "omega_co" => self.omega_co = parse_value(key, raw)?,
                "gamma_white" => self.gamma_white = parse_value(key, raw)?,
                "beta" => self.beta = parse_value(key, raw)?,
                "n" => self.n = parse_value(key, raw)?,
                "theta" => self.theta = parse_value(key, raw)?,
                "time" => self.time = parse_value(key, raw)?,
                "shots" => self.shots = parse_value(key, raw)?,
                "seed" => self.seed = parse_value(key, raw)?,
                "threads" => self.threads = parse_value(key, raw)?,
                "spectrum" => self.spectrum = Some(PathBuf::from(raw)),
                other => return Err(ConfigError(format!("unknown config key {other:?}"))),
            }
        }
        Ok(())
    }

    fn apply_overrides(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field.clone() {
                    self.$field = v;
                }
            )*};
        }
        take!(alpha, omega_c, omega_co, gamma_white, beta, n, theta, time, shots, seed, threads);
        if let Some(p) = &o.spectrum {
            self.spectrum = Some(p.clone());
        }
    }

    pub fn resolve(config: Option<&Path>, overrides: &Overrides) -> Result<Params, ConfigError> {
        let mut params = Params::default();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            params.apply_file(&parse_config(&text)?)?;
        }
        params.apply_overrides(overrides);
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [("omega_c", self.omega_c), ("beta", self.beta)];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(ConfigError(format!("{name} must be > 0, got {v}")));
            }
        }
        let nonnegative = [
            ("alpha", self.alpha),
            ("omega_co", self.omega_co),
            ("gamma_white", self.gamma_white),
            ("time", self.time),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.n == 0 {
            return Err(ConfigError("n must be >= 1".into()));
        }
        if !(0.0..=FRAC_PI_2 + 1e-12).contains(&self.theta) {
            return Err(ConfigError(format!("theta must lie in [0, π/2], got {}", self.theta)));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<SpectralModel, ConfigError> {
        let built = match &self.spectrum {
            Some(path) => TabulatedSpectrum::load(path)
                .and_then(|s| SpectralModel::tabulated(s, self.omega_co, self.gamma_white)),
            None => SpectralModel::ohmic(self.alpha, self.omega_c, self.omega_co, self.gamma_white),
        };
        built.map_err(|e| ConfigError(e.to_string()))
    }

    /// Key/value description for output headers.
    pub fn describe(&self) -> String {
        let spectrum = match &self.spectrum {
            Some(p) => format!("tabulated:{}", p.display()),
            None => format!("ohmic alpha={} omega_c={}", self.alpha, self.omega_c),
        };
        format!(
            "{spectrum} omega_co={} gamma_white={} beta={} n={} theta={} time={} shots={} seed={}",
            self.omega_co, self.gamma_white, self.beta, self.n, self.theta, self.time, self.shots, self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let entries = parse_config("# comment\nn = 3\nbeta=2.5 # trailing\n\nomega-co = 0.2\n").unwrap();
        let mut p = Params::default();
        p.apply_file(&entries).unwrap();
        assert_eq!((p.n, p.beta, p.omega_co), (3, 2.5, 0.2));
        p.apply_overrides(&Overrides {
            n: Some(5),
            ..Default::default()
        });
        assert_eq!((p.n, p.beta), (5, 2.5));
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(parse_config("n 3").is_err());
        assert!(parse_config("n=1\nn=2").is_err());
        let mut p = Params::default();
        assert!(p.apply_file(&parse_config("colour=red").unwrap()).is_err());
        assert!(p.apply_file(&parse_config("n=three").unwrap()).is_err());
    }

    #[test]
    fn validation() {
        let p = Params {
            beta: -1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(Params::default().validate().is_ok());
    }
}
