//! Bath noise spectra.
//!
//! A [`SpectralModel`] bundles the temperature-dependent spectral density `J(ω)`, the
//! cooperative crossover frequency `ω_co` below which the noise is common to all
//! thermometers, and the strength `γ` of the temperature-independent white noise.
//! Cross-thermometer spectra are `J(ω)` below `ω_co` and zero above it (a hard step).

use std::path::Path;

use crate::error::{Error, Result};

/// Upper integration limit for the Ohmic spectrum in units of the cutoff frequency.
/// The integrand carries `e^{-ω/ω_c}`, so the neglected tail is below `e^{-50}` relative.
pub const OHMIC_CUTOFF_MULTIPLE: f64 = 50.0;

/// Piecewise-linear spectrum sampled on a strictly increasing frequency grid.
/// Zero outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedSpectrum {
    omega: Vec<f64>,
    density: Vec<f64>,
}

impl TabulatedSpectrum {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("tabulated spectrum needs at least two points"));
        }
        let (omega, density): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if omega[0] < 0.0 || !omega.iter().all(|w| w.is_finite()) {
            return Err(Error::domain("tabulated frequencies must be finite and nonnegative"));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("tabulated frequencies must be strictly increasing"));
        }
        if density.iter().any(|&j| !(j.is_finite() && j >= 0.0)) {
            return Err(Error::domain("tabulated J(ω) must be finite and nonnegative"));
        }
        Ok(TabulatedSpectrum { omega, density })
    }

    /// Parses the two-column text format: `ω J(ω)` per line, whitespace separated,
    /// `#` starts a comment, blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected two columns, found {}", cols.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("{s:?}: {e}"),
                })
            };
            points.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn upper(&self) -> f64 {
        *self.omega.last().expect("at least two points")
    }

    fn eval(&self, w: f64) -> f64 {
        let (first, last) = (self.omega[0], self.upper());
        if w < first || w > last {
            return 0.0;
        }
        let i = match self.omega.partition_point(|&x| x <= w) {
            0 => 0,
            k if k >= self.omega.len() => self.omega.len() - 2,
            k => k - 1,
        };
        let (w0, w1) = (self.omega[i], self.omega[i + 1]);
        let (j0, j1) = (self.density[i], self.density[i + 1]);
        j0 + (j1 - j0) * (w - w0) / (w1 - w0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralKind {
    /// `J(ω) = α ω e^{-ω/ω_c}`.
    Ohmic { alpha: f64, omega_c: f64 },
    Tabulated(TabulatedSpectrum),
}

/// Spectral description of the bath seen by the thermometers.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    kind: SpectralKind,
    omega_co: f64,
    gamma_white: f64,
}

impl SpectralModel {
    pub fn ohmic(alpha: f64, omega_c: f64, omega_co: f64, gamma_white: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::domain(format!("omega_c must be > 0, got {omega_c}")));
        }
        Self::build(SpectralKind::Ohmic { alpha, omega_c }, omega_co, gamma_white)
    }

    pub fn tabulated(spectrum: TabulatedSpectrum, omega_co: f64, gamma_white: f64) -> Result<Self> {
        Self::build(SpectralKind::Tabulated(spectrum), omega_co, gamma_white)
    }

    fn build(kind: SpectralKind, omega_co: f64, gamma_white: f64) -> Result<Self> {
        if !(omega_co >= 0.0 && omega_co.is_finite()) {
            return Err(Error::domain(format!("omega_co must be finite and >= 0, got {omega_co}")));
        }
        if !(gamma_white >= 0.0 && gamma_white.is_finite()) {
            return Err(Error::domain(format!("gamma_white must be >= 0, got {gamma_white}")));
        }
        let model = SpectralModel {
            kind,
            omega_co,
            gamma_white,
        };
        if omega_co > model.support_upper() {
            return Err(Error::domain(format!(
                "omega_co = {omega_co} exceeds the spectral support ({})",
                model.support_upper()
            )));
        }
        Ok(model)
    }

    pub fn kind(&self) -> &SpectralKind {
        &self.kind
    }

    pub fn omega_co(&self) -> f64 {
        self.omega_co
    }

    pub fn gamma_white(&self) -> f64 {
        self.gamma_white
    }

    /// Copy of the model with a different white-noise rate.
    pub fn with_gamma_white(&self, gamma_white: f64) -> Result<Self> {
        Self::build(self.kind.clone(), self.omega_co, gamma_white)
    }

    /// Copy of the model with a different crossover frequency.
    pub fn with_omega_co(&self, omega_co: f64) -> Result<Self> {
        Self::build(self.kind.clone(), omega_co, self.gamma_white)
    }

    /// Largest frequency carrying spectral weight (the integration limit).
    pub fn support_upper(&self) -> f64 {
        match &self.kind {
            SpectralKind::Ohmic { omega_c, .. } => OHMIC_CUTOFF_MULTIPLE * omega_c,
            SpectralKind::Tabulated(tab) => tab.upper(),
        }
    }

    /// Frequencies where the integrand changes character; used to seed adaptive quadrature.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![self.omega_co];
        match &self.kind {
            SpectralKind::Ohmic { omega_c, .. } => {
                pts.extend([1.0, 5.0, 20.0].map(|m| m * omega_c));
            }
            SpectralKind::Tabulated(tab) => pts.extend_from_slice(tab.omega()),
        }
        pts
    }

    /// `J(ω)`.
    pub fn evaluate_j(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::domain(format!("frequency must be >= 0, got {omega}")));
        }
        Ok(self.j_unchecked(omega))
    }

    /// Cross-spectrum `J_ij(ω)`: full `J` on the diagonal or below the crossover, zero otherwise.
    pub fn cooperative_j(&self, omega: f64, same_thermometer: bool) -> Result<f64> {
        let j = self.evaluate_j(omega)?;
        if same_thermometer || omega <= self.omega_co {
            Ok(j)
        } else {
            Ok(0.0)
        }
    }

    pub(crate) fn j_unchecked(&self, omega: f64) -> f64 {
        match &self.kind {
            SpectralKind::Ohmic { alpha, omega_c } => alpha * omega * (-omega / omega_c).exp(),
            SpectralKind::Tabulated(tab) => tab.eval(omega),
        }
    }

    /// `J(ω)/ω`, finite as `ω → 0` for spectra vanishing at the origin.
    pub(crate) fn j_over_omega(&self, omega: f64) -> f64 {
        match &self.kind {
            SpectralKind::Ohmic { alpha, omega_c } => alpha * (-omega / omega_c).exp(),
            SpectralKind::Tabulated(tab) => tab.eval(omega) / omega,
        }
    }

    /// `J(0⁺)`, nonzero only for tabulated spectra starting at the origin with weight.
    pub(crate) fn weight_at_origin(&self) -> f64 {
        match &self.kind {
            SpectralKind::Ohmic { .. } => 0.0,
            SpectralKind::Tabulated(tab) if tab.omega[0] == 0.0 => tab.density[0],
            SpectralKind::Tabulated(_) => 0.0,
        }
    }
}
