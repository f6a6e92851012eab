//! Scenario configuration and its validation.
//!
//! Units: hbar = 1, m = 1 (or c = 1 in relativistic mode), lengths in launch
//! half-widths w0. The only physical knob is `epsilon` = lambda0 / w0.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{PotentialField, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    NonRelativistic,
    Relativistic,
    /// Non-relativistic dynamics with the wave potential forced to zero.
    Classical,
}

impl Mode {
    pub fn has_wave_potential(self) -> bool {
        self != Mode::Classical
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    pub epsilon: f64,
    pub launch: LaunchProfile,
    pub potential: PotentialSpec,
    pub n_rays: usize,
    pub z_max: f64,
    pub dt_control: DtControl,
    /// m0 c^2 in units of the non-relativistic energy p0^2 / 2.
    #[serde(default)]
    pub rest_mass_energy: f64,
    #[serde(default)]
    pub output: OutputControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchProfile {
    pub shape: Shape,
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default = "default_span")]
    pub span: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Gaussian,
    /// Super-Gaussian exp(-x^4).
    BellNonGaussian,
    Uniform,
    /// (x, R0) pairs, linearly interpolated, zero outside the table.
    Tabulated(Vec<(f64, f64)>),
}

impl Shape {
    /// Unnormalized launch amplitude at transverse position `x`.
    pub fn amplitude(&self, x: f64) -> f64 {
        match self {
            Shape::Gaussian => (-x * x).exp(),
            Shape::BellNonGaussian => (-(x * x) * (x * x)).exp(),
            Shape::Uniform => 1.0,
            Shape::Tabulated(table) => {
                let n = table.len();
                if n == 0 || x < table[0].0 || x > table[n - 1].0 {
                    return 0.0;
                }
                let i = table.partition_point(|&(xi, _)| xi <= x).clamp(1, n - 1);
                let (x0, r0) = table[i - 1];
                let (x1, r1) = table[i];
                r0 + (r1 - r0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtControl {
    /// Upper bound on the first step.
    pub initial: f64,
    /// Multiplier on the dispersive step bound sigma_min^2 * m_eff.
    pub safety: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputControl {
    /// Record every `stride`-th step (the launch and final states are always kept).
    pub stride: usize,
    pub directory: PathBuf,
    pub plot: bool,
}

impl Default for OutputControl {
    fn default() -> Self {
        OutputControl {
            stride: 10,
            directory: PathBuf::from("out"),
            plot: false,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_span() -> f64 {
    4.0
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario> {
        serde_json::from_str(text).map_err(|e| Error::invalid("scenario", e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Reads, parses and validates a scenario file. Relative grid paths are
/// resolved against the file's directory.
pub fn load_scenario(path: &Path) -> Result<ValidatedScenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid("scenario", format!("cannot read {}: {e}", path.display())))?;
    let scenario = Scenario::from_json_str(&text)?;
    validate_scenario_in(scenario, path.parent())
}

/// A scenario whose invariants hold, with its potential ready to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedScenario {
    scenario: Scenario,
    potential: PotentialField,
}

pub fn validate_scenario(s: Scenario) -> Result<ValidatedScenario> {
    validate_scenario_in(s, None)
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be > 0"))
    }
}

pub fn validate_scenario_in(s: Scenario, base_dir: Option<&Path>) -> Result<ValidatedScenario> {
    positive("epsilon", s.epsilon)?;
    check_launch(&s.launch)?;
    let potential = s.potential.build(base_dir)?;
    if s.n_rays < 9 || s.n_rays % 2 == 0 {
        return Err(Error::invalid("n_rays", "must be odd and ≥ 9"));
    }
    positive("z_max", s.z_max)?;
    positive("dt_control.initial", s.dt_control.initial)?;
    positive("dt_control.safety", s.dt_control.safety)?;
    positive("dt_control.max", s.dt_control.max)?;
    if s.mode == Mode::Relativistic && !(s.rest_mass_energy.is_finite() && s.rest_mass_energy >= 0.0) {
        return Err(Error::invalid("rest_mass_energy", "must be ≥ 0"));
    }
    if s.output.stride == 0 {
        return Err(Error::invalid("output.stride", "must be ≥ 1"));
    }
    Ok(ValidatedScenario { scenario: s, potential })
}

fn check_launch(l: &LaunchProfile) -> Result<()> {
    if l.half_width != 1.0 {
        return Err(Error::invalid(
            "launch.half_width",
            "is the length unit and must be 1.0",
        ));
    }
    if !(l.span.is_finite() && l.span >= 2.0) {
        return Err(Error::invalid("launch.span", "must be ≥ 2"));
    }
    if let Shape::Tabulated(table) = &l.shape {
        let field = "launch.shape";
        if table.len() < 9 {
            return Err(Error::invalid(field, "table needs at least 9 points"));
        }
        if table.iter().any(|&(x, r)| !x.is_finite() || !r.is_finite() || r < 0.0) {
            return Err(Error::invalid(field, "table values must be finite with R0 ≥ 0"));
        }
        if table.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid(field, "table x must be strictly increasing"));
        }
    }
    Ok(())
}

impl ValidatedScenario {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn potential(&self) -> &PotentialField {
        &self.potential
    }

    pub fn into_scenario(self) -> Scenario {
        self.scenario
    }

    /// The same scenario under another mode.
    pub fn with_mode(&self, mode: Mode) -> Result<ValidatedScenario> {
        let mut s = self.scenario.clone();
        s.mode = mode;
        if mode == Mode::Relativistic && !(s.rest_mass_energy.is_finite() && s.rest_mass_energy >= 0.0) {
            return Err(Error::invalid("rest_mass_energy", "must be ≥ 0"));
        }
        Ok(ValidatedScenario {
            scenario: s,
            potential: self.potential.clone(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.scenario.mode
    }

    pub fn lambda0(&self) -> f64 {
        self.scenario.epsilon
    }

    /// Launch momentum magnitude p0 = k0 = 2 pi / lambda0.
    pub fn p0(&self) -> f64 {
        2.0 * PI / self.scenario.epsilon
    }

    /// z_R = pi w0^2 / lambda0.
    pub fn rayleigh_length(&self) -> f64 {
        PI / self.scenario.epsilon
    }

    /// m0 c^2 in natural units.
    pub fn rest_energy(&self) -> f64 {
        match self.scenario.mode {
            Mode::Relativistic => self.scenario.rest_mass_energy * 0.5 * self.p0().powi(2),
            _ => 0.0,
        }
    }

    /// The energy E entering the equations of motion: p0^2 / 2 for the
    /// non-relativistic modes, sqrt(p0^2 + (m0 c^2)^2) for relativistic mode.
    pub fn energy(&self) -> f64 {
        let p0 = self.p0();
        match self.scenario.mode {
            Mode::Relativistic => p0.hypot(self.rest_energy()),
            _ => 0.5 * p0 * p0,
        }
    }
}
