//! Shipped scenario presets and the acceptance criteria run against them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::bundle::{launch_bundle, TrajectoryRecord};
use crate::dynamics::{run, RunOutcome};
use crate::error::{Error, Result};
use crate::oracle::{
    angular_spectrum_propagate, bundle_intensity_at_plane, first_off_axis_peak, fringe_count, gaussian_waist,
    linf_on_support, min_half_width, FieldProfile, DEFAULT_PROMINENCE, FRINGE_PROMINENCE,
};
use crate::potentials::{LensSlab, PotentialKind, PotentialSpec};
use crate::scenario::{
    validate_scenario, DtControl, LaunchProfile, Mode, OutputControl, Scenario, Shape, ValidatedScenario,
};

const EPSILON: f64 = 1e-4;

fn z_r() -> f64 {
    PI / EPSILON
}

/// Gaussian launch carried to three Rayleigh lengths.
pub fn fig1_gaussian() -> Scenario {
    Scenario {
        mode: Mode::NonRelativistic,
        epsilon: EPSILON,
        launch: LaunchProfile {
            shape: Shape::Gaussian,
            half_width: 1.0,
            span: 4.0,
        },
        potential: PotentialSpec::free(),
        n_rays: 201,
        z_max: 3.0 * z_r(),
        dt_control: DtControl {
            initial: 1e-4,
            safety: 0.5,
            max: 1e-2,
        },
        rest_mass_energy: 0.0,
        output: OutputControl {
            stride: 10,
            directory: "out/fig1".into(),
            plot: true,
        },
    }
}

/// Super-Gaussian launch carried just past two Rayleigh lengths.
pub fn fig2_bell() -> Scenario {
    Scenario {
        mode: Mode::NonRelativistic,
        epsilon: EPSILON,
        launch: LaunchProfile {
            shape: Shape::BellNonGaussian,
            half_width: 1.0,
            span: 2.2,
        },
        potential: PotentialSpec::free(),
        n_rays: 1601,
        z_max: 63000.0,
        dt_control: DtControl {
            initial: 1e-4,
            safety: 2.0,
            max: 1e-2,
        },
        rest_mass_energy: 0.0,
        output: OutputControl {
            stride: 1000,
            directory: "out/fig2".into(),
            plot: true,
        },
    }
}

/// Gaussian launch through a focusing slab between 0.1 and 0.3 of the run.
pub fn fig3_lens() -> Scenario {
    let z_max = z_r();
    Scenario {
        mode: Mode::NonRelativistic,
        epsilon: EPSILON,
        launch: LaunchProfile {
            shape: Shape::Gaussian,
            half_width: 1.0,
            span: 4.0,
        },
        potential: PotentialSpec {
            kind: PotentialKind::LensSlab {
                strength: 56.8087,
                z_on: 0.1 * z_max,
                z_off: 0.3 * z_max,
                aperture: 20.0,
            },
        },
        n_rays: 201,
        z_max,
        dt_control: DtControl {
            initial: 1e-4,
            safety: 0.5,
            max: 1e-2,
        },
        rest_mass_energy: 0.0,
        output: OutputControl {
            stride: 10,
            directory: "out/fig3".into(),
            plot: true,
        },
    }
}

/// Named groups of criteria accepted by `validate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Waist,
    Oracle,
    Energy,
    Limits,
    All,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Waist => &[1],
            Suite::Oracle => &[2, 3, 8],
            Suite::Energy => &[4],
            Suite::Limits => &[5, 6, 7],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        Ok(match s {
            "waist" => Suite::Waist,
            "oracle" => Suite::Oracle,
            "energy" => Suite::Energy,
            "limits" => Suite::Limits,
            "all" => Suite::All,
            _ => {
                return Err(Error::invalid(
                    "suite",
                    "must be one of waist, oracle, energy, limits, all",
                ))
            }
        })
    }
}

/// Bound a measured value must satisfy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    AtMost(f64),
    AtLeast(f64),
    Exactly(f64),
    Within(f64, f64),
}

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e6 {
        format!("{v}")
    } else {
        format!("{v:.4e}")
    }
}

impl Limit {
    pub fn holds(self, v: f64) -> bool {
        match self {
            Limit::AtMost(b) => v <= b,
            Limit::AtLeast(b) => v >= b,
            Limit::Exactly(b) => v == b,
            Limit::Within(lo, hi) => v >= lo && v <= hi,
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::AtMost(b) => write!(f, "<= {}", number(*b)),
            Limit::AtLeast(b) => write!(f, ">= {}", number(*b)),
            Limit::Exactly(b) => write!(f, "== {}", number(*b)),
            Limit::Within(lo, hi) => write!(f, "in [{}, {}]", number(*lo), number(*hi)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub quantity: String,
    pub measured: f64,
    pub limit: Limit,
}

impl Check {
    fn new(quantity: impl Into<String>, measured: f64, limit: Limit) -> Self {
        Check {
            quantity: quantity.into(),
            measured,
            limit,
        }
    }

    pub fn passed(&self) -> bool {
        self.limit.holds(self.measured)
    }
}

/// Result of one acceptance criterion: every check must hold and no run may
/// have failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

impl CriterionOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} {}:", self.id, self.name)?;
        for (k, c) in self.checks.iter().enumerate() {
            let sep = if k == 0 { " " } else { "; " };
            write!(f, "{sep}{} = {} ({})", c.quantity, number(c.measured), c.limit)?;
        }
        if let Some(e) = &self.error {
            write!(f, " error: {e}")?;
        }
        Ok(())
    }
}

pub fn criterion_name(id: u8) -> &'static str {
    match id {
        1 => "waist law",
        2 => "gaussian oracle",
        3 => "far-field fringes",
        4 => "energy conservation",
        5 => "classical limit",
        6 => "lens contrast",
        7 => "relativistic limits",
        8 => "stencil convergence",
        _ => "unknown",
    }
}

/// Scenario runs shared between criteria, each computed at most once.
#[derive(Default)]
pub struct Runs {
    fig1: OnceLock<RunOutcome>,
    fig2: OnceLock<RunOutcome>,
    lens_wave: OnceLock<RunOutcome>,
    lens_classical: OnceLock<RunOutcome>,
    free_classical: OnceLock<RunOutcome>,
    harmonic: OnceLock<RunOutcome>,
    heavy: OnceLock<RunOutcome>,
    massless_flat: OnceLock<RunOutcome>,
    massless_wave: OnceLock<RunOutcome>,
}

fn validated(s: Scenario) -> ValidatedScenario {
    validate_scenario(s).expect("preset scenarios are valid")
}

fn record(cell: &OnceLock<RunOutcome>, make: impl FnOnce() -> Scenario) -> Result<&TrajectoryRecord> {
    let out = cell.get_or_init(|| run(&validated(make())));
    match &out.error {
        Some(e) => Err(e.clone()),
        None => Ok(&out.record),
    }
}

/// Times scale with the inertia E - V in relativistic mode; stretch the step
/// bounds by `factor` so the spatial resolution matches the base run.
fn stretched(mut s: Scenario, factor: f64) -> Scenario {
    s.dt_control.initial *= factor;
    s.dt_control.max *= factor;
    s
}

fn relativistic(mut s: Scenario, rest_mass_energy: f64) -> Scenario {
    s.mode = Mode::Relativistic;
    s.rest_mass_energy = rest_mass_energy;
    let e = validated(s.clone()).energy();
    stretched(s, e)
}

const HARMONIC_STRENGTH: f64 = 4.0 * PI * PI;

impl Runs {
    pub fn new() -> Self {
        Runs::default()
    }

    fn fig1(&self) -> Result<&TrajectoryRecord> {
        record(&self.fig1, fig1_gaussian)
    }

    fn fig2(&self) -> Result<&TrajectoryRecord> {
        record(&self.fig2, fig2_bell)
    }

    fn lens(&self, mode: Mode) -> Result<&TrajectoryRecord> {
        let cell = if mode == Mode::Classical {
            &self.lens_classical
        } else {
            &self.lens_wave
        };
        record(cell, || Scenario { mode, ..fig3_lens() })
    }

    fn free_classical(&self) -> Result<&TrajectoryRecord> {
        record(&self.free_classical, || Scenario {
            mode: Mode::Classical,
            ..fig1_gaussian()
        })
    }

    /// Half an oscillation period of a classical harmonic channel.
    fn harmonic(&self) -> Result<&TrajectoryRecord> {
        record(&self.harmonic, || {
            let base = fig1_gaussian();
            Scenario {
                mode: Mode::Classical,
                potential: PotentialSpec::harmonic(HARMONIC_STRENGTH),
                z_max: z_r(),
                dt_control: DtControl {
                    max: 1e-4,
                    ..base.dt_control
                },
                output: OutputControl {
                    stride: 50,
                    ..base.output
                },
                ..base
            }
        })
    }

    fn heavy(&self) -> Result<&TrajectoryRecord> {
        record(&self.heavy, || relativistic(fig1_gaussian(), 1e6))
    }

    fn massless_flat(&self) -> Result<&TrajectoryRecord> {
        record(&self.massless_flat, || {
            let mut s = fig1_gaussian();
            s.launch.shape = Shape::Uniform;
            s.z_max = z_r();
            relativistic(s, 0.0)
        })
    }

    fn massless_wave(&self) -> Result<&TrajectoryRecord> {
        record(&self.massless_wave, || relativistic(fig1_gaussian(), 0.0))
    }
}

/// Evaluates the given criteria concurrently, in the order requested.
pub fn run_criteria(ids: &[u8]) -> Vec<CriterionOutcome> {
    let runs = Runs::new();
    ids.par_iter().map(|&id| evaluate(id, &runs)).collect()
}

pub fn run_suite(suite: Suite) -> Vec<CriterionOutcome> {
    run_criteria(suite.criteria())
}

pub fn evaluate(id: u8, runs: &Runs) -> CriterionOutcome {
    let checks = match id {
        1 => waist_law(runs),
        2 => gaussian_oracle(runs),
        3 => far_field_fringes(runs),
        4 => energy_conservation(runs),
        5 => classical_limit(runs),
        6 => lens_contrast(runs),
        7 => relativistic_limits(runs),
        8 => stencil_convergence(),
        _ => Err(Error::invalid("criterion", "unknown id")),
    };
    let (checks, error) = match checks {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    CriterionOutcome {
        id,
        name: criterion_name(id),
        checks,
        error,
    }
}

/// Transverse position of the rays launched at +-1, against the beam waist
/// at 50 evenly spaced planes.
fn waist_law(runs: &Runs) -> Result<Vec<Check>> {
    let rec = runs.fig1()?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for label in [-1.0, 1.0] {
        let i = rec.ray_nearest(label);
        let z_end = rec.samples.last().map_or(0.0, |s| s.rays[i].z);
        for k in 0..50 {
            let z = z_end * k as f64 / 49.0;
            let x = rec.x_at_z(i, z).ok_or(Error::PlaneNotReached { ray: i, z_plane: z })?;
            let ratio = x.abs() / gaussian_waist(z, EPSILON, 1.0);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok(vec![
        Check::new("min |x|/w", lo, Limit::AtLeast(0.99)),
        Check::new("max |x|/w", hi, Limit::AtMost(1.01)),
    ])
}

fn gaussian_oracle(runs: &Runs) -> Result<Vec<Check>> {
    let rec = runs.fig1()?;
    let launch = fig1_gaussian().launch;
    let field = FieldProfile::far_field_grid(|x| launch.shape.amplitude(x));
    let mut checks = Vec::new();
    for (tag, z) in [("z_R", z_r()), ("2z_R", 2.0 * z_r())] {
        let bundle = bundle_intensity_at_plane(rec, z)?;
        let oracle = angular_spectrum_propagate(&field, z, EPSILON)?;
        checks.push(Check::new(
            format!("L-inf at {tag}"),
            linf_on_support(&bundle, &oracle, 1e-3),
            Limit::AtMost(0.02),
        ));
        checks.push(Check::new(
            format!("fringes at {tag}"),
            fringe_count(&bundle, DEFAULT_PROMINENCE) as f64,
            Limit::Exactly(1.0),
        ));
    }
    Ok(checks)
}

fn far_field_fringes(runs: &Runs) -> Result<Vec<Check>> {
    let rec = runs.fig2()?;
    let z = 2.0 * z_r();
    let launch = fig2_bell().launch;
    let field = FieldProfile::far_field_grid(|x| launch.shape.amplitude(x));
    let bundle = bundle_intensity_at_plane(rec, z)?;
    let oracle = angular_spectrum_propagate(&field, z, EPSILON)?;
    let offset = match (
        first_off_axis_peak(&bundle, FRINGE_PROMINENCE),
        first_off_axis_peak(&oracle, FRINGE_PROMINENCE),
    ) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => f64::INFINITY,
    };
    Ok(vec![
        Check::new(
            "bundle fringes",
            fringe_count(&bundle, FRINGE_PROMINENCE) as f64,
            Limit::AtLeast(3.0),
        ),
        Check::new(
            "oracle fringes",
            fringe_count(&oracle, FRINGE_PROMINENCE) as f64,
            Limit::AtLeast(3.0),
        ),
        Check::new("first sidelobe offset", offset, Limit::AtMost(2.0 * field.dx())),
    ])
}

fn energy_conservation(runs: &Runs) -> Result<Vec<Check>> {
    let rec = runs.fig1()?;
    let p0 = 2.0 * PI / EPSILON;
    let max_dh = rec.report.as_ref().map_or(f64::INFINITY, |r| r.max_dh);
    let drift = rec
        .samples
        .iter()
        .flat_map(|s| &s.rays)
        .map(|r| ((r.px * r.px + r.pz * r.pz).sqrt() - p0).abs() / p0)
        .fold(0.0, f64::max);
    Ok(vec![
        Check::new("max |dH|/H", max_dh, Limit::AtMost(1e-6)),
        Check::new("max ||p| - p0|/p0", drift, Limit::AtMost(1e-8)),
    ])
}

/// Fixed-step RK4 for x'' = -k x, carried from `t0` to `t1`.
fn harmonic_oracle(k: f64, (x, p): (f64, f64), t0: f64, t1: f64) -> (f64, f64) {
    let steps = ((t1 - t0) / 1e-5).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let f = |x: f64, p: f64| (p, -k * x);
    let (mut x, mut p) = (x, p);
    for _ in 0..steps {
        let (a1, b1) = f(x, p);
        let (a2, b2) = f(x + 0.5 * h * a1, p + 0.5 * h * b1);
        let (a3, b3) = f(x + 0.5 * h * a2, p + 0.5 * h * b2);
        let (a4, b4) = f(x + h * a3, p + h * b3);
        x += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        p += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    (x, p)
}

fn classical_limit(runs: &Runs) -> Result<Vec<Check>> {
    let free = runs.free_classical()?;
    let first = &free.samples[0];
    let mut bend: f64 = 0.0;
    for s in &free.samples {
        for (r, r0) in s.rays.iter().zip(&first.rays) {
            let (dx, dz) = (r.x - r0.x, r.z - r0.z);
            let norm = (r0.px * r0.px + r0.pz * r0.pz).sqrt();
            bend = bend.max((dx * r0.pz - dz * r0.px).abs() / norm);
        }
    }

    let osc = runs.harmonic()?;
    let mut worst: f64 = 0.0;
    let mut state: Vec<(f64, f64)> = osc.samples[0].rays.iter().map(|r| (r.x, r.px)).collect();
    for w in osc.samples.windows(2) {
        for (st, r) in state.iter_mut().zip(&w[1].rays) {
            *st = harmonic_oracle(HARMONIC_STRENGTH, *st, w[0].t, w[1].t);
            worst = worst.max((r.x - st.0).abs());
        }
    }
    Ok(vec![
        Check::new("free deviation from line", bend, Limit::AtMost(1e-10)),
        Check::new("harmonic |x - x_ode|", worst, Limit::AtMost(1e-10)),
    ])
}

/// z where a paraxial ray launched parallel to the axis first crosses it,
/// from a fixed-step RK4 of x'' = -(k / p0^2) B(z) x.
pub fn paraxial_focus(lens: &LensSlab, p0: f64, z_max: f64) -> Option<f64> {
    let steps = 200_000;
    let h = z_max / steps as f64;
    let c = lens.strength / (p0 * p0);
    let f = |z: f64, x: f64, v: f64| (v, -c * lens.window(z).0 * x);
    let (mut x, mut v) = (1.0, 0.0);
    for k in 0..steps {
        let z = k as f64 * h;
        let (a1, b1) = f(z, x, v);
        let (a2, b2) = f(z + 0.5 * h, x + 0.5 * h * a1, v + 0.5 * h * b1);
        let (a3, b3) = f(z + 0.5 * h, x + 0.5 * h * a2, v + 0.5 * h * b2);
        let (a4, b4) = f(z + h, x + h * a3, v + h * b3);
        let xn = x + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        if xn <= 0.0 {
            return Some(z + h * x / (x - xn));
        }
        x = xn;
    }
    None
}

const WIDTH_PLANES: usize = 2001;

fn lens_contrast(runs: &Runs) -> Result<Vec<Check>> {
    let s = fig3_lens();
    let PotentialKind::LensSlab {
        strength,
        z_on,
        z_off,
        aperture,
    } = s.potential.kind
    else {
        unreachable!("fig3 carries a lens");
    };
    let lens = LensSlab {
        strength,
        z_on,
        z_off,
        aperture,
    };
    let wave = runs.lens(Mode::NonRelativistic)?;
    let classical = runs.lens(Mode::Classical)?;
    let w_wave = min_half_width(wave, WIDTH_PLANES).map_or(0.0, |w| w.0);
    let w_classical = min_half_width(classical, WIDTH_PLANES).map_or(f64::INFINITY, |w| w.0);
    let focus = paraxial_focus(&lens, 2.0 * PI / s.epsilon, s.z_max).unwrap_or(f64::INFINITY);
    let miss = classical
        .caustics
        .first()
        .map_or(f64::INFINITY, |c| (c.z - focus).abs() / s.z_max);
    Ok(vec![
        Check::new("wave/classical min width", w_wave / w_classical, Limit::AtLeast(10.0)),
        Check::new(
            "classical caustic events",
            classical.caustics.len() as f64,
            Limit::AtLeast(1.0),
        ),
        Check::new("|z_caustic - z_focus|/z_max", miss, Limit::AtMost(0.05)),
    ])
}

fn relativistic_limits(runs: &Runs) -> Result<Vec<Check>> {
    let base = runs.fig1()?;
    let heavy = runs.heavy()?;
    let (a, b) = (base.samples.last(), heavy.samples.last());
    let center = base.n_rays() / 2;
    let shift = match (a, b) {
        (Some(a), Some(b)) => a
            .rays
            .iter()
            .zip(&b.rays)
            .enumerate()
            .filter(|&(i, _)| i != center)
            .map(|(_, (r, q))| (r.x - q.x).abs() / r.x.abs())
            .fold(0.0, f64::max),
        _ => f64::INFINITY,
    };

    let flat = runs.massless_flat()?;
    let mut speed: f64 = 0.0;
    for w in flat.samples.windows(2) {
        let dt = w[1].t - w[0].t;
        for (r, q) in w[0].rays.iter().zip(&w[1].rays) {
            let v = ((q.x - r.x).powi(2) + (q.z - r.z).powi(2)).sqrt() / dt;
            speed = speed.max((v - 1.0).abs());
        }
    }

    let massless = runs.massless_wave()?;
    let dh = massless.report.as_ref().map_or(f64::INFINITY, |r| r.max_dh);
    Ok(vec![
        Check::new("heavy vs non-relativistic x", shift, Limit::AtMost(1e-4)),
        Check::new("massless ||v| - c|", speed, Limit::AtMost(1e-12)),
        Check::new("massless max |dH|/H", dh, Limit::AtMost(1e-6)),
    ])
}

/// Ray counts giving launch spacings 0.1, 0.05 and 0.025 over [-4, 4].
pub const STENCIL_RAYS: [usize; 3] = [81, 161, 321];

/// Max |W - W_exact| over |x| <= 2 on a Gaussian launch, where
/// W_exact = -(1/2) R''/R = 1 - 2x^2.
pub fn stencil_error(n_rays: usize) -> Result<f64> {
    let vs = validate_scenario(Scenario {
        n_rays,
        ..fig1_gaussian()
    })?;
    let b = launch_bundle(&vs)?;
    Ok(b.rays
        .iter()
        .zip(&b.w_values)
        .filter(|(r, _)| r.x.abs() <= 2.0)
        .map(|(r, w)| (w - (1.0 - 2.0 * r.x * r.x)).abs())
        .fold(0.0, f64::max))
}

/// Least-squares slope of log(error) against log(h).
pub fn fitted_order(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn stencil_convergence() -> Result<Vec<Check>> {
    let span = fig1_gaussian().launch.span;
    let h: Vec<f64> = STENCIL_RAYS.iter().map(|&n| 2.0 * span / (n - 1) as f64).collect();
    let err = STENCIL_RAYS
        .iter()
        .map(|&n| stencil_error(n))
        .collect::<Result<Vec<_>>>()?;
    let slope = fitted_order(&h, &err);
    Ok(vec![Check::new("fitted order", slope, Limit::Within(1.8, 2.2))])
}
