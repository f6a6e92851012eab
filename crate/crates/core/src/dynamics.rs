//! Time integration of the coupled bundle.

use serde::{Deserialize, Serialize};

use crate::bundle::{launch_bundle, Bundle, CausticEvent, Ray, RaySample, Sample, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::potentials::PotentialField;
use crate::scenario::{Mode, ValidatedScenario};
use crate::vec2::Vec2;
use crate::wavefield::{self, WaveContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: f64,
    pub dt_used: f64,
    /// Running max over rays and steps of |H - H_launch| / |H_launch|.
    pub max_dh: f64,
    pub caustic_events: usize,
}

/// Time derivatives of one ray's position and momentum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RayDerivative {
    pub dr: Vec2,
    pub dp: Vec2,
}

/// dr/dt = p, dp/dt = -grad V - grad W.
pub fn derivatives_nonrel(b: &Bundle, v: &PotentialField) -> Result<Vec<RayDerivative>> {
    b.rays
        .iter()
        .zip(&b.w_grad)
        .map(|(ray, gw)| {
            let s = v.eval(ray.x, ray.z)?;
            Ok(RayDerivative {
                dr: ray.momentum(),
                dp: Vec2::new(-s.dv_dx, -s.dv_dz) - *gw,
            })
        })
        .collect()
}

/// dr/dt = p / (E - V), dp/dt = -grad V - E / (E - V) grad W, with c = 1.
pub fn derivatives_rel(b: &Bundle, v: &PotentialField, energy: f64) -> Result<Vec<RayDerivative>> {
    b.rays
        .iter()
        .zip(&b.w_grad)
        .enumerate()
        .map(|(i, (ray, gw))| {
            let s = v.eval(ray.x, ray.z)?;
            let gap = energy - s.v;
            if !(gap.abs() >= 1e-9 * energy.abs()) {
                return Err(Error::SingularGuidance { ray: i, gap: gap.abs() });
            }
            Ok(RayDerivative {
                dr: ray.momentum() * (1.0 / gap),
                dp: Vec2::new(-s.dv_dx, -s.dv_dz) - *gw * (energy / gap),
            })
        })
        .collect()
}

/// H = p^2/2 + W + V (non-relativistic and classical), or
/// H = V + sqrt(p^2 + (m0 c^2)^2 + 2 E W) (relativistic, c = 1).
pub fn hamiltonian(ray: &Ray, w: f64, v: f64, mode: Mode, energy: f64, rest_energy: f64) -> Result<f64> {
    let p2 = ray.px * ray.px + ray.pz * ray.pz;
    match mode {
        Mode::NonRelativistic | Mode::Classical => Ok(0.5 * p2 + w + v),
        Mode::Relativistic => {
            let radicand = p2 + rest_energy * rest_energy + 2.0 * energy * w;
            if radicand < 0.0 {
                return Err(Error::ImaginaryRoot { radicand });
            }
            Ok(v + radicand.sqrt())
        }
    }
}

/// Owns the fixed physics of a run and the running conservation monitors.
#[derive(Debug, Clone)]
pub struct Propagator {
    ctx: WaveContext,
    potential: PotentialField,
    energy: f64,
    rest_energy: f64,
    /// Launch spacing, the length scale for classical step control.
    launch_spacing: f64,
    safety: f64,
    h_launch: Vec<f64>,
    max_dh: f64,
    crossed: Vec<bool>,
    caustics: Vec<CausticEvent>,
}

impl Propagator {
    /// `launch` must be freshly launched (or refreshed) for this scenario.
    pub fn new(vs: &ValidatedScenario, launch: &Bundle) -> Result<Self> {
        let s = vs.scenario();
        let mut prop = Propagator {
            ctx: WaveContext::new(vs),
            potential: vs.potential().clone(),
            energy: vs.energy(),
            rest_energy: vs.rest_energy(),
            launch_spacing: 2.0 * s.launch.span / (s.n_rays - 1) as f64,
            safety: s.dt_control.safety,
            h_launch: Vec::new(),
            max_dh: 0.0,
            crossed: vec![false; launch.len().saturating_sub(1)],
            caustics: Vec::new(),
        };
        prop.h_launch = prop.energies(launch)?;
        Ok(prop)
    }

    pub fn context(&self) -> &WaveContext {
        &self.ctx
    }

    pub fn caustics(&self) -> &[CausticEvent] {
        &self.caustics
    }

    pub fn max_dh(&self) -> f64 {
        self.max_dh
    }

    pub fn derivatives(&self, b: &Bundle) -> Result<Vec<RayDerivative>> {
        match self.ctx.mode {
            Mode::Relativistic => derivatives_rel(b, &self.potential, self.energy),
            _ => derivatives_nonrel(b, &self.potential),
        }
    }

    /// Per-ray Hamiltonian of a refreshed bundle.
    pub fn energies(&self, b: &Bundle) -> Result<Vec<f64>> {
        b.rays
            .iter()
            .zip(&b.w_values)
            .map(|(ray, &w)| {
                let v = self.potential.eval(ray.x, ray.z)?.v;
                hamiltonian(ray, w, v, self.ctx.mode, self.energy, self.rest_energy)
            })
            .collect()
    }

    /// Effective inertia of ray `i`: 1, or E - V in relativistic mode.
    fn inertia(&self, ray: &Ray) -> Result<f64> {
        Ok(match self.ctx.mode {
            Mode::Relativistic => self.energy - self.potential.eval(ray.x, ray.z)?.v,
            _ => 1.0,
        })
    }

    /// Length scale against which per-step displacements are judged.
    fn local_spacing(&self, b: &Bundle, i: usize) -> f64 {
        if self.ctx.mode.has_wave_potential() {
            b.sigma[i]
        } else {
            self.launch_spacing
        }
    }

    /// Largest stable step for the refreshed bundle `b` with derivatives `k1`:
    /// the dispersive limit safety * sigma_min^2 * inertia of the wave
    /// coupling, neighbors closing by at most a tenth of their gap, and
    /// accelerations bending a ray by at most a tenth of the spacing.
    pub fn stable_dt(&self, b: &Bundle, k1: &[RayDerivative]) -> Result<f64> {
        let n = b.len();
        let mut dt = f64::INFINITY;
        let wave = self.ctx.mode.has_wave_potential();
        let mut min_inertia = f64::INFINITY;
        let mut max_acc: f64 = 0.0;
        for (ray, k) in b.rays.iter().zip(k1) {
            let m = self.inertia(ray)?;
            min_inertia = min_inertia.min(m.abs());
            max_acc = max_acc.max(k.dp.norm() / m.abs());
        }
        let spacing = if wave {
            b.sigma.iter().cloned().fold(f64::INFINITY, f64::min)
        } else {
            self.launch_spacing
        };
        if wave {
            dt = dt.min(self.safety * spacing * spacing * min_inertia);
            for j in 0..n - 1 {
                let d = b.rays[j + 1].position() - b.rays[j].position();
                let gap = d.norm();
                let closing = -(k1[j + 1].dr - k1[j].dr).dot(d) / gap;
                if closing > 0.0 {
                    dt = dt.min(0.1 * gap / closing);
                }
            }
        }
        if max_acc > 0.0 {
            dt = dt.min((0.2 * spacing / max_acc).sqrt());
        }
        Ok(dt)
    }

    /// Displacement of every ray away from ballistic motion over `tau`.
    fn check_deviation(&self, b: &Bundle, k1: &[RayDerivative], k: &[RayDerivative], tau: f64, dt: f64) -> Result<()> {
        for i in 0..b.len() {
            let dev = ((k[i].dr - k1[i].dr) * tau).norm();
            let sigma = self.local_spacing(b, i);
            let finite = k[i].dr.is_finite() && k[i].dp.is_finite();
            if !finite || !(dev <= 0.5 * sigma) {
                return Err(Error::StepTooLarge {
                    t: b.t,
                    dt,
                    ray: i,
                    deviation: dev,
                    sigma,
                });
            }
        }
        Ok(())
    }

    fn advance(b: &Bundle, k: &[RayDerivative], tau: f64) -> Bundle {
        let mut out = b.clone();
        out.t = b.t + tau;
        for (ray, d) in out.rays.iter_mut().zip(k) {
            ray.x += tau * d.dr.x;
            ray.z += tau * d.dr.z;
            ray.px += tau * d.dp.x;
            ray.pz += tau * d.dp.z;
        }
        out
    }

    /// One classical RK4 step of the whole coupled bundle; sigma, R, W and
    /// grad W are recomputed at every stage.
    pub fn step(&mut self, b: &Bundle, dt: f64) -> Result<(Bundle, StepReport)> {
        let k1 = self.derivatives(b)?;
        self.step_with(b, &k1, dt)
    }

    /// As [`Propagator::step`] with the first-stage derivatives supplied.
    pub fn step_with(&mut self, b: &Bundle, k1: &[RayDerivative], dt: f64) -> Result<(Bundle, StepReport)> {
        let stage_k = |k_prev: &[RayDerivative], tau: f64| -> Result<Vec<RayDerivative>> {
            self.check_deviation(b, k1, k_prev, tau, dt)?;
            let mut s = Self::advance(b, k_prev, tau);
            wavefield::refresh(&mut s, &self.ctx)?;
            self.derivatives(&s)
        };
        let k2 = stage_k(k1, 0.5 * dt)?;
        let k3 = stage_k(&k2, 0.5 * dt)?;
        let k4 = stage_k(&k3, dt)?;

        let combined: Vec<RayDerivative> = (0..b.len())
            .map(|i| RayDerivative {
                dr: (k1[i].dr + (k2[i].dr + k3[i].dr) * 2.0 + k4[i].dr) * (1.0 / 6.0),
                dp: (k1[i].dp + (k2[i].dp + k3[i].dp) * 2.0 + k4[i].dp) * (1.0 / 6.0),
            })
            .collect();
        self.check_deviation(b, k1, &combined, dt, dt)?;
        let mut next = Self::advance(b, &combined, dt);
        next.t = b.t + dt;
        let scan = wavefield::refresh(&mut next, &self.ctx)?;

        let mut now = vec![false; self.crossed.len()];
        for &(j, _) in &scan.crossings {
            now[j] = true;
            if !self.crossed[j] {
                let c = &next.rays[next.center()];
                self.caustics.push(CausticEvent {
                    t: next.t,
                    z: c.z,
                    x: 0.5 * (next.rays[j].x + next.rays[j + 1].x),
                    left: j,
                });
            }
        }
        self.crossed = now;

        for (h, h0) in self.energies(&next)?.iter().zip(&self.h_launch) {
            let rel = (h - h0).abs() / h0.abs();
            if rel > self.max_dh || rel.is_nan() {
                self.max_dh = rel;
            }
        }
        let report = StepReport {
            t: next.t,
            dt_used: dt,
            max_dh: self.max_dh,
            caustic_events: self.caustics.len(),
        };
        Ok((next, report))
    }

    fn sample(&self, b: &Bundle) -> Result<Sample> {
        let h = self.energies(b)?;
        Ok(Sample {
            t: b.t,
            rays: b
                .rays
                .iter()
                .zip(&b.w_values)
                .zip(h)
                .map(|((r, &w), h)| RaySample {
                    x: r.x,
                    z: r.z,
                    px: r.px,
                    pz: r.pz,
                    r: r.amplitude,
                    w,
                    h,
                })
                .collect(),
        })
    }
}

/// A finished or aborted run: the record always holds every sample taken.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub record: TrajectoryRecord,
    pub error: Option<Error>,
    pub steps: usize,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<TrajectoryRecord> {
        match self.error {
            None => Ok(self.record),
            Some(e) => Err(e),
        }
    }
}

/// Halvings allowed when a step is rejected as too large.
const MAX_RETRIES: usize = 40;

/// Integrates from launch until the center ray reaches z_max.
pub fn run(vs: &ValidatedScenario) -> RunOutcome {
    let s = vs.scenario();
    let mut record = TrajectoryRecord {
        samples: Vec::new(),
        labels: crate::bundle::launch_labels(s.launch.span, s.n_rays),
        caustics: Vec::new(),
        report: None,
        scenario_echo: s.clone(),
    };
    let mut steps = 0;
    let error = integrate(vs, &mut record, &mut steps).err();
    RunOutcome { record, error, steps }
}

fn integrate(vs: &ValidatedScenario, record: &mut TrajectoryRecord, steps: &mut usize) -> Result<()> {
    let s = vs.scenario();
    let mut b = launch_bundle(vs)?;
    let mut prop = Propagator::new(vs, &b)?;
    record.samples.push(prop.sample(&b)?);
    let center = b.center();
    let z_max = s.z_max;
    let landed = |z: f64| z >= z_max - 1e-12 * z_max.max(1.0);
    let mut dt_prev: Option<f64> = None;
    let mut last: Option<StepReport> = None;

    let result = (|| -> Result<()> {
        while !landed(b.rays[center].z) {
            let k1 = prop.derivatives(&b)?;
            let cap = dt_prev.map_or(s.dt_control.initial, |d| 2.0 * d);
            let mut dt = prop.stable_dt(&b, &k1)?.min(cap).min(s.dt_control.max);
            let vz = k1[center].dr.z;
            if vz > 0.0 {
                let to_go = (z_max - b.rays[center].z) / vz;
                if to_go <= dt {
                    dt = to_go;
                }
            }
            let mut attempt = 0;
            let (next, report) = loop {
                match prop.step_with(&b, &k1, dt) {
                    Ok(done) => break done,
                    Err(Error::StepTooLarge { .. }) if attempt < MAX_RETRIES => {
                        attempt += 1;
                        dt *= 0.5;
                    }
                    Err(e) => return Err(e),
                }
            };
            b = next;
            dt_prev = Some(dt);
            last = Some(report);
            *steps += 1;
            if *steps % s.output.stride == 0 {
                record.samples.push(prop.sample(&b)?);
            }
        }
        Ok(())
    })();

    if record.samples.last().map(|x| x.t) != Some(b.t) {
        if let Ok(sample) = prop.sample(&b) {
            record.samples.push(sample);
        }
    }
    record.caustics = prop.caustics().to_vec();
    record.report = Some(last.unwrap_or(StepReport {
        t: b.t,
        dt_used: f64::MIN_POSITIVE,
        max_dh: prop.max_dh(),
        caustic_events: 0,
    }));
    result
}
