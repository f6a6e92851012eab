use serde::{Deserialize, Serialize};

use crate::dynamics::StepReport;
use crate::error::{Error, Result};
use crate::scenario::{Scenario, ValidatedScenario};
use crate::vec2::Vec2;
use crate::wavefield::{self, WaveContext};

/// One trajectory's instantaneous state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub x: f64,
    pub z: f64,
    pub px: f64,
    pub pz: f64,
    /// R, normalized so the launch maximum is 1.
    pub amplitude: f64,
    /// Tube flux R^2 |p| sigma, fixed at launch.
    pub flux: f64,
    label: f64,
}

impl Ray {
    pub fn new(x: f64, z: f64, px: f64, pz: f64, amplitude: f64, flux: f64, label: f64) -> Self {
        Ray {
            x,
            z,
            px,
            pz,
            amplitude,
            flux,
            label,
        }
    }

    /// Launch transverse coordinate.
    pub fn label(&self) -> f64 {
        self.label
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.z)
    }

    pub fn momentum(&self) -> Vec2 {
        Vec2::new(self.px, self.pz)
    }
}

/// The rays at a common time, ordered by label, with their coupling fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub t: f64,
    pub rays: Vec<Ray>,
    pub sigma: Vec<f64>,
    pub w_values: Vec<f64>,
    pub w_grad: Vec<Vec2>,
}

impl Bundle {
    /// A bundle at t = 0 with zeroed coupling fields.
    pub fn new(rays: Vec<Ray>) -> Self {
        let n = rays.len();
        Bundle {
            t: 0.0,
            rays,
            sigma: vec![0.0; n],
            w_values: vec![0.0; n],
            w_grad: vec![Vec2::ZERO; n],
        }
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn center(&self) -> usize {
        self.rays.len() / 2
    }

    pub fn labels(&self) -> Vec<f64> {
        self.rays.iter().map(Ray::label).collect()
    }
}

/// Labels uniformly spaced over [-span, span]; exactly antisymmetric.
pub fn launch_labels(span: f64, n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n).map(|i| span * (2.0 * i as f64 - m) / m).collect()
}

/// Seeds the bundle on the z = 0 front with p = (0, p0) and fills sigma, R, W
/// and grad W.
pub fn launch_bundle(vs: &ValidatedScenario) -> Result<Bundle> {
    let s = vs.scenario();
    let labels = launch_labels(s.launch.span, s.n_rays);
    let raw: Vec<f64> = labels.iter().map(|&x| s.launch.shape.amplitude(x)).collect();
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::ZeroAmplitude);
    }
    let offsets: Vec<f64> = labels.iter().map(|x| x - labels[0]).collect();
    let sigma = wavefield::spacing_from_arclen(&offsets);
    let ctx = WaveContext::new(vs);
    let p0 = vs.p0();
    let rays = labels
        .iter()
        .zip(&raw)
        .zip(&sigma)
        .map(|((&x, &r), &sg)| {
            let amplitude = r / peak;
            let carried = amplitude.max(ctx.r_floor);
            Ray::new(x, 0.0, 0.0, p0, amplitude, carried * carried * p0 * sg, x)
        })
        .collect();
    let mut b = Bundle::new(rays);
    wavefield::refresh(&mut b, &ctx)?;
    // Transport reproduces the launch amplitudes up to rounding; keep them exact.
    for (ray, &r) in b.rays.iter_mut().zip(&raw) {
        ray.amplitude = r / peak;
    }
    Ok(b)
}

/// Per-ray values stored in a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaySample {
    pub x: f64,
    pub z: f64,
    pub px: f64,
    pub pz: f64,
    pub r: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub rays: Vec<RaySample>,
}

/// Neighbor rays `left` and `left + 1` crossed during the step ending at `t`;
/// `z` is the center ray's position then.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausticEvent {
    pub t: f64,
    pub z: f64,
    pub x: f64,
    pub left: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub labels: Vec<f64>,
    pub caustics: Vec<CausticEvent>,
    pub report: Option<StepReport>,
    pub scenario_echo: Scenario,
}

impl TrajectoryRecord {
    pub fn n_rays(&self) -> usize {
        self.labels.len()
    }

    /// The recorded history of ray `i`.
    pub fn track(&self, i: usize) -> impl Iterator<Item = (f64, &RaySample)> + '_ {
        self.samples.iter().map(move |s| (s.t, &s.rays[i]))
    }

    /// Index of the ray whose label is closest to `label`.
    pub fn ray_nearest(&self, label: f64) -> usize {
        let mut best = 0;
        for (i, l) in self.labels.iter().enumerate() {
            if (l - label).abs() < (self.labels[best] - label).abs() {
                best = i;
            }
        }
        best
    }

    /// Transverse position of ray `i` where it crosses `z`, by linear
    /// interpolation between the bracketing samples.
    pub fn x_at_z(&self, i: usize, z: f64) -> Option<f64> {
        self.interpolate_at_z(i, z).map(|s| s.x)
    }

    pub fn interpolate_at_z(&self, i: usize, z: f64) -> Option<RaySample> {
        let mut prev: Option<&RaySample> = None;
        for s in &self.samples {
            let cur = &s.rays[i];
            if cur.z == z {
                return Some(*cur);
            }
            if let Some(p) = prev {
                if (p.z - z) * (cur.z - z) < 0.0 {
                    let u = (z - p.z) / (cur.z - p.z);
                    let lerp = |a: f64, b: f64| a + (b - a) * u;
                    return Some(RaySample {
                        x: lerp(p.x, cur.x),
                        z,
                        px: lerp(p.px, cur.px),
                        pz: lerp(p.pz, cur.pz),
                        r: lerp(p.r, cur.r),
                        w: lerp(p.w, cur.w),
                        h: lerp(p.h, cur.h),
                    });
                }
            }
            prev = Some(cur);
        }
        None
    }
}
