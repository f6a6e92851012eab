//! Independent references: the paraxial waist law, an angular-spectrum
//! free-space propagator, and intensity-profile measures.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::bundle::TrajectoryRecord;
use crate::error::{Error, Result};

/// Prominence above which a local maximum counts as a fringe.
pub const DEFAULT_PROMINENCE: f64 = 0.01;
/// Prominence used for far-field fringe counts; sidelobes of a super-Gaussian
/// sit well below the default.
pub const FRINGE_PROMINENCE: f64 = 0.002;

/// Envelope w0 sqrt(1 + (lambda0 z / (pi w0^2))^2) of a Gaussian beam.
pub fn gaussian_waist(z: f64, lambda0: f64, w0: f64) -> f64 {
    let a = lambda0 * z / (PI * w0 * w0);
    w0 * (1.0 + a * a).sqrt()
}

/// Closed-form intensity of a Gaussian beam with unit waist at distance z,
/// normalized to peak 1: exp(-2 x^2 / w(z)^2).
pub fn gaussian_beam_intensity(x: f64, z: f64, lambda0: f64) -> f64 {
    let w = gaussian_waist(z, lambda0, 1.0);
    (-2.0 * x * x / (w * w)).exp()
}

/// Relative intensity on a strictly increasing x grid, peak normalized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityProfile {
    pub x: Vec<f64>,
    pub i_values: Vec<f64>,
    pub z: f64,
}

impl IntensityProfile {
    /// Normalizes `intensity` to max 1. Panics if `x` is not strictly
    /// increasing or the lengths differ.
    pub fn new(x: Vec<f64>, intensity: Vec<f64>, z: f64) -> Self {
        assert_eq!(x.len(), intensity.len(), "profile lengths differ");
        assert!(
            x.windows(2).all(|w| w[0] < w[1]),
            "profile x must be strictly increasing"
        );
        let peak = intensity.iter().cloned().fold(0.0, f64::max);
        let i_values = if peak > 0.0 {
            intensity.iter().map(|v| (v / peak).clamp(0.0, 1.0)).collect()
        } else {
            vec![0.0; intensity.len()]
        };
        IntensityProfile { x, i_values, z }
    }

    /// Builds a profile from unordered (x, intensity) points: sorted by x,
    /// keeping the larger value where positions coincide.
    pub fn from_points(mut points: Vec<(f64, f64)>, z: f64) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut x: Vec<f64> = Vec::with_capacity(points.len());
        let mut v: Vec<f64> = Vec::with_capacity(points.len());
        for (px, pv) in points {
            if x.last() == Some(&px) {
                let last = v.last_mut().expect("paired");
                *last = last.max(pv);
            } else {
                x.push(px);
                v.push(pv);
            }
        }
        IntensityProfile::new(x, v, z)
    }

    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.i_values.iter().enumerate() {
            if *v > self.i_values[best] {
                best = i;
            }
        }
        best
    }

    /// Linear interpolation at `x`, zero outside the sampled range.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.x.len();
        if n == 0 || x < self.x[0] || x > self.x[n - 1] {
            return 0.0;
        }
        let j = self.x.partition_point(|&v| v <= x).clamp(1, n - 1);
        let (x0, x1) = (self.x[j - 1], self.x[j]);
        let (v0, v1) = (self.i_values[j - 1], self.i_values[j]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// Half-width at which the intensity falls to 1/e^2 of the peak, walking
    /// outward from the peak sample; `None` if either side never drops that low.
    pub fn half_width_1e2(&self) -> Option<f64> {
        let level = (-2.0f64).exp() * self.i_values[self.peak_index()];
        let p = self.peak_index();
        let cross = |a: usize, b: usize| {
            let (xa, xb) = (self.x[a], self.x[b]);
            let (va, vb) = (self.i_values[a], self.i_values[b]);
            xa + (xb - xa) * (va - level) / (va - vb)
        };
        let right = (p + 1..self.x.len())
            .find(|&i| self.i_values[i] < level)
            .map(|i| cross(i - 1, i))?;
        let left = (0..p)
            .rev()
            .find(|&i| self.i_values[i] < level)
            .map(|i| cross(i + 1, i))?;
        Some(0.5 * (right - left))
    }
}

/// A local maximum and its topographic prominence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub x: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Interior local maxima (plateaus count once, at their left edge) with their
/// prominence: height above the higher of the two lowest points reached
/// before the signal climbs above the peak on each side, or ends.
pub fn peaks(v: &[f64], x: &[f64]) -> Vec<Peak> {
    let n = v.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if v[i] > v[i - 1] {
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] < v[i] {
                let h = v[i];
                let mut left_min = h;
                for k in (0..i).rev() {
                    if v[k] > h {
                        break;
                    }
                    left_min = left_min.min(v[k]);
                }
                let mut right_min = h;
                for &vk in &v[j + 1..] {
                    if vk > h {
                        break;
                    }
                    right_min = right_min.min(vk);
                }
                out.push(Peak {
                    index: i,
                    x: x[i],
                    height: h,
                    prominence: h - left_min.max(right_min),
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Number of local maxima whose prominence exceeds `prominence`, measured on
/// the profile renormalized to peak 1.
pub fn fringe_count(p: &IntensityProfile, prominence: f64) -> usize {
    let peak = p.i_values.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return 0;
    }
    let scaled: Vec<f64> = p.i_values.iter().map(|v| v / peak).collect();
    peaks(&scaled, &p.x)
        .iter()
        .filter(|pk| pk.prominence > prominence)
        .count()
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a == 0.0 {
        return x[1];
    }
    0.5 * (x[0] + x[1]) - d1 / (2.0 * a)
}

/// Position of the first prominent maximum on the +x side of the global
/// maximum, refined by a parabola through the peak sample and its neighbors.
pub fn first_off_axis_peak(p: &IntensityProfile, prominence: f64) -> Option<f64> {
    let main = p.x[p.peak_index()];
    let pk = peaks(&p.i_values, &p.x)
        .into_iter()
        .filter(|pk| pk.prominence > prominence && pk.x > main)
        .min_by(|a, b| a.x.total_cmp(&b.x))?;
    let i = pk.index;
    Some(parabola_vertex(
        [p.x[i - 1], p.x[i], p.x[i + 1]],
        [p.i_values[i - 1], p.i_values[i], p.i_values[i + 1]],
    ))
}

/// Max |a - b| over the oracle samples whose intensity exceeds `support`,
/// with `bundle` linearly resampled onto the oracle grid.
pub fn linf_on_support(bundle: &IntensityProfile, oracle: &IntensityProfile, support: f64) -> f64 {
    oracle
        .x
        .iter()
        .zip(&oracle.i_values)
        .filter(|(_, &o)| o > support)
        .map(|(&x, &o)| (bundle.value_at(x) - o).abs())
        .fold(0.0, f64::max)
}

/// Complex field on the periodic grid x_j = -half + j dx, dx = 2 half / n.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile {
    pub x: Vec<f64>,
    pub u: Vec<Complex64>,
}

impl FieldProfile {
    pub fn sample(n: usize, half_extent: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let dx = 2.0 * half_extent / n as f64;
        let x: Vec<f64> = (0..n).map(|j| -half_extent + j as f64 * dx).collect();
        let u = x.iter().map(|&xv| f(xv)).collect();
        FieldProfile { x, u }
    }

    /// The default far-field grid: 2^14 points over [-32, 32).
    pub fn far_field_grid(f: impl Fn(f64) -> f64) -> Self {
        FieldProfile::sample(1 << 14, 32.0, |x| Complex64::new(f(x), 0.0))
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    fn energy(&self) -> f64 {
        self.u.iter().map(|c| c.norm_sqr()).sum()
    }

    fn edge_ratio(&self) -> f64 {
        let peak = self.u.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let n = self.u.len();
        self.u[0].norm().max(self.u[n - 1].norm()) / peak
    }
}

/// Edge amplitude allowed relative to the peak, before and after propagation.
const EDGE_LIMIT: f64 = 1e-6;
/// Allowed relative energy mismatch of the forward/inverse transform pair.
const PARSEVAL_LIMIT: f64 = 1e-10;

/// Propagates the field a distance z through free space with the exact
/// transfer function exp(i z (sqrt(k0^2 - kx^2) - k0)); evanescent
/// components are dropped. The constant phase k0 z is removed since only
/// |u| is used.
pub fn angular_spectrum_field(field: &FieldProfile, z: f64, lambda0: f64) -> Result<FieldProfile> {
    let edge = field.edge_ratio();
    if !(edge <= EDGE_LIMIT) {
        return Err(Error::GridTooNarrow { edge });
    }
    let n = field.u.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spec = field.u.clone();
    fwd.process(&mut spec);

    let before = field.energy();
    let spectral: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
    let residual = (spectral - before).abs() / before;
    if !(residual <= PARSEVAL_LIMIT) {
        return Err(Error::Parseval { residual });
    }

    let k0 = 2.0 * PI / lambda0;
    let dk = 2.0 * PI / (n as f64 * field.dx());
    for (j, c) in spec.iter_mut().enumerate() {
        let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let kx = m * dk;
        let kz2 = k0 * k0 - kx * kx;
        if kz2 < 0.0 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            // kz - k0 without cancellation.
            let phase = -kx * kx / (k0 + kz2.sqrt()) * z;
            *c *= Complex64::from_polar(1.0 / n as f64, phase);
        }
    }
    inv.process(&mut spec);
    let out = FieldProfile {
        x: field.x.clone(),
        u: spec,
    };
    let edge = out.edge_ratio();
    if !(edge <= EDGE_LIMIT) {
        return Err(Error::GridTooNarrow { edge });
    }
    Ok(out)
}

/// |u(x, z)|^2 normalized to peak 1.
pub fn angular_spectrum_propagate(field: &FieldProfile, z: f64, lambda0: f64) -> Result<IntensityProfile> {
    let out = angular_spectrum_field(field, z, lambda0)?;
    Ok(IntensityProfile::new(
        out.x,
        out.u.iter().map(|c| c.norm_sqr()).collect(),
        z,
    ))
}

/// Intensity R^2 of the bundle where each ray crosses `z_plane`, from linear
/// interpolation between the bracketing samples.
pub fn bundle_intensity_at_plane(rec: &TrajectoryRecord, z_plane: f64) -> Result<IntensityProfile> {
    let points = (0..rec.n_rays())
        .map(|i| {
            rec.interpolate_at_z(i, z_plane)
                .map(|s| (s.x, s.r * s.r))
                .ok_or(Error::PlaneNotReached { ray: i, z_plane })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntensityProfile::from_points(points, z_plane))
}

/// Intensity R^2 against x for one recorded sample.
pub fn sample_profile(rec: &TrajectoryRecord, sample: usize) -> IntensityProfile {
    let s = &rec.samples[sample];
    let z = s.rays[rec.n_rays() / 2].z;
    IntensityProfile::from_points(s.rays.iter().map(|r| (r.x, r.r * r.r)).collect(), z)
}

/// Smallest 1/e^2 half-width of the bundle profile over `planes` evenly spaced
/// z-planes between 0 and the furthest plane every ray reaches; returns
/// `(width, z)`.
pub fn min_half_width(rec: &TrajectoryRecord, planes: usize) -> Option<(f64, f64)> {
    let last = rec.samples.last()?;
    let reach = last.rays.iter().map(|r| r.z).fold(f64::INFINITY, f64::min);
    let mut best: Option<(f64, f64)> = None;
    for k in 0..planes {
        let z = reach * k as f64 / (planes - 1) as f64;
        let Ok(p) = bundle_intensity_at_plane(rec, z) else {
            continue;
        };
        if let Some(w) = p.half_width_1e2() {
            if best.map_or(true, |(bw, _)| w < bw) {
                best = Some((w, z));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waist_law_values() {
        let l = 1e-4;
        assert_eq!(gaussian_waist(0.0, l, 1.0), 1.0);
        assert!((gaussian_waist(PI / l, l, 1.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((gaussian_waist(2.0 * PI / l, l, 1.0) - 5f64.sqrt()).abs() < 1e-15);
    }

    fn grid(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn gaussian_has_one_fringe() {
        let x = grid(801, -5.0, 5.0);
        let v = x.iter().map(|x| (-x * x).exp()).collect();
        assert_eq!(fringe_count(&IntensityProfile::new(x, v, 0.0), DEFAULT_PROMINENCE), 1);
    }

    #[test]
    fn cos_squared_interior_peaks() {
        // Maxima of cos^2 on [-3 pi, 3 pi] sit at k pi; the two at +-3 pi are
        // the endpoints, which have only one flank.
        let x = grid(6001, -3.0 * PI, 3.0 * PI);
        let v = x.iter().map(|x| x.cos().powi(2)).collect();
        let expected = (-3..=3).filter(|k: &i32| k.abs() < 3).count();
        assert_eq!(
            fringe_count(&IntensityProfile::new(x, v, 0.0), DEFAULT_PROMINENCE),
            expected
        );
    }

    #[test]
    fn ramp_has_none() {
        let x = grid(100, 0.0, 1.0);
        let v = x.clone();
        assert_eq!(fringe_count(&IntensityProfile::new(x, v, 0.0), DEFAULT_PROMINENCE), 0);
    }

    #[test]
    fn small_ripple_below_prominence_is_ignored() {
        let x = grid(2001, -5.0, 5.0);
        let v = x
            .iter()
            .map(|x| (-x * x).exp() + 0.004 * (20.0 * x).cos().powi(2))
            .collect();
        assert_eq!(fringe_count(&IntensityProfile::new(x, v, 0.0), DEFAULT_PROMINENCE), 1);
    }

    #[test]
    fn plateau_counts_once() {
        let x = grid(7, 0.0, 6.0);
        let v = vec![0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0];
        assert_eq!(fringe_count(&IntensityProfile::new(x, v, 0.0), DEFAULT_PROMINENCE), 1);
    }

    #[test]
    fn half_width_of_gaussian() {
        let x = grid(4001, -6.0, 6.0);
        let v = x.iter().map(|x| (-2.0 * x * x / 2.0).exp()).collect();
        let w = IntensityProfile::new(x, v, 0.0).half_width_1e2().unwrap();
        assert!((w - 2f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn parabola_vertex_exact() {
        let f = |x: f64| 3.0 - 2.0 * (x - 0.37).powi(2);
        let xs = [0.1, 0.3, 0.8];
        assert!((parabola_vertex(xs, xs.map(f)) - 0.37).abs() < 1e-14);
    }

    #[test]
    fn zero_distance_is_identity() {
        let f = FieldProfile::far_field_grid(|x| (-x * x).exp());
        let out = angular_spectrum_field(&f, 0.0, 1e-4).unwrap();
        let err = f.u.iter().zip(&out.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn gaussian_matches_closed_form() {
        let l = 1e-4;
        let f = FieldProfile::far_field_grid(|x| (-x * x).exp());
        for zr in [0.5, 1.0, 2.0, 3.0] {
            let z = zr * PI / l;
            let p = angular_spectrum_propagate(&f, z, l).unwrap();
            let err =
                p.x.iter()
                    .zip(&p.i_values)
                    .map(|(&x, &v)| (v - gaussian_beam_intensity(x, z, l)).abs())
                    .fold(0.0, f64::max);
            assert!(err < 1e-4, "z/zR = {zr}: {err}");
        }
    }

    #[test]
    fn wide_field_is_rejected() {
        let f = FieldProfile::sample(1024, 2.0, |x| Complex64::new((-x * x).exp(), 0.0));
        assert!(matches!(
            angular_spectrum_field(&f, 1.0, 1e-4),
            Err(Error::GridTooNarrow { .. })
        ));
    }
}
