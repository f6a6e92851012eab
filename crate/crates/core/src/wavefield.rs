//! Amplitude transport and the wave potential on a discretized wavefront.
//!
//! The bundle is a polyline of rays ordered by label. Each ray carries the
//! conserved tube flux F = R^2 |p| sigma, so the amplitude follows from the
//! current spacing alone. W = -(coupling / 2) R'' / R is evaluated along the
//! polyline; its gradient is taken from the discrete quantum energy
//! E_Q = sum_j (R_{j+1} - R_j)^2 / (2 h_j), whose exact derivative with respect
//! to the ray positions gives a force that conserves E_Q under the flow and
//! therefore stays stable where a differenced W does not.

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::scenario::{Mode, ValidatedScenario};
use crate::vec2::Vec2;

/// Fixed numerical thresholds of the coupling, shared by every pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveContext {
    pub mode: Mode,
    /// hbar^2 / m (non-relativistic), hbar^2 c^2 / E (relativistic), 0 (classical).
    pub coupling: f64,
    /// Amplitudes below this are treated as this.
    pub r_floor: f64,
    /// Neighbor spacing at or below this is a caustic.
    pub sigma_min: f64,
}

impl WaveContext {
    /// The launch front has max amplitude 1 and uniform spacing, so the floor is
    /// 1e-12 and the caustic threshold 1e-6 of the launch spacing.
    pub fn new(vs: &ValidatedScenario) -> Self {
        let s = vs.scenario();
        let spacing = 2.0 * s.launch.span / (s.n_rays - 1) as f64;
        let coupling = match s.mode {
            Mode::NonRelativistic => 1.0,
            Mode::Relativistic => 1.0 / vs.energy(),
            Mode::Classical => 0.0,
        };
        WaveContext {
            mode: s.mode,
            coupling,
            r_floor: 1e-12,
            sigma_min: 1e-6 * spacing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavefrontGeometry {
    /// Unit vector along the front: the normal rotated by -90 degrees, flipped
    /// if needed so it points toward increasing label.
    pub tangent: Vec<Vec2>,
    /// Unit momentum direction.
    pub normal: Vec<Vec2>,
    /// Cumulative chord length along the polyline, starting at 0.
    pub arclen: Vec<f64>,
    /// Length of segment j, from ray j to ray j + 1.
    pub chord: Vec<f64>,
    /// Unit vector of segment j.
    pub chord_dir: Vec<Vec2>,
    /// |p| per ray.
    pub momentum: Vec<f64>,
}

/// Geometry plus the neighbor pairs `(j, j + 1)` whose signed spacing along the
/// front has dropped to `sigma_min` or below.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontScan {
    pub geometry: WavefrontGeometry,
    pub crossings: Vec<(usize, f64)>,
}

/// Measures the front and writes `sigma` into the bundle without judging it.
pub fn scan_wavefront(b: &mut Bundle, sigma_min: f64) -> FrontScan {
    let n = b.rays.len();
    let mut momentum = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut tangent = Vec::with_capacity(n);
    for r in &b.rays {
        let p = r.momentum();
        let len = p.norm();
        let nv = p * (1.0 / len);
        momentum.push(len);
        normal.push(nv);
        tangent.push(nv.rot_cw());
    }
    let mut chord = Vec::with_capacity(n - 1);
    let mut chord_dir = Vec::with_capacity(n - 1);
    let mut along = 0.0;
    for (j, t) in tangent.iter().take(n - 1).enumerate() {
        let d = b.rays[j + 1].position() - b.rays[j].position();
        let len = d.norm();
        along += d.dot(*t);
        chord.push(len);
        chord_dir.push(d * (1.0 / len));
    }
    // Orient the front along increasing label; a reversed bundle flips it.
    if along < 0.0 {
        tangent.iter_mut().for_each(|t| *t = -*t);
    }
    let mut arclen = Vec::with_capacity(n);
    let mut crossings = Vec::new();
    let mut s = 0.0;
    arclen.push(s);
    for j in 0..n - 1 {
        s += chord[j];
        arclen.push(s);
        let signed = 0.5 * chord[j] * chord_dir[j].dot(tangent[j] + tangent[j + 1]);
        if !(signed > sigma_min) {
            crossings.push((j, signed));
        }
    }
    b.sigma = spacing_from_chords(&chord);
    FrontScan {
        geometry: WavefrontGeometry {
            tangent,
            normal,
            arclen,
            chord,
            chord_dir,
            momentum,
        },
        crossings,
    }
}

/// Tangent, normal and arc length of the front; writes `sigma` into the bundle.
pub fn wavefront_geometry(b: &mut Bundle, sigma_min: f64) -> Result<WavefrontGeometry> {
    let scan = scan_wavefront(b, sigma_min);
    if let Some(&(j, spacing)) = scan.crossings.first() {
        return Err(Error::Caustic {
            t: b.t,
            left: j,
            right: j + 1,
            spacing,
            sigma_min,
        });
    }
    Ok(scan.geometry)
}

/// sigma_i = (s_{i+1} - s_{i-1}) / 2 inside, one-sided at the ends.
pub fn spacing_from_arclen(arclen: &[f64]) -> Vec<f64> {
    let chords: Vec<f64> = arclen.windows(2).map(|w| w[1] - w[0]).collect();
    spacing_from_chords(&chords)
}

fn spacing_from_chords(h: &[f64]) -> Vec<f64> {
    let m = h.len();
    let mut sigma = Vec::with_capacity(m + 1);
    sigma.push(h[0]);
    for j in 1..m {
        sigma.push(0.5 * (h[j - 1] + h[j]));
    }
    sigma.push(h[m - 1]);
    sigma
}

/// R_i = sqrt(F_i / (|p_i| sigma_i)); sigma is clamped at `sigma_floor`.
pub fn transport_amplitude(b: &mut Bundle, sigma_floor: f64) {
    for (ray, &sigma) in b.rays.iter_mut().zip(&b.sigma) {
        let p = ray.momentum().norm();
        ray.amplitude = (ray.flux / (p * sigma.max(sigma_floor))).sqrt();
    }
}

fn transport_with(b: &mut Bundle, g: &WavefrontGeometry, sigma_floor: f64) {
    for ((ray, &sigma), &p) in b.rays.iter_mut().zip(&b.sigma).zip(&g.momentum) {
        ray.amplitude = (ray.flux / (p * sigma.max(sigma_floor))).sqrt();
    }
}

/// Three-point second derivative of `f` on the nonuniform grid `s` at `i`.
fn second_derivative(s: &[f64], f: &[f64], i: usize) -> f64 {
    let h1 = s[i] - s[i - 1];
    let h2 = s[i + 1] - s[i];
    2.0 * (f[i - 1] / (h1 * (h1 + h2)) - f[i] / (h1 * h2) + f[i + 1] / (h2 * (h1 + h2)))
}

/// R'' / R at every interior node of the grid `s`; end nodes copy their
/// neighbor. Amplitudes are floored at `r_floor`.
pub fn laplacian_over_amplitude(s: &[f64], r: &[f64], r_floor: f64) -> Vec<f64> {
    let n = s.len();
    let rf: Vec<f64> = r.iter().map(|&v| v.max(r_floor)).collect();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = second_derivative(s, &rf, i) / rf[i];
    }
    out[0] = out[1];
    out[n - 1] = out[n - 2];
    out
}

/// Writes W_i = -(coupling / 2) R''/R for every ray (zero in classical mode).
pub fn wave_potential(b: &mut Bundle, g: &WavefrontGeometry, ctx: &WaveContext) {
    if !ctx.mode.has_wave_potential() {
        b.w_values.iter_mut().for_each(|w| *w = 0.0);
        return;
    }
    let n = b.rays.len();
    let h = &g.chord;
    let rf = |i: usize| b.rays[i].amplitude.max(ctx.r_floor);
    let scale = -ctx.coupling;
    for i in 1..n - 1 {
        let (h1, h2) = (h[i - 1], h[i]);
        let (fm, f0, fp) = (rf(i - 1), rf(i), rf(i + 1));
        let d2 = ((fm / h1 + fp / h2) - f0 * (1.0 / h1 + 1.0 / h2)) / (h1 + h2);
        b.w_values[i] = scale * d2 / f0;
    }
    b.w_values[0] = b.w_values[1];
    b.w_values[n - 1] = b.w_values[n - 2];
}

/// Writes the tangential gradient of W for every ray (zero in classical mode).
///
/// The nodal force is -dE_Q/dr_k / M_k with tube mass M_k = R_k^2 sigma_k,
/// projected on the tangent. The end rays take the linear extrapolation of
/// their two inner neighbors.
pub fn wave_potential_gradient(b: &mut Bundle, g: &WavefrontGeometry, ctx: &WaveContext) {
    let n = b.rays.len();
    if !ctx.mode.has_wave_potential() {
        b.w_grad.iter_mut().for_each(|v| *v = Vec2::ZERO);
        return;
    }
    let h = &g.chord;
    let e = &g.chord_dir;
    let sigma = &b.sigma;
    let mut r = Vec::with_capacity(n);
    let mut floored = Vec::with_capacity(n);
    for ray in &b.rays {
        floored.push(ray.amplitude < ctx.r_floor);
        r.push(ray.amplitude.max(ctx.r_floor));
    }

    // dE/dR_i, then dE/dsigma_i through R_i = sqrt(F_i / (|p_i| sigma_i)).
    // Slope (R_{j+1} - R_j) / h_j of each segment.
    let slope: Vec<f64> = (0..n - 1).map(|j| (r[j + 1] - r[j]) / h[j]).collect();
    let mut de_dsigma = vec![0.0; n];
    for i in 0..n {
        let mut de_dr = 0.0;
        if i > 0 {
            de_dr += slope[i - 1];
        }
        if i < n - 1 {
            de_dr -= slope[i];
        }
        if !floored[i] {
            de_dsigma[i] = -0.5 * r[i] / sigma[i] * de_dr;
        }
    }

    // Tension of segment j: dE/dh_j.
    let mut tension: Vec<f64> = slope.iter().map(|m| -0.5 * m * m).collect();
    for j in 0..n - 1 {
        if j > 0 {
            tension[j] += 0.5 * de_dsigma[j];
        }
        if j + 1 < n - 1 {
            tension[j] += 0.5 * de_dsigma[j + 1];
        }
    }
    tension[0] += de_dsigma[0];
    tension[n - 2] += de_dsigma[n - 1];

    let mut grad = vec![Vec2::ZERO; n];
    for k in 1..n - 1 {
        let de_drk = e[k - 1] * tension[k - 1] - e[k] * tension[k];
        let mass = r[k] * r[k] * sigma[k];
        grad[k] = de_drk * (1.0 / mass);
    }
    grad[0] = grad[1] * 2.0 - grad[2];
    grad[n - 1] = grad[n - 2] * 2.0 - grad[n - 3];

    for ((out, gk), t) in b.w_grad.iter_mut().zip(grad).zip(&g.tangent) {
        *out = *t * (ctx.coupling * gk.dot(*t));
    }
}

/// Recomputes sigma, R, W and grad W for the current positions and momenta.
///
/// In wave modes a crossing is a `Caustic` error. In classical mode crossings
/// are returned to the caller and sigma is clamped for the amplitude.
pub fn refresh(b: &mut Bundle, ctx: &WaveContext) -> Result<FrontScan> {
    let scan = scan_wavefront(b, ctx.sigma_min);
    if ctx.mode.has_wave_potential() {
        if let Some(&(j, spacing)) = scan.crossings.first() {
            return Err(Error::Caustic {
                t: b.t,
                left: j,
                right: j + 1,
                spacing,
                sigma_min: ctx.sigma_min,
            });
        }
    }
    transport_with(b, &scan.geometry, ctx.sigma_min);
    wave_potential(b, &scan.geometry, ctx);
    wave_potential_gradient(b, &scan.geometry, ctx);
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::Ray;

    fn ctx(mode: Mode) -> WaveContext {
        WaveContext {
            mode,
            coupling: if mode == Mode::Classical { 0.0 } else { 1.0 },
            r_floor: 1e-12,
            sigma_min: 1e-8,
        }
    }

    /// Straight front at z = 0 with positions `xs`, amplitudes `rs`, |p| = p.
    fn front(xs: &[f64], rs: &[f64], p: f64) -> Bundle {
        let n = xs.len();
        let mut b = Bundle::new(
            xs.iter()
                .zip(rs)
                .map(|(&x, &r)| Ray::new(x, 0.0, 0.0, p, r, 1.0, x))
                .collect(),
        );
        let s = spacing_from_arclen(&xs.iter().map(|x| x - xs[0]).collect::<Vec<_>>());
        for (ray, sg) in b.rays.iter_mut().zip(&s) {
            ray.flux = ray.amplitude * ray.amplitude * p * sg;
        }
        assert_eq!(b.sigma.len(), n);
        b
    }

    fn uniform(n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|i| (i as f64 - (n / 2) as f64) * h).collect()
    }

    #[test]
    fn planar_front_geometry() {
        let xs = uniform(11, 0.25);
        let mut b = front(&xs, &[1.0; 11], 10.0);
        let g = wavefront_geometry(&mut b, 1e-9).unwrap();
        for i in 0..11 {
            assert_eq!(b.sigma[i], 0.25);
            assert_eq!(g.tangent[i], Vec2::new(1.0, 0.0));
            assert_eq!(g.normal[i], Vec2::new(0.0, 1.0));
        }
        assert!(g.arclen.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn doubled_separation_doubles_sigma() {
        let xs = [-1.0, -0.6, -0.1, 0.0, 0.3, 0.8, 1.0, 1.7, 2.0];
        let mut a = front(&xs, &[1.0; 9], 1.0);
        let wide: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let mut b = front(&wide, &[1.0; 9], 1.0);
        wavefront_geometry(&mut a, 1e-9).unwrap();
        wavefront_geometry(&mut b, 1e-9).unwrap();
        for (sa, sb) in a.sigma.iter().zip(&b.sigma) {
            assert!((sb - 2.0 * sa).abs() < 1e-15);
        }
    }

    #[test]
    fn coincident_rays_are_a_caustic() {
        let mut xs = uniform(9, 0.5);
        xs[5] = xs[4];
        let mut b = front(&xs, &[1.0; 9], 1.0);
        let err = wavefront_geometry(&mut b, 1e-9).unwrap_err();
        assert!(matches!(err, Error::Caustic { left: 4, right: 5, .. }));
    }

    #[test]
    fn swapped_rays_are_a_caustic() {
        let mut xs = uniform(9, 0.5);
        xs.swap(2, 3);
        let mut b = front(&xs, &[1.0; 9], 1.0);
        assert!(wavefront_geometry(&mut b, 1e-9).is_err());
    }

    #[test]
    fn reversed_momenta_keep_orientation() {
        let xs = uniform(9, 0.5);
        let mut b = front(&xs, &[1.0; 9], -1.0);
        let g = wavefront_geometry(&mut b, 1e-9).unwrap();
        assert_eq!(g.tangent[0], Vec2::new(1.0, 0.0));
        assert_eq!(g.normal[0], Vec2::new(0.0, -1.0));
    }

    #[test]
    fn classical_refresh_reports_crossings() {
        let mut xs = uniform(9, 0.5);
        xs.swap(2, 3);
        let mut b = front(&xs, &[1.0; 9], 1.0);
        let scan = refresh(&mut b, &ctx(Mode::Classical)).unwrap();
        assert_eq!(scan.crossings.iter().map(|c| c.0).collect::<Vec<_>>(), vec![2]);
        assert!(b.rays.iter().all(|r| r.amplitude.is_finite()));
    }

    #[test]
    fn transport_keeps_uniform_beam() {
        let xs = uniform(9, 0.5);
        let mut b = front(&xs, &[0.7; 9], 3.0);
        wavefront_geometry(&mut b, 1e-9).unwrap();
        transport_amplitude(&mut b, 1e-9);
        for r in &b.rays {
            assert!((r.amplitude - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn doubled_sigma_shrinks_amplitude_by_root_two() {
        let xs = uniform(9, 0.5);
        let mut b = front(&xs, &[1.0; 9], 3.0);
        for r in b.rays.iter_mut() {
            r.x *= 2.0;
        }
        wavefront_geometry(&mut b, 1e-9).unwrap();
        transport_amplitude(&mut b, 1e-9);
        for r in &b.rays {
            assert!((r.amplitude - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_center_w_converges_to_one() {
        let mut errs = Vec::new();
        for n in [41, 81, 161] {
            let xs = uniform(n, 8.0 / (n - 1) as f64);
            let rs: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
            let mut b = front(&xs, &rs, 1.0);
            refresh(&mut b, &ctx(Mode::NonRelativistic)).unwrap();
            errs.push((b.w_values[n / 2] - 1.0).abs());
        }
        assert!(errs[0] / errs[1] > 3.8 && errs[1] / errs[2] > 3.9, "{errs:?}");
    }

    #[test]
    fn uniform_amplitude_gives_zero_w_and_gradient() {
        let xs = uniform(15, 0.3);
        let mut b = front(&xs, &[1.0; 15], 2.0);
        refresh(&mut b, &ctx(Mode::NonRelativistic)).unwrap();
        assert!(b.w_values.iter().all(|w| w.abs() < 1e-12));
        assert!(b.w_grad.iter().all(|g| g.norm() < 1e-12));
    }

    #[test]
    fn classical_mode_has_no_wave_potential() {
        let xs = uniform(15, 0.3);
        let rs: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
        let mut b = front(&xs, &rs, 2.0);
        refresh(&mut b, &ctx(Mode::Classical)).unwrap();
        assert!(b.w_values.iter().all(|&w| w == 0.0));
        assert!(b.w_grad.iter().all(|&g| g == Vec2::ZERO));
    }

    #[test]
    fn symmetric_front_has_no_force_on_center() {
        let xs = uniform(21, 0.4);
        let rs: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
        let mut b = front(&xs, &rs, 2.0);
        refresh(&mut b, &ctx(Mode::NonRelativistic)).unwrap();
        let scale = b.w_grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
        assert!(b.w_grad[10].norm() <= 1e-14 * scale);
        for i in 0..10 {
            assert!((b.w_grad[i].x + b.w_grad[20 - i].x).abs() <= 1e-14 * scale);
        }
    }

    #[test]
    fn gradient_is_perpendicular_to_momentum_on_a_tilted_front() {
        let n = 31;
        let mut b = Bundle::new(
            (0..n)
                .map(|i| {
                    let s = (i as f64 - 15.0) * 0.2;
                    let th = 0.01 * s;
                    Ray::new(
                        s * th.cos(),
                        -s * th.sin() + 0.1 * s * s,
                        5.0 * th.sin(),
                        5.0 * th.cos(),
                        1.0,
                        1.0,
                        s,
                    )
                })
                .collect(),
        );
        for (i, r) in b.rays.iter_mut().enumerate() {
            let s = (i as f64 - 15.0) * 0.2;
            r.flux = (-s * s).exp() * 5.0 * 0.2;
        }
        refresh(&mut b, &ctx(Mode::NonRelativistic)).unwrap();
        for (g, r) in b.w_grad.iter().zip(&b.rays) {
            let p = r.momentum();
            assert!(g.dot(p).abs() <= 1e-12 * g.norm() * p.norm());
        }
    }

    #[test]
    fn gradient_matches_gaussian_force_at_second_order() {
        // dW/dx for R = exp(-x^2) is -(1/2) d/dx (4x^2 - 2) = -4x.
        let mut errs = Vec::new();
        for n in [81, 161, 321] {
            let xs = uniform(n, 8.0 / (n - 1) as f64);
            let rs: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
            let mut b = front(&xs, &rs, 1.0);
            refresh(&mut b, &ctx(Mode::NonRelativistic)).unwrap();
            let err = xs
                .iter()
                .zip(&b.w_grad)
                .filter(|(x, _)| x.abs() <= 2.0)
                .map(|(x, g)| (g.x + 4.0 * x).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[2] < 0.02 * 8.0, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }
}
