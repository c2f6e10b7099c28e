//! Free-space velocity far from the vorticity, angular profiles on probe
//! circles and their comparison with the closed-form hexagon.
//!
//! The velocity is `u(x) = (1/2π) ∫ (x − y)^⊥ / |x − y|² ω(y) dy`, summed
//! over every grid cell. Profiles store `R³` times the probed quantity.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{circle_distance, grad_h, horizontal_angles, HexInvariant, MomentumFlux};
use crate::grid::GridScalarField;
use crate::kernels::Point2;

/// Probes must sit beyond this multiple of the effective support radius.
pub const PROBE_MARGIN: f64 = 1.5;
/// Relative level defining the effective support of the vorticity.
pub const SUPPORT_THRESHOLD: f64 = 1e-13;
/// Fewest angles a profile may have.
pub const MIN_ANGLES: usize = 64;

#[derive(Debug, Error)]
pub enum FarFieldError {
    #[error("probe at |x| = {r} lies within {margin} × the support radius {support}")]
    InsideSupport { r: f64, support: f64, margin: f64 },
    #[error("sinusoid fits need the u1 or u2 component")]
    SpeedNotFittable,
    #[error("profile needs at least {MIN_ANGLES} angles, got {0}")]
    TooFewAngles(usize),
    #[error("undefined hexagon (L = 0)")]
    Undefined,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    U1,
    U2,
    Speed,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::U1 => "u1",
            Component::U2 => "u2",
            Component::Speed => "speed",
        }
    }

    pub fn of(self, u: [f64; 2]) -> f64 {
        match self {
            Component::U1 => u[0],
            Component::U2 => u[1],
            Component::Speed => u[0].hypot(u[1]),
        }
    }
}

impl std::str::FromStr for Component {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "u1" => Ok(Component::U1),
            "u2" => Ok(Component::U2),
            "speed" => Ok(Component::Speed),
            other => Err(format!("unknown component {other:?} (expected u1, u2 or speed)")),
        }
    }
}

/// Point sources `(y, ω(y) dx²)` of one vorticity snapshot.
#[derive(Debug, Clone)]
pub struct BiotSavart {
    sources: Vec<(Point2, f64)>,
    support: f64,
}

impl BiotSavart {
    pub fn new(omega: &GridScalarField) -> Self {
        let g = *omega.grid();
        let n = g.n();
        let w = g.cell_area();
        let support = omega.support_radius(SUPPORT_THRESHOLD);
        let mut sources = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = omega.at(i, j);
                let p = g.point(i, j);
                if v != 0.0 && p.norm() <= support {
                    sources.push((p, v * w));
                }
            }
        }
        Self { sources, support }
    }

    /// Radius beyond which `|ω| ≤ 1e-13 max|ω|`.
    pub fn support_radius(&self) -> f64 {
        self.support
    }

    pub fn check(&self, x: Point2) -> Result<(), FarFieldError> {
        let r = x.norm();
        if r > PROBE_MARGIN * self.support {
            Ok(())
        } else {
            Err(FarFieldError::InsideSupport { r, support: self.support, margin: PROBE_MARGIN })
        }
    }

    pub fn velocity(&self, x: Point2) -> Result<[f64; 2], FarFieldError> {
        self.check(x)?;
        Ok(self.velocity_unchecked(x))
    }

    fn velocity_unchecked(&self, x: Point2) -> [f64; 2] {
        let (mut s1, mut s2) = (0.0, 0.0);
        for &(y, w) in &self.sources {
            let d = x - y;
            let f = w / d.norm_sq();
            s1 -= d.x2 * f;
            s2 += d.x1 * f;
        }
        [s1 / TAU, s2 / TAU]
    }

    /// Velocities at many points, evaluated in parallel.
    pub fn velocities(&self, xs: &[Point2]) -> Result<Vec<[f64; 2]>, FarFieldError> {
        for &x in xs {
            self.check(x)?;
        }
        Ok(xs.par_iter().map(|&x| self.velocity_unchecked(x)).collect())
    }
}

/// Free-space velocity induced by `omega` at `x`.
pub fn biot_savart_point(omega: &GridScalarField, x: Point2) -> Result<[f64; 2], FarFieldError> {
    BiotSavart::new(omega).velocity(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldProfile {
    pub radius: f64,
    pub time: f64,
    pub component: Component,
    pub theta: Vec<f64>,
    /// `R³ ×` the component at `R(cos θ, sin θ)`.
    pub values: Vec<f64>,
}

pub fn angles(m: usize) -> Vec<f64> {
    (0..m).map(|i| TAU * i as f64 / m as f64).collect()
}

/// Profiles of several components on one probe circle, sharing the
/// velocity evaluations.
pub fn angular_profiles(bs: &BiotSavart, t: f64, radius: f64, m: usize, components: &[Component]) -> Result<Vec<FarFieldProfile>, FarFieldError> {
    if m < MIN_ANGLES {
        return Err(FarFieldError::TooFewAngles(m));
    }
    let theta = angles(m);
    let pts: Vec<Point2> = theta.iter().map(|&a| Point2::polar(radius, a)).collect();
    let u = bs.velocities(&pts)?;
    let r3 = radius * radius * radius;
    Ok(components
        .iter()
        .map(|&c| FarFieldProfile {
            radius,
            time: t,
            component: c,
            theta: theta.clone(),
            values: u.iter().map(|&v| r3 * c.of(v)).collect(),
        })
        .collect())
}

pub fn angular_profile(omega: &GridScalarField, t: f64, radius: f64, m: usize, component: Component) -> Result<FarFieldProfile, FarFieldError> {
    Ok(angular_profiles(&BiotSavart::new(omega), t, radius, m, &[component])?.remove(0))
}

/// Profile of `R³ × (−∇H)` on the circle, the far field predicted by the
/// integral equation.
pub fn predicted_profile(flux: &MomentumFlux, t: f64, radius: f64, m: usize, component: Component) -> Result<FarFieldProfile, FarFieldError> {
    let theta = angles(m);
    let r3 = radius * radius * radius;
    let values = theta
        .iter()
        .map(|&a| grad_h(Point2::polar(radius, a), flux).map(|g| r3 * component.of([-g[0], -g[1]])))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| FarFieldError::Undefined)?;
    Ok(FarFieldProfile { radius, time: t, component, theta, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitVerdict {
    Detected,
    NotDetected,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    /// Phase of `A sin(3θ + φ)` in `[0, 2π)`.
    pub phase: f64,
    pub residual_rms: f64,
    pub detected_minima: Vec<f64>,
    pub verdict: FitVerdict,
}

/// Amplitudes below this are treated as noise.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Least-squares fit of `A sin(3θ + φ)` and the zeros of the profile.
pub fn fit_sinusoid(profile: &FarFieldProfile) -> Result<SinusoidFit, FarFieldError> {
    fit_sinusoid_with_floor(profile, NOISE_FLOOR)
}

pub fn fit_sinusoid_with_floor(profile: &FarFieldProfile, floor: f64) -> Result<SinusoidFit, FarFieldError> {
    if profile.component == Component::Speed {
        return Err(FarFieldError::SpeedNotFittable);
    }
    let (th, v) = (&profile.theta, &profile.values);
    // v ≈ p sin3θ + q cos3θ with p = A cos φ, q = A sin φ
    let (mut ss, mut sc, mut cc, mut vs, mut vc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in th.iter().zip(v) {
        let (s, c) = (3.0 * t).sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        vs += y * s;
        vc += y * c;
    }
    let det = ss * cc - sc * sc;
    let p = (vs * cc - vc * sc) / det;
    let q = (vc * ss - vs * sc) / det;
    let amplitude = p.hypot(q);
    let phase = q.atan2(p).rem_euclid(TAU);
    let residual_rms = (th
        .iter()
        .zip(v)
        .map(|(&t, &y)| {
            let r = y - amplitude * (3.0 * t + phase).sin();
            r * r
        })
        .sum::<f64>()
        / th.len() as f64)
        .sqrt();
    let detected_minima = zeros(v);
    let verdict = if amplitude <= floor {
        FitVerdict::Inconclusive
    } else if residual_rms <= amplitude && detected_minima.len() == 6 {
        FitVerdict::Detected
    } else {
        FitVerdict::NotDetected
    };
    Ok(SinusoidFit { amplitude, phase, residual_rms, detected_minima, verdict })
}

/// Sign changes of equispaced periodic samples, located by a cubic through
/// the four neighbouring samples.
fn zeros(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let h = TAU / m as f64;
    let at = |i: isize| v[i.rem_euclid(m as isize) as usize];
    let mut out = Vec::new();
    for i in 0..m as isize {
        let (a, b) = (at(i), at(i + 1));
        if a == 0.0 {
            out.push(i as f64 * h);
            continue;
        }
        if a * b >= 0.0 {
            continue;
        }
        let ys = [at(i - 1), a, b, at(i + 2)];
        let cubic = |s: f64| {
            let xs = [-1.0, 0.0, 1.0, 2.0];
            (0..4)
                .map(|k| {
                    let l: f64 = (0..4).filter(|&j| j != k).map(|j| (s - xs[j]) / (xs[k] - xs[j])).product();
                    ys[k] * l
                })
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        let flo = cubic(lo).signum();
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cubic(mid).signum() == flo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(((i as f64 + 0.5 * (lo + hi)) * h).rem_euclid(TAU));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Sign the far field carries relative to `+∇H` under the integral
/// equation `u = e^{tΔ}u₀ − ∫ F * (u ⊗ u)`.
pub const PREDICTED_SIGN: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub component: Component,
    pub amplitude: f64,
    pub l: f64,
    #[serde(deserialize_with = "crate::io::nullable_f64")]
    pub amplitude_error: f64,
    /// Phase of the `+∇H` component, `α` for `u2` and `α + π/2` for `u1`.
    pub reference_phase: f64,
    /// `+1` if the fit lines up with `+∇H`, `−1` if with `−∇H`.
    pub measured_sign: f64,
    pub sign_matches_prediction: bool,
    /// Phase error after removing the measured sign (equivalently modulo π).
    #[serde(deserialize_with = "crate::io::nullable_f64")]
    pub phase_error: f64,
    /// Largest distance from a detected zero to the nearest hexagon vertex.
    #[serde(deserialize_with = "crate::io::nullable_f64")]
    pub vertex_mismatch: f64,
}

pub fn compare_to_prediction(fit: &SinusoidFit, inv: &HexInvariant, component: Component) -> Result<Comparison, FarFieldError> {
    let hex = inv.hexagon.as_ref().ok_or(FarFieldError::Undefined)?;
    let (reference_phase, vertices) = match component {
        Component::U2 => (hex.alpha, hex.vertex_angles),
        Component::U1 => ((hex.alpha + FRAC_PI_2).rem_euclid(TAU), horizontal_angles(hex)),
        Component::Speed => return Err(FarFieldError::SpeedNotFittable),
    };
    let measured_sign = if circle_distance(fit.phase, reference_phase, TAU) <= FRAC_PI_2 { 1.0 } else { -1.0 };
    let phase_error = circle_distance(fit.phase, reference_phase, PI);
    let vertex_mismatch = fit
        .detected_minima
        .iter()
        .map(|&m| vertices.iter().map(|&v| circle_distance(m, v, TAU)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(Comparison {
        component,
        amplitude: fit.amplitude,
        l: inv.l,
        amplitude_error: (fit.amplitude - inv.l).abs() / inv.l,
        reference_phase,
        measured_sign,
        sign_matches_prediction: measured_sign == PREDICTED_SIGN,
        phase_error,
        vertex_mismatch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isotropy {
    #[serde(deserialize_with = "crate::io::nullable_f64")]
    pub cv: f64,
    pub mean: f64,
    pub min: f64,
    pub l: f64,
    #[serde(deserialize_with = "crate::io::nullable_f64")]
    pub mean_error: f64,
    /// `min > 0` whenever `L` is above the noise floor.
    pub nowhere_at_rest: bool,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn isotropy_check(profile: &FarFieldProfile, inv: &HexInvariant) -> Isotropy {
    let (mean, std) = mean_std(&profile.values);
    let min = profile.values.iter().copied().fold(f64::INFINITY, f64::min);
    Isotropy {
        cv: if mean != 0.0 { std / mean.abs() } else { 0.0 },
        mean,
        min,
        l: inv.l,
        mean_error: if inv.l > 0.0 { (mean - inv.l).abs() / inv.l } else { f64::NAN },
        nowhere_at_rest: inv.l <= NOISE_FLOOR || min > 0.0,
    }
}

/// Amplitudes of the angular harmonics `1..=6`.
pub fn harmonics(profile: &FarFieldProfile) -> [f64; 6] {
    let m = profile.values.len() as f64;
    std::array::from_fn(|k| {
        let k = (k + 1) as f64;
        let s: Complex64 = profile.theta.iter().zip(&profile.values).map(|(&t, &v)| v * Complex64::from_polar(1.0, -k * t)).sum();
        2.0 * s.norm() / m
    })
}

/// Limit `R → ∞` of `v(R) = v∞ + c/R` through two radii.
pub fn richardson(r1: f64, v1: f64, r2: f64, v2: f64) -> f64 {
    (r2 * v2 - r1 * v1) / (r2 - r1)
}

/// Square grayscale image of a far-field quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub size: usize,
    pub half_width: f64,
    /// Row-major, top row first; `NaN` marks masked pixels.
    pub data: Vec<f64>,
}

impl Raster {
    pub fn pixel_center(size: usize, half_width: f64, row: usize, col: usize) -> Point2 {
        let h = 2.0 * half_width / size as f64;
        Point2::new(-half_width + (col as f64 + 0.5) * h, half_width - (row as f64 + 0.5) * h)
    }

    pub fn range(&self) -> (f64, f64) {
        self.data.iter().filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Binary PGM (P5) with `|value|` mapped linearly onto `0..=255`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (lo, hi) = self.range();
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut out = format!("P5\n{} {}\n255\n", self.size, self.size).into_bytes();
        out.extend(self.data.iter().map(|&v| if v.is_finite() { (255.0 * (v - lo) / span).round() as u8 } else { 0 }));
        out
    }

    pub fn sidecar(&self) -> String {
        let (lo, hi) = self.range();
        let mut s = String::new();
        let _ = writeln!(s, "min {lo:.16e}");
        let _ = writeln!(s, "max {hi:.16e}");
        let _ = writeln!(s, "half_width {:.16e}", self.half_width);
        s
    }

    /// Writes `<stem>.pgm` and `<stem>.txt`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(), FarFieldError> {
        let io = |p: &Path, e| FarFieldError::Io { path: p.display().to_string(), source: e };
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let pgm = dir.join(format!("{stem}.pgm"));
        fs::write(&pgm, self.to_pgm()).map_err(|e| io(&pgm, e))?;
        let txt = dir.join(format!("{stem}.txt"));
        fs::write(&txt, self.sidecar()).map_err(|e| io(&txt, e))
    }

    /// Bilinear sample at a point; `None` off the image or on masked pixels.
    pub fn sample(&self, p: Point2) -> Option<f64> {
        let h = 2.0 * self.half_width / self.size as f64;
        let c = (p.x1 + self.half_width) / h - 0.5;
        let r = (self.half_width - p.x2) / h - 0.5;
        if c < 0.0 || r < 0.0 || c > (self.size - 1) as f64 || r > (self.size - 1) as f64 {
            return None;
        }
        let (c0, r0) = (c.floor() as usize, r.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(self.size - 1), (r0 + 1).min(self.size - 1));
        let (fc, fr) = (c - c0 as f64, r - r0 as f64);
        let at = |r: usize, c: usize| self.data[r * self.size + c];
        let v = (1.0 - fr) * ((1.0 - fc) * at(r0, c0) + fc * at(r0, c1)) + fr * ((1.0 - fc) * at(r1, c0) + fc * at(r1, c1));
        v.is_finite().then_some(v)
    }
}

/// Source of the rendered field.
pub enum DensitySource<'a> {
    /// `−∇H` from the flux matrix.
    ClosedForm(&'a MomentumFlux),
    Simulated(&'a BiotSavart),
}

/// `|x|³ |component|` over `[−w, w]²`. Pixels closer to the origin than
/// `inner` (or inside the probe margin for simulated fields) are masked.
pub fn render_density(source: DensitySource<'_>, component: Component, size: usize, half_width: f64, inner: f64) -> Result<Raster, FarFieldError> {
    let pts: Vec<Point2> = (0..size * size).map(|k| Raster::pixel_center(size, half_width, k / size, k % size)).collect();
    let data = match source {
        DensitySource::ClosedForm(flux) => {
            if flux.z().norm() == 0.0 {
                return Err(FarFieldError::Undefined);
            }
            pts.par_iter()
                .map(|&p| {
                    let r = p.norm();
                    if r < inner {
                        return f64::NAN;
                    }
                    grad_h(p, flux).map(|g| r * r * r * component.of(g).abs()).unwrap_or(f64::NAN)
                })
                .collect()
        }
        DensitySource::Simulated(bs) => {
            let cut = inner.max(PROBE_MARGIN * bs.support_radius() * (1.0 + 1e-12));
            pts.par_iter()
                .map(|&p| {
                    let r = p.norm();
                    if r <= cut {
                        return f64::NAN;
                    }
                    r * r * r * component.of(bs.velocity_unchecked(p)).abs()
                })
                .collect()
        }
    };
    Ok(Raster { size, half_width, data })
}

/// Sinusoid fit of one component and its comparison with the hexagon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFit {
    pub component: Component,
    pub fit: SinusoidFit,
    pub comparison: Option<Comparison>,
}

/// Everything measured on one probe circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusProbe {
    pub radius: f64,
    pub fits: Vec<ComponentFit>,
    pub isotropy: Option<Isotropy>,
    pub speed_harmonics: Option<[f64; 6]>,
}

/// Probes at one snapshot over several radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub time: f64,
    pub invariant: HexInvariant,
    pub radii: Vec<RadiusProbe>,
    pub profiles: Vec<FarFieldProfile>,
    /// Speed mean extrapolated from the two largest radii.
    pub extrapolated_mean: Option<f64>,
    pub extrapolated_error: Option<f64>,
    /// Speed coefficient of variation strictly decreasing in `R`.
    pub cv_decreasing: Option<bool>,
}

impl ProbeSet {
    pub fn fits_of(&self, component: Component) -> impl Iterator<Item = (f64, &ComponentFit)> {
        self.radii.iter().flat_map(move |r| r.fits.iter().filter(move |f| f.component == component).map(move |f| (r.radius, f)))
    }
}

/// Profiles, fits, comparisons and isotropy on each of `radii`.
pub fn probe_set(
    omega: &GridScalarField,
    flux: &MomentumFlux,
    t: f64,
    radii: &[f64],
    m: usize,
    components: &[Component],
) -> Result<ProbeSet, FarFieldError> {
    let bs = BiotSavart::new(omega);
    let invariant = crate::asymptotics::invariant_from_flux(flux);
    let mut probes = Vec::with_capacity(radii.len());
    let mut all = Vec::new();
    for &radius in radii {
        let profiles = angular_profiles(&bs, t, radius, m, components)?;
        let mut probe = RadiusProbe { radius, fits: Vec::new(), isotropy: None, speed_harmonics: None };
        for p in &profiles {
            match p.component {
                Component::Speed => {
                    probe.isotropy = Some(isotropy_check(p, &invariant));
                    probe.speed_harmonics = Some(harmonics(p));
                }
                c => {
                    let fit = fit_sinusoid(p)?;
                    let comparison = compare_to_prediction(&fit, &invariant, c).ok();
                    probe.fits.push(ComponentFit { component: c, fit, comparison });
                }
            }
        }
        probes.push(probe);
        all.extend(profiles);
    }
    let speed: Vec<(f64, &Isotropy)> = probes.iter().filter_map(|p| p.isotropy.as_ref().map(|i| (p.radius, i))).collect();
    let extrapolated_mean = (speed.len() >= 2).then(|| {
        let (r1, i1) = speed[speed.len() - 2];
        let (r2, i2) = speed[speed.len() - 1];
        richardson(r1, i1.mean, r2, i2.mean)
    });
    let extrapolated_error = extrapolated_mean.filter(|_| invariant.l > 0.0).map(|v| (v - invariant.l).abs() / invariant.l);
    let cv_decreasing = (!speed.is_empty()).then(|| speed.windows(2).all(|w| w[1].1.cv < w[0].1.cv));
    Ok(ProbeSet { time: t, invariant, radii: probes, profiles: all, extrapolated_mean, extrapolated_error, cv_decreasing })
}
