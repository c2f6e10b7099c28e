//! Momentum flux `(a, b, d)`, the complex invariant `z = (a − d) + ib`,
//! `L = |z|/π`, the hexagon angle `α` and everything derived from them.
//!
//! `α` solves `cos α = (d − a)/|z|`, `sin α = b/|z|`. On the unit circle
//! `∇H(σ(θ)) = (|z|/π)(cos(3θ + α), sin(3θ + α))`, so the vertical component
//! vanishes at the six angles `θ_k = (kπ − α)/3` and the horizontal one at
//! the same set turned by `π/6`.

use std::f64::consts::{FRAC_PI_3, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridVectorField;
use crate::kernels::{fundamental_tensor, KernelError, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("hexagon undefined: L(t) = 0")]
    Undefined,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Time-integrated flux `a = ∫₀ᵗ∫u₁²`, `b = ∫₀ᵗ∫2u₁u₂`, `d = ∫₀ᵗ∫u₂²`
/// and the current integrands `da, db, dd`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentumFlux {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub da: f64,
    pub db: f64,
    pub dd: f64,
}

/// `[∫u₁², ∫2u₁u₂, ∫u₂²]` by grid quadrature.
pub fn flux_density(u: &GridVectorField) -> [f64; 3] {
    let area = u.grid().cell_area();
    let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
    for (p, q) in u.u1.values().iter().zip(u.u2.values()) {
        s11 += p * p;
        s12 += p * q;
        s22 += q * q;
    }
    [s11 * area, 2.0 * s12 * area, s22 * area]
}

impl MomentumFlux {
    pub fn new(a: f64, b: f64, d: f64) -> Self {
        Self { a, b, d, ..Self::default() }
    }

    pub fn with_rates(mut self, rates: [f64; 3]) -> Self {
        [self.da, self.db, self.dd] = rates;
        self
    }

    pub fn rates(&self) -> [f64; 3] {
        [self.da, self.db, self.dd]
    }

    /// Adds `weight_dt` times the given densities to `(a, b, d)`.
    pub fn add_weighted(&mut self, density: [f64; 3], weight_dt: f64) {
        self.a += weight_dt * density[0];
        self.b += weight_dt * density[1];
        self.d += weight_dt * density[2];
    }

    /// `[[a, b/2], [b/2, d]] = ∫₀ᵗ∫ u ⊗ u`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.a, 0.5 * self.b], [0.5 * self.b, self.d]]
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.a - self.d, self.b)
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// The flux seen in a frame turned by `phi`: `M ↦ R M Rᵀ`.
    pub fn rotated(&self, phi: f64) -> Self {
        let rot = |m: [[f64; 2]; 2]| {
            let (s, c) = phi.sin_cos();
            let r = [[c, -s], [s, c]];
            let mut out = [[0.0; 2]; 2];
            for (i, oi) in out.iter_mut().enumerate() {
                for (j, o) in oi.iter_mut().enumerate() {
                    for k in 0..2 {
                        for l in 0..2 {
                            *o += r[i][k] * m[k][l] * r[j][l];
                        }
                    }
                }
            }
            out
        };
        let m = rot(self.matrix());
        let dm = rot([[self.da, 0.5 * self.db], [0.5 * self.db, self.dd]]);
        Self { a: m[0][0], b: 2.0 * m[0][1], d: m[1][1], da: dm[0][0], db: 2.0 * dm[0][1], dd: dm[1][1] }
    }
}

/// Adds `weight_dt` times the densities of `u` and records them as the
/// current rates.
pub fn accumulate_flux(flux: MomentumFlux, u: &GridVectorField, weight_dt: f64) -> MomentumFlux {
    let density = flux_density(u);
    let mut out = flux.with_rates(density);
    out.add_weighted(density, weight_dt);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hexagon {
    pub alpha: f64,
    /// `θ_k = (kπ − α)/3` reduced to `[0, 2π)`, in `k` order.
    pub vertex_angles: [f64; 6],
    pub vertices: [Point2; 6],
    /// `σ_t` whose sixth roots are the vertical-component vertices.
    pub sigma_vertical: [f64; 2],
    pub sigma_horizontal: [f64; 2],
    /// `|α̇|`.
    #[serde(deserialize_with = "crate::io::nullable_f64")]
    pub hex_speed: f64,
    /// `√2 (ȧ + ḋ)/(πL)`.
    #[serde(deserialize_with = "crate::io::nullable_f64")]
    pub bound: f64,
    /// `|α̇|/3`, the rotation rate of the vertices.
    #[serde(deserialize_with = "crate::io::nullable_f64")]
    pub vertex_speed: f64,
}

impl Hexagon {
    /// Vertices of the horizontal-component hexagon.
    pub fn horizontal_vertices(&self) -> [Point2; 6] {
        let (s, c) = (PI / 6.0).sin_cos();
        self.vertices.map(|v| Point2::new(c * v.x1 - s * v.x2, s * v.x1 + c * v.x2))
    }

    /// `sin(3θ + α)` at each vertex, computed as `Im(σ³ e^{iα})`.
    pub fn vertex_residuals(&self, unit_alpha: Complex64) -> [f64; 6] {
        self.vertices.map(|v| {
            let s = Complex64::new(v.x1, v.x2);
            (s * s * s * unit_alpha).im
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HexInvariant {
    pub z_re: f64,
    pub z_im: f64,
    pub l: f64,
    /// `None` when `L = 0`.
    pub hexagon: Option<Hexagon>,
}

impl HexInvariant {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.z_re, self.z_im)
    }

    pub fn alpha(&self) -> Option<f64> {
        self.hexagon.map(|h| h.alpha)
    }

    pub fn require(&self) -> Result<&Hexagon, AsymptoticsError> {
        self.hexagon.as_ref().ok_or(AsymptoticsError::Undefined)
    }
}

/// `e^{iα} = ((d − a) + ib)/|z|`.
pub fn unit_alpha(flux: &MomentumFlux) -> Option<Complex64> {
    let w = Complex64::new(flux.d - flux.a, flux.b);
    let m = w.norm();
    (m > 0.0).then(|| w / m)
}

pub fn invariant_from_flux(flux: &MomentumFlux) -> HexInvariant {
    let z = flux.z();
    let l = z.norm() / PI;
    let hexagon = unit_alpha(flux).map(|ea| {
        let alpha = ea.arg().rem_euclid(2.0 * PI);
        let target = ea.conj();
        let mut base = Complex64::from_polar(1.0, -alpha / 3.0);
        for _ in 0..2 {
            base -= (base * base * base - target) / (3.0 * base * base);
        }
        let half = 0.5;
        let root3 = 0.75f64.sqrt();
        let sixth = [
            Complex64::new(1.0, 0.0),
            Complex64::new(half, root3),
            Complex64::new(-half, root3),
            Complex64::new(-1.0, 0.0),
            Complex64::new(-half, -root3),
            Complex64::new(half, -root3),
        ];
        let vertices = sixth.map(|w| {
            let v = base * w;
            Point2::new(v.re, v.im)
        });
        let vertex_angles = std::array::from_fn(|k| ((k as f64 * PI - alpha) / 3.0).rem_euclid(2.0 * PI));
        let sigma = z * z / z.norm_sqr();
        let (hex_speed, bound) = speed_parts(flux, l);
        Hexagon {
            alpha,
            vertex_angles,
            vertices,
            sigma_vertical: [sigma.re, sigma.im],
            sigma_horizontal: [-sigma.re, -sigma.im],
            hex_speed,
            bound,
            vertex_speed: hex_speed / 3.0,
        }
    });
    HexInvariant { z_re: z.re, z_im: z.im, l, hexagon }
}

fn speed_parts(flux: &MomentumFlux, l: f64) -> (f64, f64) {
    let dma = flux.d - flux.a;
    let den = dma * dma + flux.b * flux.b;
    let num = (flux.db * dma - flux.b * (flux.dd - flux.da)).abs();
    (num / den, 2f64.sqrt() * (flux.da + flux.dd) / (PI * l))
}

/// `(|α̇|, √2‖u‖²/(πL))`.
pub fn hexagon_speed(flux: &MomentumFlux) -> Result<(f64, f64), AsymptoticsError> {
    let l = flux.z().norm() / PI;
    if l == 0.0 {
        return Err(AsymptoticsError::Undefined);
    }
    Ok(speed_parts(flux, l))
}

fn check_origin(x: Point2) -> Result<f64, AsymptoticsError> {
    let r2 = x.norm_sq();
    if r2.sqrt() < crate::kernels::ORIGIN_EXCLUSION {
        return Err(KernelError::Singular(r2.sqrt()).into());
    }
    Ok(r2)
}

/// Closed form of `∇H(x)` for the flux matrix.
pub fn grad_h(x: Point2, flux: &MomentumFlux) -> Result<[f64; 2], AsymptoticsError> {
    let r2 = check_origin(x)?;
    let (x1, x2) = (x.x1, x.x2);
    let amd = flux.a - flux.d;
    let b = flux.b;
    let c3 = x1 * x1 * x1 - 3.0 * x1 * x2 * x2;
    let s3 = 3.0 * x1 * x1 * x2 - x2 * x2 * x2;
    let den = PI * r2 * r2 * r2;
    Ok([(-amd * c3 - b * s3) / den, (-amd * s3 + b * c3) / den])
}

/// `∇H` as the contraction `𝔉(x) : M`.
pub fn grad_h_from_tensor(x: Point2, flux: &MomentumFlux) -> Result<[f64; 2], AsymptoticsError> {
    Ok(fundamental_tensor(x)?.contract(flux.matrix()))
}

/// `P(θ) = (|z|/π)(cos(3θ + α), sin(3θ + α))`.
pub fn profile_p(theta: f64, flux: &MomentumFlux) -> Result<[f64; 2], AsymptoticsError> {
    let ea = unit_alpha(flux).ok_or(AsymptoticsError::Undefined)?;
    let amp = flux.z().norm() / PI;
    let w = Complex64::from_polar(1.0, 3.0 * theta) * ea;
    Ok([amp * w.re, amp * w.im])
}

/// `(1/π) √((∫(u₁² − u₂²))² + (∫2u₁u₂)²)`.
pub fn short_time_slope(u0: &GridVectorField) -> f64 {
    let [s11, s12, s22] = crate::asymptotics::flux_density(u0);
    (s11 - s22).hypot(s12) / PI
}

/// One row of a flux time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSample {
    pub t: f64,
    pub flux: MomentumFlux,
    /// `‖u(t)‖₂²`.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LargeTimeStatus {
    Conclusive,
    Inconclusive(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeTimeEstimate {
    pub invariant: HexInvariant,
    pub t: f64,
    /// Fitted `‖u(s)‖² ≈ C s^{−β}` on the late half of the series.
    pub decay_c: f64,
    pub decay_beta: f64,
    /// `∫_t^∞ C s^{−β} ds`, an estimate of `|z(∞) − z(t)|`.
    pub tail_bound: Option<f64>,
    pub status: LargeTimeStatus,
}

impl LargeTimeEstimate {
    pub fn tail_bound_at(&self, t: f64) -> Option<f64> {
        (self.decay_beta > 1.0).then(|| self.decay_c * t.powf(1.0 - self.decay_beta) / (self.decay_beta - 1.0))
    }
}

/// Builds the invariant from the last sample and bounds the remaining drift
/// of `z` by a power-law fit to the late energy decay. Requires the energy
/// to have dropped by `decay_factor`.
pub fn large_time_extrapolate(series: &[FluxSample], decay_factor: f64) -> LargeTimeEstimate {
    let last = series.last().copied().unwrap_or(FluxSample { t: 0.0, flux: MomentumFlux::default(), energy: 0.0 });
    let invariant = invariant_from_flux(&last.flux);
    let late: Vec<&FluxSample> = series[series.len() / 2..].iter().filter(|s| s.t > 0.0 && s.energy > 0.0).collect();
    let (c, beta) = if late.len() >= 2 {
        let pts: Vec<(f64, f64)> = late.iter().map(|s| (s.t.ln(), s.energy.ln())).collect();
        let (slope, icpt) = linear_fit(&pts);
        (icpt.exp(), -slope)
    } else {
        (0.0, 0.0)
    };
    let mut est = LargeTimeEstimate { invariant, t: last.t, decay_c: c, decay_beta: beta, tail_bound: None, status: LargeTimeStatus::Conclusive };
    let e0 = series.first().map_or(0.0, |s| s.energy);
    if series.len() < 4 || !(last.energy * decay_factor <= e0) {
        est.status = LargeTimeStatus::Inconclusive(format!("energy decayed by {:.3e}, need {decay_factor:.3e}", e0 / last.energy));
    } else if beta <= 1.0 {
        est.status = LargeTimeStatus::Inconclusive(format!("late energy decay exponent {beta:.3} does not exceed 1"));
    } else {
        est.tail_bound = est.tail_bound_at(last.t);
    }
    est
}

/// Least-squares line `y = slope x + intercept`.
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Absolute change of the unwrapped `α` across consecutive windows of
/// `window` samples. Samples with an undefined hexagon are skipped.
pub fn alpha_window_increments(series: &[FluxSample], window: usize) -> Vec<f64> {
    let alphas: Vec<f64> = series.iter().filter_map(|s| invariant_from_flux(&s.flux).alpha()).collect();
    let unwrapped = unwrap_angles(&alphas);
    unwrapped
        .iter()
        .step_by(window.max(1))
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .collect()
}

pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (i, &a) in angles.iter().enumerate() {
        if i > 0 {
            let prev = angles[i - 1];
            let jump = a - prev;
            if jump > PI {
                offset -= 2.0 * PI;
            } else if jump < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(a + offset);
    }
    out
}

/// Distance between two angles on the circle of circumference `period`.
pub fn circle_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Comma-separated series with columns
/// `t,a,b,d,da,db,dd,L,alpha,hex_speed,bound,energy`; undefined hexagon
/// fields are left empty.
pub fn time_series_csv(series: &[FluxSample]) -> String {
    let mut out = String::from("t,a,b,d,da,db,dd,L,alpha,hex_speed,bound,energy\n");
    for s in series {
        let inv = invariant_from_flux(&s.flux);
        let f = s.flux;
        let _ = write!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", s.t, f.a, f.b, f.d, f.da, f.db, f.dd, inv.l);
        match inv.hexagon {
            Some(h) => {
                let _ = writeln!(out, ",{:.16e},{:.16e},{:.16e},{:.16e}", h.alpha, h.hex_speed, h.bound, s.energy);
            }
            None => {
                let _ = writeln!(out, ",,,,{:.16e}", s.energy);
            }
        }
    }
    out
}

/// Angles of the horizontal-component hexagon, `θ_k + π/6`.
pub fn horizontal_angles(h: &Hexagon) -> [f64; 6] {
    h.vertex_angles.map(|a| (a + FRAC_PI_3 / 2.0).rem_euclid(2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flux() -> impl Strategy<Value = MomentumFlux> {
        (0.0f64..5.0, -3.0f64..3.0, 0.0f64..5.0, 0.0f64..2.0, -1.0f64..1.0, 0.0f64..2.0)
            .prop_filter("nondegenerate", |(a, b, d, ..)| (a - d).hypot(*b) > 1e-3)
            .prop_map(|(a, b, d, da, db, dd)| MomentumFlux { a, b, d, da, db, dd })
    }

    #[test]
    fn reference_case_a_one() {
        let inv = invariant_from_flux(&MomentumFlux::new(1.0, 0.0, 0.0));
        assert_eq!(inv.z(), Complex64::new(1.0, 0.0));
        assert!((inv.l - 1.0 / PI).abs() < 1e-16);
        let h = inv.hexagon.unwrap();
        assert!((h.alpha - PI).abs() < 1e-15);
        for k in 0..6 {
            let expect = ((k as f64 * PI - PI) / 3.0).rem_euclid(2.0 * PI);
            assert!(circle_distance(h.vertex_angles[k], expect, 2.0 * PI) < 1e-15);
            let v = Point2::polar(1.0, expect);
            assert!((h.vertices[k] - v).norm() < 1e-15);
        }
    }

    #[test]
    fn reference_case_a_equals_d() {
        let h = invariant_from_flux(&MomentumFlux::new(2.0, 0.5, 2.0)).hexagon.unwrap();
        assert!((h.alpha - PI / 2.0).abs() < 1e-15);
        let mut got = h.vertex_angles.to_vec();
        got.sort_by(f64::total_cmp);
        for k in 0..6 {
            let expect = (-PI / 6.0 + k as f64 * PI / 3.0).rem_euclid(2.0 * PI);
            assert!(got.iter().any(|&a| circle_distance(a, expect, 2.0 * PI) < 1e-15));
        }
    }

    #[test]
    fn zero_flux_is_undefined() {
        let inv = invariant_from_flux(&MomentumFlux::new(1.0, 0.0, 1.0));
        assert_eq!(inv.l, 0.0);
        assert!(inv.hexagon.is_none());
        assert_eq!(hexagon_speed(&MomentumFlux::new(1.0, 0.0, 1.0)), Err(AsymptoticsError::Undefined));
        assert!(profile_p(0.3, &MomentumFlux::default()).is_err());
    }

    #[test]
    fn grad_h_reference() {
        let g = grad_h(Point2::new(1.0, 0.0), &MomentumFlux::new(1.0, 0.0, 0.0)).unwrap();
        assert!((g[0] + 1.0 / PI).abs() < 1e-16 && g[1] == 0.0);
        assert!(grad_h(Point2::ORIGIN, &MomentumFlux::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn b_zero_means_no_rotation() {
        let f = MomentumFlux { a: 2.0, b: 0.0, d: 1.0, da: 0.3, db: 0.0, dd: 0.1 };
        assert_eq!(hexagon_speed(&f).unwrap().0, 0.0);
    }

    #[test]
    fn time_series_has_header_and_rows() {
        let s = vec![
            FluxSample { t: 0.0, flux: MomentumFlux::default(), energy: 1.0 },
            FluxSample { t: 0.1, flux: MomentumFlux::new(0.2, 0.1, 0.05), energy: 0.9 },
        ];
        let csv = time_series_csv(&s);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,a,b,d,da,db,dd,L,alpha,hex_speed,bound,energy");
        assert_eq!(lines[1].split(',').count(), 12);
        assert_eq!(lines[2].split(',').count(), 12);
    }

    #[test]
    fn extrapolation_of_power_law_decay() {
        let series: Vec<FluxSample> = (1..=40)
            .map(|i| {
                let t = i as f64;
                FluxSample { t, flux: MomentumFlux::new(1.0 - 1.0 / t, 0.2, 0.1), energy: 3.0 * t.powf(-2.0) }
            })
            .collect();
        let est = large_time_extrapolate(&series, 100.0);
        assert_eq!(est.status, LargeTimeStatus::Conclusive);
        assert!((est.decay_beta - 2.0).abs() < 1e-10);
        assert!((est.tail_bound.unwrap() - 3.0 / 40.0).abs() < 1e-9);
        let a = est.tail_bound_at(10.0).unwrap();
        let b = est.tail_bound_at(20.0).unwrap();
        assert!(a > b && b > 0.0);
        let short = large_time_extrapolate(&series[..3], 100.0);
        assert!(matches!(short.status, LargeTimeStatus::Inconclusive(_)));
    }

    #[test]
    fn unwrap_removes_jumps() {
        let u = unwrap_angles(&[6.2, 0.05, 0.2]);
        assert!((u[1] - (0.05 + 2.0 * PI)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn speed_is_radial(f in flux(), r in 0.1f64..10.0, th in 0.0f64..(2.0 * PI)) {
            let g = grad_h(Point2::polar(r, th), &f).unwrap();
            let expect = f.z().norm() / (PI * r * r * r);
            prop_assert!((g[0].hypot(g[1]) - expect).abs() <= 1e-12 * expect);
        }

        #[test]
        fn tensor_contraction_agrees(f in flux(), r in 0.1f64..10.0, th in 0.0f64..(2.0 * PI)) {
            let x = Point2::polar(r, th);
            let g = grad_h(x, &f).unwrap();
            let t = grad_h_from_tensor(x, &f).unwrap();
            let s = g[0].hypot(g[1]);
            prop_assert!((g[0] - t[0]).abs() <= 1e-12 * s && (g[1] - t[1]).abs() <= 1e-12 * s);
        }

        #[test]
        fn homogeneity(f in flux(), th in 0.0f64..(2.0 * PI), lam in 0.2f64..5.0) {
            let x = Point2::polar(1.3, th);
            let g = grad_h(x, &f).unwrap();
            let h = grad_h(lam * x, &f).unwrap();
            let s = lam.powi(-3);
            prop_assert!((h[0] - s * g[0]).abs() <= 1e-13 * g[0].hypot(g[1]) && (h[1] - s * g[1]).abs() <= 1e-13 * g[0].hypot(g[1]));
        }

        #[test]
        fn profile_matches_grad_h(f in flux(), th in 0.0f64..(2.0 * PI)) {
            let p = profile_p(th, &f).unwrap();
            let g = grad_h(Point2::polar(1.0, th), &f).unwrap();
            let s = f.z().norm() / PI;
            prop_assert!((p[0] - g[0]).abs() <= 1e-12 * s && (p[1] - g[1]).abs() <= 1e-12 * s);
            let q = profile_p(th + 2.0 * PI / 3.0, &f).unwrap();
            prop_assert!((q[0] - p[0]).abs() <= 1e-12 * s && (q[1] - p[1]).abs() <= 1e-12 * s);
        }

        #[test]
        fn vertex_algebra(f in flux()) {
            let inv = invariant_from_flux(&f);
            let h = inv.hexagon.unwrap();
            let ea = unit_alpha(&f).unwrap();
            for r in h.vertex_residuals(ea) {
                prop_assert!(r.abs() <= 1e-15);
            }
            let target = Complex64::from_polar(1.0, -2.0 * h.alpha);
            let sigma = Complex64::new(h.sigma_vertical[0], h.sigma_vertical[1]);
            prop_assert!((sigma - target).norm() < 1e-12);
            for v in h.vertices {
                let c = Complex64::new(v.x1, v.x2);
                prop_assert!((c.powi(6) - target).norm() < 1e-12);
            }
            let hor = h.horizontal_vertices();
            let sh = Complex64::new(h.sigma_horizontal[0], h.sigma_horizontal[1]);
            for v in hor {
                prop_assert!((Complex64::new(v.x1, v.x2).powi(6) - sh).norm() < 1e-12);
            }
            for (k, a) in horizontal_angles(&h).iter().enumerate() {
                prop_assert!(circle_distance(*a, h.vertex_angles[k] + PI / 6.0, 2.0 * PI) < 1e-12);
            }
            prop_assert!((Complex64::from_polar(1.0, h.alpha) - ea).norm() < 1e-15);
            for w in h.vertex_angles.windows(2) {
                prop_assert!(circle_distance(w[1] - w[0], PI / 3.0, 2.0 * PI) < 1e-12);
            }
        }

        #[test]
        fn speed_bound_holds_for_admissible_flux(
            u11 in 0.0f64..2.0, u22 in 0.0f64..2.0, c in -1.0f64..1.0,
            a in 0.0f64..3.0, d in 0.0f64..3.0, cb in -1.0f64..1.0,
        ) {
            // rates from a Gram matrix, accumulated flux also Gram-admissible
            let da = u11; let dd = u22; let db = 2.0 * c * (u11 * u22).sqrt();
            let b = 2.0 * cb * (a * d).sqrt();
            let f = MomentumFlux { a, b, d, da, db, dd };
            prop_assume!(f.z().norm() > 1e-6);
            let (s, bound) = hexagon_speed(&f).unwrap();
            prop_assert!(s <= bound * (1.0 + 1e-9));
            prop_assert!(f.z().norm() <= f.trace() * (1.0 + 1e-12));
        }

        #[test]
        fn frame_rotation_keeps_modulus(f in flux(), phi in 0.0f64..(2.0 * PI)) {
            let g = f.rotated(phi);
            prop_assert!((g.z().norm() - f.z().norm()).abs() <= 1e-12 * f.trace().max(1.0));
            let expect = f.z() * Complex64::from_polar(1.0, 2.0 * phi);
            prop_assert!((g.z() - expect).norm() <= 1e-12 * f.trace().max(1.0));
        }
    }
}
