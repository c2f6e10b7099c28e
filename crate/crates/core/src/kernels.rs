//! Heat kernel, the fundamental tensor 𝔉 = ∂³E₂, the Oseen-type kernel `F`
//! of `e^{tΔ}ℙ div`, and the remainder `Ψ` of `F − 𝔉`.
//!
//! Tensors are indexed `[j][h][k]` with zero-based indices, so the
//! component written `(1,1,1)` in the usual notation is `t[0][0][0]`.
//!
//! With `ρ = |x|²/4t` and `S_{jhk} = δ_{hk}x_j + δ_{jk}x_h + δ_{jh}x_k`:
//!
//! * `𝔉 = S/(π|x|⁴) − 4 x_j x_h x_k/(π|x|⁶)`
//! * `F = F¹ + F²`, `F¹ = −x_h δ_{jk} g_t/(2t)`,
//!   `F² = S γ(2,ρ)/(π|x|⁴) − 2 x_j x_h x_k γ(3,ρ)/(π|x|⁶)`
//! * `Ψ(ξ) = e^{−ρ}[−|ξ|³ξ_h δ_{jk}/(8π) − (1+ρ)S(ξ)/(π|ξ|) + 2(ρ²+2ρ+2)ξ_jξ_hξ_k/(π|ξ|³)]`
//!   with `ρ = |ξ|²/4`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad;

/// Points closer than this to the origin are rejected by the singular kernels.
pub const ORIGIN_EXCLUSION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("kernel is singular at the origin (|x| = {0:e})")]
    Singular(f64),
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("quadrature reached {achieved:e}, requested {requested:e}")]
    Accuracy { achieved: f64, requested: f64 },
}

impl From<quad::QuadError> for KernelError {
    fn from(e: quad::QuadError) -> Self {
        KernelError::Accuracy { achieved: e.achieved, requested: e.requested }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(r * c, r * s)
    }

    pub fn norm_sq(self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn angle(self) -> f64 {
        self.x2.atan2(self.x1)
    }

    pub fn rotated(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x1 - s * self.x2, s * self.x1 + c * self.x2)
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x1, -self.x2)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x1, self * p.x2)
    }
}

/// A 2×2×2 tensor indexed `[j][h][k]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor3(pub [[[f64; 2]; 2]; 2]);

impl Tensor3 {
    pub fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = [[[0.0; 2]; 2]; 2];
        for (j, tj) in t.iter_mut().enumerate() {
            for (h, tjh) in tj.iter_mut().enumerate() {
                for (k, v) in tjh.iter_mut().enumerate() {
                    *v = f(j, h, k);
                }
            }
        }
        Tensor3(t)
    }

    pub fn get(&self, j: usize, h: usize, k: usize) -> f64 {
        self.0[j][h][k]
    }

    pub fn to_array(self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (idx, v) in out.iter_mut().enumerate() {
            *v = self.0[idx >> 2][(idx >> 1) & 1][idx & 1];
        }
        out
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        Self::from_fn(|j, h, k| a[4 * j + 2 * h + k])
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_array(self.to_array().map(f))
    }

    pub fn zip(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let a = self.to_array();
        let b = other.to_array();
        Self::from_fn(|j, h, k| {
            let i = 4 * j + 2 * h + k;
            f(a[i], b[i])
        })
    }

    pub fn scale(self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `Σ_{h,k} T_{jhk} M_{hk}`.
    pub fn contract(&self, m: [[f64; 2]; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (j, o) in out.iter_mut().enumerate() {
            for h in 0..2 {
                for k in 0..2 {
                    *o += self.0[j][h][k] * m[h][k];
                }
            }
        }
        out
    }
}

impl Add for Tensor3 {
    type Output = Tensor3;
    fn add(self, o: Tensor3) -> Tensor3 {
        self.zip(o, |a, b| a + b)
    }
}

impl Sub for Tensor3 {
    type Output = Tensor3;
    fn sub(self, o: Tensor3) -> Tensor3 {
        self.zip(o, |a, b| a - b)
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn s_tensor(x: [f64; 2]) -> Tensor3 {
    Tensor3::from_fn(|j, h, k| delta(h, k) * x[j] + delta(j, k) * x[h] + delta(j, h) * x[k])
}

fn cube_tensor(x: [f64; 2]) -> Tensor3 {
    Tensor3::from_fn(|j, h, k| x[j] * x[h] * x[k])
}

fn check_time(t: f64) -> Result<(), KernelError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(KernelError::NonPositiveTime(t))
    }
}

fn check_point(x: Point2) -> Result<f64, KernelError> {
    let r = x.norm();
    if r < ORIGIN_EXCLUSION || !r.is_finite() {
        Err(KernelError::Singular(r))
    } else {
        Ok(r)
    }
}

/// `g_t(x) = (4πt)⁻¹ exp(−|x|²/4t)`.
pub fn heat_kernel(x: Point2, t: f64) -> Result<f64, KernelError> {
    check_time(t)?;
    Ok((-x.norm_sq() / (4.0 * t)).exp() / (4.0 * PI * t))
}

/// `𝔉_{jhk}(x) = ∂_j∂_h∂_k E₂(x)` with `E₂ = −(4π)⁻¹ log|x|²`.
pub fn fundamental_tensor(x: Point2) -> Result<Tensor3, KernelError> {
    let r = check_point(x)?;
    let r2 = r * r;
    let xa = x.as_array();
    let s = s_tensor(xa);
    let c = cube_tensor(xa);
    Ok(s.zip(c, |sv, cv| (sv / r2 - 4.0 * cv / (r2 * r2)) / (PI * r2)))
}

/// `G_s(ρ) = γ(s, ρ)/ρ^s` for `s ∈ {2, 3}`, accurate for all `ρ ≥ 0`.
fn scaled_lower_gamma(s: u32, rho: f64) -> f64 {
    if rho < 1.0 {
        let sf = f64::from(s);
        let mut term = 1.0 / sf;
        let mut sum = term;
        let mut k = 1.0;
        while term > 1e-18 * sum {
            term *= rho / (sf + k);
            sum += term;
            k += 1.0;
        }
        (-rho).exp() * sum
    } else {
        let e = (-rho).exp();
        match s {
            2 => (1.0 - e * (1.0 + rho)) / (rho * rho),
            3 => (2.0 - e * (rho * rho + 2.0 * rho + 2.0)) / (rho * rho * rho),
            _ => unreachable!("only s = 2, 3 are needed"),
        }
    }
}

/// `F¹_{jhk}(x,t) = ∂_h g_t(x) δ_{jk}`.
pub fn oseen_local_part(x: Point2, t: f64) -> Result<Tensor3, KernelError> {
    let g = heat_kernel(x, t)?;
    let xa = x.as_array();
    Ok(Tensor3::from_fn(|j, h, k| -xa[h] * delta(j, k) * g / (2.0 * t)))
}

/// `F²_{jhk}(x,t) = ∫_t^∞ ∂_j∂_h∂_k g_s(x) ds`, finite at `x = 0`.
pub fn oseen_tail_part(x: Point2, t: f64) -> Result<Tensor3, KernelError> {
    check_time(t)?;
    let rho = x.norm_sq() / (4.0 * t);
    let g2 = scaled_lower_gamma(2, rho);
    let g3 = scaled_lower_gamma(3, rho);
    let xa = x.as_array();
    let s = s_tensor(xa);
    let c = cube_tensor(xa);
    Ok(s.zip(c, |sv, cv| sv * g2 / (16.0 * PI * t * t) - cv * g3 / (32.0 * PI * t * t * t)))
}

/// The kernel `F(x,t)` of `e^{tΔ}ℙ div`.
pub fn oseen_kernel(x: Point2, t: f64) -> Result<Tensor3, KernelError> {
    if !x.is_finite() {
        return Err(KernelError::Singular(f64::NAN));
    }
    Ok(oseen_local_part(x, t)? + oseen_tail_part(x, t)?)
}

/// `F` with the time integral done by adaptive quadrature instead of the
/// incomplete-gamma closed form. Slow; used as an independent cross-check.
pub fn oseen_kernel_quadrature(x: Point2, t: f64, abs_tol: f64) -> Result<Tensor3, KernelError> {
    check_time(t)?;
    let xa = x.as_array();
    let r2 = x.norm_sq();
    // s = t/v maps (t, ∞) to (0, 1]
    let integrand = |v: f64| -> [f64; 8] {
        if v <= 0.0 {
            return [0.0; 8];
        }
        let s = t / v;
        let g = (-r2 / (4.0 * s)).exp() / (4.0 * PI * s);
        let jac = t / (v * v);
        Tensor3::from_fn(|j, h, k| {
            let sv = delta(h, k) * xa[j] + delta(j, k) * xa[h] + delta(j, h) * xa[k];
            (sv / (4.0 * s * s) - xa[j] * xa[h] * xa[k] / (8.0 * s * s * s)) * g * jac
        })
        .to_array()
    };
    let (tail, _) = quad::adaptive(0.0, 1.0, abs_tol, 0.0, integrand)?;
    Ok(oseen_local_part(x, t)? + Tensor3::from_array(tail))
}

/// `Ψ(ξ) = |ξ|³(F(ξ,1) − 𝔉(ξ))`, evaluated without cancellation.
pub fn remainder_profile(xi: Point2) -> Result<Tensor3, KernelError> {
    let r = check_point(xi)?;
    let rho = r * r / 4.0;
    let e = (-rho).exp();
    if e == 0.0 {
        return Ok(Tensor3::default());
    }
    let xa = xi.as_array();
    let s = s_tensor(xa);
    let c = cube_tensor(xa);
    let poly = rho * rho + 2.0 * rho + 2.0;
    Ok(Tensor3::from_fn(|j, h, k| {
        let local = -r * r * r * xa[h] * delta(j, k) / (8.0 * PI);
        let tail = -(1.0 + rho) * s.get(j, h, k) / (PI * r) + 2.0 * poly * c.get(j, h, k) / (PI * r * r * r);
        e * (local + tail)
    }))
}

/// `Ψ(x/√t) = |x|³(F(x,t) − 𝔉(x))`.
pub fn kernel_remainder(x: Point2, t: f64) -> Result<Tensor3, KernelError> {
    check_time(t)?;
    check_point(x)?;
    remainder_profile((1.0 / t.sqrt()) * x)
}

/// Everything the kernel layer knows about one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub x: Point2,
    pub t: f64,
    pub g: f64,
    pub frak_f: Tensor3,
    pub f: Tensor3,
    pub psi: Tensor3,
}

pub fn sample(x: Point2, t: f64) -> Result<KernelSample, KernelError> {
    Ok(KernelSample {
        x,
        t,
        g: heat_kernel(x, t)?,
        frak_f: fundamental_tensor(x)?,
        f: oseen_kernel(x, t)?,
        psi: kernel_remainder(x, t)?,
    })
}

/// Ball integral `∫_{|y|≤R} F(y,t) dy` and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallMoment {
    pub value: Tensor3,
    /// Max-norm difference between the last two refinement levels.
    pub change: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
}

const MOMENT_TOL: f64 = 1e-10;

/// Tensor-product polar rule (Gauss–Legendre in `r`, trapezoid in `θ`),
/// refined by doubling until two successive levels differ by less than `1e-10`.
pub fn kernel_moment(radius: f64, t: f64) -> Result<BallMoment, KernelError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(KernelError::BadRadius(radius));
    }
    check_time(t)?;
    let mut nr = 16;
    let mut nt = 32;
    let mut prev = polar_rule(radius, t, nr, nt)?;
    loop {
        nr *= 2;
        nt *= 2;
        let next = polar_rule(radius, t, nr, nt)?;
        let change = (next - prev).max_abs();
        if change < MOMENT_TOL {
            return Ok(BallMoment { value: next, change, radial_nodes: nr, angular_nodes: nt });
        }
        if nr > 1024 {
            return Err(KernelError::Accuracy { achieved: change, requested: MOMENT_TOL });
        }
        prev = next;
    }
}

fn polar_rule(radius: f64, t: f64, nr: usize, nt: usize) -> Result<Tensor3, KernelError> {
    let dtheta = 2.0 * PI / nt as f64;
    let mut err = None;
    let v = quad::gauss_legendre(0.0, radius, nr, |r| {
        let mut acc = [0.0; 8];
        for i in 0..nt {
            match oseen_kernel(Point2::polar(r, dtheta * i as f64), t) {
                Ok(f) => {
                    for (a, fv) in acc.iter_mut().zip(f.to_array()) {
                        *a += fv;
                    }
                }
                Err(e) => err = Some(e),
            }
        }
        acc.map(|a| a * dtheta * r)
    });
    match err {
        Some(e) => Err(e),
        None => Ok(Tensor3::from_array(v)),
    }
}

/// `∫` of `F(·,t)` over the sector `{|y| ≤ R, θ0 ≤ arg y ≤ θ1}` by a
/// Gauss–Legendre product rule.
pub fn sector_moment(radius: f64, t: f64, theta0: f64, theta1: f64, nodes: usize) -> Result<Tensor3, KernelError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(KernelError::BadRadius(radius));
    }
    check_time(t)?;
    let v = quad::gauss_legendre(0.0, radius, nodes, |r| {
        let inner = quad::gauss_legendre(theta0, theta1, nodes, |th| {
            oseen_kernel(Point2::polar(r, th), t).map(|f| f.to_array()).unwrap_or([f64::NAN; 8])
        });
        inner.map(|a| a * r)
    });
    let out = Tensor3::from_array(v);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(KernelError::Singular(0.0))
    }
}

/// Fitted envelope of `max_θ |Ψ(ξ σ(θ))|` on `ξ_min ≤ |ξ| ≤ ξ_max`.
///
/// The model `log|Ψ| ≈ log C + m log|ξ| − c|ξ|²` is fitted on the upper
/// half of the log-spaced grid, past the plateau near `|ξ| ~ 1`; `c` is the
/// Gaussian rate and `envelope_decay` the factor `exp(−c(ξ_max² − ξ_min²))`.
/// `raw_ratio` is `|Ψ|(ξ_min)/|Ψ|(ξ_max)` without any fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderEnvelope {
    pub xi: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub log_c: f64,
    pub power: f64,
    pub rate: f64,
    pub envelope_decay: f64,
    pub raw_ratio: f64,
}

pub fn remainder_envelope(xi_min: f64, xi_max: f64, samples: usize) -> Result<RemainderEnvelope, KernelError> {
    if !(xi_min > 0.0 && xi_max > xi_min) || samples < 4 {
        return Err(KernelError::BadRadius(xi_min));
    }
    let ratio = (xi_max / xi_min).ln();
    let xi: Vec<f64> = (0..samples)
        .map(|i| xi_min * (ratio * i as f64 / (samples - 1) as f64).exp())
        .collect();
    let magnitude = xi.iter().map(|&r| remainder_magnitude(r)).collect::<Result<Vec<_>, _>>()?;
    let from = samples / 2;
    let rows: Vec<[f64; 3]> = xi[from..].iter().map(|&r| [1.0, r.ln(), -r * r]).collect();
    let rhs: Vec<f64> = magnitude[from..].iter().map(|m| m.ln()).collect();
    let [log_c, power, rate] = least_squares3(&rows, &rhs);
    let raw_ratio = magnitude[0] / magnitude[samples - 1];
    Ok(RemainderEnvelope {
        envelope_decay: (rate * (xi_max * xi_max - xi_min * xi_min)).exp(),
        xi,
        magnitude,
        log_c,
        power,
        rate,
        raw_ratio,
    })
}

/// `max_θ |Ψ(r σ(θ))|` over 64 directions.
pub fn remainder_magnitude(r: f64) -> Result<f64, KernelError> {
    let mut m: f64 = 0.0;
    for i in 0..64 {
        let th = 2.0 * PI * i as f64 / 64.0;
        m = m.max(remainder_profile(Point2::polar(r, th))?.norm());
    }
    Ok(m)
}

fn least_squares3(rows: &[[f64; 3]], rhs: &[f64]) -> [f64; 3] {
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (row, &y) in rows.iter().zip(rhs) {
        for i in 0..3 {
            b[i] += row[i] * y;
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    solve3(a, b)
}

pub(crate) fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for c in row + 1..3 {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Comma-separated dump of sampled kernel values, one line per tensor
/// component, indices one-based.
pub fn kernel_table(points: &[(Point2, f64)]) -> Result<String, KernelError> {
    let mut out = String::from("x1,x2,t,j,h,k,F,frakF,Psi\n");
    for &(x, t) in points {
        let s = sample(x, t)?;
        for j in 0..2 {
            for h in 0..2 {
                for k in 0..2 {
                    let _ = writeln!(
                        out,
                        "{:.16e},{:.16e},{:.16e},{},{},{},{:.16e},{:.16e},{:.16e}",
                        x.x1,
                        x.x2,
                        t,
                        j + 1,
                        h + 1,
                        k + 1,
                        s.f.get(j, h, k),
                        s.frak_f.get(j, h, k),
                        s.psi.get(j, h, k)
                    );
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: Tensor3, b: Tensor3) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn heat_kernel_values() {
        let g0 = heat_kernel(Point2::ORIGIN, 1.0).unwrap();
        assert!((g0 - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!((g0 - 0.079_577_5).abs() < 1e-7);
        let g2 = heat_kernel(Point2::new(2.0, 0.0), 1.0).unwrap();
        assert!((g2 - (-1.0f64).exp() / (4.0 * PI)).abs() < 1e-17);
        assert_eq!(heat_kernel(Point2::ORIGIN, 0.0), Err(KernelError::NonPositiveTime(0.0)));
        assert!(heat_kernel(Point2::ORIGIN, -1.0).is_err());
    }

    #[test]
    fn heat_kernel_has_unit_mass() {
        let n = 400;
        let h = 40.0 / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = Point2::new(-20.0 + i as f64 * h, -20.0 + j as f64 * h);
                s += heat_kernel(x, 1.0).unwrap();
            }
        }
        assert!((s * h * h - 1.0).abs() < 1e-12, "{}", s * h * h - 1.0);
    }

    #[test]
    fn frak_f_reference_component() {
        let f = fundamental_tensor(Point2::new(1.0, 0.0)).unwrap();
        assert!((f.get(0, 0, 0) + 1.0 / PI).abs() < 1e-15);
        assert!(matches!(fundamental_tensor(Point2::ORIGIN), Err(KernelError::Singular(_))));
    }

    #[test]
    fn frak_f_matches_finite_differences_of_e2() {
        let e2 = |p: Point2| -(p.norm_sq().ln()) / (4.0 * PI);
        let x = Point2::new(0.7, -1.1);
        let h = 1e-2;
        let f = fundamental_tensor(x).unwrap();
        // ∂₁∂₁∂₁ E₂ by a fourth-order stencil
        let d3 = |dir: Point2| {
            let at = |s: f64| e2(x + s * dir);
            (-at(3.0 * h) + 8.0 * at(2.0 * h) - 13.0 * at(h) + 13.0 * at(-h) - 8.0 * at(-2.0 * h) + at(-3.0 * h))
                / (8.0 * h * h * h)
        };
        let d111 = d3(Point2::new(1.0, 0.0));
        let d222 = d3(Point2::new(0.0, 1.0));
        assert!((d111 - f.get(0, 0, 0)).abs() < 1e-5, "{d111} {}", f.get(0, 0, 0));
        assert!((d222 - f.get(1, 1, 1)).abs() < 1e-5);
    }

    #[test]
    fn oseen_closed_form_matches_time_quadrature() {
        for &(x, t) in &[
            (Point2::new(0.3, 0.2), 0.5),
            (Point2::new(2.0, -1.0), 1.0),
            (Point2::new(1e-3, 2e-3), 0.1),
            (Point2::new(-4.0, 3.0), 0.2),
        ] {
            let a = oseen_kernel(x, t).unwrap();
            let b = oseen_kernel_quadrature(x, t, 1e-14).unwrap();
            assert!(rel(a, b) < 1e-9, "{x:?} {t} {}", rel(a, b));
        }
    }

    #[test]
    fn gamma_series_and_closed_form_agree_at_switch() {
        for s in [2, 3] {
            let below = scaled_lower_gamma(s, 1.0 - 1e-12);
            let above = scaled_lower_gamma(s, 1.0);
            assert!((below - above).abs() < 1e-11);
        }
        assert!((scaled_lower_gamma(2, 0.0) - 0.5).abs() < 1e-16);
        assert!((scaled_lower_gamma(3, 0.0) - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn remainder_matches_direct_difference_at_moderate_xi() {
        for &(x, t) in &[(Point2::new(1.0, 0.5), 1.0), (Point2::new(0.4, -2.0), 0.3)] {
            let r3 = x.norm().powi(3);
            let direct = (oseen_kernel(x, t).unwrap() - fundamental_tensor(x).unwrap()).scale(r3);
            let psi = kernel_remainder(x, t).unwrap();
            assert!(rel(psi, direct) < 1e-12, "{}", rel(psi, direct));
        }
    }

    #[test]
    fn remainder_depends_on_similarity_variable_only() {
        let x = Point2::new(0.8, -0.3);
        let a = kernel_remainder(x, 0.4).unwrap();
        let b = kernel_remainder(3.0 * x, 9.0 * 0.4).unwrap();
        assert!(rel(b, a) < 1e-9);
        let xi = Point2::new(1.5, 0.5);
        let c = kernel_remainder(xi, 1.0).unwrap();
        let d = kernel_remainder(0.2 * xi, 0.04).unwrap();
        assert!((c - d).max_abs() < 1e-10);
    }

    #[test]
    fn remainder_envelope_is_gaussian() {
        let env = remainder_envelope(1.0, 8.0, 40).unwrap();
        assert!(env.envelope_decay >= 1e6, "{env:?}");
        assert!(env.raw_ratio > 1e4);
        assert!((env.rate - 0.25).abs() < 0.02, "{}", env.rate);
        let tail = &env.magnitude[env.magnitude.len() / 2..];
        assert!(tail.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn remainder_magnitude_matches_quadrature_oracle() {
        for r in [1.0, 8.0] {
            let mut m: f64 = 0.0;
            for i in 0..64 {
                let x = Point2::polar(r, 2.0 * PI * i as f64 / 64.0);
                let f = oseen_kernel_quadrature(x, 1.0, 1e-15).unwrap();
                let psi = (f - fundamental_tensor(x).unwrap()).scale(r * r * r);
                m = m.max(psi.norm());
            }
            let ours = remainder_magnitude(r).unwrap();
            assert!((ours - m).abs() < 1e-9 * m.max(1e-4), "{r} {ours} {m}");
        }
    }

    #[test]
    fn moments_vanish() {
        for r in [0.5, 1.0, 5.0] {
            for t in [0.1, 1.0] {
                let m = kernel_moment(r, t).unwrap();
                assert!(m.value.max_abs() < 1e-8, "{r} {t} {:?}", m.value);
            }
        }
    }

    #[test]
    fn half_ball_integrals_cancel() {
        let upper = sector_moment(1.0, 0.3, 0.0, PI, 48).unwrap();
        let lower = sector_moment(1.0, 0.3, PI, 2.0 * PI, 48).unwrap();
        assert!(upper.max_abs() > 1e-3);
        assert!((upper + lower).max_abs() < 1e-10 * upper.max_abs());
    }

    #[test]
    fn kernel_table_has_eight_rows_per_point() {
        let csv = kernel_table(&[(Point2::new(1.0, 1.0), 1.0)]).unwrap();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("x1,x2,t,j,h,k,F,frakF,Psi"));
    }

    fn point() -> impl Strategy<Value = Point2> {
        (0.05f64..5.0, 0.0f64..(2.0 * PI)).prop_map(|(r, th)| Point2::polar(r, th))
    }

    proptest! {
        #[test]
        fn frak_f_is_homogeneous_and_odd(x in point()) {
            let f = fundamental_tensor(x).unwrap();
            let g = fundamental_tensor(2.5 * x).unwrap();
            prop_assert!(rel(g, f.scale(2.5f64.powi(-3))) < 1e-13);
            let m = fundamental_tensor(-x).unwrap();
            prop_assert!(rel(m, f.scale(-1.0)) < 1e-15);
        }

        #[test]
        fn symmetries(x in point(), t in 0.01f64..4.0) {
            let f = oseen_kernel(x, t).unwrap();
            let ff = fundamental_tensor(x).unwrap();
            let tail = oseen_tail_part(x, t).unwrap();
            let g = heat_kernel(x, t).unwrap();
            let xa = x.as_array();
            for j in 0..2 {
                for h in 0..2 {
                    for k in 0..2 {
                        prop_assert!((tail.get(j, h, k) - tail.get(h, j, k)).abs() <= 1e-15 * tail.max_abs());
                        prop_assert!((tail.get(j, h, k) - tail.get(k, h, j)).abs() <= 1e-15 * tail.max_abs());
                        let skew = f.get(j, h, k) - f.get(j, k, h);
                        let expect = (xa[k] * delta(j, h) - xa[h] * delta(j, k)) * g / (2.0 * t);
                        prop_assert!((skew - expect).abs() <= 1e-12 * f.max_abs());
                    }
                }
                let m = [[0.3, -1.2], [-1.2, 2.0]];
                let sym = Tensor3::from_fn(|j, h, k| 0.5 * (f.get(j, h, k) + f.get(j, k, h)));
                let (a, b) = (f.contract(m), sym.contract(m));
                prop_assert!((a[j] - b[j]).abs() <= 1e-13 * f.max_abs());
                for h in 0..2 {
                    for k in 0..2 {
                        prop_assert!((ff.get(j, h, k) - ff.get(h, j, k)).abs() <= 1e-15 * ff.max_abs());
                        prop_assert!((ff.get(j, h, k) - ff.get(k, h, j)).abs() <= 1e-15 * ff.max_abs());
                    }
                }
            }
            let m = oseen_kernel(-x, t).unwrap();
            prop_assert!(rel(m, f.scale(-1.0)) < 1e-15);
        }

        #[test]
        fn oseen_scaling(x in point(), t in 0.01f64..4.0) {
            let f = oseen_kernel(x, t).unwrap();
            let g = oseen_kernel((1.0 / t.sqrt()) * x, 1.0).unwrap().scale(t.powf(-1.5));
            prop_assert!(rel(f, g) < 1e-9);
        }

        #[test]
        fn trace_contraction_is_harmonic(x in point()) {
            let v = fundamental_tensor(x).unwrap().contract([[1.0, 0.0], [0.0, 1.0]]);
            let scale = x.norm().powi(-3);
            prop_assert!(v[0].abs() < 1e-12 * scale && v[1].abs() < 1e-12 * scale);
        }
    }
}
