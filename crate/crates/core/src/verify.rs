//! Numerical harnesses for the supporting lemmas.
//!
//! * [`duhamel_eval`] computes `𝓛(w)(x,t) = ∫₀ᵗ∫F(x−y,t−s):w(y,s) dy ds` for
//!   closed-form tensor fields. Gaussian profiles collapse the spatial
//!   integral through the heat semigroup, `F(·,τ) * g_{τ₀} = F(·,τ+τ₀)`, and
//!   algebraic profiles are written as Gaussian scale mixtures.
//! * [`heat_tail_check`] measures `|x|³|e^{tΔ}u₀ − u₀|` with the heat
//!   integral done in polar form.
//! * [`weighted_norm_monitor`] and [`l2_decay_track`] observe decay along
//!   simulated trajectories.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridScalarField, GridVectorField};
use crate::initdata::{self, InitError};
use crate::kernels::{self, KernelError, Point2};
use crate::quad::{self, QuadError};
use crate::solver::{self, SolverError, Trajectory};

/// Absolute accuracy requested from [`duhamel_eval`].
pub const DUHAMEL_TOLERANCE: f64 = 1e-10;
/// Probe directions per radius in the Duhamel table.
pub const DUHAMEL_DIRECTIONS: usize = 16;
/// Final residual allowed, relative to the `|x|³|𝔉:∬w|` scale.
pub const DUHAMEL_FINAL_FRACTION: f64 = 0.05;
/// Probe directions per radius in the heat table.
pub const HEAT_DIRECTIONS: usize = 8;
/// Sampled times in `(0, T]` for the heat table.
pub const HEAT_TIMES: usize = 16;
/// Slack on the polynomial degree read off a T-doubling sequence.
pub const DEGREE_SLACK: f64 = 0.05;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("quadrature reached {achieved:e}, requested {requested:e}")]
    Accuracy { achieved: f64, requested: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<QuadError> for VerifyError {
    fn from(e: QuadError) -> Self {
        VerifyError::Accuracy { achieved: e.achieved, requested: e.requested }
    }
}

/// Spatial profile of a synthetic tensor field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `exp(−|y|²/2σ²)/(2πσ²)`, unit mass.
    Gaussian { width: f64 },
    /// `(1 + |y|²/w²)^{−q}` with `q > 1`, mass `πw²/(q−1)`.
    Algebraic { width: f64, power: f64 },
}

/// `w(y,s) = A·M·p(y)·s^{−a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTensorField {
    pub profile: Profile,
    pub matrix: [[f64; 2]; 2],
    pub exponent: f64,
    pub amplitude: f64,
}

impl SyntheticTensorField {
    pub fn gaussian(width: f64, matrix: [[f64; 2]; 2], exponent: f64) -> Result<Self, VerifyError> {
        Self { profile: Profile::Gaussian { width }, matrix, exponent, amplitude: 1.0 }.validated()
    }

    pub fn algebraic(width: f64, power: f64, matrix: [[f64; 2]; 2], exponent: f64) -> Result<Self, VerifyError> {
        Self { profile: Profile::Algebraic { width, power }, matrix, exponent, amplitude: 1.0 }.validated()
    }

    fn validated(self) -> Result<Self, VerifyError> {
        if !(0.0..1.0).contains(&self.exponent) {
            return Err(VerifyError::Precondition(format!("time exponent {} outside [0, 1)", self.exponent)));
        }
        let w = self.width();
        if !(w > 0.0 && w.is_finite()) {
            return Err(VerifyError::Precondition(format!("width {w} must be positive")));
        }
        if let Profile::Algebraic { power, .. } = self.profile {
            if !(power > 1.0 && power.is_finite()) {
                return Err(VerifyError::Precondition(format!("algebraic power {power} must exceed 1")));
            }
        }
        if !self.amplitude.is_finite() || self.matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(VerifyError::Precondition("non-finite coefficients".into()));
        }
        Ok(self)
    }

    pub fn width(&self) -> f64 {
        match self.profile {
            Profile::Gaussian { width } | Profile::Algebraic { width, .. } => width,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_matrix(mut self, matrix: [[f64; 2]; 2]) -> Self {
        self.matrix = matrix;
        self
    }

    fn profile_value(&self, y: Point2) -> f64 {
        match self.profile {
            Profile::Gaussian { width } => {
                let s2 = width * width;
                (-y.norm_sq() / (2.0 * s2)).exp() / (2.0 * PI * s2)
            }
            Profile::Algebraic { width, power } => (1.0 + y.norm_sq() / (width * width)).powf(-power),
        }
    }

    fn profile_mass(&self) -> f64 {
        match self.profile {
            Profile::Gaussian { .. } => 1.0,
            Profile::Algebraic { width, power } => PI * width * width / (power - 1.0),
        }
    }

    /// `w(y, s)`; `s` must be positive when the exponent is.
    pub fn eval(&self, y: Point2, s: f64) -> [[f64; 2]; 2] {
        let c = self.amplitude * self.profile_value(y) * s.powf(-self.exponent);
        self.matrix.map(|row| row.map(|m| c * m))
    }

    /// `∫₀ᵗ∫ w(y,s) dy ds`.
    pub fn space_time_integral(&self, t: f64) -> [[f64; 2]; 2] {
        let a = self.exponent;
        let c = self.amplitude * self.profile_mass() * t.powf(1.0 - a) / (1.0 - a);
        self.matrix.map(|row| row.map(|m| c * m))
    }

    /// `w_λ(y,s) = w(y/λ, s/λ²)` expressed in the same family.
    pub fn rescaled(&self, lambda: f64) -> Self {
        let a = self.exponent;
        let (profile, gain) = match self.profile {
            Profile::Gaussian { width } => (Profile::Gaussian { width: lambda * width }, lambda.powf(2.0 + 2.0 * a)),
            Profile::Algebraic { width, power } => {
                (Profile::Algebraic { width: lambda * width, power }, lambda.powf(2.0 * a))
            }
        };
        Self { profile, amplitude: self.amplitude * gain, ..*self }
    }

    fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || self.matrix.iter().flatten().all(|&m| m == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelValue {
    pub value: [f64; 2],
    pub error: f64,
}

fn contract_oseen(x: Point2, tau: f64, m: [[f64; 2]; 2]) -> [f64; 2] {
    kernels::oseen_kernel(x, tau).map(|k| k.contract(m)).unwrap_or([f64::NAN; 2])
}

/// `∫₀ᵗ s^{−a} F(x, t−s+τ₀):M ds`, with `s = v^{1/(1−a)}` removing the
/// endpoint singularity.
fn time_integral(x: Point2, t: f64, tau0: f64, a: f64, m: [[f64; 2]; 2], tol: f64) -> Result<([f64; 2], f64), VerifyError> {
    let p = 1.0 / (1.0 - a);
    let top = t.powf(1.0 - a);
    let (v, err) = quad::adaptive(0.0, top, tol, 1e-13, |v| {
        let s = v.powf(p).min(t);
        let k = contract_oseen(x, t - s + tau0, m);
        [p * k[0], p * k[1]]
    })?;
    if v.iter().any(|c| !c.is_finite()) {
        return Err(VerifyError::Precondition("kernel evaluation failed".into()));
    }
    Ok((v, err))
}

/// `𝓛(w)(x,t)` to absolute accuracy [`DUHAMEL_TOLERANCE`].
pub fn duhamel_eval(w: &SyntheticTensorField, x: Point2, t: f64) -> Result<DuhamelValue, VerifyError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(KernelError::NonPositiveTime(t).into());
    }
    if w.is_zero() {
        return Ok(DuhamelValue { value: [0.0; 2], error: 0.0 });
    }
    let r = x.norm();
    if !(r >= 2.0 * w.width()) {
        return Err(VerifyError::Precondition(format!(
            "|x| = {r} is inside twice the profile width {}",
            w.width()
        )));
    }
    let a = w.exponent;
    let amp = w.amplitude;
    let (value, error) = match w.profile {
        Profile::Gaussian { width } => {
            let (v, e) = time_integral(x, t, 0.5 * width * width, a, w.matrix, 1e-2 * DUHAMEL_TOLERANCE / amp.abs())?;
            ([amp * v[0], amp * v[1]], amp.abs() * e)
        }
        Profile::Algebraic { width, power } => {
            // λ = μ^{1/(q−1)} turns λ^{q−2}dλ into dμ/(q−1).
            let q1 = power - 1.0;
            let pre = amp * PI * width * width / libm::tgamma(power) / q1;
            let mu_max = 60f64.powf(q1);
            let inner_tol = 1e-3 * DUHAMEL_TOLERANCE / (pre.abs() * mu_max);
            let inner_err = std::sync::atomic::AtomicU64::new(0);
            let failed = std::sync::atomic::AtomicBool::new(false);
            let (v, e) = quad::adaptive(0.0, mu_max, 1e-2 * DUHAMEL_TOLERANCE / pre.abs(), 1e-12, |mu| {
                let lambda = mu.powf(1.0 / q1);
                if lambda <= 0.0 {
                    return [0.0; 2];
                }
                match time_integral(x, t, width * width / (4.0 * lambda), a, w.matrix, inner_tol) {
                    Ok((k, err)) => {
                        let prev = f64::from_bits(inner_err.load(std::sync::atomic::Ordering::Relaxed));
                        inner_err.store(prev.max(err).to_bits(), std::sync::atomic::Ordering::Relaxed);
                        let d = (-lambda).exp();
                        [d * k[0], d * k[1]]
                    }
                    Err(_) => {
                        failed.store(true, std::sync::atomic::Ordering::Relaxed);
                        [0.0; 2]
                    }
                }
            })?;
            if failed.into_inner() {
                return Err(VerifyError::Accuracy { achieved: f64::INFINITY, requested: inner_tol });
            }
            let inner = f64::from_bits(inner_err.into_inner()) * mu_max;
            ([pre * v[0], pre * v[1]], pre.abs() * (e + inner))
        }
    };
    if error > DUHAMEL_TOLERANCE {
        return Err(VerifyError::Accuracy { achieved: error, requested: DUHAMEL_TOLERANCE });
    }
    Ok(DuhamelValue { value, error })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuhamelRow {
    pub radius: f64,
    /// `max_θ |x|³|𝓛(w)(x,t) − 𝔉(x):∬w|`.
    pub residual: f64,
    /// `max_θ |x|³|𝔉(x):∬w|`.
    pub scale: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuhamelTable {
    pub time: f64,
    pub rows: Vec<DuhamelRow>,
    pub strictly_decreasing: bool,
    /// Last residual over last scale (infinite when the scale vanishes).
    pub final_fraction: f64,
}

impl DuhamelTable {
    pub fn passes(&self) -> bool {
        self.strictly_decreasing && self.final_fraction <= DUHAMEL_FINAL_FRACTION
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("radius,residual,scale,max_error\n");
        for r in &self.rows {
            s.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", r.radius, r.residual, r.scale, r.max_error));
        }
        s
    }
}

fn probe_direction(k: usize, count: usize) -> f64 {
    (k as f64 + 0.5) * 2.0 * PI / count as f64
}

/// Residual of `𝓛(w) ≈ 𝔉:∬w` over [`DUHAMEL_DIRECTIONS`] directions per radius.
pub fn duhamel_asymptotics_check(w: &SyntheticTensorField, t: f64, radii: &[f64]) -> Result<DuhamelTable, VerifyError> {
    let m = w.space_time_integral(t);
    let cells: Vec<(usize, usize)> = (0..radii.len()).flat_map(|i| (0..DUHAMEL_DIRECTIONS).map(move |k| (i, k))).collect();
    let samples = cells
        .par_iter()
        .map(|&(i, k)| {
            let r = radii[i];
            let x = Point2::polar(r, probe_direction(k, DUHAMEL_DIRECTIONS));
            let l = duhamel_eval(w, x, t)?;
            let f = kernels::fundamental_tensor(x)?.contract(m);
            let r3 = r * r * r;
            let res = r3 * (l.value[0] - f[0]).hypot(l.value[1] - f[1]);
            Ok((i, res, r3 * f[0].hypot(f[1]), l.error))
        })
        .collect::<Result<Vec<_>, VerifyError>>()?;
    let mut rows: Vec<DuhamelRow> =
        radii.iter().map(|&radius| DuhamelRow { radius, residual: 0.0, scale: 0.0, max_error: 0.0 }).collect();
    for (i, res, sc, err) in samples {
        let row = &mut rows[i];
        row.residual = row.residual.max(res);
        row.scale = row.scale.max(sc);
        row.max_error = row.max_error.max(err);
    }
    let strictly_decreasing = rows.windows(2).all(|p| p[1].residual < p[0].residual);
    let final_fraction = rows.last().map_or(f64::INFINITY, |r| {
        if r.scale > 0.0 {
            r.residual / r.scale
        } else {
            f64::INFINITY
        }
    });
    Ok(DuhamelTable { time: t, rows, strictly_decreasing, final_fraction })
}

/// Hypothesis classes of the heat-tail lemma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatCase {
    /// `u₀ = o(|x|⁻³)`.
    I,
    /// `∇u₀ = o(|x|⁻³)`.
    Ii,
    /// `Δu₀ = o(|x|⁻³)`.
    Iii,
    /// No hypothesis; the column is only required to stay bounded.
    Boundary,
}

impl HeatCase {
    pub fn name(self) -> &'static str {
        match self {
            HeatCase::I => "i",
            HeatCase::Ii => "ii",
            HeatCase::Iii => "iii",
            HeatCase::Boundary => "boundary",
        }
    }
}

/// Closed-form initial velocities for the heat harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeatDatum {
    /// `∇^⊥ exp(−|x|²/2w²)`.
    GaussianVortex { width: f64 },
    /// `(1+|x|²)^{−q} e₁`.
    AlgebraicTail { power: f64 },
    /// `∇(x₁/(1+|x|²))`: decays like `|x|⁻²` but is harmonic up to `O(|x|⁻⁶)`.
    DipoleGradient,
    /// `(1+|x|²)^{−3/2} (cos kx₁, sin kx₁)`: an exact `|x|⁻³` tail whose
    /// derivatives decay no faster.
    OscillatingCubic { wavenumber: f64 },
}

impl HeatDatum {
    pub fn eval(&self, x: Point2) -> [f64; 2] {
        match *self {
            HeatDatum::GaussianVortex { width } => {
                let w2 = width * width;
                let g = (-x.norm_sq() / (2.0 * w2)).exp() / w2;
                [x.x2 * g, -x.x1 * g]
            }
            HeatDatum::AlgebraicTail { power } => [(1.0 + x.norm_sq()).powf(-power), 0.0],
            HeatDatum::DipoleGradient => {
                let d = 1.0 + x.norm_sq();
                [(d - 2.0 * x.x1 * x.x1) / (d * d), -2.0 * x.x1 * x.x2 / (d * d)]
            }
            HeatDatum::OscillatingCubic { wavenumber } => {
                let a = (1.0 + x.norm_sq()).powf(-1.5);
                let (s, c) = (wavenumber * x.x1).sin_cos();
                [a * c, a * s]
            }
        }
    }

    /// Order of magnitude of `sup|u₀|`.
    fn magnitude(&self) -> f64 {
        match *self {
            HeatDatum::GaussianVortex { width } => 1.0 / width,
            _ => 1.0,
        }
    }

    /// Whether the datum satisfies the hypothesis of `case`.
    pub fn satisfies(&self, case: HeatCase) -> bool {
        match (*self, case) {
            (_, HeatCase::Boundary) | (HeatDatum::GaussianVortex { .. }, _) => true,
            // |u₀| ~ r^{−2q}, |∇u₀| ~ r^{−2q−1}, |Δu₀| ~ r^{−2q−2}.
            (HeatDatum::AlgebraicTail { power }, HeatCase::I) => power > 1.5,
            (HeatDatum::AlgebraicTail { power }, HeatCase::Ii) => power > 1.0,
            (HeatDatum::AlgebraicTail { power }, HeatCase::Iii) => power > 0.5,
            (HeatDatum::DipoleGradient, HeatCase::Iii) => true,
            _ => false,
        }
    }
}

/// Circular mean of `u₀` on the circle of radius `r` around `x`, by
/// periodic trapezoid refined until two successive doublings agree.
fn circular_mean(u0: &HeatDatum, x: Point2, r: f64) -> [f64; 2] {
    if r == 0.0 {
        return u0.eval(x);
    }
    let mut m = 64usize;
    let mut sum = [0.0; 2];
    let mut peak: f64 = 0.0;
    for k in 0..m {
        let v = u0.eval(x + Point2::polar(r, 2.0 * PI * k as f64 / m as f64));
        sum[0] += v[0];
        sum[1] += v[1];
        peak = peak.max(v[0].abs()).max(v[1].abs());
    }
    let mut prev = [sum[0] / m as f64, sum[1] / m as f64];
    let mut agreed = 0;
    while m < 1 << 20 {
        for k in 0..m {
            let v = u0.eval(x + Point2::polar(r, 2.0 * PI * (k as f64 + 0.5) / m as f64));
            sum[0] += v[0];
            sum[1] += v[1];
            peak = peak.max(v[0].abs()).max(v[1].abs());
        }
        m *= 2;
        let cur = [sum[0] / m as f64, sum[1] / m as f64];
        let delta = (cur[0] - prev[0]).abs().max((cur[1] - prev[1]).abs());
        prev = cur;
        if delta <= 1e-15 * peak {
            agreed += 1;
            if agreed == 2 {
                break;
            }
        } else {
            agreed = 0;
        }
    }
    prev
}

/// `e^{tΔ}u₀(x) − u₀(x) = ∫₀^∞ e^{−v}[A(√(4tv)) − u₀(x)] dv`, `A` the
/// circular mean. Returns the value and the quadrature error estimate.
pub fn heat_increment(u0: &HeatDatum, x: Point2, t: f64) -> Result<([f64; 2], f64), VerifyError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(KernelError::NonPositiveTime(t).into());
    }
    let base = u0.eval(x);
    let v_max = 60.0 + (x.norm() + 10.0).powi(2) / (4.0 * t);
    // Split at powers of two so the decaying weight is resolved from the start.
    let mut edges = vec![0.0];
    let mut e = 1.0;
    while e < v_max {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(v_max);
    let abs_tol = 1e-16 * u0.magnitude() / edges.len() as f64;
    let mut total = [0.0; 2];
    let mut err = 0.0;
    for w in edges.windows(2) {
        let (v, e) = quad::adaptive(w[0], w[1], abs_tol, 1e-11, |v| {
            let a = circular_mean(u0, x, (4.0 * t * v).sqrt());
            let d = (-v).exp();
            [d * (a[0] - base[0]), d * (a[1] - base[1])]
        })?;
        total[0] += v[0];
        total[1] += v[1];
        err += e;
    }
    Ok((total, err))
}

/// `e^{tΔ}u₀(x)` by the same quadrature.
pub fn heat_eval(u0: &HeatDatum, x: Point2, t: f64) -> Result<[f64; 2], VerifyError> {
    let (d, _) = heat_increment(u0, x, t)?;
    let b = u0.eval(x);
    Ok([b[0] + d[0], b[1] + d[1]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatRow {
    pub radius: f64,
    /// `sup_{t≤T} max_θ |x|³|e^{tΔ}u₀ − u₀|`.
    pub column: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatTable {
    pub case: HeatCase,
    pub datum: HeatDatum,
    pub final_time: f64,
    pub rows: Vec<HeatRow>,
    pub bounded: bool,
    pub strictly_decreasing: bool,
    /// Last column over first column.
    pub retained_fraction: f64,
}

impl HeatTable {
    /// Cases with a strict `o(·)` hypothesis must decrease; the boundary
    /// probe must stay bounded and keep at least a tenth of its size.
    pub fn passes(&self) -> bool {
        match self.case {
            HeatCase::Boundary => self.bounded && self.retained_fraction >= 0.1,
            _ => self.bounded && self.strictly_decreasing,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("radius,column\n");
        for r in &self.rows {
            s.push_str(&format!("{:.16e},{:.16e}\n", r.radius, r.column));
        }
        s
    }
}

fn heat_column(u0: &HeatDatum, final_time: f64, radius: f64) -> Result<f64, VerifyError> {
    let cells: Vec<(usize, usize)> =
        (0..HEAT_DIRECTIONS).flat_map(|k| (1..=HEAT_TIMES).map(move |j| (k, j))).collect();
    let vals = cells
        .par_iter()
        .map(|&(k, j)| {
            let x = Point2::polar(radius, probe_direction(k, HEAT_DIRECTIONS));
            let t = final_time * j as f64 / HEAT_TIMES as f64;
            let (d, _) = heat_increment(u0, x, t)?;
            Ok(radius.powi(3) * d[0].hypot(d[1]))
        })
        .collect::<Result<Vec<f64>, VerifyError>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Tail table of `|x|³ sup_t |e^{tΔ}u₀ − u₀|` along `radii`.
pub fn heat_tail_check(u0: &HeatDatum, case: HeatCase, final_time: f64, radii: &[f64]) -> Result<HeatTable, VerifyError> {
    if !u0.satisfies(case) {
        return Err(VerifyError::Precondition(format!("{u0:?} does not satisfy case {}", case.name())));
    }
    if !(final_time > 0.0 && final_time.is_finite()) {
        return Err(KernelError::NonPositiveTime(final_time).into());
    }
    let rows = radii
        .iter()
        .map(|&radius| heat_column(u0, final_time, radius).map(|column| HeatRow { radius, column }))
        .collect::<Result<Vec<_>, _>>()?;
    let bounded = rows.iter().all(|r| r.column.is_finite());
    let strictly_decreasing = rows.windows(2).all(|p| p[1].column < p[0].column);
    let retained_fraction = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) if f.column > 0.0 => l.column / f.column,
        _ => 0.0,
    };
    Ok(HeatTable { case, datum: *u0, final_time, rows, bounded, strictly_decreasing, retained_fraction })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub radius: f64,
    /// `(T, bound)` pairs with `T` doubling.
    pub rows: Vec<(f64, f64)>,
    /// `log₂(bound(2T)/bound(T))` per doubling.
    pub local_exponents: Vec<f64>,
    pub max_exponent: f64,
}

impl GrowthFit {
    pub fn polynomial_degree_at_most(&self, degree: f64) -> bool {
        self.max_exponent <= degree + DEGREE_SLACK
    }
}

/// Bound at a fixed radius for `T = T₀, 2T₀, …`; the largest local
/// exponent is the polynomial degree visible in `T`.
pub fn heat_growth_in_time(u0: &HeatDatum, radius: f64, t0: f64, doublings: usize) -> Result<GrowthFit, VerifyError> {
    let rows = (0..=doublings)
        .map(|i| {
            let t = t0 * f64::powi(2.0, i as i32);
            heat_column(u0, t, radius).map(|b| (t, b))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let local_exponents: Vec<f64> = rows.windows(2).map(|p| (p[1].1 / p[0].1).log2()).collect();
    let max_exponent = local_exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthFit { radius, rows, local_exponents, max_exponent })
}

/// Grid suprema of the decay weights applied to `u` and `∇u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorms {
    pub t: f64,
    pub sup_phi_u: f64,
    pub sup_psi_grad: f64,
}

/// `φ(x) = (1+|x|) log(e+|x|)^{1/2}`.
pub fn phi_weight(x: Point2) -> f64 {
    let r = x.norm();
    (1.0 + r) * (std::f64::consts::E + r).ln().sqrt()
}

/// `ψ(x) = (1+|x|)² log(e+|x|)^{1/2}`.
pub fn psi_weight(x: Point2) -> f64 {
    let r = x.norm();
    (1.0 + r).powi(2) * (std::f64::consts::E + r).ln().sqrt()
}

pub fn weighted_norm_monitor(u: &GridVectorField, t: f64) -> WeightedNorms {
    let g = *u.grid();
    let grad = u.gradient_magnitude();
    let n = g.n();
    let (a, b) = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut a: f64 = 0.0;
            let mut b: f64 = 0.0;
            for i in 0..n {
                let p = g.point(i, j);
                let v = u.at(i, j);
                a = a.max(phi_weight(p) * v[0].hypot(v[1]));
                b = b.max(psi_weight(p) * grad.at(i, j));
            }
            (a, b)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
    WeightedNorms { t, sup_phi_u: a, sup_psi_grad: b }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub t: f64,
    /// `‖u(t)‖²`.
    pub energy: f64,
    /// `‖e^{tΔ}u₀‖²`.
    pub heat_energy: f64,
    /// `‖u(t) − e^{tΔ}u₀‖²`.
    pub difference: f64,
    /// `C/(1+t)`.
    pub heat_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub rows: Vec<DecayRow>,
    /// `‖u₀‖² + ‖u₀‖²_{Ḣ⁻¹}/(2e)`.
    pub bound_constant: f64,
    pub energy_nonincreasing: bool,
    pub heat_bound_holds: bool,
    /// Least-squares slope of `log‖u−e^{tΔ}u₀‖²` against `log(1+t)` over
    /// the second half of the run.
    pub difference_exponent: Option<f64>,
    pub energy_exponent: Option<f64>,
}

impl DecaySeries {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,energy,heat_energy,difference,heat_bound\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.t, r.energy, r.heat_energy, r.difference, r.heat_bound
            ));
        }
        s
    }
}

fn late_slope(rows: &[DecayRow], pick: impl Fn(&DecayRow) -> f64) -> Option<f64> {
    let t_end = rows.last()?.t;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t >= 0.5 * t_end && r.t > 0.0 && pick(r) > 0.0)
        .map(|r| ((1.0 + r.t).ln(), pick(r).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// L² decay series along a trajectory recorded with stored vorticity fields.
pub fn l2_decay_track(traj: &Trajectory) -> Result<DecaySeries, VerifyError> {
    let first = traj.snapshots.first().ok_or_else(|| VerifyError::Precondition("empty trajectory".into()))?;
    let missing = || VerifyError::Precondition("trajectory was recorded without vorticity fields".into());
    let omega0 = first.omega.as_ref().ok_or_else(missing)?;
    let u0 = solver::velocity_from_vorticity(omega0)?;
    let e0 = solver::energy(&u0);
    let hm1 = initdata::hminus1_norm_sq(&u0)?;
    let bound_constant = e0 + hm1 / (2.0 * std::f64::consts::E);
    let rows = traj
        .snapshots
        .iter()
        .map(|s| {
            let omega = s.omega.as_ref().ok_or_else(missing)?;
            let t = s.time - first.time;
            let heat = solver::heat_evolve(omega0, t);
            let u = solver::velocity_from_vorticity(omega)?;
            let uh = solver::velocity_from_vorticity(&heat)?;
            let sub = |a: &GridScalarField, b: &GridScalarField| {
                let d = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
                GridScalarField::from_values(*a.grid(), d).expect("grid length")
            };
            let ud = GridVectorField::new(sub(&u.u1, &uh.u1), sub(&u.u2, &uh.u2)).expect("same grid");
            Ok(DecayRow {
                t,
                energy: solver::energy(&u),
                heat_energy: solver::energy(&uh),
                difference: solver::energy(&ud),
                heat_bound: bound_constant / (1.0 + t),
            })
        })
        .collect::<Result<Vec<_>, VerifyError>>()?;
    let energy_nonincreasing = rows.windows(2).all(|p| p[1].energy <= p[0].energy * (1.0 + 1e-12));
    let heat_bound_holds = rows.iter().all(|r| r.heat_energy <= r.heat_bound * (1.0 + 1e-12));
    let difference_exponent = late_slope(&rows, |r| r.difference);
    let energy_exponent = late_slope(&rows, |r| r.energy);
    Ok(DecaySeries { rows, bound_constant, energy_nonincreasing, heat_bound_holds, difference_exponent, energy_exponent })
}
