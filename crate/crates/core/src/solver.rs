//! Pseudospectral vorticity solver for `∂_t ω + u·∇ω = Δω` on a periodic box.
//!
//! Time stepping is the Lawson (integrating-factor) fourth-order Runge–Kutta
//! scheme: diffusion is applied exactly through `e^{−|k|²dt}` and the
//! advection term is evaluated with the 2/3 rule. The running flux
//! `(a, b, d)` and the dissipation `2∫‖ω‖²` are integrated mode by mode from
//! the same stage data, with the diffusive decay taken exactly.

use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{FluxSample, MomentumFlux};
use crate::grid::{forward_real, inverse_real, inverse_real_pair, Grid, GridError, GridScalarField, GridVectorField};

/// Largest `dt·k_max·(max|u₁| + max|u₂|)` accepted by [`step`].
pub const STABILITY_CONSTANT: f64 = 2.8;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("vorticity has nonzero mean {0:e}")]
    NonzeroMean(f64),
    #[error("time step {0} must be positive and finite")]
    BadStep(f64),
    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    Unstable { dt: f64, limit: f64 },
    #[error("solution blew up at step {step} (t = {time})")]
    BlowUp { step: u64, time: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("checkpoint: {0}")]
    Io(String),
}

/// Vorticity plus the running integrals that travel with it.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub omega: GridScalarField,
    pub time: f64,
    /// `2∫₀ᵗ‖∇u‖₂² ds`.
    pub dissipation_accum: f64,
    pub flux: MomentumFlux,
    pub step: u64,
}

impl FlowState {
    /// State at `t = 0` with empty accumulators.
    pub fn new(omega: GridScalarField) -> Result<Self, SolverError> {
        check_mean(&omega)?;
        let ops = Operators::new(*omega.grid());
        let rates = ops.flux_density(&omega.spectrum());
        Ok(Self { omega, time: 0.0, dissipation_accum: 0.0, flux: MomentumFlux::default().with_rates(rates), step: 0 })
    }

    pub fn from_velocity(u: &GridVectorField) -> Result<Self, SolverError> {
        Self::new(u.curl())
    }

    pub fn grid(&self) -> &Grid {
        self.omega.grid()
    }

    pub fn velocity(&self) -> GridVectorField {
        velocity_unchecked(&self.omega)
    }

    pub fn energy(&self) -> f64 {
        energy(&self.velocity())
    }

    pub fn sample(&self) -> FluxSample {
        FluxSample { t: self.time, flux: self.flux, energy: self.flux.da + self.flux.dd }
    }
}

fn check_mean(omega: &GridScalarField) -> Result<(), SolverError> {
    let m = omega.mean();
    if m.abs() > 1e-12 * omega.max_abs().max(f64::MIN_POSITIVE) {
        return Err(SolverError::NonzeroMean(m));
    }
    Ok(())
}

/// `u = ∇^⊥Δ⁻¹ω` with the mean mode dropped.
pub fn velocity_from_vorticity(omega: &GridScalarField) -> Result<GridVectorField, SolverError> {
    check_mean(omega)?;
    Ok(velocity_unchecked(omega))
}

fn velocity_unchecked(omega: &GridScalarField) -> GridVectorField {
    let grid = *omega.grid();
    let ops = Operators::new(grid);
    let (u1, u2) = ops.velocity_spectra(&omega.spectrum(), false);
    let (v1, v2) = inverse_real_pair(&grid, &u1, &u2);
    GridVectorField::new(
        GridScalarField::from_values(grid, v1).expect("grid length"),
        GridScalarField::from_values(grid, v2).expect("grid length"),
    )
    .expect("same grid")
}

/// `∫|u|²`.
pub fn energy(u: &GridVectorField) -> f64 {
    u.norm_sq()
}

/// `∫ω²`.
pub fn enstrophy(omega: &GridScalarField) -> f64 {
    omega.norm_sq()
}

/// `|‖u(t)‖² + dissipation − ‖u₀‖²| / ‖u₀‖²`.
pub fn energy_equality_residual(state: &FlowState, initial_energy: f64) -> f64 {
    if initial_energy == 0.0 {
        return 0.0;
    }
    (state.energy() + state.dissipation_accum - initial_energy).abs() / initial_energy
}

/// Per-grid spectral tables.
struct Operators {
    grid: Grid,
    kd: Vec<f64>,
    ksq: Vec<f64>,
    keep: Vec<bool>,
    parseval: f64,
}

impl Operators {
    fn new(grid: Grid) -> Self {
        let n = grid.n();
        let k = grid.wavenumbers();
        let mut ksq = vec![0.0; n * n];
        let mut keep = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                ksq[j * n + i] = k[i] * k[i] + k[j] * k[j];
                keep[j * n + i] = 3 * grid.mode(i).unsigned_abs() < n as u64 && 3 * grid.mode(j).unsigned_abs() < n as u64;
            }
        }
        let parseval = grid.cell_area() / (n * n) as f64;
        Self { grid, kd: grid.derivative_wavenumbers(), ksq, keep, parseval }
    }

    fn velocity_spectra(&self, w: &[Complex64], truncate: bool) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.grid.n();
        let mut u1 = vec![Complex64::new(0.0, 0.0); n * n];
        let mut u2 = u1.clone();
        u1.par_chunks_mut(n).zip(u2.par_chunks_mut(n)).enumerate().for_each(|(j, (r1, r2))| {
            for i in 0..n {
                let idx = j * n + i;
                if idx == 0 || (truncate && !self.keep[idx]) {
                    continue;
                }
                let f = w[idx] / self.ksq[idx];
                r1[i] = Complex64::new(0.0, self.kd[j]) * f;
                r2[i] = Complex64::new(0.0, -self.kd[i]) * f;
            }
        });
        (u1, u2)
    }

    /// `[∫u₁², ∫2u₁u₂, ∫u₂²]` from the vorticity spectrum.
    fn flux_density(&self, w: &[Complex64]) -> [f64; 3] {
        let (u1, u2) = self.velocity_spectra(w, false);
        let mut s = [0.0; 3];
        for (a, b) in u1.iter().zip(&u2) {
            s[0] += a.norm_sqr();
            s[1] += 2.0 * (a * b.conj()).re;
            s[2] += b.norm_sqr();
        }
        s.map(|v| v * self.parseval)
    }


    /// `−u·∇ω` with 2/3 truncation, plus `max|u₁| + max|u₂|`.
    fn nonlinear(&self, w: &[Complex64]) -> (Vec<Complex64>, f64) {
        let n = self.grid.n();
        let (u1h, u2h) = self.velocity_spectra(w, true);
        let mut g1 = vec![Complex64::new(0.0, 0.0); n * n];
        let mut g2 = g1.clone();
        g1.par_chunks_mut(n).zip(g2.par_chunks_mut(n)).enumerate().for_each(|(j, (r1, r2))| {
            for i in 0..n {
                let idx = j * n + i;
                if self.keep[idx] {
                    r1[i] = Complex64::new(0.0, self.kd[i]) * w[idx];
                    r2[i] = Complex64::new(0.0, self.kd[j]) * w[idx];
                }
            }
        });
        let (u1, u2) = inverse_real_pair(&self.grid, &u1h, &u2h);
        let (w1, w2) = inverse_real_pair(&self.grid, &g1, &g2);
        let prod: Vec<f64> = (0..n * n).into_par_iter().map(|i| -(u1[i] * w1[i] + u2[i] * w2[i])).collect();
        let speed = u1.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + u2.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut out = forward_real(&self.grid, &prod);
        out.par_iter_mut().zip(self.keep.par_iter()).for_each(|(v, &k)| {
            if !k {
                *v = Complex64::new(0.0, 0.0);
            }
        });
        out[0] = Complex64::new(0.0, 0.0);
        (out, speed)
    }

    /// `[∫u₁², ∫2u₁u₂, ∫u₂², ∫ω²]` over one step. Each mode follows
    /// `ω̂' = −|k|²ω̂ + N(s)` with `N` quadratic through the stage values
    /// `k₁`, `(k₂+k₃)/2`, `k₄`; the decay is integrated exactly and the
    /// rest by Gauss–Legendre on geometrically refined pieces.
    fn step_integrals(&self, dt: f64, w0: &[Complex64], n0: &[Complex64], nm: &[Complex64], n1: &[Complex64]) -> [f64; 4] {
        let n = self.grid.n();
        let nodes = crate::quad::legendre(8);
        let rows: Vec<[f64; 4]> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut acc = [0.0; 4];
                for i in 0..n {
                    let idx = j * n + i;
                    if idx == 0 {
                        continue;
                    }
                    let kap = self.ksq[idx];
                    let e = mode_integral(kap, dt, w0[idx], n0[idx], nm[idx], n1[idx], &nodes);
                    if e == 0.0 {
                        continue;
                    }
                    let (a, b) = (self.kd[i], self.kd[j]);
                    let k4 = kap * kap;
                    acc[0] += e * b * b / k4;
                    acc[1] -= 2.0 * e * a * b / k4;
                    acc[2] += e * a * a / k4;
                    acc[3] += e;
                }
                acc
            })
            .collect();
        let mut out = [0.0; 4];
        for r in rows {
            for c in 0..4 {
                out[c] += r[c];
            }
        }
        out.map(|v| v * self.parseval)
    }

    fn limit(&self, speed: f64) -> f64 {
        if speed == 0.0 {
            f64::INFINITY
        } else {
            STABILITY_CONSTANT / (self.grid.nyquist_wavenumber() * speed)
        }
    }

    fn factors(&self, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let e: Vec<f64> = self.ksq.iter().map(|k| (-k * dt).exp()).collect();
        let e2: Vec<f64> = self.ksq.iter().map(|k| (-k * 0.5 * dt).exp()).collect();
        (e, e2)
    }
}

/// `φ₁, φ₂, φ₃` at `z ≤ 0`, with `φⱼ(z) = Σ zᵏ/(k+j)!`.
fn phi123(z: f64) -> [f64; 3] {
    if z.abs() < 1.0 {
        let mut out = [0.0; 3];
        for (j, o) in out.iter_mut().enumerate() {
            let mut term = 1.0 / (1..=j + 1).map(|v| v as f64).product::<f64>();
            let mut k = 0;
            while k < 25 {
                *o += term;
                term *= z / (k + j + 2) as f64;
                k += 1;
            }
        }
        out
    } else {
        let p1 = z.exp_m1() / z;
        let p2 = (p1 - 1.0) / z;
        [p1, p2, (p2 - 0.5) / z]
    }
}

/// `∫₀^T |ω̂(s)|² ds` for one mode.
fn mode_integral(kap: f64, t: f64, w0: Complex64, n0: Complex64, nm: Complex64, n1: Complex64, nodes: &[(f64, f64)]) -> f64 {
    let free = w0.norm_sqr() * t * phi123(-2.0 * kap * t)[0];
    if n0 == Complex64::new(0.0, 0.0) && nm == n0 && n1 == n0 {
        return free;
    }
    let c0 = n0;
    let c1 = (4.0 * nm - 3.0 * n0 - n1) / t;
    let c2 = 2.0 * (n1 - 2.0 * nm + n0) / (t * t);
    let w0c = w0.conj();
    let f = |s: f64| {
        let [p1, p2, p3] = phi123(-kap * s);
        let forced = c0 * (s * p1) + c1 * (s * s * p2) + c2 * (2.0 * s * s * s * p3);
        2.0 * ((-kap * s).exp() * w0c * forced).re + forced.norm_sqr()
    };
    let pieces = if kap * t <= 2.0 { 0 } else { ((kap * t / 2.0).log2().ceil() as i32).min(60) };
    let mut total = 0.0;
    let mut lo = 0.0;
    for p in (0..=pieces).rev() {
        let hi = t / 2f64.powi(p);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        total += half * nodes.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>();
        lo = hi;
    }
    free + total
}

/// Largest admissible step for the current state.
pub fn stability_limit(state: &FlowState) -> f64 {
    let ops = Operators::new(*state.grid());
    let (_, speed) = ops.nonlinear(&state.omega.spectrum());
    ops.limit(speed)
}

/// `fraction` times the stability limit.
pub fn suggest_dt(state: &FlowState, fraction: f64) -> f64 {
    fraction * stability_limit(state)
}

/// One Lawson–RK4 step of length `dt`.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState, SolverError> {
    Stepper::new(*state.grid()).step(state, dt)
}

/// Reusable stepping tables for one grid.
pub struct Stepper {
    ops: Operators,
    cached: Option<(f64, Vec<f64>, Vec<f64>)>,
}

impl Stepper {
    pub fn new(grid: Grid) -> Self {
        Self { ops: Operators::new(grid), cached: None }
    }

    pub fn step(&mut self, state: &FlowState, dt: f64) -> Result<FlowState, SolverError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::BadStep(dt));
        }
        let ops = &self.ops;
        let w0 = state.omega.spectrum();
        let (k1, speed) = ops.nonlinear(&w0);
        let limit = ops.limit(speed);
        if dt > limit * (1.0 + 1e-12) {
            return Err(SolverError::Unstable { dt, limit });
        }
        if self.cached.as_ref().is_none_or(|c| c.0 != dt) {
            let (e, e2) = ops.factors(dt);
            self.cached = Some((dt, e, e2));
        }
        let (_, e, e2) = self.cached.as_ref().expect("factors");
        let ops = &self.ops;
        let h = 0.5 * dt;

        let wa: Vec<Complex64> = (0..w0.len()).into_par_iter().map(|i| e2[i] * (w0[i] + h * k1[i])).collect();
        let (k2, _) = ops.nonlinear(&wa);
        let wb: Vec<Complex64> = (0..w0.len()).into_par_iter().map(|i| e2[i] * w0[i] + h * k2[i]).collect();
        let (k3, _) = ops.nonlinear(&wb);
        let wc: Vec<Complex64> = (0..w0.len()).into_par_iter().map(|i| e[i] * w0[i] + dt * e2[i] * k3[i]).collect();
        let (k4, _) = ops.nonlinear(&wc);
        let w1: Vec<Complex64> = (0..w0.len())
            .into_par_iter()
            .map(|i| e[i] * w0[i] + dt / 6.0 * (e[i] * k1[i] + 2.0 * e2[i] * (k2[i] + k3[i]) + k4[i]))
            .collect();

        let km: Vec<Complex64> = k2.iter().zip(&k3).map(|(a, b)| 0.5 * (a + b)).collect();
        let inc = ops.step_integrals(dt, &w0, &k1, &km, &k4);
        let mut flux = state.flux;
        flux.a += inc[0];
        flux.b += inc[1];
        flux.d += inc[2];
        let dissipation = state.dissipation_accum + 2.0 * inc[3];
        let values = inverse_real(&ops.grid, &w1);
        let next_step = state.step + 1;
        let time = state.time + dt;
        if !values.iter().all(|v| v.is_finite()) || !flux.a.is_finite() || !dissipation.is_finite() {
            return Err(SolverError::BlowUp { step: next_step, time });
        }
        let flux = flux.with_rates(ops.flux_density(&w1));
        Ok(FlowState {
            omega: GridScalarField::from_values(ops.grid, values)?,
            time,
            dissipation_accum: dissipation,
            flux,
            step: next_step,
        })
    }

    /// Stability limit evaluated with these tables.
    pub fn limit(&self, state: &FlowState) -> f64 {
        let (_, speed) = self.ops.nonlinear(&state.omega.spectrum());
        self.ops.limit(speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DtPolicy {
    Fixed { dt: f64 },
    CflFraction { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub final_time: f64,
    pub dt: DtPolicy,
    /// Snapshots are taken at multiples of this interval and at the end.
    pub snapshot_interval: f64,
    /// Keep vorticity fields in snapshots (otherwise diagnostics only).
    pub keep_fields: bool,
    /// Write `checkpoint_<step>.bin` at every snapshot.
    pub checkpoint_dir: Option<PathBuf>,
}

/// Immutable record of the flow at a snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub step: u64,
    pub flux: MomentumFlux,
    pub energy: f64,
    pub enstrophy: f64,
    pub dissipation_accum: f64,
    pub omega: Option<GridScalarField>,
}

impl Snapshot {
    fn of(state: &FlowState, keep: bool) -> Self {
        Self {
            time: state.time,
            step: state.step,
            flux: state.flux,
            energy: state.flux.da + state.flux.dd,
            enstrophy: enstrophy(&state.omega),
            dissipation_accum: state.dissipation_accum,
            omega: keep.then(|| state.omega.clone()),
        }
    }

    pub fn sample(&self) -> FluxSample {
        FluxSample { t: self.time, flux: self.flux, energy: self.energy }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial_energy: f64,
    pub snapshots: Vec<Snapshot>,
    pub final_state: FlowState,
    /// Every step taken, as `(t_after, dt)`.
    pub steps: Vec<(f64, f64)>,
    pub checkpoints: Vec<PathBuf>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn samples(&self) -> Vec<FluxSample> {
        self.snapshots.iter().map(Snapshot::sample).collect()
    }
}

/// Steps `initial` to `opts.final_time`, landing exactly on snapshot times.
pub fn run(initial: FlowState, opts: &RunOptions) -> Result<Trajectory, SolverError> {
    run_with(initial, opts, |_| {})
}

/// [`run`] with a callback invoked on the state at every snapshot.
pub fn run_with(initial: FlowState, opts: &RunOptions, mut observe: impl FnMut(&FlowState)) -> Result<Trajectory, SolverError> {
    if !(opts.final_time >= initial.time && opts.snapshot_interval > 0.0) {
        return Err(SolverError::BadStep(opts.snapshot_interval));
    }
    let mut stepper = Stepper::new(*initial.grid());
    let initial_energy = initial.energy();
    let mut state = initial;
    let mut snapshots = Vec::new();
    let mut checkpoints = Vec::new();
    let mut steps = Vec::new();
    let mut record = |state: &FlowState, snaps: &mut Vec<Snapshot>, cps: &mut Vec<PathBuf>| -> Result<(), SolverError> {
        observe(state);
        snaps.push(Snapshot::of(state, opts.keep_fields));
        if let Some(dir) = &opts.checkpoint_dir {
            let path = dir.join(format!("checkpoint_{:08}.bin", state.step));
            crate::io::write_checkpoint(state, &path).map_err(|e| SolverError::Io(e.to_string()))?;
            cps.push(path);
        }
        Ok(())
    };
    record(&state, &mut snapshots, &mut checkpoints)?;
    let mut next_index = (state.time / opts.snapshot_interval).floor() as u64 + 1;
    while state.time < opts.final_time {
        let target = (next_index as f64 * opts.snapshot_interval).min(opts.final_time);
        while state.time < target {
            let remaining = target - state.time;
            let mut dt = match opts.dt {
                DtPolicy::Fixed { dt } => dt,
                DtPolicy::CflFraction { fraction } => fraction * stepper.limit(&state),
            };
            if dt >= remaining * (1.0 - 1e-9) {
                dt = remaining;
            }
            let mut next = stepper.step(&state, dt)?;
            if dt == remaining {
                next.time = target;
            }
            steps.push((next.time, dt));
            state = next;
        }
        record(&state, &mut snapshots, &mut checkpoints)?;
        next_index += 1;
    }
    Ok(Trajectory { initial_energy, snapshots, final_state: state, steps, checkpoints })
}

/// Spectral heat evolution `e^{tΔ}f`.
pub fn heat_evolve(f: &GridScalarField, t: f64) -> GridScalarField {
    let grid = *f.grid();
    let k = grid.wavenumbers();
    let n = grid.n();
    let mut spec = f.spectrum();
    spec.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v *= (-(k[i] * k[i] + k[j] * k[j]) * t).exp();
        }
    });
    GridScalarField::from_values(grid, inverse_real(&grid, &spec)).expect("grid length")
}

/// Heat evolution of both components of a vector field.
pub fn heat_evolve_vector(u: &GridVectorField, t: f64) -> GridVectorField {
    GridVectorField::new(heat_evolve(&u.u1, t), heat_evolve(&u.u2, t)).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Point2;
    use std::f64::consts::PI;

    fn gaussian_dipole(grid: Grid) -> GridScalarField {
        GridScalarField::from_fn(grid, |p: Point2| {
            let r2 = (p.x1 - 0.3).powi(2) + p.x2.powi(2);
            let s2 = (p.x1 + 0.3).powi(2) + (p.x2 - 0.2).powi(2);
            10.0 * ((-r2 / 0.25).exp() - (-s2 / 0.25).exp())
        })
    }

    #[test]
    fn zero_stays_zero() {
        let g = Grid::new(32, 10.0).unwrap();
        let s = FlowState::new(GridScalarField::zeros(g)).unwrap();
        assert!(velocity_from_vorticity(&s.omega).unwrap().max_abs() == 0.0);
        let next = step(&s, 0.01).unwrap();
        assert_eq!(next.omega.max_abs(), 0.0);
        assert_eq!(next.time, 0.01);
    }

    #[test]
    fn single_mode_inversion() {
        let g = Grid::new(32, 8.0).unwrap();
        let k = 2.0 * PI / 8.0;
        let w = GridScalarField::from_fn(g, |p| (k * p.x1).sin());
        let u = velocity_from_vorticity(&w).unwrap();
        assert!(u.u1.max_abs() < 1e-14);
        let expect = GridScalarField::from_fn(g, |p| -(8.0 / (2.0 * PI)) * (k * p.x1).cos());
        let err = u.u2.values().iter().zip(expect.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn rejects_nonzero_mean() {
        let g = Grid::new(16, 4.0).unwrap();
        let w = GridScalarField::from_fn(g, |_| 1.0);
        assert!(matches!(velocity_from_vorticity(&w), Err(SolverError::NonzeroMean(_))));
    }

    #[test]
    fn velocity_is_solenoidal_and_inverts_curl() {
        let g = Grid::new(64, 6.0).unwrap();
        let w = gaussian_dipole(g);
        let u = velocity_from_vorticity(&w).unwrap();
        let m = u.max_abs();
        assert!(u.divergence().max_abs() <= 1e-12 * m);
        let back = u.curl();
        let err = back.values().iter().zip(w.values()).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-10 * w.max_abs(), "{err}");
    }

    #[test]
    fn energy_scales_quadratically() {
        let g = Grid::new(32, 6.0).unwrap();
        let u = velocity_from_vorticity(&gaussian_dipole(g)).unwrap();
        assert!((energy(&u.scaled(3.0)) - 9.0 * energy(&u)).abs() < 1e-12 * energy(&u) * 9.0);
    }

    #[test]
    fn step_rejects_large_dt_and_dissipates() {
        let g = Grid::new(64, 6.0).unwrap();
        let s = FlowState::new(gaussian_dipole(g)).unwrap();
        let lim = stability_limit(&s);
        assert!(matches!(step(&s, 2.0 * lim), Err(SolverError::Unstable { .. })));
        assert!(matches!(step(&s, -1.0), Err(SolverError::BadStep(_))));
        let next = step(&s, 0.5 * lim).unwrap();
        assert!(next.energy() <= s.energy());
        assert_eq!(energy_equality_residual(&s, s.energy()), 0.0);
        let res = energy_equality_residual(&next, s.energy());
        assert!(res < 1e-6, "{res}");
        assert!(next.omega.mean().abs() < 1e-13);
    }

    #[test]
    fn flux_rates_match_grid_quadrature() {
        let g = Grid::new(64, 6.0).unwrap();
        let s = FlowState::new(gaussian_dipole(g)).unwrap();
        let grid_rates = crate::asymptotics::flux_density(&s.velocity());
        for (a, b) in grid_rates.iter().zip(s.flux.rates()) {
            assert!((a - b).abs() < 1e-12 * grid_rates[0].abs().max(grid_rates[2].abs()));
        }
    }

    #[test]
    fn run_lands_on_snapshot_times() {
        let g = Grid::new(32, 6.0).unwrap();
        let s = FlowState::new(gaussian_dipole(g)).unwrap();
        let opts = RunOptions {
            final_time: 0.05,
            dt: DtPolicy::CflFraction { fraction: 0.5 },
            snapshot_interval: 0.02,
            keep_fields: false,
            checkpoint_dir: None,
        };
        let traj = run(s, &opts).unwrap();
        assert_eq!(traj.times(), vec![0.0, 0.02, 0.04, 0.05]);
        assert!(traj.final_state.dissipation_accum <= traj.initial_energy);
    }
}
