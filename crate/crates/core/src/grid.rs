//! Periodic sampling grids, grid fields and the 2D FFT they share.
//!
//! Points sit at `x_i = -box/2 + i*dx`, `i = 0..n`, in both directions, so the
//! grid is invariant under `x -> -x` (index `i -> (n - i) mod n`) and under the
//! exchange of coordinates. Field values are stored row-major with the row
//! index running along `x2`: `values[j * n + i]` is the sample at
//! `(x_i, x_j)`. Spectral arrays use the same layout, with `i` the `k1` mode
//! and `j` the `k2` mode in FFT order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::kernels::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid size {0} must be a power of 2 and at least 4")]
    BadSize(usize),
    #[error("box length {0} must be positive and finite")]
    BadBox(f64),
    #[error("fields live on different grids")]
    Mismatch,
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
}

/// A square periodic grid of `n x n` points on a box of side `box_len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    box_len: f64,
}

impl Grid {
    pub fn new(n: usize, box_len: f64) -> Result<Self, GridError> {
        if n < 4 || !n.is_power_of_two() {
            return Err(GridError::BadSize(n));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return Err(GridError::BadBox(box_len));
        }
        Ok(Self { n, box_len })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.box_len / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dx()
    }

    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.box_len + i as f64 * self.dx()
    }

    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.coord(i), self.coord(j))
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Index of the mirror image `-x_i`.
    #[inline]
    pub fn mirror(&self, i: usize) -> usize {
        (self.n - i) % self.n
    }

    /// Signed FFT mode number of index `m`; the Nyquist index maps to `-n/2`.
    pub fn mode(&self, m: usize) -> i64 {
        let n = self.n as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    pub fn fundamental_wavenumber(&self) -> f64 {
        2.0 * PI / self.box_len
    }

    /// Wavenumbers used by even-order operators (Laplacian); Nyquist kept.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let k0 = self.fundamental_wavenumber();
        (0..self.n).map(|m| k0 * self.mode(m) as f64).collect()
    }

    /// Wavenumbers used by odd-order derivatives. The Nyquist mode is zeroed
    /// so derivatives of real fields stay real and the discrete derivative
    /// stays skew-adjoint.
    pub fn derivative_wavenumbers(&self) -> Vec<f64> {
        let mut k = self.wavenumbers();
        k[self.n / 2] = 0.0;
        k
    }

    pub fn nyquist_wavenumber(&self) -> f64 {
        PI / self.dx()
    }
}

/// Cached 2D complex FFT for one grid size.
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Shared plan for size `n`.
    pub fn for_size(n: usize) -> Arc<Fft2> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("fft plan cache poisoned");
        map.entry(n).or_insert_with(|| Arc::new(Fft2::new(n))).clone()
    }

    fn rows(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let len = plan.get_inplace_scratch_len();
        data.par_chunks_mut(self.n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); len],
            |scratch, row| plan.process_with_scratch(row, scratch),
        );
    }

    fn transpose(&self, src: &[Complex64], dst: &mut [Complex64]) {
        let n = self.n;
        dst.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = src[i * n + j];
            }
        });
    }

    fn transform(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n);
        self.rows(plan, data);
        let mut tmp = vec![Complex64::new(0.0, 0.0); data.len()];
        self.transpose(data, &mut tmp);
        self.rows(plan, &mut tmp);
        self.transpose(&tmp, data);
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(&self.forward, data);
    }

    /// Inverse transform including the `1/n^2` normalization, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(&self.inverse, data);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }
}

/// Forward transform of real samples.
pub fn forward_real(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft2::for_size(grid.n()).forward(&mut data);
    data
}

/// Inverse transform keeping the real part.
pub fn inverse_real(grid: &Grid, spectrum: &[Complex64]) -> Vec<f64> {
    let mut data = spectrum.to_vec();
    Fft2::for_size(grid.n()).inverse(&mut data);
    data.into_iter().map(|v| v.re).collect()
}

/// Inverse transforms of two real-field spectra with a single complex FFT.
pub fn inverse_real_pair(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let i = Complex64::new(0.0, 1.0);
    let mut data: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| x + i * y).collect();
    Fft2::for_size(grid.n()).inverse(&mut data);
    data.into_iter().map(|v| (v.re, v.im)).unzip()
}

/// Real scalar samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point2) -> f64 + Sync) -> Self {
        let n = grid.n();
        let mut values = vec![0.0; grid.len()];
        values.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(grid.point(i, j));
            }
        });
        Self { grid, values }
    }

    pub(crate) fn from_spectrum(grid: Grid, spectrum: &[Complex64]) -> Self {
        Self { grid, values: inverse_real(&grid, spectrum) }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        forward_real(&self.grid, &self.values)
    }

    /// Trapezoid-rule integral over the box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `\int f^2`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()
    }

    /// `\int f g` over the box.
    pub fn dot(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_area()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Moment `\int x_1^p x_2^q f`.
    pub fn moment(&self, p: i32, q: i32) -> f64 {
        let g = self.grid;
        let n = g.n();
        let mut sum = 0.0;
        for j in 0..n {
            let y = g.coord(j).powi(q);
            for i in 0..n {
                sum += g.coord(i).powi(p) * y * self.values[j * n + i];
            }
        }
        sum * g.cell_area()
    }

    /// Spectral partial derivative along `x1` (`axis == 0`) or `x2`.
    pub fn derivative(&self, axis: usize) -> Self {
        let spec = self.spectrum();
        Self::from_spectrum(self.grid, &apply_derivative(&self.grid, &spec, axis))
    }

    pub fn laplacian(&self) -> Self {
        let g = self.grid;
        let k = g.wavenumbers();
        let n = g.n();
        let mut spec = self.spectrum();
        spec.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v *= -(k[i] * k[i] + k[j] * k[j]);
            }
        });
        Self::from_spectrum(g, &spec)
    }

    /// Radius of the smallest origin-centered disk containing every sample
    /// with `|f| > rel_threshold * max|f|`. Zero for the zero field.
    pub fn support_radius(&self, rel_threshold: f64) -> f64 {
        let cut = rel_threshold * self.max_abs();
        if cut == 0.0 {
            return 0.0;
        }
        let g = self.grid;
        let n = g.n();
        let mut r2: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                if self.values[j * n + i].abs() > cut {
                    let p = g.point(i, j);
                    r2 = r2.max(p.norm_sq());
                }
            }
        }
        r2.sqrt()
    }
}

pub(crate) fn apply_derivative(grid: &Grid, spec: &[Complex64], axis: usize) -> Vec<Complex64> {
    let k = grid.derivative_wavenumbers();
    let n = grid.n();
    let mut out = spec.to_vec();
    out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            let kk = if axis == 0 { k[i] } else { k[j] };
            *v *= Complex64::new(0.0, kk);
        }
    });
    out
}

/// Two-component vector field on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVectorField {
    pub u1: GridScalarField,
    pub u2: GridScalarField,
}

impl GridVectorField {
    pub fn new(u1: GridScalarField, u2: GridScalarField) -> Result<Self, GridError> {
        if u1.grid() != u2.grid() {
            return Err(GridError::Mismatch);
        }
        Ok(Self { u1, u2 })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { u1: GridScalarField::zeros(grid), u2: GridScalarField::zeros(grid) }
    }

    pub fn grid(&self) -> &Grid {
        self.u1.grid()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { u1: self.u1.scaled(factor), u2: self.u2.scaled(factor) }
    }

    pub fn max_abs(&self) -> f64 {
        self.u1
            .values()
            .iter()
            .zip(self.u2.values())
            .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Spectral divergence.
    pub fn divergence(&self) -> GridScalarField {
        let g = *self.grid();
        let d1 = apply_derivative(&g, &self.u1.spectrum(), 0);
        let d2 = apply_derivative(&g, &self.u2.spectrum(), 1);
        let sum: Vec<Complex64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
        GridScalarField::from_spectrum(g, &sum)
    }

    /// Spectral curl `d1 u2 - d2 u1`.
    pub fn curl(&self) -> GridScalarField {
        let g = *self.grid();
        let d1 = apply_derivative(&g, &self.u2.spectrum(), 0);
        let d2 = apply_derivative(&g, &self.u1.spectrum(), 1);
        let diff: Vec<Complex64> = d1.iter().zip(&d2).map(|(a, b)| a - b).collect();
        GridScalarField::from_spectrum(g, &diff)
    }

    /// Pointwise Frobenius norm of the spectral velocity gradient.
    pub fn gradient_magnitude(&self) -> GridScalarField {
        let g = *self.grid();
        let parts = [
            self.u1.derivative(0),
            self.u1.derivative(1),
            self.u2.derivative(0),
            self.u2.derivative(1),
        ];
        let values = (0..g.len())
            .map(|idx| parts.iter().map(|p| p.values()[idx].powi(2)).sum::<f64>().sqrt())
            .collect();
        GridScalarField { grid: g, values }
    }

    /// `\int |u|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.u1.norm_sq() + self.u2.norm_sq()
    }

    /// Velocity sampled at grid point `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        [self.u1.at(i, j), self.u2.at(i, j)]
    }

    /// Field rotated by `turns` quarter turns as a physical vector field,
    /// `u'(x) = R u(R^T x)`. Exact on the grid.
    pub fn rotated_quarter_turns(&self, turns: usize) -> Self {
        let g = *self.grid();
        let n = g.n();
        let mut u1 = vec![0.0; g.len()];
        let mut u2 = vec![0.0; g.len()];
        for j in 0..n {
            for i in 0..n {
                let (a, b) = match turns % 4 {
                    0 => (self.u1.at(i, j), self.u2.at(i, j)),
                    1 => {
                        let (v1, v2) = self.at_pair(j, g.mirror(i));
                        (-v2, v1)
                    }
                    2 => {
                        let (v1, v2) = self.at_pair(g.mirror(i), g.mirror(j));
                        (-v1, -v2)
                    }
                    _ => {
                        let (v1, v2) = self.at_pair(g.mirror(j), i);
                        (v2, -v1)
                    }
                };
                u1[j * n + i] = a;
                u2[j * n + i] = b;
            }
        }
        Self {
            u1: GridScalarField { grid: g, values: u1 },
            u2: GridScalarField { grid: g, values: u2 },
        }
    }

    fn at_pair(&self, i: usize, j: usize) -> (f64, f64) {
        (self.u1.at(i, j), self.u2.at(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(Grid::new(100, 1.0), Err(GridError::BadSize(100)));
        assert_eq!(Grid::new(2, 1.0), Err(GridError::BadSize(2)));
        assert!(matches!(Grid::new(64, -1.0), Err(GridError::BadBox(_))));
        assert!(Grid::new(64, 1.0).is_ok());
    }

    #[test]
    fn grid_is_mirror_symmetric() {
        let g = Grid::new(16, 3.0).unwrap();
        for i in 0..16 {
            let m = g.mirror(i);
            let x = g.coord(i);
            let xm = g.coord(m);
            // index 0 (-box/2) mirrors onto itself through periodicity
            if i == 0 {
                assert_eq!(m, 0);
            } else {
                assert!((x + xm).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fft_round_trip() {
        let g = Grid::new(32, 2.0).unwrap();
        let f = GridScalarField::from_fn(g, |p| (p.x1 * 3.0).sin() + p.x2 * p.x2);
        let back = GridScalarField::from_spectrum(g, &f.spectrum());
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn paired_inverse_matches_separate() {
        let g = Grid::new(16, 1.0).unwrap();
        let f = GridScalarField::from_fn(g, |p| (2.0 * PI * p.x1).cos());
        let h = GridScalarField::from_fn(g, |p| (4.0 * PI * p.x2).sin() + 0.5);
        let (a, b) = inverse_real_pair(&g, &f.spectrum(), &h.spectrum());
        for idx in 0..g.len() {
            assert!((a[idx] - f.values()[idx]).abs() < 1e-14);
            assert!((b[idx] - h.values()[idx]).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_derivative_of_single_mode() {
        let g = Grid::new(32, 4.0).unwrap();
        let k = 2.0 * PI / 4.0 * 3.0;
        let f = GridScalarField::from_fn(g, |p| (k * p.x2).sin());
        let d = f.derivative(1);
        for j in 0..32 {
            let want = k * (k * g.coord(j)).cos();
            assert!((d.at(5, j) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_of_curl_free_field() {
        let g = Grid::new(16, 2.0).unwrap();
        // u = (x1, 0) rotated by 90 degrees is (0, x2)
        let u = GridVectorField::new(
            GridScalarField::from_fn(g, |p| p.x1),
            GridScalarField::zeros(g),
        )
        .unwrap();
        let r = u.rotated_quarter_turns(1);
        for j in 1..16 {
            for i in 1..16 {
                assert!(r.u1.at(i, j).abs() < 1e-15);
                assert!((r.u2.at(i, j) - g.coord(j)).abs() < 1e-14);
            }
        }
    }
}
