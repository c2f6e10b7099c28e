//! Quadrature rules shared by the kernel and lemma harnesses.
//!
//! Gauss–Legendre nodes come from `gauss-quad`; the adaptive driver is a
//! Gauss–Kronrod (7, 15) bisection scheme that works on fixed-size vector
//! integrands and reports its error estimate.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("quadrature stopped at error estimate {achieved:e} (requested {requested:e})")]
pub struct QuadError {
    pub achieved: f64,
    pub requested: f64,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, cached per degree.
pub fn legendre(degree: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("legendre cache poisoned");
    map.entry(degree)
        .or_insert_with(|| {
            let deg = NonZeroUsize::new(degree.max(1)).expect("nonzero");
            Arc::new(GaussLegendre::new(deg).as_node_weight_pairs().to_vec())
        })
        .clone()
}

/// Fixed-order Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre<const N: usize>(a: f64, b: f64, degree: usize, mut f: impl FnMut(f64) -> [f64; N]) -> [f64; N] {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut acc = [0.0; N];
    for &(x, w) in legendre(degree).iter() {
        let v = f(mid + half * x);
        for (s, vi) in acc.iter_mut().zip(v) {
            *s += w * vi;
        }
    }
    acc.map(|s| s * half)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<const N: usize>(a: f64, b: f64, f: &impl Fn(f64) -> [f64; N]) -> ([f64; N], f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let center = f(mid);
    for c in 0..N {
        k[c] = WGK[7] * center[c];
        g[c] = WG[3] * center[c];
    }
    for i in 0..7 {
        let dx = half * XGK[i];
        let lo = f(mid - dx);
        let hi = f(mid + dx);
        for c in 0..N {
            let s = lo[c] + hi[c];
            k[c] += WGK[i] * s;
            if i % 2 == 1 {
                g[c] += WG[i / 2] * s;
            }
        }
    }
    let mut err: f64 = 0.0;
    for c in 0..N {
        k[c] *= half;
        g[c] *= half;
        err = err.max((k[c] - g[c]).abs());
    }
    (k, err)
}

/// Adaptive integration of a vector integrand over a finite interval.
///
/// Stops when the summed error estimate drops below
/// `max(abs_tol, rel_tol * |value|_inf)`; returns the value and the estimate.
pub fn adaptive<const N: usize>(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    f: impl Fn(f64) -> [f64; N],
) -> Result<([f64; N], f64), QuadError> {
    const MAX_INTERVALS: usize = 4000;
    let mut pieces = vec![(a, b, kronrod(a, b, &f))];
    loop {
        let mut total = [0.0; N];
        let mut err = 0.0;
        for (_, _, (v, e)) in &pieces {
            for c in 0..N {
                total[c] += v[c];
            }
            err += e;
        }
        let scale = total.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let target = abs_tol.max(rel_tol * scale);
        if err <= target {
            return Ok((total, err));
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(QuadError { achieved: err, requested: target });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, be), (i, p)| if p.2 .1 > be { (i, p.2 .1) } else { (bi, be) });
        let (lo, hi, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(QuadError { achieved: err, requested: target });
        }
        pieces.push((lo, mid, kronrod(lo, mid, &f)));
        pieces.push((mid, hi, kronrod(mid, hi, &f)));
    }
}

/// Scalar convenience wrapper around [`adaptive`].
pub fn adaptive_scalar(a: f64, b: f64, abs_tol: f64, rel_tol: f64, f: impl Fn(f64) -> f64) -> Result<(f64, f64), QuadError> {
    adaptive(a, b, abs_tol, rel_tol, |x| [f(x)]).map(|(v, e)| (v[0], e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let v = gauss_legendre(0.0, 2.0, 5, |x| [x.powi(9), 1.0]);
        assert!((v[0] - 2f64.powi(10) / 10.0).abs() < 1e-11);
        assert!((v[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // \int_0^1 x^{-1/2} = 2
        let (v, err) = adaptive_scalar(0.0, 1.0, 1e-10, 0.0, |x| x.powf(-0.5)).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v} {err}");
    }

    #[test]
    fn adaptive_reports_failure() {
        let r = adaptive_scalar(0.0, 1.0, 1e-300, 0.0, |x| if x < 0.3 { 0.0 } else { 1.0 / (x - 0.3).sqrt().max(1e-300) });
        assert!(r.is_err());
    }
}
