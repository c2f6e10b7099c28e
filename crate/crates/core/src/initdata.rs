//! Divergence-free, compactly supported initial velocities `u₀ = ∇^⊥ψ`.
//!
//! The stream function is a sum of smooth bumps. Symmetry classes are
//! imposed by projecting ψ on the grid:
//!
//! * condition i) (`u₁` odd in `x₁`, even in `x₂`): ψ odd in both variables;
//! * condition ii) (`u₁(x₁,x₂) = u₂(x₂,x₁)`): `ψ(x₁,x₂) = −ψ(x₂,x₁)`.
//!
//! The grid is invariant under both reflections and the exchange of
//! coordinates, so the projections are exact.

use std::f64::consts::E;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{apply_derivative, inverse_real_pair, Grid, GridScalarField, GridVectorField};
use crate::kernels::Point2;

/// `exp(−s²/2)` drops below `1e-16` at `s = 8.58`.
pub const GAUSSIAN_CUTOFF: f64 = 8.58;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("bump at ({cx}, {cy}) with radius {r} leaves the central quarter of the box")]
    OutsideQuarter { cx: f64, cy: f64, r: f64 },
    #[error("bump radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("class {class:?} is incompatible with the bumps: {reason}")]
    Incompatible { class: SymmetryClass, reason: String },
    #[error("stream function does not vanish near the box boundary (|ψ| = {0:e})")]
    TouchesBoundary(f64),
    #[error("field has a nonzero mean mode")]
    NonzeroMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: Point2,
    pub radius: f64,
    pub amplitude: f64,
}

impl BumpSpec {
    pub fn new(cx: f64, cy: f64, radius: f64, amplitude: f64) -> Self {
        Self { center: Point2::new(cx, cy), radius, amplitude }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    /// `A exp(−|x−c|²/2σ²)` with `σ = r/8.58`, cut at `r`.
    #[default]
    Gaussian,
    /// `A e · exp(−1/(1−s²))`, `s = |x−c|/r`.
    Mollifier,
}

impl BumpProfile {
    pub fn eval(self, bump: &BumpSpec, p: Point2) -> f64 {
        let s2 = (p - bump.center).norm_sq() / (bump.radius * bump.radius);
        if s2 >= 1.0 {
            return 0.0;
        }
        match self {
            BumpProfile::Gaussian => bump.amplitude * (-0.5 * s2 * GAUSSIAN_CUTOFF * GAUSSIAN_CUTOFF).exp(),
            BumpProfile::Mollifier => bump.amplitude * E * (-1.0 / (1.0 - s2)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    Generic,
    Radial,
    Symmetric,
    HalfSymmetricI,
    HalfSymmetricIi,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 5] = [
        SymmetryClass::Generic,
        SymmetryClass::Radial,
        SymmetryClass::Symmetric,
        SymmetryClass::HalfSymmetricI,
        SymmetryClass::HalfSymmetricIi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SymmetryClass::Generic => "generic",
            SymmetryClass::Radial => "radial",
            SymmetryClass::Symmetric => "symmetric",
            SymmetryClass::HalfSymmetricI => "half_symmetric_i",
            SymmetryClass::HalfSymmetricIi => "half_symmetric_ii",
        }
    }

    fn enforces_i(self) -> bool {
        matches!(self, SymmetryClass::Symmetric | SymmetryClass::HalfSymmetricI)
    }

    fn enforces_ii(self) -> bool {
        matches!(self, SymmetryClass::Symmetric | SymmetryClass::HalfSymmetricIi)
    }
}

/// `u = ∇^⊥ψ = (−∂₂ψ, ∂₁ψ)` by spectral differentiation.
pub fn stream_to_velocity(psi: &GridScalarField) -> Result<GridVectorField, InitError> {
    let grid = *psi.grid();
    let edge = boundary_max(psi);
    if edge > 1e-13 * psi.max_abs() {
        return Err(InitError::TouchesBoundary(edge));
    }
    let spec = psi.spectrum();
    let d2 = apply_derivative(&grid, &spec, 1);
    let d1 = apply_derivative(&grid, &spec, 0);
    let neg: Vec<_> = d2.into_iter().map(|v| -v).collect();
    let (u1, u2) = inverse_real_pair(&grid, &neg, &d1);
    Ok(GridVectorField::new(
        GridScalarField::from_values(grid, u1).expect("grid length"),
        GridScalarField::from_values(grid, u2).expect("grid length"),
    )
    .expect("same grid"))
}

fn boundary_max(f: &GridScalarField) -> f64 {
    let n = f.grid().n();
    let mut m: f64 = 0.0;
    for k in 0..n {
        for &(i, j) in &[(0, k), (1, k), (n - 1, k), (k, 0), (k, 1), (k, n - 1)] {
            m = m.max(f.at(i, j).abs());
        }
    }
    m
}

fn check_bump(grid: &Grid, b: &BumpSpec) -> Result<(), InitError> {
    if !(b.radius > 0.0 && b.radius.is_finite()) {
        return Err(InitError::BadRadius(b.radius));
    }
    let q = grid.box_len() / 4.0;
    if b.center.x1.abs() + b.radius >= q || b.center.x2.abs() + b.radius >= q {
        return Err(InitError::OutsideQuarter { cx: b.center.x1, cy: b.center.x2, r: b.radius });
    }
    Ok(())
}

/// Stream function of the bumps, projected onto the class.
pub fn stream_function(grid: Grid, bumps: &[BumpSpec], class: SymmetryClass, profile: BumpProfile) -> Result<GridScalarField, InitError> {
    for b in bumps {
        check_bump(&grid, b)?;
    }
    if class == SymmetryClass::Radial {
        if bumps.len() != 1 || bumps[0].center.norm() != 0.0 {
            return Err(InitError::Incompatible { class, reason: "needs exactly one bump centred at the origin".into() });
        }
    } else if bumps.is_empty() {
        return Err(InitError::Incompatible { class, reason: "no bumps".into() });
    }
    let raw = GridScalarField::from_fn(grid, |p| bumps.iter().map(|b| profile.eval(b, p)).sum());
    Ok(symmetrize(&raw, class))
}

/// Exact grid projection of ψ onto the class's symmetry conditions.
pub fn symmetrize(psi: &GridScalarField, class: SymmetryClass) -> GridScalarField {
    let g = *psi.grid();
    let n = g.n();
    let mut v = psi.values().to_vec();
    if class.enforces_i() {
        let src = v.clone();
        for j in 0..n {
            for i in 0..n {
                let (mi, mj) = (g.mirror(i), g.mirror(j));
                v[j * n + i] = 0.25 * (src[j * n + i] - src[j * n + mi] - src[mj * n + i] + src[mj * n + mi]);
            }
        }
    }
    if class.enforces_ii() {
        let src = v.clone();
        for j in 0..n {
            for i in 0..n {
                v[j * n + i] = 0.5 * (src[j * n + i] - src[i * n + j]);
            }
        }
    }
    GridScalarField::from_values(g, v).expect("grid length")
}

/// Initial velocity of the requested class. An empty bump list is filled
/// from `seed` with [`seeded_bumps`].
pub fn make_datum(grid: Grid, bumps: &[BumpSpec], class: SymmetryClass, seed: u64) -> Result<GridVectorField, InitError> {
    make_datum_with(grid, bumps, class, seed, BumpProfile::Gaussian)
}

pub fn make_datum_with(
    grid: Grid,
    bumps: &[BumpSpec],
    class: SymmetryClass,
    seed: u64,
    profile: BumpProfile,
) -> Result<GridVectorField, InitError> {
    let owned;
    let bumps = if bumps.is_empty() {
        owned = seeded_bumps(grid.box_len() / 16.0, class, seed);
        &owned[..]
    } else {
        bumps
    };
    stream_to_velocity(&stream_function(grid, bumps, class, profile)?)
}

/// Deterministic bump family for `seed`: one origin bump for the radial
/// class, otherwise four overlapping off-centre bumps of unequal size and
/// sign inside the disk of radius `support`.
pub fn seeded_bumps(support: f64, class: SymmetryClass, seed: u64) -> Vec<BumpSpec> {
    if class == SymmetryClass::Radial {
        return vec![BumpSpec::new(0.0, 0.0, support, 1.0)];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(4);
    for k in 0..4 {
        let r = support * rng.random_range(0.8..0.9);
        let reach = support - r;
        let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let rad = reach * rng.random_range(0.5..1.0);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let amp = sign * rng.random_range(0.5..1.5);
        out.push(BumpSpec::new(rad * ang.cos(), rad * ang.sin(), r, amp));
    }
    out
}

/// `∫u₀ ⊗ u₀` and whether it differs from a multiple of the identity by
/// more than `1e-10 ∫|u₀|²`.
pub fn nonsymmetry_check(u0: &GridVectorField) -> (bool, [[f64; 2]; 2]) {
    let [s11, s12, s22] = crate::asymptotics::flux_density(u0);
    let m = [[s11, 0.5 * s12], [0.5 * s12, s22]];
    let off = (s11 - s22).abs() + s12.abs();
    (off > 1e-10 * (s11 + s22), m)
}

/// `[Σ(|û₁|²−|û₂|²)/|ξ|², Σ 2Re(û₁ conj û₂)/|ξ|², Σ(|û₁|²+|û₂|²)/|ξ|²]`
/// with Plancherel normalization.
fn hminus1_sums(u0: &GridVectorField) -> Result<[f64; 3], InitError> {
    let g = *u0.grid();
    let n = g.n();
    let a = u0.u1.spectrum();
    let b = u0.u2.spectrum();
    let scale = (a.iter().map(|v| v.norm()).sum::<f64>() + b.iter().map(|v| v.norm()).sum::<f64>()).max(f64::MIN_POSITIVE);
    if (a[0].norm() + b[0].norm()) > 1e-12 * scale {
        return Err(InitError::NonzeroMean);
    }
    let k = g.wavenumbers();
    let norm = g.cell_area() / (n * n) as f64;
    let mut s = [0.0; 3];
    for j in 0..n {
        for i in 0..n {
            let idx = j * n + i;
            if idx == 0 {
                continue;
            }
            let w = 1.0 / (k[i] * k[i] + k[j] * k[j]);
            let (p, q) = (a[idx].norm_sqr(), b[idx].norm_sqr());
            s[0] += (p - q) * w;
            s[1] += 2.0 * (a[idx] * b[idx].conj()).re * w;
            s[2] += (p + q) * w;
        }
    }
    Ok(s.map(|v| v * norm))
}

/// `κ₀ = √[(∫(|û₁|²−|û₂|²)/|ξ|²)² + (∫2Re(û₁ conj û₂)/|ξ|²)²]`.
pub fn kappa0(u0: &GridVectorField) -> Result<f64, InitError> {
    let s = hminus1_sums(u0)?;
    Ok(s[0].hypot(s[1]))
}

/// `‖u₀‖²_{Ḣ⁻¹}`.
pub fn hminus1_norm_sq(u0: &GridVectorField) -> Result<f64, InitError> {
    Ok(hminus1_sums(u0)?[2])
}

/// Max deviation from condition i) on the grid, relative to `max|u|`.
pub fn condition_i_defect(u: &GridVectorField) -> f64 {
    let g = *u.grid();
    let n = g.n();
    let mut m: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let v = u.u1.at(i, j);
            m = m.max((v + u.u1.at(g.mirror(i), j)).abs());
            m = m.max((v - u.u1.at(i, g.mirror(j))).abs());
        }
    }
    m / u.max_abs().max(f64::MIN_POSITIVE)
}

/// Max deviation from condition ii) on the grid, relative to `max|u|`.
pub fn condition_ii_defect(u: &GridVectorField) -> f64 {
    let n = u.grid().n();
    let mut m: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            m = m.max((u.u1.at(i, j) - u.u2.at(j, i)).abs());
        }
    }
    m / u.max_abs().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::short_time_slope;

    fn grid() -> Grid {
        Grid::new(128, 8.0).unwrap()
    }

    fn bumps() -> Vec<BumpSpec> {
        vec![BumpSpec::new(0.3, 0.1, 1.5, 1.0), BumpSpec::new(-0.25, 0.2, 1.4, -0.7), BumpSpec::new(0.05, -0.35, 1.3, 0.5)]
    }

    #[test]
    fn zero_stream_gives_zero_velocity() {
        let u = stream_to_velocity(&GridScalarField::zeros(grid())).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn radial_stream_gives_circular_velocity() {
        let g = grid();
        let u = make_datum(g, &[BumpSpec::new(0.0, 0.0, 1.8, 1.0)], SymmetryClass::Radial, 0).unwrap();
        let mut m: f64 = 0.0;
        for j in 0..g.n() {
            for i in 0..g.n() {
                let p = g.point(i, j);
                m = m.max((u.u1.at(i, j) * p.x1 + u.u2.at(i, j) * p.x2).abs());
            }
        }
        assert!(m < 1e-10, "{m}");
        assert!(short_time_slope(&u) < 1e-12 * u.norm_sq());
    }

    #[test]
    fn velocity_is_solenoidal_and_curl_is_laplacian() {
        let g = grid();
        let psi = stream_function(g, &bumps(), SymmetryClass::Generic, BumpProfile::Gaussian).unwrap();
        let u = stream_to_velocity(&psi).unwrap();
        assert!(u.divergence().max_abs() <= 1e-12 * u.max_abs());
        let w = u.curl();
        let lap = psi.laplacian();
        let err = w.values().iter().zip(lap.values()).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-10 * lap.max_abs());
        assert!(w.integral().abs() < 1e-12 * w.max_abs());
        assert!(w.moment(1, 0).abs() < 1e-12 * w.max_abs() && w.moment(0, 1).abs() < 1e-12 * w.max_abs());
    }

    #[test]
    fn class_identities_hold() {
        let g = grid();
        for class in SymmetryClass::ALL {
            if class == SymmetryClass::Radial {
                continue;
            }
            let u = make_datum(g, &bumps(), class, 0).unwrap();
            let (di, dii) = (condition_i_defect(&u), condition_ii_defect(&u));
            match class {
                SymmetryClass::Symmetric => assert!(di < 1e-12 && dii < 1e-12),
                SymmetryClass::HalfSymmetricI => assert!(di < 1e-12 && dii > 1e-3),
                SymmetryClass::HalfSymmetricIi => assert!(di > 1e-3 && dii < 1e-12),
                _ => assert!(di > 1e-3 && dii > 1e-3),
            }
        }
    }

    #[test]
    fn symmetric_datum_has_isotropic_flux() {
        let u = make_datum(grid(), &bumps(), SymmetryClass::Symmetric, 0).unwrap();
        let (asym, m) = nonsymmetry_check(&u);
        assert!(!asym);
        assert!((m[0][0] - m[1][1]).abs() < 1e-12 * m[0][0] && m[0][1].abs() < 1e-12 * m[0][0]);
        let k = kappa0(&u).unwrap();
        assert!(k <= 1e-10 * hminus1_norm_sq(&u).unwrap());
        assert!(short_time_slope(&u) < 1e-12 * u.norm_sq());
    }

    #[test]
    fn generic_datum_is_nonsymmetric() {
        let u = make_datum(grid(), &bumps(), SymmetryClass::Generic, 0).unwrap();
        assert!(nonsymmetry_check(&u).0);
        assert!(kappa0(&u).unwrap() > 0.0);
    }

    #[test]
    fn one_component_field() {
        let g = grid();
        let f = GridScalarField::from_fn(g, |p| (-4.0 * p.norm_sq()).exp() * p.x1);
        let u = GridVectorField::new(f.clone(), GridScalarField::zeros(g)).unwrap();
        assert!(nonsymmetry_check(&u).0);
        assert!(kappa0(&u).unwrap() > 0.0);
        let slope = short_time_slope(&u);
        assert!((slope - f.norm_sq() / std::f64::consts::PI).abs() < 1e-14 * slope);
    }

    #[test]
    fn flux_matrix_conjugates_under_quarter_turn() {
        let u = make_datum(grid(), &bumps(), SymmetryClass::Generic, 0).unwrap();
        let (_, m) = nonsymmetry_check(&u);
        let (_, r) = nonsymmetry_check(&u.rotated_quarter_turns(1));
        // R M Rᵀ for a quarter turn swaps the diagonal and flips the off-diagonal
        assert!((r[0][0] - m[1][1]).abs() < 1e-10 * m[0][0]);
        assert!((r[1][1] - m[0][0]).abs() < 1e-10 * m[0][0]);
        assert!((r[0][1] + m[0][1]).abs() < 1e-10 * m[0][0]);
    }

    #[test]
    fn kappa0_scaling() {
        let g = grid();
        let u = make_datum(g, &bumps(), SymmetryClass::Generic, 0).unwrap();
        let half = Grid::new(g.n(), g.box_len() / 2.0).unwrap();
        let scaled = GridVectorField::new(
            GridScalarField::from_values(half, u.u1.values().iter().map(|v| 2.0 * v).collect()).unwrap(),
            GridScalarField::from_values(half, u.u2.values().iter().map(|v| 2.0 * v).collect()).unwrap(),
        )
        .unwrap();
        let (k, ks) = (kappa0(&u).unwrap(), kappa0(&scaled).unwrap());
        assert!((ks - k / 4.0).abs() < 1e-8 * k);
    }

    #[test]
    fn rejects_bad_input() {
        let g = grid();
        assert!(matches!(
            make_datum(g, &[BumpSpec::new(1.0, 0.0, 1.5, 1.0)], SymmetryClass::Generic, 0),
            Err(InitError::OutsideQuarter { .. })
        ));
        assert!(matches!(make_datum(g, &bumps(), SymmetryClass::Radial, 0), Err(InitError::Incompatible { .. })));
        let edge = GridScalarField::from_fn(g, |p| (p.x1 * 0.3).cos());
        assert!(matches!(stream_to_velocity(&edge), Err(InitError::TouchesBoundary(_))));
        let c = GridVectorField::new(GridScalarField::from_fn(g, |_| 1.0), GridScalarField::zeros(g)).unwrap();
        assert_eq!(kappa0(&c), Err(InitError::NonzeroMean));
    }

    #[test]
    fn seeding_is_deterministic() {
        let g = Grid::new(128, 16.0).unwrap();
        let a = make_datum(g, &[], SymmetryClass::Generic, 11).unwrap();
        let b = make_datum(g, &[], SymmetryClass::Generic, 11).unwrap();
        let c = make_datum(g, &[], SymmetryClass::Generic, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(nonsymmetry_check(&a).0);
    }

    #[test]
    fn mollifier_profile_is_compact() {
        let b = BumpSpec::new(0.0, 0.0, 1.0, 2.0);
        assert_eq!(BumpProfile::Mollifier.eval(&b, Point2::new(1.0, 0.0)), 0.0);
        assert!((BumpProfile::Mollifier.eval(&b, Point2::ORIGIN) - 2.0).abs() < 1e-15);
        assert!(BumpProfile::Gaussian.eval(&b, Point2::new(0.999, 0.0)) < 1e-15);
    }
}
