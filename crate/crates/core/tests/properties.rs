use std::f64::consts::{FRAC_PI_3, TAU};

use hexns::asymptotics::{grad_h, invariant_from_flux, MomentumFlux};
use hexns::grid::{Grid, GridScalarField};
use hexns::io::{decode_checkpoint, encode_checkpoint, parse_config};
use hexns::kernels::Point2;
use hexns::solver::FlowState;
use proptest::prelude::*;

fn flux() -> impl Strategy<Value = MomentumFlux> {
    (0.0..5.0, -3.0..3.0, 0.0..5.0)
        .prop_filter("z != 0", |(a, b, d): &(f64, f64, f64)| (a - d).hypot(*b) > 1e-2)
        .prop_map(|(a, b, d)| MomentumFlux::new(a, b, d))
}

fn point() -> impl Strategy<Value = Point2> {
    (0.2..30.0, 0.0..TAU).prop_map(|(r, t)| Point2::polar(r, t))
}

fn turn(p: [f64; 2], phi: f64) -> [f64; 2] {
    let (s, c) = phi.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn close(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    (a[0] - b[0]).hypot(a[1] - b[1]) <= tol * b[0].hypot(b[1]).max(f64::MIN_POSITIVE)
}

fn mod_sixth(x: f64) -> f64 {
    let r = x.rem_euclid(FRAC_PI_3);
    r.min(FRAC_PI_3 - r)
}

proptest! {
    #[test]
    fn far_field_is_rotation_covariant(f in flux(), x in point(), phi in 0.0..TAU) {
        let g = f.rotated(phi);
        let r = turn([x.x1, x.x2], phi);
        let lhs = grad_h(Point2::new(r[0], r[1]), &g).unwrap();
        let rhs = turn(grad_h(x, &f).unwrap(), phi);
        prop_assert!(close(lhs, rhs, 1e-11), "{lhs:?} vs {rhs:?}");
    }

    #[test]
    fn vertical_hexagon_turns_by_two_thirds(f in flux(), phi in 0.0..TAU) {
        let h1 = invariant_from_flux(&f).hexagon.unwrap();
        let h2 = invariant_from_flux(&f.rotated(phi)).hexagon.unwrap();
        let shift = h2.vertex_angles[0] - h1.vertex_angles[0] - 2.0 * phi / 3.0;
        prop_assert!(mod_sixth(shift) < 1e-9, "shift residual {shift}");
        prop_assert!((invariant_from_flux(&f.rotated(phi)).l - invariant_from_flux(&f).l).abs() < 1e-12 * (1.0 + f.trace()));
    }

    #[test]
    fn far_field_is_homogeneous_and_linear(f in flux(), x in point(), lam in 0.1..10.0_f64, c in 0.1..10.0_f64) {
        let base = grad_h(x, &f).unwrap();
        let far = grad_h(Point2::new(lam * x.x1, lam * x.x2), &f).unwrap();
        prop_assert!(close([far[0] * lam.powi(3), far[1] * lam.powi(3)], base, 1e-12));
        let scaled = grad_h(x, &MomentumFlux::new(c * f.a, c * f.b, c * f.d)).unwrap();
        prop_assert!(close(scaled, [c * base[0], c * base[1]], 1e-12));
    }

    #[test]
    fn isotropic_flux_has_no_far_field(s in 0.0..5.0, x in point()) {
        let inv = invariant_from_flux(&MomentumFlux::new(s, 0.0, s));
        prop_assert_eq!(inv.l, 0.0);
        prop_assert!(inv.hexagon.is_none());
        prop_assert!(grad_h(x, &MomentumFlux::new(s, 0.0, s)).map_or(true, |g| g == [0.0, 0.0]));
    }

    #[test]
    fn checkpoints_round_trip(values in prop::collection::vec(-1e3..1e3_f64, 256), t in 0.0..10.0, a in 0.0..1.0, b in -1.0..1.0, d in 0.0..1.0) {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let field = GridScalarField::from_values(Grid::new(16, 4.0).unwrap(), values.iter().map(|v| v - mean).collect()).unwrap();
        let mut s = FlowState::new(field).unwrap();
        s.time = t;
        s.flux.a = a;
        s.flux.b = b;
        s.flux.d = d;
        let back = decode_checkpoint(&encode_checkpoint(&s)).unwrap();
        prop_assert_eq!(&back.omega, &s.omega);
        prop_assert_eq!((back.time, back.flux.a, back.flux.b, back.flux.d), (t, a, b, d));
    }

    #[test]
    fn config_echo_round_trips(k in 6u32..10, fin in 1e-3..10.0, frac in 0.05..1.0, seed in any::<u32>(), bm in 8.0..20.0) {
        let text = format!("[grid]\nn = {}\nbox_multiplier = {bm}\n[time]\nfinal = {fin}\ndt = {{ policy = \"cfl_fraction\", fraction = {frac} }}\n[init]\nseed = {seed}\n", 1u32 << k);
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }
}
