use std::sync::Arc;

use bmk::body::{lp_combination, make_body, power_mean, wulff_construct, BodyRep, BodySpec, Catalog, CatalogEntry};
use bmk::lpsolver::{newton_solve, Forcing, NewtonOptions};
use bmk::measure::{mixed_integral, verify_bm, volume};
use bmk::spectrum::{assemble_pencil, solve_spectrum, third_eigenvalue, Subspace};
use bmk::sphere::{Dim, Discretization, SpectralField};
use bmk::stability::{
    moments, random_even_field, second_variation, stable_condition, EigenBound, VariationProbe,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn disc2() -> Arc<Discretization> {
    Discretization::shared(Dim::Two, 64).unwrap()
}

fn ellipse(a: f64, b: f64, d: &Arc<Discretization>) -> BodyRep {
    let e = CatalogEntry {
        name: format!("ellipsoid:{a},{b}"),
        spec: BodySpec::Ellipsoid { semiaxes: vec![a, b] },
    };
    make_body(&e, d).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_mean_is_monotone_in_p(a in 0.1f64..10.0, b in 0.1f64..10.0, lam in 0.0f64..=1.0, p in 0.0f64..3.0, dp in 0.01f64..2.0) {
        let lo = power_mean(a, b, p, lam);
        let hi = power_mean(a, b, p + dp, lam);
        prop_assert!(lo <= hi * (1.0 + 1e-14));
        prop_assert!(lo >= a.min(b) * (1.0 - 1e-14) && hi <= a.max(b) * (1.0 + 1e-14));
    }

    #[test]
    fn volume_is_homogeneous(a in 1.0f64..3.0, c in 0.2f64..5.0) {
        let d = disc2();
        let k = ellipse(a, 1.0, &d);
        prop_assert!(rel(volume(&k.dilate(c).unwrap()), c * c * volume(&k)) < 1e-12);
        prop_assert!(rel(volume(&k), std::f64::consts::PI * a) < 1e-12);
    }

    #[test]
    fn wulff_body_lies_below_and_fixes_support_functions(a in 1.0f64..3.0, p in 0.0f64..0.9, lam in 0.0f64..=1.0) {
        let d = disc2();
        let k = ellipse(a, 1.0, &d);
        let l = make_body(&Catalog::builtin(Dim::Two).entries[2], &d).unwrap();
        let g = lp_combination(&k, &l, p, lam).unwrap();
        let w = wulff_construct(&g, &d).unwrap();
        let hw = w.body.support_values();
        let excess = hw.iter().zip(&g.values).map(|(h, g)| h - g).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(excess <= w.report.mollification_sup + 1e-12);
        let again = wulff_construct(&bmk::body::CandidateField::new(Dim::Two, hw.clone()).unwrap(), &d).unwrap();
        let drift = again.body.support_values().iter().zip(&hw).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(drift < 1e-10);
    }

    #[test]
    fn bm_is_symmetric_under_swap(a in 1.0f64..3.0, b in 1.0f64..3.0, lam in 0.0f64..=1.0) {
        let d = disc2();
        let k = ellipse(a, 1.0, &d);
        let l = ellipse(1.0, b, &d);
        let x = verify_bm(&k, &l, &[lam]).unwrap();
        let y = verify_bm(&l, &k, &[1.0 - lam]).unwrap();
        prop_assert!(rel(x.points[0].lhs, y.points[0].lhs) < 1e-12);
        prop_assert!(x.points[0].margin >= -1e-9);
    }

    #[test]
    fn ellipses_have_third_eigenvalue_three(a in 1.0f64..4.0) {
        let t = third_eigenvalue(&ellipse(a, 1.0, &disc2())).unwrap();
        prop_assert!((t.lambda3 - 3.0).abs() < 1e-7, "{}", t.lambda3);
    }

    #[test]
    fn spectrum_is_dilation_invariant(c in 0.3f64..3.0) {
        let k = make_body(&Catalog::builtin(Dim::Two).entries[3], &disc2()).unwrap();
        let a = third_eigenvalue(&k).unwrap().lambda3;
        let b = third_eigenvalue(&k.dilate(c).unwrap()).unwrap().lambda3;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn rayleigh_quotient_bounds_lowest_eigenvalue(seed in 0u64..1000) {
        let k = make_body(&Catalog::builtin(Dim::Two).entries[2], &disc2()).unwrap();
        let pencil = assemble_pencil(&k, Subspace::Even).unwrap();
        let lowest = solve_spectrum(&pencil, 3).unwrap().eigenvalues[0];
        let phi = random_even_field(&disc2(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let v = pencil.restrict(&phi.coefficients);
        let rq = v.dot(&(&pencil.a * &v)) / v.dot(&(&pencil.b * &v));
        prop_assert!(rq >= lowest - 1e-9);
    }

    #[test]
    fn first_variation_vanishes(seed in 0u64..1000, p in 0.0f64..0.9, lam in 0.05f64..0.95) {
        let d = disc2();
        let k = ellipse(2.0, 1.0, &d);
        let phi = random_even_field(&d, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (i1, _) = second_variation(&VariationProbe::new(&k, phi, p, lam).unwrap());
        prop_assert!(i1.abs() < 1e-10);
    }

    #[test]
    fn eigen_bound_margin_is_nonnegative(seed in 0u64..1000) {
        let d = disc2();
        let k = make_body(&Catalog::builtin(Dim::Two).entries[3], &d).unwrap();
        let phi = random_even_field(&d, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(EigenBound::new(&k).unwrap().check(&k, &phi).unwrap().margin >= -1e-9);
    }

    #[test]
    fn stable_margin_is_quadratic(seed in 0u64..1000, t in -3.0f64..3.0) {
        let d = disc2();
        let k = ellipse(1.5, 1.0, &d);
        let phi = random_even_field(&d, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let a = stable_condition(&k, &phi, 0.0).unwrap().margin;
        let b = stable_condition(&k, &phi.scaled(t), 0.0).unwrap().margin;
        prop_assert!((b - t * t * a).abs() < 1e-10 * (1.0 + a.abs() * t * t));
        prop_assert!(rel(moments(&k, &phi).unwrap().f, mixed_integral(&k)) < 1e-14);
    }

    #[test]
    fn newton_recovers_ellipses(a in 1.0f64..2.5, p in 0.05f64..0.95) {
        let d = disc2();
        let k = ellipse(a, 1.0, &d);
        let u0 = SpectralField::constant(Dim::Two, 64, (a + 1.0) / 2.0);
        let s = newton_solve(&d, &Forcing::from_body(&k, p), p, &u0, NewtonOptions::default()).unwrap();
        let err = d.values(&s.solution.axpy(-1.0, k.field())).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(err < 1e-8, "{}", err);
    }
}

fn lambda3_at(entry: &CatalogEntry, dim: Dim, band: usize) -> f64 {
    let d = Discretization::shared(dim, band).unwrap();
    third_eigenvalue(&make_body(entry, &d).unwrap()).unwrap().lambda3
}

#[test]
fn third_eigenvalue_converges_under_refinement() {
    for e in &Catalog::builtin(Dim::Two).entries {
        let (fine, coarse) = (lambda3_at(e, Dim::Two, 64), lambda3_at(e, Dim::Two, 32));
        assert!((fine - coarse).abs() < 1e-6, "{}: {fine} vs {coarse}", e.name);
    }
    // The q = 4 smoothed cube has a slowly decaying spectrum in space and is left out.
    for e in Catalog::builtin(Dim::Three).entries.iter().filter(|e| e.name != "smoothed_cube") {
        let (fine, coarse) = (lambda3_at(e, Dim::Three, 24), lambda3_at(e, Dim::Three, 12));
        assert!((fine - coarse).abs() < 1e-6, "{}: {fine} vs {coarse}", e.name);
    }
}

#[test]
fn catalog_round_trips_through_json() {
    for dim in [Dim::Two, Dim::Three] {
        let cat = Catalog::builtin(dim);
        let text = serde_json::to_string(&cat).unwrap();
        assert_eq!(Catalog::from_json(&text).unwrap(), cat);
    }
}
