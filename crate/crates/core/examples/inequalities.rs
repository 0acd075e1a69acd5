//! Brunn-Minkowski, L_p and p-power versions, and the L_p Minkowski inequality.
use bmk::body::{make_body, BodySpec, CatalogEntry};
use bmk::measure::{lambda_grid, verify_bm, verify_lp_bm, verify_lp_minkowski, verify_p_bm};
use bmk::sphere::{Dim, Discretization};

fn main() -> bmk::Result<()> {
    let disc = Discretization::shared(Dim::Two, 64)?;
    let body = |name: &str, spec| make_body(&CatalogEntry { name: name.into(), spec }, &disc);
    let k = body("ellipse", BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] })?;
    let l = body("ball", BodySpec::Ball { radius: 1.0 })?;
    let grid = lambda_grid(11);

    for r in [
        verify_bm(&k, &l, &grid)?,
        verify_lp_bm(&k, &l, 0.0, &grid)?,
        verify_lp_bm(&k, &l, 0.5, &grid)?,
        verify_p_bm(&k, &l, 0.5, &grid)?,
        verify_lp_minkowski(&k, &l, 0.5)?,
    ] {
        println!(
            "{:>6} p={:?}: worst relative margin {:+.3e} pass={} equality={}",
            r.name.label(),
            r.params.p,
            r.margin,
            r.pass,
            r.equality_flag
        );
    }

    // Dilates are the equality case.
    let r = verify_p_bm(&k, &k.dilate(3.0)?, 0.5, &grid)?;
    println!("dilate pair: margin {:.1e}, equality={}", r.margin, r.equality_flag);

    // Firey's p = 2 case for two balls at λ = 1/2.
    let b2 = body("ball2", BodySpec::Ball { radius: 2.0 })?;
    let f = verify_lp_bm(&l, &b2, 2.0, &[0.5])?;
    println!("Firey: lhs {:.12} (2.5π), rhs {:.12} (2π)", f.lhs, f.rhs);
    Ok(())
}
