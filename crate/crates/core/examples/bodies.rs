//! Catalog bodies, L_p combinations and the Wulff body of a combination.
use bmk::body::{lp_combination, make_body, wulff_construct, Catalog};
use bmk::measure::volume;
use bmk::sphere::{Dim, Discretization};

fn main() -> bmk::Result<()> {
    let dim = Dim::Two;
    let disc = Discretization::shared(dim, dim.default_band())?;
    let bodies = Catalog::builtin(dim)
        .entries
        .iter()
        .map(|e| make_body(e, &disc))
        .collect::<bmk::Result<Vec<_>>>()?;
    for b in &bodies {
        println!(
            "{:>15}: volume {:.10}, convexity margin {:.4}",
            b.name(),
            volume(b),
            b.convexity_margin()
        );
    }

    // For p < 1 the power mean need not be a support function; the Wulff
    // body is the largest convex body under it.
    let (k, l) = (&bodies[1], &bodies[2]);
    for p in [0.0, 0.5, 2.0] {
        let g = lp_combination(k, l, p, 0.5)?;
        let w = wulff_construct(&g, &disc)?;
        println!(
            "p = {p}: Wulff volume {:.10}, truncated nodes {}, max truncation {:.2e}",
            volume(&w.body),
            w.report.truncated_nodes,
            w.report.max_truncation
        );
    }
    Ok(())
}
