//! Custom catalogs in JSON, merged with the built-in bodies.
use bmk::body::{make_body, Catalog};
use bmk::harness::catalog_table;
use bmk::measure::volume;
use bmk::sphere::{Dim, Discretization};

const EXTRA: &str = r#"[
  {"name": "long_ellipse", "kind": "ellipsoid", "params": {"semiaxes": [4, 1]}},
  {"name": "rounded_square", "kind": "smoothed_cube", "params": {"q": 8, "scales": [1, 1], "rounding": 0.2}},
  {"name": "bumpy", "kind": "perturbed_ball", "params": {"radius": 1, "amplitudes": [{"degree": 6, "order": 0, "value": 0.01}]}}
]"#;

fn main() -> bmk::Result<()> {
    let cat = Catalog::builtin(Dim::Two).merge(Catalog::from_json(EXTRA)?)?;
    println!("{}", catalog_table(&cat));

    let disc = Discretization::shared(Dim::Two, 64)?;
    for e in &cat.entries {
        println!("{:>15}: volume {:.8}", e.name, volume(&make_body(e, &disc)?));
    }

    // Inline names need no catalog entry.
    let inline = cat.resolve("ellipsoid:3,2", Dim::Two)?;
    println!("inline: {:?}", inline.spec);

    match Catalog::builtin(Dim::Two).merge(Catalog::builtin(Dim::Two)) {
        Err(e) => println!("merging twice: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
