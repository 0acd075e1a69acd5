//! Eigenvalues of the linearized Minkowski operator and the third eigenvalue.
use bmk::body::{make_body, Catalog};
use bmk::spectrum::{assemble_pencil, solve_spectrum, structure_report, third_eigenvalue, Subspace};
use bmk::sphere::{Dim, Discretization};

fn main() -> bmk::Result<()> {
    for dim in [Dim::Two, Dim::Three] {
        let disc = Discretization::shared(dim, dim.default_band())?;
        for e in &Catalog::builtin(dim).entries {
            let k = make_body(e, &disc)?;
            let full = solve_spectrum(&assemble_pencil(&k, Subspace::Full)?, 2 * dim.ambient() + 2)?;
            let t = third_eigenvalue(&k)?;
            let s = structure_report(&k, 1e-5)?;
            println!(
                "{}d {:>15}: {:?}\n    λ₃ = {:.9} (even {:.9}), structure holds: {}",
                dim.ambient(),
                e.name,
                full.eigenvalues.iter().map(|x| (x * 1e6).round() / 1e6).collect::<Vec<_>>(),
                t.lambda3,
                t.even,
                s.holds()
            );
        }
    }
    Ok(())
}
