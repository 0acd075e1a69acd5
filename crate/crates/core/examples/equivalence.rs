//! Sampling the stable condition over random even perturbations and comparing
//! the verdict with λ₃ >= 1.
use bmk::body::{make_body, Catalog};
use bmk::sphere::{Dim, Discretization};
use bmk::stability::equivalence_experiment;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bmk::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for dim in [Dim::Two, Dim::Three] {
        let disc = Discretization::shared(dim, dim.default_band())?;
        for e in &Catalog::builtin(dim).entries {
            let r = equivalence_experiment(&make_body(e, &disc)?, 0.0, 100, &mut rng)?;
            println!(
                "{}d {:>15}: λ₃ {:.6}, min margin {:+.3e}, sampled stable {}, agree {}",
                dim.ambient(),
                r.body,
                r.lambda3,
                r.min_margin,
                r.empirical_stable,
                r.verdicts_agree
            );
        }
    }
    Ok(())
}
