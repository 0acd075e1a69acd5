//! Second variation of the Brunn-Minkowski ratio, the stable condition,
//! inf J and the eigenvalue inequality behind them.
use bmk::body::{make_body, Catalog};
use bmk::sphere::{Dim, Discretization};
use bmk::stability::{
    i2_finite_difference, inf_j, random_even_field, second_variation, stable_condition, EigenBound,
    VariationProbe, FD_STEP,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bmk::Result<()> {
    let disc = Discretization::shared(Dim::Two, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for e in &Catalog::builtin(Dim::Two).entries {
        let k = make_body(e, &disc)?;
        let phi = random_even_field(&disc, &mut rng)?;

        let probe = VariationProbe::new(&k, phi.clone(), 0.3, 0.5)?;
        let (i1, i2) = second_variation(&probe);
        let fd = i2_finite_difference(&probe, FD_STEP)?;
        let cond = stable_condition(&k, &phi, 0.0)?;
        let bound = EigenBound::new(&k)?.check(&k, &phi)?;
        let j = inf_j(&k)?;
        println!("{}:", e.name);
        println!("  I'(0) {i1:.1e}, I''(0) {i2:.9e}, finite difference {fd:.9e}");
        println!("  stable margin {:.6e}, eigenvalue-inequality margin {:.6e}", cond.margin, bound.margin);
        println!("  λ₃ {:.9}, inf J {:.12}, minimizer angle to h {:.1e}", bound.lambda3, j.value, j.h_angle);
    }
    Ok(())
}
