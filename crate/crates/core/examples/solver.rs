//! Newton, continuation and a uniqueness probe for det(∇²u + uI) = f u^{p-1}.
use bmk::body::{make_body, BodySpec, CatalogEntry};
use bmk::lpsolver::{homotopy_solve, linearized_check_at_one, newton_solve, uniqueness_probe, Forcing, NewtonOptions, Schedule};
use bmk::sphere::{Dim, Discretization, Mode, SpectralField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bmk::Result<()> {
    let dim = Dim::Two;
    let disc = Discretization::shared(dim, 64)?;
    let opts = NewtonOptions::default();

    // f built from an ellipse, so the ellipse is a solution.
    let spec = BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] };
    let k = make_body(&CatalogEntry { name: "ellipse".into(), spec }, &disc)?;
    let f = Forcing::from_body(&k, 0.5);
    let s = newton_solve(&disc, &f, 0.5, &SpectralField::constant(dim, 64, 1.5), opts)?;
    let err = disc.values(&s.solution.axpy(-1.0, k.field())).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    println!("round trip: {} iterations, residual {:.1e}, error {err:.1e}", s.iterations, s.residual_sup);

    // Continuation from f ≡ 1, p* = 0.5 to a non-constant f.
    let mut c = SpectralField::constant(dim, 64, 1.0);
    c.coefficients[disc.basis().index_of(Mode::Fourier { k: 2, sine: false }).unwrap()] = 0.2;
    let fc = Forcing::Field(c);
    let trace = homotopy_solve(&disc, &fc, 0.2, 0.5, Schedule::default())?;
    for st in &trace.steps {
        println!(
            "  t {:.3} p_t {:.3}: {} Newton steps, u in [{:.4}, {:.4}], C² proxy {:.3}",
            st.t, st.p_t, st.newton_iters, st.bound_low, st.bound_high, st.norm_c2alpha_proxy
        );
    }

    let base = newton_solve(&disc, &fc, 0.2, trace.solution()?, opts)?;
    let probe = uniqueness_probe(&disc, &fc, 0.2, &base, 20, 0.05, opts, &mut ChaCha8Rng::seed_from_u64(0))?;
    println!("uniqueness probe: {} cluster(s), {} converged, {} failed", probe.clusters.len(), probe.converged, probe.failed);

    let lin = linearized_check_at_one(dim, 16, 0.5)?;
    println!("linearization at u ≡ 1: smallest |multiplier| {:.4}", lin.smallest_magnitude);
    Ok(())
}
