//! Quadrature and spectral transforms on the circle and the 2-sphere.
use bmk::sphere::{Dim, Discretization, Mode};

fn main() -> bmk::Result<()> {
    for dim in [Dim::Two, Dim::Three] {
        let disc = Discretization::new(dim, dim.default_band())?;
        let grid = disc.grid();
        println!(
            "dim {}: band {}, {} modes, {} nodes, exact to degree {}",
            dim.ambient(),
            disc.band(),
            disc.basis().len(),
            grid.len(),
            grid.exact_degree()
        );

        // |S^n| and ∫ x_1² = |S^n| / d
        let area = disc.integrate(&vec![1.0; grid.len()])?;
        let second = disc.integrate(&grid.sample(|x| x[0] * x[0]))?;
        println!("  area {area:.15}, second moment {second:.15}");

        // Round trip through coefficients.
        let f = grid.sample(|x| 1.0 + x[0] * x[1] + x[2].powi(4));
        let field = disc.analyze(&f)?;
        let back = disc.values(&field);
        let err = f.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("  analyze/synthesize round trip {err:.2e}, even: {}", field.even);

        // Trace of the covariant Hessian of a degree-ℓ mode is -ℓ(ℓ+n-1) Y.
        let mode = match dim {
            Dim::Two => Mode::Fourier { k: 2, sine: false },
            Dim::Three => Mode::Harmonic { l: 2, m: 0 },
        };
        let mut y = bmk::sphere::SpectralField::zeros(dim, disc.band());
        y.coefficients[disc.basis().index_of(mode).unwrap()] = 1.0;
        let jets = disc.synthesize(&y);
        let j = jets.iter().max_by(|a, b| a.value.abs().total_cmp(&b.value.abs())).unwrap();
        let lap = (0..dim.sphere()).map(|i| j.hessian[(i, i)]).sum::<f64>() / j.value;
        println!("  Δ Y / Y for {mode:?}: {lap:.12} (expected {})", mode.laplacian());
    }
    Ok(())
}
