//! Acceptance and quick suites: each criterion is a closed-form or
//! self-consistency check with a fixed tolerance.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::body::{make_body, BodyRep, BodySpec, Catalog, CatalogEntry};
use crate::error::Result;
use crate::lpsolver::{
    homotopy_solve, newton_solve, uniqueness_probe, Forcing, NewtonOptions, Schedule,
};
use crate::measure::{lambda_grid, verify_bm, verify_lp_bm, verify_lp_minkowski, verify_p_bm, EQUALITY_TOL};
use crate::spectrum::{assemble_pencil, generalized_eigen, solve_spectrum, third_eigenvalue, verify_structure, Subspace};
use crate::sphere::{Dim, Discretization, Mode, SpectralField};
use crate::stability::{
    equivalence_experiment, i2_finite_difference, inf_j, random_even_field, second_variation,
    stable_condition, EigenBound, VariationProbe, FD_STEP,
};

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2}: {} ({:.2} s) {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Acceptance,
    Quick,
}

impl std::str::FromStr for SuiteName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "acceptance" => Ok(SuiteName::Acceptance),
            "quick" => Ok(SuiteName::Quick),
            other => Err(format!("unknown suite '{other}' (expected acceptance or quick)")),
        }
    }
}

/// Which dimensions and how many random trials a run uses.
#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    pub three_d: bool,
    pub probes: usize,
    pub trials: usize,
}

impl SuiteConfig {
    pub fn new(name: SuiteName, seed: u64) -> Self {
        match name {
            SuiteName::Acceptance => SuiteConfig { seed, three_d: true, probes: 10, trials: 100 },
            SuiteName::Quick => SuiteConfig { seed, three_d: false, probes: 3, trials: 20 },
        }
    }

    fn dims(&self) -> Vec<Dim> {
        if self.three_d {
            vec![Dim::Two, Dim::Three]
        } else {
            vec![Dim::Two]
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }
}

fn disc(dim: Dim) -> Result<Arc<Discretization>> {
    Discretization::shared(dim, dim.default_band())
}

fn catalog_bodies(dim: Dim) -> Result<Vec<BodyRep>> {
    let d = disc(dim)?;
    Catalog::builtin(dim).entries.iter().map(|e| make_body(e, &d)).collect()
}

fn spec_body(name: &str, spec: BodySpec, d: &Arc<Discretization>) -> Result<BodyRep> {
    make_body(&CatalogEntry { name: name.into(), spec }, d)
}

fn timed(id: usize, title: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let t = Instant::now();
    let (pass, detail) = match f() {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        title: title.to_string(),
        pass,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn worst(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Spectrum of the unit ball against `k² - 1` (circle) or `ℓ(ℓ+1) - 2` (sphere).
pub fn ball_spectrum(dim: Dim) -> CriterionResult {
    let (id, tol, limit, title) = match dim {
        Dim::Two => (1, 1e-8, 1.0, "ball spectrum in the plane"),
        Dim::Three => (2, 1e-6, 30.0, "ball spectrum in space"),
    };
    let start = Instant::now();
    let mut r = timed(id, title, || {
        let d = disc(dim)?;
        let b = spec_body("ball", BodySpec::Ball { radius: 1.0 }, &d)?;
        let oracle: Vec<f64> = match dim {
            Dim::Two => [0usize, 1, 1, 2, 2].iter().map(|&k| (k * k) as f64 - 1.0).collect(),
            Dim::Three => (0..3usize)
                .flat_map(|l| std::iter::repeat_n((l * (l + 1)) as f64 - 2.0, 2 * l + 1))
                .collect(),
        };
        let res = solve_spectrum(&assemble_pencil(&b, Subspace::Full)?, oracle.len())?;
        let err = res
            .eigenvalues
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, worst);
        let l3 = *oracle.last().unwrap();
        let l3_err = (res.lambda3 - l3).abs();
        Ok((
            err < tol && l3_err < tol,
            format!("max |λ - oracle| = {err:.2e}, λ₃ = {:.12}", res.lambda3),
        ))
    });
    let secs = start.elapsed().as_secs_f64();
    if secs >= limit {
        r.pass = false;
        r.detail.push_str(&format!(", runtime {secs:.2} s over {limit} s"));
    }
    r
}

pub fn structure_all(cfg: &SuiteConfig) -> CriterionResult {
    timed(3, "single negative eigenvalue and linear kernel", || {
        let mut pass = true;
        let mut detail = Vec::new();
        for dim in cfg.dims() {
            for b in catalog_bodies(dim)? {
                match verify_structure(&b, 1e-5) {
                    Ok(r) => detail.push(format!(
                        "{}d {}: |λ₁+n| {:.1e} h-angle {:.1e} kernel-angle {:.1e}",
                        dim.ambient(),
                        b.name(),
                        r.negative_error,
                        r.h_angle,
                        r.kernel_angle
                    )),
                    Err(e) => {
                        pass = false;
                        detail.push(format!("{}d {}: {e}", dim.ambient(), b.name()));
                    }
                }
            }
        }
        Ok((pass, detail.join("; ")))
    })
}

/// Ellipses up to aspect 5 and smoothed squares with `q ∈ {2, 4, 8}`.
pub fn planar_bodies() -> Vec<CatalogEntry> {
    let mut v: Vec<CatalogEntry> = [1.5, 2.0, 3.0, 4.0, 5.0]
        .iter()
        .map(|a| CatalogEntry {
            name: format!("ellipse:{a}"),
            spec: BodySpec::Ellipsoid { semiaxes: vec![*a, 1.0] },
        })
        .collect();
    for q in [2, 4, 8] {
        v.push(CatalogEntry {
            name: format!("square:q{q}"),
            spec: BodySpec::SmoothedCube { q, scales: vec![1.0, 1.0], rounding: 0.1 },
        });
    }
    v
}

pub fn planar_lambda3() -> CriterionResult {
    timed(4, "third eigenvalue at least 1 for planar bodies", || {
        let d = disc(Dim::Two)?;
        let mut pass = true;
        let mut min = f64::INFINITY;
        for e in planar_bodies().into_iter().chain(Catalog::builtin(Dim::Two).entries) {
            let l3 = third_eigenvalue(&make_body(&e, &d)?)?.lambda3;
            pass &= l3 >= 1.0 - 1e-8;
            min = min.min(l3);
        }
        Ok((pass, format!("min λ₃ = {min:.10}")))
    })
}

pub fn inf_j_planar() -> CriterionResult {
    timed(5, "inf J = 1 with minimizer h", || {
        let d = disc(Dim::Two)?;
        let mut pass = true;
        let mut detail = Vec::new();
        for (name, spec) in [
            ("ball", BodySpec::Ball { radius: 1.0 }),
            ("ellipsoid:2,1", BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] }),
        ] {
            let r = inf_j(&spec_body(name, spec, &d)?)?;
            pass &= (r.value - 1.0).abs() < 1e-6 && r.h_angle < 1e-6 && r.el_residual < 1e-7;
            detail.push(format!(
                "{name}: inf J - 1 = {:.1e}, angle to h {:.1e}, EL residual {:.1e}",
                r.value - 1.0,
                r.h_angle,
                r.el_residual
            ));
        }
        Ok((pass, detail.join("; ")))
    })
}

pub fn stable_anchor(cfg: &SuiteConfig) -> CriterionResult {
    timed(6, "stable-condition margin at φ = h vanishes", || {
        let mut pass = true;
        let mut detail = Vec::new();
        for p_star in [0.0, 0.5] {
            let mut w = 0.0f64;
            for dim in cfg.dims() {
                for b in catalog_bodies(dim)? {
                    w = w.max(stable_condition(&b, b.field(), p_star)?.margin.abs());
                }
            }
            pass &= w < 1e-9;
            detail.push(format!("p* = {p_star}: max |margin| = {w:.3e}"));
        }
        Ok((pass, detail.join("; ")))
    })
}

pub fn second_variation_fd(cfg: &SuiteConfig) -> CriterionResult {
    timed(7, "analytic second variation matches finite differences", || {
        let mut rng = cfg.rng(7);
        let (mut rel, mut first) = (0.0f64, 0.0f64);
        for dim in cfg.dims() {
            for b in catalog_bodies(dim)? {
                for _ in 0..cfg.probes {
                    let phi = random_even_field(b.disc(), &mut rng)?;
                    let p = rng.gen_range(0.0..0.9);
                    let lam = rng.gen_range(0.1..0.9);
                    let probe = VariationProbe::new(&b, phi, p, lam)?;
                    let (i1, i2) = second_variation(&probe);
                    let fd = i2_finite_difference(&probe, FD_STEP)?;
                    rel = worst(rel, ((fd - i2) / i2).abs());
                    first = worst(first, i1.abs());
                }
            }
        }
        Ok((
            rel < 1e-4 && first < 1e-10,
            format!("max relative I'' error {rel:.2e}, max |I'(0)| {first:.1e}"),
        ))
    })
}

pub fn inequalities(cfg: &SuiteConfig) -> CriterionResult {
    timed(8, "Brunn-Minkowski verifiers", || {
        let grid = lambda_grid(11);
        // (i)
        let mut bm_pass = true;
        let mut bm_min = f64::INFINITY;
        for dim in cfg.dims() {
            let bodies = catalog_bodies(dim)?;
            for i in 0..bodies.len() {
                for j in i..bodies.len() {
                    let r = verify_bm(&bodies[i], &bodies[j], &grid)?;
                    let ends = [0.0, 1.0]
                        .iter()
                        .all(|l| r.at(*l).is_some_and(|q| q.margin.abs() < EQUALITY_TOL));
                    bm_pass &= r.pass && ends;
                    bm_min = bm_min.min(r.margin);
                }
            }
        }
        // (ii)
        let d = disc(Dim::Two)?;
        let b1 = spec_body("ball:1", BodySpec::Ball { radius: 1.0 }, &d)?;
        let b2 = spec_body("ball:2", BodySpec::Ball { radius: 2.0 }, &d)?;
        let firey = verify_lp_bm(&b1, &b2, 2.0, &[0.5])?;
        let firey_err = (firey.lhs - 2.5 * PI).abs().max((firey.rhs - 2.0 * PI).abs());
        // (iii)
        let mut dil = 0.0f64;
        for dim in cfg.dims() {
            for b in catalog_bodies(dim)? {
                let b2 = b.dilate(2.0)?;
                for p in [0.5, 2.0] {
                    for q in verify_p_bm(&b, &b2, p, &[0.25, 0.5])?.points {
                        dil = worst(dil, q.margin.abs());
                    }
                }
                dil = worst(dil, verify_lp_minkowski(&b, &b2, 0.5)?.margin.abs());
            }
        }
        Ok((
            bm_pass && firey_err < 1e-10 && dil < 1e-8,
            format!(
                "BM worst margin {bm_min:.2e}; Firey |error| {firey_err:.1e}; dilate pairs max |margin| {dil:.1e}"
            ),
        ))
    })
}

fn degree_two_forcing(dim: Dim, d: &Discretization) -> Forcing {
    let mut c = SpectralField::constant(dim, d.band(), 1.0);
    let mode = match dim {
        Dim::Two => Mode::Fourier { k: 2, sine: false },
        Dim::Three => Mode::Harmonic { l: 2, m: 0 },
    };
    c.coefficients[d.basis().index_of(mode).expect("band >= 2")] = 0.1;
    Forcing::Field(c)
}

fn sup_diff(d: &Discretization, a: &SpectralField, b: &SpectralField) -> f64 {
    d.values(&a.axpy(-1.0, b)).iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn solver(cfg: &SuiteConfig) -> CriterionResult {
    timed(9, "Newton and homotopy solver", || {
        let opts = NewtonOptions::default();
        let mut pass = true;
        let mut detail = Vec::new();
        let mut rng = cfg.rng(9);
        for dim in cfg.dims() {
            let t = Instant::now();
            let d = disc(dim)?;
            let band = d.band();
            let one = SpectralField::constant(dim, band, 1.0);
            let f1 = Forcing::constant(dim, band, 1.0);
            let mut const_err = 0.0f64;
            for p in [0.1, 0.5, 0.9] {
                let s = newton_solve(&d, &f1, p, &SpectralField::constant(dim, band, 1.1), opts)?;
                pass &= s.residual_sup < 1e-10;
                const_err = worst(const_err, sup_diff(&d, &s.solution, &one));
            }
            pass &= const_err < 1e-10;

            let (e, tol) = match dim {
                Dim::Two => (spec_body("ellipsoid:2,1", BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] }, &d)?, 1e-8),
                Dim::Three => (make_body(&Catalog::builtin(dim).entries[1], &d)?, 1e-6),
            };
            let fe = Forcing::from_body(&e, 0.5);
            let u0 = e.field().axpy(0.01, &random_even_field(&d, &mut rng)?);
            let s = newton_solve(&d, &fe, 0.5, &u0, opts)?;
            let rt = sup_diff(&d, &s.solution, e.field());
            pass &= rt < tol;

            let trace = homotopy_solve(&d, &degree_two_forcing(dim, &d), 0.5, 0.5, Schedule::default())?;
            let bounded = trace
                .steps
                .iter()
                .all(|s| s.bound_low > 0.0 && s.norm_c2alpha_proxy < Schedule::default().c2_ceiling);
            pass &= trace.converged && bounded && trace.last().residual_sup < 1e-10;

            let base = newton_solve(&d, &f1, 0.5, &one, opts)?;
            let probe = uniqueness_probe(&d, &f1, 0.5, &base, 20, 0.05, opts, &mut rng)?;
            pass &= probe.clusters.len() == 1;

            let secs = t.elapsed().as_secs_f64();
            let limit = if dim == Dim::Two { 5.0 } else { 300.0 };
            pass &= secs < limit;
            detail.push(format!(
                "{}d: u≡1 error {const_err:.1e}, round trip {rt:.1e}, homotopy {} steps to residual {:.1e}, {} cluster(s)",
                dim.ambient(),
                trace.steps.len(),
                trace.last().residual_sup,
                probe.clusters.len()
            ));
        }
        Ok((pass, detail.join("; ")))
    })
}

pub fn equivalence(cfg: &SuiteConfig) -> CriterionResult {
    timed(10, "sampled stable condition agrees with λ₃ >= 1", || {
        let mut rng = cfg.rng(10);
        let mut pass = true;
        let mut min = f64::INFINITY;
        for dim in cfg.dims() {
            for b in catalog_bodies(dim)? {
                let r = equivalence_experiment(&b, 0.0, cfg.trials, &mut rng)?;
                if r.spectral_stable {
                    pass &= r.empirical_stable;
                }
                pass &= r.consistent;
                min = min.min(r.min_margin);
            }
        }
        Ok((pass, format!("min sampled margin {min:.3e}")))
    })
}

pub fn eigen_bound(cfg: &SuiteConfig) -> CriterionResult {
    timed(11, "eigenvalue inequality for even fields", || {
        let mut rng = cfg.rng(11);
        let (mut min, mut eq) = (f64::INFINITY, 0.0f64);
        for dim in cfg.dims() {
            for b in catalog_bodies(dim)? {
                let ctx = EigenBound::new(&b)?;
                for _ in 0..cfg.trials {
                    let phi = random_even_field(b.disc(), &mut rng)?;
                    min = min.min(ctx.check(&b, &phi)?.margin);
                }
                let pencil = assemble_pencil(&b, Subspace::Even)?;
                let (_, vecs) = generalized_eigen(&pencil.a, &pencil.b)?;
                let phi3 = SpectralField::from_coefficients(
                    dim,
                    b.disc().band(),
                    pencil.extend(&vecs.column(1).into_owned(), b.disc().basis().len()),
                )?;
                eq = worst(eq, ctx.check(&b, &phi3)?.margin.abs());
                eq = worst(eq, ctx.check(&b, b.field())?.margin.abs());
            }
        }
        Ok((
            min >= -1e-9 && eq < 1e-8,
            format!("min margin {min:.3e}, equality cases max |margin| {eq:.1e}"),
        ))
    })
}

/// Runs every criterion of the named suite in order.
pub fn run_suite(name: SuiteName, seed: u64) -> Vec<CriterionResult> {
    let cfg = SuiteConfig::new(name, seed);
    let mut out = vec![ball_spectrum(Dim::Two)];
    if cfg.three_d {
        out.push(ball_spectrum(Dim::Three));
    }
    out.push(structure_all(&cfg));
    out.push(planar_lambda3());
    out.push(inf_j_planar());
    out.push(stable_anchor(&cfg));
    out.push(second_variation_fd(&cfg));
    out.push(inequalities(&cfg));
    out.push(solver(&cfg));
    out.push(equivalence(&cfg));
    out.push(eigen_bound(&cfg));
    out
}
