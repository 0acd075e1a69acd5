//! Newton and homotopy solvers for the even `L_p` Minkowski problem
//! `det(∇²u + uI) = f u^{p-1}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::body::{BodyRep, EPS_CONV};
use crate::error::{Error, Result};
use crate::spectrum::{generalized_eigen, stiffness, weighted_mass};
use crate::sphere::{tangent_det, tangent_identity, Dim, Discretization, SpectralField};
use crate::stability::random_even_field;

/// Right-hand side data `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Forcing {
    /// Spectral coefficients of `f`.
    Field(SpectralField),
    /// `f = h^{1-p} det(∇²h + hI)`, so that `u = h` solves the problem.
    FromBody { body: SpectralField, p: f64 },
}

impl Forcing {
    pub fn constant(dim: Dim, band: usize, c: f64) -> Self {
        Forcing::Field(SpectralField::constant(dim, band, c))
    }

    pub fn from_body(k: &BodyRep, p: f64) -> Self {
        Forcing::FromBody {
            body: k.field().clone(),
            p,
        }
    }

    fn field(&self) -> &SpectralField {
        match self {
            Forcing::Field(f) => f,
            Forcing::FromBody { body, .. } => body,
        }
    }

    /// Node values of `f` on `disc` (any discretization of the same dimension).
    pub fn values(&self, disc: &Discretization) -> Vec<f64> {
        let field = self.field().with_band(disc.band());
        match self {
            Forcing::Field(_) => disc.values(&field),
            Forcing::FromBody { p, .. } => {
                let n = disc.dim().sphere();
                let id = tangent_identity(n);
                disc.synthesize(&field)
                    .iter()
                    .map(|j| j.value.powf(1.0 - p) * tangent_det(&(j.hessian + id * j.value), n))
                    .collect()
            }
        }
    }

    pub fn dim(&self) -> Dim {
        self.field().dim
    }
}

fn check_positive(u: &[f64]) -> Result<()> {
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        Ok(())
    } else {
        Err(Error::PositivityViolation { min })
    }
}

/// `det(∇²u + uI) - f u^{p-1}` at every node for node values `f`.
pub fn residual_with(disc: &Discretization, u: &SpectralField, f: &[f64], p: f64) -> Result<Vec<f64>> {
    let jets = disc.synthesize(u);
    check_positive(&jets.iter().map(|j| j.value).collect::<Vec<_>>())?;
    let n = disc.dim().sphere();
    let id = tangent_identity(n);
    Ok(jets
        .iter()
        .zip(f)
        .map(|(j, fv)| tangent_det(&(j.hessian + id * j.value), n) - fv * j.value.powf(p - 1.0))
        .collect())
}

pub fn residual(disc: &Discretization, u: &SpectralField, f: &Forcing, p: f64) -> Result<Vec<f64>> {
    residual_with(disc, u, &f.values(disc), p)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Sup-norm residual recomputed on a grid of twice the default resolution.
pub fn fine_grid_residual(disc: &Discretization, u: &SpectralField, f: &Forcing, p: f64) -> Result<f64> {
    let res = Discretization::default_resolution(disc.dim(), disc.band());
    let fine = Discretization::with_resolution(disc.dim(), disc.band(), 2 * res)?;
    Ok(sup(&residual(&fine, u, f, p)?))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iters: 50,
            max_backtracks: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub solution: SpectralField,
    pub residual_sup: f64,
    pub iterations: usize,
    pub distinct_solutions: Vec<SpectralField>,
}

/// Admissible iterate: positive and strictly convex.
fn admissible(disc: &Arc<Discretization>, u: &SpectralField) -> bool {
    BodyRep::from_field(disc, u.clone(), "iterate")
        .map(|b| b.convexity_margin() > EPS_CONV)
        .unwrap_or(false)
}

/// Damped Newton on the even coefficients with nodal values `f`.
pub fn newton_with(
    disc: &Arc<Discretization>,
    f: &[f64],
    p: f64,
    u0: &SpectralField,
    opts: NewtonOptions,
) -> Result<SolveResult> {
    if !u0.even {
        return Err(Error::NotSymmetric {
            odd: u0.odd_magnitude(disc.basis()),
        });
    }
    let even = disc.basis().even_indices();
    let tables = disc.tables().select(&even);
    let w = disc.grid().weights();
    let mut u = u0.clone();
    let mut r = residual_with(disc, &u, f, p)?;
    let mut rs = sup(&r);
    let mut iterations = 0;
    while rs >= opts.tol {
        if iterations == opts.max_iters {
            return Err(Error::NewtonDivergence { iterations, residual: rs });
        }
        iterations += 1;
        let body = BodyRep::from_field(disc, u.clone(), "iterate")?;
        let uvals = body.support_values();
        let weight: Vec<f64> = uvals.iter().zip(f).map(|(uv, fv)| (p - 1.0) * fv * uv.powf(p - 2.0)).collect();
        let jac: DMatrix<f64> = -(stiffness(&body, &tables) + weighted_mass(&tables, w, &weight));
        let wr: Vec<f64> = r.iter().zip(w).map(|(a, b)| a * b).collect();
        let g = tables.value.tr_mul(&DVector::from_vec(wr));
        let step = jac.lu().solve(&(-g)).ok_or(Error::JacobianSingular)?;
        if step.iter().any(|x| !x.is_finite()) {
            return Err(Error::JacobianSingular);
        }
        let mut full = vec![0.0; disc.basis().len()];
        for (&i, s) in even.iter().zip(step.iter()) {
            full[i] = *s;
        }
        let dir = SpectralField::from_coefficients(disc.dim(), disc.band(), full)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let trial = u.axpy(alpha, &dir);
            if admissible(disc, &trial) {
                if let Ok(rt) = residual_with(disc, &trial, f, p) {
                    let st = sup(&rt);
                    if st < rs {
                        u = trial;
                        r = rt;
                        rs = st;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDivergence { iterations, residual: rs });
        }
    }
    Ok(SolveResult {
        solution: u,
        residual_sup: rs,
        iterations,
        distinct_solutions: Vec::new(),
    })
}

pub fn newton_solve(
    disc: &Arc<Discretization>,
    f: &Forcing,
    p: f64,
    u0: &SpectralField,
    opts: NewtonOptions,
) -> Result<SolveResult> {
    newton_with(disc, &f.values(disc), p, u0, opts)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Schedule {
    pub initial_step: f64,
    pub min_step: f64,
    /// Ceiling on `sup|u| + max |∇²u|` along the path.
    pub c2_ceiling: f64,
    pub newton: NewtonOptions,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            initial_step: 0.1,
            min_step: 1e-4,
            c2_ceiling: 1e6,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomotopyStep {
    pub t: f64,
    pub p_t: f64,
    pub solution: SpectralField,
    pub newton_iters: usize,
    pub residual_sup: f64,
    pub bound_low: f64,
    pub bound_high: f64,
    #[serde(rename = "norm_C2alpha_proxy")]
    pub norm_c2alpha_proxy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomotopyTrace {
    pub steps: Vec<HomotopyStep>,
    pub converged: bool,
    pub p_star: f64,
    pub f: Forcing,
    /// `(t, step)` where continuation stopped, if it did.
    pub stall: Option<(f64, f64)>,
}

impl HomotopyTrace {
    pub fn last(&self) -> &HomotopyStep {
        self.steps.last().expect("trace starts with t = 0")
    }

    /// The final solution, or `ContinuationStall` for a partial trace.
    pub fn solution(&self) -> Result<&SpectralField> {
        match self.stall {
            Some((t, step)) => Err(Error::ContinuationStall { t, step }),
            None => Ok(&self.last().solution),
        }
    }
}

fn monitor(disc: &Discretization, u: &SpectralField) -> (f64, f64, f64) {
    let jets = disc.synthesize(u);
    let lo = jets.iter().map(|j| j.value).fold(f64::INFINITY, f64::min);
    let hi = jets.iter().map(|j| j.value).fold(f64::NEG_INFINITY, f64::max);
    let hess = jets.iter().map(|j| j.hessian.norm()).fold(0.0, f64::max);
    let supu = jets.iter().map(|j| j.value.abs()).fold(0.0, f64::max);
    (lo, hi, supu + hess)
}

/// Continuation along `f_t = t f + 1 - t`, `p_t = t p + (1 - t) p*` from `u ≡ 1`.
pub fn homotopy_solve(
    disc: &Arc<Discretization>,
    f: &Forcing,
    p: f64,
    p_star: f64,
    schedule: Schedule,
) -> Result<HomotopyTrace> {
    if !(p_star > 0.0 && p_star < 1.0) {
        return Err(Error::InvalidParameter(format!("p* = {p_star} outside (0, 1)")));
    }
    let fvals = f.values(disc);
    check_positive(&fvals)?;
    let ft = |t: f64| -> Vec<f64> { fvals.iter().map(|v| t * v + 1.0 - t).collect() };
    let pt = |t: f64| t * p + (1.0 - t) * p_star;

    let mut u = SpectralField::constant(disc.dim(), disc.band(), 1.0);
    let start = newton_with(disc, &ft(0.0), pt(0.0), &u, schedule.newton)?;
    let (lo, hi, c2) = monitor(disc, &start.solution);
    let mut steps = vec![HomotopyStep {
        t: 0.0,
        p_t: pt(0.0),
        solution: start.solution.clone(),
        newton_iters: start.iterations,
        residual_sup: start.residual_sup,
        bound_low: lo,
        bound_high: hi,
        norm_c2alpha_proxy: c2,
    }];
    u = start.solution;
    let mut t = 0.0;
    let mut dt = schedule.initial_step;
    let mut streak = 0;
    let mut stall = None;
    while t < 1.0 {
        let next = (t + dt).min(1.0);
        match newton_with(disc, &ft(next), pt(next), &u, schedule.newton) {
            Ok(sol) => {
                let (lo, hi, c2) = monitor(disc, &sol.solution);
                if lo <= 0.0 || c2 > schedule.c2_ceiling {
                    stall = Some((next, dt));
                    break;
                }
                t = next;
                u = sol.solution;
                steps.push(HomotopyStep {
                    t,
                    p_t: pt(t),
                    solution: u.clone(),
                    newton_iters: sol.iterations,
                    residual_sup: sol.residual_sup,
                    bound_low: lo,
                    bound_high: hi,
                    norm_c2alpha_proxy: c2,
                });
                streak += 1;
                if streak >= 2 {
                    dt *= 2.0;
                    streak = 0;
                }
            }
            Err(_) => {
                streak = 0;
                dt *= 0.5;
                if dt < schedule.min_step {
                    stall = Some((t, dt));
                    break;
                }
            }
        }
    }
    Ok(HomotopyTrace {
        converged: stall.is_none(),
        steps,
        p_star,
        f: f.clone(),
        stall,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearizedCheck {
    pub p_star: f64,
    /// Multipliers on the even subspace, largest first.
    pub multipliers: Vec<f64>,
    pub smallest_magnitude: f64,
}

/// Spectrum of `δu ↦ Δδu + (n + 1 - p*)δu` on the even subspace.
pub fn linearized_check_at_one(dim: Dim, band: usize, p_star: f64) -> Result<LinearizedCheck> {
    if !(p_star > 0.0 && p_star < 1.0) {
        return Err(Error::InvalidParameter(format!("p* = {p_star} outside (0, 1)")));
    }
    let disc = Discretization::shared(dim, band)?;
    let even = disc.basis().even_indices();
    let tables = disc.tables().select(&even);
    let w = disc.grid().weights();
    let ones = vec![1.0; w.len()];
    let mass = weighted_mass(&tables, w, &ones);
    let mut grad = DMatrix::zeros(even.len(), even.len());
    for g in &tables.gradient {
        grad += weighted_mass_of(g, w);
    }
    let c = (dim.sphere() + 1) as f64 - p_star;
    let op = grad - &mass * c;
    let (vals, _) = generalized_eigen(&op, &mass)?;
    let multipliers: Vec<f64> = vals.iter().map(|v| -v).collect();
    let smallest_magnitude = multipliers.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    Ok(LinearizedCheck {
        p_star,
        multipliers,
        smallest_magnitude,
    })
}

fn weighted_mass_of(g: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut s = g.clone();
    for (i, mut row) in s.row_iter_mut().enumerate() {
        row *= w[i];
    }
    g.transpose() * s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeResult {
    pub clusters: Vec<SpectralField>,
    pub converged: usize,
    pub failed: usize,
}

/// Sup-norm clustering radius.
pub const CLUSTER_TOL: f64 = 1e-6;

/// Newton from `trials` perturbed copies of `base`; converged solutions are
/// clustered by node sup-distance.
pub fn uniqueness_probe<R: Rng>(
    disc: &Arc<Discretization>,
    f: &Forcing,
    p: f64,
    base: &SolveResult,
    trials: usize,
    noise: f64,
    opts: NewtonOptions,
    rng: &mut R,
) -> Result<ProbeResult> {
    let fvals = f.values(disc);
    let mut clusters: Vec<(SpectralField, Vec<f64>)> = Vec::new();
    let (mut converged, mut failed) = (0, 0);
    for _ in 0..trials {
        let start = if noise == 0.0 {
            base.solution.clone()
        } else {
            base.solution.axpy(noise, &random_even_field(disc, rng)?)
        };
        match newton_with(disc, &fvals, p, &start, opts) {
            Ok(sol) => {
                converged += 1;
                let vals = disc.values(&sol.solution);
                let known = clusters.iter().any(|(_, c)| {
                    c.iter().zip(&vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < CLUSTER_TOL
                });
                if !known {
                    clusters.push((sol.solution, vals));
                }
            }
            Err(_) => failed += 1,
        }
    }
    Ok(ProbeResult {
        clusters: clusters.into_iter().map(|(f, _)| f).collect(),
        converged,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{make_body, BodySpec, CatalogEntry};
    use crate::sphere::Mode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d2() -> Arc<Discretization> {
        Discretization::shared(Dim::Two, 64).unwrap()
    }

    fn ellipse() -> BodyRep {
        make_body(
            &CatalogEntry { name: "e".into(), spec: BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] } },
            &d2(),
        )
        .unwrap()
    }

    #[test]
    fn residual_examples() {
        let d = d2();
        let one = SpectralField::constant(Dim::Two, 64, 1.0);
        let f1 = Forcing::constant(Dim::Two, 64, 1.0);
        assert!(sup(&residual(&d, &one, &f1, 0.3).unwrap()) < 1e-14);
        let two = SpectralField::constant(Dim::Two, 64, 2.0);
        let r = residual(&d, &two, &f1, 0.5).unwrap();
        assert!(r.iter().all(|x| (x - (2.0 - 0.5f64.sqrt())).abs() < 1e-12));
        let e = ellipse();
        let r = residual(&d, e.field(), &Forcing::from_body(&e, 0.5), 0.5).unwrap();
        assert!(sup(&r) < 1e-12);
        let neg = SpectralField::constant(Dim::Two, 64, -1.0);
        assert!(matches!(residual(&d, &neg, &f1, 0.5), Err(Error::PositivityViolation { .. })));
    }

    #[test]
    fn newton_constant_data() {
        let d = d2();
        let f1 = Forcing::constant(Dim::Two, 64, 1.0);
        let u0 = SpectralField::constant(Dim::Two, 64, 1.1);
        let s = newton_solve(&d, &f1, 0.5, &u0, NewtonOptions::default()).unwrap();
        assert!(s.residual_sup < 1e-10);
        let one = SpectralField::constant(Dim::Two, 64, 1.0);
        let err = s.solution.coefficients.iter().zip(&one.coefficients).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        let s = newton_solve(&d, &f1, 0.9, &one, NewtonOptions::default()).unwrap();
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn ellipse_round_trip() {
        let d = d2();
        let e = ellipse();
        let f = Forcing::from_body(&e, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u0 = e.field().axpy(0.01, &random_even_field(&d, &mut rng).unwrap());
        let s = newton_solve(&d, &f, 0.5, &u0, NewtonOptions::default()).unwrap();
        let err = sup(&d.values(&s.solution.axpy(-1.0, e.field())));
        assert!(err < 1e-8, "{err}");
        assert!(fine_grid_residual(&d, &s.solution, &f, 0.5).unwrap() < 1e-9);
    }

    #[test]
    fn homotopy_with_degree_two_data() {
        let d = d2();
        let mut c = SpectralField::constant(Dim::Two, 64, 1.0);
        c.coefficients[d.basis().index_of(Mode::Fourier { k: 2, sine: false }).unwrap()] = 0.1;
        let f = Forcing::Field(c);
        let trace = homotopy_solve(&d, &f, 0.5, 0.5, Schedule::default()).unwrap();
        assert!(trace.converged);
        assert!(trace.steps.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(trace.last().t, 1.0);
        assert!(trace.steps.iter().all(|s| s.residual_sup < 1e-10 && s.bound_low > 0.0));
        let u = trace.solution().unwrap();
        // f' = det W · u^{1-p} reproduces f
        let back = residual(&d, u, &f, 0.5).unwrap();
        assert!(sup(&back) < 1e-9);
        let again = newton_solve(&d, &f, 0.5, u, NewtonOptions::default()).unwrap();
        assert_eq!(again.iterations, 0);
        let flat = homotopy_solve(&d, &Forcing::constant(Dim::Two, 64, 1.0), 0.5, 0.5, Schedule::default()).unwrap();
        assert!(flat.steps.iter().all(|s| s.newton_iters == 0));
    }

    #[test]
    fn linearization_multipliers() {
        let r = linearized_check_at_one(Dim::Two, 16, 0.5).unwrap();
        assert!((r.multipliers[0] - 1.5).abs() < 1e-12);
        assert!((r.multipliers[1] + 2.5).abs() < 1e-12);
        assert!((r.multipliers[3] + 14.5).abs() < 1e-12);
        assert!((r.smallest_magnitude - 1.5).abs() < 1e-12);
        let r = linearized_check_at_one(Dim::Three, 8, 0.5).unwrap();
        assert!((r.multipliers[0] - 2.5).abs() < 1e-12);
        assert!((r.multipliers[1] + 3.5).abs() < 1e-12);
        assert!((r.smallest_magnitude - 2.5).abs() < 1e-12);
    }

    #[test]
    fn uniqueness_for_constant_data() {
        let d = d2();
        let f1 = Forcing::constant(Dim::Two, 64, 1.0);
        let one = SpectralField::constant(Dim::Two, 64, 1.0);
        let base = newton_solve(&d, &f1, 0.5, &one, NewtonOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = uniqueness_probe(&d, &f1, 0.5, &base, 20, 0.05, NewtonOptions::default(), &mut rng).unwrap();
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.converged, 20);
        let r = uniqueness_probe(&d, &f1, 0.5, &base, 3, 0.0, NewtonOptions::default(), &mut rng).unwrap();
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0], base.solution);
    }
}
