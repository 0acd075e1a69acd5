//! Second variation of the `L_p` Brunn-Minkowski functional, the `p*`-stable
//! condition, the `J` functional and related checks.

use std::path::Path;

use nalgebra::{DVector, Matrix2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::body::{BodyRep, EPS_CONV};
use crate::error::{Error, Result};
use crate::measure::mixed_integral;
use crate::spectrum::{assemble_pencil, generalized_eigen, third_eigenvalue, Pencil, Subspace};
use crate::sphere::{tangent_det, tangent_identity, tangent_min_eigenvalue, Discretization, Jet, SpectralField};

/// Default finite-difference stencil.
pub const FD_STEP: f64 = 1e-3;
/// Stable-condition margins at or above `-MARGIN_TOL` pass.
pub const MARGIN_TOL: f64 = 1e-9;

/// Weighted power combination `(α a^p + β b^p)^{1/p}` and its partial
/// derivatives `(M, M_a, M_b, M_aa, M_ab, M_bb)`; for `p = 0` the weighted
/// geometric mean `a^α b^β`.
fn power_combination(a: f64, b: f64, alpha: f64, beta: f64, p: f64) -> [f64; 6] {
    if p == 0.0 {
        let m = a.powf(alpha) * b.powf(beta);
        return [
            m,
            alpha * m / a,
            beta * m / b,
            alpha * (alpha - 1.0) * m / (a * a),
            alpha * beta * m / (a * b),
            beta * (beta - 1.0) * m / (b * b),
        ];
    }
    // s = α a^p + β b^p is near 1 for small p; carry ln s to keep s^{1/p} accurate.
    let (la, lb) = (a.ln(), b.ln());
    let ln_s = if (alpha + beta - 1.0).abs() < 1e-15 {
        (alpha * (p * la).exp_m1() + beta * (p * lb).exp_m1()).ln_1p()
    } else {
        (alpha * (p * la).exp() + beta * (p * lb).exp()).ln()
    };
    let m = (ln_s / p).exp();
    let s1 = ((1.0 - p) / p * ln_s).exp();
    let s2 = ((1.0 - 2.0 * p) / p * ln_s).exp();
    let (ap, bp) = (a.powf(p - 1.0), b.powf(p - 1.0));
    [
        m,
        alpha * ap * s1,
        beta * bp * s1,
        alpha * (p - 1.0) * a.powf(p - 2.0) * s1 + alpha * alpha * (1.0 - p) * ap * ap * s2,
        alpha * beta * (1.0 - p) * ap * bp * s2,
        beta * (p - 1.0) * b.powf(p - 2.0) * s1 + beta * beta * (1.0 - p) * bp * bp * s2,
    ]
}

/// Jets of `M(a, b)` by the chain rule.
fn compose(a: &[Jet], b: &[Jet], f: impl Fn(f64, f64) -> [f64; 6]) -> Vec<Jet> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let [m, ma, mb, maa, mab, mbb] = f(x.value, y.value);
            let (gx, gy) = (x.gradient, y.gradient);
            let outer = |u: &nalgebra::Vector2<f64>, v: &nalgebra::Vector2<f64>| u * v.transpose();
            Jet {
                value: m,
                gradient: gx * ma + gy * mb,
                hessian: x.hessian * ma
                    + y.hessian * mb
                    + outer(&gx, &gx) * maa
                    + (outer(&gx, &gy) + outer(&gy, &gx)) * mab
                    + outer(&gy, &gy) * mbb,
            }
        })
        .collect()
}

/// `∫ h det(∇²h + hI)` from node jets, after checking `h > 0` and `W ≻ εconv`.
fn jet_mixed_integral(disc: &Discretization, jets: &[Jet]) -> Result<f64> {
    let n = disc.dim().sphere();
    let id = tangent_identity(n);
    let mut vals = Vec::with_capacity(jets.len());
    let mut margin = f64::INFINITY;
    for j in jets {
        if j.value <= 0.0 {
            return Err(Error::PositivityViolation { min: j.value });
        }
        let w = j.hessian + id * j.value;
        margin = margin.min(tangent_min_eigenvalue(&w, n));
        vals.push(j.value * tangent_det(&w, n));
    }
    if margin <= EPS_CONV {
        return Err(Error::ConvexityViolation {
            margin,
            threshold: EPS_CONV,
        });
    }
    disc.integrate(&vals)
}

/// Integrals of `K` paired with a perturbation `φ`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Moments {
    /// `∫ h det W`.
    pub f: f64,
    /// `∫ det W φ`.
    pub m: f64,
    /// `∫ h⁻¹ det W φ²`.
    pub b: f64,
    /// `∫ U^{ij}(φ_{;ij} + φδ_ij) φ`.
    pub q: f64,
}

/// Nodal evaluation of `∫ U^{ij}(φ_{;ij} + φδ_ij) ψ`.
fn cofactor_form(k: &BodyRep, phi: &[Jet], psi: &[Jet]) -> f64 {
    let n = k.dim().sphere();
    let id = tangent_identity(n);
    let vals: Vec<f64> = k
        .cofactor()
        .iter()
        .zip(phi)
        .zip(psi)
        .map(|((u, a), b)| {
            let w: Matrix2<f64> = a.hessian + id * a.value;
            u.component_mul(&w).sum() * b.value
        })
        .collect();
    k.disc().integrate(&vals).expect("node count matches")
}

fn check_field(k: &BodyRep, phi: &SpectralField) -> Result<()> {
    if phi.dim != k.dim() || phi.band != k.disc().band() {
        return Err(Error::ShapeMismatch {
            expected: k.disc().basis().len(),
            got: phi.len(),
        });
    }
    if !phi.even {
        return Err(Error::NotSymmetric {
            odd: phi.odd_magnitude(k.disc().basis()),
        });
    }
    if phi.coefficients.iter().all(|c| *c == 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(())
}

pub fn moments(k: &BodyRep, phi: &SpectralField) -> Result<Moments> {
    check_field(k, phi)?;
    let jets = k.disc().synthesize(phi);
    let disc = k.disc();
    let m: Vec<f64> = k.det_w().iter().zip(&jets).map(|(d, j)| d * j.value).collect();
    let b: Vec<f64> = k
        .det_w()
        .iter()
        .zip(k.jets())
        .zip(&jets)
        .map(|((d, h), j)| d / h.value * j.value * j.value)
        .collect();
    Ok(Moments {
        f: mixed_integral(k),
        m: disc.integrate(&m)?,
        b: disc.integrate(&b)?,
        q: cofactor_form(k, &jets, &jets),
    })
}

/// `h_K + εφ` for admissible `|ε| <= eps_max`, inside an `L_p` combination.
#[derive(Clone, Debug)]
pub struct VariationProbe {
    pub k: BodyRep,
    pub phi: SpectralField,
    pub p: f64,
    pub lambda: f64,
    pub eps_max: f64,
}

fn perturbation_valid(k: &BodyRep, phi: &SpectralField, eps: f64) -> bool {
    [eps, -eps]
        .iter()
        .all(|e| BodyRep::from_field(k.disc(), k.field().axpy(*e, phi), "probe").is_ok())
}

/// Largest `ε` (to relative precision 1e-8, capped at 1e6) such that `h ± εφ`
/// are both valid support functions.
pub fn eps_max(k: &BodyRep, phi: &SpectralField) -> f64 {
    let mut hi = 1.0;
    while perturbation_valid(k, phi, hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return 1e6;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-8 * hi {
        let mid = 0.5 * (lo + hi);
        if perturbation_valid(k, phi, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

impl VariationProbe {
    pub fn new(k: &BodyRep, phi: SpectralField, p: f64, lambda: f64) -> Result<Self> {
        check_field(k, &phi)?;
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p = {p} outside [0, 1)")));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
        }
        let eps_max = eps_max(k, &phi);
        Ok(VariationProbe {
            k: k.clone(),
            phi,
            p,
            lambda,
            eps_max,
        })
    }

    pub fn moments(&self) -> Moments {
        moments(&self.k, &self.phi).expect("validated at construction")
    }
}

/// `I(ε) = (∫ h_λ det W_λ) (∫ h_L det W_L)^{-λ}` with `h_L = h_K + εφ`.
pub fn i_functional(probe: &VariationProbe, eps: f64) -> Result<f64> {
    if eps.abs() > probe.eps_max {
        return Err(Error::InvalidParameter(format!(
            "|ε| = {} exceeds eps_max = {}",
            eps.abs(),
            probe.eps_max
        )));
    }
    let k = &probe.k;
    let disc = k.disc();
    let hl = disc.synthesize(&k.field().axpy(eps, &probe.phi));
    let lam = probe.lambda;
    let hlam = compose(k.jets(), &hl, |a, b| power_combination(a, b, 1.0 - lam, lam, probe.p));
    let num = jet_mixed_integral(disc, &hlam)?;
    let den = jet_mixed_integral(disc, &hl)?;
    Ok(num * den.powf(-lam))
}

/// Analytic `(I'(0), I''(0))`.
pub fn second_variation(probe: &VariationProbe) -> (f64, f64) {
    let mo = probe.moments();
    let n1 = (probe.k.dim().sphere() + 1) as f64;
    let lam = probe.lambda;
    let fl = mo.f.powf(-lam);
    let i1 = n1 * lam * mo.m * fl - n1 * lam * fl * mo.m;
    let c = lam * (1.0 - lam);
    let i2 = n1 * n1 * c * mo.f.powf(-lam - 1.0) * mo.m * mo.m
        - n1 * c * (1.0 - probe.p) * fl * mo.b
        - n1 * c * fl * mo.q;
    (i1, i2)
}

/// Central second difference of `I` with step `h`.
pub fn i2_finite_difference(probe: &VariationProbe, h: f64) -> Result<f64> {
    let (ip, i0, im) = (
        i_functional(probe, h)?,
        i_functional(probe, 0.0)?,
        i_functional(probe, -h)?,
    );
    Ok((ip - 2.0 * i0 + im) / (h * h))
}

/// Central first difference of `I` with step `h`.
pub fn i1_finite_difference(probe: &VariationProbe, h: f64) -> Result<f64> {
    Ok((i_functional(probe, h)? - i_functional(probe, -h)?) / (2.0 * h))
}

/// Both sides of the `p*`-stable condition for one `φ`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StableCondition {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// `(n+1) m² / F` against `(1 - p*) ∫ h⁻¹ det W φ² + ∫ U^{ij}(φ_{;ij} + φδ_ij) φ`.
pub fn stable_condition(k: &BodyRep, phi: &SpectralField, p_star: f64) -> Result<StableCondition> {
    if !(0.0..1.0).contains(&p_star) {
        return Err(Error::InvalidParameter(format!("p* = {p_star} outside [0, 1)")));
    }
    Ok(stable_from_moments(&moments(k, phi)?, k.dim().sphere(), p_star))
}

fn stable_from_moments(mo: &Moments, n: usize, p_star: f64) -> StableCondition {
    let lhs = (n + 1) as f64 * mo.m * mo.m / mo.f;
    let rhs = (1.0 - p_star) * mo.b + mo.q;
    StableCondition {
        lhs,
        rhs,
        margin: lhs - rhs,
    }
}

/// `J` at `φ / sqrt(∫ h⁻¹ det W φ²)`; also returns the normalizing factor.
pub fn j_functional(k: &BodyRep, phi: &SpectralField) -> Result<(f64, f64)> {
    let mo = moments(k, phi)?;
    if mo.b <= 0.0 {
        return Err(Error::ZeroField);
    }
    let s = mo.b.sqrt().recip();
    let n1 = (k.dim().sphere() + 1) as f64;
    Ok((-mo.q * s * s + n1 * (mo.m * s).powi(2) / mo.f, s))
}

/// Minimizer of `J` over even fields.
#[derive(Clone, Debug)]
pub struct InfJ {
    pub value: f64,
    pub minimizer: SpectralField,
    /// Sup of the nodal residual of the Euler-Lagrange equation relative to
    /// the sup of its right-hand side.
    pub el_residual: f64,
    /// Sine of the `B`-angle between the minimizer and `h_K`.
    pub h_angle: f64,
}

/// Smallest eigenpair of the even pencil `(A + (n+1)/F m mᵀ, B)`.
pub fn inf_j(k: &BodyRep) -> Result<InfJ> {
    let pencil = assemble_pencil(k, Subspace::Even)?;
    let n1 = (k.dim().sphere() + 1) as f64;
    let f = mixed_integral(k);
    let h = pencil.restrict(&k.field().coefficients);
    let mvec = &pencil.b * &h;
    let a = &pencil.a + &mvec * mvec.transpose() * (n1 / f);
    let (values, vectors) = generalized_eigen(&a, &pencil.b)?;
    let mut v: DVector<f64> = vectors.column(0).into_owned();
    if v.dot(&mvec) < 0.0 {
        v = -v;
    }
    let value = values[0];
    let basis_len = k.disc().basis().len();
    let minimizer = SpectralField::from_coefficients(k.dim(), k.disc().band(), pencil.extend(&v, basis_len))?;

    // nodal Euler-Lagrange residual
    let jets = k.disc().synthesize(&minimizer);
    let m_phi = mvec.dot(&v);
    let lambda1 = n1 * m_phi / f;
    let n = k.dim().sphere();
    let id = tangent_identity(n);
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for (((u, d), hj), pj) in k.cofactor().iter().zip(k.det_w()).zip(k.jets()).zip(&jets) {
        let w = pj.hessian + id * pj.value;
        let lhs = -u.component_mul(&w).sum() + lambda1 * d;
        let rhs = value * d / hj.value * pj.value;
        res = res.max((lhs - rhs).abs());
        scale = scale.max(rhs.abs());
    }
    let bh = &pencil.b * &h;
    let cos = v.dot(&bh) / (h.dot(&bh).sqrt() * v.dot(&(&pencil.b * &v)).sqrt());
    Ok(InfJ {
        value,
        minimizer,
        el_residual: res / scale,
        h_angle: (1.0 - cos * cos).max(0.0).sqrt(),
    })
}

/// The two sides of the eigenvalue inequality for even `φ` and the equality test.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EigenBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative when `λ₃` is the third eigenvalue.
    pub margin: f64,
    pub lambda3: f64,
    /// `B`-norm of `φ - (m/F) h` relative to that of `φ`.
    pub residual_norm: f64,
    /// Relative eigen-residual of `φ - (m/F) h` at `λ₃`.
    pub eigen_residual: f64,
}

/// Uses the `λ₃` of the spectrum module.
pub fn eigen_bound_check(k: &BodyRep, phi: &SpectralField) -> Result<EigenBoundCheck> {
    EigenBound::new(k)?.check(k, phi)
}

/// `λ₃` and the even pencil of one body, reused across many `φ`.
#[derive(Clone, Debug)]
pub struct EigenBound {
    pub lambda3: f64,
    pencil: Pencil,
    h: DVector<f64>,
}

impl EigenBound {
    pub fn new(k: &BodyRep) -> Result<Self> {
        Self::with_lambda3(k, third_eigenvalue(k)?.lambda3)
    }

    pub fn with_lambda3(k: &BodyRep, lambda3: f64) -> Result<Self> {
        let pencil = assemble_pencil(k, Subspace::Even)?;
        let h = pencil.restrict(&k.field().coefficients);
        Ok(EigenBound { lambda3, pencil, h })
    }

    pub fn check(&self, k: &BodyRep, phi: &SpectralField) -> Result<EigenBoundCheck> {
        let mo = moments(k, phi)?;
        let n = k.dim().sphere() as f64;
        let l3 = self.lambda3;
        let lhs = mo.q + l3 * mo.b;
        let rhs = (n + l3) * mo.m * mo.m / mo.f;

        let pencil = &self.pencil;
        let x = pencil.restrict(&phi.coefficients);
        let t = &x - &self.h * (mo.m / mo.f);
        let bx = pencil.b_inner(&x, &x).sqrt();
        let bt = &pencil.b * &t;
        let tnorm = t.dot(&bt).max(0.0).sqrt();
        let r = &pencil.a * &t - &bt * l3;
        let eigen_residual = if tnorm > 0.0 { r.amax() / bt.amax().max(f64::MIN_POSITIVE) } else { 0.0 };
        Ok(EigenBoundCheck {
            lhs,
            rhs,
            margin: rhs - lhs,
            lambda3: l3,
            residual_norm: tnorm / bx,
            eigen_residual,
        })
    }
}

/// `V(g_ε)^{p/d}` where `g_ε = (h^p + εφ^p)^{1/p}`. For admissible `ε` the
/// Wulff body of `g_ε` is `g_ε` itself, so the volume is taken from its jets.
fn km_value(k: &BodyRep, phi_jets: &[Jet], p: f64, eps: f64) -> Result<f64> {
    let g = compose(k.jets(), phi_jets, |a, b| power_combination(a, b, 1.0, eps, p));
    let d = k.dim().ambient() as f64;
    let v = jet_mixed_integral(k.disc(), &g)? / d;
    Ok(v.powf(p / d))
}

/// Second difference at `ε = 0` of `ε ↦ V(K +_p ε·φ)^{p/d}` for positive even
/// `φ`, with step `h`.
pub fn km_local_check_with(k: &BodyRep, phi: &SpectralField, p: f64, h: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} outside (0, 1)")));
    }
    check_field(k, phi)?;
    let jets = k.disc().synthesize(phi);
    let min = jets.iter().map(|j| j.value).fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::PositivityViolation { min });
    }
    let f = |e: f64| km_value(k, &jets, p, e);
    Ok((f(h)? - 2.0 * f(0.0)? + f(-h)?) / (h * h))
}

/// [`km_local_check_with`] at the default stencil.
pub fn km_local_check(k: &BodyRep, phi: &SpectralField, p: f64) -> Result<f64> {
    km_local_check_with(k, phi, p, FD_STEP)
}

/// Scales `φ` so that `max |∇²φ + φI|` over the nodes equals 1; then
/// `h ± εφ` stays convex for `ε` below the convexity margin of `h`.
pub fn normalize_perturbation(disc: &Discretization, phi: &SpectralField) -> Result<SpectralField> {
    let n = disc.dim().sphere();
    let id = tangent_identity(n);
    let size = disc
        .synthesize(phi)
        .iter()
        .map(|j| {
            let w = j.hessian + id * j.value;
            if n == 1 {
                w[(0, 0)].abs()
            } else {
                w.symmetric_eigenvalues().amax()
            }
        })
        .fold(0.0, f64::max);
    if size == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(phi.scaled(size.recip()))
}

/// Coefficients uniform on `[-1, 1]` over the even modes of degree
/// `2..=band/2`, normalized by [`normalize_perturbation`].
pub fn random_even_field<R: Rng>(disc: &Discretization, rng: &mut R) -> Result<SpectralField> {
    let basis = disc.basis();
    let top = disc.band() / 2;
    let mut c = vec![0.0; basis.len()];
    for (i, mode) in basis.modes().iter().enumerate() {
        let deg = mode.degree();
        if mode.is_even() && (2..=top).contains(&deg) {
            c[i] = rng.gen_range(-1.0..=1.0);
        }
    }
    let field = SpectralField::from_coefficients(disc.dim(), disc.band(), c)?;
    normalize_perturbation(disc, &field)
}

/// Every quantity attached to one body and perturbation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub body: String,
    pub p_star: f64,
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    #[serde(rename = "I0")]
    pub i0: f64,
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "I2_fd")]
    pub i2_fd: f64,
    #[serde(rename = "J_value")]
    pub j_value: f64,
    #[serde(rename = "inf_J")]
    pub inf_j: f64,
    pub lambda3: f64,
    pub eps_max: f64,
    pub stable: bool,
    pub lambda3_at_least_one: bool,
    pub inf_j_is_one: bool,
}

/// Assembles a [`StabilityReport`]; the variation uses `p = p*`.
pub fn stability_report(k: &BodyRep, phi: &SpectralField, p_star: f64, lambda: f64) -> Result<StabilityReport> {
    let cond = stable_condition(k, phi, p_star)?;
    let probe = VariationProbe::new(k, phi.clone(), p_star, lambda)?;
    let (i1, i2) = second_variation(&probe);
    let h = FD_STEP.min(probe.eps_max / 4.0);
    let i2_fd = i2_finite_difference(&probe, h)?;
    let (j_value, _) = j_functional(k, phi)?;
    let inf = inf_j(k)?;
    let lambda3 = third_eigenvalue(k)?.lambda3;
    Ok(StabilityReport {
        body: k.name().to_string(),
        p_star,
        lambda,
        lhs: cond.lhs,
        rhs: cond.rhs,
        margin: cond.margin,
        i0: i_functional(&probe, 0.0)?,
        i1,
        i2,
        i2_fd,
        j_value,
        inf_j: inf.value,
        lambda3,
        eps_max: probe.eps_max,
        stable: cond.margin >= -MARGIN_TOL,
        lambda3_at_least_one: lambda3 >= 1.0 - 1e-8,
        inf_j_is_one: (inf.value - 1.0).abs() < 1e-6,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Sampled stable-condition margins against the spectral verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub body: String,
    pub p_star: f64,
    pub trials: Vec<Trial>,
    pub min_margin: f64,
    pub lambda3: f64,
    pub empirical_stable: bool,
    pub spectral_stable: bool,
    pub verdicts_agree: bool,
    /// No margin below `-1e-6` coexists with `λ₃ >= 1 + 1e-6`.
    pub consistent: bool,
    /// `J(φ_ε)` along `φ_ε ∝ h + εφ₃` when `λ₃ < 1`.
    pub necessity: Option<Vec<(f64, f64)>>,
}

impl EquivalenceReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for t in &self.trials {
            w.serialize(t)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn equivalence_experiment<R: Rng>(
    k: &BodyRep,
    p_star: f64,
    trials: usize,
    rng: &mut R,
) -> Result<EquivalenceReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let n = k.dim().sphere();
    let f = mixed_integral(k);
    let mut out = Vec::with_capacity(trials);
    for trial in 0..trials {
        let phi = random_even_field(k.disc(), rng)?;
        let mut mo = moments(k, &phi)?;
        mo.f = f;
        let c = stable_from_moments(&mo, n, p_star);
        out.push(Trial {
            trial,
            lhs: c.lhs,
            rhs: c.rhs,
            margin: c.margin,
        });
    }
    let min_margin = out.iter().map(|t| t.margin).fold(f64::INFINITY, f64::min);
    let lambda3 = third_eigenvalue(k)?.lambda3;
    let empirical_stable = min_margin >= -MARGIN_TOL;
    let spectral_stable = lambda3 >= 1.0 - 1e-8;
    let consistent = !(min_margin < -1e-6 && lambda3 >= 1.0 + 1e-6);

    let necessity = if lambda3 < 1.0 {
        let pencil = assemble_pencil(k, Subspace::Even)?;
        let (_, vecs) = generalized_eigen(&pencil.a, &pencil.b)?;
        let phi3 = pencil.extend(&vecs.column(1).into_owned(), k.disc().basis().len());
        let phi3 = SpectralField::from_coefficients(k.dim(), k.disc().band(), phi3)?;
        let h = k.field().scaled(mixed_integral(k).sqrt().recip());
        let mut path = Vec::new();
        for eps in [0.1, 0.01, 0.001] {
            let (j, _) = j_functional(k, &h.axpy(eps, &phi3))?;
            path.push((eps, j));
        }
        Some(path)
    } else {
        None
    };

    Ok(EquivalenceReport {
        body: k.name().to_string(),
        p_star,
        trials: out,
        min_margin,
        lambda3,
        empirical_stable,
        spectral_stable,
        verdicts_agree: empirical_stable == spectral_stable,
        consistent,
        necessity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{make_body, BodySpec, CatalogEntry};
    use crate::sphere::{Dim, Mode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn disc() -> Arc<Discretization> {
        Discretization::shared(Dim::Two, 64).unwrap()
    }

    fn body(spec: BodySpec) -> BodyRep {
        make_body(&CatalogEntry { name: "k".into(), spec }, &disc()).unwrap()
    }

    fn cos2() -> SpectralField {
        let d = disc();
        let mut c = vec![0.0; d.basis().len()];
        c[d.basis().index_of(Mode::Fourier { k: 2, sine: false }).unwrap()] = 1.0;
        SpectralField::from_coefficients(Dim::Two, 64, c).unwrap()
    }

    #[test]
    fn power_combination_derivatives() {
        for p in [0.0, 0.3, 2.0] {
            let (a, b, al, be) = (1.3, 0.7, 0.6, 0.4);
            let d = power_combination(a, b, al, be, p);
            let f = |x: f64, y: f64| power_combination(x, y, al, be, p)[0];
            let e = 1e-5;
            let fa = (f(a + e, b) - f(a - e, b)) / (2.0 * e);
            let fb = (f(a, b + e) - f(a, b - e)) / (2.0 * e);
            let faa = (f(a + e, b) - 2.0 * d[0] + f(a - e, b)) / (e * e);
            let fab = (f(a + e, b + e) - f(a + e, b - e) - f(a - e, b + e) + f(a - e, b - e)) / (4.0 * e * e);
            let fbb = (f(a, b + e) - 2.0 * d[0] + f(a, b - e)) / (e * e);
            for (x, y) in [fa, fb, faa, fab, fbb].iter().zip(&d[1..]) {
                assert!((x - y).abs() < 1e-5, "p = {p}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn disc_cos2_stable_condition() {
        let b = body(BodySpec::Ball { radius: 1.0 });
        let c = stable_condition(&b, &cos2(), 0.0).unwrap();
        assert!(c.lhs.abs() < 1e-12);
        assert!((c.rhs + 2.0 * PI).abs() < 1e-10);
        assert!((c.margin - 2.0 * PI).abs() < 1e-10);
        let c3 = stable_condition(&b, &cos2().scaled(3.0), 0.0).unwrap();
        assert!((c3.margin - 9.0 * c.margin).abs() < 1e-9);
    }

    #[test]
    fn margin_at_h_is_p_star_times_mixed_integral() {
        let e = body(BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] });
        let f = mixed_integral(&e);
        for p_star in [0.0, 0.25, 0.5] {
            let c = stable_condition(&e, e.field(), p_star).unwrap();
            assert!((c.margin - p_star * f).abs() < 1e-9 * f, "{p_star}: {}", c.margin);
        }
    }

    #[test]
    fn i_functional_basics() {
        let b = body(BodySpec::Ball { radius: 1.0 });
        let probe = VariationProbe::new(&b, cos2().scaled(0.1), 0.5, 0.5).unwrap();
        let i0 = i_functional(&probe, 0.0).unwrap();
        assert!((i0 - (2.0 * PI).powf(0.5)).abs() < 1e-12);
        assert!(i_functional(&probe, 0.01).unwrap() >= i0 - 1e-9);
        let flat = VariationProbe::new(&b, cos2().scaled(0.1), 0.5, 0.0).unwrap();
        assert!((i_functional(&flat, 0.05).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!(probe.eps_max > 3.0 && probe.eps_max < 3.4);
    }

    #[test]
    fn second_variation_matches_finite_differences() {
        let b = body(BodySpec::Ball { radius: 1.0 });
        let probe = VariationProbe::new(&b, cos2().scaled(0.1), 0.5, 0.5).unwrap();
        let (i1, i2) = second_variation(&probe);
        assert!(i1.abs() < 1e-10 && i2 > 0.0);
        let fd = i2_finite_difference(&probe, 1e-3).unwrap();
        assert!(((fd - i2) / i2).abs() < 1e-4, "{fd} vs {i2}");
        assert!(i1_finite_difference(&probe, 1e-3).unwrap().abs() < 1e-9);
    }

    #[test]
    fn j_functional_values() {
        let b = body(BodySpec::Ball { radius: 1.0 });
        let (j, _) = j_functional(&b, &cos2()).unwrap();
        assert!((j - 3.0).abs() < 1e-10);
        let (jn, _) = j_functional(&b, &cos2().scaled(-1.0)).unwrap();
        assert_eq!(j, jn);
        let e = body(BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] });
        let (jh, _) = j_functional(&e, e.field()).unwrap();
        assert!((jh - 1.0).abs() < 1e-12);
        assert!(matches!(
            j_functional(&e, &SpectralField::zeros(Dim::Two, 64)),
            Err(Error::ZeroField)
        ));
    }

    #[test]
    fn inf_j_on_disc_and_ellipse() {
        for spec in [BodySpec::Ball { radius: 1.0 }, BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] }] {
            let k = body(spec);
            let r = inf_j(&k).unwrap();
            assert!((r.value - 1.0).abs() < 1e-6);
            assert!(r.el_residual < 1e-7, "{}", r.el_residual);
            assert!(r.h_angle < 1e-6);
        }
    }

    #[test]
    fn eigen_bound_equality_cases() {
        let b = body(BodySpec::Ball { radius: 1.0 });
        let r = eigen_bound_check(&b, &cos2()).unwrap();
        assert!(r.margin.abs() < 1e-8 && r.eigen_residual < 1e-8);
        let r = eigen_bound_check(&b, b.field()).unwrap();
        assert!(r.margin.abs() < 1e-8 && r.residual_norm < 1e-12);
        let e = body(BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] });
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let phi = random_even_field(e.disc(), &mut rng).unwrap();
            assert!(eigen_bound_check(&e, &phi).unwrap().margin >= -1e-9);
        }
    }

    #[test]
    fn km_check_on_disc() {
        let b = body(BodySpec::Ball { radius: 1.0 });
        assert!(km_local_check(&b, b.field(), 0.5).unwrap() <= 1e-8);
        let phi = SpectralField::constant(Dim::Two, 64, 1.0).axpy(0.1, &cos2());
        assert!(km_local_check(&b, &phi, 0.5).unwrap() <= 0.0);
    }

    #[test]
    fn equivalence_on_disc() {
        let b = body(BodySpec::Ball { radius: 1.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = equivalence_experiment(&b, 0.0, 20, &mut rng).unwrap();
        assert!(r.verdicts_agree && r.consistent && r.empirical_stable);
        assert!(r.necessity.is_none());
    }
}
