//! The Aleksandrov eigenvalue problem `-U^{ij}(φ_{;ij} + φδ_ij) = λ h⁻¹ det W φ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::body::BodyRep;
use crate::error::{Error, Result};
use crate::sphere::{Dim, Tables};

/// Eigenvalues within this distance of zero form the kernel group.
pub const KERNEL_TOL: f64 = 1e-6;
/// Largest tolerated relative asymmetry of the assembled forms.
pub const ASYMMETRY_TOL: f64 = 1e-8;
/// Even and full-space values of `λ₃` must agree to this.
pub const CROSS_CHECK_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subspace {
    Full,
    Even,
}

/// Symmetric pair `(A, B)` in a subset of the basis.
#[derive(Clone, Debug)]
pub struct Pencil {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub subspace: Subspace,
    /// Basis indices spanned by the pencil, in column order.
    pub modes: Vec<usize>,
    /// Relative asymmetry of `A` before symmetrization.
    pub asymmetry: f64,
    pub body: String,
    pub dim: Dim,
}

impl Pencil {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Restricts full-basis coefficients to the pencil's modes.
    pub fn restrict(&self, coefficients: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.modes.len(), self.modes.iter().map(|&i| coefficients[i]))
    }

    /// Extends pencil coordinates to full-basis coefficients (zeros elsewhere).
    pub fn extend(&self, v: &DVector<f64>, basis_len: usize) -> Vec<f64> {
        let mut out = vec![0.0; basis_len];
        for (&i, x) in self.modes.iter().zip(v.iter()) {
            out[i] = *x;
        }
        out
    }

    pub fn b_inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.b * y))
    }
}

fn modes_for(k: &BodyRep, subspace: Subspace) -> Vec<usize> {
    match subspace {
        Subspace::Full => (0..k.disc().basis().len()).collect(),
        Subspace::Even => k.disc().basis().even_indices(),
    }
}

fn scale_rows(m: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= s[i];
    }
    out
}

fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    (a - a.transpose()).amax() / scale
}

/// Quadrature matrix `Vᵀ diag(w·s) V` of the weight `s`.
pub(crate) fn weighted_mass(tables: &Tables, w: &[f64], s: &[f64]) -> DMatrix<f64> {
    let ws: Vec<f64> = w.iter().zip(s).map(|(a, b)| a * b).collect();
    tables.value.transpose() * scale_rows(&tables.value, &ws)
}

/// Stiffness `∫ U^{ij} ψ_{;i} φ_{;j} - ∫ tr U ψφ`.
pub(crate) fn stiffness(k: &BodyRep, tables: &Tables) -> DMatrix<f64> {
    let w = k.disc().grid().weights();
    let u = k.cofactor();
    let tr: Vec<f64> = match k.dim() {
        Dim::Two => vec![1.0; w.len()],
        Dim::Three => u.iter().map(|m| m.trace()).collect(),
    };
    let mut a = -weighted_mass(tables, w, &tr);
    match k.dim() {
        Dim::Two => {
            let g = &tables.gradient[0];
            a += g.transpose() * scale_rows(g, w);
        }
        Dim::Three => {
            let (g0, g1) = (&tables.gradient[0], &tables.gradient[1]);
            let coef = |i: usize, j: usize| -> Vec<f64> {
                w.iter().zip(u).map(|(wq, m)| wq * m[(i, j)]).collect()
            };
            let s0 = scale_rows(g0, &coef(0, 0)) + scale_rows(g1, &coef(0, 1));
            let s1 = scale_rows(g0, &coef(1, 0)) + scale_rows(g1, &coef(1, 1));
            a += g0.transpose() * s0 + g1.transpose() * s1;
        }
    }
    a
}

/// The weight `h⁻¹ det W` of the right-hand side.
pub(crate) fn rhs_weight(k: &BodyRep) -> Vec<f64> {
    k.jets().iter().zip(k.det_w()).map(|(j, d)| d / j.value).collect()
}

/// Galerkin assembly of the weak form on the full or even subspace.
pub fn assemble_pencil(k: &BodyRep, subspace: Subspace) -> Result<Pencil> {
    let modes = modes_for(k, subspace);
    let tables = k.disc().tables().select(&modes);
    let w = k.disc().grid().weights();
    let a = stiffness(k, &tables);
    let b = weighted_mass(&tables, w, &rhs_weight(k));
    let asymmetry = relative_asymmetry(&a).max(relative_asymmetry(&b));
    if asymmetry > ASYMMETRY_TOL {
        return Err(Error::AssemblyAsymmetry { residual: asymmetry });
    }
    let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    Ok(Pencil {
        a: sym(a),
        b: sym(b),
        subspace,
        modes,
        asymmetry,
        body: k.name().to_string(),
        dim: k.dim(),
    })
}

/// Nodewise `-U^{ij}(v_{;ij} + vδ_ij)` projected onto the pencil modes; equals
/// `A v` when integration by parts is exact under the quadrature.
pub fn strong_form_projection(k: &BodyRep, pencil: &Pencil, v: &DVector<f64>) -> DVector<f64> {
    let tables = k.disc().tables().select(&pencil.modes);
    let w = k.disc().grid().weights();
    let val = &tables.value * v;
    let strong: Vec<f64> = match k.dim() {
        Dim::Two => {
            let h = &tables.hessian[0] * v;
            (0..w.len()).map(|q| -(h[q] + val[q]) * w[q]).collect()
        }
        Dim::Three => {
            let h: Vec<DVector<f64>> = tables.hessian.iter().map(|m| m * v).collect();
            k.cofactor()
                .iter()
                .enumerate()
                .map(|(q, u)| {
                    let s = u[(0, 0)] * (h[0][q] + val[q])
                        + 2.0 * u[(0, 1)] * h[1][q]
                        + u[(1, 1)] * (h[2][q] + val[q]);
                    -s * w[q]
                })
                .collect()
        }
    };
    tables.value.tr_mul(&DVector::from_vec(strong))
}

/// Eigenpairs of a pencil with `B`-orthonormal eigenvectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub body: String,
    pub subspace: Subspace,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<DVector<f64>>,
    pub lambda3: f64,
    pub negative_count: usize,
    pub kernel_dim: usize,
    pub orthonormality_residual: f64,
    pub rayleigh_residual: f64,
}

/// Full generalized eigendecomposition by Cholesky reduction.
pub(crate) fn generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::EigensolveFailure("B is not positive definite".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::EigensolveFailure("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::EigensolveFailure("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigensolveFailure("symmetric QR did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let q = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    let vectors = l
        .transpose()
        .solve_upper_triangular(&q)
        .ok_or_else(|| Error::EigensolveFailure("back substitution failed".into()))?;
    Ok((values, vectors))
}

/// Smallest `count` eigenvalues of the pencil.
pub fn solve_spectrum(pencil: &Pencil, count: usize) -> Result<SpectrumResult> {
    if count < 3 {
        return Err(Error::InvalidParameter(format!("count {count} must be at least 3")));
    }
    let (values, vectors) = generalized_eigen(&pencil.a, &pencil.b)?;
    let count = count.min(values.len());
    let eigenvalues: Vec<f64> = values[..count].to_vec();
    let eigenvectors: Vec<DVector<f64>> = (0..count).map(|i| vectors.column(i).into_owned()).collect();

    let mut orth = 0.0f64;
    let mut rayleigh = 0.0f64;
    for (i, v) in eigenvectors.iter().enumerate() {
        let bv = &pencil.b * v;
        for (j, u) in eigenvectors.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            orth = orth.max((u.dot(&bv) - target).abs());
        }
        let rq = v.dot(&(&pencil.a * v)) / v.dot(&bv);
        rayleigh = rayleigh.max((rq - eigenvalues[i]).abs());
    }

    let negative_count = values.iter().filter(|x| **x < -KERNEL_TOL).count();
    let kernel_dim = values.iter().filter(|x| x.abs() <= KERNEL_TOL).count();
    let lambda3 = match pencil.subspace {
        Subspace::Full => values.iter().copied().find(|x| *x > KERNEL_TOL),
        Subspace::Even => values.get(1).copied(),
    }
    .ok_or_else(|| Error::EigensolveFailure("basis too small for a third eigenvalue".into()))?;

    Ok(SpectrumResult {
        body: pencil.body.clone(),
        subspace: pencil.subspace,
        eigenvalues,
        eigenvectors,
        lambda3,
        negative_count,
        kernel_dim,
        orthonormality_residual: orth,
        rayleigh_residual: rayleigh,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThirdEigenvalue {
    pub lambda3: f64,
    pub satisfies_a2: bool,
    pub even: f64,
    pub full: f64,
}

/// `λ₃` from the even subspace, cross-checked against the full space.
pub fn third_eigenvalue(k: &BodyRep) -> Result<ThirdEigenvalue> {
    let even = solve_spectrum(&assemble_pencil(k, Subspace::Even)?, 3)?.lambda3;
    let full = solve_spectrum(&assemble_pencil(k, Subspace::Full)?, 3)?.lambda3;
    if (even - full).abs() > CROSS_CHECK_TOL {
        return Err(Error::CrossCheckMismatch { even, full });
    }
    Ok(ThirdEigenvalue {
        lambda3: even,
        satisfies_a2: even >= 1.0 - 1e-8,
        even,
        full,
    })
}

/// Flags and residuals of the expected low spectrum: a single negative
/// eigenvalue `-n` with eigenfunction `h`, and the linear functions as kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructureReport {
    pub body: String,
    pub tolerance: f64,
    pub negative_count: usize,
    pub negative_eigenvalue: f64,
    pub negative_error: f64,
    /// Sine of the `B`-angle between the negative eigenvector and `h`.
    pub h_angle: f64,
    pub kernel_dim: usize,
    /// Sine of the largest principal angle between the kernel and the linear functions.
    pub kernel_angle: f64,
    pub lambda3: f64,
    pub unique_negative: bool,
    pub negative_is_minus_n: bool,
    pub aligned_with_h: bool,
    pub kernel_dim_ok: bool,
    pub kernel_is_linear: bool,
}

impl StructureReport {
    pub fn holds(&self) -> bool {
        self.unique_negative
            && self.negative_is_minus_n
            && self.aligned_with_h
            && self.kernel_dim_ok
            && self.kernel_is_linear
    }

    fn first_failure(&self) -> Option<(&'static str, f64)> {
        if !self.unique_negative {
            Some(("number of negative eigenvalues", self.negative_count as f64))
        } else if !self.negative_is_minus_n {
            Some(("negative eigenvalue equals -n", self.negative_error))
        } else if !self.aligned_with_h {
            Some(("negative eigenfunction parallel to h", self.h_angle))
        } else if !self.kernel_dim_ok {
            Some(("kernel dimension n+1", self.kernel_dim as f64))
        } else if !self.kernel_is_linear {
            Some(("kernel spanned by linear functions", self.kernel_angle))
        } else {
            None
        }
    }
}

/// Sine of the angle between `x` and the span of the `B`-orthonormal `basis`.
fn b_angle_to_span(pencil: &Pencil, x: &DVector<f64>, basis: &[DVector<f64>]) -> f64 {
    let bx = &pencil.b * x;
    let mut r = x.clone();
    for v in basis {
        r -= v * v.dot(&bx);
    }
    (pencil.b_inner(&r, &r).max(0.0) / pencil.b_inner(x, x)).sqrt()
}

/// Computes the structure flags on the full space without failing.
pub fn structure_report(k: &BodyRep, tolerance: f64) -> Result<StructureReport> {
    let pencil = assemble_pencil(k, Subspace::Full)?;
    let n = k.dim().sphere();
    let res = solve_spectrum(&pencil, n + 3)?;
    let ev = &res.eigenvalues;
    let h = pencil.restrict(&k.field().coefficients);
    let h_angle = b_angle_to_span(&pencil, &h, &res.eigenvectors[..1]);

    let kernel: Vec<DVector<f64>> = res.eigenvectors[1..n + 2].to_vec();
    let linear = k.disc().basis().linear_indices();
    let kernel_angle = linear
        .iter()
        .map(|&i| {
            let mut e = DVector::zeros(pencil.len());
            e[i] = 1.0;
            b_angle_to_span(&pencil, &e, &kernel)
        })
        .fold(0.0, f64::max);
    let negative_error = (ev[0] + n as f64).abs();
    Ok(StructureReport {
        body: k.name().to_string(),
        tolerance,
        negative_count: res.negative_count,
        negative_eigenvalue: ev[0],
        negative_error,
        h_angle,
        kernel_dim: res.kernel_dim,
        kernel_angle,
        lambda3: res.lambda3,
        unique_negative: res.negative_count == 1,
        negative_is_minus_n: negative_error < tolerance,
        aligned_with_h: h_angle < tolerance,
        kernel_dim_ok: res.kernel_dim == n + 1,
        kernel_is_linear: kernel_angle < tolerance,
    })
}

/// Like [`structure_report`] but fails on the first violated check.
pub fn verify_structure(k: &BodyRep, tolerance: f64) -> Result<StructureReport> {
    let report = structure_report(k, tolerance)?;
    match report.first_failure() {
        Some((check, residual)) => Err(Error::StructureViolation {
            check: check.to_string(),
            residual,
        }),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{make_body, BodySpec, Catalog, CatalogEntry};
    use crate::sphere::Discretization;
    use std::f64::consts::PI;

    fn ball(dim: Dim, band: usize) -> BodyRep {
        let d = Discretization::shared(dim, band).unwrap();
        make_body(&CatalogEntry { name: "ball".into(), spec: BodySpec::Ball { radius: 1.0 } }, &d).unwrap()
    }

    #[test]
    fn disc_pencil_is_diagonal_fourier() {
        let b = ball(Dim::Two, 16);
        let p = assemble_pencil(&b, Subspace::Full).unwrap();
        for (i, mode) in b.disc().basis().modes().iter().enumerate() {
            let k = mode.degree() as f64;
            let norm = if k == 0.0 { 2.0 * PI } else { PI };
            for j in 0..p.len() {
                let (ea, eb) = if i == j { ((k * k - 1.0) * norm, norm) } else { (0.0, 0.0) };
                assert!((p.a[(i, j)] - ea).abs() < 1e-10, "A[{i},{j}]");
                assert!((p.b[(i, j)] - eb).abs() < 1e-10, "B[{i},{j}]");
            }
        }
    }

    #[test]
    fn sphere_pencil_is_diagonal_harmonic() {
        let b = ball(Dim::Three, 8);
        let p = assemble_pencil(&b, Subspace::Full).unwrap();
        for (i, mode) in b.disc().basis().modes().iter().enumerate() {
            let l = mode.degree() as f64;
            for j in 0..p.len() {
                let (ea, eb) = if i == j { (l * (l + 1.0) - 2.0, 1.0) } else { (0.0, 0.0) };
                assert!((p.a[(i, j)] - ea).abs() < 1e-10, "A[{i},{j}]");
                assert!((p.b[(i, j)] - eb).abs() < 1e-10, "B[{i},{j}]");
            }
        }
    }

    #[test]
    fn disc_spectrum() {
        let b = ball(Dim::Two, 64);
        let full = solve_spectrum(&assemble_pencil(&b, Subspace::Full).unwrap(), 6).unwrap();
        let want = [-1.0, 0.0, 0.0, 3.0, 3.0, 8.0];
        for (x, y) in full.eigenvalues.iter().zip(want) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        assert_eq!(full.lambda3, full.eigenvalues[3]);
        let even = solve_spectrum(&assemble_pencil(&b, Subspace::Even).unwrap(), 4).unwrap();
        for (x, y) in even.eigenvalues.iter().zip([-1.0, 3.0, 3.0, 15.0]) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        assert!(full.orthonormality_residual < 1e-8 && full.rayleigh_residual < 1e-10);
    }

    #[test]
    fn weak_and_strong_forms_agree() {
        for dim in [Dim::Two, Dim::Three] {
            let band = if dim == Dim::Two { 32 } else { 10 };
            let d = Discretization::shared(dim, band).unwrap();
            for e in Catalog::builtin(dim).entries {
                let k = make_body(&e, &d).unwrap();
                let p = assemble_pencil(&k, Subspace::Full).unwrap();
                let v = DVector::from_fn(p.len(), |i, _| ((i * 7919) % 13) as f64 / 13.0 - 0.5);
                let weak = &p.a * &v;
                let strong = strong_form_projection(&k, &p, &v);
                let err = (&weak - &strong).amax() / weak.amax();
                assert!(err < 1e-8, "{} {:?}: {err}", e.name, dim);
            }
        }
    }

    #[test]
    fn dilation_invariance() {
        let d = Discretization::shared(Dim::Two, 64).unwrap();
        let e = make_body(
            &CatalogEntry { name: "e".into(), spec: BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] } },
            &d,
        )
        .unwrap();
        let a = third_eigenvalue(&e).unwrap();
        let b = third_eigenvalue(&e.dilate(2.5).unwrap()).unwrap();
        assert!((a.lambda3 - b.lambda3).abs() < 1e-8);
        assert!(a.satisfies_a2);
    }

    #[test]
    fn structure_of_ellipse() {
        let d = Discretization::shared(Dim::Two, 64).unwrap();
        let e = make_body(
            &CatalogEntry { name: "e".into(), spec: BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] } },
            &d,
        )
        .unwrap();
        let r = verify_structure(&e, 1e-6).unwrap();
        assert!((r.negative_eigenvalue + 1.0).abs() < 1e-6);
        assert!(r.holds());
    }
}
