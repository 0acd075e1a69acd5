//! Discrete calculus on S^1 and S^2.
//!
//! Functions on the sphere are represented in a truncated orthogonal basis:
//! real Fourier modes `1, cos kθ, sin kθ` (k ≤ K) on the circle and real,
//! orthonormal spherical harmonics `Y_lm` (l ≤ L) on S^2. Fourier modes are
//! *not* normalized, so a coefficient is the amplitude of its mode.
//!
//! A [`Discretization`] couples a [`Basis`] with a [`DirectionGrid`] and caches
//! the value, gradient and covariant Hessian of every basis function at every
//! node, expressed in the orthonormal tangent frame `(e_θ, e_φ / sin θ)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ambient dimension `d = n + 1` of the convex bodies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            other => Err(Error::UnsupportedDimension(other)),
        }
    }

    /// Ambient dimension `d`.
    pub fn ambient(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Dimension `n` of the sphere `S^n`.
    pub fn sphere(self) -> usize {
        self.ambient() - 1
    }

    /// Surface measure of `S^n`.
    pub fn measure(self) -> f64 {
        match self {
            Dim::Two => 2.0 * PI,
            Dim::Three => 4.0 * PI,
        }
    }

    /// Default band limit (K on the circle, L on S^2).
    pub fn default_band(self) -> usize {
        match self {
            Dim::Two => 64,
            Dim::Three => 24,
        }
    }
}

impl TryFrom<usize> for Dim {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        Dim::new(d)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.ambient()
    }
}

/// One function of the truncated basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// `cos kθ` (or `sin kθ` when `sine`); `k = 0` is the constant.
    Fourier { k: usize, sine: bool },
    /// Real spherical harmonic; `m < 0` carries `sin |m|φ`.
    Harmonic { l: usize, m: i64 },
}

impl Mode {
    pub fn degree(&self) -> usize {
        match *self {
            Mode::Fourier { k, .. } => k,
            Mode::Harmonic { l, .. } => l,
        }
    }

    /// Parity under `x -> -x`.
    pub fn is_even(&self) -> bool {
        self.degree().is_multiple_of(2)
    }

    /// Eigenvalue of the Laplace-Beltrami operator, `-k^2` or `-l(l+1)`.
    pub fn laplacian(&self) -> f64 {
        match *self {
            Mode::Fourier { k, .. } => -((k * k) as f64),
            Mode::Harmonic { l, .. } => -((l * (l + 1)) as f64),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Basis {
    dim: Dim,
    band: usize,
    modes: Vec<Mode>,
}

impl Basis {
    pub fn new(dim: Dim, band: usize) -> Self {
        let modes = match dim {
            Dim::Two => {
                let mut modes = vec![Mode::Fourier { k: 0, sine: false }];
                for k in 1..=band {
                    modes.push(Mode::Fourier { k, sine: false });
                    modes.push(Mode::Fourier { k, sine: true });
                }
                modes
            }
            Dim::Three => (0..=band)
                .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| Mode::Harmonic { l, m }))
                .collect(),
        };
        Basis { dim, band, modes }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn index_of(&self, mode: Mode) -> Option<usize> {
        self.modes.iter().position(|&m| m == mode)
    }

    pub fn even_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.modes[i].is_even()).collect()
    }

    /// Indices of the degree-one modes, which span the coordinate functions `a·x`.
    pub fn linear_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.modes[i].degree() == 1).collect()
    }
}

/// Quadrature nodes and weights on S^1 or S^2 with per-node tangent frames.
///
/// Nodes are stored as 3-vectors; on the circle the third component is zero
/// and only the first frame vector is meaningful.
#[derive(Clone, Debug, Serialize)]
pub struct DirectionGrid {
    dim: Dim,
    resolution: usize,
    nodes: Vec<[f64; 3]>,
    /// `θ` on the circle, `(θ, φ)` colatitude/longitude on S^2.
    angles: Vec<[f64; 2]>,
    weights: Vec<f64>,
    frames: Vec<[[f64; 3]; 2]>,
    /// Highest polynomial degree integrated exactly.
    exact_degree: usize,
    #[serde(skip)]
    antipodes: Option<Vec<usize>>,
}

/// Builds a quadrature grid: `resolution` uniform nodes on the circle, or
/// `resolution` Gauss-Legendre latitudes times `2·resolution` uniform
/// longitudes on S^2.
pub fn build_grid(dim: Dim, resolution: usize) -> Result<DirectionGrid> {
    if resolution < 4 {
        return Err(Error::ResolutionTooSmall {
            resolution,
            band: 0,
            required: 4,
        });
    }
    let grid = match dim {
        Dim::Two => {
            let m = resolution;
            let h = 2.0 * PI / m as f64;
            let mut grid = DirectionGrid {
                dim,
                resolution,
                nodes: Vec::with_capacity(m),
                angles: Vec::with_capacity(m),
                weights: vec![h; m],
                frames: Vec::with_capacity(m),
                exact_degree: m - 1,
                antipodes: m.is_multiple_of(2).then(|| (0..m).map(|j| (j + m / 2) % m).collect()),
            };
            for j in 0..m {
                let t = h * j as f64;
                let (s, c) = t.sin_cos();
                grid.nodes.push([c, s, 0.0]);
                grid.angles.push([t, 0.0]);
                grid.frames.push([[-s, c, 0.0], [0.0; 3]]);
            }
            grid
        }
        Dim::Three => {
            let nlat = resolution;
            let nlon = 2 * resolution;
            let (x, w) = gauss_legendre(nlat);
            let dphi = 2.0 * PI / nlon as f64;
            let count = nlat * nlon;
            let mut grid = DirectionGrid {
                dim,
                resolution,
                nodes: Vec::with_capacity(count),
                angles: Vec::with_capacity(count),
                weights: Vec::with_capacity(count),
                frames: Vec::with_capacity(count),
                exact_degree: 2 * nlat - 1,
                antipodes: Some(Vec::with_capacity(count)),
            };
            for i in 0..nlat {
                let ct = x[i];
                let st = (1.0 - ct * ct).sqrt();
                let theta = ct.acos();
                for j in 0..nlon {
                    let phi = dphi * j as f64;
                    let (sp, cp) = phi.sin_cos();
                    grid.nodes.push([st * cp, st * sp, ct]);
                    grid.angles.push([theta, phi]);
                    grid.weights.push(w[i] * dphi);
                    grid.frames
                        .push([[ct * cp, ct * sp, -st], [-sp, cp, 0.0]]);
                    if let Some(a) = grid.antipodes.as_mut() {
                        a.push((nlat - 1 - i) * nlon + (j + nlat) % nlon);
                    }
                }
            }
            grid
        }
    };
    Ok(grid)
}

impl DirectionGrid {
    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn angles(&self) -> &[[f64; 2]] {
        &self.angles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn frames(&self) -> &[[[f64; 3]; 2]] {
        &self.frames
    }

    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    /// Index of the antipodal node `-x_i`, when the grid is symmetric.
    pub fn antipode(&self, i: usize) -> Option<usize> {
        self.antipodes.as_ref().map(|a| a[i])
    }

    /// `Σ w_i f_i`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        check_len(self.len(), values.len())?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// Node values of a function of the unit vector.
    pub fn sample(&self, f: impl Fn(&[f64; 3]) -> f64) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch { expected, got });
    }
    Ok(())
}

/// Gauss-Legendre nodes (descending, so colatitude ascends) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        // one more derivative evaluation at the converged root
        let (mut p1, mut p2) = (1.0, 0.0);
        for j in 1..=n {
            let p3 = p2;
            p2 = p1;
            p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
        }
        dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Coefficients of a function on the sphere in a truncated basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub dim: Dim,
    pub band: usize,
    pub coefficients: Vec<f64>,
    /// `f(-x) = f(x)`; when set, every odd-degree coefficient is exactly zero.
    pub even: bool,
}

/// Odd coefficients below this (relative to the largest coefficient) are
/// treated as round-off when classifying parity.
const PARITY_TOL: f64 = 1e-12;

impl SpectralField {
    pub fn zeros(dim: Dim, band: usize) -> Self {
        let len = Basis::new(dim, band).len();
        SpectralField {
            dim,
            band,
            coefficients: vec![0.0; len],
            even: true,
        }
    }

    /// The constant function `c`.
    pub fn constant(dim: Dim, band: usize, c: f64) -> Self {
        let mut f = Self::zeros(dim, band);
        f.coefficients[0] = match dim {
            Dim::Two => c,
            Dim::Three => c * (4.0 * PI).sqrt(),
        };
        f
    }

    /// Wraps raw coefficients, classifying parity.
    pub fn from_coefficients(dim: Dim, band: usize, coefficients: Vec<f64>) -> Result<Self> {
        let basis = Basis::new(dim, band);
        check_len(basis.len(), coefficients.len())?;
        let mut f = SpectralField {
            dim,
            band,
            coefficients,
            even: false,
        };
        f.classify_parity(&basis);
        Ok(f)
    }

    fn classify_parity(&mut self, basis: &Basis) {
        let scale = self
            .coefficients
            .iter()
            .fold(0.0f64, |a, c| a.max(c.abs()))
            .max(1.0);
        if self.odd_magnitude(basis) <= PARITY_TOL * scale {
            for (c, m) in self.coefficients.iter_mut().zip(basis.modes()) {
                if !m.is_even() {
                    *c = 0.0;
                }
            }
            self.even = true;
        } else {
            self.even = false;
        }
    }

    /// Largest odd-degree coefficient magnitude.
    pub fn odd_magnitude(&self, basis: &Basis) -> f64 {
        self.coefficients
            .iter()
            .zip(basis.modes())
            .filter(|(_, m)| !m.is_even())
            .fold(0.0f64, |a, (c, _)| a.max(c.abs()))
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    fn same_space(&self, other: &SpectralField) {
        assert!(
            self.dim == other.dim && self.band == other.band,
            "fields live in different spaces"
        );
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> SpectralField {
        self.same_space(other);
        SpectralField {
            dim: self.dim,
            band: self.band,
            coefficients: self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(x, y)| x + a * y)
                .collect(),
            even: self.even && other.even,
        }
    }

    pub fn scaled(&self, c: f64) -> SpectralField {
        SpectralField {
            coefficients: self.coefficients.iter().map(|x| c * x).collect(),
            ..self.clone()
        }
    }

    /// `(1-λ)·self + λ·other`.
    pub fn lerp(&self, lambda: f64, other: &SpectralField) -> SpectralField {
        self.scaled(1.0 - lambda).axpy(lambda, other)
    }

    /// Heat-kernel smoothing `f ↦ e^{tΔ} f`.
    pub fn smoothed(&self, t: f64) -> SpectralField {
        let basis = Basis::new(self.dim, self.band);
        SpectralField {
            coefficients: self
                .coefficients
                .iter()
                .zip(basis.modes())
                .map(|(c, m)| c * (t * m.laplacian()).exp())
                .collect(),
            ..self.clone()
        }
    }

    /// Re-expresses the field in a basis with another band limit
    /// (zero-padding or truncating).
    pub fn with_band(&self, band: usize) -> SpectralField {
        let from = Basis::new(self.dim, self.band);
        let to = Basis::new(self.dim, band);
        let mut coefficients = vec![0.0; to.len()];
        for (i, m) in to.modes().iter().enumerate() {
            if let Some(j) = from.index_of(*m) {
                coefficients[i] = self.coefficients[j];
            }
        }
        SpectralField {
            dim: self.dim,
            band,
            coefficients,
            even: self.even,
        }
    }

    pub fn coefficient_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coefficients)
    }
}

/// Value, tangent gradient and covariant Hessian at one node, in the
/// orthonormal node frame. On the circle only the `[0]` / `(0,0)` entries
/// are used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vector2<f64>,
    pub hessian: Matrix2<f64>,
}

/// Identity of the `n`-dimensional tangent space, embedded in a 2×2 matrix.
pub(crate) fn tangent_identity(n: usize) -> Matrix2<f64> {
    if n == 1 {
        Matrix2::new(1.0, 0.0, 0.0, 0.0)
    } else {
        Matrix2::identity()
    }
}

pub(crate) fn tangent_det(m: &Matrix2<f64>, n: usize) -> f64 {
    if n == 1 {
        m[(0, 0)]
    } else {
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    }
}

/// Cofactor (adjugate) matrix; the cofactor of a 1×1 matrix is 1.
pub(crate) fn tangent_cofactor(m: &Matrix2<f64>, n: usize) -> Matrix2<f64> {
    if n == 1 {
        Matrix2::new(1.0, 0.0, 0.0, 0.0)
    } else {
        Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
    }
}

pub(crate) fn tangent_min_eigenvalue(m: &Matrix2<f64>, n: usize) -> f64 {
    if n == 1 {
        m[(0, 0)]
    } else {
        let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
        let half = 0.5 * (m[(0, 0)] - m[(1, 1)]);
        let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
        mean - (half * half + off * off).sqrt()
    }
}

/// Per-node tables of every basis function (rows = nodes, columns = modes).
#[derive(Debug)]
pub struct Tables {
    pub value: DMatrix<f64>,
    /// Frame components of the gradient; one matrix per tangent direction.
    pub gradient: Vec<DMatrix<f64>>,
    /// Covariant Hessian entries `(0,0)`, `(0,1)`, `(1,1)` (only `(0,0)` on the circle).
    pub hessian: Vec<DMatrix<f64>>,
}

impl Tables {
    /// Restriction to a subset of modes.
    pub fn select(&self, cols: &[usize]) -> Tables {
        Tables {
            value: self.value.select_columns(cols),
            gradient: self.gradient.iter().map(|g| g.select_columns(cols)).collect(),
            hessian: self.hessian.iter().map(|h| h.select_columns(cols)).collect(),
        }
    }
}

/// A basis together with a quadrature grid and cached basis tables.
#[derive(Debug)]
pub struct Discretization {
    basis: Basis,
    grid: DirectionGrid,
    tables: Tables,
    /// `∫ ψ_j^2` for each mode.
    norms: Vec<f64>,
}

impl Discretization {
    /// Grid resolution whose quadrature is exact for triple products of
    /// band-limited fields and their derivatives.
    pub fn default_resolution(dim: Dim, band: usize) -> usize {
        match dim {
            Dim::Two => (4 * band).max(8),
            Dim::Three => (3 * band + 7).div_ceil(2).max(band + 2),
        }
    }

    /// Smallest resolution for which `analyze` is exact on the band.
    pub fn minimum_resolution(dim: Dim, band: usize) -> usize {
        match dim {
            Dim::Two => (2 * band + 1).max(4),
            Dim::Three => (band + 1).max(4),
        }
    }

    pub fn new(dim: Dim, band: usize) -> Result<Self> {
        Self::with_resolution(dim, band, Self::default_resolution(dim, band))
    }

    pub fn with_resolution(dim: Dim, band: usize, resolution: usize) -> Result<Self> {
        let required = Self::minimum_resolution(dim, band);
        if resolution < required {
            return Err(Error::ResolutionTooSmall {
                resolution,
                band,
                required,
            });
        }
        let basis = Basis::new(dim, band);
        let grid = build_grid(dim, resolution)?;
        let tables = match dim {
            Dim::Two => fourier_tables(&basis, &grid),
            Dim::Three => harmonic_tables(&basis, &grid),
        };
        let norms = match dim {
            Dim::Two => basis
                .modes()
                .iter()
                .map(|m| if m.degree() == 0 { 2.0 * PI } else { PI })
                .collect(),
            Dim::Three => vec![1.0; basis.len()],
        };
        Ok(Discretization {
            basis,
            grid,
            tables,
            norms,
        })
    }

    /// Process-wide cached discretization at the default resolution.
    pub fn shared(dim: Dim, band: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(Dim, usize), Arc<Discretization>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(d) = map.get(&(dim, band)) {
            return Ok(Arc::clone(d));
        }
        let d = Arc::new(Self::new(dim, band)?);
        map.insert((dim, band), Arc::clone(&d));
        Ok(d)
    }

    pub fn dim(&self) -> Dim {
        self.basis.dim
    }

    pub fn band(&self) -> usize {
        self.basis.band
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn grid(&self) -> &DirectionGrid {
        &self.grid
    }

    pub fn tables(&self) -> &Tables {
        &self.tables
    }

    pub fn mode_norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.grid.integrate(values)
    }

    /// Quadrature projection onto the basis; exact for band-limited input.
    pub fn analyze(&self, values: &[f64]) -> Result<SpectralField> {
        check_len(self.grid.len(), values.len())?;
        let weighted = DVector::from_iterator(
            values.len(),
            values.iter().zip(self.grid.weights()).map(|(v, w)| v * w),
        );
        let proj = self.tables.value.tr_mul(&weighted);
        let coefficients = proj.iter().zip(&self.norms).map(|(c, n)| c / n).collect();
        let mut field = SpectralField {
            dim: self.dim(),
            band: self.band(),
            coefficients,
            even: false,
        };
        field.classify_parity(&self.basis);
        Ok(field)
    }

    fn check_field(&self, field: &SpectralField) {
        assert!(
            field.dim == self.dim() && field.band == self.band(),
            "field (dim {:?}, band {}) does not match discretization (dim {:?}, band {})",
            field.dim,
            field.band,
            self.dim(),
            self.band()
        );
    }

    /// Node values of a field.
    pub fn values(&self, field: &SpectralField) -> Vec<f64> {
        self.check_field(field);
        (&self.tables.value * field.coefficient_vector())
            .as_slice()
            .to_vec()
    }

    /// Value, gradient and covariant Hessian of a field at every node.
    pub fn synthesize(&self, field: &SpectralField) -> Vec<Jet> {
        self.check_field(field);
        let c = field.coefficient_vector();
        let value = &self.tables.value * &c;
        let grad: Vec<DVector<f64>> = self.tables.gradient.iter().map(|g| g * &c).collect();
        let hess: Vec<DVector<f64>> = self.tables.hessian.iter().map(|h| h * &c).collect();
        (0..self.grid.len())
            .map(|i| match self.dim() {
                Dim::Two => Jet {
                    value: value[i],
                    gradient: Vector2::new(grad[0][i], 0.0),
                    hessian: Matrix2::new(hess[0][i], 0.0, 0.0, 0.0),
                },
                Dim::Three => Jet {
                    value: value[i],
                    gradient: Vector2::new(grad[0][i], grad[1][i]),
                    hessian: Matrix2::new(hess[0][i], hess[1][i], hess[1][i], hess[2][i]),
                },
            })
            .collect()
    }
}

fn fourier_tables(basis: &Basis, grid: &DirectionGrid) -> Tables {
    let (rows, cols) = (grid.len(), basis.len());
    let mut value = DMatrix::zeros(rows, cols);
    let mut grad = DMatrix::zeros(rows, cols);
    let mut hess = DMatrix::zeros(rows, cols);
    for (i, a) in grid.angles().iter().enumerate() {
        let t = a[0];
        for (j, mode) in basis.modes().iter().enumerate() {
            let Mode::Fourier { k, sine } = *mode else {
                unreachable!()
            };
            let kf = k as f64;
            let (s, c) = (kf * t).sin_cos();
            let (v, d1) = if sine { (s, kf * c) } else { (c, -kf * s) };
            value[(i, j)] = v;
            grad[(i, j)] = d1;
            hess[(i, j)] = -kf * kf * v;
        }
    }
    Tables {
        value,
        gradient: vec![grad],
        hessian: vec![hess],
    }
}

/// Fully normalized associated Legendre functions `P̄_l^m(cos θ)` and their
/// first two θ-derivatives, indexed `[l][m]`, with `∫ P̄² d(cos θ) = 1/(2π)`.
pub fn legendre_table(lmax: usize, theta: f64) -> [Vec<Vec<f64>>; 3] {
    let (s, x) = theta.sin_cos();
    let mut p = vec![vec![0.0; lmax + 1]; lmax + 1];
    let mut dp = p.clone();
    let mut d2p = p.clone();
    p[0][0] = (0.25 / PI).sqrt();
    for m in 1..=lmax {
        let mf = m as f64;
        p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..lmax {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * x * p[m][m];
    }
    for m in 0..=lmax {
        let mf = m as f64;
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    let cot = x / s;
    for l in 0..=lmax {
        let lf = l as f64;
        for m in 0..=l {
            let mf = m as f64;
            let lower = if l > m {
                ((2.0 * lf + 1.0) * (lf - mf) * (lf + mf) / (2.0 * lf - 1.0)).sqrt() * p[l - 1][m]
            } else {
                0.0
            };
            dp[l][m] = (lf * x * p[l][m] - lower) / s;
            d2p[l][m] = -cot * dp[l][m] - (lf * (lf + 1.0) - mf * mf / (s * s)) * p[l][m];
        }
    }
    [p, dp, d2p]
}

fn harmonic_tables(basis: &Basis, grid: &DirectionGrid) -> Tables {
    let (rows, cols) = (grid.len(), basis.len());
    let lmax = basis.band();
    let mut value = DMatrix::zeros(rows, cols);
    let mut g0 = DMatrix::zeros(rows, cols);
    let mut g1 = DMatrix::zeros(rows, cols);
    let mut h00 = DMatrix::zeros(rows, cols);
    let mut h01 = DMatrix::zeros(rows, cols);
    let mut h11 = DMatrix::zeros(rows, cols);
    let nlon = 2 * grid.resolution();
    let sqrt2 = 2f64.sqrt();
    for lat in 0..grid.resolution() {
        let theta = grid.angles()[lat * nlon][0];
        let (st, ct) = theta.sin_cos();
        let cot = ct / st;
        let [p, dp, d2p] = legendre_table(lmax, theta);
        for lon in 0..nlon {
            let i = lat * nlon + lon;
            let phi = grid.angles()[i][1];
            for (j, mode) in basis.modes().iter().enumerate() {
                let Mode::Harmonic { l, m } = *mode else {
                    unreachable!()
                };
                let am = m.unsigned_abs() as usize;
                let mf = am as f64;
                // angular factor and its φ-derivatives
                let (a, da, d2a) = if m == 0 {
                    (1.0, 0.0, 0.0)
                } else {
                    let (s, c) = (mf * phi).sin_cos();
                    if m > 0 {
                        (sqrt2 * c, -sqrt2 * mf * s, -sqrt2 * mf * mf * c)
                    } else {
                        (sqrt2 * s, sqrt2 * mf * c, -sqrt2 * mf * mf * s)
                    }
                };
                let (f, f_t, f_tt) = (p[l][am], dp[l][am], d2p[l][am]);
                let val = f * a;
                let d_t = f_t * a;
                let d_p = f * da;
                let d_tt = f_tt * a;
                let d_tp = f_t * da;
                let d_pp = f * d2a;
                value[(i, j)] = val;
                g0[(i, j)] = d_t;
                g1[(i, j)] = d_p / st;
                h00[(i, j)] = d_tt;
                h01[(i, j)] = (d_tp - cot * d_p) / st;
                h11[(i, j)] = d_pp / (st * st) + cot * d_t;
            }
        }
    }
    Tables {
        value,
        gradient: vec![g0, g1],
        hessian: vec![h00, h01, h11],
    }
}
