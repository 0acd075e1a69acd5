//! Convex bodies through their support functions.

use std::sync::Arc;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope;
use crate::sphere::{
    tangent_cofactor, tangent_det, tangent_identity, tangent_min_eigenvalue, Dim, Discretization,
    Jet, Mode, SpectralField,
};

/// Minimum admissible smallest eigenvalue of `∇²h + hI`.
pub const EPS_CONV: f64 = 1e-9;

/// A validated, origin-symmetric support function with its per-node jet.
#[derive(Clone, Debug)]
pub struct BodyRep {
    name: String,
    disc: Arc<Discretization>,
    field: SpectralField,
    jets: Vec<Jet>,
    w: Vec<Matrix2<f64>>,
    det_w: Vec<f64>,
    cofactor: Vec<Matrix2<f64>>,
    convexity_margin: f64,
}

impl BodyRep {
    pub fn from_field(disc: &Arc<Discretization>, field: SpectralField, name: impl Into<String>) -> Result<Self> {
        if !field.even {
            return Err(Error::NotSymmetric {
                odd: field.odd_magnitude(disc.basis()),
            });
        }
        let n = disc.dim().sphere();
        let jets = disc.synthesize(&field);
        let min_h = jets.iter().map(|j| j.value).fold(f64::INFINITY, f64::min);
        if min_h <= 0.0 {
            return Err(Error::PositivityViolation { min: min_h });
        }
        let id = tangent_identity(n);
        let w: Vec<Matrix2<f64>> = jets.iter().map(|j| j.hessian + id * j.value).collect();
        let det_w = w.iter().map(|m| tangent_det(m, n)).collect();
        let cofactor = w.iter().map(|m| tangent_cofactor(m, n)).collect();
        let convexity_margin = w
            .iter()
            .map(|m| tangent_min_eigenvalue(m, n))
            .fold(f64::INFINITY, f64::min);
        if convexity_margin <= EPS_CONV {
            return Err(Error::ConvexityViolation {
                margin: convexity_margin,
                threshold: EPS_CONV,
            });
        }
        Ok(BodyRep {
            name: name.into(),
            disc: Arc::clone(disc),
            field,
            jets,
            w,
            det_w,
            cofactor,
            convexity_margin,
        })
    }

    /// Projects node values onto the basis and validates the result.
    pub fn from_values(disc: &Arc<Discretization>, values: &[f64], name: impl Into<String>) -> Result<Self> {
        let field = disc.analyze(values)?;
        Self::from_field(disc, field, name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn disc(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn dim(&self) -> Dim {
        self.disc.dim()
    }

    pub fn field(&self) -> &SpectralField {
        &self.field
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    /// `h` at every node.
    pub fn support_values(&self) -> Vec<f64> {
        self.jets.iter().map(|j| j.value).collect()
    }

    /// `∇²h + hI` per node.
    pub fn w(&self) -> &[Matrix2<f64>] {
        &self.w
    }

    pub fn det_w(&self) -> &[f64] {
        &self.det_w
    }

    /// Cofactor matrix `U` of `W` per node.
    pub fn cofactor(&self) -> &[Matrix2<f64>] {
        &self.cofactor
    }

    pub fn convexity_margin(&self) -> f64 {
        self.convexity_margin
    }

    /// `c·K`.
    pub fn dilate(&self, c: f64) -> Result<BodyRep> {
        if c <= 0.0 {
            return Err(Error::InvalidParameter(format!("dilation factor {c} must be positive")));
        }
        BodyRep::from_field(&self.disc, self.field.scaled(c), format!("{}*{}", c, self.name))
    }

    /// Same body on another discretization of the same dimension (re-sampled
    /// spectrally).
    pub fn rediscretize(&self, disc: &Arc<Discretization>) -> Result<BodyRep> {
        BodyRep::from_field(disc, self.field.with_band(disc.band()), self.name.clone())
    }
}

/// Per-node positive Wulff function; not necessarily a support function.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateField {
    pub dim: Dim,
    pub values: Vec<f64>,
}

impl CandidateField {
    pub fn new(dim: Dim, values: Vec<f64>) -> Result<Self> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::PositivityViolation { min });
        }
        Ok(CandidateField { dim, values })
    }
}

/// Power mean `((1-λ)a^p + λb^p)^{1/p}`, geometric mean for `p = 0`.
pub fn power_mean(a: f64, b: f64, p: f64, lambda: f64) -> f64 {
    if p == 0.0 {
        a.powf(1.0 - lambda) * b.powf(lambda)
    } else {
        ((1.0 - lambda) * a.powf(p) + lambda * b.powf(p)).powf(1.0 / p)
    }
}

/// Node values of the `L_p` combination `(1-λ)·K +_p λ·L` before the Wulff step.
pub fn lp_combination(k: &BodyRep, l: &BodyRep, p: f64, lambda: f64) -> Result<CandidateField> {
    if !Arc::ptr_eq(k.disc(), l.disc()) && k.disc().grid().len() != l.disc().grid().len() {
        return Err(Error::ShapeMismatch {
            expected: k.disc().grid().len(),
            got: l.disc().grid().len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
    }
    if p < 0.0 || p == 1.0 || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0,1) ∪ (1,∞)")));
    }
    let values = k
        .jets()
        .iter()
        .zip(l.jets())
        .map(|(a, b)| power_mean(a.value, b.value, p, lambda))
        .collect();
    CandidateField::new(k.dim(), values)
}

/// Diagnostics of a Wulff construction.
#[derive(Clone, Debug, Serialize)]
pub struct WulffReport {
    /// Nodes whose halfspace does not touch the Wulff body.
    pub truncated_nodes: usize,
    /// `max (g - h_W)` over the nodes before mollification.
    pub max_truncation: f64,
    /// Heat-kernel time used to restore strict convexity (0 if not needed).
    pub smoothing_time: f64,
    /// Sup-norm change of the node values caused by mollification.
    pub mollification_sup: f64,
}

/// Wulff body of `g` with its construction report.
#[derive(Clone, Debug)]
pub struct Wulff {
    pub body: BodyRep,
    pub report: WulffReport,
}

const SMOOTHING_LADDER: [f64; 9] = [1e-6, 3e-6, 1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2];

/// Largest convex body whose support function is at most `g` at every node.
pub fn wulff_body(g: &CandidateField, disc: &Arc<Discretization>) -> Result<BodyRep> {
    wulff_construct(g, disc).map(|w| w.body)
}

/// Halfspace intersection via the dual hull, then projection onto the
/// spectral basis; if the projection is not strictly convex it is smoothed by
/// the heat kernel (which averages rotated copies and so preserves convexity).
pub fn wulff_construct(g: &CandidateField, disc: &Arc<Discretization>) -> Result<Wulff> {
    let grid = disc.grid();
    if g.values.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: g.values.len(),
        });
    }
    let poly = match disc.dim() {
        Dim::Two => polytope::intersect_halfplanes(grid.nodes(), &g.values)?,
        Dim::Three => polytope::intersect_halfspaces(grid.nodes(), &g.values)?,
    };
    let h: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&g.values)
        .map(|(x, gi)| poly.support(x).min(*gi))
        .collect();
    let mut truncated_nodes = 0;
    let mut max_truncation = 0.0f64;
    for (hi, gi) in h.iter().zip(&g.values) {
        let gap = gi - hi;
        if gap > 1e-12 * gi {
            truncated_nodes += 1;
        }
        max_truncation = max_truncation.max(gap);
    }
    let field = disc.analyze(&h)?;
    let projected = disc.values(&field);
    let sup_change = |vals: &[f64]| {
        vals.iter()
            .zip(&h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    };
    let first = match BodyRep::from_field(disc, field.clone(), "wulff") {
        Ok(body) => {
            return Ok(Wulff {
                body,
                report: WulffReport {
                    truncated_nodes,
                    max_truncation,
                    smoothing_time: 0.0,
                    mollification_sup: sup_change(&projected),
                },
            })
        }
        Err(e @ Error::ConvexityViolation { .. }) => e,
        Err(e) => return Err(e),
    };
    let mut last = first;
    for t in SMOOTHING_LADDER {
        let smoothed = field.smoothed(t);
        match BodyRep::from_field(disc, smoothed.clone(), "wulff") {
            Ok(body) => {
                let vals = disc.values(&smoothed);
                return Ok(Wulff {
                    body,
                    report: WulffReport {
                        truncated_nodes,
                        max_truncation,
                        smoothing_time: t,
                        mollification_sup: sup_change(&vals),
                    },
                });
            }
            Err(e @ Error::ConvexityViolation { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Amplitude of one basis mode in a perturbed ball. On the circle,
/// `order >= 0` selects `cos kθ` and `order < 0` selects `sin kθ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeAmplitude {
    pub degree: usize,
    pub order: i64,
    pub value: f64,
}

fn default_rounding() -> f64 {
    0.1
}

/// Closed-form test bodies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum BodySpec {
    Ball {
        radius: f64,
    },
    Ellipsoid {
        semiaxes: Vec<f64>,
    },
    /// `h(x) = (Σ (a_i x_i)^q)^{1/q} + rounding`: the q-norm body with
    /// scales `a_i`, Minkowski-summed with a ball of radius `rounding`.
    SmoothedCube {
        q: u32,
        scales: Vec<f64>,
        #[serde(default = "default_rounding")]
        rounding: f64,
    },
    PerturbedBall {
        radius: f64,
        amplitudes: Vec<ModeAmplitude>,
    },
}

impl BodySpec {
    /// Parses the inline form `kind[:a,b,...]`, e.g. `ball`, `ball:2`,
    /// `ellipsoid:2,1`, `smoothed_cube:4`.
    pub fn parse_inline(s: &str, dim: Dim) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad number '{a}' in body '{s}'")))
                })
                .collect::<Result<_>>()?
        };
        let d = dim.ambient();
        let padded = |mut v: Vec<f64>| {
            while v.len() < d {
                v.push(1.0);
            }
            v
        };
        let spec = match kind {
            "ball" => BodySpec::Ball {
                radius: nums.first().copied().unwrap_or(1.0),
            },
            "ellipsoid" => BodySpec::Ellipsoid {
                semiaxes: padded(nums),
            },
            "smoothed_cube" => {
                let q = nums.first().copied().unwrap_or(4.0);
                BodySpec::SmoothedCube {
                    q: q as u32,
                    scales: padded(nums.iter().skip(1).copied().collect()),
                    rounding: default_rounding(),
                }
            }
            other => return Err(Error::Config(format!("unknown inline body kind '{other}'"))),
        };
        spec.validate(dim)?;
        Ok(spec)
    }

    pub fn validate(&self, dim: Dim) -> Result<()> {
        let d = dim.ambient();
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            BodySpec::Ball { radius } if *radius <= 0.0 => bad(format!("ball radius {radius}")),
            BodySpec::Ellipsoid { semiaxes } if semiaxes.len() != d => {
                bad(format!("ellipsoid needs {d} semiaxes, got {}", semiaxes.len()))
            }
            BodySpec::Ellipsoid { semiaxes } if semiaxes.iter().any(|a| *a <= 0.0) => {
                bad("ellipsoid semiaxes must be positive".into())
            }
            BodySpec::SmoothedCube { q, .. } if *q < 2 || q % 2 != 0 => {
                bad(format!("smoothed cube exponent q = {q} must be even and >= 2"))
            }
            BodySpec::SmoothedCube { scales, .. } if scales.len() != d => {
                bad(format!("smoothed cube needs {d} scales, got {}", scales.len()))
            }
            BodySpec::SmoothedCube { scales, rounding, .. }
                if scales.iter().any(|a| *a <= 0.0) || *rounding < 0.0 =>
            {
                bad("smoothed cube scales must be positive and rounding nonnegative".into())
            }
            BodySpec::PerturbedBall { radius, .. } if *radius <= 0.0 => {
                bad(format!("perturbed ball radius {radius}"))
            }
            BodySpec::PerturbedBall { amplitudes, .. } => {
                for a in amplitudes {
                    if a.degree % 2 == 1 {
                        return bad(format!(
                            "odd mode of degree {} would break origin symmetry",
                            a.degree
                        ));
                    }
                    if dim == Dim::Three && a.order.unsigned_abs() as usize > a.degree {
                        return bad(format!("order {} exceeds degree {}", a.order, a.degree));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Closed-form support function at a unit vector, when one exists.
    pub fn support(&self, x: &[f64; 3], dim: Dim) -> Option<f64> {
        let d = dim.ambient();
        match self {
            BodySpec::Ball { radius } => Some(*radius),
            BodySpec::Ellipsoid { semiaxes } => {
                Some((0..d).map(|i| (semiaxes[i] * x[i]).powi(2)).sum::<f64>().sqrt())
            }
            BodySpec::SmoothedCube { q, scales, rounding } => {
                let s: f64 = (0..d).map(|i| (scales[i] * x[i]).powi(*q as i32)).sum();
                Some(s.powf(1.0 / *q as f64) + rounding)
            }
            BodySpec::PerturbedBall { .. } => None,
        }
    }
}

/// Named catalog entry: `{"name", "kind", "params"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    #[serde(flatten)]
    pub spec: BodySpec,
}

/// Builds a validated body from a catalog entry.
pub fn make_body(entry: &CatalogEntry, disc: &Arc<Discretization>) -> Result<BodyRep> {
    let dim = disc.dim();
    entry.spec.validate(dim)?;
    match &entry.spec {
        BodySpec::PerturbedBall { radius, amplitudes } => {
            let mut field = SpectralField::constant(dim, disc.band(), *radius);
            for a in amplitudes {
                let mode = match dim {
                    Dim::Two => Mode::Fourier {
                        k: a.degree,
                        sine: a.order < 0 && a.degree > 0,
                    },
                    Dim::Three => Mode::Harmonic {
                        l: a.degree,
                        m: a.order,
                    },
                };
                let idx = disc.basis().index_of(mode).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "mode of degree {} exceeds band limit {}",
                        a.degree,
                        disc.band()
                    ))
                })?;
                field.coefficients[idx] += a.value;
            }
            BodyRep::from_field(disc, field, entry.name.clone())
        }
        spec => {
            let values = disc
                .grid()
                .sample(|x| spec.support(x, dim).unwrap_or(f64::NAN));
            BodyRep::from_values(disc, &values, entry.name.clone())
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Catalog {
    pub entries: Vec<CatalogEntry>,
}

impl Catalog {
    /// Built-in bodies, with dimension-appropriate parameters.
    pub fn builtin(dim: Dim) -> Catalog {
        let entry = |name: &str, spec: BodySpec| CatalogEntry {
            name: name.to_string(),
            spec,
        };
        let entries = match dim {
            Dim::Two => vec![
                entry("ball", BodySpec::Ball { radius: 1.0 }),
                entry("ellipsoid", BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] }),
                entry(
                    "smoothed_cube",
                    BodySpec::SmoothedCube {
                        q: 4,
                        scales: vec![1.0, 1.0],
                        rounding: default_rounding(),
                    },
                ),
                entry(
                    "perturbed_ball",
                    BodySpec::PerturbedBall {
                        radius: 1.0,
                        amplitudes: vec![
                            ModeAmplitude { degree: 2, order: 0, value: 0.1 },
                            ModeAmplitude { degree: 4, order: -1, value: 0.02 },
                        ],
                    },
                ),
            ],
            Dim::Three => vec![
                entry("ball", BodySpec::Ball { radius: 1.0 }),
                entry("ellipsoid", BodySpec::Ellipsoid { semiaxes: vec![1.5, 1.0, 1.0] }),
                entry(
                    "smoothed_cube",
                    BodySpec::SmoothedCube {
                        q: 4,
                        scales: vec![1.0, 1.0, 1.0],
                        rounding: default_rounding(),
                    },
                ),
                entry(
                    "perturbed_ball",
                    BodySpec::PerturbedBall {
                        radius: 1.0,
                        amplitudes: vec![
                            ModeAmplitude { degree: 2, order: 0, value: 0.1 },
                            ModeAmplitude { degree: 2, order: 1, value: 0.05 },
                            ModeAmplitude { degree: 4, order: -2, value: 0.02 },
                        ],
                    },
                ),
            ],
        };
        Catalog { entries }
    }

    pub fn from_json(text: &str) -> Result<Catalog> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Catalog> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Appends `other`, rejecting names that already exist.
    pub fn merge(mut self, other: Catalog) -> Result<Catalog> {
        for e in other.entries {
            if self.get(&e.name).is_some() {
                return Err(Error::Config(format!("duplicate catalog body '{}'", e.name)));
            }
            self.entries.push(e);
        }
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Looks a body up by name, falling back to the inline `kind:args` form.
    pub fn resolve(&self, name: &str, dim: Dim) -> Result<CatalogEntry> {
        if let Some(e) = self.get(name) {
            return Ok(e.clone());
        }
        Ok(CatalogEntry {
            name: name.to_string(),
            spec: BodySpec::parse_inline(name, dim)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn disc2() -> Arc<Discretization> {
        Discretization::shared(Dim::Two, 64).unwrap()
    }

    fn entry(spec: BodySpec) -> CatalogEntry {
        CatalogEntry {
            name: "test".into(),
            spec,
        }
    }

    #[test]
    fn unit_disc() {
        let b = make_body(&entry(BodySpec::Ball { radius: 1.0 }), &disc2()).unwrap();
        for (h, d) in b.support_values().iter().zip(b.det_w()) {
            assert_abs_diff_eq!(*h, 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(*d, 1.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(b.convexity_margin(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn ellipse_support_values() {
        let d = disc2();
        let b = make_body(&entry(BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] }), &d).unwrap();
        let h = b.support_values();
        let quarter = d.grid().len() / 4;
        assert_abs_diff_eq!(h[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[quarter], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cofactor_identity() {
        for dim in [Dim::Two, Dim::Three] {
            let d = Discretization::shared(dim, if dim == Dim::Two { 64 } else { 12 }).unwrap();
            for e in Catalog::builtin(dim).entries {
                let b = make_body(&e, &d).unwrap();
                let id = tangent_identity(dim.sphere());
                for ((w, u), det) in b.w().iter().zip(b.cofactor()).zip(b.det_w()) {
                    let r = (w * u - id * *det).amax();
                    assert!(r < 1e-10, "{}: cofactor residual {r}", e.name);
                }
            }
        }
    }

    #[test]
    fn odd_perturbation_is_rejected() {
        let spec = BodySpec::PerturbedBall {
            radius: 1.0,
            amplitudes: vec![ModeAmplitude { degree: 3, order: 0, value: 0.01 }],
        };
        assert!(make_body(&entry(spec), &disc2()).is_err());
        // a non-symmetric field handed in directly
        let d = disc2();
        let mut f = SpectralField::constant(Dim::Two, 64, 1.0);
        f.coefficients[1] = 0.1;
        f.even = false;
        assert!(matches!(BodyRep::from_field(&d, f, "x"), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn nonconvex_field_is_rejected() {
        let d = disc2();
        let mut f = SpectralField::constant(Dim::Two, 64, 1.0);
        // 1 + 0.2 cos 4θ has h'' + h = 1 - 3.0 cos 4θ < 0 somewhere
        f.coefficients[7] = 0.2;
        assert!(matches!(
            BodyRep::from_field(&d, f, "x"),
            Err(Error::ConvexityViolation { .. })
        ));
        let neg = SpectralField::constant(Dim::Two, 64, -1.0);
        assert!(matches!(
            BodyRep::from_field(&d, neg, "x"),
            Err(Error::PositivityViolation { .. })
        ));
    }

    #[test]
    fn lp_combination_closed_forms() {
        let d = disc2();
        let b1 = make_body(&entry(BodySpec::Ball { radius: 1.0 }), &d).unwrap();
        let b2 = make_body(&entry(BodySpec::Ball { radius: 2.0 }), &d).unwrap();
        let be = make_body(&entry(BodySpec::Ball { radius: std::f64::consts::E }), &d).unwrap();
        let g = lp_combination(&b1, &b2, 2.0, 0.5).unwrap();
        assert!(g.values.iter().all(|v| (v - 2.5f64.sqrt()).abs() < 1e-12));
        let g = lp_combination(&b1, &be, 0.0, 0.5).unwrap();
        assert!(g.values.iter().all(|v| (v - std::f64::consts::E.sqrt()).abs() < 1e-12));
        let k = make_body(&entry(BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] }), &d).unwrap();
        for p in [0.0, 0.5, 3.0] {
            let g = lp_combination(&k, &k, p, 0.3).unwrap();
            for (a, b) in g.values.iter().zip(k.support_values()) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-13);
            }
        }
        assert!(lp_combination(&k, &k, 1.0, 0.3).is_err());
        assert!(lp_combination(&k, &k, 0.5, 1.3).is_err());
    }

    #[test]
    fn dilation() {
        let d = disc2();
        let k = make_body(&entry(BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] }), &d).unwrap();
        let k3 = k.dilate(3.0).unwrap();
        assert_abs_diff_eq!(k3.convexity_margin(), 3.0 * k.convexity_margin(), epsilon = 1e-12);
        let b = make_body(&entry(BodySpec::Ball { radius: 1.0 }), &d).unwrap();
        let b2 = b.dilate(2.0).unwrap();
        assert!(b2.support_values().iter().all(|h| (h - 2.0).abs() < 1e-13));
        assert!(k.dilate(0.0).is_err());
    }

    #[test]
    fn wulff_of_support_function_is_itself() {
        for dim in [Dim::Two, Dim::Three] {
            let d = Discretization::shared(dim, if dim == Dim::Two { 64 } else { 12 }).unwrap();
            for e in Catalog::builtin(dim).entries {
                let k = make_body(&e, &d).unwrap();
                let g = CandidateField::new(dim, k.support_values()).unwrap();
                let w = wulff_construct(&g, &d).unwrap();
                assert_eq!(w.report.smoothing_time, 0.0);
                let err = w
                    .body
                    .support_values()
                    .iter()
                    .zip(k.support_values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err < 1e-6, "{} dim {:?}: {err}", e.name, dim);
            }
        }
    }

    #[test]
    fn wulff_drops_antipodal_spikes() {
        // oversampled circle so that the discrete circumscribed polygon is
        // within 1e-6 of the disc near the dropped constraints
        let d = Arc::new(Discretization::with_resolution(Dim::Two, 64, 2048).unwrap());
        let m = d.grid().len();
        let mut g = vec![1.0; m];
        g[0] = 3.0;
        g[m / 2] = 3.0;
        let w = wulff_construct(&CandidateField::new(Dim::Two, g).unwrap(), &d).unwrap();
        assert_eq!(w.report.truncated_nodes, 2);
        let err = w
            .body
            .support_values()
            .iter()
            .map(|h| (h - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "sup error {err}");
    }

    #[test]
    fn catalog_json_field_names() {
        let text = r#"[{"name": "egg", "kind": "ellipsoid", "params": {"semiaxes": [3, 1]}},
                       {"name": "cube8", "kind": "smoothed_cube", "params": {"q": 8, "scales": [1, 1]}}]"#;
        let c = Catalog::from_json(text).unwrap();
        assert_eq!(c.entries.len(), 2);
        assert_eq!(c.entries[0].spec, BodySpec::Ellipsoid { semiaxes: vec![3.0, 1.0] });
        let back = serde_json::to_value(&c.entries[0]).unwrap();
        assert_eq!(back["kind"], "ellipsoid");
        assert_eq!(back["params"]["semiaxes"][0], 3.0);
        let dup = Catalog::builtin(Dim::Two).merge(Catalog::from_json(
            r#"[{"name": "ball", "kind": "ball", "params": {"radius": 2}}]"#,
        ).unwrap());
        assert!(dup.is_err());
    }

    #[test]
    fn inline_specs() {
        assert_eq!(
            BodySpec::parse_inline("ellipsoid:2,1", Dim::Two).unwrap(),
            BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0] }
        );
        assert_eq!(
            BodySpec::parse_inline("ellipsoid:2", Dim::Three).unwrap(),
            BodySpec::Ellipsoid { semiaxes: vec![2.0, 1.0, 1.0] }
        );
        assert!(BodySpec::parse_inline("torus", Dim::Two).is_err());
        assert!(BodySpec::parse_inline("smoothed_cube:3", Dim::Two).is_err());
    }
}
