//! Volumes, cone-volume measures and Brunn-Minkowski type inequality checks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::{lp_combination, wulff_body, BodyRep};
use crate::error::{Error, Result};

/// A report passes iff its normalized margin is at least `-PASS_TOL`.
pub const PASS_TOL: f64 = 1e-9;
/// Normalized margins below this in magnitude count as equality.
pub const EQUALITY_TOL: f64 = 1e-7;

/// Surface-area density `det(∇²h + hI)` per node.
pub fn ma_density(k: &BodyRep) -> Vec<f64> {
    k.det_w().to_vec()
}

/// `∫ h det W`, i.e. `d` times the volume.
pub fn mixed_integral(k: &BodyRep) -> f64 {
    let vals: Vec<f64> = k
        .jets()
        .iter()
        .zip(k.det_w())
        .map(|(j, d)| j.value * d)
        .collect();
    k.disc().grid().integrate(&vals).expect("node count matches")
}

pub fn volume(k: &BodyRep) -> f64 {
    mixed_integral(k) / k.dim().ambient() as f64
}

/// Density of the normalized cone-volume measure; integrates to 1.
pub fn cone_volume_density(k: &BodyRep) -> Vec<f64> {
    let v = volume(k);
    let d = k.dim().ambient() as f64;
    k.jets()
        .iter()
        .zip(k.det_w())
        .map(|(j, w)| j.value * w / (d * v))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InequalityKind {
    #[serde(rename = "BM")]
    Bm,
    #[serde(rename = "LpBM")]
    LpBm,
    #[serde(rename = "pBM")]
    PBm,
    #[serde(rename = "LpMink")]
    LpMink,
}

impl InequalityKind {
    pub fn label(self) -> &'static str {
        match self {
            InequalityKind::Bm => "BM",
            InequalityKind::LpBm => "LpBM",
            InequalityKind::PBm => "pBM",
            InequalityKind::LpMink => "LpMink",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityParams {
    pub p: Option<f64>,
    pub lambda_grid: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub bodies: Vec<String>,
    pub dim: usize,
    pub band: usize,
    pub resolution: usize,
}

/// One evaluated instance of an inequality; `margin` is `(lhs - rhs) / |rhs|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityPoint {
    pub lambda: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Both sides of an inequality at its worst λ, plus every evaluated point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: InequalityKind,
    pub params: InequalityParams,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub equality_flag: bool,
    pub metadata: ReportMetadata,
    pub points: Vec<InequalityPoint>,
}

impl InequalityReport {
    fn build(
        name: InequalityKind,
        p: Option<f64>,
        lambda_grid: Vec<f64>,
        k: &BodyRep,
        l: &BodyRep,
        points: Vec<InequalityPoint>,
    ) -> Self {
        let worst = points
            .iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
            .cloned()
            .expect("at least one point");
        let equality_flag = points.iter().all(|q| q.margin.abs() < EQUALITY_TOL);
        InequalityReport {
            name,
            params: InequalityParams { p, lambda_grid },
            lhs: worst.lhs,
            rhs: worst.rhs,
            margin: worst.margin,
            pass: worst.margin >= -PASS_TOL,
            equality_flag,
            metadata: ReportMetadata {
                bodies: vec![k.name().to_string(), l.name().to_string()],
                dim: k.dim().ambient(),
                band: k.disc().band(),
                resolution: k.disc().grid().resolution(),
            },
            points,
        }
    }

    /// The point evaluated at `lambda`, if any.
    pub fn at(&self, lambda: f64) -> Option<&InequalityPoint> {
        self.points.iter().find(|q| q.lambda == Some(lambda))
    }
}

fn point(lambda: Option<f64>, lhs: f64, rhs: f64) -> InequalityPoint {
    InequalityPoint {
        lambda,
        lhs,
        rhs,
        margin: (lhs - rhs) / rhs.abs(),
    }
}

/// `n` uniform points in `[0, 1]` including both endpoints.
pub fn lambda_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_pair(k: &BodyRep, l: &BodyRep, lambdas: &[f64]) -> Result<()> {
    if k.dim() != l.dim() || k.disc().grid().len() != l.disc().grid().len() {
        return Err(Error::ShapeMismatch {
            expected: k.disc().grid().len(),
            got: l.disc().grid().len(),
        });
    }
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter("empty lambda grid".into()));
    }
    if let Some(bad) = lambdas.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidParameter(format!("lambda {bad} outside [0, 1]")));
    }
    Ok(())
}

/// Log-concave Brunn-Minkowski: `V((1-λ)K + λL) >= V(K)^{1-λ} V(L)^λ`.
pub fn verify_bm(k: &BodyRep, l: &BodyRep, lambdas: &[f64]) -> Result<InequalityReport> {
    check_pair(k, l, lambdas)?;
    let (vk, vl) = (volume(k), volume(l));
    let mut points = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let field = k.field().lerp(lam, l.field());
        let m = BodyRep::from_field(k.disc(), field, "mix")?;
        points.push(point(Some(lam), volume(&m), vk.powf(1.0 - lam) * vl.powf(lam)));
    }
    Ok(InequalityReport::build(InequalityKind::Bm, Some(1.0), lambdas.to_vec(), k, l, points))
}

fn lp_volume(k: &BodyRep, l: &BodyRep, p: f64, lam: f64) -> Result<f64> {
    let g = lp_combination(k, l, p, lam)?;
    Ok(volume(&wulff_body(&g, k.disc())?))
}

/// `L_p` Brunn-Minkowski: `V((1-λ)K +_p λL) >= V(K)^{1-λ} V(L)^λ`.
pub fn verify_lp_bm(k: &BodyRep, l: &BodyRep, p: f64, lambdas: &[f64]) -> Result<InequalityReport> {
    check_pair(k, l, lambdas)?;
    let (vk, vl) = (volume(k), volume(l));
    let points = lambdas
        .iter()
        .map(|&lam| Ok(point(Some(lam), lp_volume(k, l, p, lam)?, vk.powf(1.0 - lam) * vl.powf(lam))))
        .collect::<Result<Vec<_>>>()?;
    Ok(InequalityReport::build(InequalityKind::LpBm, Some(p), lambdas.to_vec(), k, l, points))
}

/// `V((1-λ)K +_p λL) >= ((1-λ)V(K)^{p/d} + λV(L)^{p/d})^{d/p}`.
pub fn verify_p_bm(k: &BodyRep, l: &BodyRep, p: f64, lambdas: &[f64]) -> Result<InequalityReport> {
    if p <= 0.0 {
        return Err(Error::InvalidParameter(format!("p = {p} must be positive")));
    }
    check_pair(k, l, lambdas)?;
    let d = k.dim().ambient() as f64;
    let e = p / d;
    let (vk, vl) = (volume(k), volume(l));
    let points = lambdas
        .iter()
        .map(|&lam| {
            let rhs = ((1.0 - lam) * vk.powf(e) + lam * vl.powf(e)).powf(1.0 / e);
            Ok(point(Some(lam), lp_volume(k, l, p, lam)?, rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InequalityReport::build(InequalityKind::PBm, Some(p), lambdas.to_vec(), k, l, points))
}

/// `(∫ (h_L/h_K)^p dV̄_K)^{1/p} >= (V(L)/V(K))^{1/d}`.
pub fn verify_lp_minkowski(k: &BodyRep, l: &BodyRep, p: f64) -> Result<InequalityReport> {
    if p <= 0.0 {
        return Err(Error::InvalidParameter(format!("p = {p} must be positive")));
    }
    check_pair(k, l, &[0.0])?;
    let dens = cone_volume_density(k);
    let vals: Vec<f64> = k
        .jets()
        .iter()
        .zip(l.jets())
        .zip(&dens)
        .map(|((a, b), w)| (b.value / a.value).powf(p) * w)
        .collect();
    let lhs = k.disc().integrate(&vals)?.powf(1.0 / p);
    let rhs = (volume(l) / volume(k)).powf(1.0 / k.dim().ambient() as f64);
    let points = vec![point(None, lhs, rhs)];
    Ok(InequalityReport::build(InequalityKind::LpMink, Some(p), Vec::new(), k, l, points))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    inequality: &'a str,
    body_k: &'a str,
    body_l: &'a str,
    p: Option<f64>,
    lambda: Option<f64>,
    lhs: f64,
    rhs: f64,
    margin: f64,
    pass: bool,
}

/// One CSV row per (body pair, p, λ).
pub fn write_csv(reports: &[InequalityReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        for q in &r.points {
            w.serialize(CsvRow {
                inequality: r.name.label(),
                body_k: &r.metadata.bodies[0],
                body_l: &r.metadata.bodies[1],
                p: r.params.p,
                lambda: q.lambda,
                lhs: q.lhs,
                rhs: q.rhs,
                margin: q.margin,
                pass: q.margin >= -PASS_TOL,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
