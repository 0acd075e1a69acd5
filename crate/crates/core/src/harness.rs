//! Experiment configuration, dispatch and report emission behind the CLI.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::body::{make_body, BodyRep, Catalog, CatalogEntry};
use crate::error::{Error, Result};
use crate::lpsolver::{homotopy_solve, newton_solve, uniqueness_probe, Forcing, NewtonOptions, Schedule};
use crate::measure::{lambda_grid, verify_bm, verify_lp_bm, verify_lp_minkowski, verify_p_bm, write_csv, InequalityReport};
use crate::spectrum::{assemble_pencil, solve_spectrum, structure_report, third_eigenvalue, Subspace};
use crate::sphere::{Dim, Discretization, SpectralField};
use crate::stability::{equivalence_experiment, random_even_field, stability_report, EquivalenceReport};
use crate::suite::{run_suite, SuiteName};

pub const SCHEMA: &str = "bmk/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Spectrum,
    Verify,
    Stability,
    Solve,
    Equivalence,
    Catalog,
    Suite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    Bm,
    LpBm,
    PBm,
    LpMink,
}

/// Forcing taken from a catalog body, `f = h^{1-p} det(∇²h + hI)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyForcing {
    pub from_body: String,
    pub p: f64,
}

/// Every key is optional; a file config is overlaid by command-line flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operation: Option<Operation>,
    pub dim: Option<usize>,
    pub modes: Option<usize>,
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub json: Option<bool>,
    /// Extra catalog file merged with the built-ins.
    pub catalog: Option<PathBuf>,
    /// Inline catalog entries merged with the built-ins.
    pub entries: Option<Vec<CatalogEntry>>,
    pub body: Option<String>,
    pub bodies: Option<Vec<String>>,
    pub inequality: Option<Inequality>,
    pub p: Option<f64>,
    pub p_star: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<usize>,
    pub trials: Option<usize>,
    pub noise: Option<f64>,
    pub tol: Option<f64>,
    pub count: Option<usize>,
    pub subspace: Option<Subspace>,
    /// `random` (seeded) or `h`.
    pub phi: Option<String>,
    pub f_const: Option<f64>,
    pub f_coeffs: Option<Vec<f64>>,
    pub f: Option<BodyForcing>,
    pub suite: Option<SuiteName>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        ExperimentConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Keys set in `top` win.
    pub fn overlay(self, top: ExperimentConfig) -> ExperimentConfig {
        let base = self;
        overlay!(base, top; operation, dim, modes, resolution, seed, out, json, catalog, entries,
            body, bodies, inequality, p, p_star, lambda, lambda_grid, trials, noise, tol, count,
            subspace, phi, f_const, f_coeffs, f, suite)
    }

    pub fn dimension(&self) -> Result<Dim> {
        Dim::new(self.dim.unwrap_or(2)).map_err(|_| key_error("dim", "must be 2 or 3"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn discretization(&self) -> Result<Arc<Discretization>> {
        let dim = self.dimension()?;
        let band = self.modes.unwrap_or(dim.default_band());
        if band < 2 {
            return Err(key_error("modes", "must be at least 2"));
        }
        match self.resolution {
            None => Discretization::shared(dim, band),
            Some(r) => Ok(Arc::new(
                Discretization::with_resolution(dim, band, r).map_err(|e| key_error("resolution", e))?,
            )),
        }
    }

    /// Built-ins for the configured dimension plus any custom entries.
    pub fn catalog(&self) -> Result<Catalog> {
        let mut cat = Catalog::builtin(self.dimension()?);
        if let Some(path) = &self.catalog {
            let extra = Catalog::load(path).map_err(|e| key_error("catalog", e))?;
            cat = cat.merge(extra).map_err(|e| key_error("catalog", e))?;
        }
        if let Some(entries) = &self.entries {
            cat = cat
                .merge(Catalog { entries: entries.clone() })
                .map_err(|e| key_error("entries", e))?;
        }
        Ok(cat)
    }

    /// Checks the keys the configured operation reads.
    pub fn validate(&self) -> Result<()> {
        self.dimension()?;
        positive("tol", self.tol)?;
        positive("noise", self.noise)?;
        if let Some(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(key_error("lambda", "must lie in [0, 1]"));
            }
        }
        if let Some(p) = self.p_star {
            if !(0.0..1.0).contains(&p) {
                return Err(key_error("p_star", "must lie in [0, 1)"));
            }
        }
        if self.lambda_grid == Some(0) {
            return Err(key_error("lambda_grid", "must be at least 1"));
        }
        if self.trials == Some(0) {
            return Err(key_error("trials", "must be at least 1"));
        }
        let cat = self.catalog()?;
        let dim = self.dimension()?;
        for name in self.body.iter().chain(self.bodies.iter().flatten()) {
            cat.resolve(name, dim).map_err(|e| key_error("body", e))?;
        }
        if let Some(f) = &self.f {
            cat.resolve(&f.from_body, dim).map_err(|e| key_error("f", e))?;
        }
        if let Some(phi) = &self.phi {
            if phi != "random" && phi != "h" {
                return Err(key_error("phi", "expected random or h"));
            }
        }
        Ok(())
    }
}

fn key_error(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("key `{key}`: {msg}"))
}

fn positive(key: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0) => Err(key_error(key, "must be positive")),
        _ => Ok(()),
    }
}

/// A finished run: the JSON report, whether every check passed, and a
/// human-readable summary.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Value,
    pub pass: bool,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    dim: Dim,
    disc: Arc<Discretization>,
    catalog: Catalog,
}

impl Ctx {
    fn body(&self, name: &str) -> Result<BodyRep> {
        make_body(&self.catalog.resolve(name, self.dim)?, &self.disc)
    }

    fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.cfg.body.iter().cloned().collect();
        v.extend(self.cfg.bodies.iter().flatten().cloned());
        v
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed())
    }

    fn envelope(&self, op: Operation, pass: bool, result: Value) -> Value {
        json!({
            "schema": SCHEMA,
            "operation": op,
            "seed": self.cfg.seed(),
            "dim": self.dim.ambient(),
            "band": self.disc.band(),
            "resolution": self.disc.grid().resolution(),
            "pass": pass,
            "result": result,
        })
    }
}

/// Dispatches on `cfg.operation` and writes the report (and CSV where the
/// operation produces one) when `out` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let op = cfg
        .operation
        .ok_or_else(|| key_error("operation", "missing (pass a subcommand or set it in the config)"))?;
    let dim = cfg.dimension()?;
    let disc = if matches!(op, Operation::Catalog | Operation::Suite) {
        Discretization::shared(dim, 2)?
    } else {
        cfg.discretization()?
    };
    let ctx = Ctx {
        cfg: cfg.clone(),
        dim,
        disc,
        catalog: cfg.catalog()?,
    };
    let (outcome, csv) = match op {
        Operation::Spectrum => (spectrum(&ctx)?, None),
        Operation::Verify => verify(&ctx)?,
        Operation::Stability => (stability(&ctx)?, None),
        Operation::Solve => (solve(&ctx)?, None),
        Operation::Equivalence => equivalence(&ctx)?,
        Operation::Catalog => (catalog(&ctx), None),
        Operation::Suite => (suite(&ctx)?, None),
    };
    if let Some(out) = &cfg.out {
        write_report(out, &outcome.report)?;
        if let Some(write) = csv {
            write(&out.with_extension("csv"))?;
        }
    }
    Ok(outcome)
}

type CsvWriter = Box<dyn FnOnce(&Path) -> Result<()>>;

pub fn write_report(path: &Path, report: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn spectrum(ctx: &Ctx) -> Result<Outcome> {
    let name = ctx.cfg.body.clone().unwrap_or_else(|| "ball".into());
    let k = ctx.body(&name)?;
    let subspace = ctx.cfg.subspace.unwrap_or(Subspace::Full);
    let count = ctx.cfg.count.unwrap_or(8).max(3);
    let res = solve_spectrum(&assemble_pencil(&k, subspace)?, count)?;
    let third = third_eigenvalue(&k)?;
    let structure = structure_report(&k, ctx.cfg.tol.unwrap_or(1e-5))?;
    let pass = structure.holds() && third.satisfies_a2;
    let summary = format!(
        "{name}: eigenvalues {}\nlambda3 = {:.12} (even {:.12}, full {:.12})\nstructure {}",
        res.eigenvalues.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(", "),
        third.lambda3,
        third.even,
        third.full,
        if structure.holds() { "holds" } else { "VIOLATED" }
    );
    let result = json!({
        "body": name,
        "lambda3": third.lambda3,
        "spectrum": res,
        "third_eigenvalue": third,
        "structure": structure,
    });
    Ok(Outcome {
        report: ctx.envelope(Operation::Spectrum, pass, result),
        pass,
        summary,
    })
}

fn verify(ctx: &Ctx) -> Result<(Outcome, Option<CsvWriter>)> {
    let kind = ctx
        .cfg
        .inequality
        .ok_or_else(|| key_error("inequality", "missing (bm, lp-bm, p-bm or lp-mink)"))?;
    let names = ctx.names();
    if names.len() < 2 {
        return Err(key_error("bodies", "need at least two bodies"));
    }
    let bodies: Vec<BodyRep> = names.iter().map(|n| ctx.body(n)).collect::<Result<_>>()?;
    let grid = lambda_grid(ctx.cfg.lambda_grid.unwrap_or(11));
    let p = match (kind, ctx.cfg.p) {
        (Inequality::Bm, _) => 1.0,
        (_, Some(p)) => p,
        (_, None) => return Err(key_error("p", "required for this inequality")),
    };
    let mut reports: Vec<InequalityReport> = Vec::new();
    for i in 0..bodies.len() {
        for j in i + 1..bodies.len() {
            let (k, l) = (&bodies[i], &bodies[j]);
            reports.push(match kind {
                Inequality::Bm => verify_bm(k, l, &grid)?,
                Inequality::LpBm => verify_lp_bm(k, l, p, &grid)?,
                Inequality::PBm => verify_p_bm(k, l, p, &grid)?,
                Inequality::LpMink => verify_lp_minkowski(k, l, p)?,
            });
        }
    }
    let pass = reports.iter().all(|r| r.pass);
    let mut summary = String::new();
    for r in &reports {
        let _ = writeln!(
            summary,
            "{} {} vs {}: worst margin {:.3e} {}{}",
            r.name.label(),
            r.metadata.bodies[0],
            r.metadata.bodies[1],
            r.margin,
            if r.pass { "pass" } else { "FAIL" },
            if r.equality_flag { " (equality)" } else { "" }
        );
    }
    let result = if reports.len() == 1 {
        serde_json::to_value(&reports[0])?
    } else {
        json!({ "reports": reports })
    };
    let report = ctx.envelope(Operation::Verify, pass, result);
    let csv: CsvWriter = Box::new(move |path: &Path| write_csv(&reports, path));
    Ok((
        Outcome {
            report,
            pass,
            summary: summary.trim_end().to_string(),
        },
        Some(csv),
    ))
}

fn perturbation(ctx: &Ctx, k: &BodyRep) -> Result<SpectralField> {
    match ctx.cfg.phi.as_deref().unwrap_or("random") {
        "h" => Ok(k.field().clone()),
        _ => random_even_field(&ctx.disc, &mut ctx.rng()),
    }
}

fn stability(ctx: &Ctx) -> Result<Outcome> {
    let name = ctx.cfg.body.clone().unwrap_or_else(|| "ball".into());
    let k = ctx.body(&name)?;
    let phi = perturbation(ctx, &k)?;
    let r = stability_report(&k, &phi, ctx.cfg.p_star.unwrap_or(0.0), ctx.cfg.lambda.unwrap_or(0.5))?;
    let fd_rel = ((r.i2_fd - r.i2) / r.i2).abs();
    // I'' vanishes identically along dilations; compare on the scale of I(0) there.
    let fd_ok = (r.i2_fd - r.i2).abs() <= 1e-4 * r.i2.abs().max(1e-4 * r.i0.abs());
    let pass = (r.stable || !r.lambda3_at_least_one) && r.i1.abs() < 1e-10 && fd_ok;
    let summary = format!(
        "{name}: stable-condition margin {:.6e} ({})\nI''(0) = {:.9e}, finite difference {:.9e} (relative {fd_rel:.1e})\nlambda3 = {:.9}, inf J = {:.9}",
        r.margin,
        if r.stable { "stable" } else { "unstable" },
        r.i2,
        r.i2_fd,
        r.lambda3,
        r.inf_j
    );
    Ok(Outcome {
        report: ctx.envelope(Operation::Stability, pass, serde_json::to_value(&r)?),
        pass,
        summary,
    })
}

fn forcing(ctx: &Ctx) -> Result<(Forcing, Option<BodyRep>)> {
    let (dim, band) = (ctx.dim, ctx.disc.band());
    let set = [ctx.cfg.f_const.is_some(), ctx.cfg.f_coeffs.is_some(), ctx.cfg.f.is_some()];
    if set.iter().filter(|x| **x).count() > 1 {
        return Err(key_error("f", "give only one of f_const, f_coeffs, f"));
    }
    if let Some(c) = &ctx.cfg.f_coeffs {
        let n = ctx.disc.basis().len();
        if c.len() > n {
            return Err(key_error("f_coeffs", format!("{} coefficients exceed the {n} basis modes", c.len())));
        }
        let mut full = c.clone();
        full.resize(n, 0.0);
        let field = SpectralField::from_coefficients(dim, band, full).map_err(|e| key_error("f_coeffs", e))?;
        return Ok((Forcing::Field(field), None));
    }
    if let Some(f) = &ctx.cfg.f {
        let k = ctx.body(&f.from_body)?;
        return Ok((Forcing::from_body(&k, f.p), Some(k)));
    }
    let c = ctx.cfg.f_const.unwrap_or(1.0);
    if !(c > 0.0) {
        return Err(key_error("f_const", "must be positive"));
    }
    Ok((Forcing::constant(dim, band, c), None))
}

fn solve(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.cfg.p.ok_or_else(|| key_error("p", "required"))?;
    if !(0.0..1.0).contains(&p) {
        return Err(key_error("p", "must lie in [0, 1)"));
    }
    let (f, body) = forcing(ctx)?;
    let tol = ctx.cfg.tol.unwrap_or(1e-10);
    let opts = NewtonOptions { tol, ..NewtonOptions::default() };
    let schedule = Schedule { newton: opts, ..Schedule::default() };
    let p_star = match ctx.cfg.p_star {
        Some(x) if x > 0.0 => x,
        _ => 0.5,
    };
    let trace = homotopy_solve(&ctx.disc, &f, p, p_star, schedule)?;
    let solution = trace.solution()?.clone();
    let residual = trace.last().residual_sup;
    let mut result = json!({
        "p": p,
        "p_star": p_star,
        "converged": trace.converged,
        "residual_sup": residual,
        "solution": solution,
        "trace": trace.steps.iter().map(|s| json!({
            "t": s.t, "p_t": s.p_t, "newton_iters": s.newton_iters, "residual_sup": s.residual_sup,
            "bound_low": s.bound_low, "bound_high": s.bound_high, "norm_C2alpha_proxy": s.norm_c2alpha_proxy,
        })).collect::<Vec<_>>(),
    });
    let mut pass = trace.converged && residual < tol;
    let mut summary = format!(
        "homotopy: {} steps, converged {}, residual {residual:.3e}",
        trace.steps.len(),
        trace.converged
    );
    if let Some(k) = &body {
        let err = ctx
            .disc
            .values(&solution.axpy(-1.0, k.field()))
            .iter()
            .fold(0.0f64, |a, x| a.max(x.abs()));
        result["body_error"] = json!(err);
        let _ = write!(summary, "\nsup distance to {}: {err:.3e}", k.name());
    }
    if let Some(trials) = ctx.cfg.trials {
        let base = newton_solve(&ctx.disc, &f, p, &solution, opts)?;
        let noise = ctx.cfg.noise.unwrap_or(0.05);
        let probe = uniqueness_probe(&ctx.disc, &f, p, &base, trials, noise, opts, &mut ctx.rng())?;
        pass &= probe.clusters.len() <= 1;
        result["uniqueness"] = json!({
            "trials": trials,
            "noise": noise,
            "converged": probe.converged,
            "failed": probe.failed,
            "clusters": probe.clusters.len(),
        });
        let _ = write!(
            summary,
            "\nuniqueness probe: {} cluster(s) from {} converged trials",
            probe.clusters.len(),
            probe.converged
        );
    }
    Ok(Outcome {
        report: ctx.envelope(Operation::Solve, pass, result),
        pass,
        summary,
    })
}

fn equivalence(ctx: &Ctx) -> Result<(Outcome, Option<CsvWriter>)> {
    let mut names = ctx.names();
    if names.is_empty() {
        names = ctx.catalog.entries.iter().map(|e| e.name.clone()).collect();
    }
    let p_star = ctx.cfg.p_star.unwrap_or(0.0);
    let trials = ctx.cfg.trials.unwrap_or(100);
    let mut rng = ctx.rng();
    let mut reports: Vec<EquivalenceReport> = Vec::new();
    for n in &names {
        reports.push(equivalence_experiment(&ctx.body(n)?, p_star, trials, &mut rng)?);
    }
    let pass = reports.iter().all(|r| r.consistent && r.verdicts_agree);
    let mut summary = String::new();
    for r in &reports {
        let _ = writeln!(
            summary,
            "{}: lambda3 {:.9}, min margin {:.3e}, sampled {}, spectral {}{}",
            r.body,
            r.lambda3,
            r.min_margin,
            if r.empirical_stable { "stable" } else { "unstable" },
            if r.spectral_stable { "stable" } else { "unstable" },
            if r.consistent { "" } else { " INCONSISTENT" }
        );
    }
    let report = ctx.envelope(Operation::Equivalence, pass, json!({ "p_star": p_star, "reports": reports }));
    let csv: CsvWriter = Box::new(move |path: &Path| {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["body", "trial", "lhs", "rhs", "margin"])?;
        for r in &reports {
            for t in &r.trials {
                w.write_record([
                    r.body.clone(),
                    t.trial.to_string(),
                    t.lhs.to_string(),
                    t.rhs.to_string(),
                    t.margin.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    });
    Ok((
        Outcome {
            report,
            pass,
            summary: summary.trim_end().to_string(),
        },
        Some(csv),
    ))
}

/// Tab-separated `name kind params` rows in catalog order.
pub fn catalog_table(cat: &Catalog) -> String {
    let mut s = String::from("name\tkind\tparams\n");
    for e in &cat.entries {
        let v = serde_json::to_value(&e.spec).unwrap_or(Value::Null);
        let _ = writeln!(s, "{}\t{}\t{}", e.name, v["kind"].as_str().unwrap_or(""), v["params"]);
    }
    s.trim_end().to_string()
}

fn catalog(ctx: &Ctx) -> Outcome {
    Outcome {
        report: serde_json::to_value(&ctx.catalog.entries).unwrap_or(Value::Null),
        pass: true,
        summary: catalog_table(&ctx.catalog),
    }
}

fn suite(ctx: &Ctx) -> Result<Outcome> {
    let name = ctx.cfg.suite.unwrap_or(SuiteName::Quick);
    let results = run_suite(name, ctx.cfg.seed());
    let pass = results.iter().all(|r| r.pass);
    let mut summary = results.iter().map(|r| r.line()).collect::<Vec<_>>().join("\n");
    let passed = results.iter().filter(|r| r.pass).count();
    let _ = write!(summary, "\n{passed}/{} criteria passed", results.len());
    let report = json!({
        "schema": SCHEMA,
        "operation": Operation::Suite,
        "suite": name,
        "seed": ctx.cfg.seed(),
        "pass": pass,
        "criteria": results,
    });
    Ok(Outcome { report, pass, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_json(r#"{"dimm": 2}"#).unwrap_err().to_string();
        assert!(err.contains("dimm"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let file = cfg(r#"{"dim": 3, "seed": 4, "body": "ball"}"#);
        let flags = ExperimentConfig { dim: Some(2), ..Default::default() };
        let merged = file.overlay(flags);
        assert_eq!(merged.dim, Some(2));
        assert_eq!(merged.seed, Some(4));
        assert_eq!(merged.body.as_deref(), Some("ball"));
    }

    #[test]
    fn validation_names_keys() {
        let bad = [
            (r#"{"tol": -1}"#, "tol"),
            (r#"{"dim": 4}"#, "dim"),
            (r#"{"body": "no_such_body"}"#, "body"),
            (r#"{"lambda": 2}"#, "lambda"),
            (r#"{"phi": "cos"}"#, "phi"),
        ];
        for (text, key) in bad {
            let err = cfg(text).validate().unwrap_err().to_string();
            assert!(err.contains(key), "{text}: {err}");
        }
    }

    #[test]
    fn ball_spectrum_report() {
        let c = cfg(r#"{"operation": "spectrum", "body": "ball", "dim": 2}"#);
        let out = run(&c).unwrap();
        assert!(out.pass);
        assert_eq!(out.report["schema"], SCHEMA);
        assert_eq!(out.report["seed"], 0);
        assert!((out.report["result"]["lambda3"].as_f64().unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn duplicate_entries_rejected() {
        let c = cfg(r#"{"operation": "catalog", "entries": [{"name": "ball", "kind": "ball", "params": {"radius": 2}}]}"#);
        assert!(matches!(run(&c), Err(Error::Config(_))));
    }

    #[test]
    fn catalog_lists_builtins_in_order() {
        let out = run(&cfg(r#"{"operation": "catalog"}"#)).unwrap();
        let names: Vec<&str> = out.report.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
        assert_eq!(names, ["ball", "ellipsoid", "smoothed_cube", "perturbed_ball"]);
        assert_eq!(out.summary.lines().count(), 5);
    }

    #[test]
    fn verify_needs_p() {
        let c = cfg(r#"{"operation": "verify", "inequality": "lp-bm", "bodies": ["ball", "ellipsoid"]}"#);
        assert!(run(&c).unwrap_err().to_string().contains("`p`"));
    }

    #[test]
    fn constant_forcing_solves_to_one() {
        let c = cfg(r#"{"operation": "solve", "f_const": 1, "p": 0.5}"#);
        let out = run(&c).unwrap();
        assert!(out.pass);
        let coeffs = out.report["result"]["solution"]["coefficients"].as_array().unwrap();
        let unit = SpectralField::constant(Dim::Two, Dim::Two.default_band(), 1.0).coefficients[0];
        assert!((coeffs[0].as_f64().unwrap() - unit).abs() < 1e-10);
        assert!(coeffs[1..].iter().all(|c| c.as_f64().unwrap().abs() < 1e-10));
    }
}
