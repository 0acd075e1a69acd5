use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bmk::harness::{run, BodyForcing, ExperimentConfig, Inequality, Operation};
use bmk::spectrum::Subspace;
use bmk::suite::SuiteName;

/// Convex-body spectra, Brunn-Minkowski checks and the even L_p Minkowski solver.
#[derive(Parser, Debug)]
#[command(name = "bmk", version)]
struct Cli {
    /// Ambient dimension (2 or 3).
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Band limit of the spectral basis.
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report path; batch runs also write a CSV next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the full JSON report instead of a summary.
    #[arg(long, global = true)]
    json: bool,
    /// JSON config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra catalog file merged with the built-in bodies.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues of the linearized operator at a body.
    Spectrum {
        #[arg(long)]
        body: Option<String>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, value_enum)]
        subspace: Option<SubspaceArg>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Check an inequality over every pair of the given bodies.
    Verify {
        #[arg(value_enum)]
        inequality: InequalityArg,
        #[arg(long, num_args = 2.., required = true)]
        bodies: Vec<String>,
        #[arg(long)]
        p: Option<f64>,
        /// Number of equally spaced λ in [0, 1].
        #[arg(long)]
        lambda_grid: Option<usize>,
    },
    /// Stable condition, second variation and inf J for one perturbation.
    Stability {
        #[arg(long)]
        body: Option<String>,
        #[arg(long)]
        p_star: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// `random` (seeded) or `h`.
        #[arg(long)]
        phi: Option<String>,
    },
    /// Solve det(∇²u + uI) = f u^{p-1} by continuation from u ≡ 1.
    Solve {
        #[command(flatten)]
        forcing: ForcingArgs,
        #[arg(long)]
        p: Option<f64>,
        /// Starting exponent of the continuation path.
        #[arg(long)]
        p_star: Option<f64>,
        /// Run a uniqueness probe with this many perturbed starts.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Sampled stable condition against the λ₃ >= 1 verdict.
    Equivalence {
        #[arg(long, num_args = 1..)]
        bodies: Vec<String>,
        #[arg(long)]
        p_star: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// List the body catalog.
    Catalog,
    /// Run the acceptance or quick suite.
    Suite {
        #[arg(value_enum, default_value = "quick")]
        name: SuiteArg,
    },
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct ForcingArgs {
    #[arg(long)]
    f_const: Option<f64>,
    /// Comma-separated spectral coefficients of f.
    #[arg(long, value_delimiter = ',')]
    f_coeffs: Option<Vec<f64>>,
    /// f = h^{1-p} det(∇²h + hI) for this body, with p from --p.
    #[arg(long)]
    from_body: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InequalityArg {
    Bm,
    LpBm,
    PBm,
    LpMink,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SubspaceArg {
    Full,
    Even,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Acceptance,
    Quick,
}

fn non_empty(v: Vec<String>) -> Option<Vec<String>> {
    (!v.is_empty()).then_some(v)
}

fn flags(cli: Cli) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        dim: cli.dim,
        modes: cli.modes,
        seed: cli.seed,
        out: cli.out,
        json: cli.json.then_some(true),
        catalog: cli.catalog,
        ..Default::default()
    };
    let Some(cmd) = cli.command else { return c };
    match cmd {
        Command::Spectrum { body, count, subspace, tol } => {
            c.operation = Some(Operation::Spectrum);
            c.body = body;
            c.count = count;
            c.subspace = subspace.map(|s| match s {
                SubspaceArg::Full => Subspace::Full,
                SubspaceArg::Even => Subspace::Even,
            });
            c.tol = tol;
        }
        Command::Verify { inequality, bodies, p, lambda_grid } => {
            c.operation = Some(Operation::Verify);
            c.inequality = Some(match inequality {
                InequalityArg::Bm => Inequality::Bm,
                InequalityArg::LpBm => Inequality::LpBm,
                InequalityArg::PBm => Inequality::PBm,
                InequalityArg::LpMink => Inequality::LpMink,
            });
            c.bodies = non_empty(bodies);
            c.p = p;
            c.lambda_grid = lambda_grid;
        }
        Command::Stability { body, p_star, lambda, phi } => {
            c.operation = Some(Operation::Stability);
            c.body = body;
            c.p_star = p_star;
            c.lambda = lambda;
            c.phi = phi;
        }
        Command::Solve { forcing, p, p_star, trials, noise, tol } => {
            c.operation = Some(Operation::Solve);
            c.f_const = forcing.f_const;
            c.f_coeffs = forcing.f_coeffs;
            c.f = forcing.from_body.map(|b| BodyForcing { from_body: b, p: p.unwrap_or(0.5) });
            c.p = p;
            c.p_star = p_star;
            c.trials = trials;
            c.noise = noise;
            c.tol = tol;
        }
        Command::Equivalence { bodies, p_star, trials } => {
            c.operation = Some(Operation::Equivalence);
            c.bodies = non_empty(bodies);
            c.p_star = p_star;
            c.trials = trials;
        }
        Command::Catalog => c.operation = Some(Operation::Catalog),
        Command::Suite { name } => {
            c.operation = Some(Operation::Suite);
            c.suite = Some(match name {
                SuiteArg::Acceptance => SuiteName::Acceptance,
                SuiteArg::Quick => SuiteName::Quick,
            });
        }
    }
    c
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let file = match cli.config.as_deref().map(ExperimentConfig::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cfg = file.overlay(flags(cli));
    match run(&cfg) {
        Ok(out) => {
            let text = if cfg.json == Some(true) {
                serde_json::to_string_pretty(&out.report).expect("report serializes")
            } else {
                out.summary.clone()
            };
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
