//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 numerical
//! failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node,
    Value,
};
use serde::Deserialize;

use legendre_diff::experiment::{coefficient_count_fit, ExperimentTable};
use legendre_diff::series::default_rule_size;
use legendre_diff::{
    fit_rate, gauss_legendre, json, project, run_experiment, truncation, DerivativePlan, Error,
    ExperimentConfig, Exponent, LegendreSeries, Result,
};

#[derive(Parser)]
#[command(name = "legendre-diff", version, about = "Truncated Legendre differentiation of noisy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fourier-Legendre coefficients of sampled data or an expression in `t`.
    Project {
        /// A samples file `{"t": [...], "f": [...]}` or an expression such as `math::sin(3*t)`.
        #[arg(long)]
        input: String,
        #[arg(long)]
        degree: usize,
        /// Quadrature rule size (default max(2(K+1), 64)).
        #[arg(long)]
        rule_size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Applies the truncated r-th derivative operator to a coefficient file.
    Differentiate(DifferentiateArgs),
    /// Runs a noise-level sweep and writes the error table as CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's `output` field.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits the log-log rate of a results table for one metric.
    Rates {
        #[arg(long)]
        results: PathBuf,
        /// Output metric: a number >= 2 or `inf`.
        #[arg(long)]
        q: Exponent,
        /// Experiment config supplying (mu, s, p, r) for the predicted exponent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DifferentiateArgs {
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long)]
    r: usize,
    /// Fixed truncation level.
    #[arg(long = "N", conflicts_with = "delta", required_unless_present = "delta")]
    n: Option<usize>,
    /// Noise level; N is then chosen a priori from (delta, mu, p, s).
    #[arg(long, requires_all = ["mu", "p", "s"])]
    delta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    p: Option<Exponent>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    cn: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct Samples {
    t: Vec<f64>,
    f: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_numerical() { 3 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Project {
            input,
            degree,
            rule_size,
            out,
        } => {
            let rule = gauss_legendre(rule_size.unwrap_or_else(|| default_rule_size(degree)))?;
            let path = Path::new(&input);
            let series = if path.is_file() {
                let samples: Samples = serde_json::from_slice(&fs::read(path)?)?;
                let interp = Interpolant::new(samples)?;
                project(|t| interp.eval(t), degree, &rule)?
            } else {
                let expr = Expression::parse(&input)?;
                project(|t| expr.eval(t), degree, &rule)?
            };
            write_atomic(&out, json::to_string(&series)?.as_bytes())
        }
        Command::Differentiate(args) => {
            let series: LegendreSeries = serde_json::from_slice(&fs::read(&args.coeffs)?)?;
            let plan = match (args.n, args.delta) {
                (Some(n), _) => DerivativePlan::fixed(args.r, n)?,
                (None, Some(delta)) => {
                    let missing = || Error::InvalidArgument("--delta needs --mu, --p and --s".into());
                    DerivativePlan::rule(args.r, args.cn)?.resolve(
                        delta,
                        args.mu.ok_or_else(missing)?,
                        args.p.ok_or_else(missing)?,
                        args.s.ok_or_else(missing)?,
                    )?
                }
                (None, None) => return Err(Error::InvalidArgument("give --N or --delta".into())),
            };
            let deriv = truncation::apply(&series, &plan)?;
            eprintln!(
                "r = {}, N = {}, coefficients used = {}",
                plan.r(),
                plan.n().expect("resolved"),
                truncation::coefficient_count(&plan)?
            );
            write_atomic(&args.out, json::to_string(&deriv)?.as_bytes())
        }
        Command::Experiment { config, out } => {
            let cfg: ExperimentConfig = serde_json::from_slice(&fs::read(&config)?)?;
            let out = out
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| Error::InvalidArgument("no output path: pass --out or set \"output\"".into()))?;
            let table = run_experiment(&cfg)?;
            write_atomic(&out, table.to_csv_string()?.as_bytes())?;
            if let Ok(fit) = coefficient_count_fit(&table) {
                eprintln!("log N vs log(1/delta) slope: {:.4}", fit.slope);
            }
            Ok(())
        }
        Command::Rates {
            results,
            q,
            config,
            out,
        } => {
            let mut table = ExperimentTable::read_csv(fs::File::open(&results)?)?;
            if let Some(path) = config {
                let cfg: ExperimentConfig = serde_json::from_slice(&fs::read(path)?)?;
                table.model = Some(cfg.model());
            }
            let fit = fit_rate(&table, q)?;
            write_atomic(&out, json::to_string(&fit)?.as_bytes())
        }
    }
}

/// Writes to a sibling temporary file and renames, so a failed run leaves
/// no partial output.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Piecewise-linear interpolant of samples covering `[-1, 1]`.
struct Interpolant {
    t: Vec<f64>,
    f: Vec<f64>,
}

impl Interpolant {
    fn new(samples: Samples) -> Result<Self> {
        let Samples { t, f } = samples;
        if t.len() != f.len() || t.len() < 2 {
            return Err(Error::InvalidArgument(
                "samples need matching \"t\" and \"f\" arrays with at least 2 points".into(),
            ));
        }
        if t.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::InvalidArgument("sample points must be strictly increasing".into()));
        }
        if t[0] > -1.0 || t[t.len() - 1] < 1.0 {
            return Err(Error::InvalidArgument("samples must cover [-1, 1]".into()));
        }
        Ok(Interpolant { t, f })
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self.t.partition_point(|&ti| ti <= x).clamp(1, self.t.len() - 1);
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let w = (x - t0) / (t1 - t0);
        self.f[i - 1] * (1.0 - w) + self.f[i] * w
    }
}

/// An arithmetic expression in the variable `t`.
struct Expression {
    tree: Node<DefaultNumericTypes>,
}

impl Expression {
    fn parse(text: &str) -> Result<Self> {
        let tree = build_operator_tree::<DefaultNumericTypes>(text)
            .map_err(|e| Error::InvalidArgument(format!("cannot parse expression {text:?}: {e}")))?;
        let expr = Expression { tree };
        // Surface unknown identifiers now rather than inside the projection.
        expr.try_eval(0.0)?;
        Ok(expr)
    }

    fn try_eval(&self, t: f64) -> Result<f64> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("t".into(), Value::Float(t))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        self.tree
            .eval_number_with_context(&ctx)
            .map_err(|e| Error::InvalidArgument(format!("cannot evaluate expression: {e}")))
    }

    fn eval(&self, t: f64) -> f64 {
        // Failures become NaN, which `project` reports as non-finite data.
        self.try_eval(t).unwrap_or(f64::NAN)
    }
}
