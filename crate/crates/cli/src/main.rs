//! `shiftgrad` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use shiftgrad::calibration::{calibration_landscape, grid_search_calibrate, CalibrationGrid};
use shiftgrad::estimators::five_point_stencil;
use shiftgrad::experiment::{emit_report, run_experiment, EstimatorConfig, ExperimentConfig, Format, Objective, OutputConfig};
use shiftgrad::quantum::{make_template, psr_exactness_report, PsrRule};
use shiftgrad::testbed::Activation;
use shiftgrad::{Error, Method};

#[derive(Debug, Parser)]
#[command(name = "shiftgrad", version, about = "Black-box gradient estimation with generalized shift rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Central,
    Forward,
    FivePoint,
    Shift,
    Psr2,
    Psr4,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Central => Method::Central,
            MethodArg::Forward => Method::Forward,
            MethodArg::FivePoint => Method::FivePoint,
            MethodArg::Shift => Method::ShiftRule,
            MethodArg::Psr2 => Method::PsrTwoTerm,
            MethodArg::Psr4 => Method::PsrFourTerm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PsrMethodArg {
    Psr2,
    Psr4,
}

#[derive(Debug, clap::Args)]
struct FunctionArgs {
    /// Testbed function, `perceptron`, or a circuit template name.
    #[arg(long)]
    function: String,
    /// Perceptron data point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    inputs: Option<Vec<f64>>,
    #[arg(long, default_value = "none")]
    activation: String,
}

impl FunctionArgs {
    fn objective(&self) -> anyhow::Result<Objective> {
        let activation: Activation = self.activation.parse()?;
        Ok(Objective::resolve(&self.function, self.inputs.as_deref(), activation)?)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the gradient at one point.
    Estimate {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        d1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        d2: Option<f64>,
        #[arg(long)]
        eps2: Option<f64>,
        #[arg(long, num_args = 1.., required = true, allow_hyphen_values = true)]
        at: Vec<f64>,
    },
    /// Grid-search the (r, eps) pair for a univariate function.
    Calibrate {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        anchor: f64,
        #[arg(long = "R")]
        r_bound: f64,
        #[arg(long = "E")]
        eps_bound: f64,
        #[arg(long)]
        dr: f64,
        #[arg(long)]
        de: f64,
        /// Reference derivative at the anchor; defaults to the exact gradient.
        #[arg(long, allow_hyphen_values = true)]
        ref_grad: Option<f64>,
    },
    /// Minimum calibration error over a set of grid resolutions.
    Landscape {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        anchor: f64,
        #[arg(long = "R")]
        r_bound: f64,
        #[arg(long = "E")]
        eps_bound: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
        #[arg(long, allow_hyphen_values = true)]
        ref_grad: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sampled experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Sweep a circuit template and compare the PSR against references.
    Quantum {
        #[arg(long)]
        template: String,
        #[arg(long, value_enum)]
        method: PsrMethodArg,
        #[arg(long)]
        eps: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numeric = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_numeric));
            ExitCode::from(if numeric { 2 } else { 1 })
        }
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
}

fn reference_gradient(objective: &Objective, anchor: f64, given: Option<f64>) -> anyhow::Result<f64> {
    if let Some(g) = given {
        return Ok(g);
    }
    if objective.dimension() != 1 {
        return Err(anyhow!("calibration needs a univariate function"));
    }
    let oracle = objective.oracle();
    if !oracle.in_domain(&[anchor]) {
        // No exact gradient outside the domain; fall back to a stencil only
        // to surface the domain error.
        five_point_stencil(&oracle, &[anchor], 1e-3)?;
    }
    Ok(objective.gradient(&[anchor])?[0])
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Estimate {
            function,
            method,
            r,
            eps,
            omega,
            d1,
            d2,
            eps2,
            at,
        } => {
            let objective = function.objective()?;
            let cfg = EstimatorConfig {
                method: method.into(),
                eps,
                r,
                omega,
                d1,
                d2,
                eps2,
            };
            let estimator = objective.estimator(&cfg)?;
            let oracle = objective.oracle();
            let est = estimator.estimate(&oracle, &at)?;
            println!("method {}", est.method);
            println!("gradient {}", fmt_vec(&est.values));
            println!("exact {}", fmt_vec(&objective.gradient(&at)?));
            println!("queries {}", oracle.query_count());
        }
        Command::Calibrate {
            function,
            anchor,
            r_bound,
            eps_bound,
            dr,
            de,
            ref_grad,
        } => {
            let objective = function.objective()?;
            let reference = reference_gradient(&objective, anchor, ref_grad)?;
            let grid = CalibrationGrid::from_steps(r_bound, eps_bound, dr, de)?;
            let oracle = objective.oracle();
            let res = grid_search_calibrate(&oracle, reference, anchor, &grid)?;
            println!("r* {:.16e}", res.r_star);
            println!("eps* {:.16e}", res.eps_star);
            println!("error {:.16e}", res.error);
            println!("queries {}", res.evaluations);
            if !res.skipped_eps.is_empty() {
                println!("skipped_eps {}", fmt_vec(&res.skipped_eps));
            }
        }
        Command::Landscape {
            function,
            anchor,
            r_bound,
            eps_bound,
            counts,
            ref_grad,
            out,
        } => {
            let objective = function.objective()?;
            let reference = reference_gradient(&objective, anchor, ref_grad)?;
            let oracle = objective.oracle();
            let land = calibration_landscape(&oracle, reference, anchor, &counts, &counts, r_bound, eps_bound)?;
            let mut csv = String::from("n_r\\n_e");
            for n in &land.eps_counts {
                csv.push_str(&format!(",{n}"));
            }
            csv.push('\n');
            for (n, row) in land.r_counts.iter().zip(&land.errors) {
                csv.push_str(&format!("{n},{}\n", fmt_vec(row)));
            }
            std::fs::write(&out, csv).map_err(Error::from).with_context(|| format!("writing {}", out.display()))?;
            println!("queries {}", oracle.query_count());
            println!("wrote {}", out.display());
        }
        Command::Experiment { config, out, format } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Some(path) = out {
                let format = cfg.output.as_ref().map(|o| o.format).unwrap_or_default();
                cfg.output = Some(OutputConfig { path, format });
            }
            if let (Some(f), Some(o)) = (format, cfg.output.as_mut()) {
                o.format = match f {
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Json => Format::Json,
                };
            }
            let outcome = run_experiment(&cfg)?;
            let s = &outcome.summary;
            println!("function {}", outcome.metadata.function);
            println!("method {}", outcome.metadata.method);
            println!("distribution {}", outcome.metadata.distribution);
            println!("points {} flagged {}", s.points, s.flagged);
            println!("mean_distance {:.16e}", s.mean_distance);
            println!("max_distance {:.16e}", s.max_distance);
            println!("total_queries {}", s.total_queries);
            if let Some(output) = &cfg.output {
                emit_report(&outcome, output)?;
                println!("wrote {}", output.path.display());
            }
        }
        Command::Quantum { template, method, eps } => {
            let t = make_template(&template)?;
            let rule = match method {
                PsrMethodArg::Psr2 => PsrRule::TwoTerm(t.two_term_params(eps)?),
                PsrMethodArg::Psr4 => {
                    let d = shiftgrad::estimators::FourTermPsrParams::default();
                    match eps {
                        Some(e) => PsrRule::FourTerm(shiftgrad::estimators::FourTermPsrParams::new(
                            d.d1(),
                            d.d2(),
                            e,
                            d.epsilon2(),
                        )?),
                        None => PsrRule::FourTerm(d),
                    }
                }
            };
            println!("{}", psr_exactness_report(&t, &rule)?);
        }
    }
    Ok(())
}
