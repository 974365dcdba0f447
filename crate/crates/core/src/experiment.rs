//! Sampling, the distance-error metric, and the seeded experiment runner
//! behind the CLI's `experiment` subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::closed_form_r;
use crate::error::{Error, Result};
use crate::estimators::{Estimator, FourTermPsrParams, ShiftRuleParams, TwoTermPsrParams};
use crate::oracle::{BlackBoxFunction, Method};
use crate::quantum::{make_template, CircuitTemplate, TEMPLATE_NAMES};
use crate::testbed::{make_perceptron, make_test_function, Activation, TestFunction};

/// Euclidean distance between exact and estimated gradients.
pub fn distance_error(exact: &[f64], estimate: &[f64]) -> Result<f64> {
    if exact.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            expected: exact.len(),
            found: estimate.len(),
        });
    }
    Ok(exact
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// `normal` is mean 0, standard deviation 5; `uniform` is `[0, 5)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Normal,
    Uniform,
}

impl Distribution {
    pub fn describe(self) -> &'static str {
        match self {
            Distribution::Normal => "normal(mean=0, std_dev=5)",
            Distribution::Uniform => "uniform[0, 5)",
        }
    }
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Distribution::Normal),
            "uniform" => Ok(Distribution::Uniform),
            _ => Err(Error::InvalidParameter(format!("unknown distribution `{s}`"))),
        }
    }
}

pub type Acceptance<'a> = &'a (dyn Fn(&[f64]) -> bool + Sync);

/// Draws `count` points of the given dimension, resampling any point that
/// fails `accept`. Gives up after `10^4 · count` draws.
pub fn sample_points(
    distribution: Distribution,
    count: usize,
    dimension: usize,
    seed: u64,
    accept: Option<Acceptance<'_>>,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 || dimension == 0 {
        return Err(Error::InvalidParameter("sample count and dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 5.0).expect("valid normal");
    let uniform = Uniform::new(0.0, 5.0).expect("valid uniform");
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        match distribution {
            Distribution::Normal => normal.sample(rng),
            Distribution::Uniform => uniform.sample(rng),
        }
    };
    let budget = 10_000 * count;
    let mut points = Vec::with_capacity(count);
    let mut attempts = 0;
    while points.len() < count {
        if attempts >= budget {
            return Err(Error::InfeasibleDomain { attempts });
        }
        attempts += 1;
        let p: Vec<f64> = (0..dimension).map(|_| draw(&mut rng)).collect();
        if accept.is_none_or(|a| a(&p)) {
            points.push(p);
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
}

impl EstimatorConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            eps: None,
            r: None,
            omega: None,
            d1: None,
            d2: None,
            eps2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub distribution: Distribution,
    pub count: usize,
    /// Resample points whose estimator stencil leaves the function domain.
    #[serde(default = "yes")]
    pub restrict_to_domain: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Testbed name, `perceptron`, or a quantum template name.
    pub function: String,
    /// Perceptron data point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<f64>>,
    #[serde(default)]
    pub activation: Activation,
    pub estimator: EstimatorConfig,
    pub sampling: SamplingConfig,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A function with a known exact gradient: a testbed function or a circuit.
#[derive(Debug, Clone)]
pub enum Objective {
    Testbed(TestFunction),
    Circuit(CircuitTemplate),
}

impl Objective {
    pub fn resolve(name: &str, inputs: Option<&[f64]>, activation: Activation) -> Result<Self> {
        if name == "perceptron" {
            let x = inputs.ok_or_else(|| Error::InvalidParameter("perceptron needs `inputs`".into()))?;
            return Ok(Objective::Testbed(make_perceptron(x, activation)?));
        }
        if TEMPLATE_NAMES.contains(&name) {
            return Ok(Objective::Circuit(make_template(name)?));
        }
        Ok(Objective::Testbed(make_test_function(name)?))
    }

    pub fn name(&self) -> &str {
        match self {
            Objective::Testbed(t) => t.name(),
            Objective::Circuit(c) => c.name(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Objective::Testbed(t) => t.dimension(),
            Objective::Circuit(_) => 1,
        }
    }

    pub fn oracle(&self) -> BlackBoxFunction {
        match self {
            Objective::Testbed(t) => t.oracle(),
            Objective::Circuit(c) => c.blackbox(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Objective::Testbed(t) => Ok(t.gradient(x)),
            Objective::Circuit(c) => Ok(vec![c.derivative_at(x[0])?]),
        }
    }

    /// Builds the estimator, filling unset parameters from the closed-form
    /// registry or the circuit's generator metadata.
    pub fn estimator(&self, cfg: &EstimatorConfig) -> Result<Estimator> {
        let need_eps = || {
            cfg.eps
                .ok_or_else(|| Error::InvalidParameter(format!("method {} needs `eps`", cfg.method)))
        };
        Ok(match cfg.method {
            Method::Central => Estimator::Central { epsilon: need_eps()? },
            Method::Forward => Estimator::Forward { epsilon: need_eps()? },
            Method::FivePoint => Estimator::FivePoint { epsilon: need_eps()? },
            Method::ShiftRule => {
                let eps = need_eps()?;
                let r = match cfg.r {
                    Some(r) => r,
                    None => {
                        let family = match self {
                            Objective::Testbed(t) => t.closed_form(),
                            Objective::Circuit(_) => None,
                        }
                        .ok_or_else(|| {
                            Error::InvalidParameter(format!(
                                "`{}` has no closed-form r; pass `r` explicitly",
                                self.name()
                            ))
                        })?;
                        closed_form_r(family, eps, None)?
                    }
                };
                Estimator::Shift(ShiftRuleParams::new(r, eps)?)
            }
            Method::PsrTwoTerm => {
                let omega = match (cfg.omega, self) {
                    (Some(o), _) => o,
                    (None, Objective::Circuit(c)) => c.two_term_params(None)?.omega(),
                    (None, Objective::Testbed(_)) => 1.0,
                };
                let params = match cfg.eps {
                    Some(e) => TwoTermPsrParams::new(omega, e)?,
                    None => TwoTermPsrParams::canonical(omega)?,
                };
                Estimator::PsrTwoTerm(params)
            }
            Method::PsrFourTerm => {
                let d = FourTermPsrParams::default();
                Estimator::PsrFourTerm(FourTermPsrParams::new(
                    cfg.d1.unwrap_or(d.d1()),
                    cfg.d2.unwrap_or(d.d2()),
                    cfg.eps.unwrap_or(d.epsilon1()),
                    cfg.eps2.unwrap_or(d.epsilon2()),
                )?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceErrorRecord {
    pub point: Vec<f64>,
    pub exact_gradient: Vec<f64>,
    pub estimated_gradient: Option<Vec<f64>>,
    pub distance: Option<f64>,
    pub queries: u64,
    /// Set when the estimate could not be formed, e.g. a shifted point left the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub points: usize,
    pub flagged: usize,
    pub mean_distance: f64,
    pub max_distance: f64,
    pub total_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub function: String,
    pub method: Method,
    pub distribution: String,
    pub seed: u64,
    pub estimator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub metadata: Metadata,
    pub summary: Summary,
    pub records: Vec<DistanceErrorRecord>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let objective = Objective::resolve(&config.function, config.inputs.as_deref(), config.activation)?;
    let estimator = objective.estimator(&config.estimator)?;
    let oracle = objective.oracle();

    let accept = |x: &[f64]| estimator.stencil_in_domain(&oracle, x);
    let points = sample_points(
        config.sampling.distribution,
        config.sampling.count,
        objective.dimension(),
        config.seed,
        config.sampling.restrict_to_domain.then_some(&accept as Acceptance<'_>),
    )?;

    // Points are independent; collect() keeps sampled order.
    let records = points
        .par_iter()
        .map(|x| {
            let exact = objective.gradient(x)?;
            match estimator.estimate(&oracle, x) {
                Ok(est) => Ok(DistanceErrorRecord {
                    point: x.clone(),
                    distance: Some(distance_error(&exact, &est.values)?),
                    exact_gradient: exact,
                    estimated_gradient: Some(est.values),
                    queries: est.queries_used,
                    error: None,
                }),
                Err(e @ (Error::Domain { .. } | Error::NonFinite { .. })) => Ok(DistanceErrorRecord {
                    point: x.clone(),
                    exact_gradient: exact,
                    estimated_gradient: None,
                    distance: None,
                    queries: 0,
                    error: Some(e.to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let distances: Vec<f64> = records.iter().filter_map(|r| r.distance).collect();
    let summary = Summary {
        points: records.len(),
        flagged: records.len() - distances.len(),
        mean_distance: if distances.is_empty() {
            0.0
        } else {
            distances.iter().sum::<f64>() / distances.len() as f64
        },
        max_distance: distances.iter().copied().fold(0.0, f64::max),
        total_queries: oracle.query_count(),
    };
    let metadata = Metadata {
        function: objective.name().to_string(),
        method: estimator.method(),
        distribution: config.sampling.distribution.describe().to_string(),
        seed: config.seed,
        estimator: format!("{estimator:?}"),
    };
    Ok(ExperimentOutcome {
        metadata,
        summary,
        records,
    })
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(";")
}

pub const CSV_HEADER: &str = "point,exact,estimate,distance,queries";

/// CSV with 17 significant digits; vectors are `;`-joined. Flagged records
/// leave `estimate` and `distance` empty.
pub fn render_csv(records: &[DistanceErrorRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_vec(&r.point),
            fmt_vec(&r.exact_gradient),
            r.estimated_gradient.as_deref().map(fmt_vec).unwrap_or_default(),
            r.distance.map(fmt_num).unwrap_or_default(),
            r.queries
        );
    }
    out
}

pub fn render_json(outcome: &ExperimentOutcome) -> Result<String> {
    let mut s = serde_json::to_string_pretty(outcome)?;
    s.push('\n');
    Ok(s)
}

pub fn emit_report(outcome: &ExperimentOutcome, output: &OutputConfig) -> Result<()> {
    let body = match output.format {
        Format::Csv => render_csv(&outcome.records),
        Format::Json => render_json(outcome)?,
    };
    std::fs::write(&output.path, body)?;
    Ok(())
}
