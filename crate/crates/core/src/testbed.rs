//! Benchmark functions with exact analytic gradients.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{self, Family};
use crate::error::{Error, Result};
use crate::estimators::five_point_stencil;
use crate::oracle::{BlackBoxFunction, DomainPredicate, Evaluator};

pub type Gradient = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Names accepted by [`make_test_function`].
pub const FUNCTION_NAMES: [&str; 6] = ["sin", "log", "quadratic", "sin-cos", "quad-cos", "cubic"];

#[derive(Clone)]
pub struct TestFunction {
    name: String,
    dimension: usize,
    evaluator: Evaluator,
    domain: Option<DomainPredicate>,
    gradient: Gradient,
    valid_domain: &'static str,
    closed_form: Option<Family>,
}

impl TestFunction {
    fn univariate(
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        closed_form: Option<Family>,
    ) -> Self {
        Self {
            name: name.to_string(),
            dimension: 1,
            evaluator: Arc::new(move |x: &[f64]| f(x[0])),
            domain: None,
            gradient: Arc::new(move |x: &[f64]| vec![df(x[0])]),
            valid_domain: "all reals",
            closed_form,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn valid_domain(&self) -> &'static str {
        self.valid_domain
    }

    /// The closed-form `r = h(ε)` family this function belongs to, if any.
    pub fn closed_form(&self) -> Option<Family> {
        self.closed_form
    }

    /// A new query-counted handle; each call starts at zero queries.
    pub fn oracle(&self) -> BlackBoxFunction {
        BlackBoxFunction::from_parts(self.dimension, Arc::clone(&self.evaluator), self.domain.clone())
            .expect("test functions have positive dimension")
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dimension && self.domain.as_ref().is_none_or(|d| d(x))
    }

    /// Largest absolute gap between the analytic gradient and a five-point
    /// stencil (ε = 1e-4) over `samples` random in-domain points.
    pub fn self_consistency(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let oracle = self.oracle();
        let mut worst: f64 = 0.0;
        let mut drawn = 0;
        let mut attempts = 0;
        while drawn < samples {
            attempts += 1;
            if attempts > 10_000 * samples.max(1) {
                return Err(Error::InfeasibleDomain { attempts });
            }
            let x: Vec<f64> = (0..self.dimension).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut margin = x.clone();
            margin.iter_mut().for_each(|v| *v -= 0.1);
            if !self.in_domain(&x) || !self.in_domain(&margin) {
                continue;
            }
            drawn += 1;
            let est = five_point_stencil(&oracle, &x, 1e-4)?;
            for (a, b) in est.values.iter().zip(self.gradient(&x)) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("valid_domain", &self.valid_domain)
            .field("closed_form", &self.closed_form)
            .finish()
    }
}

pub fn make_test_function(name: &str) -> Result<TestFunction> {
    let tf = match name {
        "sin" => TestFunction::univariate(name, f64::sin, f64::cos, Some(Family::Sin)),
        "log" => {
            let mut tf = TestFunction::univariate(name, f64::ln, |x| 1.0 / x, Some(Family::Log));
            tf.domain = Some(Arc::new(|x: &[f64]| x[0] > 0.0));
            tf.valid_domain = "x > 0";
            tf
        }
        "quadratic" => TestFunction::univariate(name, |x| x * x, |x| 2.0 * x, Some(Family::Quadratic)),
        "sin-cos" => TestFunction::univariate(
            name,
            |x| x.sin() * x.cos(),
            |x| (2.0 * x).cos(),
            Some(Family::SinCos),
        ),
        "quad-cos" => TestFunction::univariate(
            name,
            |x| x * x + (x + 2.0).cos(),
            |x| 2.0 * x - (x + 2.0).sin(),
            None,
        ),
        "cubic" => TestFunction::univariate(name, |x| x.powi(3), |x| 3.0 * x * x, None),
        _ => return Err(Error::UnknownFunction(name.to_string())),
    };
    Ok(tf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    None,
    Sigmoid,
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Activation::None),
            "sigmoid" => Ok(Activation::Sigmoid),
            _ => Err(Error::InvalidParameter(format!("unknown activation `{s}`"))),
        }
    }
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Single-layer perceptron over fixed data `x`. The variables are
/// `(w_1, ..., w_n, b)`, so the function has dimension `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perceptron {
    inputs: Vec<f64>,
    activation: Activation,
}

impl Perceptron {
    pub fn new(inputs: Vec<f64>, activation: Activation) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidParameter("perceptron needs at least one input".into()));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("perceptron inputs must be finite".into()));
        }
        Ok(Self { inputs, activation })
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dimension(&self) -> usize {
        self.inputs.len() + 1
    }

    fn affine(inputs: &[f64], params: &[f64]) -> f64 {
        let (w, b) = params.split_at(inputs.len());
        w.iter().zip(inputs).map(|(w, x)| w * x).sum::<f64>() + b[0]
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let z = Self::affine(&self.inputs, params);
        match self.activation {
            Activation::None => z,
            Activation::Sigmoid => sigmoid(z),
        }
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let scale = match self.activation {
            Activation::None => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(Self::affine(&self.inputs, params));
                s * (1.0 - s)
            }
        };
        self.inputs.iter().chain(std::iter::once(&1.0)).map(|x| scale * x).collect()
    }

    pub fn into_test_function(self) -> TestFunction {
        let name = match self.activation {
            Activation::None => "perceptron",
            Activation::Sigmoid => "sigmoid-perceptron",
        };
        let dimension = self.dimension();
        let closed_form = (self.activation == Activation::None).then_some(Family::Linear);
        let p = Arc::new(self);
        let q = Arc::clone(&p);
        TestFunction {
            name: name.to_string(),
            dimension,
            evaluator: Arc::new(move |x: &[f64]| p.value(x)),
            domain: None,
            gradient: Arc::new(move |x: &[f64]| q.gradient(x)),
            valid_domain: "all reals",
            closed_form,
        }
    }
}

pub fn make_perceptron(inputs: &[f64], activation: Activation) -> Result<TestFunction> {
    Ok(Perceptron::new(inputs.to_vec(), activation)?.into_test_function())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidProbeReport {
    /// Best r on the probe grid for the `w_1` coordinate at the given ε.
    pub calibrated_r: f64,
    /// The asymptotic claim `r ≈ -x_1`.
    pub claimed_r: f64,
    /// `|calibrated - claimed| / |claimed|`.
    pub discrepancy: f64,
    /// Residual `|g'(w_1) - r [g(w_1+ε) - g(w_1-ε)]|` at the calibrated r.
    pub residual: f64,
    /// The r that would make the estimate exact, `g' / [g(w_1+ε) - g(w_1-ε)]`.
    pub exact_r: f64,
    /// True when the calibrated r sits on the edge of the probe grid.
    pub at_boundary: bool,
}

const PROBE_R_STEPS: usize = 8000;

/// Measures which r makes the shift rule reproduce `∂g/∂w_1` for the sigmoid
/// perceptron at `(w, b)` and a fixed ε, and compares it to `r = -x_1`.
/// Requires `x_1 > 0`, `ε > 0` and `ε x_1 ≥ 5`.
pub fn sigmoid_r_hypothesis_check(
    inputs: &[f64],
    epsilon: f64,
    weights: &[f64],
    bias: f64,
) -> Result<SigmoidProbeReport> {
    let x1 = *inputs
        .first()
        .ok_or_else(|| Error::Precondition("inputs must be non-empty".into()))?;
    if x1.is_nan() || x1 <= 0.0 {
        return Err(Error::Precondition(format!("x1 must be positive, got {x1}")));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    if epsilon * x1 < 5.0 {
        return Err(Error::Precondition(format!(
            "epsilon * x1 = {} is below 5",
            epsilon * x1
        )));
    }
    if weights.len() != inputs.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            found: weights.len(),
        });
    }

    let perceptron = Perceptron::new(inputs.to_vec(), Activation::Sigmoid)?;
    let mut params = weights.to_vec();
    params.push(bias);
    let reference = perceptron.gradient(&params)[0];
    let model = perceptron.into_test_function();
    let oracle = Arc::new(model.oracle());
    let slice = oracle.coordinate_slice(&params, 0)?;

    let r_bound = 4.0 * x1;
    let r_values: Vec<f64> = (0..=PROBE_R_STEPS)
        .map(|n| -r_bound + 2.0 * r_bound * n as f64 / PROBE_R_STEPS as f64)
        .collect();
    let result = calibration::search(&slice, reference, params[0], &r_values, &[epsilon])?;

    let w1 = params[0];
    let diff = model.value(&with_coord(&params, 0, w1 + epsilon))
        - model.value(&with_coord(&params, 0, w1 - epsilon));
    let claimed_r = -x1;
    Ok(SigmoidProbeReport {
        calibrated_r: result.r_star,
        claimed_r,
        discrepancy: (result.r_star - claimed_r).abs() / claimed_r.abs(),
        residual: result.error,
        exact_r: reference / diff,
        at_boundary: result.r_star == r_values[0] || result.r_star == r_values[PROBE_R_STEPS],
    })
}

fn with_coord(p: &[f64], i: usize, v: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[i] = v;
    q
}
