//! Query-counted black-box functions.
//!
//! A [`BlackBoxFunction`] is the only access an estimator has to the
//! objective. Every successful evaluation bumps an atomic counter that
//! lives on the handle, so several functions can be tracked independently
//! and concurrent callers still see an exact final count.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type DomainPredicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

pub struct BlackBoxFunction {
    dimension: usize,
    evaluator: Evaluator,
    domain: Option<DomainPredicate>,
    queries: AtomicU64,
}

impl BlackBoxFunction {
    pub fn new<F>(dimension: usize, evaluator: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::from_parts(dimension, Arc::new(evaluator), None)
    }

    pub fn with_domain<F, D>(dimension: usize, evaluator: F, domain: D) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        D: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Self::from_parts(dimension, Arc::new(evaluator), Some(Arc::new(domain)))
    }

    pub fn from_parts(
        dimension: usize,
        evaluator: Evaluator,
        domain: Option<DomainPredicate>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self {
            dimension,
            evaluator,
            domain,
            queries: AtomicU64::new(0),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn reset_query_count(&self) {
        self.queries.store(0, Ordering::SeqCst);
    }

    /// Checks the domain predicate without querying the oracle.
    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dimension
            && x.iter().all(|v| v.is_finite())
            && self.domain.as_ref().is_none_or(|d| d(x))
    }

    /// Evaluates the oracle. Out-of-domain inputs and non-finite outputs are
    /// errors and do not count as queries.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        if !self.in_domain(x) {
            return Err(Error::Domain { point: x.to_vec() });
        }
        let value = (self.evaluator)(x);
        if !value.is_finite() {
            return Err(Error::NonFinite { point: x.to_vec() });
        }
        self.queries.fetch_add(1, Ordering::SeqCst);
        Ok(value)
    }

    /// Univariate view along `coord` with the other coordinates pinned to
    /// `base`. Queries through the slice are counted on both handles.
    pub fn coordinate_slice(self: &Arc<Self>, base: &[f64], coord: usize) -> Result<Self> {
        if base.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: base.len(),
            });
        }
        if coord >= self.dimension {
            return Err(Error::InvalidParameter(format!(
                "coordinate {coord} out of range for dimension {}",
                self.dimension
            )));
        }
        let parent = Arc::clone(self);
        let base = base.to_vec();
        let lift = move |t: f64| {
            let mut p = base.clone();
            p[coord] = t;
            p
        };
        let lift_eval = lift.clone();
        let parent_eval = Arc::clone(&parent);
        // Domain failures are caught by the slice's own predicate, so the
        // parent call here always succeeds for finite outputs.
        let evaluator: Evaluator = Arc::new(move |x: &[f64]| {
            parent_eval.eval(&lift_eval(x[0])).unwrap_or(f64::NAN)
        });
        let domain: DomainPredicate = Arc::new(move |x: &[f64]| parent.in_domain(&lift(x[0])));
        Self::from_parts(1, evaluator, Some(domain))
    }
}

impl fmt::Debug for BlackBoxFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxFunction")
            .field("dimension", &self.dimension)
            .field("constrained", &self.domain.is_some())
            .field("queries", &self.query_count())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Central,
    Forward,
    FivePoint,
    #[serde(rename = "shift")]
    ShiftRule,
    #[serde(rename = "psr2")]
    PsrTwoTerm,
    #[serde(rename = "psr4")]
    PsrFourTerm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Central,
        Method::Forward,
        Method::FivePoint,
        Method::ShiftRule,
        Method::PsrTwoTerm,
        Method::PsrFourTerm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Central => "central",
            Method::Forward => "forward",
            Method::FivePoint => "five-point",
            Method::ShiftRule => "shift",
            Method::PsrTwoTerm => "psr2",
            Method::PsrFourTerm => "psr4",
        }
    }

    /// Oracle queries needed for one gradient of a `dimension`-variate function.
    pub fn query_cost(self, dimension: usize) -> u64 {
        let d = dimension as u64;
        match self {
            Method::Central | Method::ShiftRule | Method::PsrTwoTerm => 2 * d,
            Method::Forward => d + 1,
            Method::FivePoint | Method::PsrFourTerm => 4 * d,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub values: Vec<f64>,
    pub queries_used: u64,
    pub method: Method,
}
