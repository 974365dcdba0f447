//! Calibration of the shift-rule pair `(r, ε)`.
//!
//! [`grid_search_calibrate`] scans the box `[-R, R] × [-E, E]` and returns the
//! pair whose estimate `r [f(a+ε) - f(a-ε)]` lands closest to a reference
//! derivative at the anchor `a`. Oracle values are cached per ε column, so
//! the query cost grows with the ε resolution only; the r axis is free.
//!
//! [`closed_form_r`] covers the families where `r = h(ε)` is known.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::BlackBoxFunction;

const ZERO_SHIFT_TOL: f64 = 1e-12;

/// The `(r, ε)` search box. Grid points are `r_n = -R + 2R·n/n_R` for
/// `n = 0..=n_R`, and likewise for ε. Writing the points this way keeps a
/// doubled grid an exact superset of the coarse one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    r_bound: f64,
    eps_bound: f64,
    n_r: usize,
    n_eps: usize,
}

impl CalibrationGrid {
    /// Builds a grid from step sizes, with `n_R = 2R/Δr` and `n_E = 2E/Δε`.
    /// Counts that are not whole numbers are rounded down.
    pub fn from_steps(r_bound: f64, eps_bound: f64, delta_r: f64, delta_eps: f64) -> Result<Self> {
        for (name, v) in [
            ("R", r_bound),
            ("E", eps_bound),
            ("delta_r", delta_r),
            ("delta_eps", delta_eps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Self::from_counts(
            r_bound,
            eps_bound,
            step_count(2.0 * r_bound / delta_r),
            step_count(2.0 * eps_bound / delta_eps),
        )
    }

    pub fn from_counts(r_bound: f64, eps_bound: f64, n_r: usize, n_eps: usize) -> Result<Self> {
        if !(r_bound.is_finite() && r_bound > 0.0 && eps_bound.is_finite() && eps_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid bounds must be positive (R={r_bound}, E={eps_bound})"
            )));
        }
        if n_r == 0 || n_eps == 0 {
            return Err(Error::InvalidParameter("grid counts must be at least 1".into()));
        }
        Ok(Self {
            r_bound,
            eps_bound,
            n_r,
            n_eps,
        })
    }

    pub fn r_bound(&self) -> f64 {
        self.r_bound
    }

    pub fn eps_bound(&self) -> f64 {
        self.eps_bound
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_eps(&self) -> usize {
        self.n_eps
    }

    pub fn delta_r(&self) -> f64 {
        2.0 * self.r_bound / self.n_r as f64
    }

    pub fn delta_eps(&self) -> f64 {
        2.0 * self.eps_bound / self.n_eps as f64
    }

    pub fn r_values(&self) -> Vec<f64> {
        axis(self.r_bound, self.n_r)
    }

    /// All ε grid values, including a zero shift if the grid hits it.
    pub fn eps_values(&self) -> Vec<f64> {
        axis(self.eps_bound, self.n_eps)
    }
}

fn step_count(ratio: f64) -> usize {
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.floor() as usize
    }
}

fn axis(bound: f64, count: usize) -> Vec<f64> {
    let span = 2.0 * bound;
    (0..=count)
        .map(|n| -bound + span * n as f64 / count as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub r_star: f64,
    pub eps_star: f64,
    pub error: f64,
    /// Oracle queries consumed by the search.
    pub evaluations: u64,
    /// ε values whose shifted points fell outside the domain.
    pub skipped_eps: Vec<f64>,
}

/// Grid search over `(r, ε)` against `reference_gradient = f'(anchor)`.
///
/// Scan order is r ascending (outer) then ε ascending (inner); the first
/// point attaining the minimum wins. ε = 0 is skipped.
pub fn grid_search_calibrate(
    f: &BlackBoxFunction,
    reference_gradient: f64,
    anchor: f64,
    grid: &CalibrationGrid,
) -> Result<CalibrationResult> {
    search(f, reference_gradient, anchor, &grid.r_values(), &grid.eps_values())
}

/// Same search over explicit axis values, e.g. a single fixed ε.
pub fn search(
    f: &BlackBoxFunction,
    reference_gradient: f64,
    anchor: f64,
    r_values: &[f64],
    eps_values: &[f64],
) -> Result<CalibrationResult> {
    check_univariate(f)?;
    if !reference_gradient.is_finite() || !anchor.is_finite() {
        return Err(Error::InvalidParameter("reference gradient and anchor must be finite".into()));
    }
    let columns: Vec<f64> = eps_values
        .iter()
        .copied()
        .filter(|e| e.abs() > ZERO_SHIFT_TOL)
        .collect();
    if columns.is_empty() || r_values.is_empty() {
        return Err(Error::EmptyGrid);
    }

    // Columns may be evaluated in any order; the reduction below is sequential.
    let differences: Vec<Option<f64>> = columns
        .par_iter()
        .map(|&eps| {
            let plus = f.eval(&[anchor + eps]);
            let minus = f.eval(&[anchor - eps]);
            match (plus, minus) {
                (Ok(p), Ok(m)) => Ok(Some(p - m)),
                (Err(Error::Domain { .. }), _) | (_, Err(Error::Domain { .. })) => Ok(None),
                (Err(e), _) | (_, Err(e)) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let evaluations = columns
        .iter()
        .map(|&eps| {
            u64::from(f.in_domain(&[anchor + eps])) + u64::from(f.in_domain(&[anchor - eps]))
        })
        .sum();

    let skipped_eps: Vec<f64> = columns
        .iter()
        .zip(&differences)
        .filter(|(_, d)| d.is_none())
        .map(|(e, _)| *e)
        .collect();
    if skipped_eps.len() == columns.len() {
        return Err(Error::NoValidColumns);
    }

    let mut best: Option<(f64, f64, f64)> = None;
    for &r in r_values {
        for (&eps, diff) in columns.iter().zip(&differences) {
            let Some(diff) = diff else { continue };
            let error = (reference_gradient - r * diff).abs();
            if best.is_none_or(|(_, _, e)| error < e) {
                best = Some((r, eps, error));
            }
        }
    }
    let (r_star, eps_star, error) = best.ok_or(Error::EmptyGrid)?;
    Ok(CalibrationResult {
        r_star,
        eps_star,
        error,
        evaluations,
        skipped_eps,
    })
}

/// Reference scan that queries the oracle afresh at every grid point.
/// Costs `2 (n_R + 1) n_E` queries; used to cross-check the cached search.
pub fn grid_search_calibrate_uncached(
    f: &BlackBoxFunction,
    reference_gradient: f64,
    anchor: f64,
    grid: &CalibrationGrid,
) -> Result<CalibrationResult> {
    check_univariate(f)?;
    let before = f.query_count();
    let mut best: Option<(f64, f64, f64)> = None;
    let mut skipped_eps = Vec::new();
    for (n, r) in grid.r_values().into_iter().enumerate() {
        for eps in grid.eps_values() {
            if eps.abs() <= ZERO_SHIFT_TOL {
                continue;
            }
            let diff = match (f.eval(&[anchor + eps]), f.eval(&[anchor - eps])) {
                (Ok(p), Ok(m)) => p - m,
                (Err(Error::Domain { .. }), _) | (_, Err(Error::Domain { .. })) => {
                    if n == 0 {
                        skipped_eps.push(eps);
                    }
                    continue;
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let error = (reference_gradient - r * diff).abs();
            if best.is_none_or(|(_, _, e)| error < e) {
                best = Some((r, eps, error));
            }
        }
    }
    let (r_star, eps_star, error) = best.ok_or(Error::NoValidColumns)?;
    Ok(CalibrationResult {
        r_star,
        eps_star,
        error,
        evaluations: f.query_count() - before,
        skipped_eps,
    })
}

fn check_univariate(f: &BlackBoxFunction) -> Result<()> {
    if f.dimension() != 1 {
        return Err(Error::Precondition(format!(
            "calibration needs a univariate function (got dimension {}); slice per coordinate",
            f.dimension()
        )));
    }
    Ok(())
}

/// Minimum calibration error for every `(n_R, n_E)` pair over fixed bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub r_counts: Vec<usize>,
    pub eps_counts: Vec<usize>,
    /// `errors[i][j]` belongs to `(r_counts[i], eps_counts[j])`.
    pub errors: Vec<Vec<f64>>,
}

pub fn calibration_landscape(
    f: &BlackBoxFunction,
    reference_gradient: f64,
    anchor: f64,
    r_counts: &[usize],
    eps_counts: &[usize],
    r_bound: f64,
    eps_bound: f64,
) -> Result<Landscape> {
    if r_counts.is_empty() || eps_counts.is_empty() {
        return Err(Error::InvalidParameter("landscape count lists must be non-empty".into()));
    }
    let errors = r_counts
        .iter()
        .map(|&n_r| {
            eps_counts
                .iter()
                .map(|&n_e| {
                    let grid = CalibrationGrid::from_counts(r_bound, eps_bound, n_r, n_e)?;
                    Ok(grid_search_calibrate(f, reference_gradient, anchor, &grid)?.error)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Landscape {
        r_counts: r_counts.to_vec(),
        eps_counts: eps_counts.to_vec(),
        errors,
    })
}

/// Function families with a known `r = h(ε)` (or `h(ε, x)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `sin x`: `r = 1 / (2 sin ε)`.
    Sin,
    /// `sin x cos x`: `r = 1 / sin(2ε)`.
    SinCos,
    /// Quadratics: `r = 1 / (2ε)`.
    Quadratic,
    /// `ln x`: `r ≈ 1 / (2ε)`, error `O(ε²)` for `|ε| < x`.
    Log,
    /// Affine maps: `r = 1 / (2ε)`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    Approximate { order: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosedFormRule {
    pub family: Family,
    pub exactness: Exactness,
}

impl ClosedFormRule {
    pub fn r(&self, epsilon: f64, x: Option<f64>) -> Result<f64> {
        closed_form_r(self.family, epsilon, x)
    }
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Sin,
        Family::SinCos,
        Family::Quadratic,
        Family::Log,
        Family::Linear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Sin => "sin",
            Family::SinCos => "sin-cos",
            Family::Quadratic => "quadratic",
            Family::Log => "log",
            Family::Linear => "linear",
        }
    }

    pub fn rule(self) -> ClosedFormRule {
        let exactness = match self {
            Family::Log => Exactness::Approximate { order: 2 },
            _ => Exactness::Exact,
        };
        ClosedFormRule {
            family: self,
            exactness,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|fam| fam.as_str() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

pub fn closed_form_r(family: Family, epsilon: f64, x: Option<f64>) -> Result<f64> {
    if !epsilon.is_finite() || epsilon.abs() <= ZERO_SHIFT_TOL {
        return Err(Error::DegenerateShift(format!("epsilon={epsilon} is singular")));
    }
    let denominator = match family {
        Family::Sin => 2.0 * epsilon.sin(),
        Family::SinCos => (2.0 * epsilon).sin(),
        Family::Quadratic | Family::Linear => 2.0 * epsilon,
        Family::Log => {
            if let Some(x) = x {
                if epsilon.abs() >= x {
                    return Err(Error::Precondition(format!(
                        "log rule needs |epsilon| < x (epsilon={epsilon}, x={x})"
                    )));
                }
            }
            2.0 * epsilon
        }
    };
    if denominator.abs() < 1e-12 {
        return Err(Error::DegenerateShift(format!(
            "epsilon={epsilon} is singular for family {family}"
        )));
    }
    Ok(1.0 / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_cos() -> BlackBoxFunction {
        BlackBoxFunction::new(1, |x| x[0] * x[0] + (x[0] + 2.0).cos()).unwrap()
    }

    #[test]
    fn grid_from_steps() {
        let g = CalibrationGrid::from_steps(2.0, 2.0, 0.05, 0.05).unwrap();
        assert_eq!((g.n_r(), g.n_eps()), (80, 80));
        let r = g.r_values();
        assert_eq!(r.len(), 81);
        assert_eq!(r[0], -2.0);
        assert_eq!(r[80], 2.0);
        assert_eq!(g.eps_values()[40], 0.0);
        assert!(CalibrationGrid::from_steps(2.0, 2.0, 0.0, 0.1).is_err());
        assert!(CalibrationGrid::from_steps(1.0, 1.0, 5.0, 0.1).is_err());
    }

    #[test]
    fn doubled_grid_contains_coarse_points() {
        let coarse = CalibrationGrid::from_counts(2.0, 2.0, 10, 10).unwrap().r_values();
        let fine = CalibrationGrid::from_counts(2.0, 2.0, 20, 20).unwrap().r_values();
        for (k, v) in coarse.iter().enumerate() {
            assert_eq!(v.to_bits(), fine[2 * k].to_bits());
        }
    }

    #[test]
    fn quad_cos_reaches_small_error() {
        let f = quad_cos();
        let grid = CalibrationGrid::from_steps(2.0, 2.0, 0.05, 0.05).unwrap();
        let res = grid_search_calibrate(&f, -(2.0f64).sin(), 0.0, &grid).unwrap();
        // Frozen from an independent brute-force scan of the same grid.
        assert!((res.r_star + 0.5).abs() < 1e-12, "{res:?}");
        assert!((res.eps_star + 1.55).abs() < 1e-12, "{res:?}");
        assert!((res.error - 1.966_226_662_053_483e-4).abs() < 1e-12, "{res:?}");
        assert!(res.error < 0.05);
        assert_eq!(res.evaluations, 160);
        assert_eq!(f.query_count(), 160);
    }

    #[test]
    fn quadratic_hits_exact_point() {
        let f = BlackBoxFunction::new(1, |x| x[0] * x[0]).unwrap();
        let grid = CalibrationGrid::from_counts(2.0, 1.0, 4, 4).unwrap();
        assert!(grid.r_values().contains(&1.0));
        assert!(grid.eps_values().contains(&0.5));
        let res = grid_search_calibrate(&f, 2.0, 1.0, &grid).unwrap();
        assert_eq!(res.error, 0.0);
        // (r, ε) = (-1, -0.5) is also exact and comes first in scan order.
        assert_eq!((res.r_star, res.eps_star), (-1.0, -0.5));
    }

    #[test]
    fn constant_ties_resolve_to_first_point() {
        let f = BlackBoxFunction::new(1, |_| 5.0).unwrap();
        let grid = CalibrationGrid::from_counts(1.0, 1.0, 4, 4).unwrap();
        let res = grid_search_calibrate(&f, 0.0, 0.0, &grid).unwrap();
        assert_eq!(res.error, 0.0);
        assert_eq!((res.r_star, res.eps_star), (-1.0, -1.0));
    }

    #[test]
    fn skips_out_of_domain_columns() {
        let f = BlackBoxFunction::with_domain(1, |x| x[0].ln(), |x| x[0] > 0.0).unwrap();
        let grid = CalibrationGrid::from_counts(2.0, 2.0, 40, 8).unwrap();
        let res = grid_search_calibrate(&f, 1.0, 1.0, &grid).unwrap();
        assert_eq!(res.skipped_eps, vec![-2.0, -1.5, -1.0, 1.0, 1.5, 2.0]);
        assert!(res.eps_star.abs() < 1.0);
        assert_eq!(res.evaluations, f.query_count());

        let f = BlackBoxFunction::with_domain(1, |x| x[0].ln(), |x| x[0] > 0.0).unwrap();
        let narrow = CalibrationGrid::from_counts(2.0, 2.0, 4, 2).unwrap();
        assert!(matches!(
            grid_search_calibrate(&f, 1.0, 0.5, &narrow),
            Err(Error::NoValidColumns)
        ));
    }

    #[test]
    fn only_zero_shift_is_empty() {
        let f = quad_cos();
        assert!(matches!(search(&f, 0.0, 0.0, &[1.0], &[0.0]), Err(Error::EmptyGrid)));
    }

    #[test]
    fn rejects_multivariate() {
        let f = BlackBoxFunction::new(2, |x| x[0] + x[1]).unwrap();
        let grid = CalibrationGrid::from_counts(1.0, 1.0, 2, 2).unwrap();
        assert!(matches!(
            grid_search_calibrate(&f, 1.0, 0.0, &grid),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn cached_and_uncached_agree() {
        let grid = CalibrationGrid::from_counts(3.0, 1.5, 30, 24).unwrap();
        let a = grid_search_calibrate(&quad_cos(), 0.7, 0.3, &grid).unwrap();
        let b = grid_search_calibrate_uncached(&quad_cos(), 0.7, 0.3, &grid).unwrap();
        assert_eq!((a.r_star, a.eps_star, a.error), (b.r_star, b.eps_star, b.error));
        assert_eq!(a.evaluations, 48);
        assert_eq!(b.evaluations, 2 * 31 * 24);
    }

    #[test]
    fn queries_independent_of_r_resolution() {
        for n_r in [2, 10, 100, 1000] {
            let f = quad_cos();
            let grid = CalibrationGrid::from_counts(2.0, 2.0, n_r, 16).unwrap();
            grid_search_calibrate(&f, -(2.0f64).sin(), 0.0, &grid).unwrap();
            assert_eq!(f.query_count(), 32);
        }
        for n_e in [3, 7, 20] {
            let f = quad_cos();
            let grid = CalibrationGrid::from_counts(2.0, 2.0, 10, n_e).unwrap();
            grid_search_calibrate(&f, -(2.0f64).sin(), 0.0, &grid).unwrap();
            let zero_column = u64::from(n_e % 2 == 0);
            assert_eq!(f.query_count(), 2 * (n_e as u64 + 1 - zero_column));
            assert!(f.query_count() <= 2 * (n_e as u64 + 1));
        }
    }

    #[test]
    fn landscape_nested_is_monotone() {
        let counts = [10, 20, 40, 80];
        let l = calibration_landscape(&quad_cos(), -(2.0f64).sin(), 0.0, &counts, &counts, 2.0, 2.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(l.errors[i][j] >= 0.0);
                if i > 0 {
                    assert!(l.errors[i][j] <= l.errors[i - 1][j]);
                }
                if j > 0 {
                    assert!(l.errors[i][j] <= l.errors[i][j - 1]);
                }
            }
        }
        assert!(l.errors[3][3] < 0.05);
    }

    #[test]
    fn landscape_single_exact_entry() {
        let f = BlackBoxFunction::new(1, |x| x[0] * x[0]).unwrap();
        let l = calibration_landscape(&f, 2.0, 1.0, &[4], &[4], 2.0, 1.0).unwrap();
        assert_eq!(l.errors, vec![vec![0.0]]);
    }

    #[test]
    fn landscape_beats_closed_form_on_grid() {
        let f = BlackBoxFunction::new(1, |x| x[0].sin()).unwrap();
        let anchor: f64 = 0.7;
        let reference = anchor.cos();
        let (r_bound, e_bound, n) = (3.0, 1.5, 30);
        let l = calibration_landscape(&f, reference, anchor, &[n], &[n], r_bound, e_bound).unwrap();
        let grid = CalibrationGrid::from_counts(r_bound, e_bound, n, n).unwrap();
        // Closed-form r at each grid ε, snapped to the nearest grid r.
        let rs = grid.r_values();
        let best_closed_form = grid
            .eps_values()
            .into_iter()
            .filter(|e| e.abs() > 1e-12)
            .filter_map(|e| {
                let target = closed_form_r(Family::Sin, e, None).ok()?;
                let r = *rs
                    .iter()
                    .min_by(|a, b| (*a - target).abs().total_cmp(&(*b - target).abs()))?;
                let diff = (anchor + e).sin() - (anchor - e).sin();
                Some((reference - r * diff).abs())
            })
            .fold(f64::INFINITY, f64::min);
        assert!(l.errors[0][0] <= best_closed_form);
    }

    #[test]
    fn closed_form_examples() {
        let r = closed_form_r(Family::SinCos, 0.4, None).unwrap();
        assert!((r - 1.0 / 0.8f64.sin()).abs() < 1e-15);
        assert!((r - 1.394).abs() < 1e-3);
        let x: f64 = 0.9;
        let f = |t: f64| t.sin() * t.cos();
        assert!((r * (f(x + 0.4) - f(x - 0.4)) - (2.0 * x).cos()).abs() < 1e-14);

        assert_eq!(closed_form_r(Family::Quadratic, 0.25, None).unwrap(), 2.0);

        let r = closed_form_r(Family::Log, 0.01, Some(1.0)).unwrap();
        assert!((r - 50.0).abs() < 1e-12);
        assert!((r * (1.01f64.ln() - 0.99f64.ln()) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn closed_form_errors() {
        assert!("nope".parse::<Family>().is_err());
        assert!(closed_form_r(Family::Sin, 0.0, None).is_err());
        assert!(closed_form_r(Family::SinCos, std::f64::consts::FRAC_PI_2, None).is_err());
        assert!(closed_form_r(Family::Sin, std::f64::consts::PI, None).is_err());
        assert!(closed_form_r(Family::Log, 2.0, Some(1.0)).is_err());
        assert_eq!(Family::Log.rule().exactness, Exactness::Approximate { order: 2 });
        assert_eq!(Family::Sin.rule().exactness, Exactness::Exact);
    }
}
