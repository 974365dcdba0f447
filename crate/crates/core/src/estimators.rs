//! Gradient estimators: the generalized shift rule `r [f(x+ε) - f(x-ε)]`,
//! the two- and four-term parameter-shift rules, and the central, forward
//! and five-point finite differences.
//!
//! Every estimator counts its own oracle calls so `queries_used` stays exact
//! even when several estimators share one function handle concurrently.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{BlackBoxFunction, GradientEstimate, Method};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRuleParams {
    r: f64,
    epsilon: f64,
}

impl ShiftRuleParams {
    pub fn new(r: f64, epsilon: f64) -> Result<Self> {
        if !r.is_finite() || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "shift-rule parameters must be finite (r={r}, epsilon={epsilon})"
            )));
        }
        if epsilon == 0.0 {
            return Err(Error::DegenerateShift("epsilon must be non-zero".into()));
        }
        Ok(Self { r, epsilon })
    }

    /// `r = 1/(2ε)`, i.e. the central difference.
    pub fn central(epsilon: f64) -> Result<Self> {
        Self::new(1.0 / (2.0 * epsilon), epsilon)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Parameters of `Ω / (2 sin(Ωε)) [f(μ+ε) - f(μ-ε)]`.
///
/// `omega` is the gap between the two generator eigenvalues, so gates of the
/// form `exp(-iμσ/2)` have `omega = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoTermPsrParams {
    omega: f64,
    epsilon: f64,
}

impl TwoTermPsrParams {
    pub fn new(omega: f64, epsilon: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        if !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be finite, got {epsilon}")));
        }
        let s = (omega * epsilon).sin();
        if s.abs() < 1e-12 {
            return Err(Error::SingularCoefficient { omega, epsilon });
        }
        Ok(Self { omega, epsilon })
    }

    /// The canonical shift `ε = π/(2Ω)`.
    pub fn canonical(omega: f64) -> Result<Self> {
        Self::new(omega, FRAC_PI_2 / omega)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn coefficient(&self) -> f64 {
        self.omega / (2.0 * (self.omega * self.epsilon).sin())
    }
}

/// `d1 [f(μ+ε1) - f(μ-ε1)] + d2 [f(μ+ε2) - f(μ-ε2)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourTermPsrParams {
    d1: f64,
    d2: f64,
    epsilon1: f64,
    epsilon2: f64,
}

impl FourTermPsrParams {
    pub fn new(d1: f64, d2: f64, epsilon1: f64, epsilon2: f64) -> Result<Self> {
        if ![d1, d2, epsilon1, epsilon2].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("four-term parameters must be finite".into()));
        }
        if epsilon1 <= 0.0 || epsilon2 <= 0.0 {
            return Err(Error::InvalidParameter("four-term shifts must be positive".into()));
        }
        if epsilon1 == epsilon2 {
            return Err(Error::DegenerateShift(format!(
                "epsilon1 and epsilon2 coincide ({epsilon1})"
            )));
        }
        Ok(Self { d1, d2, epsilon1, epsilon2 })
    }

    /// Coefficients for controlled rotations `CR(μ)`, whose generator has
    /// eigenvalues {-1/2, 0, 1/2} and therefore frequencies 1/2 and 1.
    /// Shifts π/2 and 3π/2 with `d1 = (√2+1)/(4√2)`, `d2 = -(√2-1)/(4√2)`.
    pub fn controlled_rotation() -> Self {
        Self {
            d1: (SQRT_2 + 1.0) / (4.0 * SQRT_2),
            d2: -(SQRT_2 - 1.0) / (4.0 * SQRT_2),
            epsilon1: FRAC_PI_2,
            epsilon2: 3.0 * FRAC_PI_2,
        }
    }

    /// Solves for `d1, d2` so the rule is exact on every trigonometric
    /// polynomial with frequencies `w1` and `w2`:
    /// `d1 sin(w ε1) + d2 sin(w ε2) = w / 2` for `w ∈ {w1, w2}`.
    pub fn for_frequencies(epsilon1: f64, epsilon2: f64, w1: f64, w2: f64) -> Result<Self> {
        let (a11, a12) = ((w1 * epsilon1).sin(), (w1 * epsilon2).sin());
        let (a21, a22) = ((w2 * epsilon1).sin(), (w2 * epsilon2).sin());
        let det = a11 * a22 - a12 * a21;
        if det.abs() < 1e-12 {
            return Err(Error::SingularCoefficient {
                omega: w2,
                epsilon: epsilon2,
            });
        }
        let (b1, b2) = (w1 / 2.0, w2 / 2.0);
        let d1 = (b1 * a22 - a12 * b2) / det;
        let d2 = (a11 * b2 - b1 * a21) / det;
        Self::new(d1, d2, epsilon1, epsilon2)
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }

    pub fn d2(&self) -> f64 {
        self.d2
    }

    pub fn epsilon1(&self) -> f64 {
        self.epsilon1
    }

    pub fn epsilon2(&self) -> f64 {
        self.epsilon2
    }
}

impl Default for FourTermPsrParams {
    fn default() -> Self {
        Self::controlled_rotation()
    }
}

/// Evaluates `f` through a local counter so the estimate carries its own
/// query total.
struct Probe<'a> {
    f: &'a BlackBoxFunction,
    x: &'a [f64],
    queries: u64,
}

impl<'a> Probe<'a> {
    fn new(f: &'a BlackBoxFunction, x: &'a [f64]) -> Result<Self> {
        if x.len() != f.dimension() {
            return Err(Error::DimensionMismatch {
                expected: f.dimension(),
                found: x.len(),
            });
        }
        Ok(Self { f, x, queries: 0 })
    }

    fn at(&mut self, coord: usize, delta: f64) -> Result<f64> {
        let mut p = self.x.to_vec();
        p[coord] += delta;
        let v = self.f.eval(&p)?;
        self.queries += 1;
        Ok(v)
    }

    fn center(&mut self) -> Result<f64> {
        let v = self.f.eval(self.x)?;
        self.queries += 1;
        Ok(v)
    }

    fn finish(self, values: Vec<f64>, method: Method) -> GradientEstimate {
        GradientEstimate {
            values,
            queries_used: self.queries,
            method,
        }
    }
}

fn symmetric_difference(probe: &mut Probe<'_>, coord: usize, epsilon: f64) -> Result<f64> {
    Ok(probe.at(coord, epsilon)? - probe.at(coord, -epsilon)?)
}

pub fn shift_rule_gradient(
    f: &BlackBoxFunction,
    x: &[f64],
    params: &ShiftRuleParams,
) -> Result<GradientEstimate> {
    shift_rule_impl(f, x, |_| *params, Method::ShiftRule)
}

/// Shift rule with an independent `(r, ε)` for every coordinate.
pub fn shift_rule_gradient_per_coordinate(
    f: &BlackBoxFunction,
    x: &[f64],
    params: &[ShiftRuleParams],
) -> Result<GradientEstimate> {
    if params.len() != f.dimension() {
        return Err(Error::DimensionMismatch {
            expected: f.dimension(),
            found: params.len(),
        });
    }
    shift_rule_impl(f, x, |i| params[i], Method::ShiftRule)
}

fn shift_rule_impl(
    f: &BlackBoxFunction,
    x: &[f64],
    params: impl Fn(usize) -> ShiftRuleParams,
    method: Method,
) -> Result<GradientEstimate> {
    let mut probe = Probe::new(f, x)?;
    let values = (0..x.len())
        .map(|i| {
            let p = params(i);
            Ok(p.r * symmetric_difference(&mut probe, i, p.epsilon)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(probe.finish(values, method))
}

fn positive_step(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("step must be positive, got {epsilon}")))
    }
}

pub fn central_difference(f: &BlackBoxFunction, x: &[f64], epsilon: f64) -> Result<GradientEstimate> {
    positive_step(epsilon)?;
    let params = ShiftRuleParams::central(epsilon)?;
    shift_rule_impl(f, x, |_| params, Method::Central)
}

/// `[f(x+εe_i) - f(x)] / ε`, sharing the single `f(x)` across coordinates.
pub fn forward_difference(f: &BlackBoxFunction, x: &[f64], epsilon: f64) -> Result<GradientEstimate> {
    positive_step(epsilon)?;
    let mut probe = Probe::new(f, x)?;
    let base = probe.center()?;
    let values = (0..x.len())
        .map(|i| Ok((probe.at(i, epsilon)? - base) / epsilon))
        .collect::<Result<Vec<_>>>()?;
    Ok(probe.finish(values, Method::Forward))
}

pub fn five_point_stencil(f: &BlackBoxFunction, x: &[f64], epsilon: f64) -> Result<GradientEstimate> {
    positive_step(epsilon)?;
    let mut probe = Probe::new(f, x)?;
    let values = (0..x.len())
        .map(|i| {
            let p2 = probe.at(i, 2.0 * epsilon)?;
            let p1 = probe.at(i, epsilon)?;
            let m1 = probe.at(i, -epsilon)?;
            let m2 = probe.at(i, -2.0 * epsilon)?;
            Ok((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * epsilon))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(probe.finish(values, Method::FivePoint))
}

pub fn psr_two_term(f: &BlackBoxFunction, mu: &[f64], params: &TwoTermPsrParams) -> Result<GradientEstimate> {
    let shift = ShiftRuleParams::new(params.coefficient(), params.epsilon)?;
    shift_rule_impl(f, mu, |_| shift, Method::PsrTwoTerm)
}

pub fn psr_four_term(f: &BlackBoxFunction, mu: &[f64], params: &FourTermPsrParams) -> Result<GradientEstimate> {
    let mut probe = Probe::new(f, mu)?;
    let values = (0..mu.len())
        .map(|i| {
            let first = symmetric_difference(&mut probe, i, params.epsilon1)?;
            let second = symmetric_difference(&mut probe, i, params.epsilon2)?;
            Ok(params.d1 * first + params.d2 * second)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(probe.finish(values, Method::PsrFourTerm))
}

/// A configured estimator, as selected by experiment configs and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Central { epsilon: f64 },
    Forward { epsilon: f64 },
    FivePoint { epsilon: f64 },
    Shift(ShiftRuleParams),
    ShiftPerCoordinate(Vec<ShiftRuleParams>),
    PsrTwoTerm(TwoTermPsrParams),
    PsrFourTerm(FourTermPsrParams),
}

impl Estimator {
    pub fn method(&self) -> Method {
        match self {
            Estimator::Central { .. } => Method::Central,
            Estimator::Forward { .. } => Method::Forward,
            Estimator::FivePoint { .. } => Method::FivePoint,
            Estimator::Shift(_) | Estimator::ShiftPerCoordinate(_) => Method::ShiftRule,
            Estimator::PsrTwoTerm(_) => Method::PsrTwoTerm,
            Estimator::PsrFourTerm(_) => Method::PsrFourTerm,
        }
    }

    pub fn estimate(&self, f: &BlackBoxFunction, x: &[f64]) -> Result<GradientEstimate> {
        match self {
            Estimator::Central { epsilon } => central_difference(f, x, *epsilon),
            Estimator::Forward { epsilon } => forward_difference(f, x, *epsilon),
            Estimator::FivePoint { epsilon } => five_point_stencil(f, x, *epsilon),
            Estimator::Shift(p) => shift_rule_gradient(f, x, p),
            Estimator::ShiftPerCoordinate(ps) => shift_rule_gradient_per_coordinate(f, x, ps),
            Estimator::PsrTwoTerm(p) => psr_two_term(f, x, p),
            Estimator::PsrFourTerm(p) => psr_four_term(f, x, p),
        }
    }

    /// Offsets (per coordinate) at which the estimator queries `f`.
    pub fn stencil(&self, coord: usize) -> Vec<f64> {
        match self {
            Estimator::Central { epsilon } => vec![*epsilon, -*epsilon],
            Estimator::Forward { epsilon } => vec![0.0, *epsilon],
            Estimator::FivePoint { epsilon } => {
                vec![2.0 * epsilon, *epsilon, -epsilon, -2.0 * epsilon]
            }
            Estimator::Shift(p) => vec![p.epsilon, -p.epsilon],
            Estimator::ShiftPerCoordinate(ps) => {
                let e = ps.get(coord).map_or(0.0, |p| p.epsilon);
                vec![e, -e]
            }
            Estimator::PsrTwoTerm(p) => vec![p.epsilon, -p.epsilon],
            Estimator::PsrFourTerm(p) => vec![p.epsilon1, -p.epsilon1, p.epsilon2, -p.epsilon2],
        }
    }

    /// Whether every point the estimator would query around `x` is in the domain.
    pub fn stencil_in_domain(&self, f: &BlackBoxFunction, x: &[f64]) -> bool {
        if !f.in_domain(x) {
            return false;
        }
        (0..x.len()).all(|i| {
            self.stencil(i).into_iter().all(|delta| {
                let mut p = x.to_vec();
                p[i] += delta;
                f.in_domain(&p)
            })
        })
    }
}

/// Canonical PSR shift for a generator with gap `omega`: `π / (2 omega)`.
pub fn canonical_shift(omega: f64) -> f64 {
    PI / (2.0 * omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn func(dim: usize, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> BlackBoxFunction {
        BlackBoxFunction::new(dim, g).unwrap()
    }

    fn sin1() -> BlackBoxFunction {
        func(1, |x| x[0].sin())
    }

    #[test]
    fn shift_rule_exact_for_sin_with_matched_r() {
        let p = ShiftRuleParams::new(1.0 / (2.0 * 0.7f64.sin()), 0.7).unwrap();
        let g = shift_rule_gradient(&sin1(), &[1.2], &p).unwrap();
        assert!((g.values[0] - 0.362_357_754_476_673_6).abs() < 1e-14);
        assert!((g.values[0] - 1.2f64.cos()).abs() < 1e-15);
        assert_eq!(g.queries_used, 2);
        assert_eq!(g.method, Method::ShiftRule);
    }

    #[test]
    fn constant_gives_zero_gradient_for_every_estimator() {
        let f = func(3, |_| 5.0);
        let x = [0.3, -1.0, 2.0];
        let estimators = [
            Estimator::Central { epsilon: 0.1 },
            Estimator::Forward { epsilon: 0.1 },
            Estimator::FivePoint { epsilon: 0.1 },
            Estimator::Shift(ShiftRuleParams::new(-3.0, 0.4).unwrap()),
            Estimator::PsrTwoTerm(TwoTermPsrParams::new(1.0, 0.3).unwrap()),
            Estimator::PsrFourTerm(FourTermPsrParams::new(0.7, -2.0, 0.1, 0.9).unwrap()),
        ];
        for e in &estimators {
            assert_eq!(e.estimate(&f, &x).unwrap().values, vec![0.0; 3], "{:?}", e.method());
        }
    }

    #[test]
    fn linear_perceptron_shift_rule() {
        let data = [2.0, -1.0];
        let f = func(3, move |p| p[0] * data[0] + p[1] * data[1] + p[2]);
        for eps in [0.01, 0.1, 1.0, 10.0, -0.5] {
            let p = ShiftRuleParams::central(eps).unwrap();
            let g = shift_rule_gradient(&f, &[0.4, -1.3, 0.8], &p).unwrap();
            for (a, b) in g.values.iter().zip([2.0, -1.0, 1.0]) {
                assert!((a - b).abs() < 1e-12, "eps={eps}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_shift_rejected() {
        assert!(matches!(ShiftRuleParams::new(1.0, 0.0), Err(Error::DegenerateShift(_))));
        assert!(central_difference(&sin1(), &[0.0], 0.0).is_err());
        assert!(forward_difference(&sin1(), &[0.0], -1.0).is_err());
    }

    #[test]
    fn central_difference_examples() {
        let sq = func(1, |x| x[0] * x[0]);
        let g = central_difference(&sq, &[3.0], 0.1).unwrap();
        assert!((g.values[0] - 6.0).abs() < 1e-12);

        let g = central_difference(&sin1(), &[0.0], 0.5).unwrap();
        // (sin 0.5 - sin(-0.5)) / 1
        assert!((g.values[0] - 0.958_851_077_208_406).abs() < 1e-14);

        let ln = BlackBoxFunction::with_domain(1, |x| x[0].ln(), |x| x[0] > 0.0).unwrap();
        let g = central_difference(&ln, &[1.0], 0.5).unwrap();
        // ln 1.5 - ln 0.5 = ln 3
        assert!((g.values[0] - 1.098_612_288_668_11).abs() < 1e-13);
    }

    #[test]
    fn shifted_point_outside_domain_errors() {
        let ln = BlackBoxFunction::with_domain(1, |x| x[0].ln(), |x| x[0] > 0.0).unwrap();
        match central_difference(&ln, &[0.3], 0.5) {
            Err(Error::Domain { point }) => assert!((point[0] + 0.2).abs() < 1e-12),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn forward_difference_examples() {
        let sq = func(1, |x| x[0] * x[0]);
        let g = forward_difference(&sq, &[3.0], 0.1).unwrap();
        assert!((g.values[0] - 6.1).abs() < 1e-12);
        assert_eq!(g.queries_used, 2);

        let lin = func(3, |p| 2.0 * p[0] - p[1] + 0.5 * p[2] + 7.0);
        let g = forward_difference(&lin, &[1.0, 2.0, 3.0], 0.37).unwrap();
        for (a, b) in g.values.iter().zip([2.0, -1.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(g.queries_used, 4);
    }

    #[test]
    fn five_point_examples() {
        let cube = func(1, |x| x[0].powi(3));
        let g = five_point_stencil(&cube, &[2.0], 0.1).unwrap();
        assert!((g.values[0] - 12.0).abs() < 1e-12);

        let g = five_point_stencil(&sin1(), &[0.0], 0.5).unwrap();
        // (-sin 1 + 8 sin 0.5 - 8 sin(-0.5) + sin(-1)) / 6
        let expected = (16.0 * 0.5f64.sin() - 2.0 * 1.0f64.sin()) / 6.0;
        assert!((g.values[0] - expected).abs() < 1e-15);
        // leading error term is -f^(5)(0) ε^4 / 30 = -ε^4 / 30
        let err = g.values[0] - 1.0;
        assert!(err < 0.0 && err.abs() < 0.0625 / 30.0 * 1.1, "{err}");
    }

    #[test]
    fn two_term_on_cosine() {
        let f = func(1, |x| x[0].cos());
        let canonical = TwoTermPsrParams::new(1.0, FRAC_PI_2).unwrap();
        assert!((canonical.coefficient() - 0.5).abs() < 1e-15);
        let shifted = TwoTermPsrParams::new(1.0, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mu: f64 = rng.random_range(-10.0..10.0);
            for p in [canonical, shifted] {
                let g = psr_two_term(&f, &[mu], &p).unwrap();
                assert!((g.values[0] + mu.sin()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn two_term_singular_coefficient() {
        assert!(matches!(
            TwoTermPsrParams::new(1.0, PI),
            Err(Error::SingularCoefficient { .. })
        ));
        assert!(TwoTermPsrParams::new(1.0, 0.0).is_err());
        assert!(TwoTermPsrParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn four_term_defaults_match_frequency_solve() {
        let solved = FourTermPsrParams::for_frequencies(FRAC_PI_2, 3.0 * FRAC_PI_2, 0.5, 1.0).unwrap();
        let frozen = FourTermPsrParams::controlled_rotation();
        assert!((solved.d1() - frozen.d1()).abs() < 1e-15);
        assert!((solved.d2() - frozen.d2()).abs() < 1e-15);
    }

    #[test]
    fn four_term_exact_on_two_frequency_signal() {
        let f = func(1, |x| 0.3 + 0.7 * (x[0] / 2.0).cos() - 0.2 * (x[0] / 2.0).sin() + 1.1 * x[0].cos() + 0.4 * x[0].sin());
        let df = |m: f64| -0.35 * (m / 2.0).sin() - 0.1 * (m / 2.0).cos() - 1.1 * m.sin() + 0.4 * m.cos();
        let p = FourTermPsrParams::default();
        for k in 0..64 {
            let mu = k as f64 * 2.0 * PI / 64.0;
            let g = psr_four_term(&f, &[mu], &p).unwrap();
            assert!((g.values[0] - df(mu)).abs() < 1e-13);
            assert_eq!(g.queries_used, 4);
        }
    }

    #[test]
    fn four_term_degenerate_shift() {
        assert!(matches!(
            FourTermPsrParams::new(1.0, 1.0, 0.5, 0.5),
            Err(Error::DegenerateShift(_))
        ));
    }

    #[test]
    fn four_term_reduces_to_shift_rule_when_d2_vanishes() {
        let f = func(2, |x| (x[0] * x[1]).sin() + x[0].exp());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let r: f64 = rng.random_range(-3.0..3.0);
            let eps: f64 = rng.random_range(0.01..1.0);
            let four = FourTermPsrParams::new(r, 0.0, eps, eps + 0.5).unwrap();
            let a = psr_four_term(&f, &x, &four).unwrap();
            let b = shift_rule_gradient(&f, &x, &ShiftRuleParams::new(r, eps).unwrap()).unwrap();
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn per_coordinate_params() {
        let f = func(2, |x| x[0].sin() + x[1] * x[1]);
        let ps = [
            ShiftRuleParams::new(1.0 / (2.0 * 0.4f64.sin()), 0.4).unwrap(),
            ShiftRuleParams::central(0.9).unwrap(),
        ];
        let g = shift_rule_gradient_per_coordinate(&f, &[0.3, 1.5], &ps).unwrap();
        assert!((g.values[0] - 0.3f64.cos()).abs() < 1e-14);
        assert!((g.values[1] - 3.0).abs() < 1e-14);
        assert!(shift_rule_gradient_per_coordinate(&f, &[0.3, 1.5], &ps[..1]).is_err());
    }

    #[test]
    fn query_accounting_matches_method_cost() {
        for d in 1..5 {
            let f = func(d, |x| x.iter().map(|v| v.sin()).sum());
            let x = vec![0.2; d];
            let estimators = [
                Estimator::Central { epsilon: 0.1 },
                Estimator::Forward { epsilon: 0.1 },
                Estimator::FivePoint { epsilon: 0.1 },
                Estimator::Shift(ShiftRuleParams::new(2.0, 0.1).unwrap()),
                Estimator::PsrTwoTerm(TwoTermPsrParams::canonical(1.0).unwrap()),
                Estimator::PsrFourTerm(FourTermPsrParams::default()),
            ];
            for e in &estimators {
                f.reset_query_count();
                let g = e.estimate(&f, &x).unwrap();
                let cost = e.method().query_cost(d);
                assert_eq!(f.query_count(), cost, "{}", e.method());
                assert_eq!(g.queries_used, cost);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn sign_symmetry(x in -5.0f64..5.0, r in -4.0f64..4.0, eps in 0.001f64..3.0) {
            let f = func(1, |x| x[0].sin() * x[0].exp() + x[0].powi(3));
            let a = shift_rule_gradient(&f, &[x], &ShiftRuleParams::new(r, eps).unwrap()).unwrap();
            let b = shift_rule_gradient(&f, &[x], &ShiftRuleParams::new(-r, -eps).unwrap()).unwrap();
            proptest::prop_assert_eq!(a.values, b.values);
        }

        #[test]
        fn affine_functions_are_exact(
            w in proptest::collection::vec(-10.0f64..10.0, 1..6),
            c in -10.0f64..10.0,
            eps in 0.01f64..10.0,
        ) {
            let dim = w.len();
            let weights = w.clone();
            let f = func(dim, move |x| weights.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + c);
            let g = shift_rule_gradient(&f, &vec![0.5; dim], &ShiftRuleParams::central(eps).unwrap()).unwrap();
            for (a, b) in g.values.iter().zip(&w) {
                proptest::prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
            }
        }
    }
}
