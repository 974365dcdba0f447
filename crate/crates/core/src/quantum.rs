//! One- and two-qubit statevector engine for checking parameter-shift rules
//! on circuit expectations `f(μ) = ⟨0|U(μ)† B U(μ)|0⟩`.
//!
//! Qubit 0 is the most significant bit of the basis index, so `Z⊗I`
//! measures qubit 0.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::{
    central_difference, psr_four_term, psr_two_term, FourTermPsrParams, TwoTermPsrParams,
};
use crate::oracle::BlackBoxFunction;

pub type C64 = Complex64;

const UNITARY_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("matrix must be square and non-empty".into()));
        }
        Ok(Self {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    fn from_2x2(a: C64, b: C64, cc: C64, d: C64) -> Self {
        Self {
            dim: 2,
            data: vec![a, b, cc, d],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = c(1.0, 0.0);
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(self.get(j, i).conj());
            }
        }
        Self { dim: n, data }
    }

    pub fn mul(&self, other: &Matrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let n = self.dim;
        let mut data = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Ok(Self { dim: n, data })
    }

    pub fn kron(&self, other: &Matrix) -> Self {
        let (n, m) = (self.dim, other.dim);
        let dim = n * m;
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for i in 0..n {
            for j in 0..n {
                let a = self.get(i, j);
                for k in 0..m {
                    for l in 0..m {
                        data[(i * m + k) * dim + j * m + l] = a * other.get(k, l);
                    }
                }
            }
        }
        Self { dim, data }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `M†M - I`.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint()
            .mul(self)
            .map(|p| p.max_abs_diff(&Matrix::identity(self.dim)))
            .unwrap_or(f64::INFINITY)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn pauli_x() -> Self {
        Self::from_2x2(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
    }

    pub fn pauli_y() -> Self {
        Self::from_2x2(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
    }

    pub fn pauli_z() -> Self {
        Self::from_2x2(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
    }

    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_2x2(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amplitudes: Vec<C64>,
}

impl Statevector {
    pub fn zero(num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        let mut amplitudes = vec![c(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = c(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let q = match amplitudes.len() {
            2 => 1,
            4 => 2,
            n => {
                return Err(Error::InvalidParameter(format!(
                    "statevector length must be 2 or 4, got {n}"
                )))
            }
        };
        let s = Self { amplitudes };
        let defect = (s.norm_sqr() - 1.0).abs();
        if defect > UNITARY_TOL {
            return Err(Error::InvalidParameter(format!(
                "{q}-qubit state is not normalized (|norm² - 1| = {defect:e})"
            )));
        }
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit(&self, index: usize, wire: usize) -> usize {
        (index >> (self.num_qubits() - 1 - wire)) & 1
    }

    fn apply_full(&mut self, m: &Matrix) {
        self.amplitudes = m.apply(&self.amplitudes);
    }

    /// Applies `m` to `wire`; when `control` is set, only to the control=1
    /// subspace. With `zero_inactive`, the control=0 subspace is cleared,
    /// which is what the derivative of a controlled gate does.
    fn apply_local(&mut self, m: &Matrix, wire: usize, control: Option<usize>, zero_inactive: bool) {
        let n = self.amplitudes.len();
        let stride = 1 << (self.num_qubits() - 1 - wire);
        let mut out = self.amplitudes.clone();
        for i in 0..n {
            if self.bit(i, wire) == 1 {
                continue;
            }
            let j = i | stride;
            let active = control.is_none_or(|cw| self.bit(i, cw) == 1);
            if active {
                let (a0, a1) = (self.amplitudes[i], self.amplitudes[j]);
                out[i] = m.get(0, 0) * a0 + m.get(0, 1) * a1;
                out[j] = m.get(1, 0) * a0 + m.get(1, 1) * a1;
            } else if zero_inactive {
                out[i] = c(0.0, 0.0);
                out[j] = c(0.0, 0.0);
            }
        }
        self.amplitudes = out;
    }

    fn inner(&self, other: &[C64]) -> C64 {
        self.amplitudes.iter().zip(other).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn expectation(&self, observable: &Observable) -> Result<f64> {
        if observable.matrix.dim() != self.amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.amplitudes.len(),
                found: observable.matrix.dim(),
            });
        }
        let value = self.inner(&observable.matrix.apply(&self.amplitudes));
        if value.im.abs() > IMAG_TOL {
            return Err(Error::ComplexExpectation(value.im));
        }
        Ok(value.re)
    }
}

fn check_qubits(q: usize) -> Result<()> {
    if q == 1 || q == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("only 1 or 2 qubits are supported, got {q}")))
    }
}

/// Hermitian measurement operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: Matrix,
}

impl Observable {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.dim() != 2 && matrix.dim() != 4 {
            return Err(Error::InvalidParameter(format!(
                "observable must be 2x2 or 4x4, got {0}x{0}",
                matrix.dim()
            )));
        }
        let defect = matrix.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NonHermitian(defect));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn num_qubits(&self) -> usize {
        self.matrix.dim().trailing_zeros() as usize
    }

    pub fn sigma_x() -> Self {
        Self { matrix: Matrix::pauli_x() }
    }

    pub fn sigma_y() -> Self {
        Self { matrix: Matrix::pauli_y() }
    }

    pub fn sigma_z() -> Self {
        Self { matrix: Matrix::pauli_z() }
    }

    pub fn z_i() -> Self {
        Self {
            matrix: Matrix::pauli_z().kron(&Matrix::identity(2)),
        }
    }

    pub fn z_z() -> Self {
        Self {
            matrix: Matrix::pauli_z().kron(&Matrix::pauli_z()),
        }
    }

    /// `V† B V`: the observable seen before a fixed unitary `V`.
    pub fn conjugated_by(&self, v: &Matrix) -> Result<Self> {
        Self::new(v.adjoint().mul(&self.matrix)?.mul(v)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    /// `exp(-iμσ_X/2)`
    Rx,
    Ry,
    Rz,
    /// `exp(-iμ(σ_X cos δ + σ_Y sin δ))`
    ExpW { delta: f64 },
    /// `exp(-iμσ_Z)`
    ExpZ,
    Crx,
    Cry,
    Crz,
    /// A non-parametric unitary over the whole register.
    Fixed(Matrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    kind: GateKind,
    wires: Vec<usize>,
    angle: Angle,
}

impl Gate {
    fn rotation(kind: GateKind, wire: usize, angle: f64) -> Self {
        Self {
            kind,
            wires: vec![wire],
            angle: Angle::Fixed(angle),
        }
    }

    fn controlled(kind: GateKind, control: usize, target: usize, angle: f64) -> Self {
        Self {
            kind,
            wires: vec![control, target],
            angle: Angle::Fixed(angle),
        }
    }

    pub fn rx(wire: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rx, wire, angle)
    }

    pub fn ry(wire: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Ry, wire, angle)
    }

    pub fn rz(wire: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rz, wire, angle)
    }

    pub fn exp_w(wire: usize, angle: f64, delta: f64) -> Self {
        Self::rotation(GateKind::ExpW { delta }, wire, angle)
    }

    pub fn exp_z(wire: usize, angle: f64) -> Self {
        Self::rotation(GateKind::ExpZ, wire, angle)
    }

    pub fn crx(control: usize, target: usize, angle: f64) -> Self {
        Self::controlled(GateKind::Crx, control, target, angle)
    }

    pub fn cry(control: usize, target: usize, angle: f64) -> Self {
        Self::controlled(GateKind::Cry, control, target, angle)
    }

    pub fn crz(control: usize, target: usize, angle: f64) -> Self {
        Self::controlled(GateKind::Crz, control, target, angle)
    }

    /// A fixed unitary acting on the full register.
    pub fn fixed(matrix: Matrix) -> Result<Self> {
        let defect = matrix.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(Error::NonUnitary(defect));
        }
        Ok(Self {
            kind: GateKind::Fixed(matrix),
            wires: Vec::new(),
            angle: Angle::Fixed(0.0),
        })
    }

    /// Marks the gate angle as the circuit's free parameter.
    pub fn free(mut self) -> Self {
        if !matches!(self.kind, GateKind::Fixed(_)) {
            self.angle = Angle::Free;
        }
        self
    }

    pub fn kind(&self) -> &GateKind {
        &self.kind
    }

    pub fn angle(&self) -> Angle {
        self.angle
    }

    pub fn is_free(&self) -> bool {
        self.angle == Angle::Free
    }

    /// Eigenvalues of the generator `G` in `exp(-iμG)`.
    pub fn generator_eigenvalues(&self) -> Vec<f64> {
        match self.kind {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => vec![-0.5, 0.5],
            GateKind::ExpW { .. } | GateKind::ExpZ => vec![-1.0, 1.0],
            GateKind::Crx | GateKind::Cry | GateKind::Crz => vec![-0.5, 0.0, 0.5],
            GateKind::Fixed(_) => Vec::new(),
        }
    }

    /// Spectral gap Ω when the generator has exactly two eigenvalues.
    pub fn two_term_omega(&self) -> Option<f64> {
        match self.generator_eigenvalues().as_slice() {
            [lo, hi] => Some(hi - lo),
            _ => None,
        }
    }

    /// Distinct positive eigenvalue gaps, i.e. the frequencies of `f(μ)`.
    pub fn frequencies(&self) -> Vec<f64> {
        let ev = self.generator_eigenvalues();
        let mut gaps: Vec<f64> = ev
            .iter()
            .flat_map(|a| ev.iter().map(move |b| b - a))
            .filter(|g| *g > 0.0)
            .collect();
        gaps.sort_by(f64::total_cmp);
        gaps.dedup();
        gaps
    }

    fn generator_2x2(&self) -> Option<Matrix> {
        let half = c(0.5, 0.0);
        Some(match &self.kind {
            GateKind::Rx | GateKind::Crx => Matrix::pauli_x().scale(half),
            GateKind::Ry | GateKind::Cry => Matrix::pauli_y().scale(half),
            GateKind::Rz | GateKind::Crz => Matrix::pauli_z().scale(half),
            GateKind::ExpW { delta } => Matrix::from_2x2(
                c(0.0, 0.0),
                C64::from_polar(1.0, -delta),
                C64::from_polar(1.0, *delta),
                c(0.0, 0.0),
            ),
            GateKind::ExpZ => Matrix::pauli_z(),
            GateKind::Fixed(_) => return None,
        })
    }

    /// The 2x2 unitary `exp(-iμG)` on the target wire.
    fn local_matrix(&self, mu: f64) -> Option<Matrix> {
        Some(match &self.kind {
            GateKind::Rx | GateKind::Crx => {
                let (s, co) = (mu / 2.0).sin_cos();
                Matrix::from_2x2(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
            }
            GateKind::Ry | GateKind::Cry => {
                let (s, co) = (mu / 2.0).sin_cos();
                Matrix::from_2x2(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
            }
            GateKind::Rz | GateKind::Crz => Matrix::from_2x2(
                C64::from_polar(1.0, -mu / 2.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                C64::from_polar(1.0, mu / 2.0),
            ),
            GateKind::ExpW { delta } => {
                let (s, co) = mu.sin_cos();
                Matrix::from_2x2(
                    c(co, 0.0),
                    c(0.0, -s) * C64::from_polar(1.0, -delta),
                    c(0.0, -s) * C64::from_polar(1.0, *delta),
                    c(co, 0.0),
                )
            }
            GateKind::ExpZ => Matrix::from_2x2(
                C64::from_polar(1.0, -mu),
                c(0.0, 0.0),
                c(0.0, 0.0),
                C64::from_polar(1.0, mu),
            ),
            GateKind::Fixed(_) => return None,
        })
    }

    /// Full-register matrix of the gate at angle `mu`.
    pub fn matrix(&self, num_qubits: usize, mu: f64) -> Result<Matrix> {
        check_qubits(num_qubits)?;
        let dim = 1 << num_qubits;
        let mut cols = Vec::with_capacity(dim);
        for k in 0..dim {
            let mut amps = vec![c(0.0, 0.0); dim];
            amps[k] = c(1.0, 0.0);
            let mut s = Statevector { amplitudes: amps };
            self.apply(&mut s, mu, false)?;
            cols.push(s.amplitudes);
        }
        let rows = (0..dim).map(|i| cols.iter().map(|col| col[i]).collect()).collect();
        Matrix::from_rows(rows)
    }

    fn check_wires(&self, num_qubits: usize) -> Result<()> {
        for &w in &self.wires {
            if w >= num_qubits {
                return Err(Error::WireOutOfRange {
                    wire: w,
                    qubits: num_qubits,
                });
            }
        }
        if self.wires.len() == 2 && self.wires[0] == self.wires[1] {
            return Err(Error::InvalidParameter("control and target must differ".into()));
        }
        if let GateKind::Fixed(m) = &self.kind {
            if m.dim() != 1 << num_qubits {
                return Err(Error::DimensionMismatch {
                    expected: 1 << num_qubits,
                    found: m.dim(),
                });
            }
        }
        Ok(())
    }

    /// Applies the gate, or its derivative `-iG exp(-iμG)` when `derivative`.
    fn apply(&self, state: &mut Statevector, mu: f64, derivative: bool) -> Result<()> {
        self.check_wires(state.num_qubits())?;
        if let GateKind::Fixed(m) = &self.kind {
            state.apply_full(m);
            return Ok(());
        }
        let mut local = self.local_matrix(mu).expect("parametric gate");
        if derivative {
            let g = self.generator_2x2().expect("parametric gate");
            local = g.mul(&local)?.scale(c(0.0, -1.0));
        }
        match self.wires.as_slice() {
            [w] => state.apply_local(&local, *w, None, false),
            [control, target] => state.apply_local(&local, *target, Some(*control), derivative),
            _ => unreachable!("gates act on one or two wires"),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        Ok(Self {
            num_qubits,
            gates: Vec::new(),
        })
    }

    pub fn with_gates(num_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut circuit = Self::new(num_qubits)?;
        for g in gates {
            circuit.push(g)?;
        }
        Ok(circuit)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.check_wires(self.num_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn free_parameter_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_free()).count()
    }

    /// Runs the circuit from `initial`, binding the free angle to `mu`.
    /// With `differentiate`, the free gate is replaced by its derivative.
    fn run(&self, initial: &Statevector, mu: Option<f64>, differentiate: bool) -> Result<Statevector> {
        if initial.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: initial.num_qubits(),
            });
        }
        let mut state = initial.clone();
        for gate in &self.gates {
            let (angle, deriv) = match (gate.angle, mu) {
                (Angle::Fixed(a), _) => (a, false),
                (Angle::Free, Some(m)) => (m, differentiate),
                (Angle::Free, None) => {
                    return Err(Error::InvalidParameter("circuit has an unbound free parameter".into()))
                }
            };
            gate.apply(&mut state, angle, deriv)?;
        }
        Ok(state)
    }

    pub fn final_state(&self, initial: &Statevector) -> Result<Statevector> {
        self.run(initial, None, false)
    }
}

/// `⟨0|U† B U|0⟩` for a fully bound circuit.
pub fn expectation(circuit: &Circuit, observable: &Observable) -> Result<f64> {
    expectation_from_state(&Statevector::zero(circuit.num_qubits())?, circuit, observable)
}

pub fn expectation_from_state(initial: &Statevector, circuit: &Circuit, observable: &Observable) -> Result<f64> {
    check_observable(circuit, observable)?;
    circuit.final_state(initial)?.expectation(observable)
}

fn check_observable(circuit: &Circuit, observable: &Observable) -> Result<()> {
    if observable.num_qubits() != circuit.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: circuit.num_qubits(),
            found: observable.num_qubits(),
        });
    }
    Ok(())
}

/// A circuit with exactly one free angle, plus the observable it is measured in.
#[derive(Debug, Clone)]
pub struct CircuitTemplate {
    name: String,
    circuit: Circuit,
    observable: Observable,
    free_gate: usize,
    closed_form_derivative: Option<fn(f64) -> f64>,
}

impl CircuitTemplate {
    pub fn new(name: &str, circuit: Circuit, observable: Observable) -> Result<Self> {
        let count = circuit.free_parameter_count();
        if count != 1 {
            return Err(Error::FreeParameterCount(count));
        }
        check_observable(&circuit, &observable)?;
        let free_gate = circuit.gates.iter().position(Gate::is_free).expect("one free gate");
        Ok(Self {
            name: name.to_string(),
            circuit,
            observable,
            free_gate,
            closed_form_derivative: None,
        })
    }

    fn with_closed_form(mut self, d: fn(f64) -> f64) -> Self {
        self.closed_form_derivative = Some(d);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn free_gate(&self) -> &Gate {
        &self.circuit.gates[self.free_gate]
    }

    pub fn expectation_at(&self, mu: f64) -> Result<f64> {
        let zero = Statevector::zero(self.circuit.num_qubits)?;
        self.circuit.run(&zero, Some(mu), false)?.expectation(&self.observable)
    }

    /// `df/dμ = 2 Re ⟨ψ(μ)| B |∂ψ(μ)⟩`, differentiating the free gate
    /// through its generator.
    pub fn derivative_at(&self, mu: f64) -> Result<f64> {
        let zero = Statevector::zero(self.circuit.num_qubits)?;
        let psi = self.circuit.run(&zero, Some(mu), false)?;
        let dpsi = self.circuit.run(&zero, Some(mu), true)?;
        let b_dpsi = self.observable.matrix.apply(&dpsi.amplitudes);
        Ok(2.0 * psi.inner(&b_dpsi).re)
    }

    /// Hand-derived derivative, for templates that have one.
    pub fn closed_form_derivative(&self, mu: f64) -> Option<f64> {
        self.closed_form_derivative.map(|d| d(mu))
    }

    /// Two-term parameters from the free gate's spectral gap, at shift `epsilon`
    /// (default `π/(2Ω)`).
    pub fn two_term_params(&self, epsilon: Option<f64>) -> Result<TwoTermPsrParams> {
        let omega = self.free_gate().two_term_omega().ok_or_else(|| {
            Error::Precondition(format!(
                "template `{}` has a generator with more than two eigenvalues; use the four-term rule",
                self.name
            ))
        })?;
        match epsilon {
            Some(e) => TwoTermPsrParams::new(omega, e),
            None => TwoTermPsrParams::canonical(omega),
        }
    }

    pub fn blackbox(&self) -> BlackBoxFunction {
        let template = Arc::new(self.clone());
        BlackBoxFunction::new(1, move |x| template.expectation_at(x[0]).unwrap_or(f64::NAN))
            .expect("dimension 1")
    }
}

/// Query-counted `μ ↦ ⟨B⟩` for a circuit with exactly one free angle.
pub fn expectation_as_blackbox(circuit: Circuit, observable: Observable) -> Result<BlackBoxFunction> {
    Ok(CircuitTemplate::new("custom", circuit, observable)?.blackbox())
}

pub const TEMPLATE_NAMES: [&str; 5] = ["rx-z", "ry-rz-x", "crx-zz", "expw-x", "expz-x"];

pub fn make_template(name: &str) -> Result<CircuitTemplate> {
    let t = match name {
        "rx-z" => CircuitTemplate::new(
            name,
            Circuit::with_gates(1, vec![Gate::rx(0, 0.0).free()])?,
            Observable::sigma_z(),
        )?
        .with_closed_form(|mu| -mu.sin()),
        // ⟨X⟩ = sin(0.3) cos μ
        "ry-rz-x" => CircuitTemplate::new(
            name,
            Circuit::with_gates(1, vec![Gate::ry(0, 0.3), Gate::rz(0, 0.0).free()])?,
            Observable::sigma_x(),
        )?
        .with_closed_form(|mu| -(0.3f64).sin() * mu.sin()),
        "crx-zz" => {
            let w = Matrix::hadamard().kron(&Gate::ry(0, 0.7).local_matrix(0.7).expect("ry"));
            let v = Gate::ry(0, 0.4).local_matrix(0.4).expect("ry").kron(&Matrix::identity(2));
            CircuitTemplate::new(
                name,
                Circuit::with_gates(
                    2,
                    vec![Gate::fixed(w)?, Gate::crx(0, 1, 0.0).free(), Gate::fixed(v)?],
                )?,
                Observable::z_z(),
            )?
        }
        "expw-x" => CircuitTemplate::new(
            name,
            Circuit::with_gates(1, vec![Gate::ry(0, 0.6), Gate::exp_w(0, 0.0, 0.4).free()])?,
            Observable::sigma_x(),
        )?,
        // ⟨X⟩ = sin(1) cos 2μ
        "expz-x" => CircuitTemplate::new(
            name,
            Circuit::with_gates(1, vec![Gate::ry(0, 1.0), Gate::exp_z(0, 0.0).free()])?,
            Observable::sigma_x(),
        )?
        .with_closed_form(|mu| -2.0 * (1.0f64).sin() * (2.0 * mu).sin()),
        _ => return Err(Error::UnknownTemplate(name.to_string())),
    };
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsrRule {
    TwoTerm(TwoTermPsrParams),
    FourTerm(FourTermPsrParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub mu: f64,
    pub psr: f64,
    /// Central difference at ε = 1e-6.
    pub oracle: f64,
    /// Closed-form derivative where the template has one, otherwise the
    /// generator-based analytic derivative.
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessReport {
    pub template: String,
    pub points: Vec<SweepPoint>,
    pub max_oracle_error: f64,
    pub max_analytic_error: f64,
    pub queries: u64,
}

impl fmt::Display for ExactnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mu,psr,oracle,analytic")?;
        for p in &self.points {
            writeln!(f, "{:.17e},{:.17e},{:.17e},{:.17e}", p.mu, p.psr, p.oracle, p.analytic)?;
        }
        writeln!(f, "# template {}", self.template)?;
        writeln!(f, "# max |psr - oracle|   {:e}", self.max_oracle_error)?;
        writeln!(f, "# max |psr - analytic| {:e}", self.max_analytic_error)?;
        write!(f, "# psr queries {}", self.queries)
    }
}

pub const SWEEP_POINTS: usize = 64;
pub const ORACLE_STEP: f64 = 1e-6;

/// Sweeps μ over `[0, 2π)` in 64 steps and compares the PSR estimate with a
/// fine central difference and the analytic derivative.
pub fn psr_exactness_report(template: &CircuitTemplate, rule: &PsrRule) -> Result<ExactnessReport> {
    let f = template.blackbox();
    let reference = template.blackbox();
    let mut points = Vec::with_capacity(SWEEP_POINTS);
    let mut queries = 0;
    for k in 0..SWEEP_POINTS {
        let mu = 2.0 * PI * k as f64 / SWEEP_POINTS as f64;
        let est = match rule {
            PsrRule::TwoTerm(p) => psr_two_term(&f, &[mu], p)?,
            PsrRule::FourTerm(p) => psr_four_term(&f, &[mu], p)?,
        };
        queries += est.queries_used;
        let oracle = central_difference(&reference, &[mu], ORACLE_STEP)?.values[0];
        let analytic = match template.closed_form_derivative(mu) {
            Some(d) => d,
            None => template.derivative_at(mu)?,
        };
        points.push(SweepPoint {
            mu,
            psr: est.values[0],
            oracle,
            analytic,
        });
    }
    let max_of = |g: fn(&SweepPoint) -> f64| points.iter().map(g).fold(0.0, f64::max);
    Ok(ExactnessReport {
        template: template.name.clone(),
        max_oracle_error: max_of(|p| (p.psr - p.oracle).abs()),
        max_analytic_error: max_of(|p| (p.psr - p.analytic).abs()),
        points,
        queries,
    })
}
