//! Gate-level compilation of Pauli-sum exponentials into the
//! `{CX, ID, RZ, SX, X}` basis, slice folding and gate counting.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::pauli::{Pauli, PauliSum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Cx,
    Id,
    Rz,
    Sx,
    X,
}

impl GateKind {
    pub const ALL: [GateKind; 5] = [GateKind::Cx, GateKind::Id, GateKind::Rz, GateKind::Sx, GateKind::X];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Cx => "CX",
            GateKind::Id => "ID",
            GateKind::Rz => "RZ",
            GateKind::Sx => "SX",
            GateKind::X => "X",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Cx { control: usize, target: usize },
    Id(usize),
    /// `RZ(angle) = diag(e^{-i angle/2}, e^{i angle/2})`.
    Rz { qubit: usize, angle: f64 },
    /// Square root of X, `((1+i)I + (1-i)X) / 2`.
    Sx(usize),
    X(usize),
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Cx { .. } => GateKind::Cx,
            Gate::Id(_) => GateKind::Id,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::Sx(_) => GateKind::Sx,
            Gate::X(_) => GateKind::X,
        }
    }

    pub fn max_qubit(&self) -> usize {
        match *self {
            Gate::Cx { control, target } => control.max(target),
            Gate::Id(q) | Gate::Sx(q) | Gate::X(q) | Gate::Rz { qubit: q, .. } => q,
        }
    }

    /// 2x2 matrix of a single-qubit gate; `None` for CX.
    pub fn single_qubit_matrix(&self) -> Option<[[Complex64; 2]; 2]> {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        match *self {
            Gate::Cx { .. } => None,
            Gate::Id(_) => Some([[l, o], [o, l]]),
            Gate::X(_) => Some([[o, l], [l, o]]),
            Gate::Sx(_) => {
                let a = Complex64::new(0.5, 0.5);
                let b = Complex64::new(0.5, -0.5);
                Some([[a, b], [b, a]])
            }
            Gate::Rz { angle, .. } => Some([
                [Complex64::from_polar(1.0, -angle / 2.0), o],
                [o, Complex64::from_polar(1.0, angle / 2.0)],
            ]),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::Cx { control, target } => write!(f, "CX({control},{target})"),
            Gate::Id(q) => write!(f, "ID({q})"),
            Gate::Rz { qubit, angle } => write!(f, "RZ({angle})({qubit})"),
            Gate::Sx(q) => write!(f, "SX({q})"),
            Gate::X(q) => write!(f, "X({q})"),
        }
    }
}

/// Gates implementing one Pauli rotation `exp(-i theta P)`: basis change,
/// CX ladder, one RZ, inverse ladder, inverse basis change.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationBlock {
    pub gates: Range<usize>,
    /// Index of the RZ carrying the rotation angle.
    pub rotation: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GateCounts {
    pub cx: usize,
    pub id: usize,
    pub rz: usize,
    pub sx: usize,
    pub x: usize,
}

impl GateCounts {
    pub fn get(&self, kind: GateKind) -> usize {
        match kind {
            GateKind::Cx => self.cx,
            GateKind::Id => self.id,
            GateKind::Rz => self.rz,
            GateKind::Sx => self.sx,
            GateKind::X => self.x,
        }
    }

    fn bump(&mut self, kind: GateKind) {
        match kind {
            GateKind::Cx => self.cx += 1,
            GateKind::Id => self.id += 1,
            GateKind::Rz => self.rz += 1,
            GateKind::Sx => self.sx += 1,
            GateKind::X => self.x += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.cx + self.id + self.rz + self.sx + self.x
    }
}

/// Ordered gate list with Trotter-slice boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct GateCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    slice_marks: Vec<usize>,
    blocks: Vec<RotationBlock>,
    /// Accumulated `-dt * c_identity`: the circuit implements `e^{i phase} U`.
    global_phase: f64,
}

impl GateCircuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            slice_marks: Vec::new(),
            blocks: Vec::new(),
            global_phase: 0.0,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn slice_marks(&self) -> &[usize] {
        &self.slice_marks
    }

    pub fn blocks(&self) -> &[RotationBlock] {
        &self.blocks
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    /// Appends a gate, validating its qubit indices.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if let Gate::Cx { control, target } = gate {
            if control == target {
                return Err(invalid("gate", format!("CX needs distinct qubits, got {control}")));
            }
        }
        if gate.max_qubit() >= self.n_qubits {
            return Err(invalid(
                "gate",
                format!("{gate} addresses a qubit beyond {}", self.n_qubits),
            ));
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Starts a new Trotter slice at the current end of the gate list.
    pub fn mark_slice(&mut self) {
        let at = self.gates.len();
        if self.slice_marks.last() != Some(&at) {
            self.slice_marks.push(at);
        }
    }

    /// Gate ranges of each Trotter slice. Gates before the first mark form
    /// an unmarked prefix that is not reported.
    pub fn slices(&self) -> Vec<Range<usize>> {
        self.slice_marks
            .iter()
            .enumerate()
            .map(|(k, &start)| {
                let end = self.slice_marks.get(k + 1).copied().unwrap_or(self.gates.len());
                start..end
            })
            .collect()
    }

    /// Appends `other` as further slices.
    pub fn append(&mut self, other: &GateCircuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        let offset = self.gates.len();
        self.gates.extend_from_slice(&other.gates);
        for &m in &other.slice_marks {
            let at = m + offset;
            if self.slice_marks.last() != Some(&at) {
                self.slice_marks.push(at);
            }
        }
        self.blocks.extend(other.blocks.iter().map(|b| RotationBlock {
            gates: b.gates.start + offset..b.gates.end + offset,
            rotation: b.rotation + offset,
        }));
        self.global_phase += other.global_phase;
        Ok(())
    }

    /// Adjoint circuit. Rotation blocks invert by negating their rotation
    /// angle, which keeps the gate count; loose SX gates invert to
    /// `RZ(pi) SX RZ(pi)`.
    pub fn inverse(&self) -> GateCircuit {
        let mut out = GateCircuit::new(self.n_qubits);
        out.global_phase = -self.global_phase;
        for unit in self.units().into_iter().rev() {
            match unit {
                Unit::Block(b) => {
                    let start = out.gates.len();
                    let mut rotation = start;
                    for idx in b.gates.clone() {
                        let g = self.gates[idx];
                        if idx == b.rotation {
                            rotation = out.gates.len();
                            if let Gate::Rz { qubit, angle } = g {
                                out.gates.push(Gate::Rz { qubit, angle: -angle });
                                continue;
                            }
                        }
                        out.gates.push(g);
                    }
                    out.blocks.push(RotationBlock {
                        gates: start..out.gates.len(),
                        rotation,
                    });
                }
                Unit::Gate(idx) => match self.gates[idx] {
                    Gate::Rz { qubit, angle } => out.gates.push(Gate::Rz { qubit, angle: -angle }),
                    Gate::Sx(q) => {
                        out.gates.push(Gate::Rz { qubit: q, angle: PI });
                        out.gates.push(Gate::Sx(q));
                        out.gates.push(Gate::Rz { qubit: q, angle: PI });
                    }
                    g => out.gates.push(g),
                },
            }
        }
        if !out.gates.is_empty() {
            out.slice_marks.push(0);
        }
        out
    }

    fn units(&self) -> Vec<Unit<'_>> {
        let mut units = Vec::new();
        let mut blocks = self.blocks.iter().peekable();
        let mut idx = 0;
        while idx < self.gates.len() {
            match blocks.peek() {
                Some(b) if b.gates.start == idx => {
                    idx = b.gates.end;
                    units.push(Unit::Block(b));
                    blocks.next();
                }
                _ => {
                    units.push(Unit::Gate(idx));
                    idx += 1;
                }
            }
        }
        units
    }

    fn sub_circuit(&self, range: Range<usize>) -> GateCircuit {
        let mut out = GateCircuit::new(self.n_qubits);
        out.gates.extend_from_slice(&self.gates[range.clone()]);
        out.blocks = self
            .blocks
            .iter()
            .filter(|b| b.gates.start >= range.start && b.gates.end <= range.end)
            .map(|b| RotationBlock {
                gates: b.gates.start - range.start..b.gates.end - range.start,
                rotation: b.rotation - range.start,
            })
            .collect();
        out.slice_marks.push(0);
        out
    }

    /// Per-kind gate counts.
    pub fn count_gates(&self) -> GateCounts {
        counts_of(&self.gates)
    }

    /// Per-kind gate counts of every Trotter slice.
    pub fn slice_counts(&self) -> Vec<GateCounts> {
        self.slices().into_iter().map(|r| counts_of(&self.gates[r])).collect()
    }

    /// Applies the circuit (without its global phase) to a state vector.
    pub fn apply_to_state(&self, psi: &mut [Complex64]) -> Result<()> {
        let dim = 1usize << self.n_qubits;
        if psi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: psi.len(),
            });
        }
        for g in &self.gates {
            apply_gate_to_state(psi, self.n_qubits, g);
        }
        Ok(())
    }

    /// Dense unitary including the tracked global phase.
    pub fn unitary(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let phase = Complex64::from_polar(1.0, self.global_phase);
        let mut u = DMatrix::<Complex64>::zeros(dim, dim);
        let mut col = vec![Complex64::new(0.0, 0.0); dim];
        for j in 0..dim {
            col.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            col[j] = Complex64::new(1.0, 0.0);
            for g in &self.gates {
                apply_gate_to_state(&mut col, self.n_qubits, g);
            }
            for i in 0..dim {
                u[(i, j)] = col[i] * phase;
            }
        }
        u
    }
}

enum Unit<'a> {
    Block(&'a RotationBlock),
    Gate(usize),
}

fn counts_of(gates: &[Gate]) -> GateCounts {
    let mut counts = GateCounts::default();
    for g in gates {
        counts.bump(g.kind());
    }
    counts
}

/// Bit mask of qubit `q` in an `n`-qubit basis index (qubit 0 most significant).
#[inline]
pub(crate) fn qubit_mask(n_qubits: usize, q: usize) -> usize {
    1usize << (n_qubits - 1 - q)
}

fn apply_gate_to_state(psi: &mut [Complex64], n: usize, gate: &Gate) {
    match *gate {
        Gate::Cx { control, target } => {
            let cm = qubit_mask(n, control);
            let tm = qubit_mask(n, target);
            for b in 0..psi.len() {
                if b & cm != 0 && b & tm == 0 {
                    psi.swap(b, b | tm);
                }
            }
        }
        _ => {
            let q = gate.max_qubit();
            let m = gate.single_qubit_matrix().expect("single-qubit gate");
            let mask = qubit_mask(n, q);
            for b0 in 0..psi.len() {
                if b0 & mask != 0 {
                    continue;
                }
                let b1 = b0 | mask;
                let (a0, a1) = (psi[b0], psi[b1]);
                psi[b0] = m[0][0] * a0 + m[0][1] * a1;
                psi[b1] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }
}

fn push_basis_in(c: &mut GateCircuit, q: usize, p: Pauli) {
    match p {
        Pauli::X => {
            c.gates.push(Gate::Rz { qubit: q, angle: FRAC_PI_2 });
            c.gates.push(Gate::Sx(q));
            c.gates.push(Gate::Rz { qubit: q, angle: FRAC_PI_2 });
        }
        Pauli::Y => c.gates.push(Gate::Sx(q)),
        Pauli::Z | Pauli::I => {}
    }
}

fn push_basis_out(c: &mut GateCircuit, q: usize, p: Pauli) {
    match p {
        Pauli::X => {
            c.gates.push(Gate::Rz { qubit: q, angle: FRAC_PI_2 });
            c.gates.push(Gate::Sx(q));
            c.gates.push(Gate::Rz { qubit: q, angle: FRAC_PI_2 });
        }
        Pauli::Y => {
            c.gates.push(Gate::Rz { qubit: q, angle: PI });
            c.gates.push(Gate::Sx(q));
            c.gates.push(Gate::Rz { qubit: q, angle: PI });
        }
        Pauli::Z | Pauli::I => {}
    }
}

/// Compiles one first-order Trotter slice `prod_j exp(-i dt c_j P_j)` over
/// the canonical terms of `sum` (term 0 applied first). Identity terms only
/// contribute to the global phase.
pub fn compile_slice(sum: &PauliSum, dt: f64) -> Result<GateCircuit> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("{dt} must be positive")));
    }
    let canonical;
    let sum = if sum.is_canonical() {
        sum
    } else {
        canonical = sum.canonicalize();
        &canonical
    };
    if sum.is_empty() {
        return Err(Error::EmptySum);
    }
    let n = sum.n_sites();
    let mut c = GateCircuit::new(n);
    c.slice_marks.push(0);
    for term in sum.terms() {
        let support = term.support();
        if support.is_empty() {
            c.global_phase -= dt * term.coefficient();
            continue;
        }
        let start = c.gates.len();
        for &q in &support {
            push_basis_in(&mut c, q, term.axes()[q]);
        }
        for w in support.windows(2) {
            c.gates.push(Gate::Cx { control: w[0], target: w[1] });
        }
        let last = *support.last().expect("non-empty support");
        let rotation = c.gates.len();
        c.gates.push(Gate::Rz {
            qubit: last,
            angle: 2.0 * term.coefficient() * dt,
        });
        for w in support.windows(2).rev() {
            c.gates.push(Gate::Cx { control: w[0], target: w[1] });
        }
        for &q in &support {
            push_basis_out(&mut c, q, term.axes()[q]);
        }
        c.blocks.push(RotationBlock {
            gates: start..c.gates.len(),
            rotation,
        });
    }
    Ok(c)
}

/// Replaces every Trotter slice `U` by `U (U^dagger U)^{(f-1)/2}`.
pub fn fold_slice(c: &GateCircuit, f: usize) -> Result<GateCircuit> {
    if f == 0 || f % 2 == 0 {
        return Err(Error::InvalidFoldFactor(f));
    }
    if f == 1 {
        return Ok(c.clone());
    }
    let mut out = GateCircuit::new(c.n_qubits);
    let slices = c.slices();
    let prefix_end = slices.first().map(|r| r.start).unwrap_or(c.gates.len());
    if prefix_end > 0 {
        let prefix = c.sub_circuit(0..prefix_end);
        out.gates.extend_from_slice(&prefix.gates);
        out.blocks.extend(prefix.blocks);
    }
    for r in slices {
        let u = c.sub_circuit(r);
        let u_dag = u.inverse();
        let start = out.gates.len();
        out.append(&u)?;
        for _ in 0..(f - 1) / 2 {
            out.append(&u_dag)?;
            out.append(&u)?;
        }
        out.slice_marks.retain(|&m| m <= start);
        if out.slice_marks.last() != Some(&start) {
            out.slice_marks.push(start);
        }
    }
    out.global_phase = c.global_phase;
    Ok(out)
}
