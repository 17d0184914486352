//! Density-matrix simulation with a Z-flip channel attached to every RZ.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::circuit::{qubit_mask, Gate, GateCircuit};
use crate::error::{invalid, Error, Result};
use crate::pauli::{PauliMasks, PauliSum};

/// Intrinsic device noise: after every RZ on qubit `q`,
/// `rho -> (1 - p) rho + p Z_q rho Z_q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    p_zflip: f64,
}

impl NoiseModel {
    pub fn new(p_zflip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_zflip) {
            return Err(invalid("noise_p", format!("{p_zflip} is not a probability")));
        }
        Ok(Self { p_zflip })
    }

    pub fn noiseless() -> Self {
        Self { p_zflip: 0.0 }
    }

    pub fn p_zflip(&self) -> f64 {
        self.p_zflip
    }
}

/// Row-major `2^n x 2^n` density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    n_qubits: usize,
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityState {
    /// `|b><b|` for computational basis index `b`.
    pub fn basis_state(n_qubits: usize, b: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        data[b * dim + b] = Complex64::new(1.0, 0.0);
        Self { n_qubits, dim, data }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for b in 0..dim {
            data[b * dim + b] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Self { n_qubits, dim, data }
    }

    /// Projector onto a state vector, normalized.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let dim = psi.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(invalid("state", format!("length {dim} is not 2^n")));
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 || !norm2.is_finite() {
            return Err(invalid("state", "zero or non-finite norm"));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] = psi[r] * psi[c].conj() / norm2;
            }
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            dim,
            data,
        })
    }

    /// Random full-rank mixed state, for tests and property checks.
    pub fn random_mixed(n_qubits: usize, seed: u64) -> Self {
        let dim = 1usize << n_qubits;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let a = DMatrix::<Complex64>::from_fn(dim, dim, |_, _| {
            Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
        });
        let m = &a * a.adjoint();
        let tr = m.trace().re;
        Self::from_matrix(&(m / Complex64::new(tr, 0.0))).expect("square power-of-two matrix")
    }

    pub fn from_matrix(m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim || !dim.is_power_of_two() || dim < 2 {
            return Err(invalid("rho", format!("{}x{} is not 2^n square", m.nrows(), m.ncols())));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(m[(r, c)]);
            }
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            dim,
            data,
        })
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|b| self.get(b, b)).sum()
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        // rho Hermitian: Tr(rho^2) = sum |rho_rc|^2
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(P rho)` for a unit-weight Pauli string.
    pub fn pauli_expectation(&self, masks: &PauliMasks) -> f64 {
        // Tr(P rho) = sum_b <b^x|P|b> rho[b][b^x]
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..self.dim {
            acc += masks.phase(b) * self.data[b * self.dim + (b ^ masks.x)];
        }
        acc.re
    }

    /// Overlap `<psi| rho |psi>`.
    pub fn fidelity_with(&self, psi: &[Complex64]) -> Result<f64> {
        if psi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: psi.len(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.dim {
            let row = &self.data[r * self.dim..(r + 1) * self.dim];
            let inner: Complex64 = row.iter().zip(psi).map(|(x, p)| x * p).sum();
            acc += psi[r].conj() * inner;
        }
        Ok(acc.re)
    }

    /// Applies every gate of `circuit` as a unitary conjugation, followed by
    /// the Z-flip channel after each RZ.
    pub fn apply_circuit(&mut self, circuit: &GateCircuit, noise: &NoiseModel) -> Result<()> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: circuit.n_qubits(),
            });
        }
        for g in circuit.gates() {
            self.apply_gate(g, noise.p_zflip);
        }
        Ok(())
    }

    fn apply_gate(&mut self, gate: &Gate, p: f64) {
        match *gate {
            Gate::Id(_) => {}
            Gate::Rz { qubit, angle } => self.rz_with_flip(qubit, angle, p),
            Gate::X(q) => {
                let m = qubit_mask(self.n_qubits, q);
                self.permute(|b| b ^ m);
            }
            Gate::Cx { control, target } => {
                let cm = qubit_mask(self.n_qubits, control);
                let tm = qubit_mask(self.n_qubits, target);
                self.permute(|b| if b & cm != 0 { b ^ tm } else { b });
            }
            Gate::Sx(q) => {
                let u = gate.single_qubit_matrix().expect("single-qubit gate");
                self.conjugate_single(q, &u);
            }
        }
    }

    /// `RZ(theta)` conjugation fused with the Z-flip channel: entries whose
    /// row and column differ on `q` pick up `(1 - 2p) e^{-+i theta}`.
    fn rz_with_flip(&mut self, q: usize, theta: f64, p: f64) {
        let m = qubit_mask(self.n_qubits, q);
        let damp = 1.0 - 2.0 * p;
        let down = Complex64::from_polar(damp, -theta); // row bit 0, column bit 1
        let up = Complex64::from_polar(damp, theta);
        let dim = self.dim;
        for r in 0..dim {
            let factor = if r & m == 0 { down } else { up };
            let row = &mut self.data[r * dim..(r + 1) * dim];
            let rbit = r & m;
            for (c, z) in row.iter_mut().enumerate() {
                if (c & m) != rbit {
                    *z *= factor;
                }
            }
        }
    }

    /// `rho[r][c] <- rho[pi(r)][pi(c)]` for an involutive basis permutation.
    fn permute(&mut self, pi: impl Fn(usize) -> usize) {
        let dim = self.dim;
        let perm: Vec<usize> = (0..dim).map(&pi).collect();
        for r in 0..dim {
            let pr = perm[r];
            for c in 0..dim {
                let a = r * dim + c;
                let b = pr * dim + perm[c];
                if a < b {
                    self.data.swap(a, b);
                }
            }
        }
    }

    /// `rho <- U rho U^dagger` for a 2x2 `U` on qubit `q`.
    fn conjugate_single(&mut self, q: usize, u: &[[Complex64; 2]; 2]) {
        let dim = self.dim;
        let m = qubit_mask(self.n_qubits, q);
        // Left multiply: mix row pairs.
        for r0 in 0..dim {
            if r0 & m != 0 {
                continue;
            }
            let r1 = r0 | m;
            let (lo, hi) = self.data.split_at_mut(r1 * dim);
            let row0 = &mut lo[r0 * dim..(r0 + 1) * dim];
            let row1 = &mut hi[..dim];
            for (a, b) in row0.iter_mut().zip(row1.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = u[0][0] * x + u[0][1] * y;
                *b = u[1][0] * x + u[1][1] * y;
            }
        }
        // Right multiply by U^dagger: mix column pairs.
        let v = [
            [u[0][0].conj(), u[1][0].conj()],
            [u[0][1].conj(), u[1][1].conj()],
        ];
        for row in self.data.chunks_exact_mut(dim) {
            for c0 in 0..dim {
                if c0 & m != 0 {
                    continue;
                }
                let c1 = c0 | m;
                let (x, y) = (row[c0], row[c1]);
                row[c0] = x * v[0][0] + y * v[1][0];
                row[c1] = x * v[0][1] + y * v[1][1];
            }
        }
    }
}

/// How energies are read off a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Measurement {
    #[default]
    Exact,
    /// Analytic shot-noise model with the given shot count.
    Shots(u64),
}

/// Measures `<H>`. In shot mode, adds zero-mean Gaussian noise with variance
/// `sum_j c_j^2 (1 - <P_j>^2) / n_shots`, drawn from `rng`.
pub fn measure_energy(
    rho: &DensityState,
    sum: &PauliSum,
    measurement: Measurement,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    match measurement {
        Measurement::Exact => sum.expectation(rho),
        Measurement::Shots(0) => Err(invalid("n_shots", "must be positive")),
        Measurement::Shots(n) => {
            if rho.n_qubits() != sum.n_sites() {
                return Err(Error::DimensionMismatch {
                    expected: sum.n_sites(),
                    found: rho.n_qubits(),
                });
            }
            let mut mean = 0.0;
            let mut variance = 0.0;
            for t in sum.terms() {
                let e = rho.pauli_expectation(&t.masks());
                mean += t.coefficient() * e;
                if !t.is_identity() {
                    variance += t.coefficient().powi(2) * (1.0 - e * e).max(0.0);
                }
            }
            let sd = (variance / n as f64).sqrt();
            if sd == 0.0 {
                return Ok(mean);
            }
            let normal = Normal::new(0.0, sd).map_err(|e| invalid("n_shots", e.to_string()))?;
            Ok(mean + normal.sample(rng))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::compile_slice;
    use crate::pauli::PauliString;
    use proptest::prelude::*;

    fn plus_state() -> DensityState {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        DensityState::from_pure(&[h, h]).unwrap()
    }

    fn x_sum(n: usize, label: &str) -> PauliSum {
        PauliSum::from_terms(n, vec![PauliString::parse(label, 1.0).unwrap()]).unwrap()
    }

    /// Reference: U rho U^dagger with dense matrices.
    fn dense_evolve(rho: &DensityState, c: &GateCircuit) -> DMatrix<Complex64> {
        let u = c.unitary();
        &u * rho.to_matrix() * u.adjoint()
    }

    #[test]
    fn zflip_channel_on_plus_state() {
        let theta = 0.4;
        let mut c = GateCircuit::new(1);
        c.push(Gate::Rz { qubit: 0, angle: theta }).unwrap();

        let mut clean = plus_state();
        clean.apply_circuit(&c, &NoiseModel::noiseless()).unwrap();
        let mut flipped = plus_state();
        flipped.apply_circuit(&c, &NoiseModel::new(1.0).unwrap()).unwrap();

        let x = x_sum(1, "X");
        let ex_clean = x.expectation(&clean).unwrap();
        let ex_flip = x.expectation(&flipped).unwrap();
        assert!((ex_clean - theta.cos()).abs() < 1e-14);
        assert!((ex_flip + ex_clean).abs() < 1e-14);
    }

    #[test]
    fn noiseless_evolution_preserves_purity_and_inverts() {
        let sum = PauliSum::from_terms(
            3,
            vec![
                PauliString::parse("XXI", 0.3).unwrap(),
                PauliString::parse("YYI", 0.3).unwrap(),
                PauliString::parse("ZIZ", 1.1).unwrap(),
                PauliString::parse("IYX", -0.4).unwrap(),
            ],
        )
        .unwrap()
        .canonicalize();
        let c = compile_slice(&sum, 0.2).unwrap();
        let start = DensityState::from_pure(&[
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -0.5),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        let mut rho = start.clone();
        rho.apply_circuit(&c, &NoiseModel::noiseless()).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-10);
        let reference = dense_evolve(&start, &c);
        let diff = (rho.to_matrix() - reference).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);

        rho.apply_circuit(&c.inverse(), &NoiseModel::noiseless()).unwrap();
        let back = (rho.to_matrix() - start.to_matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(back < 1e-10);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rho = DensityState::basis_state(2, 0);
        let c = GateCircuit::new(3);
        assert!(matches!(
            rho.apply_circuit(&c, &NoiseModel::noiseless()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(NoiseModel::new(1.5).is_err());
        assert!(NoiseModel::new(-0.1).is_err());
    }

    #[test]
    fn shot_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = plus_state();
        let sum = PauliSum::from_terms(
            1,
            vec![PauliString::parse("Z", 2.0).unwrap(), PauliString::parse("I", 1.0).unwrap()],
        )
        .unwrap();
        let exact = measure_energy(&rho, &sum, Measurement::Exact, &mut rng).unwrap();
        assert!((exact - 1.0).abs() < 1e-14);
        let big = measure_energy(&rho, &sum, Measurement::Shots(1_000_000_000), &mut rng).unwrap();
        assert!((big - exact).abs() < 1e-3);
        assert!(measure_energy(&rho, &sum, Measurement::Shots(0), &mut rng).is_err());

        // Eigenstate: zero variance, exact value.
        let zero = DensityState::basis_state(1, 0);
        let e = measure_energy(&zero, &sum, Measurement::Shots(10), &mut rng).unwrap();
        assert!((e - 3.0).abs() < 1e-14);
    }

    fn random_circuit(n: usize, gates: &[(u8, usize, usize, f64)]) -> GateCircuit {
        let mut c = GateCircuit::new(n);
        for &(kind, a, b, angle) in gates {
            let (a, b) = (a % n, b % n);
            let g = match kind % 5 {
                0 if a != b => Gate::Cx { control: a, target: b },
                0 | 1 => Gate::Rz { qubit: a, angle },
                2 => Gate::Sx(a),
                3 => Gate::X(a),
                _ => Gate::Id(a),
            };
            c.push(g).unwrap();
        }
        c.mark_slice();
        c
    }

    proptest! {
        #[test]
        fn channel_keeps_state_physical(
            gates in prop::collection::vec((0u8..5, 0usize..3, 0usize..3, -3.0..3.0f64), 1..40),
            p in 0.0..=1.0f64,
            seed in 0u64..500,
        ) {
            let c = random_circuit(3, &gates);
            let mut rho = DensityState::random_mixed(3, seed);
            rho.apply_circuit(&c, &NoiseModel::new(p).unwrap()).unwrap();
            prop_assert!(rho.hermiticity_error() < 1e-10);
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
            prop_assert!(rho.trace().im.abs() < 1e-10);
            prop_assert!(rho.min_eigenvalue() > -1e-10);
        }

        #[test]
        fn noiseless_matches_dense_conjugation(
            gates in prop::collection::vec((0u8..5, 0usize..3, 0usize..3, -3.0..3.0f64), 1..30),
            seed in 0u64..500,
        ) {
            let c = random_circuit(3, &gates);
            let start = DensityState::random_mixed(3, seed);
            let mut rho = start.clone();
            rho.apply_circuit(&c, &NoiseModel::noiseless()).unwrap();
            let diff = (rho.to_matrix() - dense_evolve(&start, &c)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(diff < 1e-10);
        }

        #[test]
        fn expectation_linear_in_state(s1 in 0u64..500, s2 in 0u64..500, w in 0.0..1.0f64) {
            let a = DensityState::random_mixed(2, s1);
            let b = DensityState::random_mixed(2, s2);
            let mix = DensityState::from_matrix(
                &(a.to_matrix() * Complex64::new(w, 0.0) + b.to_matrix() * Complex64::new(1.0 - w, 0.0)),
            ).unwrap();
            let h = PauliSum::from_terms(2, vec![
                PauliString::parse("XY", 0.7).unwrap(),
                PauliString::parse("ZZ", -1.3).unwrap(),
                PauliString::parse("IX", 0.2).unwrap(),
            ]).unwrap();
            let lhs = h.expectation(&mix).unwrap();
            let rhs = w * h.expectation(&a).unwrap() + (1.0 - w) * h.expectation(&b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
