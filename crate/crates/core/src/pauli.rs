//! Weighted Pauli strings and sums.
//!
//! Site 0 is the leftmost (most significant) Kronecker factor: in a
//! computational basis index `b` over `n` sites, site `k` is bit `n - 1 - k`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::DensityState;
use crate::error::{invalid, Error, Result};

/// Largest site count accepted by [`PauliSum::to_dense`].
pub const MAX_DENSE_SITES: usize = 12;

/// Terms with |coefficient| at or below this are dropped on canonicalization.
pub const ZERO_THRESHOLD: f64 = 1e-14;

/// Single-site Pauli operator. The derived order `I < X < Y < Z` is the
/// canonical term order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Dense 2x2 matrix.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Product `self * other` as `(phase, pauli)`.
    pub fn mul(self, other: Pauli) -> (Complex64, Pauli) {
        use Pauli::*;
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match (self, other) {
            (I, p) | (p, I) => (one, p),
            (a, b) if a == b => (one, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
            _ => unreachable!(),
        }
    }
}

/// Bit masks of a Pauli string acting on basis states:
/// `P|b> = i^n_y (-1)^{popcount(b & z)} |b ^ x>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliMasks {
    pub x: usize,
    pub z: usize,
    pub n_y: u32,
}

impl PauliMasks {
    /// Phase of `<b ^ x| P |b>`.
    #[inline]
    pub fn phase(&self, b: usize) -> Complex64 {
        let sign = if (b & self.z).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        match self.n_y % 4 {
            0 => Complex64::new(sign, 0.0),
            1 => Complex64::new(0.0, sign),
            2 => Complex64::new(-sign, 0.0),
            _ => Complex64::new(0.0, -sign),
        }
    }
}

/// A real-weighted tensor product of single-site Paulis.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliString {
    axes: Vec<Pauli>,
    coefficient: f64,
}

impl PauliString {
    pub fn new(axes: Vec<Pauli>, coefficient: f64) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid("axes", "a Pauli string needs at least one site"));
        }
        if !coefficient.is_finite() {
            return Err(invalid("coefficient", format!("{coefficient} is not finite")));
        }
        Ok(Self { axes, coefficient })
    }

    pub fn identity(n_sites: usize, coefficient: f64) -> Result<Self> {
        Self::new(vec![Pauli::I; n_sites], coefficient)
    }

    /// String with the given `(site, pauli)` factors and identity elsewhere.
    pub fn from_factors(n_sites: usize, factors: &[(usize, Pauli)], coefficient: f64) -> Result<Self> {
        let mut axes = vec![Pauli::I; n_sites];
        for &(site, p) in factors {
            if site >= n_sites {
                return Err(invalid("axes", format!("site {site} out of range for {n_sites} sites")));
            }
            axes[site] = p;
        }
        Self::new(axes, coefficient)
    }

    /// Parses strings like `"XXII"`.
    pub fn parse(label: &str, coefficient: f64) -> Result<Self> {
        let axes = label
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(invalid("axes", format!("unknown Pauli label `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes, coefficient)
    }

    pub fn axes(&self) -> &[Pauli] {
        &self.axes
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn n_sites(&self) -> usize {
        self.axes.len()
    }

    pub fn is_identity(&self) -> bool {
        self.axes.iter().all(|&p| p == Pauli::I)
    }

    /// Sites carrying a non-identity factor, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.axes
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn masks(&self) -> PauliMasks {
        let n = self.axes.len();
        let mut masks = PauliMasks { x: 0, z: 0, n_y: 0 };
        for (k, &p) in self.axes.iter().enumerate() {
            let bit = 1usize << (n - 1 - k);
            match p {
                Pauli::I => {}
                Pauli::X => masks.x |= bit,
                Pauli::Y => {
                    masks.x |= bit;
                    masks.z |= bit;
                    masks.n_y += 1;
                }
                Pauli::Z => masks.z |= bit,
            }
        }
        masks
    }

    pub fn label(&self) -> String {
        self.axes.iter().map(|p| p.symbol()).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}*{}", self.coefficient, self.label())
    }
}

/// Hermitian operator stored as a sum of real-weighted Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_sites: usize,
    terms: Vec<PauliString>,
}

impl PauliSum {
    pub fn new(n_sites: usize) -> Self {
        Self {
            n_sites,
            terms: Vec::new(),
        }
    }

    /// Collects terms as given; call [`PauliSum::canonicalize`] to merge them.
    pub fn from_terms(n_sites: usize, terms: Vec<PauliString>) -> Result<Self> {
        if n_sites == 0 {
            return Err(invalid("n_sites", "must be positive"));
        }
        for t in &terms {
            if t.n_sites() != n_sites {
                return Err(Error::DimensionMismatch {
                    expected: n_sites,
                    found: t.n_sites(),
                });
            }
        }
        Ok(Self { n_sites, terms })
    }

    pub fn push(&mut self, term: PauliString) -> Result<()> {
        if term.n_sites() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: term.n_sites(),
            });
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges terms with identical axes, drops near-zero coefficients and
    /// sorts lexicographically on axes.
    pub fn canonicalize(&self) -> PauliSum {
        let mut merged: BTreeMap<Vec<Pauli>, f64> = BTreeMap::new();
        for t in &self.terms {
            *merged.entry(t.axes.clone()).or_insert(0.0) += t.coefficient;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.abs() > ZERO_THRESHOLD)
            .map(|(axes, coefficient)| PauliString { axes, coefficient })
            .collect();
        PauliSum {
            n_sites: self.n_sites,
            terms,
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.terms.windows(2).all(|w| w[0].axes < w[1].axes)
            && self.terms.iter().all(|t| t.coefficient.abs() > ZERO_THRESHOLD)
    }

    /// Sum of identity-string coefficients.
    pub fn identity_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.is_identity())
            .map(|t| t.coefficient)
            .sum()
    }

    /// Dense `2^n x 2^n` matrix.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n_sites > MAX_DENSE_SITES {
            return Err(Error::TooManySites {
                n_sites: self.n_sites,
                limit: MAX_DENSE_SITES,
            });
        }
        let dim = 1usize << self.n_sites;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for t in &self.terms {
            let masks = t.masks();
            for b in 0..dim {
                m[(b ^ masks.x, b)] += masks.phase(b) * t.coefficient;
            }
        }
        Ok(m)
    }

    /// `Tr(H rho)` with the imaginary residue discarded.
    pub fn expectation(&self, rho: &DensityState) -> Result<f64> {
        if rho.n_qubits() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: rho.n_qubits(),
            });
        }
        let value: f64 = self
            .terms
            .iter()
            .map(|t| t.coefficient * rho.pauli_expectation(&t.masks()))
            .sum();
        Ok(value)
    }

    /// Replaces every non-identity factor `P` of every term by its image
    /// `W_P^dagger P W_P`, expanding products, then canonicalizes.
    pub fn conjugated(&self, rot: &NoiseRotation) -> PauliSum {
        let images: [[f64; 4]; 4] = [
            [1.0, 0.0, 0.0, 0.0],
            conjugate_pauli(Pauli::X, rot).expect("X is conjugable"),
            conjugate_pauli(Pauli::Y, rot).expect("Y is conjugable"),
            conjugate_pauli(Pauli::Z, rot).expect("Z is conjugable"),
        ];
        let mut out = PauliSum::new(self.n_sites);
        for t in &self.terms {
            let mut partial: Vec<(Vec<Pauli>, f64)> = vec![(Vec::with_capacity(self.n_sites), t.coefficient)];
            for &p in &t.axes {
                let image = &images[p.index()];
                let mut next = Vec::with_capacity(partial.len() * 2);
                for (axes, c) in &partial {
                    for q in Pauli::ALL {
                        let w = image[q.index()];
                        if w.abs() <= ZERO_THRESHOLD {
                            continue;
                        }
                        let mut a = axes.clone();
                        a.push(q);
                        next.push((a, c * w));
                    }
                }
                partial = next;
            }
            out.terms.extend(
                partial
                    .into_iter()
                    .map(|(axes, coefficient)| PauliString { axes, coefficient }),
            );
        }
        out.canonicalize()
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Angles of one `W_P` rotation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RotationAngles {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
}

impl RotationAngles {
    /// `W = [[cos(phi1/2), -e^{i phi3} sin(phi1/2)], [e^{i phi2} sin(phi1/2), e^{i(phi2+phi3)} cos(phi1/2)]]`.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let (s, c) = (self.phi1 / 2.0).sin_cos();
        let e2 = Complex64::from_polar(1.0, self.phi2);
        let e3 = Complex64::from_polar(1.0, self.phi3);
        let e23 = Complex64::from_polar(1.0, self.phi2 + self.phi3);
        [
            [Complex64::new(c, 0.0), -e3 * s],
            [e2 * s, e23 * c],
        ]
    }
}

/// Added-noise rotation: one angle triple per Pauli type.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseRotation {
    pub x: RotationAngles,
    pub y: RotationAngles,
    pub z: RotationAngles,
    pub seed: u64,
}

impl NoiseRotation {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Draws `phi3` uniformly from `[-1, 1]` for each Pauli type, with
    /// `phi1 = phi2 = 0`.
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || RotationAngles {
            phi1: 0.0,
            phi2: 0.0,
            phi3: rng.gen_range(-1.0..=1.0),
        };
        let x = draw();
        let y = draw();
        let z = draw();
        Self { x, y, z, seed }
    }

    pub fn angles(&self, p: Pauli) -> Option<&RotationAngles> {
        match p {
            Pauli::I => None,
            Pauli::X => Some(&self.x),
            Pauli::Y => Some(&self.y),
            Pauli::Z => Some(&self.z),
        }
    }

    pub fn is_identity(&self) -> bool {
        [self.x, self.y, self.z]
            .iter()
            .all(|a| a.phi1 == 0.0 && a.phi2 == 0.0 && a.phi3 == 0.0)
    }
}

/// Expansion of `W_P^dagger P W_P` in the `{I, X, Y, Z}` basis, indexed by
/// [`Pauli::index`].
pub fn conjugate_pauli(p: Pauli, rot: &NoiseRotation) -> Result<[f64; 4]> {
    let angles = rot
        .angles(p)
        .ok_or_else(|| invalid("pauli", "identity factors are never transformed"))?;
    let w = angles.matrix();
    let pm = p.matrix();
    let image = mat2_mul(&mat2_adjoint(&w), &mat2_mul(&pm, &w));
    let mut coeffs = [0.0; 4];
    for q in Pauli::ALL {
        // Tr(sigma_q M) / 2; real because M is Hermitian.
        let s = mat2_mul(&q.matrix(), &image);
        coeffs[q.index()] = ((s[0][0] + s[1][1]) * 0.5).re;
    }
    Ok(coeffs)
}

pub(crate) fn mat2_mul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub(crate) fn mat2_adjoint(a: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        a.kronecker(b)
    }

    fn pauli_dense(p: Pauli) -> DMatrix<Complex64> {
        let m = p.matrix();
        DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
    }

    /// Independent oracle: explicit Kronecker products, site 0 leftmost.
    fn kron_oracle(sum: &PauliSum) -> DMatrix<Complex64> {
        let dim = 1 << sum.n_sites();
        let mut out = DMatrix::<Complex64>::zeros(dim, dim);
        for t in sum.terms() {
            let mut m = DMatrix::<Complex64>::identity(1, 1);
            for &p in t.axes() {
                m = kron(&m, &pauli_dense(p));
            }
            out += m * Complex64::new(t.coefficient(), 0.0);
        }
        out
    }

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn sum_of(n: usize, terms: &[(&str, f64)]) -> PauliSum {
        PauliSum::from_terms(
            n,
            terms
                .iter()
                .map(|(l, c)| PauliString::parse(l, *c).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn canonicalize_merges_and_cancels() {
        let s = sum_of(1, &[("Z", 2.0), ("Z", 3.0)]).canonicalize();
        assert_eq!(s.terms(), &[PauliString::parse("Z", 5.0).unwrap()]);

        let s = sum_of(2, &[("XX", 1.0)]).canonicalize();
        assert_eq!(s.terms(), &[PauliString::parse("XX", 1.0).unwrap()]);

        let s = sum_of(1, &[("Z", 1.0), ("Z", -1.0)]).canonicalize();
        assert!(s.is_empty());
    }

    #[test]
    fn canonical_order_is_lexicographic() {
        let s = sum_of(2, &[("ZI", 1.0), ("IX", 1.0), ("YY", 1.0), ("II", 1.0)]).canonicalize();
        let labels: Vec<_> = s.terms().iter().map(|t| t.label()).collect();
        assert_eq!(labels, ["II", "IX", "YY", "ZI"]);
        assert!(s.is_canonical());
    }

    #[test]
    fn dense_single_z_and_tensor_order() {
        let z = sum_of(1, &[("Z", 1.0)]).to_dense().unwrap();
        assert_eq!(z[(0, 0)].re, 1.0);
        assert_eq!(z[(1, 1)].re, -1.0);

        let x0 = sum_of(2, &[("XI", 1.0)]).to_dense().unwrap();
        let expected = kron(&pauli_dense(Pauli::X), &pauli_dense(Pauli::I));
        assert!(max_abs(&(x0 - expected)) < 1e-15);
    }

    #[test]
    fn dense_guard() {
        let s = PauliSum::from_terms(13, vec![PauliString::identity(13, 1.0).unwrap()]).unwrap();
        assert!(matches!(s.to_dense(), Err(Error::TooManySites { .. })));
    }

    #[test]
    fn expectation_basis_state_and_identity() {
        let rho = DensityState::basis_state(3, 0);
        let z0 = sum_of(3, &[("ZII", 1.0)]);
        assert!((z0.expectation(&rho).unwrap() - 1.0).abs() < 1e-15);

        let c = sum_of(3, &[("III", 2.5)]);
        let rho = DensityState::maximally_mixed(3);
        assert!((c.expectation(&rho).unwrap() - 2.5).abs() < 1e-14);

        assert!(matches!(
            z0.expectation(&DensityState::basis_state(2, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn conjugation_identity_and_phi3() {
        let zero = NoiseRotation::identity();
        let img = conjugate_pauli(Pauli::X, &zero).unwrap();
        assert_eq!(img, [0.0, 1.0, 0.0, 0.0]);

        let phi = 0.5;
        let mut rot = NoiseRotation::identity();
        rot.x.phi3 = phi;
        rot.z.phi3 = 0.7;
        let img = conjugate_pauli(Pauli::X, &rot).unwrap();
        assert!((img[1] - phi.cos()).abs() < 1e-14);
        assert!((img[2] + phi.sin()).abs() < 1e-14);
        assert!(img[0].abs() < 1e-14 && img[3].abs() < 1e-14);

        let img = conjugate_pauli(Pauli::Z, &rot).unwrap();
        assert!((img[3] - 1.0).abs() < 1e-14);
        assert!(img[..3].iter().all(|c| c.abs() < 1e-14));

        rot.y.phi3 = phi;
        let img = conjugate_pauli(Pauli::Y, &rot).unwrap();
        assert!((img[1] - phi.sin()).abs() < 1e-14);
        assert!((img[2] - phi.cos()).abs() < 1e-14);

        assert!(conjugate_pauli(Pauli::I, &rot).is_err());
    }

    #[test]
    fn conjugation_matches_direct_matrix_product() {
        // Direct 2x2 oracle: W^dagger X W with W = diag(1, e^{i phi3}).
        let phi = 0.5_f64;
        let e = Complex64::from_polar(1.0, phi);
        let direct = [[Complex64::new(0.0, 0.0), e], [e.conj(), Complex64::new(0.0, 0.0)]];
        let mut rot = NoiseRotation::identity();
        rot.x.phi3 = phi;
        let img = conjugate_pauli(Pauli::X, &rot).unwrap();
        let mut rebuilt = [[Complex64::new(0.0, 0.0); 2]; 2];
        for q in Pauli::ALL {
            let m = q.matrix();
            for i in 0..2 {
                for j in 0..2 {
                    rebuilt[i][j] += m[i][j] * img[q.index()];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((rebuilt[i][j] - direct[i][j]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sampled_rotation_is_reproducible_and_bounded() {
        let a = NoiseRotation::sample(42);
        let b = NoiseRotation::sample(42);
        assert_eq!(a, b);
        for ang in [a.x, a.y, a.z] {
            assert!((-1.0..=1.0).contains(&ang.phi3));
            assert_eq!(ang.phi1, 0.0);
            assert_eq!(ang.phi2, 0.0);
        }
        assert_ne!(NoiseRotation::sample(43), a);
    }

    #[test]
    fn pauli_products() {
        for a in Pauli::ALL {
            for b in Pauli::ALL {
                let (ph, c) = a.mul(b);
                let lhs = mat2_mul(&a.matrix(), &b.matrix());
                let cm = c.matrix();
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((lhs[i][j] - ph * cm[i][j]).norm() < 1e-15);
                    }
                }
            }
        }
    }

    fn arb_pauli() -> impl Strategy<Value = Pauli> {
        prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
    }

    fn arb_sum(n: usize) -> impl Strategy<Value = PauliSum> {
        prop::collection::vec((prop::collection::vec(arb_pauli(), n), -2.0..2.0f64), 0..12).prop_map(
            move |terms| {
                PauliSum::from_terms(
                    n,
                    terms
                        .into_iter()
                        .map(|(axes, c)| PauliString::new(axes, c).unwrap())
                        .collect(),
                )
                .unwrap()
            },
        )
    }

    fn arb_rotation() -> impl Strategy<Value = NoiseRotation> {
        let ang = || (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b, c)| RotationAngles {
            phi1: a,
            phi2: b,
            phi3: c,
        });
        (ang(), ang(), ang()).prop_map(|(x, y, z)| NoiseRotation { x, y, z, seed: 0 })
    }

    proptest! {
        #[test]
        fn dense_matches_kron_oracle_and_canonical_form(s in arb_sum(3)) {
            let dense = s.to_dense().unwrap();
            prop_assert!(max_abs(&(&dense - kron_oracle(&s))) < 1e-12);
            let canon = s.canonicalize().to_dense().unwrap();
            prop_assert!(max_abs(&(&dense - canon)) < 1e-12);
            prop_assert!(max_abs(&(&dense - dense.adjoint())) < 1e-12);
        }

        #[test]
        fn conjugation_preserves_spectrum(rot in arb_rotation(), k in 1usize..4) {
            let p = Pauli::ALL[k];
            let img = conjugate_pauli(p, &rot).unwrap();
            // Hermitian 2x2 with real Pauli weights: eigenvalues c_I +- |(c_X, c_Y, c_Z)|.
            prop_assert!(img[0].abs() < 1e-12);
            let norm = (img[1] * img[1] + img[2] * img[2] + img[3] * img[3]).sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }

        #[test]
        fn conjugated_sum_is_hermitian(s in arb_sum(2), rot in arb_rotation()) {
            let d = s.conjugated(&rot).to_dense().unwrap();
            prop_assert!(max_abs(&(&d - d.adjoint())) < 1e-12);
        }

        #[test]
        fn expectation_is_linear(a in arb_sum(2), b in arb_sum(2), w in -2.0..2.0f64, seed in 0u64..1000) {
            let rho = DensityState::random_mixed(2, seed);
            let ea = a.expectation(&rho).unwrap();
            let eb = b.expectation(&rho).unwrap();
            let mut combined = PauliSum::new(2);
            for t in a.terms() {
                combined.push(PauliString::new(t.axes().to_vec(), w * t.coefficient()).unwrap()).unwrap();
            }
            for t in b.terms() {
                combined.push(t.clone()).unwrap();
            }
            let ec = combined.expectation(&rho).unwrap();
            prop_assert!((ec - (w * ea + eb)).abs() < 1e-10);

            // Against the dense trace.
            let dense = a.to_dense().unwrap();
            let tr = (dense * rho.to_matrix()).trace();
            prop_assert!((tr.re - ea).abs() < 1e-10);
            prop_assert!(tr.im.abs() < 1e-10);
        }
    }
}
