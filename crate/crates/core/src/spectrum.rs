//! Exact diagonalization: eigenpairs, level tracking by eigenvector overlap,
//! and crossing/gap location.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{build_hamiltonian, DomainSpec, ModelParams};
use crate::pauli::PauliSum;

/// Largest matrix dimension accepted by [`eigensolve`].
pub const MAX_EIGEN_DIM: usize = 4096;
/// Minimum gap required to label a level at the start of a ramp.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Minimum squared overlap accepted when continuing a level to the next grid point.
pub const MIN_TRACKING_OVERLAP: f64 = 0.5;

/// The `k` lowest eigenpairs at one background field.
#[derive(Clone, Debug)]
pub struct SpectrumSlice {
    pub l0: f64,
    pub energies: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

/// `k` lowest eigenpairs of a Hermitian Pauli sum. Each eigenvector is
/// phased so its largest-magnitude component (first on ties) is real positive.
pub fn eigensolve(sum: &PauliSum, k: usize) -> Result<SpectrumSlice> {
    let dim = 1usize
        .checked_shl(sum.n_sites() as u32)
        .filter(|&d| d <= MAX_EIGEN_DIM)
        .ok_or(Error::TooManySites {
            n_sites: sum.n_sites(),
            limit: MAX_EIGEN_DIM.trailing_zeros() as usize,
        })?;
    if k == 0 || k > dim {
        return Err(invalid("k", format!("{k} outside 1..={dim}")));
    }
    let h = sum.to_dense()?;
    let (energies, states) = hermitian_eigen(&h)?;
    Ok(SpectrumSlice {
        l0: f64::NAN,
        energies: energies.into_iter().take(k).collect(),
        states: states.into_iter().take(k).collect(),
    })
}

/// Full ascending eigendecomposition of a Hermitian matrix.
pub fn hermitian_eigen(h: &DMatrix<Complex64>) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let deviation = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if deviation > 1e-10 * scale {
        return Err(Error::NotHermitian { deviation });
    }
    let dim = h.nrows();
    let real = h.iter().all(|z| z.im == 0.0);
    let (values, vectors): (Vec<f64>, DMatrix<Complex64>) = if real {
        let m = DMatrix::<f64>::from_fn(dim, dim, |r, c| 0.5 * (h[(r, c)].re + h[(c, r)].re));
        let eig = SymmetricEigen::new(m);
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
        )
    } else {
        let m = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(m);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let energies = order.iter().map(|&j| values[j]).collect();
    let states = order
        .iter()
        .map(|&j| {
            let mut v: Vec<Complex64> = vectors.column(j).iter().copied().collect();
            fix_phase(&mut v);
            v
        })
        .collect();
    Ok((energies, states))
}

fn fix_phase(v: &mut [Complex64]) {
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let biggest = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let Some(pivot) = v.iter().position(|z| z.norm() >= biggest - 1e-12) else {
        return;
    };
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
}

/// `|<a|b>|^2`.
pub fn overlap_sq(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}

/// Energies and eigenstates of each tracked level over a grid.
#[derive(Clone, Debug)]
pub struct TrackedLines {
    pub l0_grid: Vec<f64>,
    /// `lines[alpha][j]` is the energy of level `alpha` at `l0_grid[j]`.
    pub lines: Vec<Vec<f64>>,
    /// `states[alpha][j]`, matching `lines`.
    pub states: Vec<Vec<Vec<Complex64>>>,
    /// Smallest squared overlap used along each line.
    pub min_overlap: Vec<f64>,
}

impl TrackedLines {
    pub fn n_levels(&self) -> usize {
        self.lines.len()
    }
}

/// Diagonalizes `H(l0)` at every grid point (in parallel), keeping `k` levels.
pub fn spectrum_on_grid(params: &ModelParams, l0_grid: &[f64], k: usize) -> Result<Vec<SpectrumSlice>> {
    l0_grid
        .par_iter()
        .map(|&l0| {
            let h = build_hamiltonian(params, l0)?;
            let mut slice = eigensolve(&h, k)?;
            slice.l0 = l0;
            Ok(slice)
        })
        .collect()
}

/// Tracks levels `alpha in 0..n_levels` from `l0_grid[0]` by maximal
/// eigenvector overlap. Lines may cross.
pub fn track_levels(params: &ModelParams, l0_grid: &[f64], n_levels: usize) -> Result<TrackedLines> {
    if l0_grid.is_empty() {
        return Err(invalid("l0_grid", "empty grid"));
    }
    if l0_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("l0_grid", "grid must be ascending"));
    }
    let dim = 1usize << params.n_sites;
    // Spare candidates let a tracked level leave the lowest n_levels.
    let k = (n_levels + 2).min(dim);
    let slices = spectrum_on_grid(params, l0_grid, k)?;

    let mut lines = vec![Vec::with_capacity(l0_grid.len()); n_levels];
    let mut states = vec![Vec::with_capacity(l0_grid.len()); n_levels];
    let mut min_overlap = vec![1.0; n_levels];
    for alpha in 0..n_levels {
        lines[alpha].push(slices[0].energies[alpha]);
        states[alpha].push(slices[0].states[alpha].clone());
    }
    for j in 1..slices.len() {
        let next = &slices[j];
        let mut taken = vec![false; k];
        for alpha in 0..n_levels {
            let prev = states[alpha].last().expect("seeded");
            let (best, overlap) = (0..k)
                .filter(|&c| !taken[c])
                .map(|c| (c, overlap_sq(prev, &next.states[c])))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one candidate");
            if overlap < MIN_TRACKING_OVERLAP {
                return Err(Error::TrackingAmbiguous {
                    l0: next.l0,
                    alpha,
                    overlap,
                });
            }
            taken[best] = true;
            min_overlap[alpha] = f64::min(min_overlap[alpha], overlap);
            lines[alpha].push(next.energies[best]);
            states[alpha].push(next.states[best].clone());
        }
    }
    Ok(TrackedLines {
        l0_grid: l0_grid.to_vec(),
        lines,
        states,
        min_overlap,
    })
}

/// Tracked lines for the two lowest levels at `l0_min`, over a grid inside
/// the domain.
pub fn ideal_lines(params: &ModelParams, domain: &DomainSpec, l0_grid: &[f64]) -> Result<TrackedLines> {
    domain.validate()?;
    let tol = 1e-12;
    if l0_grid
        .iter()
        .any(|&l| l < domain.l0_min - tol || l > domain.l0_max + tol)
    {
        return Err(invalid("l0_grid", "grid leaves [l0_min, l0_max]"));
    }
    track_levels(params, l0_grid, 2)
}

/// Normalized eigenvector of `H(l0)` for level `alpha`, rejecting a
/// degenerate neighbour.
pub fn prepare_initial_state(params: &ModelParams, l0: f64, alpha: usize) -> Result<Vec<Complex64>> {
    let h = build_hamiltonian(params, l0)?;
    let dim = 1usize << params.n_sites;
    let k = (alpha + 2).min(dim);
    let slice = eigensolve(&h, k)?;
    if alpha >= slice.energies.len() {
        return Err(invalid("alpha", format!("level {alpha} does not exist")));
    }
    for other in [alpha.checked_sub(1), Some(alpha + 1)].into_iter().flatten() {
        if other < slice.energies.len() {
            let gap = (slice.energies[other] - slice.energies[alpha]).abs();
            if gap < DEGENERACY_TOL {
                return Err(Error::Degenerate { l0, alpha, other, gap });
            }
        }
    }
    Ok(slice.states[alpha].clone())
}

/// Location of the smallest `E_1 - E_0` on a uniform grid, refined by
/// golden-section search inside the best bracket.
pub fn locate_min_gap(params: &ModelParams, lo: f64, hi: f64, n_points: usize) -> Result<(f64, f64)> {
    if n_points < 3 || !(hi > lo) {
        return Err(invalid("grid", "need hi > lo and at least 3 points"));
    }
    let grid: Vec<f64> = (0..n_points)
        .map(|j| lo + (hi - lo) * j as f64 / (n_points - 1) as f64)
        .collect();
    let gap_at = |l0: f64| -> Result<f64> {
        let s = eigensolve(&build_hamiltonian(params, l0)?, 2)?;
        Ok(s.energies[1] - s.energies[0])
    };
    let gaps: Vec<f64> = grid.par_iter().map(|&l| gap_at(l)).collect::<Result<_>>()?;
    let j = gaps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .expect("non-empty grid");
    let (mut a, mut b) = (grid[j.saturating_sub(1)], grid[(j + 1).min(n_points - 1)]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (gap_at(c)?, gap_at(d)?);
    for _ in 0..60 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = gap_at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = gap_at(d)?;
        }
    }
    let l0 = 0.5 * (a + b);
    let best = gap_at(l0)?;
    if best <= gaps[j] {
        Ok((l0, best))
    } else {
        Ok((grid[j], gaps[j]))
    }
}

/// Sign changes of `lines[0] - lines[1]`, each located by linear
/// interpolation between grid points.
pub fn crossings(lines: &TrackedLines) -> Vec<f64> {
    if lines.n_levels() < 2 {
        return Vec::new();
    }
    let diff: Vec<f64> = lines.lines[0]
        .iter()
        .zip(&lines.lines[1])
        .map(|(a, b)| a - b)
        .collect();
    let mut out = Vec::new();
    for j in 1..diff.len() {
        let (d0, d1) = (diff[j - 1], diff[j]);
        if d0 == 0.0 && j == 1 {
            out.push(lines.l0_grid[0]);
        }
        if (d0 < 0.0 && d1 >= 0.0) || (d0 > 0.0 && d1 <= 0.0) {
            let (x0, x1) = (lines.l0_grid[j - 1], lines.l0_grid[j]);
            out.push(x0 + (x1 - x0) * d0 / (d0 - d1));
        }
    }
    out
}

/// Uniform grid with `n_points` points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n_points: usize) -> Vec<f64> {
    if n_points == 1 {
        return vec![lo];
    }
    (0..n_points)
        .map(|j| {
            if j == n_points - 1 {
                hi
            } else {
                lo + (hi - lo) * j as f64 / (n_points - 1) as f64
            }
        })
        .collect()
}
