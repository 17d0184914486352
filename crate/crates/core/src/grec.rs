//! Per-time-point linear regression from added-noise lines to ideal energies.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::adiabatic::{EnergyLine, Variant};
use crate::error::{invalid, Error, Result};
use crate::metrics::{region_error, Method, Region};
use crate::model::DomainSpec;

/// Ideal line of one training ramp together with its added-noise lines
/// (`noisy[r - 1]` is realization `r`).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingLine {
    pub ideal: EnergyLine,
    pub noisy: Vec<EnergyLine>,
}

impl TrainingLine {
    pub fn tau(&self) -> usize {
        self.ideal.tau()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub lines: Vec<TrainingLine>,
}

impl TrainingSet {
    pub fn new(lines: Vec<TrainingLine>) -> Result<Self> {
        let ts = Self { lines };
        ts.validate()?;
        Ok(ts)
    }

    /// Largest realization count over all lines.
    pub fn r_max(&self) -> usize {
        self.lines.iter().map(|l| l.noisy.len()).max().unwrap_or(0)
    }

    pub fn n_points(&self) -> usize {
        self.lines.first().map_or(0, |l| l.ideal.n_points())
    }

    pub fn levels(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.lines.iter().map(|l| l.ideal.alpha).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn for_level(&self, alpha: usize) -> impl Iterator<Item = &TrainingLine> {
        self.lines.iter().filter(move |l| l.ideal.alpha == alpha)
    }

    /// Keeps the `n_train` ramps per level whose endpoints lie nearest to the
    /// prediction region (smallest `tau`).
    pub fn nearest(&self, n_train: usize) -> TrainingSet {
        let lines = self
            .lines
            .iter()
            .filter(|l| l.tau() <= n_train)
            .cloned()
            .collect();
        TrainingSet { lines }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_points();
        for l in &self.lines {
            if l.ideal.n_points() != n {
                return Err(Error::Misaligned(format!(
                    "training line tau={} has {} points, expected {n}",
                    l.tau(),
                    l.ideal.n_points()
                )));
            }
            for noisy in &l.noisy {
                if noisy.n_points() != n || noisy.alpha != l.ideal.alpha || noisy.schedule != l.ideal.schedule {
                    return Err(Error::Misaligned(format!(
                        "noisy line {} does not match its ideal line (alpha {}, tau {})",
                        noisy.variant,
                        l.ideal.alpha,
                        l.tau()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Coefficients `eta[0]` (offset) and `eta[r]` for realizations `r = 1..=R`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaRow {
    pub eta: Vec<f64>,
    /// Euclidean norm of the fit residual.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EtaTable {
    pub r_max: usize,
    pub rows: BTreeMap<(usize, usize), EtaRow>,
}

impl EtaTable {
    pub fn get(&self, alpha: usize, i: usize) -> Option<&EtaRow> {
        self.rows.get(&(alpha, i))
    }

    /// Flattened `(alpha, i, r, eta)` entries in key order.
    pub fn entries(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (&(alpha, i), row) in &self.rows {
            for (r, &eta) in row.eta.iter().enumerate() {
                out.push((alpha, i, r, eta));
            }
        }
        out
    }
}

/// Minimum-norm least-squares solution of `a x = b` via SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * smax;
    let x = if smax == 0.0 {
        DVector::zeros(a.ncols())
    } else {
        svd.solve(b, cutoff).map_err(|e| invalid("lstsq", e))?
    };
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}

/// Design matrix row for one training line at time point `i`.
fn design_row(line: &TrainingLine, i: usize, r_max: usize) -> Vec<f64> {
    let mut row = vec![0.0; r_max + 1];
    row[0] = 1.0;
    for (k, noisy) in line.noisy.iter().enumerate() {
        row[k + 1] = noisy.energy(i);
    }
    row
}

/// Fits `ideal(tau, i) ~ eta_0 + sum_r eta_r noisy_r(tau, i)` over the
/// training ramps of level `alpha`. Realizations absent from a ramp enter as
/// zero.
pub fn fit_etas(ts: &TrainingSet, alpha: usize, i: usize) -> Result<EtaRow> {
    let r_max = ts.r_max();
    let lines: Vec<&TrainingLine> = ts.for_level(alpha).collect();
    if lines.len() < r_max + 1 || r_max == 0 {
        return Err(Error::Underdetermined {
            points: lines.len(),
            unknowns: r_max + 1,
        });
    }
    if i >= ts.n_points() {
        return Err(invalid("i", format!("time point {i} beyond {} samples", ts.n_points())));
    }
    let a = DMatrix::from_fn(lines.len(), r_max + 1, |row, col| design_row(lines[row], i, r_max)[col]);
    let b = DVector::from_iterator(lines.len(), lines.iter().map(|l| l.ideal.energy(i)));
    let (x, residual) = lstsq(&a, &b)?;
    Ok(EtaRow {
        eta: x.iter().copied().collect(),
        residual,
    })
}

/// Fits every `(alpha, i)` independently.
pub fn fit_eta_table(ts: &TrainingSet, levels: &[usize]) -> Result<EtaTable> {
    ts.validate()?;
    let n = ts.n_points();
    let keys: Vec<(usize, usize)> = levels.iter().flat_map(|&a| (0..n).map(move |i| (a, i))).collect();
    let rows = keys
        .par_iter()
        .map(|&(a, i)| fit_etas(ts, a, i).map(|row| ((a, i), row)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(EtaTable {
        r_max: ts.r_max(),
        rows,
    })
}

/// Applies `mitigated(i) = eta_0 + sum_r eta_r noisy_r(i)` to the main lines
/// of level `alpha` (`main_noisy[r - 1]` is realization `r`).
pub fn mitigate_line(main_noisy: &[EnergyLine], etas: &EtaTable, alpha: usize, n_evol: usize) -> Result<EnergyLine> {
    let first = main_noisy
        .first()
        .ok_or_else(|| invalid("main_noisy", "need at least one realization"))?;
    if main_noisy.len() > etas.r_max {
        return Err(Error::Misaligned(format!(
            "{} realizations but coefficients for {}",
            main_noisy.len(),
            etas.r_max
        )));
    }
    for l in main_noisy {
        if l.n_points() != first.n_points() || l.alpha != alpha {
            return Err(Error::Misaligned(format!("main line {} does not match level {alpha}", l.variant)));
        }
    }
    let energies = (0..first.n_points())
        .map(|i| {
            let row = etas.get(alpha, i).ok_or(Error::MissingEtas { alpha, i })?;
            Ok(row.eta[0]
                + main_noisy
                    .iter()
                    .enumerate()
                    .map(|(k, l)| row.eta[k + 1] * l.energy(i))
                    .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    EnergyLine::from_energies(alpha, first.schedule, Variant::GrecMitigated(n_evol), &energies)
}

/// Single coefficient row pooled over all time points of the training lines.
pub fn fit_etas_pooled(ts: &TrainingSet, alpha: usize) -> Result<EtaRow> {
    let r_max = ts.r_max();
    let lines: Vec<&TrainingLine> = ts.for_level(alpha).collect();
    let n = ts.n_points();
    let rows = lines.len() * n;
    if rows < r_max + 1 || r_max == 0 {
        return Err(Error::Underdetermined {
            points: rows,
            unknowns: r_max + 1,
        });
    }
    let mut a = DMatrix::zeros(rows, r_max + 1);
    let mut b = DVector::zeros(rows);
    for (k, line) in lines.iter().enumerate() {
        for i in 0..n {
            let row = design_row(line, i, r_max);
            for (c, v) in row.into_iter().enumerate() {
                a[(k * n + i, c)] = v;
            }
            b[k * n + i] = line.ideal.energy(i);
        }
    }
    let (x, residual) = lstsq(&a, &b)?;
    Ok(EtaRow {
        eta: x.iter().copied().collect(),
        residual,
    })
}

/// Broadcasts one pooled row to every time point.
pub fn pooled_table(row: &EtaRow, alpha: usize, n_points: usize, r_max: usize) -> EtaTable {
    EtaTable {
        r_max,
        rows: (0..n_points).map(|i| ((alpha, i), row.clone())).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrecSweepEntry {
    pub n_train: usize,
    pub n_evol: usize,
    pub error: f64,
    pub etas: EtaTable,
    pub mitigated: Vec<EnergyLine>,
}

/// Fits and mitigates for each `n_train`, scoring the prediction region.
/// `main_noisy[k]` holds the realizations of level `ed_lines[k].alpha`.
pub fn sweep_training_lines(
    ts: &TrainingSet,
    main_noisy: &[Vec<EnergyLine>],
    ed_lines: &[EnergyLine],
    domain: &DomainSpec,
    n_train_range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<GrecSweepEntry>> {
    let levels: Vec<usize> = ed_lines.iter().map(|l| l.alpha).collect();
    n_train_range
        .map(|n_train| {
            let subset = ts.nearest(n_train);
            let etas = fit_eta_table(&subset, &levels)?;
            let n_evol = n_train + 1;
            let mitigated = levels
                .iter()
                .zip(main_noisy)
                .map(|(&a, lines)| mitigate_line(lines, &etas, a, n_evol))
                .collect::<Result<Vec<_>>>()?;
            let error = region_error(Method::Grec, &mitigated, ed_lines, domain, Region::Prediction)?.value;
            Ok(GrecSweepEntry {
                n_train,
                n_evol,
                error,
                etas,
                mitigated,
            })
        })
        .collect()
}

/// Least-squares line `ideal - mitigated = a l0 + b` over the learning region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trend {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

impl Trend {
    pub fn at(&self, l0: f64) -> f64 {
        self.a * l0 + self.b
    }
}

pub fn trend_check(mitigated: &EnergyLine, ideal: &EnergyLine, domain: &DomainSpec) -> Result<Trend> {
    if mitigated.n_points() != ideal.n_points() {
        return Err(Error::Misaligned("trend lines differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = mitigated
        .samples
        .iter()
        .zip(&ideal.samples)
        .filter(|(m, _)| domain.in_learning(m.l0))
        .map(|(m, e)| (m.l0, e.energy - m.energy))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptyRegion(format!("{} learning points, need 2", pts.len())));
    }
    // Center l0 to keep the 2x2 system well conditioned.
    let mean = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let a = DMatrix::from_fn(pts.len(), 2, |r, c| if c == 0 { pts[r].0 - mean } else { 1.0 });
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let (x, residual) = lstsq(&a, &y)?;
    Ok(Trend {
        a: x[0],
        b: x[1] - x[0] * mean,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{training_schedules, RampSchedule};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom() -> DomainSpec {
        DomainSpec::preset(0.0).unwrap()
    }

    /// Training set with `n` ramps of `points` samples; `ideal(tau, i)` and
    /// `noisy_r(tau, i)` supplied by closures.
    fn synthetic(
        n: usize,
        r: usize,
        points: usize,
        ideal: impl Fn(usize, usize) -> f64,
        noisy: impl Fn(usize, usize, usize) -> f64,
    ) -> TrainingSet {
        let scheds = training_schedules(&dom(), 10.0, points - 1, n).unwrap();
        let lines = scheds
            .iter()
            .map(|s| {
                let tau = s.kind.tau();
                let e: Vec<f64> = (0..points).map(|i| ideal(tau, i)).collect();
                TrainingLine {
                    ideal: EnergyLine::from_energies(0, *s, Variant::IdealEd, &e).unwrap(),
                    noisy: (1..=r)
                        .map(|k| {
                            let e: Vec<f64> = (0..points).map(|i| noisy(tau, i, k)).collect();
                            EnergyLine::from_energies(0, *s, Variant::AddedNoise(k), &e).unwrap()
                        })
                        .collect(),
                }
            })
            .collect();
        TrainingSet::new(lines).unwrap()
    }

    /// Solves the normal equations `A^T A x = A^T b` by Gaussian elimination
    /// with partial pivoting.
    fn normal_equations(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = a[0].len();
        let mut m = vec![vec![0.0; n + 1]; n];
        for (row, &y) in a.iter().zip(b) {
            for j in 0..n {
                for k in 0..n {
                    m[j][k] += row[j] * row[k];
                }
                m[j][n] += row[j] * y;
            }
        }
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
            m.swap(c, p);
            for r in 0..n {
                if r != c {
                    let f = m[r][c] / m[c][c];
                    for k in c..=n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
        (0..n).map(|j| m[j][n] / m[j][j]).collect()
    }

    #[test]
    fn perfect_data_recovery() {
        let ts = synthetic(2, 1, 5, |tau, i| 1.0 + tau as f64 + 0.1 * i as f64, |tau, i, _| 1.0 + tau as f64 + 0.1 * i as f64);
        let row = fit_etas(&ts, 0, 3).unwrap();
        assert!((row.eta[1] - 1.0).abs() < 1e-12 && row.eta[0].abs() < 1e-12);
        assert!(row.residual < 1e-10);
        let table = fit_eta_table(&ts, &[0]).unwrap();
        for l in &ts.lines {
            let m = mitigate_line(&l.noisy, &table, 0, 3).unwrap();
            for (a, b) in m.samples.iter().zip(&l.ideal.samples) {
                assert!((a.energy - b.energy).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn offset_absorbed() {
        let c = 0.37;
        let ts = synthetic(4, 1, 3, |tau, i| (tau * tau) as f64 + i as f64, |tau, i, _| (tau * tau) as f64 + i as f64 + c);
        let row = fit_etas(&ts, 0, 1).unwrap();
        assert!((row.eta[1] - 1.0).abs() < 1e-10);
        assert!((row.eta[0] + c).abs() < 1e-10);
    }

    #[test]
    fn identity_coefficients_pass_through() {
        let d = dom();
        let s = RampSchedule::main(&d, 10.0, 10).unwrap();
        let e: Vec<f64> = (0..11).map(|i| i as f64 * 0.3).collect();
        let main = EnergyLine::from_energies(1, s, Variant::AddedNoise(1), &e).unwrap();
        let table = EtaTable {
            r_max: 1,
            rows: (0..11).map(|i| ((1, i), EtaRow { eta: vec![0.0, 1.0], residual: 0.0 })).collect(),
        };
        let m = mitigate_line(std::slice::from_ref(&main), &table, 1, 3).unwrap();
        assert_eq!(m.energies(), e);
        assert_eq!(m.variant, Variant::GrecMitigated(3));
        let mut missing = table.clone();
        missing.rows.remove(&(1, 4));
        assert!(matches!(mitigate_line(&[main], &missing, 1, 3), Err(Error::MissingEtas { alpha: 1, i: 4 })));
    }

    #[test]
    fn underdetermined_rejected() {
        let ts = synthetic(2, 2, 3, |_, _| 0.0, |_, _, _| 0.0);
        assert!(matches!(fit_etas(&ts, 0, 0), Err(Error::Underdetermined { points: 2, unknowns: 3 })));
    }

    #[test]
    fn rank_deficient_gives_min_norm() {
        // All training lines identical at i: rows repeat, rank 1.
        let ts = synthetic(5, 1, 2, |_, _| 2.0, |_, _, _| 3.0);
        let row = fit_etas(&ts, 0, 0).unwrap();
        // Min-norm solution of eta0 + 3 eta1 = 2 is (2, 6) / 10.
        assert!((row.eta[0] - 0.2).abs() < 1e-12);
        assert!((row.eta[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..100 {
            let r = 1 + case % 3;
            let n = rng.gen_range(r + 1..=11);
            let vals: Vec<Vec<f64>> = (0..n * (r + 1)).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect();
            let ts = synthetic(
                n,
                r,
                2,
                |tau, _| vals[(tau - 1) * (r + 1)][0],
                |tau, _, k| vals[(tau - 1) * (r + 1) + k][0],
            );
            let rows: Vec<Vec<f64>> = (1..=n)
                .map(|tau| {
                    let mut row = vec![1.0];
                    row.extend((1..=r).map(|k| vals[(tau - 1) * (r + 1) + k][0]));
                    row
                })
                .collect();
            let b: Vec<f64> = (1..=n).map(|tau| vals[(tau - 1) * (r + 1)][0]).collect();
            let expect = normal_equations(&rows, &b);
            let got = fit_etas(&ts, 0, 0).unwrap();
            for (g, e) in got.eta.iter().zip(&expect) {
                assert!((g - e).abs() < 1e-10, "case {case}: {g} vs {e}");
            }
        }
    }

    #[test]
    fn trend_examples() {
        let d = dom();
        let s = RampSchedule::main(&d, 10.0, 100).unwrap();
        let ideal: Vec<f64> = (0..=100).map(|i| (i as f64).sqrt()).collect();
        let id = EnergyLine::from_energies(0, s, Variant::IdealEd, &ideal).unwrap();
        let t = trend_check(&id, &id, &d).unwrap();
        assert!(t.a.abs() < 1e-9 && t.b.abs() < 1e-9);
        let shifted: Vec<f64> = ideal.iter().zip(s.l0_grid()).map(|(e, l)| e - (2.0 * l + 1.0)).collect();
        let m = EnergyLine::from_energies(0, s, Variant::GrecMitigated(3), &shifted).unwrap();
        let t = trend_check(&m, &id, &d).unwrap();
        assert!((t.a - 2.0).abs() < 1e-6 && (t.b - 1.0).abs() < 1e-6, "{t:?}");
        let short = RampSchedule::new(d.l0_int + 1e-6, d.l0_max, 10.0, 1, crate::model::RampKind::Main).unwrap();
        let e = EnergyLine::from_energies(0, short, Variant::IdealEd, &[0.0, 0.0]).unwrap();
        assert!(trend_check(&e, &e, &d).is_err());
    }

    #[test]
    fn sweep_has_one_entry_per_n_train() {
        let ts = synthetic(11, 1, 4, |tau, i| (tau + i) as f64, |tau, i, _| (tau + i) as f64 * 1.1);
        let d = dom();
        let s = RampSchedule::main(&d, 10.0, 3).unwrap();
        let ed = EnergyLine::from_energies(0, s, Variant::IdealEd, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let main = EnergyLine::from_energies(0, s, Variant::AddedNoise(1), &[1.1, 2.2, 3.3, 4.4]).unwrap();
        let sweep = sweep_training_lines(&ts, &[vec![main]], &[ed], &d, 2..=11).unwrap();
        assert_eq!(sweep.len(), 10);
        assert_eq!(sweep[0].n_evol, 3);
        assert_eq!(sweep[9].n_evol, 12);
        assert!(sweep.iter().all(|e| e.error < 1e-9));
    }

    #[test]
    fn nearest_keeps_smallest_tau() {
        let ts = synthetic(11, 1, 2, |_, _| 0.0, |_, _, _| 0.0);
        let sub = ts.nearest(3);
        let taus: Vec<usize> = sub.lines.iter().map(|l| l.tau()).collect();
        assert_eq!(taus, vec![1, 2, 3]);
    }

    #[test]
    fn pooled_mode_recovers_global_map() {
        let ts = synthetic(3, 1, 6, |tau, i| 0.5 * (tau * 7 + i) as f64 - 1.0, |tau, i, _| (tau * 7 + i) as f64);
        let row = fit_etas_pooled(&ts, 0).unwrap();
        assert!((row.eta[1] - 0.5).abs() < 1e-10 && (row.eta[0] + 1.0).abs() < 1e-10);
        let table = pooled_table(&row, 0, 6, 1);
        assert_eq!(table.rows.len(), 6);
    }

    proptest! {
        #[test]
        fn affine_shift_leaves_mitigation_unchanged(
            c in -2.0f64..2.0,
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ideal: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let noisy: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let main: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let base = synthetic(4, 1, 2, |t, i| ideal[(t - 1) * 2 + i], |t, i, _| noisy[(t - 1) * 2 + i]);
            let moved = synthetic(4, 1, 2, |t, i| ideal[(t - 1) * 2 + i], |t, i, _| noisy[(t - 1) * 2 + i] + c);
            let s = RampSchedule::main(&dom(), 10.0, 1).unwrap();
            let m0 = EnergyLine::from_energies(0, s, Variant::AddedNoise(1), &main).unwrap();
            let m1 = EnergyLine::from_energies(0, s, Variant::AddedNoise(1), &[main[0] + c, main[1] + c]).unwrap();
            let a = mitigate_line(&[m0], &fit_eta_table(&base, &[0]).unwrap(), 0, 5).unwrap();
            let b = mitigate_line(&[m1], &fit_eta_table(&moved, &[0]).unwrap(), 0, 5).unwrap();
            for (x, y) in a.samples.iter().zip(&b.samples) {
                prop_assert!((x.energy - y.energy).abs() < 1e-9);
            }
        }

        #[test]
        fn time_points_fit_independently(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ideal: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let noisy: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let perm = [2usize, 0, 4, 1, 3];
            let ts = synthetic(3, 1, 5, |t, i| ideal[(t - 1) * 5 + i], |t, i, _| noisy[(t - 1) * 5 + i]);
            let tp = synthetic(3, 1, 5, |t, i| ideal[(t - 1) * 5 + perm[i]], |t, i, _| noisy[(t - 1) * 5 + perm[i]]);
            let a = fit_eta_table(&ts, &[0]).unwrap();
            let b = fit_eta_table(&tp, &[0]).unwrap();
            for (i, &p) in perm.iter().enumerate() {
                prop_assert_eq!(&b.get(0, i).unwrap().eta, &a.get(0, p).unwrap().eta);
            }
        }
    }
}
