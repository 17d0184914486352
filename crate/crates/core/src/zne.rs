//! Zero-noise extrapolation of folded lines, one time point at a time.

use crate::adiabatic::{EnergyLine, Variant};
use crate::error::{invalid, Error, Result};
use crate::metrics::{region_error, Method, Region};
use crate::model::DomainSpec;

/// Noise factors `1, 3, ..., 2 n_evol - 1`.
pub fn noise_factors(n_evol: usize) -> Vec<usize> {
    (1..=n_evol).map(|q| 2 * q - 1).collect()
}

/// `(f, energy)` pairs of one time point.
#[derive(Clone, Debug, PartialEq)]
pub struct ZneSeries {
    pub i: usize,
    pub points: Vec<(usize, f64)>,
}

impl ZneSeries {
    pub fn validate(&self) -> Result<()> {
        let fs: Vec<usize> = self.points.iter().map(|p| p.0).collect();
        if fs.len() < 2 {
            return Err(invalid("n_evol", format!("{} noise factors, need at least 2", fs.len())));
        }
        if fs != noise_factors(fs.len()) {
            return Err(invalid("f", format!("factors {fs:?} are not 1, 3, 5, ...")));
        }
        Ok(())
    }
}

/// Ordinary least-squares line through `(f, E)` evaluated at `f = 0`.
pub fn extrapolate_point(series: &ZneSeries) -> Result<f64> {
    let n = series.points.len();
    if n < 2 {
        return Err(invalid("series", format!("{n} points, need at least 2")));
    }
    let nf = n as f64;
    let fm = series.points.iter().map(|p| p.0 as f64).sum::<f64>() / nf;
    let em = series.points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(f, e) in &series.points {
        let df = f as f64 - fm;
        sxy += df * (e - em);
        sxx += df * df;
    }
    if sxx == 0.0 {
        return Err(invalid("f", "all noise factors equal"));
    }
    Ok(em - sxy / sxx * fm)
}

/// Extrapolates every time point of the folded lines of one level
/// (`lines[q - 1]` folded with `f = 2q - 1`).
pub fn mitigate_line_zne(lines: &[EnergyLine], alpha: usize) -> Result<EnergyLine> {
    let first = lines.first().ok_or_else(|| invalid("lines", "no folded lines"))?;
    let mut factors = Vec::with_capacity(lines.len());
    for l in lines {
        match l.variant {
            Variant::Zne(f) => factors.push(f),
            Variant::NoisyOrig => factors.push(1),
            v => return Err(Error::Misaligned(format!("{v} is not a folded line"))),
        }
        if l.alpha != alpha || l.n_points() != first.n_points() {
            return Err(Error::Misaligned(format!("folded line {} does not match level {alpha}", l.variant)));
        }
    }
    let energies = (0..first.n_points())
        .map(|i| {
            let series = ZneSeries {
                i,
                points: factors.iter().zip(lines).map(|(&f, l)| (f, l.energy(i))).collect(),
            };
            series.validate()?;
            extrapolate_point(&series)
        })
        .collect::<Result<Vec<f64>>>()?;
    EnergyLine::from_energies(alpha, first.schedule, Variant::ZneMitigated(lines.len()), &energies)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZneSweepEntry {
    pub n_evol: usize,
    pub error: f64,
    pub mitigated: Vec<EnergyLine>,
}

/// Extrapolates with the first `n_evol` factors for each `n_evol` in range.
/// `folded[k][q - 1]` is the `f = 2q - 1` line of level `ed_lines[k].alpha`.
pub fn sweep_noise_factors(
    folded: &[Vec<EnergyLine>],
    ed_lines: &[EnergyLine],
    domain: &DomainSpec,
    n_evol_range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<ZneSweepEntry>> {
    n_evol_range
        .map(|n_evol| {
            let mitigated = ed_lines
                .iter()
                .zip(folded)
                .map(|(ed, lines)| {
                    if lines.len() < n_evol {
                        return Err(invalid("n_evol_zne", format!("{n_evol} exceeds the {} folded lines", lines.len())));
                    }
                    mitigate_line_zne(&lines[..n_evol], ed.alpha)
                })
                .collect::<Result<Vec<_>>>()?;
            let error = region_error(Method::Zne, &mitigated, ed_lines, domain, Region::Prediction)?.value;
            Ok(ZneSweepEntry {
                n_evol,
                error,
                mitigated,
            })
        })
        .collect()
}
