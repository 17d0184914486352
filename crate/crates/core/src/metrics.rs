//! Region errors, gate budgets and the relative improvement figure.

use std::fmt;

use crate::adiabatic::EnergyLine;
use crate::circuit::{GateCounts, GateKind};
use crate::error::{invalid, Error, Result};
use crate::model::DomainSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Noisy,
    Zne,
    Grec,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Noisy => "noisy",
            Method::Zne => "zne",
            Method::Grec => "grec",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Subset of the l0 domain that selects the time points of an error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    /// `[l0_min, l0_int]`
    Learning,
    /// `(l0_int, l0_max]`
    Prediction,
    /// `[l0_min, l0_max]`
    LearningPrediction,
    /// Prediction points with `l0 > bound`.
    PredictionAbove(f64),
}

impl Region {
    pub fn contains(&self, domain: &DomainSpec, l0: f64) -> bool {
        match *self {
            Region::Learning => domain.in_learning(l0),
            Region::Prediction => domain.in_prediction(l0),
            Region::LearningPrediction => domain.in_learning(l0) || domain.in_prediction(l0),
            Region::PredictionAbove(bound) => domain.in_prediction(l0) && l0 > bound,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Region::Learning => "L".into(),
            Region::Prediction => "P".into(),
            Region::LearningPrediction => "LP".into(),
            Region::PredictionAbove(b) => format!("P>{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionError {
    pub method: Method,
    pub region: Region,
    pub value: f64,
    /// Levels summed over.
    pub levels: Vec<usize>,
    /// Time points used.
    pub points: Vec<usize>,
}

/// Sum over levels of the RMS deviation between mitigated and ED lines on
/// the time points whose l0 lies in `region`.
pub fn region_error(
    method: Method,
    em_lines: &[EnergyLine],
    ed_lines: &[EnergyLine],
    domain: &DomainSpec,
    region: Region,
) -> Result<RegionError> {
    if em_lines.is_empty() {
        return Err(Error::EmptyRegion("no lines given".into()));
    }
    let mut value = 0.0;
    let mut levels = Vec::with_capacity(em_lines.len());
    let mut points: Vec<usize> = Vec::new();
    for em in em_lines {
        let ed = ed_lines
            .iter()
            .find(|l| l.alpha == em.alpha)
            .ok_or_else(|| Error::Misaligned(format!("no reference line for level {}", em.alpha)))?;
        if ed.n_points() != em.n_points() {
            return Err(Error::Misaligned(format!(
                "level {}: {} vs {} time points",
                em.alpha,
                em.n_points(),
                ed.n_points()
            )));
        }
        let mut sum = 0.0;
        let mut used = Vec::new();
        for (a, b) in em.samples.iter().zip(&ed.samples) {
            if (a.l0 - b.l0).abs() > 1e-12 {
                return Err(Error::Misaligned(format!(
                    "level {} point {}: l0 {} vs {}",
                    em.alpha, a.i, a.l0, b.l0
                )));
            }
            if region.contains(domain, a.l0) {
                sum += (b.energy - a.energy).powi(2);
                used.push(a.i);
            }
        }
        if used.is_empty() {
            return Err(Error::EmptyRegion(region.label()));
        }
        value += (sum / used.len() as f64).sqrt();
        levels.push(em.alpha);
        points = used;
    }
    Ok(RegionError {
        method,
        region,
        value,
        levels,
        points,
    })
}

/// Per-slice CX/RZ/SX counts listed for the original and the added-noise
/// circuits of the reference implementation.
pub fn reference_slice_counts(method: Method, mg: f64) -> GateCounts {
    let massive = usize::from(mg != 0.0);
    match method {
        Method::Grec => GateCounts {
            cx: 70,
            rz: 240 + massive,
            sx: 80,
            ..GateCounts::default()
        },
        _ => GateCounts {
            cx: 50,
            rz: 130 + massive,
            sx: 40,
            ..GateCounts::default()
        },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateBudget {
    pub method: Method,
    pub n_evol: usize,
    pub per_slice: GateCounts,
    pub n_steps: usize,
    pub n_levels: usize,
    pub totals: GateCounts,
}

impl GateBudget {
    pub fn total(&self, kind: GateKind) -> u64 {
        self.totals.get(kind) as u64
    }
}

/// Total gate applications for all evolutions of a mitigation run. Every time
/// point `i` costs `i + 1` slices; ZNE evolves `n_evol` lines whose folded
/// slices cost `f = 2q - 1` times as much, GREC evolves `n_evol` unfolded lines.
pub fn gate_budget(
    method: Method,
    n_evol: usize,
    per_slice: &GateCounts,
    n_steps: usize,
    n_levels: usize,
) -> Result<GateBudget> {
    let (min, scale) = match method {
        Method::Zne => (2, n_evol * n_evol),
        Method::Grec => (3, n_evol),
        Method::Noisy => (1, 1),
    };
    if n_evol < min {
        return Err(invalid("n_evol", format!("{n_evol} below minimum {min} for {method}")));
    }
    let triangle = (n_steps + 1) * (n_steps + 2) / 2;
    let total = |c: usize| n_levels * c * triangle * scale;
    let totals = GateCounts {
        cx: total(per_slice.cx),
        id: total(per_slice.id),
        rz: total(per_slice.rz),
        sx: total(per_slice.sx),
        x: total(per_slice.x),
    };
    Ok(GateBudget {
        method,
        n_evol,
        per_slice: per_slice.clone(),
        n_steps,
        n_levels,
        totals,
    })
}

/// Relative improvement `(e_grec - e_zne) / e_noisy`; negative when GREC wins.
pub fn improvement(e_grec: f64, e_zne: f64, e_noisy: f64) -> Result<f64> {
    if e_noisy == 0.0 || !e_noisy.is_finite() {
        return Err(invalid("e_noisy", "must be nonzero and finite"));
    }
    Ok((e_grec - e_zne) / e_noisy)
}
