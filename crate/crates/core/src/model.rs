//! Lattice Schwinger Hamiltonian in the qubit (Jordan-Wigner) form with open
//! boundaries, plus the background-field ramps driving the adiabatic runs.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pauli::{NoiseRotation, Pauli, PauliString, PauliSum};

/// Lattice parameters. `x = (N / V)^2` is derived, never stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_sites: usize,
    pub volume: f64,
    /// Mass over coupling ratio `m/g`.
    pub mg: f64,
    /// Lagrange multiplier enforcing zero total charge.
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(n_sites: usize, volume: f64, mg: f64, lambda: f64) -> Result<Self> {
        let p = Self {
            n_sites,
            volume,
            mg,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    /// `N = 6, V = 30, lambda = 100` with the given `m/g`.
    pub fn reference(mg: f64) -> Self {
        Self {
            n_sites: 6,
            volume: 30.0,
            mg,
            lambda: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 || self.n_sites % 2 != 0 {
            return Err(invalid("N", format!("{} must be even and at least 2", self.n_sites)));
        }
        if !(self.volume > 0.0 && self.volume.is_finite()) {
            return Err(invalid("V", format!("{} must be positive", self.volume)));
        }
        if !self.mg.is_finite() {
            return Err(invalid("mg", "must be finite"));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(invalid("lambda", format!("{} must be non-negative", self.lambda)));
        }
        if self.lambda < 10.0 {
            warn!("lambda = {} is small; charge sectors may mix", self.lambda);
        }
        Ok(())
    }

    pub fn x(&self) -> f64 {
        let r = self.n_sites as f64 / self.volume;
        r * r
    }
}

/// Builds the Hamiltonian at background field `l0` as a canonical sum.
pub fn build_hamiltonian(params: &ModelParams, l0: f64) -> Result<PauliSum> {
    Ok(hamiltonian_terms(params, l0)?.canonicalize())
}

fn hamiltonian_terms(params: &ModelParams, l0: f64) -> Result<PauliSum> {
    params.validate()?;
    if !l0.is_finite() {
        return Err(invalid("l0", "must be finite"));
    }
    let n = params.n_sites;
    let nf = n as f64;
    let x = params.x();
    let mut h = PauliSum::new(n);

    for s in 0..n - 1 {
        h.push(PauliString::from_factors(n, &[(s, Pauli::X), (s + 1, Pauli::X)], x / 2.0)?)?;
        h.push(PauliString::from_factors(n, &[(s, Pauli::Y), (s + 1, Pauli::Y)], x / 2.0)?)?;
    }
    for s in 0..n - 1 {
        for k in s + 1..n {
            let c = 0.5 * ((n - k - 1) as f64 + params.lambda);
            h.push(PauliString::from_factors(n, &[(s, Pauli::Z), (k, Pauli::Z)], c)?)?;
        }
    }
    for s in 0..n - 1 {
        let ceil_half = s.div_ceil(2) as f64;
        let c = nf / 4.0 - 0.5 * ceil_half + l0 * (n - s - 1) as f64;
        h.push(PauliString::from_factors(n, &[(s, Pauli::Z)], c)?)?;
    }
    let mass = params.mg * x.sqrt();
    for s in 0..n {
        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
        h.push(PauliString::from_factors(n, &[(s, Pauli::Z)], sign * mass)?)?;
    }
    let constant = l0 * l0 * (nf - 1.0) + 0.5 * l0 * nf + nf * nf / 8.0 + params.lambda * nf / 4.0;
    h.push(PauliString::identity(n, constant)?)?;
    Ok(h)
}

/// Hamiltonian with every non-identity Pauli factor `P` replaced by
/// `W_P^dagger P W_P`.
pub fn apply_added_noise(params: &ModelParams, l0: f64, rot: &NoiseRotation) -> Result<PauliSum> {
    let h = build_hamiltonian(params, l0)?;
    if rot.is_identity() {
        return Ok(h);
    }
    Ok(h.conjugated(rot))
}

/// Which run a ramp belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RampKind {
    /// The to-be-mitigated line over the full domain.
    Main,
    /// Training line `tau` ending inside the learning region.
    Training(usize),
}

impl RampKind {
    /// 0 for the main line, `tau` otherwise.
    pub fn tau(&self) -> usize {
        match self {
            RampKind::Main => 0,
            RampKind::Training(t) => *t,
        }
    }
}

/// Linear background-field ramp over `[0, T]` sampled at `n_steps + 1` points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RampSchedule {
    pub l0_start: f64,
    pub l0_end: f64,
    pub total_time: f64,
    pub n_steps: usize,
    pub kind: RampKind,
}

impl RampSchedule {
    pub fn new(l0_start: f64, l0_end: f64, total_time: f64, n_steps: usize, kind: RampKind) -> Result<Self> {
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(invalid("T", format!("{total_time} must be positive")));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps", "must be at least 1"));
        }
        if !l0_start.is_finite() || !l0_end.is_finite() {
            return Err(invalid("l0", "ramp endpoints must be finite"));
        }
        Ok(Self {
            l0_start,
            l0_end,
            total_time,
            n_steps,
            kind,
        })
    }

    pub fn main(domain: &DomainSpec, total_time: f64, n_steps: usize) -> Result<Self> {
        Self::new(domain.l0_min, domain.l0_max, total_time, n_steps, RampKind::Main)
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.n_steps as f64
    }

    /// Time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.total_time
        } else {
            i as f64 * self.total_time / self.n_steps as f64
        }
    }

    /// Ramp value at sample `i`; endpoints are exact.
    pub fn l0_at(&self, i: usize) -> f64 {
        if i == 0 {
            self.l0_start
        } else if i == self.n_steps {
            self.l0_end
        } else {
            self.l0_start + (self.l0_end - self.l0_start) * (i as f64 / self.n_steps as f64)
        }
    }

    /// All `n_steps + 1` sample values.
    pub fn l0_grid(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.l0_at(i)).collect()
    }
}

/// `l0(t) = l0_start + (l0_end - l0_start) t / T`.
pub fn ramp_value(s: &RampSchedule, t: f64) -> Result<f64> {
    if !(0.0..=s.total_time).contains(&t) {
        return Err(Error::TimeOutOfRange { t, total: s.total_time });
    }
    if t == s.total_time {
        return Ok(s.l0_end);
    }
    Ok(s.l0_start + (s.l0_end - s.l0_start) * (t / s.total_time))
}

/// Background-field marks: learning region `[l0_min, l0_int]`, prediction
/// region `(l0_int, l0_max]`, with `l0_star` the crossing or minimal gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub l0_min: f64,
    pub l0_int: f64,
    pub l0_star: f64,
    pub l0_max: f64,
}

impl DomainSpec {
    pub fn new(l0_min: f64, l0_int: f64, l0_star: f64, l0_max: f64) -> Result<Self> {
        let d = Self {
            l0_min,
            l0_int,
            l0_star,
            l0_max,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.l0_min < self.l0_int && self.l0_int < self.l0_star && self.l0_star < self.l0_max;
        if !ordered {
            return Err(invalid(
                "domain",
                format!(
                    "need l0_min < l0_int < l0_star < l0_max, got {} {} {} {}",
                    self.l0_min, self.l0_int, self.l0_star, self.l0_max
                ),
            ));
        }
        Ok(())
    }

    /// Table presets for `m/g` in `{0, 10}`.
    pub fn preset(mg: f64) -> Option<Self> {
        if mg == 0.0 {
            Some(Self {
                l0_min: 0.511527,
                l0_int: 0.512187,
                l0_star: 0.512360,
                l0_max: 0.512527,
            })
        } else if mg == 10.0 {
            Some(Self {
                l0_min: 1.832633,
                l0_int: 1.833293,
                l0_star: 1.833466,
                l0_max: 1.833633,
            })
        } else {
            None
        }
    }

    /// Learning region membership, `l0_min <= l0 <= l0_int`.
    pub fn in_learning(&self, l0: f64) -> bool {
        l0 >= self.l0_min && l0 <= self.l0_int
    }

    /// Prediction region membership, `l0_int < l0 <= l0_max`.
    pub fn in_prediction(&self, l0: f64) -> bool {
        l0 > self.l0_int && l0 <= self.l0_max
    }
}

/// Number of training endpoints on the default grid.
pub const TRAINING_GRID: usize = 11;

/// Training ramps `tau = 1..=n_train`, ending at
/// `l0_min + (l0_int - l0_min) (11 - tau) / 10`, nearest to the prediction
/// region first.
pub fn training_schedules(d: &DomainSpec, total_time: f64, n_steps: usize, n_train: usize) -> Result<Vec<RampSchedule>> {
    training_schedules_with_grid(d, total_time, n_steps, n_train, TRAINING_GRID)
}

/// As [`training_schedules`] with `grid` endpoints spanning the learning
/// region (`tau = grid` is the constant ramp at `l0_min`).
pub fn training_schedules_with_grid(
    d: &DomainSpec,
    total_time: f64,
    n_steps: usize,
    n_train: usize,
    grid: usize,
) -> Result<Vec<RampSchedule>> {
    if grid < 2 {
        return Err(invalid("grid", "need at least two endpoints"));
    }
    if n_train < 2 || n_train > grid {
        return Err(invalid("n_train", format!("{n_train} outside 2..={grid}")));
    }
    d.validate()?;
    let span = (grid - 1) as f64;
    (1..=n_train)
        .map(|tau| {
            let frac = (grid - tau) as f64 / span;
            let end = if tau == 1 {
                d.l0_int
            } else {
                d.l0_min + (d.l0_int - d.l0_min) * frac
            };
            RampSchedule::new(d.l0_min, end, total_time, n_steps, RampKind::Training(tau))
        })
        .collect()
}
