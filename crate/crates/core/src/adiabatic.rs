//! Trotterized adiabatic evolution of a single level along a ramp.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{compile_slice, fold_slice};
use crate::density::{measure_energy, DensityState, Measurement, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::model::{build_hamiltonian, ModelParams, RampSchedule};
use crate::pauli::NoiseRotation;
use crate::spectrum::{hermitian_eigen, overlap_sq, prepare_initial_state, track_levels};

/// How a line was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Exact-diagonalization energies of the tracked level.
    IdealEd,
    /// Noiseless Trotter circuit.
    IdealCircuit,
    /// Original circuit under the intrinsic noise model.
    NoisyOrig,
    /// Circuit of the rotated Hamiltonian for added-noise realization `r >= 1`.
    AddedNoise(usize),
    /// Original circuit with every slice folded to noise factor `f`.
    Zne(usize),
    /// ZNE extrapolation over `n_evol` noise factors.
    ZneMitigated(usize),
    /// GREC mitigation with `n_evol` evolved lines.
    GrecMitigated(usize),
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::IdealEd => "ideal_ed",
            Variant::IdealCircuit => "ideal_circuit",
            Variant::NoisyOrig => "noisy_orig",
            Variant::AddedNoise(_) => "added_noise",
            Variant::Zne(_) => "zne",
            Variant::ZneMitigated(_) => "zne_mitigated",
            Variant::GrecMitigated(_) => "grec_mitigated",
        }
    }

    /// Realization index (0 when not applicable).
    pub fn realization(&self) -> usize {
        match self {
            Variant::AddedNoise(r) => *r,
            _ => 0,
        }
    }

    /// Noise factor, or `n_evol` for mitigated lines (1 otherwise).
    pub fn factor(&self) -> usize {
        match self {
            Variant::Zne(f) => *f,
            Variant::ZneMitigated(n) | Variant::GrecMitigated(n) => *n,
            _ => 1,
        }
    }

    /// Inverse of (`label`, `realization`, `factor`).
    pub fn from_parts(label: &str, r: usize, f: usize) -> Option<Variant> {
        Some(match label {
            "ideal_ed" => Variant::IdealEd,
            "ideal_circuit" => Variant::IdealCircuit,
            "noisy_orig" => Variant::NoisyOrig,
            "added_noise" => Variant::AddedNoise(r),
            "zne" => Variant::Zne(f),
            "zne_mitigated" => Variant::ZneMitigated(f),
            "grec_mitigated" => Variant::GrecMitigated(f),
            _ => return None,
        })
    }

    fn stream_tag(&self) -> u64 {
        match self {
            Variant::IdealEd => 1,
            Variant::IdealCircuit => 2,
            Variant::NoisyOrig => 3,
            Variant::AddedNoise(_) => 4,
            Variant::Zne(_) => 5,
            Variant::ZneMitigated(_) => 6,
            Variant::GrecMitigated(_) => 7,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::AddedNoise(r) => write!(f, "added_noise(r={r})"),
            Variant::Zne(k) => write!(f, "zne(f={k})"),
            Variant::ZneMitigated(n) | Variant::GrecMitigated(n) => write!(f, "{}(n_evol={n})", self.label()),
            _ => f.write_str(self.label()),
        }
    }
}

/// One measured point of a line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub i: usize,
    pub t: f64,
    pub l0: f64,
    pub energy: f64,
}

/// Energies of level `alpha` at every time point of a ramp.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLine {
    pub alpha: usize,
    pub schedule: RampSchedule,
    pub variant: Variant,
    pub samples: Vec<Sample>,
}

impl EnergyLine {
    /// Line with the schedule's time/l0 grid and the given energies.
    pub fn from_energies(alpha: usize, schedule: RampSchedule, variant: Variant, energies: &[f64]) -> Result<Self> {
        if energies.len() != schedule.n_steps + 1 {
            return Err(Error::Misaligned(format!(
                "{} energies for {} time points",
                energies.len(),
                schedule.n_steps + 1
            )));
        }
        let samples = energies
            .iter()
            .enumerate()
            .map(|(i, &energy)| Sample {
                i,
                t: schedule.time(i),
                l0: schedule.l0_at(i),
                energy,
            })
            .collect();
        Ok(Self {
            alpha,
            schedule,
            variant,
            samples,
        })
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.samples[i].energy
    }

    pub fn n_points(&self) -> usize {
        self.samples.len()
    }

    pub fn tau(&self) -> usize {
        self.schedule.kind.tau()
    }
}

/// Settings shared by every evolution of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub n_steps: usize,
    pub total_time: f64,
    pub measurement: Measurement,
    pub noise_p: f64,
    pub seed: u64,
    /// Level subset `S`.
    pub levels: Vec<usize>,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            n_steps: 100,
            total_time: 10.0,
            measurement: Measurement::Exact,
            noise_p: 1e-6,
            seed: 2025,
            levels: vec![0, 1],
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(invalid("n_steps", "must be at least 1"));
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(invalid("T", format!("{} must be positive", self.total_time)));
        }
        NoiseModel::new(self.noise_p)?;
        if self.levels.is_empty() {
            return Err(invalid("levels", "need at least one level"));
        }
        if let Measurement::Shots(0) = self.measurement {
            return Err(invalid("n_shots", "must be positive"));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from the master seed and job tags:
/// `h <- splitmix64(h ^ splitmix64(tag))` folded over the tags.
pub fn stream_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |h, &tag| splitmix64(h ^ splitmix64(tag)))
}

const ROTATION_STREAM: u64 = 0x5254;

/// Added-noise rotation of realization `r` for the run seed. Shared by the
/// main line and all training lines of that realization.
pub fn realization_rotation(seed: u64, r: usize) -> NoiseRotation {
    NoiseRotation::sample(stream_seed(seed, &[ROTATION_STREAM, r as u64]))
}

/// Runs (or, for `IdealEd`, looks up) the line of level `alpha` along `schedule`.
pub fn evolve_line(
    params: &ModelParams,
    schedule: &RampSchedule,
    variant: Variant,
    alpha: usize,
    cfg: &EvolutionConfig,
) -> Result<EnergyLine> {
    cfg.validate()?;
    let grid = schedule.l0_grid();
    match variant {
        Variant::IdealEd => {
            let tracked = track_levels(params, &grid, (alpha + 1).max(2))?;
            return EnergyLine::from_energies(alpha, *schedule, variant, &tracked.lines[alpha]);
        }
        Variant::ZneMitigated(_) | Variant::GrecMitigated(_) => {
            return Err(invalid("variant", format!("{variant} is produced by mitigation, not evolution")));
        }
        Variant::AddedNoise(0) => return Err(invalid("r", "realizations are numbered from 1")),
        Variant::Zne(f) if f % 2 == 0 => return Err(Error::InvalidFoldFactor(f)),
        _ => {}
    }

    let noise = match variant {
        Variant::IdealCircuit => NoiseModel::noiseless(),
        _ => NoiseModel::new(cfg.noise_p)?,
    };
    let rotation = match variant {
        Variant::AddedNoise(r) => Some(realization_rotation(cfg.seed, r)),
        _ => None,
    };
    let fold = match variant {
        Variant::Zne(f) => f,
        _ => 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(
        cfg.seed,
        &[
            variant.stream_tag(),
            alpha as u64,
            schedule.kind.tau() as u64,
            variant.realization() as u64,
            fold as u64,
        ],
    ));

    let psi0 = prepare_initial_state(params, schedule.l0_start, alpha)?;
    let mut rho = DensityState::from_pure(&psi0)?;
    let dt = schedule.dt();
    let mut energies = Vec::with_capacity(schedule.n_steps + 1);
    energies.push(measure_energy(
        &rho,
        &build_hamiltonian(params, grid[0])?,
        cfg.measurement,
        &mut rng,
    )?);
    for &l0 in &grid[1..] {
        let observable = build_hamiltonian(params, l0)?;
        let generator = match &rotation {
            Some(rot) => observable.conjugated(rot),
            None => observable.clone(),
        };
        let slice = compile_slice(&generator, dt)?;
        let slice = if fold > 1 { fold_slice(&slice, fold)? } else { slice };
        rho.apply_circuit(&slice, &noise)?;
        energies.push(measure_energy(&rho, &observable, cfg.measurement, &mut rng)?);
    }
    EnergyLine::from_energies(alpha, *schedule, variant, &energies)
}

/// Minimum over time points of `|<E_alpha(l0_i)|psi(t_i)>|^2` for exact
/// (non-Trotterized, noiseless) evolution with piecewise-constant `H(l0_i)`.
pub fn adiabaticity_check(params: &ModelParams, schedule: &RampSchedule, alpha: usize) -> Result<f64> {
    let grid = schedule.l0_grid();
    let tracked = track_levels(params, &grid, (alpha + 1).max(2))?;
    let mut psi = DVector::from_vec(tracked.states[alpha][0].clone());
    let dt = schedule.dt();
    let mut worst: f64 = 1.0;
    for (j, &l0) in grid.iter().enumerate().skip(1) {
        let h = build_hamiltonian(params, l0)?.to_dense()?;
        let (energies, states) = hermitian_eigen(&h)?;
        // psi <- V e^{-i E dt} V^dagger psi
        let mut next = DVector::<Complex64>::zeros(psi.len());
        for (e, v) in energies.iter().zip(&states) {
            let v = DVector::from_column_slice(v);
            let amp = v.dotc(&psi) * Complex64::from_polar(1.0, -e * dt);
            next += v * amp;
        }
        psi = next;
        worst = worst.min(overlap_sq(&tracked.states[alpha][j], psi.as_slice()));
    }
    Ok(worst)
}
