//! End-to-end orchestration: line simulation, both mitigation sweeps and
//! the error/budget report.

use log::info;
use rayon::prelude::*;

use crate::adiabatic::{evolve_line, realization_rotation, EnergyLine, Variant};
use crate::circuit::{compile_slice, GateCounts};
use crate::config::{BudgetMode, RunConfig};
use crate::error::{invalid, Result};
use crate::grec::{sweep_training_lines, trend_check, GrecSweepEntry, TrainingLine, TrainingSet, Trend};
use crate::metrics::{gate_budget, improvement, reference_slice_counts, region_error, Method, Region};
use crate::model::{build_hamiltonian, training_schedules, RampSchedule};
use crate::spectrum::{crossings, locate_min_gap, spectrum_on_grid, track_levels, uniform_grid, TrackedLines};
use crate::zne::{noise_factors, sweep_noise_factors, ZneSweepEntry};

/// Grid resolution of the spectrum scan.
pub const SPECTRUM_POINTS: usize = 1001;

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub grid: Vec<f64>,
    /// Lowest four sorted eigenvalues per grid point.
    pub sorted: Vec<Vec<f64>>,
    /// Tracked lines of the configured levels on the main-ramp time grid,
    /// the resolution at which the evolution passes the crossing.
    pub tracked: TrackedLines,
    pub min_gap_l0: f64,
    pub min_gap: f64,
    /// Sign changes of `E_1 - E_0` along the tracked lines.
    pub crossings: Vec<f64>,
}

pub fn spectrum_report(cfg: &RunConfig) -> Result<SpectrumReport> {
    let d = &cfg.domain;
    let grid = uniform_grid(d.l0_min, d.l0_max, SPECTRUM_POINTS);
    let n_levels = cfg.evolution.levels.iter().max().map_or(2, |&a| (a + 1).max(2));
    let k = (n_levels + 2).min(1 << cfg.params.n_sites);
    let sorted = spectrum_on_grid(&cfg.params, &grid, k)?
        .into_iter()
        .map(|s| s.energies)
        .collect();
    let ramp = RampSchedule::main(d, cfg.evolution.total_time, cfg.evolution.n_steps)?;
    let tracked = track_levels(&cfg.params, &ramp.l0_grid(), n_levels)?;
    let (min_gap_l0, min_gap) = locate_min_gap(&cfg.params, d.l0_min, d.l0_max, SPECTRUM_POINTS)?;
    let crossings = crossings(&tracked);
    Ok(SpectrumReport {
        grid,
        sorted,
        tracked,
        min_gap_l0,
        min_gap,
        crossings,
    })
}

/// Every simulated line of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LineStore {
    pub lines: Vec<EnergyLine>,
}

impl LineStore {
    pub fn find(&self, variant: Variant, alpha: usize, tau: usize) -> Option<&EnergyLine> {
        self.lines
            .iter()
            .find(|l| l.variant == variant && l.alpha == alpha && l.tau() == tau)
    }

    fn get(&self, variant: Variant, alpha: usize, tau: usize) -> Result<&EnergyLine> {
        self.find(variant, alpha, tau)
            .ok_or_else(|| invalid("lines", format!("missing {variant} line for level {alpha}, tau {tau}")))
    }

    /// Drops lines produced by mitigation.
    pub fn simulated_only(mut self) -> Self {
        self.lines
            .retain(|l| !matches!(l.variant, Variant::ZneMitigated(_) | Variant::GrecMitigated(_)));
        self
    }
}

struct Job {
    schedule: RampSchedule,
    variant: Variant,
    alpha: usize,
}

fn jobs(cfg: &RunConfig) -> Result<Vec<Job>> {
    let e = &cfg.evolution;
    let main = RampSchedule::main(&cfg.domain, e.total_time, e.n_steps)?;
    let mut out = Vec::new();
    for &alpha in &e.levels {
        let mut push = |schedule: RampSchedule, variant| out.push(Job { schedule, variant, alpha });
        push(main, Variant::IdealEd);
        push(main, Variant::IdealCircuit);
        push(main, Variant::NoisyOrig);
        for r in 1..=cfg.realizations {
            push(main, Variant::AddedNoise(r));
        }
        for f in noise_factors(cfg.n_evol_zne).into_iter().skip(1) {
            push(main, Variant::Zne(f));
        }
        for s in training_schedules(&cfg.domain, e.total_time, e.n_steps, cfg.n_train)? {
            push(s, Variant::IdealEd);
            for r in 1..=cfg.realizations {
                push(s, Variant::AddedNoise(r));
            }
        }
    }
    Ok(out)
}

fn with_pool<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> T {
    match cfg.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Simulates all lines needed by the spectrum, ZNE and GREC stages.
pub fn simulate(cfg: &RunConfig) -> Result<LineStore> {
    cfg.validate()?;
    let jobs = jobs(cfg)?;
    info!("simulating {} lines for {}", jobs.len(), cfg.run_id());
    let lines = with_pool(cfg, || {
        jobs.par_iter()
            .map(|j| evolve_line(&cfg.params, &j.schedule, j.variant, j.alpha, &cfg.evolution))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(LineStore { lines })
}

fn ed_lines(cfg: &RunConfig, store: &LineStore) -> Result<Vec<EnergyLine>> {
    cfg.evolution
        .levels
        .iter()
        .map(|&a| store.get(Variant::IdealEd, a, 0).cloned())
        .collect()
}

pub fn run_zne(cfg: &RunConfig, store: &LineStore) -> Result<Vec<ZneSweepEntry>> {
    let folded = cfg
        .evolution
        .levels
        .iter()
        .map(|&a| {
            noise_factors(cfg.n_evol_zne)
                .into_iter()
                .map(|f| {
                    let v = if f == 1 { Variant::NoisyOrig } else { Variant::Zne(f) };
                    store.get(v, a, 0).cloned()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    sweep_noise_factors(&folded, &ed_lines(cfg, store)?, &cfg.domain, 2..=cfg.n_evol_zne)
}

pub fn training_set(cfg: &RunConfig, store: &LineStore) -> Result<TrainingSet> {
    let mut lines = Vec::new();
    for &a in &cfg.evolution.levels {
        for tau in 1..=cfg.n_train {
            lines.push(TrainingLine {
                ideal: store.get(Variant::IdealEd, a, tau)?.clone(),
                noisy: (1..=cfg.realizations)
                    .map(|r| store.get(Variant::AddedNoise(r), a, tau).cloned())
                    .collect::<Result<Vec<_>>>()?,
            });
        }
    }
    TrainingSet::new(lines)
}

pub fn run_grec(cfg: &RunConfig, store: &LineStore) -> Result<Vec<GrecSweepEntry>> {
    let ts = training_set(cfg, store)?;
    let main = cfg
        .evolution
        .levels
        .iter()
        .map(|&a| {
            (1..=cfg.realizations)
                .map(|r| store.get(Variant::AddedNoise(r), a, 0).cloned())
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    sweep_training_lines(&ts, &main, &ed_lines(cfg, store)?, &cfg.domain, 2..=cfg.n_train)
}

/// Per-slice gate counts `(original, added-noise)` used for budgets.
pub fn slice_counts(cfg: &RunConfig) -> Result<(GateCounts, GateCounts)> {
    match cfg.budget {
        BudgetMode::Reference => Ok((
            reference_slice_counts(Method::Zne, cfg.params.mg),
            reference_slice_counts(Method::Grec, cfg.params.mg),
        )),
        BudgetMode::Measured => {
            let h = build_hamiltonian(&cfg.params, cfg.domain.l0_max)?;
            let dt = cfg.evolution.total_time / cfg.evolution.n_steps as f64;
            let orig = compile_slice(&h, dt)?.count_gates();
            let rot = realization_rotation(cfg.evolution.seed, 1);
            let grec = compile_slice(&h.conjugated(&rot), dt)?.count_gates();
            Ok((orig, grec))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub method: Method,
    pub n_evol: usize,
    pub region: String,
    pub error: f64,
    pub n_cx: usize,
    pub n_rz: usize,
    pub n_sx: usize,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub ed: Vec<EnergyLine>,
    pub noisy_error: f64,
    /// Error of the noiseless Trotter circuit in the prediction region.
    pub ideal_circuit_error: f64,
    pub zne: Vec<ZneSweepEntry>,
    pub grec: Vec<GrecSweepEntry>,
    pub best_zne: usize,
    pub best_grec: usize,
    pub improvement: f64,
    /// Linear trend of the best GREC line per level over the learning region.
    pub trends: Vec<Trend>,
    pub metrics: Vec<MetricRow>,
}

impl Analysis {
    pub fn zne_min(&self) -> &ZneSweepEntry {
        &self.zne[self.best_zne]
    }

    pub fn grec_min(&self) -> &GrecSweepEntry {
        &self.grec[self.best_grec]
    }
}

fn argmin(v: impl Iterator<Item = f64>) -> usize {
    v.enumerate()
        .fold((0, f64::INFINITY), |best, (k, e)| if e < best.1 { (k, e) } else { best })
        .0
}

const REPORT_REGIONS: [Region; 2] = [Region::Prediction, Region::LearningPrediction];

pub fn analyze(cfg: &RunConfig, store: &LineStore) -> Result<Analysis> {
    let ed = ed_lines(cfg, store)?;
    let levels = &cfg.evolution.levels;
    let pick = |v: Variant| -> Result<Vec<EnergyLine>> { levels.iter().map(|&a| store.get(v, a, 0).cloned()).collect() };
    let noisy = pick(Variant::NoisyOrig)?;
    let ideal_circuit = pick(Variant::IdealCircuit)?;
    let d = &cfg.domain;
    let noisy_error = region_error(Method::Noisy, &noisy, &ed, d, Region::Prediction)?.value;
    let ideal_circuit_error = region_error(Method::Noisy, &ideal_circuit, &ed, d, Region::Prediction)?.value;

    let zne = run_zne(cfg, store)?;
    let grec = run_grec(cfg, store)?;
    let best_zne = argmin(zne.iter().map(|e| e.error));
    let best_grec = argmin(grec.iter().map(|e| e.error));
    let improvement = improvement(grec[best_grec].error, zne[best_zne].error, noisy_error)?;
    let trends = grec[best_grec]
        .mitigated
        .iter()
        .zip(&ed)
        .map(|(m, e)| trend_check(m, e, d))
        .collect::<Result<Vec<_>>>()?;

    let (orig, added) = slice_counts(cfg)?;
    let n_steps = cfg.evolution.n_steps;
    let n_levels = levels.len();
    let mut metrics = Vec::new();
    let mut add = |method: Method, n_evol: usize, lines: &[EnergyLine], counts: &GateCounts| -> Result<()> {
        let b = gate_budget(method, n_evol, counts, n_steps, n_levels)?;
        for region in REPORT_REGIONS {
            metrics.push(MetricRow {
                method,
                n_evol,
                region: region.label(),
                error: region_error(method, lines, &ed, d, region)?.value,
                n_cx: b.totals.cx,
                n_rz: b.totals.rz,
                n_sx: b.totals.sx,
            });
        }
        Ok(())
    };
    add(Method::Noisy, 1, &noisy, &orig)?;
    for e in &zne {
        add(Method::Zne, e.n_evol, &e.mitigated, &orig)?;
    }
    for e in &grec {
        add(Method::Grec, e.n_evol, &e.mitigated, &added)?;
    }
    info!(
        "noisy {:.4}, best zne {:.4} (n_evol {}), best grec {:.4} (n_evol {})",
        noisy_error, zne[best_zne].error, zne[best_zne].n_evol, grec[best_grec].error, grec[best_grec].n_evol
    );
    Ok(Analysis {
        ed,
        noisy_error,
        ideal_circuit_error,
        zne,
        grec,
        best_zne,
        best_grec,
        improvement,
        trends,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    fn tiny() -> RunConfig {
        let mut c = RunConfig::preset(Preset::Small);
        c.evolution.n_steps = 10;
        c.n_train = 3;
        c.n_evol_zne = 3;
        c
    }

    #[test]
    fn job_list_covers_all_variants() {
        let c = tiny();
        let js = jobs(&c).unwrap();
        // per level: ed, circuit, noisy, AN, zne f=3,5, 3 x (ed, AN)
        assert_eq!(js.len(), 2 * (4 + 2 + 6));
    }

    #[test]
    fn small_pipeline_runs() {
        let c = tiny();
        let store = simulate(&c).unwrap();
        let a = analyze(&c, &store).unwrap();
        assert_eq!(a.zne.len(), 2);
        assert_eq!(a.grec.len(), 2);
        assert_eq!(a.metrics.len(), 2 * (1 + 2 + 2));
        assert!(a.noisy_error > 0.0);
        assert!(a.zne_min().error < a.noisy_error);
        let (orig, added) = slice_counts(&c).unwrap();
        assert!(added.rz > orig.rz);
    }

    #[test]
    fn spectrum_of_small_preset() {
        let c = RunConfig::preset(Preset::Small);
        let s = spectrum_report(&c).unwrap();
        assert_eq!(s.grid.len(), SPECTRUM_POINTS);
        assert!((s.min_gap_l0 - c.domain.l0_star).abs() < 2e-5);
        assert!(s.crossings.is_empty());
    }
}
