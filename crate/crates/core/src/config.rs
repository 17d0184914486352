//! Run configuration: presets, TOML files and overrides.
//!
//! Precedence is override > file > preset. The preset is chosen by the
//! `preset` key or, failing that, by `mg` (0 or 10); everything else starts
//! from the `m/g = 0` preset.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::adiabatic::EvolutionConfig;
use crate::density::Measurement;
use crate::error::{invalid, Error, Result};
use crate::model::{DomainSpec, ModelParams, TRAINING_GRID};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Mg0,
    Mg10,
    /// Four sites at `m/g = 0`, for quick checks.
    Small,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mg0" => Ok(Preset::Mg0),
            "mg10" => Ok(Preset::Mg10),
            "small" => Ok(Preset::Small),
            other => Err(invalid("preset", format!("unknown preset `{other}` (mg0, mg10, small)"))),
        }
    }

    pub fn from_mg(mg: f64) -> Option<Self> {
        if mg == 0.0 {
            Some(Preset::Mg0)
        } else if mg == 10.0 {
            Some(Preset::Mg10)
        } else {
            None
        }
    }
}

/// Which per-slice gate counts feed the budget report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetMode {
    /// Published per-slice counts of the reference transpilation.
    Reference,
    /// Counts of this crate's own compiled slices.
    Measured,
}

impl BudgetMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "reference" => Ok(BudgetMode::Reference),
            "measured" => Ok(BudgetMode::Measured),
            other => Err(invalid("budget", format!("unknown mode `{other}` (reference, measured)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub domain: DomainSpec,
    pub evolution: EvolutionConfig,
    /// Largest number of training ramps; the sweep covers `2..=n_train`.
    pub n_train: usize,
    /// Largest ZNE line count; the sweep covers `2..=n_evol_zne`.
    pub n_evol_zne: usize,
    /// Added-noise realizations per ramp.
    pub realizations: usize,
    pub budget: BudgetMode,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (params, domain, budget) = match preset {
            Preset::Mg0 => (ModelParams::reference(0.0), DomainSpec::preset(0.0).unwrap(), BudgetMode::Reference),
            Preset::Mg10 => (ModelParams::reference(10.0), DomainSpec::preset(10.0).unwrap(), BudgetMode::Reference),
            Preset::Small => (
                ModelParams {
                    n_sites: 4,
                    volume: 20.0,
                    mg: 0.0,
                    lambda: 100.0,
                },
                DomainSpec {
                    l0_min: 0.499964,
                    l0_int: 0.500624,
                    l0_star: 0.500797,
                    l0_max: 0.500964,
                },
                BudgetMode::Measured,
            ),
        };
        Self {
            params,
            domain,
            evolution: EvolutionConfig::default(),
            n_train: TRAINING_GRID,
            n_evol_zne: 10,
            realizations: 1,
            budget,
            out_dir: PathBuf::from("out"),
            workers: None,
        }
    }

    /// Reads a TOML file and applies it on top of the matching preset.
    pub fn from_file(path: &Path) -> Result<Self> {
        FileConfig::from_path(path)?.resolve()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.domain.validate()?;
        self.evolution.validate()?;
        if self.params.n_sites > crate::pauli::MAX_DENSE_SITES {
            return Err(invalid("N", format!("{} exceeds the simulator limit", self.params.n_sites)));
        }
        if self.realizations == 0 {
            return Err(invalid("R", "need at least one realization"));
        }
        if self.n_train < self.realizations + 1 || self.n_train < 2 {
            return Err(invalid(
                "n_train",
                format!("{} training ramps cannot determine {} coefficients", self.n_train, self.realizations + 1),
            ));
        }
        if self.n_train > TRAINING_GRID {
            return Err(invalid("n_train", format!("{} exceeds the {TRAINING_GRID} training endpoints", self.n_train)));
        }
        if self.n_evol_zne < 2 {
            return Err(invalid("n_evol_zne", "need at least two noise factors"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        let levels = &self.evolution.levels;
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("levels", "must be strictly increasing"));
        }
        let dim = 1usize << self.params.n_sites;
        if levels.iter().any(|&a| a + 1 >= dim) {
            return Err(invalid("levels", format!("level index must be below {}", dim - 1)));
        }
        Ok(())
    }

    /// Directory name of this run under `out_dir`.
    pub fn run_id(&self) -> String {
        format!("N{}_mg{}_seed{}", self.params.n_sites, self.params.mg, self.evolution.seed)
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(self.run_id())
    }
}

/// Keys accepted in a config file. All are optional.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    #[serde(rename = "N")]
    pub n_sites: Option<usize>,
    #[serde(rename = "V")]
    pub volume: Option<f64>,
    pub mg: Option<f64>,
    pub lambda: Option<f64>,
    pub l0_min: Option<f64>,
    pub l0_int: Option<f64>,
    pub l0_star: Option<f64>,
    pub l0_max: Option<f64>,
    #[serde(rename = "T")]
    pub total_time: Option<f64>,
    pub n_steps: Option<usize>,
    pub n_train: Option<usize>,
    pub n_evol_zne: Option<usize>,
    #[serde(rename = "R")]
    pub realizations: Option<usize>,
    pub noise_p: Option<f64>,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub levels: Option<Vec<usize>>,
    pub budget: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            reason: e.message().to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { reason, .. } => Error::Parse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    /// Preset named by `preset`, else implied by `mg`, else `m/g = 0`.
    pub fn base_preset(&self) -> Result<Preset> {
        if let Some(name) = &self.preset {
            return Preset::parse(name);
        }
        Ok(self.mg.and_then(Preset::from_mg).unwrap_or(Preset::Mg0))
    }

    /// Applies the file on top of its base preset. Does not validate.
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let p = &mut cfg.params;
        if let Some(v) = self.n_sites {
            p.n_sites = v;
        }
        if let Some(v) = self.volume {
            p.volume = v;
        }
        if let Some(v) = self.mg {
            p.mg = v;
        }
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
        let d = &mut cfg.domain;
        for (slot, v) in [
            (&mut d.l0_min, self.l0_min),
            (&mut d.l0_int, self.l0_int),
            (&mut d.l0_star, self.l0_star),
            (&mut d.l0_max, self.l0_max),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        let e = &mut cfg.evolution;
        if let Some(v) = self.total_time {
            e.total_time = v;
        }
        if let Some(v) = self.n_steps {
            e.n_steps = v;
        }
        if let Some(v) = self.noise_p {
            e.noise_p = v;
        }
        if let Some(v) = self.seed {
            e.seed = v;
        }
        if let Some(v) = self.shots {
            e.measurement = Measurement::Shots(v);
        }
        if let Some(v) = &self.levels {
            e.levels = v.clone();
        }
        if let Some(v) = self.n_train {
            cfg.n_train = v;
        }
        if let Some(v) = self.n_evol_zne {
            cfg.n_evol_zne = v;
        }
        if let Some(v) = self.realizations {
            cfg.realizations = v;
        }
        if let Some(v) = &self.budget {
            cfg.budget = BudgetMode::parse(v)?;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::preset(self.base_preset()?);
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}
