use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use schwinger_grec::config::{FileConfig, Preset, RunConfig};
use schwinger_grec::density::Measurement;
use schwinger_grec::export::{self, ENERGY_LINES, ETAS, PLOTDATA};
use schwinger_grec::pipeline::{self, Analysis, LineStore, SpectrumReport};
use schwinger_grec::Error;

#[derive(Parser, Debug)]
#[command(name = "schwinger-grec", version, about = "Adiabatic Schwinger-model runs with GREC and ZNE mitigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Exact spectrum along the domain, minimal gap and level crossings.
    Spectrum,
    /// Simulate every energy line and write energy_lines.csv.
    Evolve,
    /// Fit and sweep GREC coefficients; writes etas.csv.
    Grec,
    /// Extrapolate folded lines and sweep the number of noise factors.
    Zne,
    /// Errors, gate budgets and improvement; writes all artifacts.
    Report,
    /// Full pipeline from scratch.
    All,
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named preset: mg0, mg10 or small.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Mass ratio m/g; 0 and 10 select the matching preset.
    #[arg(long, global = true)]
    mg: Option<f64>,
    #[arg(long, global = true)]
    n_train: Option<usize>,
    #[arg(long, global = true)]
    n_evol_zne: Option<usize>,
    #[arg(long, global = true)]
    noise_p: Option<f64>,
    /// Exact expectation values (default).
    #[arg(long, global = true, conflicts_with = "shots")]
    exact: bool,
    /// Sampled expectation values with this many shots.
    #[arg(long, global = true)]
    shots: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

fn load_config(o: &Opts) -> Result<RunConfig, Error> {
    let file = match &o.config {
        Some(p) => FileConfig::from_path(p)?,
        None => FileConfig::default(),
    };
    let base = if let Some(name) = &o.preset {
        Preset::parse(name)?
    } else if let Some(preset) = o.mg.and_then(Preset::from_mg) {
        preset
    } else {
        file.base_preset()?
    };
    let mut cfg = RunConfig::preset(base);
    file.apply(&mut cfg)?;
    if let Some(v) = o.mg {
        cfg.params.mg = v;
    }
    if let Some(v) = &o.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = o.seed {
        cfg.evolution.seed = v;
    }
    if let Some(v) = o.n_train {
        cfg.n_train = v;
    }
    if let Some(v) = o.n_evol_zne {
        cfg.n_evol_zne = v;
    }
    if let Some(v) = o.noise_p {
        cfg.evolution.noise_p = v;
    }
    if o.exact {
        cfg.evolution.measurement = Measurement::Exact;
    }
    if let Some(v) = o.shots {
        cfg.evolution.measurement = Measurement::Shots(v);
    }
    if o.workers.is_some() {
        cfg.workers = o.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_spectrum(s: &SpectrumReport) {
    println!("minimal gap {:.6e} at l0 = {:.6}", s.min_gap, s.min_gap_l0);
    if s.crossings.is_empty() {
        println!("no crossing of the tracked lowest lines");
    }
    for c in &s.crossings {
        println!("crossing at l0 = {c:.6}");
    }
}

/// Reuses the run's energy_lines.csv when present, otherwise simulates.
fn lines_for(cfg: &RunConfig) -> Result<LineStore, Error> {
    let path = cfg.run_dir().join(ENERGY_LINES);
    if path.exists() {
        let (id, lines) = export::read_energy_lines(&path)?;
        if id.as_deref().is_none_or(|id| id == cfg.run_id()) {
            info!("reusing {}", path.display());
            return Ok(LineStore { lines }.simulated_only());
        }
    }
    let store = pipeline::simulate(cfg)?;
    export::write_energy_lines(&path, &cfg.run_id(), &store.lines)?;
    Ok(store)
}

fn print_summary(a: &Analysis) {
    println!("{:<8} {:>7} {:>12}", "method", "n_evol", "error(P)");
    println!("{:<8} {:>7} {:>12.6}", "noisy", 1, a.noisy_error);
    for e in &a.zne {
        println!("{:<8} {:>7} {:>12.6}", "zne", e.n_evol, e.error);
    }
    for e in &a.grec {
        println!("{:<8} {:>7} {:>12.6}", "grec", e.n_evol, e.error);
    }
    println!("ideal circuit error(P) {:.6}", a.ideal_circuit_error);
    println!(
        "best zne {:.6} (n_evol {}), best grec {:.6} (n_evol {}), improvement {:+.1}%",
        a.zne_min().error,
        a.zne_min().n_evol,
        a.grec_min().error,
        a.grec_min().n_evol,
        100.0 * a.improvement
    );
    for (t, ed) in a.trends.iter().zip(&a.ed) {
        println!("level {} learning-region trend: a = {:.3e}, b = {:.3e}", ed.alpha, t.a, t.b);
    }
}

fn write_all(cfg: &RunConfig, store: &LineStore, spectrum: &SpectrumReport) -> Result<Analysis, Error> {
    let analysis = pipeline::analyze(cfg, store)?;
    let files = export::export_run(&cfg.run_dir(), &cfg.run_id(), &store.lines, &analysis, Some(spectrum))?;
    for f in files {
        info!("wrote {}", f.display());
    }
    Ok(analysis)
}

fn run(command: Command, cfg: &RunConfig) -> Result<(), Error> {
    let dir = cfg.run_dir();
    match command {
        Command::Spectrum => {
            let s = pipeline::spectrum_report(cfg)?;
            print_spectrum(&s);
            export::write_spectrum(&dir.join(PLOTDATA).join("spectrum.csv"), &s)?;
        }
        Command::Evolve => {
            let store = pipeline::simulate(cfg)?;
            export::write_energy_lines(&dir.join(ENERGY_LINES), &cfg.run_id(), &store.lines)?;
            println!("{} lines written to {}", store.lines.len(), dir.display());
        }
        Command::Zne => {
            let store = lines_for(cfg)?;
            println!("{:>7} {:>12}", "n_evol", "error(P)");
            for e in pipeline::run_zne(cfg, &store)? {
                println!("{:>7} {:>12.6}", e.n_evol, e.error);
            }
        }
        Command::Grec => {
            let store = lines_for(cfg)?;
            let sweep = pipeline::run_grec(cfg, &store)?;
            println!("{:>7} {:>7} {:>12}", "n_train", "n_evol", "error(P)");
            for e in &sweep {
                println!("{:>7} {:>7} {:>12.6}", e.n_train, e.n_evol, e.error);
            }
            let best = sweep.iter().min_by(|a, b| a.error.total_cmp(&b.error)).expect("sweep is never empty");
            export::write_etas(&dir.join(ETAS), &best.etas)?;
        }
        Command::Report => {
            let store = lines_for(cfg)?;
            let s = pipeline::spectrum_report(cfg)?;
            print_summary(&write_all(cfg, &store, &s)?);
        }
        Command::All => {
            let s = pipeline::spectrum_report(cfg)?;
            print_spectrum(&s);
            let store = pipeline::simulate(cfg)?;
            print_summary(&write_all(cfg, &store, &s)?);
        }
    }
    Ok(())
}

fn report_error(context: &str, path: Option<&Path>, e: &Error) {
    match path {
        Some(p) => eprintln!("error: {context} ({}): {e}", p.display()),
        None => eprintln!("error: {context}: {e}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match load_config(&cli.opts) {
        Ok(c) => c,
        Err(e) => {
            report_error("invalid configuration", cli.opts.config.as_deref(), &e);
            return ExitCode::from(2);
        }
    };
    match run(cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&format!("{:?} failed", cli.command).to_lowercase(), None, &e);
            ExitCode::from(1)
        }
    }
}
