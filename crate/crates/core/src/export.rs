//! CSV artifacts of a run and their reader.
//!
//! Layout: `<out_dir>/<run_id>/{energy_lines.csv, etas.csv, metrics.csv, plotdata/}`.
//! Floats are written with 17 significant digits so that reading them back
//! is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use crate::adiabatic::{EnergyLine, Sample, Variant};
use crate::error::{Error, Result};
use crate::grec::EtaTable;
use crate::model::{RampKind, RampSchedule};
use crate::pipeline::{Analysis, MetricRow, SpectrumReport};

pub const ENERGY_LINES: &str = "energy_lines.csv";
pub const ETAS: &str = "etas.csv";
pub const METRICS: &str = "metrics.csv";
pub const PLOTDATA: &str = "plotdata";

const LINE_HEADER: [&str; 10] = ["run_id", "variant", "alpha", "tau", "r", "f", "i", "t", "l0", "energy"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes rows of pre-formatted fields under `header`.
fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_energy_lines(path: &Path, run_id: &str, lines: &[EnergyLine]) -> Result<()> {
    let rows = lines.iter().flat_map(|l| {
        l.samples.iter().map(move |s| {
            vec![
                run_id.to_string(),
                l.variant.label().to_string(),
                l.alpha.to_string(),
                l.tau().to_string(),
                l.variant.realization().to_string(),
                l.variant.factor().to_string(),
                s.i.to_string(),
                fmt_f64(s.t),
                fmt_f64(s.l0),
                fmt_f64(s.energy),
            ]
        })
    });
    write_table(path, &LINE_HEADER, rows)
}

fn parse<T: std::str::FromStr>(path: &Path, row: usize, field: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        reason: format!("row {row}: bad {field} `{value}`"),
    })
}

/// Reads an energy-line file back into lines. Samples are reproduced
/// exactly; schedules are rebuilt from the first and last samples.
pub fn read_energy_lines(path: &Path) -> Result<(Option<String>, Vec<EnergyLine>)> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != LINE_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            reason: format!("unexpected header {:?}", header),
        });
    }
    let mut run_id: Option<String> = None;
    let mut groups: Vec<((Variant, usize, usize), Vec<Sample>)> = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = n + 2;
        match &run_id {
            Some(id) if id != &rec[0] => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    reason: format!("row {row}: mixed run ids `{id}` and `{}`", &rec[0]),
                })
            }
            None => run_id = Some(rec[0].to_string()),
            _ => {}
        }
        let r: usize = parse(path, row, "r", &rec[4])?;
        let f: usize = parse(path, row, "f", &rec[5])?;
        let variant = Variant::from_parts(&rec[1], r, f).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            reason: format!("row {row}: unknown variant `{}`", &rec[1]),
        })?;
        let key = (variant, parse(path, row, "alpha", &rec[2])?, parse(path, row, "tau", &rec[3])?);
        let sample = Sample {
            i: parse(path, row, "i", &rec[6])?,
            t: parse(path, row, "t", &rec[7])?,
            l0: parse(path, row, "l0", &rec[8])?,
            energy: parse(path, row, "energy", &rec[9])?,
        };
        match groups.last_mut() {
            Some((k, samples)) if *k == key && sample.i == samples.len() => samples.push(sample),
            _ if sample.i == 0 => groups.push((key, vec![sample])),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    reason: format!("row {row}: sample {} out of sequence", sample.i),
                })
            }
        }
    }
    let lines = groups
        .into_iter()
        .map(|((variant, alpha, tau), samples)| {
            let first = samples[0];
            let last = samples[samples.len() - 1];
            let kind = if tau == 0 { RampKind::Main } else { RampKind::Training(tau) };
            let schedule = RampSchedule::new(first.l0, last.l0, last.t, samples.len() - 1, kind).map_err(|e| {
                Error::Parse {
                    path: path.to_path_buf(),
                    reason: format!("{variant} level {alpha} tau {tau}: {e}"),
                }
            })?;
            Ok(EnergyLine {
                alpha,
                schedule,
                variant,
                samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((run_id, lines))
}

pub fn write_etas(path: &Path, etas: &EtaTable) -> Result<()> {
    let rows = etas
        .entries()
        .into_iter()
        .map(|(a, i, r, eta)| vec![a.to_string(), i.to_string(), r.to_string(), fmt_f64(eta)]);
    write_table(path, &["alpha", "i", "r", "eta"], rows)
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let rows = rows.iter().map(|m| {
        vec![
            m.method.label().to_string(),
            m.n_evol.to_string(),
            m.region.clone(),
            fmt_f64(m.error),
            m.n_cx.to_string(),
            m.n_rz.to_string(),
            m.n_sx.to_string(),
        ]
    });
    write_table(path, &["method", "n_evol", "region", "error", "N_CX", "N_RZ", "N_SX"], rows)
}

/// Lowest sorted energies along the l0 scan.
pub fn write_spectrum(path: &Path, s: &SpectrumReport) -> Result<()> {
    let n_sorted = s.sorted.first().map_or(0, |v| v.len());
    let mut header: Vec<String> = vec!["l0".into()];
    header.extend((0..n_sorted).map(|k| format!("E{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = s.grid.iter().zip(&s.sorted).map(|(&l0, energies)| {
        let mut row = vec![fmt_f64(l0)];
        row.extend(energies.iter().map(|&e| fmt_f64(e)));
        row
    });
    write_table(path, &header, rows)
}

fn find<'a>(lines: &'a [EnergyLine], variant: Variant, alpha: usize, tau: usize) -> Option<&'a EnergyLine> {
    lines
        .iter()
        .find(|l| l.variant == variant && l.alpha == alpha && l.tau() == tau)
}

/// Main-ramp lines side by side, one row per level and time point.
fn write_main_lines(path: &Path, lines: &[EnergyLine], analysis: &Analysis) -> Result<()> {
    let zne = &analysis.zne_min().mitigated;
    let grec = &analysis.grec_min().mitigated;
    let mut rows = Vec::new();
    for (k, ed) in analysis.ed.iter().enumerate() {
        let a = ed.alpha;
        let cols = [
            find(lines, Variant::IdealCircuit, a, 0),
            find(lines, Variant::NoisyOrig, a, 0),
            find(lines, Variant::AddedNoise(1), a, 0),
            Some(&zne[k]),
            Some(&grec[k]),
        ];
        for s in &ed.samples {
            let mut row = vec![a.to_string(), s.i.to_string(), fmt_f64(s.t), fmt_f64(s.l0), fmt_f64(s.energy)];
            row.extend(cols.iter().map(|c| c.map_or(String::new(), |l| fmt_f64(l.energy(s.i)))));
            rows.push(row);
        }
    }
    write_table(
        path,
        &["alpha", "i", "t", "l0", "ideal_ed", "ideal_circuit", "noisy_orig", "added_noise", "zne_best", "grec_best"],
        rows,
    )
}

/// Training ramps: ideal and first added-noise realization.
fn write_training_lines(path: &Path, lines: &[EnergyLine]) -> Result<()> {
    let mut rows = Vec::new();
    for ideal in lines.iter().filter(|l| l.variant == Variant::IdealEd && l.tau() > 0) {
        let noisy = find(lines, Variant::AddedNoise(1), ideal.alpha, ideal.tau());
        for s in &ideal.samples {
            rows.push(vec![
                ideal.tau().to_string(),
                ideal.alpha.to_string(),
                s.i.to_string(),
                fmt_f64(s.t),
                fmt_f64(s.l0),
                fmt_f64(s.energy),
                noisy.map_or(String::new(), |l| fmt_f64(l.energy(s.i))),
            ]);
        }
    }
    write_table(path, &["tau", "alpha", "i", "t", "l0", "ideal_ed", "added_noise"], rows)
}

/// Folded lines per noise factor (f = 1 is the unfolded noisy line).
fn write_zne_series(path: &Path, lines: &[EnergyLine]) -> Result<()> {
    let mut rows = Vec::new();
    for l in lines.iter().filter(|l| l.tau() == 0) {
        let f = match l.variant {
            Variant::NoisyOrig => 1,
            Variant::Zne(f) => f,
            _ => continue,
        };
        for s in &l.samples {
            rows.push(vec![l.alpha.to_string(), f.to_string(), s.i.to_string(), fmt_f64(s.l0), fmt_f64(s.energy)]);
        }
    }
    write_table(path, &["alpha", "f", "i", "l0", "energy"], rows)
}

/// Writes every artifact of a completed run into `dir`; returns the files written.
pub fn export_run(
    dir: &Path,
    run_id: &str,
    lines: &[EnergyLine],
    analysis: &Analysis,
    spectrum: Option<&SpectrumReport>,
) -> Result<Vec<PathBuf>> {
    let mut all: Vec<EnergyLine> = lines.to_vec();
    for e in &analysis.zne {
        all.extend(e.mitigated.iter().cloned());
    }
    for e in &analysis.grec {
        all.extend(e.mitigated.iter().cloned());
    }
    let plot = dir.join(PLOTDATA);
    let mut written = vec![dir.join(ENERGY_LINES), dir.join(ETAS), dir.join(METRICS)];
    write_energy_lines(&written[0], run_id, &all)?;
    write_etas(&written[1], &analysis.grec_min().etas)?;
    write_metrics(&written[2], &analysis.metrics)?;
    let main = plot.join("main_lines.csv");
    write_main_lines(&main, lines, analysis)?;
    let training = plot.join("training_lines.csv");
    write_training_lines(&training, lines)?;
    let zne = plot.join("zne_series.csv");
    write_zne_series(&zne, lines)?;
    written.extend([main, training, zne]);
    if let Some(s) = spectrum {
        let p = plot.join("spectrum.csv");
        write_spectrum(&p, s)?;
        written.push(p);
    }
    Ok(written)
}
