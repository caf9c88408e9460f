//! File formats: two-column spectra, Stark datasets, shot records, trajectories and
//! JSON reports. Frequencies on disk are in Hz, times in seconds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::calibration::StarkDataset;
use crate::dynamics::FieldTrajectory;
use crate::error::{Error, Result};
use crate::lindblad::LindbladTrajectory;
use crate::model::QubitState;
use crate::shots::{ShotRecord, ShotSet};
use crate::spectrum::SpectrumTrace;
use crate::units::{hz, to_hz};

/// Reads `columns` numeric columns. A first row that does not parse is taken as a header.
pub fn read_numeric_csv(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>> {
    let context = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(k + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Err(_) if k == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    context,
                    line,
                    message: format!("{e} in {:?}", record.iter().collect::<Vec<_>>()),
                })
            }
            Ok(v) if v.len() != columns => {
                return Err(Error::Parse {
                    context,
                    line,
                    message: format!("expected {columns} columns, found {}", v.len()),
                })
            }
            Ok(v) => rows.push(v),
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            context,
            line: 0,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// `freq_Hz, magnitude`.
pub fn read_trace_csv(path: &Path, state: QubitState) -> Result<SpectrumTrace> {
    let rows = read_numeric_csv(path, 2)?;
    let trace = SpectrumTrace {
        freqs: rows.iter().map(|r| hz(r[0])).collect(),
        magnitudes: rows.iter().map(|r| r[1]).collect(),
        state,
    };
    trace.validate()?;
    Ok(trace)
}

pub fn write_trace_csv(path: &Path, trace: &SpectrumTrace) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["freq_Hz", "magnitude"])?;
    for (f, m) in trace.freqs.iter().zip(&trace.magnitudes) {
        w.write_record([fmt(to_hz(*f)), fmt(*m)])?;
    }
    w.flush()?;
    Ok(())
}

/// `power_setting, delta_ac_Hz`.
pub fn read_stark_csv(path: &Path, qubit_freq: f64) -> Result<StarkDataset> {
    let rows = read_numeric_csv(path, 2)?;
    Ok(StarkDataset {
        powers: rows.iter().map(|r| r[0]).collect(),
        shifts: rows.iter().map(|r| hz(r[1])).collect(),
        qubit_freq,
    })
}

/// `I, Q, prepared` with `prepared` ∈ {g, e}.
pub fn write_shots_csv(path: &Path, shots: &ShotSet) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["I", "Q", "prepared"])?;
    for r in &shots.records {
        w.write_record([fmt(r.i), fmt(r.q), r.prepared.label().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_shots_csv(path: &Path, tau: f64, seed: u64) -> Result<ShotSet> {
    let context = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut records = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(k + 2);
        let bad = |message: String| Error::Parse {
            context: context.clone(),
            line,
            message,
        };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 columns, found {}", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{e}: {s:?}")));
        let prepared = match &rec[2] {
            "g" => QubitState::Ground,
            "e" => QubitState::Excited,
            other => return Err(bad(format!("prepared must be g or e, got {other:?}"))),
        };
        records.push(ShotRecord {
            i: num(&rec[0])?,
            q: num(&rec[1])?,
            prepared,
        });
    }
    let n_g = records.iter().filter(|r| r.prepared == QubitState::Ground).count();
    let set = ShotSet {
        records,
        n_shots_per_state: n_g,
        tau,
        seed,
    };
    set.validate()?;
    Ok(set)
}

/// `t_s, re_alpha_g, im_alpha_g, re_alpha_e, im_alpha_e, re_beta_g, im_beta_g, re_beta_e, im_beta_e`.
pub fn write_trajectory_csv(path: &Path, traj: &FieldTrajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "t_s",
        "re_alpha_g",
        "im_alpha_g",
        "re_alpha_e",
        "im_alpha_e",
        "re_beta_g",
        "im_beta_g",
        "re_beta_e",
        "im_beta_e",
    ])?;
    for k in 0..traj.len() {
        let mut row = vec![fmt(traj.times[k])];
        for c in [traj.alpha_g[k], traj.alpha_e[k], traj.beta_g[k], traj.beta_e[k]] {
            row.push(fmt(c.re));
            row.push(fmt(c.im));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `t_s, re_a, im_a, re_f, im_f, sz, purity`.
pub fn write_lindblad_csv(path: &Path, traj: &LindbladTrajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t_s", "re_a", "im_a", "re_f", "im_f", "sz", "purity"])?;
    for k in 0..traj.times.len() {
        w.write_record([
            fmt(traj.times[k]),
            fmt(traj.a[k].re),
            fmt(traj.a[k].im),
            fmt(traj.f[k].re),
            fmt(traj.f[k].im),
            fmt(traj.sigma_z[k]),
            fmt(traj.purity[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Header plus rows of preformatted fields.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz;

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let t = SpectrumTrace {
            freqs: vec![mhz(6800.0), mhz(6800.5), mhz(6801.0)],
            magnitudes: vec![0.9, 0.45, 0.8],
            state: QubitState::Ground,
        };
        write_trace_csv(&p, &t).unwrap();
        let back = read_trace_csv(&p, QubitState::Ground).unwrap();
        for (a, b) in back.freqs.iter().zip(&t.freqs) {
            assert!((a - b).abs() < 1e-12 * b);
        }
        assert_eq!(back.magnitudes, t.magnitudes);
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "freq_Hz,magnitude\n6.8e9,0.9\n6.81e9,oops\n").unwrap();
        match read_trace_csv(&p, QubitState::Ground) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "6.8e9,0.9\n6.81e9\n").unwrap();
        assert!(matches!(read_trace_csv(&p, QubitState::Ground), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn shots_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("shots.csv");
        let set = ShotSet {
            records: vec![
                ShotRecord { i: 0.1, q: -0.2, prepared: QubitState::Ground },
                ShotRecord { i: 1.5, q: 0.25, prepared: QubitState::Excited },
            ],
            n_shots_per_state: 1,
            tau: 1e-7,
            seed: 3,
        };
        write_shots_csv(&p, &set).unwrap();
        assert_eq!(read_shots_csv(&p, 1e-7, 3).unwrap(), set);
    }
}
