//! Dataset and propagation-constant CSV files.
//!
//! Floats are written in their shortest round-trip form, so a file read
//! back reproduces the in-memory rows bit for bit.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cpwchar_core::dataset::{DataRow, Provenance};
use cpwchar_core::netparams::{GammaPoint, GammaTrace};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DATASET_HEADER: [&str; 8] =
    ["freq_hz", "alpha_np_m", "beta_rad_m", "sigma_ink", "eps_fs", "eps_ds", "tan_delta", "provenance"];
pub const GAMMA_HEADER: [&str; 3] = ["freq_hz", "alpha_np_m", "beta_rad_m"];

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    freq_hz: f64,
    alpha_np_m: f64,
    beta_rad_m: f64,
    sigma_ink: f64,
    eps_fs: f64,
    eps_ds: f64,
    tan_delta: f64,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct GammaRecord {
    freq_hz: f64,
    alpha_np_m: f64,
    beta_rad_m: f64,
}

fn check_header(reader: &mut csv::Reader<impl std::io::Read>, expected: &[&str], what: &str) -> Result<()> {
    let header = reader.headers().with_context(|| format!("reading {what} header"))?;
    if header.iter().ne(expected.iter().copied()) {
        bail!("{what} header must be `{}`, found `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(","));
    }
    Ok(())
}

pub fn write_dataset(writer: impl std::io::Write, rows: &[DataRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(DatasetRecord {
            freq_hz: r.frequency,
            alpha_np_m: r.alpha,
            beta_rad_m: r.beta,
            sigma_ink: r.sigma_ink,
            eps_fs: r.eps_fs,
            eps_ds: r.eps_ds,
            tan_delta: r.tan_delta,
            provenance: r.provenance,
        })?;
    }
    if rows.is_empty() {
        w.write_record(DATASET_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(reader: impl std::io::Read) -> Result<Vec<DataRow>> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(&mut r, &DATASET_HEADER, "dataset")?;
    r.deserialize()
        .enumerate()
        .map(|(i, rec)| {
            let rec: DatasetRecord = rec.with_context(|| format!("dataset row {}", i + 2))?;
            Ok(DataRow {
                frequency: rec.freq_hz,
                alpha: rec.alpha_np_m,
                beta: rec.beta_rad_m,
                sigma_ink: rec.sigma_ink,
                eps_fs: rec.eps_fs,
                eps_ds: rec.eps_ds,
                tan_delta: rec.tan_delta,
                provenance: rec.provenance,
            })
        })
        .collect()
}

pub fn save_dataset(path: &Path, rows: &[DataRow]) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_dataset(std::io::BufWriter::new(file), rows)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DataRow>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening dataset {}", path.display()))?;
    read_dataset(std::io::BufReader::new(file)).with_context(|| format!("in {}", path.display()))
}

pub fn write_gamma(writer: impl std::io::Write, trace: &GammaTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in &trace.points {
        w.serialize(GammaRecord { freq_hz: p.frequency, alpha_np_m: p.gamma.re, beta_rad_m: p.gamma.im })?;
    }
    if trace.is_empty() {
        w.write_record(GAMMA_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_gamma(reader: impl std::io::Read) -> Result<GammaTrace> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(&mut r, &GAMMA_HEADER, "gamma")?;
    let points = r
        .deserialize()
        .enumerate()
        .map(|(i, rec)| {
            let rec: GammaRecord = rec.with_context(|| format!("gamma row {}", i + 2))?;
            Ok(GammaPoint { frequency: rec.freq_hz, gamma: Complex64::new(rec.alpha_np_m, rec.beta_rad_m) })
        })
        .collect::<Result<Vec<_>>>()?;
    let trace = GammaTrace { points };
    trace.validate()?;
    Ok(trace)
}

pub fn save_gamma(path: &Path, trace: &GammaTrace) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_gamma(std::io::BufWriter::new(file), trace)
}

pub fn load_gamma(path: &Path) -> Result<GammaTrace> {
    let file = std::fs::File::open(path).with_context(|| format!("opening gamma trace {}", path.display()))?;
    read_gamma(std::io::BufReader::new(file)).with_context(|| format!("in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(f: f64, p: Provenance) -> DataRow {
        DataRow {
            frequency: f,
            alpha: 0.1 + 1e-17,
            beta: 1.0 / 3.0,
            sigma_ink: 2.973e7,
            eps_fs: 3.2,
            eps_ds: 1.81,
            tan_delta: 0.01,
            provenance: p,
        }
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let rows = vec![row(1e7, Provenance::Grid), row(2e10, Provenance::Augmented)];
        let mut buf = Vec::new();
        write_dataset(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("freq_hz,alpha_np_m,beta_rad_m,sigma_ink,eps_fs,eps_ds,tan_delta,provenance\n"));
        assert!(text.contains(",grid\n") && text.contains(",augmented\n"));
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = read_dataset("freq,alpha\n1,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("header"));
        assert!(read_gamma("freq_hz,beta_rad_m,alpha_np_m\n".as_bytes()).is_err());
    }

    #[test]
    fn gamma_round_trip_and_ordering() {
        let trace = GammaTrace {
            points: vec![
                GammaPoint { frequency: 1e7, gamma: Complex64::new(0.01, 0.5) },
                GammaPoint { frequency: 2e7, gamma: Complex64::new(0.02, 1.0 / 7.0) },
            ],
        };
        let mut buf = Vec::new();
        write_gamma(&mut buf, &trace).unwrap();
        assert_eq!(read_gamma(buf.as_slice()).unwrap(), trace);
        assert!(read_gamma("freq_hz,alpha_np_m,beta_rad_m\n2e7,0,1\n1e7,0,1\n".as_bytes()).is_err());
    }
}
