//! Follow-up records, potential-outcome pairs and their CSV forms.
//!
//! Dataset CSV: header `id,time,status,arm[,cov_1,...,cov_k]`, optionally
//! followed by the generator extension columns `z,t0,t1`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSample {
    pub id: String,
    pub time: f64,
    /// 1 = event, 0 = censored.
    pub status: u8,
    pub arm: u8,
    pub covariates: Vec<f64>,
}

impl SurvivalSample {
    pub fn new(id: impl Into<String>, time: f64, status: u8, arm: u8) -> Self {
        Self { id: id.into(), time, status, arm, covariates: Vec::new() }
    }

    pub fn with_covariates(mut self, covariates: Vec<f64>) -> Self {
        self.covariates = covariates;
        self
    }

    pub fn is_event(&self) -> bool {
        self.status == 1
    }
}

/// Optional latent columns carried alongside simulated samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub z: f64,
    pub t0: f64,
    pub t1: f64,
}

/// A validated collection of samples with a common covariate dimension.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<SurvivalSample>,
    pub covariate_names: Vec<String>,
    pub latent: Option<Vec<Latent>>,
}

impl Dataset {
    pub fn new(samples: Vec<SurvivalSample>) -> Result<Self> {
        let k = samples.first().map_or(0, |s| s.covariates.len());
        let names = (1..=k).map(|i| format!("cov_{i}")).collect();
        Self::with_names(samples, names)
    }

    pub fn with_names(samples: Vec<SurvivalSample>, covariate_names: Vec<String>) -> Result<Self> {
        for (row, s) in samples.iter().enumerate() {
            validate(s, row + 1, covariate_names.len())?;
        }
        Ok(Self { samples, covariate_names, latent: None })
    }

    pub fn with_latent(mut self, latent: Vec<Latent>) -> Self {
        debug_assert_eq!(latent.len(), self.samples.len());
        self.latent = Some(latent);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn censoring_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.status == 0).count() as f64 / self.samples.len() as f64
    }

    /// Samples of one arm, or all samples.
    pub fn select_arm(&self, arm: Option<u8>) -> Vec<&SurvivalSample> {
        self.samples.iter().filter(|s| arm.is_none_or(|a| s.arm == a)).collect()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_err(0, "header", e))?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let base = ["id", "time", "status", "arm"];
        if cols.len() < 4 || cols[..4] != base {
            return Err(Error::Schema {
                row: 0,
                column: "header".into(),
                message: format!("expected header to start with id,time,status,arm; got {}", cols.join(",")),
            });
        }
        let latent_at = cols.len() >= 7 && cols[cols.len() - 3..] == ["z", "t0", "t1"];
        let cov_end = if latent_at { cols.len() - 3 } else { cols.len() };
        let covariate_names: Vec<String> = cols[4..cov_end].iter().map(|s| s.to_string()).collect();

        let mut samples = Vec::new();
        let mut latent = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| csv_err(row, "record", e))?;
            if record.len() != cols.len() {
                return Err(Error::Schema {
                    row,
                    column: "record".into(),
                    message: format!("expected {} fields, found {}", cols.len(), record.len()),
                });
            }
            let num = |j: usize| -> Result<f64> {
                record[j].parse::<f64>().map_err(|_| Error::Schema {
                    row,
                    column: cols[j].to_string(),
                    message: format!("`{}` is not a number", &record[j]),
                })
            };
            let flag = |j: usize| -> Result<u8> {
                match &record[j] {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(Error::Schema {
                        row,
                        column: cols[j].to_string(),
                        message: format!("`{other}` is not 0 or 1"),
                    }),
                }
            };
            let covariates = (4..cov_end).map(num).collect::<Result<Vec<_>>>()?;
            let s = SurvivalSample {
                id: record[0].to_string(),
                time: num(1)?,
                status: flag(2)?,
                arm: flag(3)?,
                covariates,
            };
            validate(&s, row, covariate_names.len())?;
            samples.push(s);
            if latent_at {
                latent.push(Latent { z: num(cov_end)?, t0: num(cov_end + 1)?, t1: num(cov_end + 2)? });
            }
        }
        let mut ds = Self { samples, covariate_names, latent: None };
        if latent_at {
            ds.latent = Some(latent);
        }
        Ok(ds)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["id", "time", "status", "arm"].iter().map(|s| s.to_string()).collect();
        header.extend(self.covariate_names.iter().cloned());
        if self.latent.is_some() {
            header.extend(["z", "t0", "t1"].iter().map(|s| s.to_string()));
        }
        w.write_record(&header).map_err(io_csv)?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut rec = vec![s.id.clone(), fmt_f64(s.time), s.status.to_string(), s.arm.to_string()];
            rec.extend(s.covariates.iter().map(|&c| fmt_f64(c)));
            if let Some(lat) = &self.latent {
                let l = lat[i];
                rec.extend([fmt_f64(l.z), fmt_f64(l.t0), fmt_f64(l.t1)]);
            }
            w.write_record(&rec).map_err(io_csv)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn validate(s: &SurvivalSample, row: usize, k: usize) -> Result<()> {
    let bad = |column: &str, message: String| Error::Schema { row, column: column.into(), message };
    if !(s.time >= 0.0) || !s.time.is_finite() {
        return Err(bad("time", format!("time {} must be finite and nonnegative", s.time)));
    }
    if s.status > 1 {
        return Err(bad("status", format!("status {} not in {{0,1}}", s.status)));
    }
    if s.arm > 1 {
        return Err(bad("arm", format!("arm {} not in {{0,1}}", s.arm)));
    }
    if s.covariates.len() != k {
        return Err(bad("covariates", format!("expected {k} covariates, found {}", s.covariates.len())));
    }
    if s.covariates.iter().any(|c| !c.is_finite()) {
        return Err(bad("covariates", "non-finite covariate".into()));
    }
    Ok(())
}

fn csv_err(row: usize, column: &str, e: csv::Error) -> Error {
    Error::Schema { row, column: column.into(), message: e.to_string() }
}

fn io_csv(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Shortest decimal that round-trips, `inf` for the censoring marker.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x.is_nan() {
        "NA".into()
    } else {
        format!("{x}")
    }
}

/// One simulated unit: both potential event times, its frailty and assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialOutcomePair {
    pub t0: f64,
    pub t1: f64,
    /// Frailty; two-level generators store the second level in `z2`.
    pub z: f64,
    pub z2: Option<f64>,
    pub a: u8,
    pub t_obs: f64,
}

impl PotentialOutcomePair {
    pub fn new(t0: f64, t1: f64, z: f64, a: u8) -> Self {
        let t_obs = if a == 1 { t1 } else { t0 };
        Self { t0, t1, z, z2: None, a, t_obs }
    }

    pub fn is_consistent(&self) -> bool {
        self.t_obs == if self.a == 1 { self.t1 } else { self.t0 }
    }
}

/// Writes pairs as `id,t0,t1,z,a,t_obs`.
pub fn write_pairs_csv<W: Write>(pairs: &[PotentialOutcomePair], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "t0", "t1", "z", "a", "t_obs"]).map_err(io_csv)?;
    for (i, p) in pairs.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            fmt_f64(p.t0),
            fmt_f64(p.t1),
            fmt_f64(p.z),
            p.a.to_string(),
            fmt_f64(p.t_obs),
        ])
        .map_err(io_csv)?;
    }
    w.flush()?;
    Ok(())
}

/// Uncensored observed data `(T, A)` from pairs.
pub fn pairs_to_dataset(pairs: &[PotentialOutcomePair]) -> Dataset {
    let samples = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| SurvivalSample::new((i + 1).to_string(), p.t_obs, 1, p.a))
        .collect();
    let latent = pairs.iter().map(|p| Latent { z: p.z, t0: p.t0, t1: p.t1 }).collect();
    Dataset { samples, covariate_names: Vec::new(), latent: Some(latent) }
}
