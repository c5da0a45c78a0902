//! CSV readers and writers for the raw MIMIC-shaped tables and the wide
//! `samples.csv` table.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::model::{format_charttime, parse_charttime, Gender, Measurement, PatientSample};

pub const SAMPLES_HEADER: [&str; 13] = [
    "icustay_id",
    "hadm_id",
    "charttime",
    "age",
    "gender",
    "po2",
    "pco2",
    "ph",
    "be",
    "tco2",
    "hr",
    "rr",
    "spo2",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRow {
    pub subject_id: i64,
    pub hadm_id: i64,
    pub seq_num: Option<i64>,
    pub icd9_code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRow {
    pub itemid: i64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ChartEventRow {
    pub subject_id: i64,
    pub hadm_id: i64,
    pub icustay_id: i64,
    pub itemid: i64,
    #[serde(deserialize_with = "de_charttime")]
    pub charttime: NaiveDateTime,
    pub valuenum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicsRow {
    pub hadm_id: i64,
    pub age: f64,
    pub gender: Gender,
}

fn de_charttime<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<NaiveDateTime, D::Error> {
    let s = String::deserialize(d)?;
    parse_charttime(&s).map_err(serde::de::Error::custom)
}

/// The four source tables needed to build the sample table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawTables {
    pub diagnoses: Vec<DiagnosisRow>,
    pub d_items: Vec<ItemRow>,
    pub chartevents: Vec<ChartEventRow>,
    pub demographics: Vec<DemographicsRow>,
}

pub const RAW_TABLE_FILES: [&str; 4] = ["diagnoses.csv", "d_items.csv", "chartevents.csv", "demographics.csv"];

fn read_table<T: for<'de> Deserialize<'de>, R: Read>(reader: R, name: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::parse(name, format!("record {}: {e}", i + 1))))
        .collect()
}

fn open(dir: &Path, name: &str) -> Result<File> {
    let path = dir.join(name);
    File::open(&path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

impl RawTables {
    /// Loads `diagnoses.csv`, `d_items.csv`, `chartevents.csv` and
    /// `demographics.csv` from `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(RawTables {
            diagnoses: read_table(open(dir, "diagnoses.csv")?, "diagnoses.csv")?,
            d_items: read_table(open(dir, "d_items.csv")?, "d_items.csv")?,
            chartevents: read_table(open(dir, "chartevents.csv")?, "chartevents.csv")?,
            demographics: read_table(open(dir, "demographics.csv")?, "demographics.csv")?,
        })
    }

    pub fn read_diagnoses<R: Read>(reader: R) -> Result<Vec<DiagnosisRow>> {
        read_table(reader, "diagnoses.csv")
    }

    pub fn read_d_items<R: Read>(reader: R) -> Result<Vec<ItemRow>> {
        read_table(reader, "d_items.csv")
    }

    pub fn read_chartevents<R: Read>(reader: R) -> Result<Vec<ChartEventRow>> {
        read_table(reader, "chartevents.csv")
    }

    pub fn read_demographics<R: Read>(reader: R) -> Result<Vec<DemographicsRow>> {
        read_table(reader, "demographics.csv")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the wide sample table. Empty cells mark missing measurements.
pub fn write_samples_csv<W: Write>(writer: W, samples: &[PatientSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SAMPLES_HEADER)?;
    for s in samples {
        let mut rec = vec![
            s.icustay_id.to_string(),
            s.hadm_id.to_string(),
            format_charttime(&s.charttime),
            s.age.to_string(),
            s.gender.code().to_string(),
        ];
        rec.extend(Measurement::ALL.iter().map(|&m| fmt_opt(s.get(m))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `samples.csv`, validating header and value ranges.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<PatientSample>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SAMPLES_HEADER {
        return Err(Error::parse(
            "samples.csv",
            format!("expected header {}, got {}", SAMPLES_HEADER.join(","), header.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let ctx = |field: &str| format!("samples.csv row {} field {field}", i + 1);
        let int = |j: usize| -> Result<i64> {
            rec[j].trim().parse().map_err(|e| Error::parse(ctx(SAMPLES_HEADER[j]), format!("{e}")))
        };
        let real = |j: usize| -> Result<Option<f64>> {
            let cell = rec[j].trim();
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse()
                .map(Some)
                .map_err(|e| Error::parse(ctx(SAMPLES_HEADER[j]), format!("{e}")))
        };
        let age = real(3)?.ok_or_else(|| Error::parse(ctx("age"), "age is required"))?;
        let mut s = PatientSample::empty(int(0)?, int(1)?, parse_charttime(&rec[2])?, age, rec[4].parse()?);
        for (k, m) in Measurement::ALL.iter().enumerate() {
            s.set(*m, real(5 + k)?);
        }
        s.validate().map_err(|reason| Error::InvalidSample { index: i, reason })?;
        out.push(s);
    }
    Ok(out)
}
