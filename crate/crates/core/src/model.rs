//! Shared domain types: patient samples, severity labels, normal ranges and
//! the numeric feature encoding used by every model.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature column order. Fixed; echoed into every serialized model and report.
pub const FEATURE_COLUMNS: [&str; 10] = [
    "age",
    "gender_encoded",
    "po2",
    "pco2",
    "ph",
    "be",
    "tco2",
    "hr",
    "rr",
    "spo2",
];

const CHARTTIME_OUT: &str = "%Y-%m-%dT%H:%M";
const CHARTTIME_IN: [&str; 4] = [
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
];

/// Parses a chart timestamp, truncating to minute precision.
pub fn parse_charttime(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    for fmt in CHARTTIME_IN {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            use chrono::Timelike;
            return Ok(t.with_second(0).and_then(|t| t.with_nanosecond(0)).unwrap_or(t));
        }
    }
    Err(Error::parse("charttime", format!("unrecognized timestamp {s:?}")))
}

pub fn format_charttime(t: &NaiveDateTime) -> String {
    t.format(CHARTTIME_OUT).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    /// Numeric encoding: female 0.0, male 1.0.
    pub fn encode(self) -> f64 {
        match self {
            Gender::Female => 0.0,
            Gender::Male => 1.0,
        }
    }

    pub fn decode(value: f64) -> Option<Gender> {
        if value == 0.0 {
            Some(Gender::Female)
        } else if value == 1.0 {
            Some(Gender::Male)
        } else {
            None
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Gender::Female => "F",
            Gender::Male => "M",
        }
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" => Ok(Gender::Female),
            "m" | "male" => Ok(Gender::Male),
            other => Err(Error::parse("gender", format!("expected F or M, got {other:?}"))),
        }
    }
}

impl Serialize for Gender {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Gender {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The eight measured quantities of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measurement {
    Po2,
    Pco2,
    Ph,
    Be,
    Tco2,
    Hr,
    Rr,
    Spo2,
}

impl Measurement {
    pub const ALL: [Measurement; 8] = [
        Measurement::Po2,
        Measurement::Pco2,
        Measurement::Ph,
        Measurement::Be,
        Measurement::Tco2,
        Measurement::Hr,
        Measurement::Rr,
        Measurement::Spo2,
    ];

    /// The five blood-gas parameters that drive the severity rules.
    pub const BLOOD_GAS: [Measurement; 5] = [
        Measurement::Ph,
        Measurement::Po2,
        Measurement::Pco2,
        Measurement::Be,
        Measurement::Tco2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measurement::Po2 => "po2",
            Measurement::Pco2 => "pco2",
            Measurement::Ph => "ph",
            Measurement::Be => "be",
            Measurement::Tco2 => "tco2",
            Measurement::Hr => "hr",
            Measurement::Rr => "rr",
            Measurement::Spo2 => "spo2",
        }
    }

    /// Position of this measurement in [`FEATURE_COLUMNS`].
    pub fn feature_index(self) -> usize {
        match self {
            Measurement::Po2 => 2,
            Measurement::Pco2 => 3,
            Measurement::Ph => 4,
            Measurement::Be => 5,
            Measurement::Tco2 => 6,
            Measurement::Hr => 7,
            Measurement::Rr => 8,
            Measurement::Spo2 => 9,
        }
    }
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One timestamped observation row for an ICU stay.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientSample {
    pub icustay_id: i64,
    pub hadm_id: i64,
    pub charttime: NaiveDateTime,
    pub age: f64,
    pub gender: Gender,
    pub po2: Option<f64>,
    pub pco2: Option<f64>,
    pub ph: Option<f64>,
    pub be: Option<f64>,
    pub tco2: Option<f64>,
    pub hr: Option<f64>,
    pub rr: Option<f64>,
    pub spo2: Option<f64>,
}

impl PatientSample {
    /// A sample with identifiers and demographics set and every measurement missing.
    pub fn empty(icustay_id: i64, hadm_id: i64, charttime: NaiveDateTime, age: f64, gender: Gender) -> Self {
        PatientSample {
            icustay_id,
            hadm_id,
            charttime,
            age,
            gender,
            po2: None,
            pco2: None,
            ph: None,
            be: None,
            tco2: None,
            hr: None,
            rr: None,
            spo2: None,
        }
    }

    pub fn get(&self, m: Measurement) -> Option<f64> {
        match m {
            Measurement::Po2 => self.po2,
            Measurement::Pco2 => self.pco2,
            Measurement::Ph => self.ph,
            Measurement::Be => self.be,
            Measurement::Tco2 => self.tco2,
            Measurement::Hr => self.hr,
            Measurement::Rr => self.rr,
            Measurement::Spo2 => self.spo2,
        }
    }

    pub fn set(&mut self, m: Measurement, value: Option<f64>) {
        let slot = match m {
            Measurement::Po2 => &mut self.po2,
            Measurement::Pco2 => &mut self.pco2,
            Measurement::Ph => &mut self.ph,
            Measurement::Be => &mut self.be,
            Measurement::Tco2 => &mut self.tco2,
            Measurement::Hr => &mut self.hr,
            Measurement::Rr => &mut self.rr,
            Measurement::Spo2 => &mut self.spo2,
        };
        *slot = value;
    }

    /// Checks the value-range invariants. Base excess may be negative; every
    /// other measurement must be positive, and SpO2 must lie in [0, 100].
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.age.is_finite() && self.age >= 0.0) {
            return Err(format!("age {} must be finite and non-negative", self.age));
        }
        for m in Measurement::ALL {
            let Some(v) = self.get(m) else { continue };
            if !v.is_finite() {
                return Err(format!("{m} is not finite"));
            }
            match m {
                Measurement::Be => {}
                Measurement::Spo2 if !(0.0..=100.0).contains(&v) => {
                    return Err(format!("spo2 {v} outside [0, 100]"));
                }
                Measurement::Spo2 => {}
                _ if v <= 0.0 => return Err(format!("{m} {v} must be positive")),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Severity class. Numeric codes: mild-to-moderate 0, severe 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum SeverityLabel {
    MildToModerate,
    Severe,
    #[default]
    Unlabeled,
}

impl SeverityLabel {
    pub fn class_index(self) -> Option<usize> {
        match self {
            SeverityLabel::MildToModerate => Some(0),
            SeverityLabel::Severe => Some(1),
            SeverityLabel::Unlabeled => None,
        }
    }

    pub fn from_class_index(class: usize) -> Option<SeverityLabel> {
        match class {
            0 => Some(SeverityLabel::MildToModerate),
            1 => Some(SeverityLabel::Severe),
            _ => None,
        }
    }

    pub fn is_labeled(self) -> bool {
        self != SeverityLabel::Unlabeled
    }
}

impl fmt::Display for SeverityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeverityLabel::MildToModerate => "0",
            SeverityLabel::Severe => "1",
            SeverityLabel::Unlabeled => "unlabeled",
        })
    }
}

impl FromStr for SeverityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(SeverityLabel::MildToModerate),
            "1" => Ok(SeverityLabel::Severe),
            "unlabeled" | "" => Ok(SeverityLabel::Unlabeled),
            other => Err(Error::parse("label", format!("expected 0, 1 or unlabeled, got {other:?}"))),
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Interval { lo, hi }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Normal ranges of the five blood-gas parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalRanges {
    pub ph: Interval,
    pub po2: Interval,
    pub pco2: Interval,
    pub be: Interval,
    pub tco2: Interval,
}

impl Default for NormalRanges {
    fn default() -> Self {
        NormalRanges {
            ph: Interval::new(7.35, 7.45),
            po2: Interval::new(54.0, 67.6),
            pco2: Interval::new(35.0, 45.0),
            be: Interval::new(-3.0, 3.0),
            tco2: Interval::new(23.0, 29.0),
        }
    }
}

impl NormalRanges {
    pub fn get(&self, m: Measurement) -> Option<Interval> {
        match m {
            Measurement::Ph => Some(self.ph),
            Measurement::Po2 => Some(self.po2),
            Measurement::Pco2 => Some(self.pco2),
            Measurement::Be => Some(self.be),
            Measurement::Tco2 => Some(self.tco2),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for m in Measurement::BLOOD_GAS {
            let iv = self.get(m).expect("blood gas measurement has a range");
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo <= iv.hi) {
                return Err(Error::config(
                    "normal range",
                    format!("{m}: [{}, {}] needs finite bounds with lo <= hi", iv.lo, iv.hi),
                ));
            }
        }
        Ok(())
    }
}

/// Numeric feature table with an explicit missing-value mask.
///
/// Missing cells hold `NaN` in `values`; the mask is the source of truth.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    values: Matrix,
    missing: Vec<bool>,
}

impl FeatureMatrix {
    /// Fully observed matrix with the given column names.
    pub fn dense(columns: Vec<String>, values: Matrix) -> Result<Self> {
        if columns.len() != values.cols() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} columns", columns.len()),
                found: format!("{} columns", values.cols()),
            });
        }
        let missing = vec![false; values.rows() * values.cols()];
        Ok(FeatureMatrix {
            columns,
            values,
            missing,
        })
    }

    /// Matrix from optional cells; `None` becomes a masked entry.
    pub fn from_optional_rows(columns: Vec<String>, rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let d = columns.len();
        let mut values = Matrix::zeros(rows.len(), d);
        let mut missing = vec![false; rows.len() * d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::ShapeMismatch {
                    expected: format!("{d} columns"),
                    found: format!("{} columns in row {i}", row.len()),
                });
            }
            for (j, cell) in row.iter().enumerate() {
                match cell {
                    Some(v) => values.set(i, j, *v),
                    None => {
                        values.set(i, j, f64::NAN);
                        missing[i * d + j] = true;
                    }
                }
            }
        }
        Ok(FeatureMatrix {
            columns,
            values,
            missing,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.cols()
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        if self.is_missing(i, j) {
            None
        } else {
            Some(self.values.get(i, j))
        }
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.n_cols() + j]
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    /// Raw value storage. Masked cells are unspecified.
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// The value matrix, provided no cell is missing.
    pub fn to_dense(&self) -> Result<Matrix> {
        if let Some(pos) = self.missing.iter().position(|&m| m) {
            let d = self.n_cols();
            return Err(Error::Numeric(format!(
                "missing value at row {}, column {}; impute first",
                pos / d,
                self.columns[pos % d]
            )));
        }
        Ok(self.values.clone())
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let d = self.n_cols();
        let mut missing = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            missing.extend_from_slice(&self.missing[i * d..(i + 1) * d]);
        }
        FeatureMatrix {
            columns: self.columns.clone(),
            values: self.values.select_rows(indices),
            missing,
        }
    }

    /// Replaces each masked cell with `fill(column)` and clears the mask.
    pub(crate) fn filled(&self, fill: impl Fn(usize) -> f64) -> FeatureMatrix {
        let d = self.n_cols();
        let mut values = self.values.clone();
        for i in 0..self.n_rows() {
            for j in 0..d {
                if self.missing[i * d + j] {
                    values.set(i, j, fill(j));
                }
            }
        }
        FeatureMatrix {
            columns: self.columns.clone(),
            values,
            missing: vec![false; self.missing.len()],
        }
    }

    pub(crate) fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> FeatureMatrix {
        let mut values = self.values.clone();
        for i in 0..values.rows() {
            for (j, v) in values.row_mut(i).iter_mut().enumerate() {
                *v = f(j, *v);
            }
        }
        FeatureMatrix {
            columns: self.columns.clone(),
            values,
            missing: self.missing.clone(),
        }
    }
}

pub fn patient_columns() -> Vec<String> {
    FEATURE_COLUMNS.iter().map(|c| c.to_string()).collect()
}

/// Encodes samples into the fixed 10-column feature layout, row order preserved.
pub fn encode_features(samples: &[PatientSample]) -> Result<FeatureMatrix> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows: Vec<Vec<Option<f64>>> = samples
        .iter()
        .map(|s| {
            let mut row = Vec::with_capacity(FEATURE_COLUMNS.len());
            row.push(Some(s.age));
            row.push(Some(s.gender.encode()));
            row.extend(Measurement::ALL.iter().map(|&m| s.get(m)));
            row
        })
        .collect();
    FeatureMatrix::from_optional_rows(patient_columns(), &rows)
}

/// Reads the gender column of an encoded matrix back into the enum.
pub fn decode_gender(features: &FeatureMatrix, row: usize) -> Option<Gender> {
    features.value(row, 1).and_then(Gender::decode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn sample(gender: Gender) -> PatientSample {
        let t = parse_charttime("2101-01-01 10:00").unwrap();
        PatientSample {
            icustay_id: 1,
            hadm_id: 2,
            charttime: t,
            age: 70.0,
            gender,
            po2: Some(60.0),
            pco2: Some(40.0),
            ph: Some(7.4),
            be: Some(0.0),
            tco2: Some(25.0),
            hr: Some(80.0),
            rr: Some(18.0),
            spo2: Some(96.0),
        }
    }

    #[test]
    fn fully_observed_sample_encodes_to_one_clean_row() {
        let m = encode_features(&[sample(Gender::Female)]).unwrap();
        assert_eq!(m.n_rows(), 1);
        assert_eq!(m.n_cols(), 10);
        assert!(!m.has_missing());
        let expected = [70.0, 0.0, 60.0, 40.0, 7.4, 0.0, 25.0, 80.0, 18.0, 96.0];
        assert_eq!(m.values().row(0), &expected);
    }

    #[test]
    fn male_encodes_to_one() {
        let m = encode_features(&[sample(Gender::Male)]).unwrap();
        assert_eq!(m.value(0, 1), Some(1.0));
    }

    #[test]
    fn missing_po2_is_masked_at_column_two() {
        let mut s = sample(Gender::Male);
        s.po2 = None;
        let m = encode_features(&[s]).unwrap();
        assert!(m.is_missing(0, 2));
        assert_eq!((0..10).filter(|&j| m.is_missing(0, j)).count(), 1);
        assert_eq!(m.columns()[2], "po2");
    }

    #[test]
    fn empty_input_is_rejected() {
        let err = encode_features(&[]).unwrap_err();
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn boundary_values_are_inside_closed_intervals() {
        let r = NormalRanges::default();
        assert!(r.ph.contains(7.35) && r.ph.contains(7.45));
        assert!(!r.ph.contains(7.3499999));
    }

    #[test]
    fn inverted_range_rejected() {
        let r = NormalRanges {
            ph: Interval::new(7.45, 7.35),
            ..NormalRanges::default()
        };
        assert!(r.validate().is_err());
    }

    #[test]
    fn charttime_accepts_mimic_and_iso_forms() {
        let a = parse_charttime("2101-10-20 19:10:00").unwrap();
        let b = parse_charttime("2101-10-20T19:10").unwrap();
        assert_eq!(a, b);
        assert_eq!(format_charttime(&a), "2101-10-20T19:10");
    }

    #[test]
    fn validate_rejects_out_of_range_spo2() {
        let mut s = sample(Gender::Female);
        s.spo2 = Some(101.0);
        assert!(s.validate().is_err());
        s.spo2 = Some(100.0);
        s.be = Some(-8.0);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn label_codes_round_trip_through_text() {
        for l in [SeverityLabel::MildToModerate, SeverityLabel::Severe, SeverityLabel::Unlabeled] {
            assert_eq!(l.to_string().parse::<SeverityLabel>().unwrap(), l);
        }
        assert_eq!(SeverityLabel::Severe.class_index(), Some(1));
    }

    proptest! {
        #[test]
        fn encoding_preserves_order_and_gender(genders in prop::collection::vec(any::<bool>(), 1..40)) {
            let samples: Vec<PatientSample> = genders
                .iter()
                .enumerate()
                .map(|(i, &male)| {
                    let mut s = sample(if male { Gender::Male } else { Gender::Female });
                    s.age = i as f64;
                    s
                })
                .collect();
            let m = encode_features(&samples).unwrap();
            for (i, s) in samples.iter().enumerate() {
                prop_assert_eq!(m.value(i, 0), Some(i as f64));
                prop_assert_eq!(decode_gender(&m, i), Some(s.gender));
            }
        }
    }
}
