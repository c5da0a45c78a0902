//! Rule-based initial severity labeling from the five blood-gas parameters.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Measurement, NormalRanges, PatientSample, SeverityLabel};

/// Counts of each initial label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelSummary {
    pub n_mild: usize,
    pub n_severe: usize,
    pub n_unlabeled: usize,
}

impl LabelSummary {
    pub fn from_labels(labels: &[SeverityLabel]) -> Self {
        let mut s = LabelSummary::default();
        for l in labels {
            match l {
                SeverityLabel::MildToModerate => s.n_mild += 1,
                SeverityLabel::Severe => s.n_severe += 1,
                SeverityLabel::Unlabeled => s.n_unlabeled += 1,
            }
        }
        s
    }

    pub fn total(&self) -> usize {
        self.n_mild + self.n_severe + self.n_unlabeled
    }
}

/// Blood-gas panel used by the rules: ph, po2, pco2, be, tco2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BloodGas {
    pub ph: f64,
    pub po2: f64,
    pub pco2: f64,
    pub be: f64,
    pub tco2: f64,
}

impl BloodGas {
    /// `None` when any of the five parameters is missing.
    pub fn from_sample(sample: &PatientSample) -> Option<Self> {
        Some(BloodGas {
            ph: sample.get(Measurement::Ph)?,
            po2: sample.get(Measurement::Po2)?,
            pco2: sample.get(Measurement::Pco2)?,
            be: sample.get(Measurement::Be)?,
            tco2: sample.get(Measurement::Tco2)?,
        })
    }
}

/// Applies the severity cascade to a complete panel.
///
/// Checked in order: all five normal, then normal pH with a normal PCO2, TCO2
/// or BE (mild); all five abnormal, then abnormal pH with an abnormal PCO2,
/// TCO2 or BE (severe). PO2 only takes part in the all-five conditions.
pub fn classify_panel(gas: &BloodGas, ranges: &NormalRanges) -> SeverityLabel {
    let ph = ranges.ph.contains(gas.ph);
    let po2 = ranges.po2.contains(gas.po2);
    let pco2 = ranges.pco2.contains(gas.pco2);
    let be = ranges.be.contains(gas.be);
    let tco2 = ranges.tco2.contains(gas.tco2);

    if ph && po2 && pco2 && be && tco2 {
        SeverityLabel::MildToModerate
    } else if ph && (pco2 || tco2 || be) {
        SeverityLabel::MildToModerate
    } else if !ph && !po2 && !pco2 && !be && !tco2 {
        SeverityLabel::Severe
    } else if !ph && (!pco2 || !tco2 || !be) {
        SeverityLabel::Severe
    } else {
        SeverityLabel::Unlabeled
    }
}

/// Severity label of one sample. Any missing blood-gas parameter leaves the
/// sample unlabeled.
pub fn classify_severity(sample: &PatientSample, ranges: &NormalRanges) -> SeverityLabel {
    match BloodGas::from_sample(sample) {
        Some(gas) => classify_panel(&gas, ranges),
        None => SeverityLabel::Unlabeled,
    }
}

pub fn label_dataset(samples: &[PatientSample], ranges: &NormalRanges) -> (Vec<SeverityLabel>, LabelSummary) {
    let labels: Vec<SeverityLabel> = samples.iter().map(|s| classify_severity(s, ranges)).collect();
    let summary = LabelSummary::from_labels(&labels);
    (labels, summary)
}

/// Writes `row_index,label` rows.
pub fn write_labels_csv<W: Write>(writer: W, labels: &[SeverityLabel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row_index", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `row_index,label` file; rows must be listed in index order.
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<SeverityLabel>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("row_index") || headers.get(1) != Some("label") {
        return Err(Error::parse("labels.csv", "expected header row_index,label"));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let idx: usize = rec
            .get(0)
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::parse("labels.csv", format!("row {i}: {e}")))?;
        if idx != i {
            return Err(Error::parse("labels.csv", format!("row {i} has row_index {idx}")));
        }
        out.push(rec.get(1).unwrap_or_default().parse()?);
    }
    Ok(out)
}
