//! Building the wide sample table from raw admission, item and chart tables,
//! plus a seeded synthetic cohort generator.
//!
//! Extraction runs in four steps: pick COPD admissions by ICD-9 prefix,
//! resolve the item ids of the eight measurements, then pivot chart events
//! into one row per `(hadm_id, charttime)` with demographics attached.

mod synthetic;
mod tables;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

pub use synthetic::{
    generate_synthetic_cohort, Category, SyntheticSpec, TargetMix, PHYSIOLOGIC_CAPS, PUBLISHED_LABEL_COUNTS,
};
pub use tables::{
    read_samples_csv, write_samples_csv, ChartEventRow, DemographicsRow, DiagnosisRow, ItemRow, RawTables,
    RAW_TABLE_FILES, SAMPLES_HEADER,
};

use crate::error::{Error, Result};
use crate::model::{Measurement, PatientSample};

pub const DEFAULT_ICD9_PREFIXES: [&str; 4] = ["490", "491", "492", "496"];

/// d_items label used to find each measurement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItemLabels {
    pub po2: String,
    pub pco2: String,
    pub ph: String,
    pub be: String,
    pub tco2: String,
    pub hr: String,
    pub rr: String,
    pub spo2: String,
}

impl Default for ItemLabels {
    fn default() -> Self {
        ItemLabels {
            po2: "Arterial O2 pressure".into(),
            pco2: "Arterial CO2 Pressure".into(),
            ph: "PH (Arterial)".into(),
            be: "Arterial Base Excess".into(),
            tco2: "TCO2 (calc) Arterial".into(),
            hr: "Heart Rate".into(),
            rr: "Respiratory Rate".into(),
            spo2: "O2 saturation pulseoxymetry".into(),
        }
    }
}

impl ItemLabels {
    pub fn label(&self, m: Measurement) -> &str {
        match m {
            Measurement::Po2 => &self.po2,
            Measurement::Pco2 => &self.pco2,
            Measurement::Ph => &self.ph,
            Measurement::Be => &self.be,
            Measurement::Tco2 => &self.tco2,
            Measurement::Hr => &self.hr,
            Measurement::Rr => &self.rr,
            Measurement::Spo2 => &self.spo2,
        }
    }

    pub fn all(&self) -> Vec<String> {
        Measurement::ALL.iter().map(|&m| self.label(m).to_string()).collect()
    }

    /// Resolves every measurement label against `d_items`.
    pub fn resolve(&self, d_items: &[ItemRow]) -> Result<BTreeMap<Measurement, i64>> {
        let ids = resolve_item_ids(d_items, &self.all())?;
        Ok(Measurement::ALL
            .iter()
            .map(|&m| (m, ids[&self.label(m).to_lowercase()]))
            .collect())
    }
}

/// Admissions with at least one diagnosis code starting with one of `prefixes`.
pub fn select_copd_admissions(diagnoses: &[DiagnosisRow], prefixes: &[String]) -> Result<BTreeSet<i64>> {
    if prefixes.is_empty() {
        return Err(Error::NoDiagnosisCodes);
    }
    Ok(diagnoses
        .iter()
        .filter(|d| {
            let code = d.icd9_code.trim();
            prefixes.iter().any(|p| code.starts_with(p.as_str()))
        })
        .map(|d| d.hadm_id)
        .collect())
}

/// Maps each wanted label (lowercased) to its item id. Matching is exact up
/// to ASCII case; a label present on two rows is ambiguous.
pub fn resolve_item_ids(d_items: &[ItemRow], wanted_labels: &[String]) -> Result<BTreeMap<String, i64>> {
    if wanted_labels.is_empty() {
        return Err(Error::config("item labels", "no labels requested"));
    }
    let mut out = BTreeMap::new();
    for wanted in wanted_labels {
        let key = wanted.trim().to_lowercase();
        let mut hits = d_items.iter().filter(|r| r.label.trim().to_lowercase() == key);
        let first = hits.next().ok_or_else(|| Error::UnresolvedLabel(wanted.clone()))?;
        if hits.next().is_some() {
            return Err(Error::AmbiguousItem(wanted.clone()));
        }
        out.insert(key, first.itemid);
    }
    Ok(out)
}

/// Data-quality counters collected while pivoting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotWarnings {
    /// Rows whose value was NaN or infinite.
    pub non_finite_values: usize,
    /// Measurements overwritten by a later row of the same group.
    pub duplicate_measurements: usize,
    /// Rows without a value.
    pub empty_values: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotOutput {
    pub samples: Vec<PatientSample>,
    pub warnings: PivotWarnings,
}

/// Groups chart events by `(hadm_id, charttime)` into samples, sorted by
/// that key. Within a group the last row for an item wins. The group's
/// `icustay_id` is taken from its first contributing row.
pub fn pivot_chartevents(
    chartevents: &[ChartEventRow],
    admissions: &BTreeSet<i64>,
    item_map: &BTreeMap<Measurement, i64>,
    demographics: &[DemographicsRow],
) -> Result<PivotOutput> {
    for m in Measurement::ALL {
        if !item_map.contains_key(&m) {
            return Err(Error::config("item map", format!("no itemid for {m}")));
        }
    }
    let by_item: HashMap<i64, Measurement> = item_map.iter().map(|(&m, &id)| (id, m)).collect();
    let demo: HashMap<i64, &DemographicsRow> = demographics.iter().map(|d| (d.hadm_id, d)).collect();

    let mut warnings = PivotWarnings::default();
    let mut groups: BTreeMap<(i64, NaiveDateTime), (i64, BTreeMap<Measurement, f64>)> = BTreeMap::new();
    for row in chartevents {
        if !admissions.contains(&row.hadm_id) {
            continue;
        }
        let Some(&m) = by_item.get(&row.itemid) else { continue };
        let value = match row.valuenum {
            None => {
                warnings.empty_values += 1;
                continue;
            }
            Some(v) if !v.is_finite() => {
                warnings.non_finite_values += 1;
                continue;
            }
            Some(v) => v,
        };
        let (_, values) = groups
            .entry((row.hadm_id, row.charttime))
            .or_insert_with(|| (row.icustay_id, BTreeMap::new()));
        if values.insert(m, value).is_some() {
            warnings.duplicate_measurements += 1;
        }
    }

    let missing: BTreeSet<i64> = groups
        .keys()
        .map(|&(hadm, _)| hadm)
        .filter(|h| !demo.contains_key(h))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingDemographics(missing.into_iter().collect()));
    }

    let mut samples = Vec::with_capacity(groups.len());
    for (index, ((hadm_id, charttime), (icustay_id, values))) in groups.into_iter().enumerate() {
        let d = demo[&hadm_id];
        let mut s = PatientSample::empty(icustay_id, hadm_id, charttime, d.age, d.gender);
        for (m, v) in values {
            s.set(m, Some(v));
        }
        s.validate().map_err(|reason| Error::InvalidSample { index, reason })?;
        samples.push(s);
    }
    if warnings.non_finite_values > 0 || warnings.duplicate_measurements > 0 {
        log::warn!(
            "pivot: skipped {} non-finite values, overwrote {} duplicate measurements",
            warnings.non_finite_values,
            warnings.duplicate_measurements
        );
    }
    Ok(PivotOutput { samples, warnings })
}

/// Settings for [`extract_samples`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub icd9_prefixes: Vec<String>,
    pub item_labels: ItemLabels,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            icd9_prefixes: DEFAULT_ICD9_PREFIXES.iter().map(|s| s.to_string()).collect(),
            item_labels: ItemLabels::default(),
        }
    }
}

/// Runs the whole extraction over loaded tables.
pub fn extract_samples(tables: &RawTables, cfg: &ExtractionConfig) -> Result<PivotOutput> {
    let admissions = select_copd_admissions(&tables.diagnoses, &cfg.icd9_prefixes)?;
    let item_map = cfg.item_labels.resolve(&tables.d_items)?;
    pivot_chartevents(&tables.chartevents, &admissions, &item_map, &tables.demographics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_charttime, Gender};

    fn diag(hadm: i64, code: &str) -> DiagnosisRow {
        DiagnosisRow {
            subject_id: hadm * 10,
            hadm_id: hadm,
            seq_num: Some(1),
            icd9_code: code.into(),
        }
    }

    fn item(id: i64, label: &str) -> ItemRow {
        ItemRow {
            itemid: id,
            label: label.into(),
        }
    }

    fn event(hadm: i64, item: i64, time: &str, v: Option<f64>) -> ChartEventRow {
        ChartEventRow {
            subject_id: 1,
            hadm_id: hadm,
            icustay_id: hadm + 1000,
            itemid: item,
            charttime: parse_charttime(time).unwrap(),
            valuenum: v,
        }
    }

    fn item_map() -> BTreeMap<Measurement, i64> {
        Measurement::ALL.iter().enumerate().map(|(i, &m)| (m, 100 + i as i64)).collect()
    }

    fn demo(hadm: i64) -> DemographicsRow {
        DemographicsRow {
            hadm_id: hadm,
            age: 71.0,
            gender: Gender::Male,
        }
    }

    const PO2: i64 = 100;
    const PH: i64 = 102;

    #[test]
    fn prefix_filter_keeps_only_matching_codes() {
        let rows = [diag(1, "49121"), diag(2, "4280")];
        let got = select_copd_admissions(&rows, &["491".into()]).unwrap();
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn exact_code_matches_its_own_prefix() {
        let got = select_copd_admissions(&[diag(5, "496")], &["496".into()]).unwrap();
        assert!(got.contains(&5));
    }

    #[test]
    fn empty_diagnoses_give_empty_set() {
        assert!(select_copd_admissions(&[], &["491".into()]).unwrap().is_empty());
    }

    #[test]
    fn empty_prefix_list_is_an_error() {
        let err = select_copd_admissions(&[diag(1, "491")], &[]).unwrap_err();
        assert_eq!(err.to_string(), "no diagnosis codes configured");
    }

    #[test]
    fn item_lookup_ignores_case() {
        let got = resolve_item_ids(&[item(220045, "Heart Rate")], &["heart rate".into()]).unwrap();
        assert_eq!(got["heart rate"], 220045);
    }

    #[test]
    fn missing_item_label_is_named() {
        let err = resolve_item_ids(&[item(1, "Heart Rate")], &["Respiratory Rate".into()]).unwrap_err();
        assert!(err.to_string().contains("Respiratory Rate"));
    }

    #[test]
    fn shared_label_is_ambiguous() {
        let err = resolve_item_ids(&[item(1, "Heart Rate"), item(2, "heart rate")], &["Heart Rate".into()])
            .unwrap_err();
        assert!(err.to_string().contains("ambiguous itemid"));
    }

    #[test]
    fn same_time_rows_merge_into_one_sample() {
        let events = [event(1, PH, "2101-01-01 10:00", Some(7.31)), event(1, PO2, "2101-01-01 10:00", Some(58.0))];
        let out = pivot_chartevents(&events, &BTreeSet::from([1]), &item_map(), &[demo(1)]).unwrap();
        assert_eq!(out.samples.len(), 1);
        let s = &out.samples[0];
        assert_eq!((s.ph, s.po2, s.pco2), (Some(7.31), Some(58.0), None));
        assert_eq!(s.icustay_id, 1001);
        assert_eq!(s.gender, Gender::Male);
    }

    #[test]
    fn distinct_times_give_distinct_samples_in_key_order() {
        let events = [event(1, PH, "2101-01-01 11:00", Some(7.3)), event(1, PH, "2101-01-01 10:00", Some(7.4))];
        let out = pivot_chartevents(&events, &BTreeSet::from([1]), &item_map(), &[demo(1)]).unwrap();
        assert_eq!(out.samples.len(), 2);
        assert_eq!(out.samples[0].ph, Some(7.4));
    }

    #[test]
    fn duplicate_item_last_row_wins() {
        let events = [event(1, PH, "2101-01-01 10:00", Some(7.2)), event(1, PH, "2101-01-01 10:00", Some(7.4))];
        let out = pivot_chartevents(&events, &BTreeSet::from([1]), &item_map(), &[demo(1)]).unwrap();
        assert_eq!(out.samples[0].ph, Some(7.4));
        assert_eq!(out.warnings.duplicate_measurements, 1);
    }

    #[test]
    fn non_finite_values_are_skipped_and_counted() {
        let events = [
            event(1, PH, "2101-01-01 10:00", Some(f64::NAN)),
            event(1, PO2, "2101-01-01 11:00", Some(60.0)),
        ];
        let out = pivot_chartevents(&events, &BTreeSet::from([1]), &item_map(), &[demo(1)]).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.warnings.non_finite_values, 1);
    }

    #[test]
    fn groups_without_any_value_are_dropped() {
        let events = [event(1, PH, "2101-01-01 10:00", None), event(1, 999, "2101-01-01 12:00", Some(3.0))];
        let out = pivot_chartevents(&events, &BTreeSet::from([1]), &item_map(), &[demo(1)]).unwrap();
        assert!(out.samples.is_empty());
    }

    #[test]
    fn unselected_admissions_are_ignored() {
        let events = [event(2, PH, "2101-01-01 10:00", Some(7.4))];
        let out = pivot_chartevents(&events, &BTreeSet::from([1]), &item_map(), &[demo(1)]).unwrap();
        assert!(out.samples.is_empty());
    }

    #[test]
    fn missing_demographics_lists_ids() {
        let events = [event(1, PH, "2101-01-01 10:00", Some(7.4)), event(3, PH, "2101-01-01 10:00", Some(7.4))];
        let err = pivot_chartevents(&events, &BTreeSet::from([1, 3]), &item_map(), &[demo(1)]).unwrap_err();
        match err {
            Error::MissingDemographics(ids) => assert_eq!(ids, vec![3]),
            other => panic!("unexpected {other}"),
        }
    }
}
