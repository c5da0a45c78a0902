//! Applies the blood-gas severity rules to a few hand-written panels.

use chrono::NaiveDate;
use copd_severity::labeling::classify_severity;
use copd_severity::{Gender, Measurement, NormalRanges, PatientSample};

fn main() {
    let ranges = NormalRanges::default();
    let t = NaiveDate::from_ymd_opt(2150, 3, 1).unwrap().and_hms_opt(8, 0, 0).unwrap();
    // ph, po2, pco2, be, tco2
    let panels: [(&str, [Option<f64>; 5]); 5] = [
        ("all normal", [Some(7.40), Some(60.0), Some(40.0), Some(0.0), Some(26.0)]),
        ("normal pH, normal PCO2", [Some(7.40), Some(90.0), Some(40.0), Some(8.0), Some(35.0)]),
        ("acidotic, high PCO2", [Some(7.25), Some(60.0), Some(62.0), Some(0.0), Some(26.0)]),
        ("acidotic, companions normal", [Some(7.25), Some(40.0), Some(40.0), Some(0.0), Some(26.0)]),
        ("TCO2 missing", [Some(7.40), Some(60.0), Some(40.0), Some(0.0), None]),
    ];
    let params = [Measurement::Ph, Measurement::Po2, Measurement::Pco2, Measurement::Be, Measurement::Tco2];
    for (name, values) in panels {
        let mut s = PatientSample::empty(1, 1, t, 70.0, Gender::Male);
        for (m, v) in params.iter().zip(values) {
            s.set(*m, v);
        }
        println!("{name:<30} -> {:?}", classify_severity(&s, &ranges));
    }
}
